//! Response surfaces, their noisy samplers and the ground-truth ranking classifier.
//!
//! A [`SurfaceSet`] holds `L` deterministic mean functions `mu_l` over a box in
//! `R^d`, each observed through `Y_l(x) = mu_l(x) + sigma_l * Z`. The ranking
//! classifier labels every point with the (1-based) index of the minimal surface.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// 1-based index of a surface (or class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u16);

impl Label {
    pub fn new(index: usize, count: usize) -> Result<Self> {
        if index == 0 || index > count {
            return Err(Error::Domain(format!("label {index} outside 1..={count}")));
        }
        Ok(Label(index as u16))
    }

    /// Zero-based position, for indexing arrays.
    pub fn index0(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index0(i: usize) -> Self {
        Label(i as u16 + 1)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "domain bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "domain axis {i} has non-positive side [{lo}, {hi}]"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Domain::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, lo), hi)| {
                    let slack = 1e-12 * (hi - lo);
                    *v >= lo - slack && *v <= hi + slack
                })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {x:?} outside domain box")))
        }
    }

    /// Affine map of the box onto `[-1, 1]^d`.
    pub fn to_unit(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            out[i] = 2.0 * (x[i] - lo) / (hi - lo) - 1.0;
        }
    }
}

pub type SurfaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A family of `L >= 2` response surfaces over a common domain.
#[derive(Clone)]
pub struct SurfaceSet {
    domain: Domain,
    surfaces: Vec<SurfaceFn>,
    noise_sd: Vec<f64>,
}

impl fmt::Debug for SurfaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceSet")
            .field("domain", &self.domain)
            .field("count", &self.surfaces.len())
            .field("noise_sd", &self.noise_sd)
            .finish()
    }
}

impl SurfaceSet {
    pub fn new(domain: Domain, surfaces: Vec<SurfaceFn>, noise_sd: Vec<f64>) -> Result<Self> {
        if surfaces.len() < 2 {
            return Err(Error::Config("need at least two surfaces".into()));
        }
        if noise_sd.len() != surfaces.len() {
            return Err(Error::Config(format!(
                "{} surfaces but {} noise levels",
                surfaces.len(),
                noise_sd.len()
            )));
        }
        if noise_sd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("noise levels must be finite and >= 0".into()));
        }
        Ok(SurfaceSet {
            domain,
            surfaces,
            noise_sd,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn count(&self) -> usize {
        self.surfaces.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    /// Same means, different noise levels.
    pub fn with_noise(&self, noise_sd: Vec<f64>) -> Result<Self> {
        SurfaceSet::new(self.domain.clone(), self.surfaces.clone(), noise_sd)
    }

    /// Adds `c` to every surface.
    pub fn shifted(&self, c: f64) -> Self {
        let surfaces = self
            .surfaces
            .iter()
            .map(|f| {
                let f = Arc::clone(f);
                Arc::new(move |x: &[f64]| f(x) + c) as SurfaceFn
            })
            .collect();
        SurfaceSet {
            domain: self.domain.clone(),
            surfaces,
            noise_sd: self.noise_sd.clone(),
        }
    }

    fn check_label(&self, ell: Label) -> Result<usize> {
        if ell.0 == 0 || ell.0 as usize > self.count() {
            return Err(Error::Domain(format!(
                "label {} outside 1..={}",
                ell.0,
                self.count()
            )));
        }
        Ok(ell.index0())
    }

    /// Noiseless mean `mu_l(x)`.
    pub fn eval(&self, ell: Label, x: &[f64]) -> Result<f64> {
        let i = self.check_label(ell)?;
        self.domain.check(x)?;
        Ok((self.surfaces[i])(x))
    }

    /// One draw of `Y_l(x)`.
    pub fn sample(&self, ell: Label, x: &[f64], rng: &mut Rng) -> Result<f64> {
        let mu = self.eval(ell, x)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(mu + self.noise_sd[ell.index0()] * z)
    }

    /// Index of the minimal mean; the smallest index wins ties.
    pub fn true_classifier(&self, x: &[f64]) -> Result<Label> {
        self.domain.check(x)?;
        Ok(argmin_label(self.surfaces.iter().map(|f| f(x))))
    }

    /// Argmin of one independent draw per surface.
    pub fn noisy_label(&self, x: &[f64], rng: &mut Rng) -> Result<Label> {
        self.domain.check(x)?;
        let draws: Vec<f64> = self
            .surfaces
            .iter()
            .zip(&self.noise_sd)
            .map(|(f, sd)| {
                let z: f64 = rng.sample(StandardNormal);
                f(x) + sd * z
            })
            .collect();
        Ok(argmin_label(draws))
    }
}

/// Argmin with smallest-index tie-break.
pub fn argmin_label(values: impl IntoIterator<Item = f64>) -> Label {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v < best_val {
            best = i;
            best_val = v;
        }
    }
    Label::from_index0(best)
}

/// Points with probability weights; the discrete stand-in for the loss measure.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EvalGrid {
    pub fn uniform(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        Ok(EvalGrid {
            dim,
            coords,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn weighted(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let grid = EvalGrid::uniform(dim, coords)?;
        if weights.len() != grid.len() {
            return Err(Error::Shape("one weight per point required".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(
                "weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(EvalGrid { weights, ..grid })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Weighted mislabeled fraction; `1 - accuracy` under uniform weights.
pub fn ranking_loss(predicted: &[Label], truth: &[Label], grid: &EvalGrid) -> Result<f64> {
    if predicted.len() != grid.len() || truth.len() != grid.len() {
        return Err(Error::Shape(format!(
            "label maps of length {} and {} on a grid of {} points",
            predicted.len(),
            truth.len(),
            grid.len()
        )));
    }
    let loss: f64 = predicted
        .iter()
        .zip(truth)
        .zip(&grid.weights)
        .filter(|((p, t), _)| p != t)
        .map(|(_, w)| *w)
        .sum();
    Ok(loss.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Built-in examples

/// Two surfaces on `[0, 1]`: a damped oscillation against the constant 0.5.
pub fn make_1d_example() -> SurfaceSet {
    let mu1: SurfaceFn = Arc::new(|x: &[f64]| {
        let x = x[0];
        0.625 * ((10.0 * x).sin() / (1.0 + x) + 2.0 * x.powi(3) * (5.0 * x).cos() + 0.841)
    });
    let mu2: SurfaceFn = Arc::new(|_: &[f64]| 0.5);
    SurfaceSet::new(
        Domain::cube(1, 0.0, 1.0).expect("static domain"),
        vec![mu1, mu2],
        vec![0.2, 0.1],
    )
    .expect("static surface set")
}

/// Five quadratic/trigonometric surfaces on `[-2, 2]^2`, all with noise 0.5.
pub fn make_2d_example() -> SurfaceSet {
    let surfaces: Vec<SurfaceFn> = vec![
        Arc::new(|x: &[f64]| 2.0 - x[0] * x[0] - 0.5 * x[1] * x[1]),
        Arc::new(|x: &[f64]| 2.0 * (x[0] - 1.0).powi(2) + 2.0 * x[1] * x[1] - 2.0),
        Arc::new(|x: &[f64]| 2.0 * (2.0 * x[0]).sin() + 2.0),
        Arc::new(|x: &[f64]| 8.0 * (x[0] - 1.0).powi(2) + 8.0 * x[1] * x[1] - 3.0),
        Arc::new(|x: &[f64]| 0.5 * (x[0] + 3.0).powi(2) + 16.0 * x[1] * x[1] - 6.0),
    ];
    SurfaceSet::new(
        Domain::cube(2, -2.0, 2.0).expect("static domain"),
        surfaces,
        vec![0.5; 5],
    )
    .expect("static surface set")
}

/// Exponent applied to `(x_i - 1)` in the Trid surface of the 10-D example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TridExponent {
    /// The dimension `d`, as printed in the surface table.
    #[default]
    Dimension,
    /// The classical Trid form.
    Square,
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Hartmann 6-D on its native `[0, 1]^6`.
pub fn hartmann6(u: &[f64]) -> f64 {
    -HARTMANN_ALPHA
        .iter()
        .zip(HARTMANN_A.iter().zip(&HARTMANN_P))
        .map(|(alpha, (a, p))| {
            let inner: f64 = (0..6).map(|j| a[j] * (u[j] - p[j]).powi(2)).sum();
            alpha * (-inner).exp()
        })
        .sum::<f64>()
}

pub const TEN_D: usize = 10;

/// Three surfaces on `[-1, 1]^10`: embedded Hartmann-6, rescaled
/// Styblinski-Tang and rescaled Trid. Zero noise unless `noise_sd` is given.
pub fn make_10d_example(noise_sd: Option<&[f64]>) -> Result<SurfaceSet> {
    make_10d_example_with(noise_sd, TridExponent::default())
}

pub fn make_10d_example_with(noise_sd: Option<&[f64]>, trid: TridExponent) -> Result<SurfaceSet> {
    let noise = match noise_sd {
        None => vec![0.0; 3],
        Some(s) if s.len() == 3 => s.to_vec(),
        Some(s) => {
            return Err(Error::Config(format!(
                "10-D example takes 3 noise levels, got {}",
                s.len()
            )))
        }
    };
    let d = TEN_D;
    // Coordinates 1..6 mapped from [-1, 1] onto Hartmann's [0, 1]; 7..10 unused.
    let hartmann: SurfaceFn = Arc::new(|x: &[f64]| {
        let mut u = [0.0; 6];
        for (ui, xi) in u.iter_mut().zip(x) {
            *ui = 0.5 * (xi + 1.0);
        }
        hartmann6(&u)
    });
    let styblinski: SurfaceFn = Arc::new(move |x: &[f64]| {
        let s: f64 = x
            .iter()
            .map(|v| 625.0 * v.powi(4) - 400.0 * v * v + 25.0 * v)
            .sum();
        s / (2.0 * d as f64)
    });
    let exponent = match trid {
        TridExponent::Dimension => d as i32,
        TridExponent::Square => 2,
    };
    let trid_fn: SurfaceFn = Arc::new(move |x: &[f64]| {
        let power: f64 = x.iter().map(|v| (v - 1.0).powi(exponent)).sum();
        let cross: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
        0.5 * (power - cross) - 5.0
    });
    SurfaceSet::new(
        Domain::cube(d, -1.0, 1.0)?,
        vec![hartmann, styblinski, trid_fn],
        noise,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn l(i: u16) -> Label {
        Label(i)
    }

    #[test]
    fn eval_1d_examples() {
        let s = make_1d_example();
        assert_eq!(s.eval(l(2), &[0.37]).unwrap(), 0.5);
        assert!((s.eval(l(1), &[0.0]).unwrap() - 0.525625).abs() < 1e-12);
    }

    #[test]
    fn eval_2d_examples() {
        let s = make_2d_example();
        assert_eq!(s.eval(l(1), &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(s.eval(l(3), &[0.0, 1.3]).unwrap(), 2.0);
        let mus: Vec<f64> = (1..=5)
            .map(|i| s.eval(l(i), &[0.0, 0.0]).unwrap())
            .collect();
        assert_eq!(mus, vec![2.0, 0.0, 2.0, 5.0, -1.5]);
    }

    #[test]
    fn eval_10d_styblinski_at_minimizer() {
        let s = make_10d_example(None).unwrap();
        let x = [-0.5807068; 10];
        // frozen from direct evaluation: (625u^4 - 400u^2 + 25u) / 2
        assert!((s.eval(l(2), &x).unwrap() - (-39.166_165_703_771_4)).abs() < 1e-6);
    }

    #[test]
    fn hartmann_at_embedded_minimizer() {
        let s = make_10d_example(None).unwrap();
        let star = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        let mut x = [0.3; 10];
        for (xi, u) in x.iter_mut().zip(star) {
            *xi = 2.0 * u - 1.0;
        }
        let v = s.eval(l(1), &x).unwrap();
        assert!((v - (-3.322_368_011)).abs() < 1e-6, "{v}");
        // trailing coordinates do not matter
        x[9] = -0.9;
        assert_eq!(s.eval(l(1), &x).unwrap(), v);
    }

    #[test]
    fn trid_exponent_switch() {
        let lit = make_10d_example(None).unwrap();
        let sq = make_10d_example_with(None, TridExponent::Square).unwrap();
        let x = [0.0; 10];
        // (0-1)^10 summed = 10 vs (0-1)^2 summed = 10; both give 0.5*10 - 5 = 0
        assert_eq!(lit.eval(l(3), &x).unwrap(), 0.0);
        assert_eq!(sq.eval(l(3), &x).unwrap(), 0.0);
        let x = [-1.0; 10];
        // 2^10 * 10 = 10240, cross = 9
        assert_eq!(lit.eval(l(3), &x).unwrap(), 0.5 * (10240.0 - 9.0) - 5.0);
        assert_eq!(sq.eval(l(3), &x).unwrap(), 0.5 * (40.0 - 9.0) - 5.0);
    }

    #[test]
    fn ten_d_rejects_wrong_noise_length() {
        assert!(matches!(
            make_10d_example(Some(&[0.1, 0.2])),
            Err(Error::Config(_))
        ));
        let s = make_10d_example(Some(&[0.5, 0.4, 0.45])).unwrap();
        assert_eq!(s.noise_sd(), &[0.5, 0.4, 0.45]);
    }

    #[test]
    fn domain_and_label_errors() {
        let s = make_1d_example();
        assert!(matches!(s.eval(l(3), &[0.5]), Err(Error::Domain(_))));
        assert!(matches!(s.eval(l(0), &[0.5]), Err(Error::Domain(_))));
        assert!(matches!(s.eval(l(1), &[1.5]), Err(Error::Domain(_))));
        assert!(matches!(s.true_classifier(&[-0.1]), Err(Error::Domain(_))));
        assert!(Label::new(3, 2).is_err());
        assert!(Domain::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn true_classifier_examples() {
        let s = make_1d_example();
        assert_eq!(s.true_classifier(&[0.5]).unwrap(), l(1));
        assert_eq!(s.true_classifier(&[0.1]).unwrap(), l(2));
        let s2 = make_2d_example();
        assert_eq!(s2.true_classifier(&[0.0, 0.0]).unwrap(), l(5));
        assert_eq!(s2.true_classifier(&[1.5, 0.0]).unwrap(), l(2));
    }

    #[test]
    fn boundaries_recovered_by_bisection() {
        let s = make_1d_example();
        let diff = |x: f64| s.eval(l(1), &[x]).unwrap() - 0.5;
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if diff(a).signum() == diff(m).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        assert!((bisect(0.25, 0.40) - 0.3193).abs() < 5e-5);
        assert!((bisect(0.85, 0.99) - 0.9279).abs() < 5e-5);
    }

    #[test]
    fn zero_noise_sample_is_exact() {
        let s = make_2d_example().with_noise(vec![0.0; 5]).unwrap();
        let mut rng = seeded(3);
        for i in 1..=5 {
            let x = [0.3, -1.1];
            assert_eq!(
                s.sample(l(i), &x, &mut rng).unwrap(),
                s.eval(l(i), &x).unwrap()
            );
        }
    }

    #[test]
    fn sample_reproducible_under_same_state() {
        let s = make_1d_example();
        let a = s.sample(l(1), &[0.2], &mut seeded(11)).unwrap();
        let b = s.sample(l(1), &[0.2], &mut seeded(11)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sample_moments_1d() {
        let s = make_1d_example();
        let mut rng = seeded(5);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| s.sample(l(1), &[0.2], &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let mu = s.eval(l(1), &[0.2]).unwrap();
        assert!(
            (mean - mu).abs() < 3.0 * 0.2 / (n as f64).sqrt(),
            "{mean} vs {mu}"
        );
        assert!((var.sqrt() - 0.2).abs() < 0.005);
    }

    fn normal_cdf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 on erf, |error| < 1.5e-7
        let z = x.abs() / std::f64::consts::SQRT_2;
        let t = 1.0 / (1.0 + 0.327_591_1 * z);
        let poly = t
            * (0.254_829_592
                + t * (-0.284_496_736
                    + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
        let erf = 1.0 - poly * (-z * z).exp();
        if x >= 0.0 {
            0.5 * (1.0 + erf)
        } else {
            0.5 * (1.0 - erf)
        }
    }

    fn mislabel_rate(s: &SurfaceSet, x: f64, n: usize, seed: u64) -> f64 {
        let truth = s.true_classifier(&[x]).unwrap();
        let mut rng = seeded(seed);
        (0..n)
            .filter(|_| s.noisy_label(&[x], &mut rng).unwrap() != truth)
            .count() as f64
            / n as f64
    }

    #[test]
    fn noisy_label_rate_matches_gaussian_oracle() {
        let s = make_1d_example();
        let gap = (s.eval(l(1), &[0.6]).unwrap() - 0.5).abs();
        let expected = normal_cdf(-gap / (0.2f64.powi(2) + 0.1f64.powi(2)).sqrt());
        let n = 10_000;
        let rate = mislabel_rate(&s, 0.6, n, 21);
        let sd = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * sd, "{rate} vs {expected}");
    }

    #[test]
    fn noisy_label_at_boundary_is_a_coin_flip() {
        let s = make_1d_example();
        let r1 = 0.319_347_992_373_536_2;
        let rate = mislabel_rate(&s, r1, 10_000, 22);
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn zero_noise_labels_collapse_to_truth() {
        let s = make_2d_example().with_noise(vec![0.0; 5]).unwrap();
        let mut rng = seeded(9);
        let mut pts = seeded(10);
        for _ in 0..10_000 {
            let x = [pts.gen_range(-2.0..=2.0), pts.gen_range(-2.0..=2.0)];
            assert_eq!(
                s.noisy_label(&x, &mut rng).unwrap(),
                s.true_classifier(&x).unwrap()
            );
        }
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let f: SurfaceFn = Arc::new(|_| 1.0);
        let g: SurfaceFn = Arc::new(|x: &[f64]| if x[0] < 0.5 { 1.0 } else { 2.0 });
        let s =
            SurfaceSet::new(Domain::cube(1, 0.0, 1.0).unwrap(), vec![g, f], vec![0.0; 2]).unwrap();
        for _ in 0..3 {
            assert_eq!(s.true_classifier(&[0.2]).unwrap(), l(1));
        }
        assert_eq!(s.true_classifier(&[0.7]).unwrap(), l(2));
        assert_eq!(argmin_label([3.0, 1.0, 1.0]), l(2));
    }

    #[test]
    fn ranking_loss_examples() {
        let n = 1001;
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let grid = EvalGrid::uniform(1, coords.clone()).unwrap();
        let s = make_1d_example();
        let truth: Vec<Label> = coords
            .iter()
            .map(|x| s.true_classifier(&[*x]).unwrap())
            .collect();
        assert_eq!(ranking_loss(&truth, &truth, &grid).unwrap(), 0.0);
        let flipped: Vec<Label> = truth.iter().map(|t| l(3 - t.0)).collect();
        assert!((ranking_loss(&flipped, &truth, &grid).unwrap() - 1.0).abs() < 1e-12);
        let wrong_low: Vec<Label> = coords
            .iter()
            .zip(&truth)
            .map(|(x, t)| if *x <= 0.3193 { l(3 - t.0) } else { *t })
            .collect();
        let loss = ranking_loss(&wrong_low, &truth, &grid).unwrap();
        assert!((loss - 0.3193).abs() <= 1.0 / (n - 1) as f64, "{loss}");
    }

    #[test]
    fn eval_grid_weight_validation() {
        assert!(EvalGrid::weighted(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(EvalGrid::weighted(1, vec![0.0, 1.0], vec![-0.5, 1.5]).is_err());
        assert!(EvalGrid::weighted(1, vec![0.0, 1.0], vec![0.25, 0.75]).is_ok());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn argmin_invariant_under_common_shift(c in -50.0f64..50.0, x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
            let s = make_2d_example();
            let shifted = s.shifted(c);
            // shifting by a constant can only change the argmin through rounding at exact ties
            let mus: Vec<f64> = (1..=5).map(|i| s.eval(l(i), &[x1, x2]).unwrap()).collect();
            let mut sorted = mus.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(sorted[1] - sorted[0] > 1e-9 * (1.0 + c.abs()));
            prop_assert_eq!(s.true_classifier(&[x1, x2]).unwrap(), shifted.true_classifier(&[x1, x2]).unwrap());
        }

        #[test]
        fn ranking_loss_in_unit_interval(labels in proptest::collection::vec((1u16..=3, 1u16..=3), 1..50)) {
            let n = labels.len();
            let grid = EvalGrid::uniform(1, (0..n).map(|i| i as f64).collect()).unwrap();
            let p: Vec<Label> = labels.iter().map(|(a, _)| l(*a)).collect();
            let t: Vec<Label> = labels.iter().map(|(_, b)| l(*b)).collect();
            let loss = ranking_loss(&p, &t, &grid).unwrap();
            prop_assert!((0.0..=1.0).contains(&loss));
            prop_assert_eq!(ranking_loss(&p, &p, &grid).unwrap(), 0.0);
        }
    }
}
