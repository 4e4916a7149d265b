//! Designs, labeling and the train/evaluate experiment pipeline.
//!
//! An experiment draws a design of `M` points, labels each point with the
//! index of the minimal surface (exact or from one noisy sample per surface),
//! trains a classifier on those labels and scores it twice: against its own
//! training labels and against the true classifier on a dense evaluation grid.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::{
    build_feedforward_with, build_unet_with, labels_from_probs, train, AdamConfig, EpochRecord,
    Network, Regularizer, Tensor, TrainConfig,
};
use crate::rng::{derive_seed, seeded, substream};
use crate::surfaces::{
    make_10d_example, make_1d_example, make_2d_example, ranking_loss, Domain, EvalGrid, Label,
    SurfaceSet,
};

const TAG_LABEL: u64 = 0x4c41_4245;
const TAG_INIT: u64 = 0x494e_4954;
const TAG_EVAL: u64 = 0x4556_414c;

/// Rows of evaluation points pushed through a network at once.
const EVAL_CHUNK: usize = 4096;

// ---------------------------------------------------------------------------
// Point sets and designs

/// `len` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Points mapped from `domain` onto `[-1, 1]^d`, one row each.
    pub fn normalized(&self, domain: &Domain) -> Result<Tensor> {
        if domain.dim() != self.dim {
            return Err(Error::Shape(format!(
                "points of dimension {} against a {}-dimensional domain",
                self.dim,
                domain.dim()
            )));
        }
        let mut out = vec![0.0; self.coords.len()];
        for (src, dst) in self.points().zip(out.chunks_exact_mut(self.dim)) {
            domain.to_unit(src, dst);
        }
        Tensor::matrix(self.len(), self.dim, out)
    }

    pub fn into_eval_grid(self) -> Result<EvalGrid> {
        EvalGrid::uniform(self.dim, self.coords)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignKind {
    UniformGrid,
    LatinHypercube,
    /// Points read verbatim from a design file.
    FromFile(PathBuf),
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignKind::UniformGrid => f.write_str("unif"),
            DesignKind::LatinHypercube => f.write_str("lhs"),
            DesignKind::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    /// Accepts `unif`, `lhs` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unif" | "uniform" | "uniform-grid" => Ok(DesignKind::UniformGrid),
            "lhs" | "latin-hypercube" => Ok(DesignKind::LatinHypercube),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(DesignKind::FromFile(PathBuf::from(path))),
                _ => Err(Error::Config(format!(
                    "unknown design {s:?}; expected unif, lhs or file:<path>"
                ))),
            },
        }
    }
}

/// Per-axis count `n` with `n^d = m`, or an error naming the requirement.
pub fn grid_side(m: usize, d: usize) -> Result<usize> {
    if m == 0 || d == 0 {
        return Err(Error::Config(
            "design budget and dimension must be >= 1".into(),
        ));
    }
    let mut n = (m as f64).powf(1.0 / d as f64).round() as usize;
    // guard against powf rounding on either side
    while n > 1 && n.checked_pow(d as u32).is_none_or(|p| p > m) {
        n -= 1;
    }
    while (n + 1).checked_pow(d as u32).is_some_and(|p| p <= m) {
        n += 1;
    }
    if n.pow(d as u32) != m {
        let what = match d {
            2 => "a perfect square".to_string(),
            3 => "a perfect cube".to_string(),
            _ => format!("a perfect {d}-th power"),
        };
        return Err(Error::Config(format!(
            "uniform grid budget M={m} in {d}-D must be {what} (e.g. {})",
            (n.max(1)).pow(d as u32).max(1)
        )));
    }
    Ok(n)
}

/// Regular lattice with `per_axis` points per coordinate, box corners
/// included. The first coordinate varies slowest.
pub fn uniform_grid(domain: &Domain, per_axis: usize) -> PointSet {
    let d = domain.dim();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
            if per_axis == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                let step = (hi - lo) / (per_axis - 1) as f64;
                (0..per_axis)
                    .map(|i| {
                        if i + 1 == per_axis {
                            hi
                        } else {
                            lo + i as f64 * step
                        }
                    })
                    .collect()
            }
        })
        .collect();
    let total = per_axis.pow(d as u32);
    let mut coords = Vec::with_capacity(total * d);
    for flat in 0..total {
        let mut rem = flat;
        let mut point = vec![0.0; d];
        for k in (0..d).rev() {
            point[k] = axes[k][rem % per_axis];
            rem /= per_axis;
        }
        coords.extend(point);
    }
    PointSet { dim: d, coords }
}

/// One point per axis bin on every axis, bins matched by seeded permutations
/// and jittered uniformly inside.
pub fn latin_hypercube(domain: &Domain, m: usize, seed: u64) -> PointSet {
    let d = domain.dim();
    let mut rng = seeded(seed);
    let mut coords = vec![0.0; m * d];
    let mut perm: Vec<usize> = (0..m).collect();
    for k in 0..d {
        perm.shuffle(&mut rng);
        let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
        for (i, &bin) in perm.iter().enumerate() {
            let u: f64 = rng.gen();
            coords[i * d + k] = lo + (hi - lo) * (bin as f64 + u) / m as f64;
        }
    }
    PointSet { dim: d, coords }
}

/// Whitespace-separated floats, one point per line; blank lines and lines
/// starting with `#` are skipped.
pub fn parse_design(text: &str, dim: usize) -> Result<PointSet> {
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = coords.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad coordinate {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(i + 1, "non-finite coordinate"));
            }
            coords.push(v);
        }
        if coords.len() - before != dim {
            return Err(Error::parse(
                i + 1,
                format!(
                    "expected {dim} coordinates, found {}",
                    coords.len() - before
                ),
            ));
        }
    }
    if coords.is_empty() {
        return Err(Error::Config("design file contains no points".into()));
    }
    PointSet::new(dim, coords)
}

pub fn read_design_file(path: &Path, dim: usize) -> Result<PointSet> {
    parse_design(&std::fs::read_to_string(path)?, dim)
}

pub fn design_to_text(points: &PointSet) -> String {
    let mut out = String::new();
    for p in points.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn generate_design(
    kind: &DesignKind,
    m: usize,
    domain: &Domain,
    seed: u64,
) -> Result<PointSet> {
    if m == 0 {
        return Err(Error::Config("design budget M must be >= 1".into()));
    }
    match kind {
        DesignKind::UniformGrid => Ok(uniform_grid(domain, grid_side(m, domain.dim())?)),
        DesignKind::LatinHypercube => Ok(latin_hypercube(domain, m, seed)),
        DesignKind::FromFile(path) => {
            let points = read_design_file(path, domain.dim())?;
            if points.len() != m {
                return Err(Error::Config(format!(
                    "design file {} holds {} points but M={m}",
                    path.display(),
                    points.len()
                )));
            }
            Ok(points)
        }
    }
}

// ---------------------------------------------------------------------------
// Labels

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TrueLabel,
    NoisyLabel,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::TrueLabel => "true-label",
            Provenance::NoisyLabel => "noisy-label",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDesign {
    pub points: PointSet,
    pub labels: Vec<Label>,
    pub provenance: Provenance,
    pub seed: u64,
}

/// Labels every point with the true argmin, or with the argmin of one fresh
/// noisy sample per surface drawn from the point's own substream.
pub fn label_design(
    points: PointSet,
    set: &SurfaceSet,
    noisy: bool,
    seed: u64,
) -> Result<LabeledDesign> {
    if points.dim() != set.dim() {
        return Err(Error::Shape(format!(
            "design of dimension {} for a {}-dimensional surface set",
            points.dim(),
            set.dim()
        )));
    }
    let labels = points
        .points()
        .enumerate()
        .map(|(i, x)| {
            if noisy {
                set.noisy_label(x, &mut substream(seed, TAG_LABEL, i as u64))
            } else {
                set.true_classifier(x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDesign {
        points,
        labels,
        provenance: if noisy {
            Provenance::NoisyLabel
        } else {
            Provenance::TrueLabel
        },
        seed,
    })
}

/// Fraction of positions where the two label sequences agree.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "label sequences of length {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("accuracy of empty label sequences".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

// ---------------------------------------------------------------------------
// Evaluation grids

/// Lattice evaluation grid with `per_axis` points per coordinate.
pub fn uniform_eval_grid(domain: &Domain, per_axis: usize) -> Result<EvalGrid> {
    uniform_grid(domain, per_axis).into_eval_grid()
}

/// Space-filling evaluation grid for dimensions where a lattice is too big.
pub fn lhs_eval_grid(domain: &Domain, n: usize, seed: u64) -> Result<EvalGrid> {
    latin_hypercube(domain, n, derive_seed(seed, TAG_EVAL)).into_eval_grid()
}

// ---------------------------------------------------------------------------
// Experiments

/// The built-in ranking problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    OneD,
    TwoD,
    TenD,
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::OneD => "1d",
            Example::TwoD => "2d",
            Example::TenD => "10d",
        })
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d" => Ok(Example::OneD),
            "2d" => Ok(Example::TwoD),
            "10d" => Ok(Example::TenD),
            other => Err(Error::Config(format!(
                "unknown example {other:?}; expected 1d, 2d or 10d"
            ))),
        }
    }
}

/// Noise levels of the noisy 10-D variant.
pub const TEN_D_NOISE: [f64; 3] = [0.5, 0.4, 0.45];

impl Example {
    /// The surface set; `noisy` only matters for the 10-D example, whose
    /// clean variant has zero sampling noise.
    pub fn surface_set(self, noisy: bool) -> SurfaceSet {
        match self {
            Example::OneD => make_1d_example(),
            Example::TwoD => make_2d_example(),
            Example::TenD => {
                make_10d_example(noisy.then_some(&TEN_D_NOISE[..])).expect("static noise levels")
            }
        }
    }

    pub fn default_design(self) -> DesignKind {
        match self {
            Example::OneD | Example::TwoD => DesignKind::UniformGrid,
            Example::TenD => DesignKind::LatinHypercube,
        }
    }

    pub fn default_budget(self) -> usize {
        match self {
            Example::OneD => 128,
            Example::TwoD => 576,
            Example::TenD => 65_536,
        }
    }

    /// Hidden widths: two layers of `M/8` in 1-D and 2-D, three of 128 in 10-D.
    pub fn default_hidden(self, m: usize) -> Vec<usize> {
        match self {
            Example::OneD | Example::TwoD => vec![(m / 8).max(1); 2],
            Example::TenD => vec![128; 3],
        }
    }

    pub fn default_net(self, m: usize, unet: bool) -> NetConfig {
        if unet {
            NetConfig::Unet {
                base_channels: 8,
                reg: Regularizer::NONE,
            }
        } else {
            NetConfig::FeedForward {
                hidden: self.default_hidden(m),
                reg: Regularizer::NONE,
            }
        }
    }

    /// Training settings: 1500 epochs with batches of `M/2` in 1-D and 2-D
    /// (pixels for the UNet), 40 epochs of 256-point batches in 10-D.
    pub fn default_train(self, m: usize, net: &NetConfig, seed: u64) -> TrainConfig {
        let unet = matches!(net, NetConfig::Unet { .. });
        let (epochs, batch_size, learning_rate) = match self {
            Example::OneD | Example::TwoD => (1500, None, 1e-3),
            Example::TenD => (40, Some(256), 3e-3),
        };
        TrainConfig {
            epochs,
            batch_size,
            row_batch: unet.then_some((m / 2).max(1)),
            adam: AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
            seed,
        }
    }

    /// 1001 points in 1-D, 101x101 in 2-D, 20000 LHS points in 10-D.
    pub fn eval_grid(self, seed: u64) -> EvalGrid {
        let set = self.surface_set(false);
        let domain = set.domain();
        match self {
            Example::OneD => uniform_eval_grid(domain, 1001),
            Example::TwoD => uniform_eval_grid(domain, 101),
            Example::TenD => lhs_eval_grid(domain, 20_000, seed),
        }
        .expect("static grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub kind: DesignKind,
    pub m: usize,
    pub noisy: bool,
    /// Seeds LHS placement and the noisy labels.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetConfig {
    FeedForward {
        hidden: Vec<usize>,
        reg: Regularizer,
    },
    /// Needs a 2-D uniform grid design with an even side.
    Unet {
        base_channels: usize,
        reg: Regularizer,
    },
}

impl NetConfig {
    pub fn name(&self) -> &'static str {
        match self {
            NetConfig::FeedForward { .. } => "feedforward",
            NetConfig::Unet { .. } => "unet",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub train_accuracy: f64,
    pub gen_accuracy: f64,
    pub eval_dim: usize,
    pub eval_coords: Vec<f64>,
    pub predicted: Vec<Label>,
    pub truth: Vec<Label>,
    pub history: Vec<EpochRecord>,
    /// Effective settings, in output order.
    pub config: Vec<(String, String)>,
}

/// Trains the configured classifier on a labeled design and scores it.
pub fn run_experiment(
    set: &SurfaceSet,
    design: &DesignConfig,
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    grid: &EvalGrid,
) -> Result<ExperimentReport> {
    if grid.dim != set.dim() {
        return Err(Error::Shape(
            "evaluation grid dimension differs from the surfaces".into(),
        ));
    }
    let points = generate_design(&design.kind, design.m, set.domain(), design.seed)?;
    let labeled = label_design(points, set, design.noisy, design.seed)?;
    let init_seed = derive_seed(train_cfg.seed, TAG_INIT);
    let classes = set.count();
    let domain = set.domain();

    let samples = match net_cfg {
        NetConfig::FeedForward { .. } => design.m,
        NetConfig::Unet { .. } => 1,
    };
    let (train_pred, predicted, history, arch) = match net_cfg {
        NetConfig::FeedForward { hidden, reg } => {
            let x = labeled.points.normalized(domain)?;
            let specs = build_feedforward_with(set.dim(), classes, hidden, *reg);
            let net = Network::init(&[set.dim()], &specs, init_seed)?;
            let (net, history) = train(net, &x, &labeled.labels, train_cfg)?;
            let train_pred = net.predict_labels(&x)?;
            let eval_x = PointSet::new(grid.dim, grid.coords.clone())?.normalized(domain)?;
            let predicted = labels_from_probs(&net.forward_chunked(&eval_x, EVAL_CHUNK)?);
            let widths: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
            (train_pred, predicted, history, widths.join(","))
        }
        NetConfig::Unet { base_channels, reg } => {
            let (design_kind, m) = (&design.kind, design.m);
            if set.dim() != 2 || *design_kind != DesignKind::UniformGrid {
                return Err(Error::Config("unet needs a 2-D uniform grid design".into()));
            }
            let side = grid_side(m, 2)?;
            let specs = build_unet_with(side, side, 2, classes, *base_channels, *reg)?;
            let net = Network::init(&[side, side, 2], &specs, init_seed)?;
            let flat = labeled.points.normalized(domain)?;
            let image = Tensor::new(vec![1, side, side, 2], flat.into_data())?;
            let (net, history) = train(net, &image, &labeled.labels, train_cfg)?;
            let probs = net.forward(&image)?;
            let train_pred = labels_from_probs(&probs);
            let predicted = interpolate_grid_labels(&probs, side, domain, grid)?;
            (
                train_pred,
                predicted,
                history,
                format!("base{base_channels}"),
            )
        }
    };

    let truth = grid
        .points()
        .map(|x| set.true_classifier(x))
        .collect::<Result<Vec<_>>>()?;
    let train_accuracy = accuracy(&train_pred, &labeled.labels)?;
    let gen_accuracy = 1.0 - ranking_loss(&predicted, &truth, grid)?;

    let config = vec![
        ("surfaces".to_string(), set.count().to_string()),
        ("dim".to_string(), set.dim().to_string()),
        ("design".to_string(), design.kind.to_string()),
        ("m".to_string(), design.m.to_string()),
        ("labels".to_string(), labeled.provenance.to_string()),
        ("design_seed".to_string(), design.seed.to_string()),
        ("net".to_string(), net_cfg.name().to_string()),
        ("arch".to_string(), arch),
        ("epochs".to_string(), train_cfg.epochs.to_string()),
        (
            "batch".to_string(),
            match train_cfg.row_batch {
                Some(rows) => format!("{rows} rows"),
                None => train_cfg.resolved_batch(samples).to_string(),
            },
        ),
        (
            "learning_rate".to_string(),
            format!("{:?}", train_cfg.adam.learning_rate),
        ),
        ("train_seed".to_string(), train_cfg.seed.to_string()),
        ("eval_points".to_string(), grid.len().to_string()),
    ];
    Ok(ExperimentReport {
        train_accuracy,
        gen_accuracy,
        eval_dim: grid.dim,
        eval_coords: grid.coords.clone(),
        predicted,
        truth,
        history,
        config,
    })
}

/// Labels at arbitrary points from a per-pixel probability image over a
/// `side x side` lattice of the box, by bilinear interpolation of the class
/// probabilities.
fn interpolate_grid_labels(
    probs: &Tensor,
    side: usize,
    domain: &Domain,
    grid: &EvalGrid,
) -> Result<Vec<Label>> {
    let cols = probs.cols();
    let data = probs.data();
    let mut out = vec![0.0; grid.len() * cols];
    let frac = |x: f64, k: usize| -> (usize, f64) {
        let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
        let t = ((x - lo) / (hi - lo) * (side - 1) as f64).clamp(0.0, (side - 1) as f64);
        let i = (t.floor() as usize).min(side.saturating_sub(2));
        (i, t - i as f64)
    };
    for (p, row) in grid.points().zip(out.chunks_exact_mut(cols)) {
        let (i, fi) = frac(p[0], 0);
        let (j, fj) = frac(p[1], 1);
        for (di, wi) in [(0, 1.0 - fi), (1, fi)] {
            for (dj, wj) in [(0, 1.0 - fj), (1, fj)] {
                let w = wi * wj;
                if w == 0.0 {
                    continue;
                }
                let pixel = (i + di) * side + (j + dj);
                for c in 0..cols {
                    row[c] += w * data[pixel * cols + c];
                }
            }
        }
    }
    Ok(labels_from_probs(&Tensor::matrix(grid.len(), cols, out)?))
}

// ---------------------------------------------------------------------------
// Report document

const REPORT_TAG: &str = "# surfrank experiment report";

fn csv_block(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

impl ExperimentReport {
    /// Column names of the label-grid CSV.
    pub fn grid_header(&self) -> Vec<String> {
        let mut header: Vec<String> = (1..=self.eval_dim).map(|k| format!("x{k}")).collect();
        header.push("predicted".into());
        header.push("true".into());
        header
    }

    /// The predicted label grid as CSV: coordinates, predicted, true label.
    pub fn grid_csv(&self) -> Result<String> {
        let d = self.eval_dim;
        csv_block(
            &self.grid_header(),
            self.eval_coords
                .chunks_exact(d)
                .zip(self.predicted.iter().zip(&self.truth))
                .map(|(x, (p, t))| {
                    let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
                    row.push(p.to_string());
                    row.push(t.to_string());
                    row
                }),
        )
    }

    pub fn history_csv(&self) -> Result<String> {
        csv_block(
            &["epoch".into(), "loss".into(), "accuracy".into()],
            self.history.iter().map(|r| {
                vec![
                    r.epoch.to_string(),
                    format!("{:?}", r.loss),
                    format!("{:?}", r.accuracy),
                ]
            }),
        )
    }

    /// Key=value header, then `[history]` and `[grid]` CSV blocks.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(REPORT_TAG);
        out.push('\n');
        for (k, v) in &self.config {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("train_accuracy={:?}\n", self.train_accuracy));
        out.push_str(&format!("gen_accuracy={:?}\n", self.gen_accuracy));
        out.push_str(&format!("eval_dim={}\n", self.eval_dim));
        out.push_str("[history]\n");
        out.push_str(&self.history_csv()?);
        out.push_str("[grid]\n");
        out.push_str(&self.grid_csv()?);
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == REPORT_TAG => {}
            _ => return Err(Error::parse(1, "not a surfrank experiment report")),
        }
        let mut config = Vec::new();
        let (mut train_accuracy, mut gen_accuracy, mut eval_dim) = (None, None, None);
        let mut section = None;
        let mut history_lines = String::new();
        let mut grid_lines = String::new();
        for (i, line) in lines {
            match line {
                "[history]" | "[grid]" => {
                    section = Some(line);
                    continue;
                }
                _ => {}
            }
            match section {
                Some("[history]") => {
                    history_lines.push_str(line);
                    history_lines.push('\n');
                }
                Some(_) => {
                    grid_lines.push_str(line);
                    grid_lines.push('\n');
                }
                None => {
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
                    let float = |v: &str| -> Result<f64> {
                        v.parse()
                            .map_err(|_| Error::parse(i + 1, format!("bad number {v:?}")))
                    };
                    match k {
                        "train_accuracy" => train_accuracy = Some(float(v)?),
                        "gen_accuracy" => gen_accuracy = Some(float(v)?),
                        "eval_dim" => {
                            eval_dim =
                                Some(v.parse().map_err(|_| Error::parse(i + 1, "bad eval_dim"))?)
                        }
                        _ => config.push((k.to_string(), v.to_string())),
                    }
                }
            }
        }
        let missing = |what: &str| Error::parse(0, format!("report lacks {what}"));
        let eval_dim: usize = eval_dim.ok_or_else(|| missing("eval_dim"))?;

        let mut history = Vec::new();
        let mut reader = csv::Reader::from_reader(history_lines.as_bytes());
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |j: usize| rec.get(j).ok_or_else(|| missing("history column"));
            history.push(EpochRecord {
                epoch: field(0)?.parse().map_err(|_| missing("valid epoch"))?,
                loss: field(1)?.parse().map_err(|_| missing("valid loss"))?,
                accuracy: field(2)?.parse().map_err(|_| missing("valid accuracy"))?,
            });
        }

        let (mut eval_coords, mut predicted, mut truth) = (Vec::new(), Vec::new(), Vec::new());
        let mut reader = csv::Reader::from_reader(grid_lines.as_bytes());
        let label = |s: &str| -> Result<Label> {
            s.parse::<u16>()
                .ok()
                .filter(|v| *v >= 1)
                .map(Label)
                .ok_or_else(|| missing("valid label"))
        };
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != eval_dim + 2 {
                return Err(missing("complete grid rows"));
            }
            for j in 0..eval_dim {
                eval_coords.push(rec[j].parse().map_err(|_| missing("valid coordinate"))?);
            }
            predicted.push(label(&rec[eval_dim])?);
            truth.push(label(&rec[eval_dim + 1])?);
        }
        Ok(ExperimentReport {
            train_accuracy: train_accuracy.ok_or_else(|| missing("train_accuracy"))?,
            gen_accuracy: gen_accuracy.ok_or_else(|| missing("gen_accuracy"))?,
            eval_dim,
            eval_coords,
            predicted,
            truth,
            history,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamConfig, TrainConfig};
    use proptest::prelude::*;

    fn quick_train(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn grid_side_accepts_powers_only() {
        assert_eq!(grid_side(576, 2).unwrap(), 24);
        assert_eq!(grid_side(1024, 2).unwrap(), 32);
        assert_eq!(grid_side(128, 1).unwrap(), 128);
        assert_eq!(grid_side(27, 3).unwrap(), 3);
        let msg = grid_side(577, 2).unwrap_err().to_string();
        assert!(msg.contains("perfect square"), "{msg}");
        assert!(grid_side(0, 2).is_err());
    }

    #[test]
    fn uniform_grid_includes_corners() {
        let domain = Domain::cube(2, -2.0, 2.0).unwrap();
        let pts = generate_design(&DesignKind::UniformGrid, 576, &domain, 0).unwrap();
        assert_eq!(pts.len(), 576);
        assert_eq!(pts.point(0), &[-2.0, -2.0]);
        assert_eq!(pts.point(575), &[2.0, 2.0]);
        assert!((pts.point(1)[1] - pts.point(0)[1] - 4.0 / 23.0).abs() < 1e-12);
        assert!((pts.point(24)[0] - pts.point(0)[0] - 4.0 / 23.0).abs() < 1e-12);

        let unit = Domain::cube(1, 0.0, 1.0).unwrap();
        let line = generate_design(&DesignKind::UniformGrid, 128, &unit, 0).unwrap();
        assert_eq!(line.point(0), &[0.0]);
        assert_eq!(line.point(127), &[1.0]);
        assert!((line.point(1)[0] - 1.0 / 127.0).abs() < 1e-15);
    }

    #[test]
    fn lhs_has_one_point_per_bin() {
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let pts = generate_design(&DesignKind::LatinHypercube, 8, &domain, 3).unwrap();
        for k in 0..2 {
            let mut bins: Vec<usize> = pts.points().map(|p| (p[k] * 8.0) as usize).collect();
            bins.sort_unstable();
            assert_eq!(bins, (0..8).collect::<Vec<_>>());
        }
    }

    proptest! {
        #[test]
        fn lhs_stratifies_every_axis(m in 1usize..64, d in 1usize..5, seed in any::<u64>()) {
            let domain = Domain::cube(d, -3.0, 5.0).unwrap();
            let pts = latin_hypercube(&domain, m, seed);
            for k in 0..d {
                let mut bins: Vec<usize> = pts
                    .points()
                    .map(|p| (((p[k] + 3.0) / 8.0 * m as f64) as usize).min(m - 1))
                    .collect();
                bins.sort_unstable();
                prop_assert_eq!(bins, (0..m).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn design_files_parse_and_reject() {
        let pts = parse_design("# header\n0.5 1\n\n  -1 2.25  \n# tail\n", 2).unwrap();
        assert_eq!(pts.coords(), &[0.5, 1.0, -1.0, 2.25]);
        assert!(parse_design("1 2 3\n", 2).is_err());
        assert!(parse_design("1 x\n", 2).is_err());
        assert!(parse_design("# nothing\n", 2).is_err());
        let back = parse_design(&design_to_text(&pts), 2).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn design_file_round_trip_through_disk() {
        let dir = std::env::temp_dir().join(format!("surfrank-design-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("points.txt");
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let pts = latin_hypercube(&domain, 10, 1);
        std::fs::write(&path, design_to_text(&pts)).unwrap();
        let kind = DesignKind::FromFile(path.clone());
        assert_eq!(generate_design(&kind, 10, &domain, 0).unwrap(), pts);
        assert!(generate_design(&kind, 11, &domain, 0).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn design_kind_parses() {
        assert_eq!(
            "unif".parse::<DesignKind>().unwrap(),
            DesignKind::UniformGrid
        );
        assert_eq!(
            "lhs".parse::<DesignKind>().unwrap(),
            DesignKind::LatinHypercube
        );
        assert_eq!(
            "file:a/b.txt".parse::<DesignKind>().unwrap(),
            DesignKind::FromFile(PathBuf::from("a/b.txt"))
        );
        assert!("grid".parse::<DesignKind>().is_err());
        assert!("file:".parse::<DesignKind>().is_err());
    }

    #[test]
    fn clean_1d_labels_flip_at_boundaries() {
        let set = make_1d_example();
        let pts = generate_design(&DesignKind::UniformGrid, 128, set.domain(), 0).unwrap();
        let labeled = label_design(pts, &set, false, 0).unwrap();
        assert_eq!(labeled.provenance, Provenance::TrueLabel);
        let (r1, r2) = (0.3193479923735362, 0.9279060011141679);
        let flips: Vec<usize> = (1..128)
            .filter(|&i| labeled.labels[i] != labeled.labels[i - 1])
            .collect();
        // a flip between points i-1 and i means the boundary lies in that cell
        let cell = |r: f64| (r * 127.0).ceil() as usize;
        assert_eq!(flips, vec![cell(r1), cell(r2)]);
    }

    #[test]
    fn zero_noise_labels_match_truth() {
        let set = make_1d_example().with_noise(vec![0.0, 0.0]).unwrap();
        let pts = generate_design(&DesignKind::UniformGrid, 64, set.domain(), 0).unwrap();
        let noisy = label_design(pts.clone(), &set, true, 5).unwrap();
        let clean = label_design(pts, &set, false, 5).unwrap();
        assert_eq!(noisy.labels, clean.labels);
        assert_eq!(noisy.provenance, Provenance::NoisyLabel);
    }

    #[test]
    fn noisy_1d_flip_fraction_is_moderate() {
        let set = make_1d_example();
        let pts = generate_design(&DesignKind::UniformGrid, 128, set.domain(), 0).unwrap();
        let clean = label_design(pts.clone(), &set, false, 0).unwrap();
        let mut total = 0.0;
        for seed in 0..20 {
            let noisy = label_design(pts.clone(), &set, true, seed).unwrap();
            total += 1.0 - accuracy(&noisy.labels, &clean.labels).unwrap();
        }
        let mean = total / 20.0;
        // expected flip fraction on this grid is 18.94%
        assert!((0.10..=0.25).contains(&mean), "{mean}");
        assert!((mean - 0.1894).abs() < 0.03, "{mean}");
    }

    #[test]
    fn noisy_labels_are_reproducible() {
        let set = make_2d_example();
        let pts = generate_design(&DesignKind::UniformGrid, 64, set.domain(), 0).unwrap();
        let a = label_design(pts.clone(), &set, true, 9).unwrap();
        let b = label_design(pts.clone(), &set, true, 9).unwrap();
        let c = label_design(pts, &set, true, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn labeling_rejects_points_outside_domain() {
        let set = make_1d_example();
        let pts = PointSet::new(1, vec![0.5, 1.5]).unwrap();
        assert!(label_design(pts, &set, false, 0).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let a = [Label(1), Label(2), Label(1), Label(3)];
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        let b = [Label(2), Label(1), Label(2), Label(1)];
        assert_eq!(accuracy(&a, &b).unwrap(), 0.0);
        let c = [Label(1), Label(2), Label(1), Label(1)];
        assert_eq!(accuracy(&a, &c).unwrap(), 0.75);
        assert!(accuracy(&a, &a[..3]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn eval_grids_have_documented_sizes() {
        assert_eq!(Example::OneD.eval_grid(0).len(), 1001);
        assert_eq!(Example::TwoD.eval_grid(0).len(), 101 * 101);
        let ten = Example::TenD.eval_grid(3);
        assert_eq!(ten.len(), 20_000);
        assert_eq!(ten.coords, Example::TenD.eval_grid(3).coords);
    }

    #[test]
    fn interpolation_reproduces_lattice_values() {
        let domain = Domain::cube(2, 0.0, 1.0).unwrap();
        let side = 4;
        // probability of label 1 rises with the first coordinate's index
        let data: Vec<f64> = (0..side * side).map(|p| (p / side) as f64 / 3.0).collect();
        let probs = Tensor::new(vec![1, side, side, 1], data).unwrap();
        let grid = uniform_eval_grid(&domain, 4).unwrap();
        let labels = interpolate_grid_labels(&probs, side, &domain, &grid).unwrap();
        for (i, lab) in labels.iter().enumerate() {
            let row = i / side;
            assert_eq!(*lab, if row >= 2 { Label(1) } else { Label(2) });
        }
        // between rows 1 and 2 the probability interpolates linearly: 0.45 and 0.55
        let mid = EvalGrid::uniform(2, vec![0.45, 0.3, 0.55, 0.9]).unwrap();
        assert_eq!(
            interpolate_grid_labels(&probs, side, &domain, &mid).unwrap(),
            vec![Label(2), Label(1)]
        );
    }

    fn small_1d(m: usize, noisy: bool) -> DesignConfig {
        DesignConfig {
            kind: DesignKind::UniformGrid,
            m,
            noisy,
            seed: 7,
        }
    }

    #[test]
    fn report_round_trips_and_is_deterministic() {
        let set = make_1d_example();
        let grid = uniform_eval_grid(set.domain(), 101).unwrap();
        let net = Example::OneD.default_net(32, false);
        let run =
            || run_experiment(&set, &small_1d(32, true), &net, &quick_train(30, 1), &grid).unwrap();
        let a = run();
        let b = run();
        let text = a.to_text().unwrap();
        assert_eq!(text, b.to_text().unwrap());
        assert_eq!(ExperimentReport::from_text(&text).unwrap(), a);
        assert_eq!(a.history.len(), 30);
        assert!((0.0..=1.0).contains(&a.train_accuracy));
        let direct = accuracy(&a.predicted, &a.truth).unwrap();
        assert!((a.gen_accuracy - direct).abs() < 1e-12);
        assert!(text.contains("labels=noisy-label"));
        assert!(ExperimentReport::from_text("garbage").is_err());
    }

    #[test]
    fn clean_1d_training_beats_generalization_and_budget_helps() {
        let set = make_1d_example();
        let grid = Example::OneD.eval_grid(0);
        let run = |m: usize| {
            let net = Example::OneD.default_net(m, false);
            let train = Example::OneD.default_train(m, &net, 7);
            run_experiment(&set, &small_1d(m, false), &net, &train, &grid).unwrap()
        };
        let r128 = run(128);
        assert!(r128.train_accuracy >= r128.gen_accuracy - 0.01);
        assert!(r128.gen_accuracy >= 0.98, "{}", r128.gen_accuracy);
        let r512 = run(512);
        assert!(r512.gen_accuracy >= r128.gen_accuracy - 0.005);
    }

    #[test]
    fn unet_requires_an_even_2d_grid() {
        let net = NetConfig::Unet {
            base_channels: 2,
            reg: Regularizer::NONE,
        };
        let train = quick_train(1, 0);
        let set1 = make_1d_example();
        let grid1 = uniform_eval_grid(set1.domain(), 11).unwrap();
        assert!(run_experiment(&set1, &small_1d(16, false), &net, &train, &grid1).is_err());
        let set2 = make_2d_example();
        let grid2 = uniform_eval_grid(set2.domain(), 11).unwrap();
        let odd = DesignConfig {
            m: 25,
            ..small_1d(25, false)
        };
        assert!(run_experiment(&set2, &odd, &net, &train, &grid2).is_err());
        let lhs = DesignConfig {
            kind: DesignKind::LatinHypercube,
            ..small_1d(16, false)
        };
        assert!(run_experiment(&set2, &lhs, &net, &train, &grid2).is_err());
        let even = small_1d(16, false);
        let report = run_experiment(&set2, &even, &net, &train, &grid2).unwrap();
        assert_eq!(report.predicted.len(), 121);
    }
}
