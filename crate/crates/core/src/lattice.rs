//! Two-asset binomial lattice for Bermudan max-calls.
//!
//! Each asset's log-price moves by `±sigma sqrt(dt)` per step with up
//! probability `(1 + nu sqrt(dt) / sigma) / 2`, `nu = r - delta - sigma^2/2`,
//! which matches the per-step log mean and variance to first order. The two
//! assets are independent, so the tree has four branches per step with
//! product probabilities. Exercise is compared with continuation only at the
//! Bermudan dates; between them the value is a plain expectation. Payoffs are
//! already discounted, so the backward step is an undiscounted average.

use crate::bermudan::{ExerciseSchedule, GbmModel, Payoff};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    pub model: GbmModel,
    pub schedule: ExerciseSchedule,
    pub payoff: Payoff,
    /// Lattice steps between consecutive exercise dates.
    pub steps_per_interval: usize,
    /// Allow exercise at maturity only.
    pub european_only: bool,
}

impl LatticeParams {
    pub fn new(
        model: GbmModel,
        schedule: ExerciseSchedule,
        payoff: Payoff,
        steps_per_interval: usize,
    ) -> Result<Self> {
        let params = LatticeParams {
            model,
            schedule,
            payoff,
            steps_per_interval,
            european_only: false,
        };
        params.validate()?;
        Ok(params)
    }

    /// Standard two-asset parameters started at `(x0, x0)`.
    pub fn standard(x0: f64, steps_per_interval: usize) -> Result<Self> {
        let model = GbmModel::standard(2, x0)?;
        let payoff = Payoff::max_call(100.0, model.rate);
        LatticeParams::new(
            model,
            ExerciseSchedule::standard(),
            payoff,
            steps_per_interval,
        )
    }

    pub fn european(mut self) -> Self {
        self.european_only = true;
        self
    }

    pub fn with_steps(&self, steps_per_interval: usize) -> Result<Self> {
        let params = LatticeParams {
            steps_per_interval,
            ..self.clone()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn step_dt(&self) -> f64 {
        self.schedule.dt() / self.steps_per_interval as f64
    }

    /// Up probability of one asset.
    pub fn up_probability(&self) -> f64 {
        let dt = self.step_dt();
        0.5 * (1.0 + self.model.log_drift() * dt.sqrt() / self.model.vol)
    }

    fn validate(&self) -> Result<()> {
        if self.model.dim() != 2 {
            return Err(Error::Config(format!(
                "the lattice prices two assets, got {}",
                self.model.dim()
            )));
        }
        if self.steps_per_interval == 0 {
            return Err(Error::Config(
                "steps per exercise interval must be >= 1".into(),
            ));
        }
        let p = self.up_probability();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!(
                "branch probability {p} outside (0, 1); use more steps per interval"
            )));
        }
        Ok(())
    }
}

/// Time-0 value by backward induction.
pub fn lattice_price(params: &LatticeParams) -> Result<f64> {
    params.validate()?;
    let n = params.steps_per_interval;
    let total = params.schedule.count * n;
    let dt = params.step_dt();
    let dx = params.model.vol * dt.sqrt();
    let p = params.up_probability();
    let q = 1.0 - p;
    let (puu, pud, pdu, pdd) = (p * p, p * q, q * p, q * q);
    let (x1, x2) = (params.model.x0[0], params.model.x0[1]);
    let payoff = &params.payoff;

    // asset price after `ups` up-moves in `k` steps
    let price = |x0: f64, ups: usize, k: usize| x0 * (dx * (2.0 * ups as f64 - k as f64)).exp();
    // intermediate dates use the node payoff; only maturity is smoothed
    let exercise = |k: usize, values: &mut [f64]| {
        let t = params.schedule.date(k / n);
        let w = k + 1;
        let a: Vec<f64> = (0..w).map(|i| price(x1, i, k)).collect();
        let b: Vec<f64> = (0..w).map(|j| price(x2, j, k)).collect();
        for i in 0..w {
            for j in 0..w {
                let h = payoff.value(t, &[a[i], b[j]]);
                let v = &mut values[i * w + j];
                if h > *v {
                    *v = h;
                }
            }
        }
    };

    let w = total + 1;
    let mut values = vec![0.0; w * w];
    smoothed_terminal(params, dx, &mut values);
    let mut next = vec![0.0; w * w];
    for k in (0..total).rev() {
        let w = k + 1;
        let wn = k + 2;
        for i in 0..w {
            let up = &values[(i + 1) * wn..(i + 2) * wn];
            let down = &values[i * wn..(i + 1) * wn];
            for j in 0..w {
                next[i * w + j] = puu * up[j + 1] + pud * up[j] + pdu * down[j + 1] + pdd * down[j];
            }
        }
        std::mem::swap(&mut values, &mut next);
        let at_date = k % n == 0;
        if at_date && !params.european_only {
            exercise(k, &mut values);
        }
    }
    Ok(values[0])
}

/// Terminal values averaged over each node's log-price cell
/// `[x e^{-dx}, x e^{dx}]` per asset (midpoint rule). Sampling the kinked
/// payoff at the nodes alone makes the price oscillate with the step count as
/// the strike moves relative to the grid; the cell average removes that.
fn smoothed_terminal(params: &LatticeParams, dx: f64, values: &mut [f64]) {
    const CELL_POINTS: usize = 16;
    let total = params.schedule.count * params.steps_per_interval;
    let w = total + 1;
    let t = params.schedule.maturity;
    let offsets: Vec<f64> = (0..CELL_POINTS)
        .map(|k| ((2.0 * k as f64 + 1.0) / CELL_POINTS as f64 - 1.0) * dx)
        .map(f64::exp)
        .collect();
    let node = |x0: f64, ups: usize| x0 * (dx * (2.0 * ups as f64 - total as f64)).exp();
    let cells = |x0: f64| -> Vec<Vec<f64>> {
        (0..w)
            .map(|i| offsets.iter().map(|o| node(x0, i) * o).collect())
            .collect()
    };
    let a = cells(params.model.x0[0]);
    let b = cells(params.model.x0[1]);
    let norm = (CELL_POINTS * CELL_POINTS) as f64;
    for i in 0..w {
        for j in 0..w {
            let mut acc = 0.0;
            for xa in &a[i] {
                for xb in &b[j] {
                    acc += params.payoff.value(t, &[*xa, *xb]);
                }
            }
            values[i * w + j] = acc / norm;
        }
    }
}

/// Prices for each step count in `steps`.
pub fn convergence_table(params: &LatticeParams, steps: &[usize]) -> Result<Vec<(usize, f64)>> {
    steps
        .iter()
        .map(|&n| Ok((n, lattice_price(&params.with_steps(n)?)?)))
        .collect()
}
