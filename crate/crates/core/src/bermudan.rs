//! Bermudan max-call pricing with learned stop/continue decision maps.
//!
//! Training walks the exercise dates backwards. At each date `t_i` every
//! design point `x` gets a continuation estimate: the mean payoff of `R`
//! fresh paths started at `(t_i, x)` and stopped by the maps already trained
//! for later dates. The point is labelled "continue" when that estimate beats
//! immediate exercise, and a classifier is fitted to the labels. Pricing then
//! runs the learned stopping rule on out-of-sample paths from `X(0)`.
//!
//! The payoff is discounted to time 0 inside `h`, so no other discounting
//! appears anywhere.

use std::fmt;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::nn::{
    build_feedforward, labels_from_probs, serialize, train, AdamConfig, Network, Tensor,
    TrainConfig,
};
use crate::ranking::{accuracy, generate_design, uniform_grid, DesignKind, PointSet};
use crate::rng::{derive_seed, substream, Rng};
use crate::surfaces::{Domain, Label};

/// Label of the "exercise now" class.
pub const STOP: Label = Label(1);
/// Label of the "hold one more period" class.
pub const CONTINUE: Label = Label(2);

const TAG_DESIGN: u64 = 0x4445_5349;
const TAG_INNER: u64 = 0x494e_4e52;
const TAG_INIT: u64 = 0x4d49_4e49;
const TAG_TRAIN: u64 = 0x4d54_524e;
const TAG_PRICE: u64 = 0x5052_4943;
/// Design points simulated together in one batched map evaluation.
const POINT_CHUNK: usize = 64;
/// Paths per batched map evaluation when pricing.
const PATH_CHUNK: usize = 4096;
const MANIFEST: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# surfrank decision maps";

/// Independent geometric Brownian motions with common rate, dividend yield
/// and volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub rate: f64,
    pub dividend: f64,
    pub vol: f64,
    pub x0: Vec<f64>,
}

impl GbmModel {
    pub fn new(rate: f64, dividend: f64, vol: f64, x0: Vec<f64>) -> Result<Self> {
        if vol.is_nan() || vol <= 0.0 || !vol.is_finite() {
            return Err(Error::Config(format!(
                "volatility must be positive, got {vol}"
            )));
        }
        if !rate.is_finite() || !dividend.is_finite() {
            return Err(Error::Config("rate and dividend must be finite".into()));
        }
        if x0.is_empty() {
            return Err(Error::Config("model needs at least one asset".into()));
        }
        if x0.iter().any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
            return Err(Error::Config(format!(
                "initial prices must be positive, got {x0:?}"
            )));
        }
        Ok(GbmModel {
            rate,
            dividend,
            vol,
            x0,
        })
    }

    /// r = 5%, dividend 10%, vol 20%, every asset starting at `x0`.
    pub fn standard(d: usize, x0: f64) -> Result<Self> {
        GbmModel::new(0.05, 0.10, 0.20, vec![x0; d])
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        GbmModel::new(self.rate, self.dividend, self.vol, x0)
    }

    /// Drift of the log-price, `r - delta - sigma^2 / 2`.
    pub fn log_drift(&self) -> f64 {
        self.rate - self.dividend - 0.5 * self.vol * self.vol
    }
}

/// Dates `t_i = i T / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExerciseSchedule {
    pub maturity: f64,
    pub count: usize,
}

impl ExerciseSchedule {
    pub fn new(maturity: f64, count: usize) -> Result<Self> {
        if maturity.is_nan() || maturity <= 0.0 || !maturity.is_finite() {
            return Err(Error::Config(format!(
                "maturity must be positive, got {maturity}"
            )));
        }
        if count == 0 {
            return Err(Error::Config("need at least one exercise date".into()));
        }
        Ok(ExerciseSchedule { maturity, count })
    }

    /// T = 3 years, N = 9 dates.
    pub fn standard() -> Self {
        ExerciseSchedule {
            maturity: 3.0,
            count: 9,
        }
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.count as f64
    }

    pub fn date(&self, i: usize) -> f64 {
        if i == self.count {
            self.maturity
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn dates(&self) -> Vec<f64> {
        (0..=self.count).map(|i| self.date(i)).collect()
    }
}

/// Discounted max-call `h(t, x) = e^{-rt} (max_i x_i - K)_+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub strike: f64,
    pub rate: f64,
}

impl Payoff {
    pub fn max_call(strike: f64, rate: f64) -> Self {
        Payoff { strike, rate }
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let best = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (-self.rate * t).exp() * (best - self.strike).max(0.0)
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "max-call K={} r={}", self.strike, self.rate)
    }
}

// ---------------------------------------------------------------------------
// Paths

/// `count` simulated paths over dates `from_index..=N`, stored path-major as
/// `count x dates x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    count: usize,
    dates: usize,
    dim: usize,
    from_index: usize,
    data: Vec<f64>,
}

impl PathArray {
    pub fn count(&self) -> usize {
        self.count
    }

    /// Number of dates per path, the start included.
    pub fn dates(&self) -> usize {
        self.dates
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn from_index(&self) -> usize {
        self.from_index
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Whole path `r`, `dates x dim` values.
    pub fn path(&self, r: usize) -> &[f64] {
        let len = self.dates * self.dim;
        &self.data[r * len..(r + 1) * len]
    }

    /// State of path `r` at its `k`-th date (`k = 0` is the start).
    pub fn state(&self, r: usize, k: usize) -> &[f64] {
        let at = (r * self.dates + k) * self.dim;
        &self.data[at..at + self.dim]
    }
}

/// Exact lognormal paths from `start` at date `from_index` to maturity.
/// Normals are drawn path by path, date by date, asset by asset.
pub fn simulate_paths(
    model: &GbmModel,
    start: &[f64],
    from_index: usize,
    schedule: &ExerciseSchedule,
    count: usize,
    rng: &mut Rng,
) -> Result<PathArray> {
    let dim = model.dim();
    if start.len() != dim {
        return Err(Error::Shape(format!(
            "start has {} assets, model has {dim}",
            start.len()
        )));
    }
    if start.iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Domain(format!(
            "start prices must be positive, got {start:?}"
        )));
    }
    if from_index > schedule.count {
        return Err(Error::Config(format!(
            "date index {from_index} beyond the last date {}",
            schedule.count
        )));
    }
    let dates = schedule.count - from_index + 1;
    let steps: Vec<(f64, f64)> = (1..dates)
        .map(|k| {
            let dt = schedule.date(from_index + k) - schedule.date(from_index + k - 1);
            (model.log_drift() * dt, model.vol * dt.sqrt())
        })
        .collect();
    let mut data = Vec::with_capacity(count * dates * dim);
    for _ in 0..count {
        let base = data.len();
        data.extend_from_slice(start);
        for (k, &(drift, scale)) in steps.iter().enumerate() {
            for a in 0..dim {
                let z: f64 = StandardNormal.sample(rng);
                let prev = data[base + k * dim + a];
                data.push(prev * (drift + scale * z).exp());
            }
        }
    }
    Ok(PathArray {
        count,
        dates,
        dim,
        from_index,
        data,
    })
}

// ---------------------------------------------------------------------------
// Decision maps

/// Stop/continue classifier at one exercise date.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionMap {
    /// Same decision everywhere.
    Constant(Label),
    /// Network on inputs rescaled from the training box to `[-1, 1]^d`; its
    /// sigmoid output is the probability of stopping.
    Network(Network),
}

impl DecisionMap {
    /// Probability of "continue" at each of the `states` (row-major, `dim`
    /// values per state).
    pub fn continue_probability(&self, states: &[f64], domain: &Domain) -> Result<Vec<f64>> {
        let d = domain.dim();
        let n = states.len() / d;
        match self {
            DecisionMap::Constant(label) => Ok(vec![if *label == CONTINUE { 1.0 } else { 0.0 }; n]),
            DecisionMap::Network(net) => {
                let mut unit = vec![0.0; states.len()];
                for (x, u) in states.chunks(d).zip(unit.chunks_mut(d)) {
                    domain.to_unit(x, u);
                }
                let probs = net.forward_chunked(&Tensor::matrix(n, d, unit)?, PATH_CHUNK)?;
                Ok(probs.data().iter().map(|p| 1.0 - p).collect())
            }
        }
    }

    /// `true` where the map says stop.
    pub fn stop_mask(&self, states: &[f64], domain: &Domain) -> Result<Vec<bool>> {
        match self {
            DecisionMap::Constant(label) => Ok(vec![*label == STOP; states.len() / domain.dim()]),
            DecisionMap::Network(net) => {
                let d = domain.dim();
                let mut unit = vec![0.0; states.len()];
                for (x, u) in states.chunks(d).zip(unit.chunks_mut(d)) {
                    domain.to_unit(x, u);
                }
                let n = states.len() / d;
                let probs = net.forward_chunked(&Tensor::matrix(n, d, unit)?, PATH_CHUNK)?;
                Ok(labels_from_probs(&probs)
                    .into_iter()
                    .map(|l| l == STOP)
                    .collect())
            }
        }
    }
}

/// How the maps were obtained at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DateRecord {
    pub index: usize,
    /// Fraction of design points labelled "continue".
    pub continue_fraction: f64,
    /// Training accuracy of the fitted network, `None` for a constant map.
    pub train_accuracy: Option<f64>,
}

/// Budgets and settings for [`train_decision_maps`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapTrainingConfig {
    pub domain: Domain,
    pub design: DesignKind,
    /// Design points per date.
    pub m: usize,
    /// Inner paths per design point.
    pub inner_paths: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl MapTrainingConfig {
    /// 32x32 grid on `[50, 150]^2` for two assets, `1024 d` Latin hypercube
    /// points on `[30, 180]^d` otherwise; 100 inner paths; two hidden layers
    /// of 64; 500 epochs of 128-point Adam batches.
    pub fn standard(d: usize, seed: u64) -> Result<Self> {
        let (domain, design, m) = if d == 2 {
            (Domain::cube(2, 50.0, 150.0)?, DesignKind::UniformGrid, 1024)
        } else {
            (
                Domain::cube(d, 30.0, 180.0)?,
                DesignKind::LatinHypercube,
                1024 * d,
            )
        };
        Ok(MapTrainingConfig {
            domain,
            design,
            m,
            inner_paths: 100,
            hidden: vec![64, 64],
            train: TrainConfig {
                epochs: 500,
                batch_size: Some(128),
                row_batch: None,
                adam: AdamConfig::default(),
                seed,
            },
            seed,
        })
    }
}

/// Decision maps for dates `t_1..t_N`; the map at `t_N` is always stop.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMapSequence {
    pub model: GbmModel,
    pub schedule: ExerciseSchedule,
    pub payoff: Payoff,
    pub config: MapTrainingConfig,
    maps: Vec<DecisionMap>,
    records: Vec<DateRecord>,
}

impl DecisionMapSequence {
    /// Wraps maps for dates `1..N-1`; the stop map at maturity is appended.
    pub fn new(
        model: GbmModel,
        schedule: ExerciseSchedule,
        payoff: Payoff,
        config: MapTrainingConfig,
        maps: Vec<DecisionMap>,
        records: Vec<DateRecord>,
    ) -> Result<Self> {
        let n = schedule.count;
        if maps.len() + 1 != n {
            return Err(Error::Config(format!(
                "need {} maps for dates 1..{}, got {}",
                n - 1,
                n - 1,
                maps.len()
            )));
        }
        if config.domain.dim() != model.dim() {
            return Err(Error::Shape(
                "map domain and model dimensions differ".into(),
            ));
        }
        for map in &maps {
            if let DecisionMap::Network(net) = map {
                if net.input_shape() != [model.dim()] {
                    return Err(Error::Shape(format!(
                        "map network takes {:?}, model has {} assets",
                        net.input_shape(),
                        model.dim()
                    )));
                }
            }
        }
        let mut maps = maps;
        maps.push(DecisionMap::Constant(STOP));
        Ok(DecisionMapSequence {
            model,
            schedule,
            payoff,
            config,
            maps,
            records,
        })
    }

    /// Maps that give the same decision at every date before maturity.
    pub fn constant(
        model: GbmModel,
        schedule: ExerciseSchedule,
        payoff: Payoff,
        config: MapTrainingConfig,
        label: Label,
    ) -> Result<Self> {
        let maps = vec![DecisionMap::Constant(label); schedule.count - 1];
        DecisionMapSequence::new(model, schedule, payoff, config, maps, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.config.domain
    }

    /// Map at date index `j`, `1 <= j <= N`.
    pub fn map(&self, j: usize) -> &DecisionMap {
        &self.maps[j - 1]
    }

    pub fn records(&self) -> &[DateRecord] {
        &self.records
    }

    /// Same maps, pricing a different start.
    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Ok(DecisionMapSequence {
            model: self.model.with_x0(x0)?,
            ..self.clone()
        })
    }
}

/// `h(tau, X_tau)` for every path, `tau` being the first date after the
/// paths' start at which the map says stop (maturity at the latest).
pub fn stop_values(paths: &PathArray, maps: &DecisionMapSequence) -> Result<Vec<f64>> {
    let schedule = &maps.schedule;
    let from = paths.from_index;
    if from >= schedule.count {
        return Err(Error::Config(
            "paths start at maturity; nothing left to decide".into(),
        ));
    }
    if paths.dim != maps.dim() || paths.dates != schedule.count - from + 1 {
        return Err(Error::Shape("paths do not match the map sequence".into()));
    }
    let d = paths.dim;
    let mut value = vec![0.0; paths.count];
    let mut alive: Vec<usize> = (0..paths.count).collect();
    let mut states = Vec::new();
    for j in from + 1..=schedule.count {
        if alive.is_empty() {
            break;
        }
        let k = j - from;
        states.clear();
        for &r in &alive {
            states.extend_from_slice(paths.state(r, k));
        }
        let stop = maps.map(j).stop_mask(&states, maps.domain())?;
        let t = schedule.date(j);
        let mut still = Vec::with_capacity(alive.len());
        for (idx, &r) in alive.iter().enumerate() {
            if stop[idx] {
                value[r] = maps.payoff.value(t, &states[idx * d..(idx + 1) * d]);
            } else {
                still.push(r);
            }
        }
        alive = still;
    }
    Ok(value)
}

/// Stopped payoff of one path given as `dates x dim` states from date
/// `from_index`.
pub fn pathwise_stop(path: &[f64], maps: &DecisionMapSequence, from_index: usize) -> Result<f64> {
    let dim = maps.dim();
    let dates = maps.schedule.count.saturating_sub(from_index) + 1;
    if path.len() != dates * dim {
        return Err(Error::Shape(format!(
            "path holds {} values, expected {dates} dates x {dim}",
            path.len()
        )));
    }
    let paths = PathArray {
        count: 1,
        dates,
        dim,
        from_index,
        data: path.to_vec(),
    };
    Ok(stop_values(&paths, maps)?[0])
}

/// Mean stopped payoff of `r` fresh paths from `(t_i, x)`.
pub fn estimate_continuation(
    x: &[f64],
    i: usize,
    maps: &DecisionMapSequence,
    r: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if r == 0 {
        return Err(Error::Config("need at least one inner path".into()));
    }
    let paths = simulate_paths(&maps.model, x, i, &maps.schedule, r, rng)?;
    let values = stop_values(&paths, maps)?;
    Ok(values.iter().sum::<f64>() / r as f64)
}

/// Continuation estimates at every design point, point `p` drawing its
/// inner paths from substream `(seed, p)`.
pub fn continuation_estimates(
    points: &PointSet,
    i: usize,
    maps: &DecisionMapSequence,
    r: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::Config("need at least one inner path".into()));
    }
    let n = points.len();
    let chunks: Vec<Vec<f64>> = (0..n)
        .step_by(POINT_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|first| -> Result<Vec<f64>> {
            let last = (first + POINT_CHUNK).min(n);
            let mut all: Option<PathArray> = None;
            for p in first..last {
                let mut rng = substream(seed, TAG_INNER, p as u64);
                let paths =
                    simulate_paths(&maps.model, points.point(p), i, &maps.schedule, r, &mut rng)?;
                match &mut all {
                    None => all = Some(paths),
                    Some(acc) => {
                        acc.count += paths.count;
                        acc.data.extend_from_slice(&paths.data);
                    }
                }
            }
            let values = stop_values(&all.expect("non-empty chunk"), maps)?;
            Ok(values
                .chunks(r)
                .map(|c| c.iter().sum::<f64>() / r as f64)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

/// Labelled design of one date: points, continuation estimates and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DateLabels {
    pub points: PointSet,
    pub continuation: Vec<f64>,
    pub labels: Vec<Label>,
}

/// Labels "continue" where the continuation estimate beats exercise at `t_i`.
pub fn label_date(i: usize, maps: &DecisionMapSequence, seed: u64) -> Result<DateLabels> {
    let cfg = &maps.config;
    let design_seed = derive_seed(derive_seed(seed, TAG_DESIGN), i as u64);
    let points = generate_design(&cfg.design, cfg.m, &cfg.domain, design_seed)?;
    let inner_seed = derive_seed(derive_seed(seed, TAG_INNER), i as u64);
    let continuation = continuation_estimates(&points, i, maps, cfg.inner_paths, inner_seed)?;
    let t = maps.schedule.date(i);
    let labels = points
        .points()
        .zip(&continuation)
        .map(|(x, &c)| {
            if c > maps.payoff.value(t, x) {
                CONTINUE
            } else {
                STOP
            }
        })
        .collect();
    Ok(DateLabels {
        points,
        continuation,
        labels,
    })
}

/// Trains the maps backwards from `t_{N-1}` to `t_1`.
pub fn train_decision_maps(
    model: &GbmModel,
    schedule: &ExerciseSchedule,
    payoff: &Payoff,
    config: &MapTrainingConfig,
) -> Result<DecisionMapSequence> {
    if config.domain.dim() != model.dim() {
        return Err(Error::Shape(
            "training box and model dimensions differ".into(),
        ));
    }
    if config.domain.lower().iter().any(|v| *v <= 0.0) {
        return Err(Error::Config(
            "the training box must lie in the positive orthant".into(),
        ));
    }
    if config.m == 0 || config.inner_paths == 0 {
        return Err(Error::Config(
            "design and inner-path budgets must be >= 1".into(),
        ));
    }
    let n = schedule.count;
    let mut seq =
        DecisionMapSequence::constant(model.clone(), *schedule, *payoff, config.clone(), STOP)?;
    let mut records = Vec::with_capacity(n.saturating_sub(1));
    for i in (1..n).rev() {
        let labelled = label_date(i, &seq, config.seed)?;
        let continuing = labelled.labels.iter().filter(|l| **l == CONTINUE).count();
        let fraction = continuing as f64 / labelled.labels.len() as f64;
        let (map, train_accuracy) = if continuing == 0 || continuing == labelled.labels.len() {
            (DecisionMap::Constant(labelled.labels[0]), None)
        } else {
            let x = labelled.points.normalized(&config.domain)?;
            let specs = build_feedforward(model.dim(), 2, &config.hidden);
            let init = derive_seed(derive_seed(config.seed, TAG_INIT), i as u64);
            let net = Network::init(&[model.dim()], &specs, init)?;
            let train_cfg = TrainConfig {
                seed: derive_seed(derive_seed(config.train.seed, TAG_TRAIN), i as u64),
                // small designs train in one full batch
                batch_size: config.train.batch_size.map(|b| b.min(config.m)),
                ..config.train.clone()
            };
            let (net, _) = train(net, &x, &labelled.labels, &train_cfg)?;
            let acc = accuracy(&net.predict_labels(&x)?, &labelled.labels)?;
            (DecisionMap::Network(net), Some(acc))
        };
        seq.maps[i - 1] = map;
        records.push(DateRecord {
            index: i,
            continue_fraction: fraction,
            train_accuracy,
        });
    }
    records.reverse();
    seq.records = records;
    Ok(seq)
}

// ---------------------------------------------------------------------------
// Pricing

#[derive(Debug, Clone, PartialEq)]
pub struct PriceEstimate {
    /// Mean over repetitions of `max(h(0, X0), mean stopped payoff)`.
    pub price: f64,
    /// Standard deviation of the repetition prices.
    pub stderr: f64,
    /// Standard error of the mean price, `stderr / sqrt(repetitions)`.
    pub sem: f64,
    pub paths: usize,
    pub repetitions: usize,
    pub repetition_prices: Vec<f64>,
}

/// Out-of-sample price of the learned stopping rule from `maps.model.x0`.
/// Repetition `k` draws its paths from substream `(seed, k)`.
pub fn price(
    maps: &DecisionMapSequence,
    paths: usize,
    repetitions: usize,
    seed: u64,
) -> Result<PriceEstimate> {
    if paths == 0 || repetitions == 0 {
        return Err(Error::Config(
            "need at least one path and one repetition".into(),
        ));
    }
    let x0 = &maps.model.x0;
    let exercise_now = maps.payoff.value(0.0, x0);
    let per_rep: Vec<f64> = (0..repetitions)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = substream(seed, TAG_PRICE, k as u64);
            let mut total = 0.0;
            let mut left = paths;
            while left > 0 {
                let batch = left.min(PATH_CHUNK);
                let sim = simulate_paths(&maps.model, x0, 0, &maps.schedule, batch, &mut rng)?;
                total += stop_values(&sim, maps)?.iter().sum::<f64>();
                left -= batch;
            }
            Ok(exercise_now.max(total / paths as f64))
        })
        .collect::<Result<_>>()?;
    let reps = repetitions as f64;
    let mean = per_rep.iter().sum::<f64>() / reps;
    let stderr = if repetitions > 1 {
        (per_rep.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (reps - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(PriceEstimate {
        price: mean,
        stderr,
        sem: stderr / reps.sqrt(),
        paths,
        repetitions,
        repetition_prices: per_rep,
    })
}

// ---------------------------------------------------------------------------
// Persistence

fn map_file(j: usize) -> String {
    format!("map_{j:02}.net")
}

fn floats(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v:?}")).collect()
}

/// Manifest of a map sequence as `key=value` pairs.
pub fn manifest(maps: &DecisionMapSequence) -> KeyValues {
    let c = &maps.config;
    let m = &maps.model;
    let mut kv = KeyValues::new();
    kv.set("dim", m.dim());
    kv.set("rate", format!("{:?}", m.rate));
    kv.set("dividend", format!("{:?}", m.dividend));
    kv.set("vol", format!("{:?}", m.vol));
    kv.set_list("x0", &floats(&m.x0));
    kv.set("maturity", format!("{:?}", maps.schedule.maturity));
    kv.set("dates", maps.schedule.count);
    kv.set("strike", format!("{:?}", maps.payoff.strike));
    kv.set_list("domain_lower", &floats(c.domain.lower()));
    kv.set_list("domain_upper", &floats(c.domain.upper()));
    kv.set("design", &c.design);
    kv.set("m", c.m);
    kv.set("inner_paths", c.inner_paths);
    kv.set_list("hidden", &c.hidden);
    kv.set("epochs", c.train.epochs);
    kv.set(
        "batch",
        c.train
            .batch_size
            .map_or("half".to_string(), |b| b.to_string()),
    );
    kv.set("learning_rate", format!("{:?}", c.train.adam.learning_rate));
    kv.set("beta1", format!("{:?}", c.train.adam.beta1));
    kv.set("beta2", format!("{:?}", c.train.adam.beta2));
    kv.set("epsilon", format!("{:?}", c.train.adam.epsilon));
    kv.set("train_seed", c.train.seed);
    kv.set("seed", c.seed);
    for j in 1..maps.schedule.count {
        let kind = match maps.map(j) {
            DecisionMap::Constant(l) if *l == STOP => "stop".to_string(),
            DecisionMap::Constant(_) => "continue".to_string(),
            DecisionMap::Network(_) => map_file(j),
        };
        kv.set(&format!("map.{j}"), kind);
    }
    for r in &maps.records {
        kv.set(
            &format!("continue_fraction.{}", r.index),
            format!("{:?}", r.continue_fraction),
        );
        if let Some(acc) = r.train_accuracy {
            kv.set(&format!("train_accuracy.{}", r.index), format!("{acc:?}"));
        }
    }
    kv
}

/// Manifest file contents: a header line, then the `key=value` pairs.
pub fn manifest_text(maps: &DecisionMapSequence) -> String {
    format!("{MANIFEST_HEADER}\n{}", manifest(maps).to_text())
}

/// Writes the manifest and one network file per trained date into `dir`.
pub fn save_maps(maps: &DecisionMapSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for j in 1..maps.schedule.count {
        if let DecisionMap::Network(net) = maps.map(j) {
            serialize::save(net, &dir.join(map_file(j)))?;
        }
    }
    std::fs::write(dir.join(MANIFEST), manifest_text(maps))?;
    Ok(())
}

/// Reads a directory written by [`save_maps`].
pub fn load_maps(dir: &Path) -> Result<DecisionMapSequence> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    if text.lines().next() != Some(MANIFEST_HEADER) {
        return Err(Error::parse(1, format!("expected {MANIFEST_HEADER:?}")));
    }
    let kv = KeyValues::parse(&text)?;
    let model = GbmModel::new(
        kv.require("rate")?,
        kv.require("dividend")?,
        kv.require("vol")?,
        kv.require_list("x0")?,
    )?;
    if model.dim() != kv.require::<usize>("dim")? {
        return Err(Error::Config("manifest x0 length differs from dim".into()));
    }
    let schedule = ExerciseSchedule::new(kv.require("maturity")?, kv.require("dates")?)?;
    let payoff = Payoff::max_call(kv.require("strike")?, model.rate);
    let batch = match kv.raw("batch") {
        Some("half") => None,
        _ => Some(kv.require("batch")?),
    };
    let config = MapTrainingConfig {
        domain: Domain::new(
            kv.require_list("domain_lower")?,
            kv.require_list("domain_upper")?,
        )?,
        design: kv.require("design")?,
        m: kv.require("m")?,
        inner_paths: kv.require("inner_paths")?,
        hidden: kv.require_list("hidden")?,
        train: TrainConfig {
            epochs: kv.require("epochs")?,
            batch_size: batch,
            row_batch: None,
            adam: AdamConfig {
                learning_rate: kv.require("learning_rate")?,
                beta1: kv.require("beta1")?,
                beta2: kv.require("beta2")?,
                epsilon: kv.require("epsilon")?,
            },
            seed: kv.require("train_seed")?,
        },
        seed: kv.require("seed")?,
    };
    let mut maps = Vec::new();
    let mut records = Vec::new();
    for j in 1..schedule.count {
        let kind: String = kv.require(&format!("map.{j}"))?;
        maps.push(match kind.as_str() {
            "stop" => DecisionMap::Constant(STOP),
            "continue" => DecisionMap::Constant(CONTINUE),
            file if file == map_file(j) => DecisionMap::Network(serialize::load(&dir.join(file))?),
            other => return Err(Error::Config(format!("unknown map {other:?} for date {j}"))),
        });
        if let Some(fraction) = kv.get(&format!("continue_fraction.{j}"))? {
            records.push(DateRecord {
                index: j,
                continue_fraction: fraction,
                train_accuracy: kv.get(&format!("train_accuracy.{j}"))?,
            });
        }
    }
    DecisionMapSequence::new(model, schedule, payoff, config, maps, records)
}

/// Continue probabilities of the map at date `j` on a `per_axis x per_axis`
/// grid over the first two coordinates of the training box; other
/// coordinates are held at `x0`. Rows are `(x1, x2, p_continue)`.
pub fn decision_map_grid(
    maps: &DecisionMapSequence,
    j: usize,
    per_axis: usize,
) -> Result<Vec<[f64; 3]>> {
    let d = maps.dim();
    if d < 2 {
        return Err(Error::Config(
            "decision-map grids need at least two assets".into(),
        ));
    }
    if j == 0 || j > maps.schedule.count {
        return Err(Error::Config(format!("no map at date index {j}")));
    }
    let lower = &maps.domain().lower()[..2];
    let upper = &maps.domain().upper()[..2];
    let plane = Domain::new(lower.to_vec(), upper.to_vec())?;
    let grid = uniform_grid(&plane, per_axis);
    let mut states = Vec::with_capacity(grid.len() * d);
    for p in grid.points() {
        states.extend_from_slice(p);
        states.extend_from_slice(&maps.model.x0[2..]);
    }
    let probs = maps.map(j).continue_probability(&states, maps.domain())?;
    Ok(grid
        .points()
        .zip(probs)
        .map(|(p, q)| [p[0], p[1], q])
        .collect())
}

/// [`decision_map_grid`] as CSV with header `x1,x2,p_continue`.
pub fn decision_map_csv(maps: &DecisionMapSequence, j: usize, per_axis: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["x1", "x2", "p_continue"]).map_err(io)?;
    for row in decision_map_grid(maps, j, per_axis)? {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
