use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use surfrank::bermudan::{
    decision_map_csv, load_maps, price, save_maps, train_decision_maps, ExerciseSchedule, GbmModel,
    MapTrainingConfig, Payoff,
};
use surfrank::ranking::DesignKind;

use crate::output::{csv_text, num, write};
use crate::settings::Settings;
use crate::PriceArgs;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Desk,
    Paper,
}

impl Scale {
    fn budget(self) -> (usize, usize) {
        match self {
            Scale::Desk => (16_000, 20),
            Scale::Paper => (160_000, 100),
        }
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(format!("unknown scale {s:?} (desk or paper)")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

fn expand(x0: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    match x0.len() {
        1 => Ok(vec![x0[0]; d]),
        n if n == d => Ok(x0),
        n => bail!("--x0 has {n} values for {d} assets"),
    }
}

pub fn run(args: &PriceArgs, mut s: Settings) -> Result<()> {
    let seed = s.seed(args.seed)?;
    let scale_flag = args
        .scale
        .as_deref()
        .map(|t| {
            t.parse::<Scale>()
                .map_err(|e| anyhow::anyhow!("--scale: {e}"))
        })
        .transpose()?;
    let scale: Scale = s.pick("scale", scale_flag, || Scale::Desk)?;
    let (paths, reps) = scale.budget();
    let paths = s.pick("paths", args.paths, || paths)?;
    let reps = s.pick("repetitions", args.repetitions, || reps)?;
    let grid = s.pick("grid", args.grid, || 101)?;
    let x0 = s.pick_list("x0", args.x0.clone(), || vec![100.0])?;
    let out: PathBuf = s
        .pick(
            "out",
            args.out.as_ref().map(|p| p.display().to_string()),
            || "results/price".to_string(),
        )?
        .into();

    let maps = match &args.maps {
        Some(dir) => {
            s.record("maps", dir.display());
            let maps =
                load_maps(dir).with_context(|| format!("loading maps from {}", dir.display()))?;
            let d = maps.dim();
            if let Some(flag) = args.d {
                if flag != d {
                    bail!(
                        "--d {flag} but the maps in {} are for {d} assets",
                        dir.display()
                    );
                }
            }
            s.record("d", d);
            maps.with_x0(expand(x0, d)?)?
        }
        None => {
            let d = s.pick("d", args.d, || 2)?;
            if d == 0 {
                bail!("--d must be at least 1");
            }
            let model = GbmModel::new(
                s.pick("rate", args.rate, || 0.05)?,
                s.pick("dividend", args.dividend, || 0.10)?,
                s.pick("vol", args.vol, || 0.20)?,
                expand(x0, d)?,
            )?;
            let schedule = ExerciseSchedule::new(
                s.pick("maturity", args.maturity, || 3.0)?,
                s.pick("dates", args.dates, || 9)?,
            )?;
            let payoff = Payoff::max_call(s.pick("strike", args.strike, || 100.0)?, model.rate);
            let mut cfg = MapTrainingConfig::standard(d, seed)?;
            let design_flag = args
                .design
                .as_deref()
                .map(|t| {
                    t.parse::<DesignKind>()
                        .map_err(|e| anyhow::anyhow!("--design: {e}"))
                })
                .transpose()?;
            cfg.design = s.pick("design", design_flag, || cfg.design.clone())?;
            cfg.m = s.pick("m", args.m, || cfg.m)?;
            cfg.inner_paths = s.pick("inner_paths", args.inner_paths, || cfg.inner_paths)?;
            cfg.hidden = s.pick_list("hidden", args.hidden.clone(), || cfg.hidden.clone())?;
            cfg.train.epochs = s.pick("epochs", args.epochs, || cfg.train.epochs)?;
            let batch = s.pick("batch", args.batch, || cfg.train.batch_size.unwrap_or(128))?;
            cfg.train.batch_size = Some(batch);
            cfg.train.adam.learning_rate = s.pick("learning_rate", args.learning_rate, || {
                cfg.train.adam.learning_rate
            })?;
            let maps = train_decision_maps(&model, &schedule, &payoff, &cfg)?;
            save_maps(&maps, &out.join("maps"))?;
            maps
        }
    };

    let est = price(&maps, paths, reps, seed)?;
    s.record("price", num(est.price));
    s.record("stderr", num(est.stderr));
    s.record("sem", num(est.sem));
    write(
        &out,
        "price.csv",
        &csv_text(
            &["price", "stderr", "sem", "paths", "repetitions"],
            [[
                num(est.price),
                num(est.stderr),
                num(est.sem),
                est.paths.to_string(),
                est.repetitions.to_string(),
            ]],
        )?,
    )?;
    write(
        &out,
        "repetitions.csv",
        &csv_text(
            &["repetition", "price"],
            est.repetition_prices
                .iter()
                .enumerate()
                .map(|(k, p)| [k.to_string(), num(*p)]),
        )?,
    )?;
    if maps.dim() >= 2 {
        let dir = out.join("decision_maps");
        for j in 1..maps.schedule.count {
            write(
                &dir,
                &format!("date_{j:02}.csv"),
                &decision_map_csv(&maps, j, grid)?,
            )?;
        }
    }
    write(&out, "manifest.txt", &s.manifest("price"))?;
    println!(
        "price={:.4} stderr={:.4} sem={:.4}",
        est.price, est.stderr, est.sem
    );
    Ok(())
}
