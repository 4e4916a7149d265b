use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use surfrank::nn::{AdamConfig, Regularizer, TrainConfig};
use surfrank::ranking::{run_experiment, DesignConfig, DesignKind, Example, NetConfig};

use crate::output::write;
use crate::settings::Settings;
use crate::RankArgs;

#[derive(Debug, Clone, Copy, PartialEq)]
enum NetChoice {
    FeedForward,
    Unet,
}

impl FromStr for NetChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "feedforward" | "ff" => Ok(NetChoice::FeedForward),
            "unet" => Ok(NetChoice::Unet),
            _ => Err(format!("unknown network {s:?} (feedforward or unet)")),
        }
    }
}

impl fmt::Display for NetChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetChoice::FeedForward => "feedforward",
            NetChoice::Unet => "unet",
        })
    }
}

fn parse<T: FromStr>(what: &str, text: Option<String>) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    text.map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("--{what}: {e}")))
        .transpose()
}

pub fn run(args: &RankArgs, mut s: Settings) -> Result<()> {
    let example: Example = s.require("example", parse("example", args.example.clone())?)?;
    let design: DesignKind = s.pick("design", parse("design", args.design.clone())?, || {
        example.default_design()
    })?;
    let noisy = s.switch("noisy", args.noisy)?;
    let m = s.pick("m", args.m, || example.default_budget())?;
    let net: NetChoice = s.pick("net", parse("net", args.net.clone())?, || {
        NetChoice::FeedForward
    })?;
    let seed = s.seed(args.seed)?;
    let unet = net == NetChoice::Unet;
    let net_cfg = match net {
        NetChoice::FeedForward => NetConfig::FeedForward {
            hidden: s.pick_list("hidden", args.hidden.clone(), || example.default_hidden(m))?,
            reg: Regularizer::NONE,
        },
        NetChoice::Unet => {
            if design != DesignKind::UniformGrid {
                bail!("--net unet needs --design unif");
            }
            NetConfig::Unet {
                base_channels: s.pick("base_channels", args.base_channels, || 8)?,
                reg: Regularizer::NONE,
            }
        }
    };
    let defaults = example.default_train(m, &example.default_net(m, unet), seed);
    let epochs = s.pick("epochs", args.epochs, || defaults.epochs)?;
    let default_batch = defaults
        .row_batch
        .or(defaults.batch_size)
        .unwrap_or((m / 2).max(1));
    let batch = s.pick("batch", args.batch, || default_batch)?;
    let lr = s.pick("learning_rate", args.learning_rate, || {
        defaults.adam.learning_rate
    })?;
    let out: PathBuf = s
        .pick(
            "out",
            args.out.as_ref().map(|p| p.display().to_string()),
            || format!("results/rank-{example}"),
        )?
        .into();

    let train_cfg = TrainConfig {
        epochs,
        batch_size: (!unet).then_some(batch),
        row_batch: unet.then_some(batch),
        adam: AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        },
        seed,
    };
    let set = example.surface_set(noisy);
    let design_cfg = DesignConfig {
        kind: design,
        m,
        noisy,
        seed,
    };
    let report = run_experiment(
        &set,
        &design_cfg,
        &net_cfg,
        &train_cfg,
        &example.eval_grid(seed),
    )?;

    s.record("train_accuracy", report.train_accuracy);
    s.record("gen_accuracy", report.gen_accuracy);
    write(&out, "report.txt", &report.to_text()?)?;
    write(&out, "predictions.csv", &report.grid_csv()?)?;
    write(&out, "history.csv", &report.history_csv()?)?;
    write(&out, "manifest.txt", &s.manifest("rank"))?;
    println!(
        "train_accuracy={:.4} gen_accuracy={:.4}",
        report.train_accuracy, report.gen_accuracy
    );
    Ok(())
}
