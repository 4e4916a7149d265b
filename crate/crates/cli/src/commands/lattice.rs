use std::path::PathBuf;

use anyhow::{bail, Result};
use surfrank::lattice::{convergence_table, lattice_price, LatticeParams};

use crate::output::{csv_text, num, write};
use crate::settings::Settings;
use crate::LatticeArgs;

pub fn run(args: &LatticeArgs, mut s: Settings) -> Result<()> {
    let x0 = s.pick_list("x0", args.x0.clone(), || vec![90.0])?;
    let x0 = match x0.as_slice() {
        [x] => vec![*x, *x],
        [a, b] => vec![*a, *b],
        _ => bail!("--x0 takes one value or two comma-separated values"),
    };
    let steps = s.pick("steps", args.steps, || 40)?;
    let european = s.switch("european_only", args.european_only)?;
    let mut table = s.pick_list("table", args.table.clone(), Vec::new)?;
    let out: PathBuf = s
        .pick(
            "out",
            args.out.as_ref().map(|p| p.display().to_string()),
            || "results/lattice".to_string(),
        )?
        .into();

    let base = LatticeParams::standard(100.0, steps)?;
    let mut params = LatticeParams {
        model: base.model.with_x0(x0)?,
        ..base
    };
    if european {
        params = params.european();
    }
    let value = lattice_price(&params)?;
    if !table.contains(&steps) {
        table.push(steps);
    }
    table.sort_unstable();
    table.dedup();
    let rows = convergence_table(&params, &table)?;
    s.record("price", num(value));
    write(
        &out,
        "lattice.csv",
        &csv_text(
            &["steps", "price"],
            rows.iter().map(|(n, p)| [n.to_string(), num(*p)]),
        )?,
    )?;
    write(&out, "manifest.txt", &s.manifest("lattice"))?;
    println!("price={value:.4}");
    Ok(())
}
