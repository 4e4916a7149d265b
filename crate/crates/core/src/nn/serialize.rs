//! Plain-text network format, version 1.
//!
//! ```text
//! surfrank-network 1
//! seed 42
//! input 2
//! layers 3
//! dense 16 relu 0 0
//! dense 16 relu 0 0
//! dense 1 sigmoid 0 0
//! w 0 32 <32 floats>
//! b 0 16 <16 floats>
//! ...
//! end
//! ```
//!
//! Layer lines are `dense <units> <act> <l1> <l2>`, `conv2d <filters> <act>
//! <l1> <l2>`, `maxpool2d`, `upsample2d`, `concat <node>` or
//! `activation <act> <l1> <l2>`. Parameter lines exist only for layers with
//! parameters. Floats use Rust's shortest round-trip formatting, so
//! write-then-read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::layers::{LayerSpec, Regularizer};
use super::network::Network;

pub const FORMAT_TAG: &str = "surfrank-network";
pub const FORMAT_VERSION: u32 = 1;

fn write_floats(out: &mut String, values: &[f64]) {
    for v in values {
        write!(out, " {v:?}").expect("write to String");
    }
}

fn spec_line(spec: &LayerSpec) -> String {
    match spec {
        LayerSpec::Dense {
            units,
            activation,
            reg,
        } => format!("dense {units} {activation} {:?} {:?}", reg.l1, reg.l2),
        LayerSpec::Conv2d {
            filters,
            activation,
            reg,
        } => format!("conv2d {filters} {activation} {:?} {:?}", reg.l1, reg.l2),
        LayerSpec::MaxPool2d => "maxpool2d".into(),
        LayerSpec::Upsample2d => "upsample2d".into(),
        LayerSpec::Concat { with } => format!("concat {with}"),
        LayerSpec::Activation { activation, reg } => {
            format!("activation {activation} {:?} {:?}", reg.l1, reg.l2)
        }
    }
}

pub fn to_text(net: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}").unwrap();
    writeln!(out, "seed {}", net.seed).unwrap();
    let dims: Vec<String> = net.input_shape.iter().map(|d| d.to_string()).collect();
    writeln!(out, "input {}", dims.join(" ")).unwrap();
    writeln!(out, "layers {}", net.layers.len()).unwrap();
    for layer in &net.layers {
        writeln!(out, "{}", spec_line(&layer.spec)).unwrap();
    }
    for (k, layer) in net.layers.iter().enumerate() {
        if layer.weights.is_empty() && layer.bias.is_empty() {
            continue;
        }
        write!(out, "w {k} {}", layer.weights.len()).unwrap();
        write_floats(&mut out, &layer.weights);
        out.push('\n');
        write!(out, "b {k} {}", layer.bias.len()).unwrap();
        write_floats(&mut out, &layer.bias);
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() {
                return Ok((i + 1, line.split_whitespace().collect()));
            }
        }
        Err(Error::parse(0, "unexpected end of network file"))
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what}")))
}

fn parse_spec(line: usize, toks: &[&str]) -> Result<LayerSpec> {
    let act = |i: usize| -> Result<_> {
        toks.get(i)
            .ok_or_else(|| Error::parse(line, "missing activation"))?
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))
    };
    let reg = |i: usize| -> Result<Regularizer> {
        Ok(Regularizer {
            l1: num(line, toks.get(i), "l1")?,
            l2: num(line, toks.get(i + 1), "l2")?,
        })
    };
    match toks[0] {
        "dense" => Ok(LayerSpec::Dense {
            units: num(line, toks.get(1), "units")?,
            activation: act(2)?,
            reg: reg(3)?,
        }),
        "conv2d" => Ok(LayerSpec::Conv2d {
            filters: num(line, toks.get(1), "filters")?,
            activation: act(2)?,
            reg: reg(3)?,
        }),
        "maxpool2d" => Ok(LayerSpec::MaxPool2d),
        "upsample2d" => Ok(LayerSpec::Upsample2d),
        "concat" => Ok(LayerSpec::Concat {
            with: num(line, toks.get(1), "node")?,
        }),
        "activation" => Ok(LayerSpec::Activation {
            activation: act(1)?,
            reg: reg(2)?,
        }),
        other => Err(Error::parse(line, format!("unknown layer kind {other:?}"))),
    }
}

fn parse_block(line: usize, toks: &[&str], tag: &str, k: usize) -> Result<Vec<f64>> {
    if toks.first() != Some(&tag) || num::<usize>(line, toks.get(1), "layer index")? != k {
        return Err(Error::parse(line, format!("expected `{tag} {k} ...`")));
    }
    let count: usize = num(line, toks.get(2), "count")?;
    if toks.len() != 3 + count {
        return Err(Error::parse(
            line,
            format!("expected {count} values, found {}", toks.len() - 3),
        ));
    }
    toks[3..]
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::parse(line, format!("bad float {t:?}")))
        })
        .collect()
}

pub fn from_text(text: &str) -> Result<Network> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, header) = lines.next()?;
    if header.first() != Some(&FORMAT_TAG) {
        return Err(Error::parse(ln, "not a surfrank network file"));
    }
    let version: u32 = num(ln, header.get(1), "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(ln, format!("unsupported version {version}")));
    }
    let (ln, toks) = lines.next()?;
    if toks.first() != Some(&"seed") {
        return Err(Error::parse(ln, "expected seed"));
    }
    let seed: u64 = num(ln, toks.get(1), "seed")?;
    let (ln, toks) = lines.next()?;
    if toks.first() != Some(&"input") || toks.len() < 2 {
        return Err(Error::parse(ln, "expected input shape"));
    }
    let input: Vec<usize> = toks[1..]
        .iter()
        .map(|t| t.parse().map_err(|_| Error::parse(ln, "bad input dim")))
        .collect::<Result<_>>()?;
    let (ln, toks) = lines.next()?;
    if toks.first() != Some(&"layers") {
        return Err(Error::parse(ln, "expected layer count"));
    }
    let count: usize = num(ln, toks.get(1), "layer count")?;
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, toks) = lines.next()?;
        specs.push(parse_spec(ln, &toks)?);
    }
    // parameter presence follows from the layer kinds
    let mut params = Vec::with_capacity(count);
    for (k, spec) in specs.iter().enumerate() {
        if matches!(spec, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. }) {
            let (ln, toks) = lines.next()?;
            let w = parse_block(ln, &toks, "w", k)?;
            let (ln, toks) = lines.next()?;
            let b = parse_block(ln, &toks, "b", k)?;
            params.push((w, b));
        } else {
            params.push((Vec::new(), Vec::new()));
        }
    }
    let (ln, toks) = lines.next()?;
    if toks != ["end"] {
        return Err(Error::parse(ln, "expected end"));
    }
    Network::from_parts(input, specs, seed, params)
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    from_text(&std::fs::read_to_string(path)?)
}
