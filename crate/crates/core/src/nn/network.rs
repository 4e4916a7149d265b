use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::surfaces::Label;

use super::layers::{self, Activation, LayerSpec};
use super::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) spec: LayerSpec,
    pub(crate) input_shape: Vec<usize>,
    pub(crate) output_shape: Vec<usize>,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Layer {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }
}

/// A chain of layers with at most the skip edges declared by `Concat` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) input_shape: Vec<usize>,
    pub(crate) layers: Vec<Layer>,
    pub(crate) seed: u64,
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias).flatten()
    }

    pub fn max_abs_diff(&self, other: &Gradients) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

enum Aux {
    None,
    Cols(Vec<f64>),
    Argmax(Vec<usize>),
}

struct Trace {
    nodes: Vec<Tensor>,
    aux: Vec<Aux>,
}

/// Resolves node shapes for a layer chain; returns per-layer (input, output) shapes.
fn infer_shapes(
    input_shape: &[usize],
    specs: &[LayerSpec],
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(Error::Shape(format!("invalid input shape {input_shape:?}")));
    }
    let mut nodes: Vec<Vec<usize>> = vec![input_shape.to_vec()];
    let mut out = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let current = nodes[k].clone();
        let skip = match spec {
            LayerSpec::Concat { with } => {
                if *with > k {
                    return Err(Error::Shape(format!(
                        "layer {k} concatenates node {with}, which is not earlier"
                    )));
                }
                Some(nodes[*with].as_slice())
            }
            _ => None,
        };
        let shape = spec
            .output_shape(&current, skip)
            .map_err(|e| Error::Shape(format!("layer {k}: {e}")))?;
        out.push((current, shape.clone()));
        nodes.push(shape);
    }
    Ok(out)
}

impl Network {
    /// Builds a network for samples of shape `input_shape` (without the batch
    /// axis). Weights are Glorot-uniform from `seed`, biases are zero.
    pub fn init(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        let shapes = infer_shapes(input_shape, specs)?;
        let mut rng = seeded(seed);
        let layers = specs
            .iter()
            .zip(shapes)
            .map(|(spec, (input, output))| {
                let (nw, nb) = spec.param_counts(&input);
                let (fan_in, fan_out) = spec.fans(&input);
                let weights = if nw > 0 {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..nw).map(|_| rng.gen_range(-limit..limit)).collect()
                } else {
                    Vec::new()
                };
                Layer {
                    spec: spec.clone(),
                    input_shape: input,
                    output_shape: output,
                    weights,
                    bias: vec![0.0; nb],
                }
            })
            .collect();
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
            seed,
        })
    }

    /// Rebuilds a network from stored parameters.
    pub(crate) fn from_parts(
        input_shape: Vec<usize>,
        specs: Vec<LayerSpec>,
        seed: u64,
        params: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let shapes = infer_shapes(&input_shape, &specs)?;
        if params.len() != specs.len() {
            return Err(Error::Shape(
                "one parameter block per layer required".into(),
            ));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for ((spec, (input, output)), (w, b)) in specs.into_iter().zip(shapes).zip(params) {
            let (nw, nb) = spec.param_counts(&input);
            if w.len() != nw || b.len() != nb {
                return Err(Error::Shape(format!(
                    "layer expects {nw} weights and {nb} biases, got {} and {}",
                    w.len(),
                    b.len()
                )));
            }
            layers.push(Layer {
                spec,
                input_shape: input,
                output_shape: output,
                weights: w,
                bias: b,
            });
        }
        Ok(Network {
            input_shape,
            layers,
            seed,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.layers.last().expect("non-empty").output_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Number of classes the output layer encodes: 2 for a single sigmoid
    /// unit, the unit count for softmax.
    pub fn classes(&self) -> Result<usize> {
        let last = self.layers.last().expect("non-empty");
        let units = *last.output_shape.last().expect("non-empty");
        match (last.spec.activation(), units) {
            (Activation::Sigmoid, 1) => Ok(2),
            (Activation::Softmax, u) if u >= 2 => Ok(u),
            (act, u) => Err(Error::Shape(format!(
                "output layer ({act}, {u} units) is not a probability layer"
            ))),
        }
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        if batch.sample_shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "network expects samples of shape {:?}, got {:?}",
                self.input_shape,
                batch.sample_shape()
            )));
        }
        Ok(())
    }

    fn trace(&self, batch: &Tensor, keep_aux: bool) -> Trace {
        let n = batch.batch();
        let mut nodes: Vec<Tensor> = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        nodes.push(batch.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let x = &nodes[k];
            let mut shape = vec![n];
            shape.extend_from_slice(&layer.output_shape);
            let mut out = Tensor::zeros(shape);
            let cin = *layer.input_shape.last().expect("non-empty");
            let mut a = Aux::None;
            match &layer.spec {
                LayerSpec::Dense { .. } => {
                    layers::dense_forward(
                        x.data(),
                        &layer.weights,
                        &layer.bias,
                        x.rows(),
                        cin,
                        out.data_mut(),
                    );
                }
                LayerSpec::Conv2d { .. } => {
                    let (h, w) = (layer.input_shape[0], layer.input_shape[1]);
                    let cols = layers::im2col(x.data(), n, h, w, cin);
                    layers::dense_forward(
                        &cols,
                        &layer.weights,
                        &layer.bias,
                        n * h * w,
                        9 * cin,
                        out.data_mut(),
                    );
                    if keep_aux {
                        a = Aux::Cols(cols);
                    }
                }
                LayerSpec::MaxPool2d => {
                    let (h, w) = (layer.input_shape[0], layer.input_shape[1]);
                    let arg = layers::maxpool_forward(x.data(), n, h, w, cin, out.data_mut());
                    if keep_aux {
                        a = Aux::Argmax(arg);
                    }
                }
                LayerSpec::Upsample2d => {
                    let (h, w) = (layer.input_shape[0], layer.input_shape[1]);
                    layers::upsample_forward(x.data(), n, h, w, cin, out.data_mut());
                }
                LayerSpec::Concat { with } => {
                    let skip = &nodes[*with];
                    layers::concat_forward(x.data(), cin, skip.data(), skip.cols(), out.data_mut());
                }
                LayerSpec::Activation { .. } => out.data_mut().copy_from_slice(x.data()),
            }
            let cols = out.cols();
            layers::activate(layer.spec.activation(), out.data_mut(), cols);
            nodes.push(out);
            aux.push(a);
        }
        Trace { nodes, aux }
    }

    /// Output probabilities for a batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut trace = self.trace(batch, false);
        Ok(trace.nodes.pop().expect("output node"))
    }

    fn regularization(&self, trace: &Trace, samples: usize) -> f64 {
        self.layers
            .iter()
            .zip(&trace.nodes[1..])
            .map(|(l, a)| l.spec.regularizer().penalty(a.data()))
            .sum::<f64>()
            / samples as f64
    }

    /// Cross-entropy plus activity penalties.
    pub fn loss(&self, batch: &Tensor, labels: &[Label]) -> Result<f64> {
        self.check_input(batch)?;
        let trace = self.trace(batch, false);
        let pred = trace.nodes.last().expect("output node");
        Ok(cross_entropy(pred, labels)? + self.regularization(&trace, batch.batch()))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn backward(&self, batch: &Tensor, labels: &[Label]) -> Result<(f64, Gradients)> {
        let (loss, grads, _) = self.backward_with_output(batch, labels)?;
        Ok((loss, grads))
    }

    /// As [`Network::backward`], also returning the forward output.
    pub(crate) fn backward_with_output(
        &self,
        batch: &Tensor,
        labels: &[Label],
    ) -> Result<(f64, Gradients, Tensor)> {
        self.backward_masked(batch, labels, None)
    }

    /// Backward pass whose cross-entropy averages only over rows with
    /// `mask[row] == true`.
    pub(crate) fn backward_masked(
        &self,
        batch: &Tensor,
        labels: &[Label],
        mask: Option<&[bool]>,
    ) -> Result<(f64, Gradients, Tensor)> {
        self.check_input(batch)?;
        self.classes()?;
        let trace = self.trace(batch, true);
        let samples = batch.batch();
        let pred = trace.nodes.last().expect("output node");
        let loss = cross_entropy_masked(pred, labels, mask)? + self.regularization(&trace, samples);

        let mut grads = Gradients::zeros_like(self);
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; trace.nodes.len()];
        let last = self.layers.len() - 1;
        let reg_scale = 1.0 / samples as f64;

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let out = &trace.nodes[k + 1];
            let cols = out.cols();
            // dL/dz for this layer's pre-activation
            let dz = if k == last {
                let mut dz = vec![0.0; out.len()];
                let reg = layer.spec.regularizer();
                if reg.is_active() {
                    reg.add_grad(out.data(), reg_scale, &mut dz);
                    layers::activation_backward(layer.spec.activation(), out.data(), &mut dz, cols);
                }
                add_fused_output_grad(out, labels, mask, &mut dz);
                dz
            } else {
                let mut da = match node_grads[k + 1].take() {
                    Some(g) => g,
                    None => continue,
                };
                layer
                    .spec
                    .regularizer()
                    .add_grad(out.data(), reg_scale, &mut da);
                layers::activation_backward(layer.spec.activation(), out.data(), &mut da, cols);
                da
            };

            let x = &trace.nodes[k];
            let cin = x.cols();
            let n = samples;
            let mut dx = vec![0.0; if k > 0 { x.len() } else { 0 }];
            match &layer.spec {
                LayerSpec::Dense { .. } => {
                    layers::dense_backward(
                        x.data(),
                        &layer.weights,
                        &dz,
                        x.rows(),
                        cin,
                        cols,
                        &mut grads.weights[k],
                        &mut grads.bias[k],
                        if k > 0 { Some(&mut dx) } else { None },
                    );
                }
                LayerSpec::Conv2d { .. } => {
                    let (h, w) = (layer.input_shape[0], layer.input_shape[1]);
                    let im = match &trace.aux[k] {
                        Aux::Cols(c) => c,
                        _ => unreachable!("conv trace keeps its patches"),
                    };
                    let mut dcols = if k > 0 {
                        vec![0.0; im.len()]
                    } else {
                        Vec::new()
                    };
                    layers::dense_backward(
                        im,
                        &layer.weights,
                        &dz,
                        n * h * w,
                        9 * cin,
                        cols,
                        &mut grads.weights[k],
                        &mut grads.bias[k],
                        if k > 0 { Some(&mut dcols) } else { None },
                    );
                    if k > 0 {
                        layers::col2im(&dcols, n, h, w, cin, &mut dx);
                    }
                }
                LayerSpec::MaxPool2d => {
                    if k > 0 {
                        let arg = match &trace.aux[k] {
                            Aux::Argmax(a) => a,
                            _ => unreachable!("pool trace keeps its argmax"),
                        };
                        for (g, &src) in dz.iter().zip(arg) {
                            dx[src] += g;
                        }
                    }
                }
                LayerSpec::Upsample2d => {
                    if k > 0 {
                        let (h, w) = (layer.input_shape[0], layer.input_shape[1]);
                        layers::upsample_backward(&dz, n, h, w, cin, &mut dx);
                    }
                }
                LayerSpec::Concat { with } => {
                    let cskip = cols - cin;
                    if k > 0 {
                        for (d, g) in dx.chunks_exact_mut(cin).zip(dz.chunks_exact(cols)) {
                            d.copy_from_slice(&g[..cin]);
                        }
                    }
                    if *with > 0 {
                        let mut ds = vec![0.0; trace.nodes[*with].len()];
                        for (d, g) in ds.chunks_exact_mut(cskip).zip(dz.chunks_exact(cols)) {
                            d.copy_from_slice(&g[cin..]);
                        }
                        accumulate(&mut node_grads[*with], ds);
                    }
                }
                LayerSpec::Activation { .. } => {
                    if k > 0 {
                        dx.copy_from_slice(&dz);
                    }
                }
            }
            if k > 0 {
                accumulate(&mut node_grads[k], dx);
            }
        }
        let mut nodes = trace.nodes;
        Ok((loss, grads, nodes.pop().expect("output node")))
    }

    /// Row-wise argmax labels; a single sigmoid unit maps `p >= 0.5` to label 1.
    pub fn predict_labels(&self, batch: &Tensor) -> Result<Vec<Label>> {
        let probs = self.forward(batch)?;
        Ok(labels_from_probs(&probs))
    }

    /// Forward pass in chunks of `chunk` samples.
    pub fn forward_chunked(&self, batch: &Tensor, chunk: usize) -> Result<Tensor> {
        self.check_input(batch)?;
        let n = batch.batch();
        if n <= chunk {
            return self.forward(batch);
        }
        let mut data = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let idx: Vec<usize> = (start..end).collect();
            data.extend(self.forward(&batch.gather(&idx))?.into_data());
            start = end;
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.output_shape());
        Tensor::new(shape, data)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

/// Adds `d(cross-entropy)/dz` for a sigmoid or softmax output, zero where the
/// probability clamp is active or the row is masked out.
fn add_fused_output_grad(pred: &Tensor, labels: &[Label], mask: Option<&[bool]>, dz: &mut [f64]) {
    let cols = pred.cols();
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let rows = (0..pred.rows()).filter(|&i| keep(i)).count().max(1) as f64;
    let in_range = |p: f64| (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p);
    for (i, ((grow, prow), lab)) in dz
        .chunks_exact_mut(cols)
        .zip(pred.data().chunks_exact(cols))
        .zip(labels)
        .enumerate()
    {
        if !keep(i) {
            continue;
        }
        if cols == 1 {
            let y = if lab.0 == 1 { 1.0 } else { 0.0 };
            if in_range(prow[0]) {
                grow[0] += (prow[0] - y) / rows;
            }
        } else {
            let t = lab.index0();
            if in_range(prow[t]) {
                for (j, (g, p)) in grow.iter_mut().zip(prow).enumerate() {
                    let y = if j == t { 1.0 } else { 0.0 };
                    *g += (p - y) / rows;
                }
            }
        }
    }
}

/// Mean negative log-likelihood over the rows of `pred`.
///
/// A single column holds the probability of label 1 (binary case); otherwise
/// each row is a distribution over `cols` labels.
pub fn cross_entropy(pred: &Tensor, labels: &[Label]) -> Result<f64> {
    cross_entropy_masked(pred, labels, None)
}

pub(crate) fn cross_entropy_masked(
    pred: &Tensor,
    labels: &[Label],
    mask: Option<&[bool]>,
) -> Result<f64> {
    let cols = pred.cols();
    let rows = pred.rows();
    if labels.len() != rows || mask.is_some_and(|m| m.len() != rows) {
        return Err(Error::Shape(format!(
            "{} labels for {rows} prediction rows",
            labels.len()
        )));
    }
    let classes = if cols == 1 { 2 } else { cols };
    let clamp = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, lab) in labels.iter().enumerate() {
        if lab.0 == 0 || lab.0 as usize > classes {
            return Err(Error::Domain(format!(
                "label {} outside 1..={classes}",
                lab.0
            )));
        }
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        counted += 1;
        let row = pred.row(i);
        total -= if cols == 1 {
            let p = clamp(row[0]);
            if lab.0 == 1 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        } else {
            clamp(row[lab.index0()]).ln()
        };
    }
    Ok(total / counted.max(1) as f64)
}

pub fn labels_from_probs(probs: &Tensor) -> Vec<Label> {
    let cols = probs.cols();
    (0..probs.rows())
        .map(|i| {
            let row = probs.row(i);
            if cols == 1 {
                if row[0] >= 0.5 {
                    Label(1)
                } else {
                    Label(2)
                }
            } else {
                let mut best = 0;
                for j in 1..cols {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                Label::from_index0(best)
            }
        })
        .collect()
}
