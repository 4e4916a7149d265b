//! The two architectures used throughout: a dense feed-forward stack and a
//! one-level UNet over a grid of points.

use crate::error::{Error, Result};

use super::layers::{Activation, LayerSpec, Regularizer};

/// Output head: one sigmoid unit for two classes, softmax otherwise.
pub fn output_layer(classes: usize) -> LayerSpec {
    if classes == 2 {
        LayerSpec::dense(1, Activation::Sigmoid)
    } else {
        LayerSpec::dense(classes, Activation::Softmax)
    }
}

/// ReLU dense layers of the given widths followed by the output head.
/// Input samples have shape `[d]`.
pub fn build_feedforward(d: usize, classes: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    build_feedforward_with(d, classes, hidden, Regularizer::NONE)
}

pub fn build_feedforward_with(
    _d: usize,
    classes: usize,
    hidden: &[usize],
    reg: Regularizer,
) -> Vec<LayerSpec> {
    let mut specs: Vec<LayerSpec> = hidden
        .iter()
        .map(|&units| LayerSpec::Dense {
            units,
            activation: Activation::Relu,
            reg,
        })
        .collect();
    specs.push(output_layer(classes));
    specs
}

/// Conv(3x3) -> dense -> pool -> dense -> upsample -> concat(pre-pool) ->
/// dense -> per-pixel head. Input samples have shape `[grid_h, grid_w, d]`.
pub fn build_unet(
    grid_h: usize,
    grid_w: usize,
    _d: usize,
    classes: usize,
    base_channels: usize,
) -> Result<Vec<LayerSpec>> {
    build_unet_with(
        grid_h,
        grid_w,
        _d,
        classes,
        base_channels,
        Regularizer::NONE,
    )
}

/// [`build_unet`] with an activity regularizer on the three dense blocks.
pub fn build_unet_with(
    grid_h: usize,
    grid_w: usize,
    _d: usize,
    classes: usize,
    base_channels: usize,
    reg: Regularizer,
) -> Result<Vec<LayerSpec>> {
    if !grid_h.is_multiple_of(2) || !grid_w.is_multiple_of(2) || grid_h == 0 || grid_w == 0 {
        return Err(Error::Config(format!(
            "UNet grid {grid_h}x{grid_w} must have even, non-zero sides"
        )));
    }
    if base_channels == 0 {
        return Err(Error::Config("UNet needs base_channels >= 1".into()));
    }
    let b = base_channels;
    let block = |units| LayerSpec::Dense {
        units,
        activation: Activation::Relu,
        reg,
    };
    Ok(vec![
        LayerSpec::conv2d(b, Activation::Relu),
        block(b),
        LayerSpec::MaxPool2d,
        block(2 * b),
        LayerSpec::Upsample2d,
        // node 2 is the dense block output before pooling
        LayerSpec::Concat { with: 2 },
        block(b),
        output_layer(classes),
    ])
}
