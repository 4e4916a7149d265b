use crate::error::Result;
use crate::surfaces::Label;

use super::network::Network;
use super::tensor::Tensor;

fn param_mut(net: &mut Network, layer: usize, bias: bool, i: usize) -> &mut f64 {
    let l = &mut net.layers[layer];
    if bias {
        &mut l.bias[i]
    } else {
        &mut l.weights[i]
    }
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over all parameters,
/// with central differences of half-width `step`.
pub fn grad_check(net: &Network, batch: &Tensor, labels: &[Label], step: f64) -> Result<f64> {
    let (_, grads) = net.backward(batch, labels)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..net.layers.len() {
        for bias in [false, true] {
            let analytic = if bias {
                &grads.bias[k]
            } else {
                &grads.weights[k]
            };
            for (i, a) in analytic.iter().enumerate() {
                let original = *param_mut(&mut probe, k, bias, i);
                *param_mut(&mut probe, k, bias, i) = original + step;
                let plus = probe.loss(batch, labels)?;
                *param_mut(&mut probe, k, bias, i) = original - step;
                let minus = probe.loss(batch, labels)?;
                *param_mut(&mut probe, k, bias, i) = original;
                let numeric = (plus - minus) / (2.0 * step);
                worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}
