//! Central finite-difference oracle for [`MlpParams::backward`].
//!
//! The probe loss is the sum of the network outputs. Relative errors use
//! `|a - n| / max(|a|, |n|, 1e-6)` so that exactly-zero gradients (dead
//! ReLUs) compare cleanly.

use super::{ApproxError, Gradients, MlpParams};
use crate::scalar::Scalar;

const RELATIVE_FLOOR: f64 = 1e-6;

fn probe_loss<S: Scalar>(params: &MlpParams<S>, x: &[S]) -> Result<f64, ApproxError> {
    Ok(params.predict(x)?.iter().map(|v| v.to_f64_lossy()).sum())
}

/// Central differences of the probe loss w.r.t. every parameter and input.
pub fn numerical_gradients<S: Scalar>(params: &MlpParams<S>, x: &[S], h: S) -> Result<(Gradients<S>, Vec<S>), ApproxError> {
    let two_h = (h + h).to_f64_lossy();
    let mut grads = Gradients::zeros_like(params);
    let mut probe = params.clone();
    for l in 0..params.layers().len() {
        for bias in [false, true] {
            let len = if bias { params.layers()[l].biases.len() } else { params.layers()[l].weights.len() };
            for j in 0..len {
                let original = if bias { params.layers()[l].biases[j] } else { params.layers()[l].weights[j] };
                set_param(&mut probe, l, bias, j, original + h);
                let plus = probe_loss(&probe, x)?;
                set_param(&mut probe, l, bias, j, original - h);
                let minus = probe_loss(&probe, x)?;
                set_param(&mut probe, l, bias, j, original);
                let g = &mut grads.layers[l];
                let target = if bias { &mut g.biases[j] } else { &mut g.weights[j] };
                *target = S::lit((plus - minus) / two_h);
            }
        }
    }
    let mut shifted = x.to_vec();
    let mut dx = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        shifted[i] = x[i] + h;
        let plus = probe_loss(params, &shifted)?;
        shifted[i] = x[i] - h;
        let minus = probe_loss(params, &shifted)?;
        shifted[i] = x[i];
        dx.push(S::lit((plus - minus) / two_h));
    }
    Ok((grads, dx))
}

fn set_param<S: Scalar>(net: &mut MlpParams<S>, layer: usize, bias: bool, index: usize, value: S) {
    let layer = &mut net.layers_mut()[layer];
    if bias {
        layer.biases[index] = value;
    } else {
        layer.weights[index] = value;
    }
}

fn relative(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
}

/// Largest relative disagreement between two gradient sets (parameters and inputs).
pub fn max_relative_error<S: Scalar>(analytic: (&Gradients<S>, &[S]), numeric: (&Gradients<S>, &[S])) -> f64 {
    let params = analytic.0.values().zip(numeric.0.values());
    let inputs = analytic.1.iter().zip(numeric.1);
    params
        .chain(inputs)
        .map(|(&a, &n)| relative(a.to_f64_lossy(), n.to_f64_lossy()))
        .fold(0.0, f64::max)
}

/// Compares backward against central differences with step `h`.
pub fn grad_check<S: Scalar>(params: &MlpParams<S>, x: &[S], h: S) -> Result<f64, ApproxError> {
    let (_, cache) = params.forward(x)?;
    let ones = vec![S::one(); params.output_dim()];
    let (grads, dx) = params.backward(&cache, &ones)?;
    let (num_grads, num_dx) = numerical_gradients(params, x, h)?;
    Ok(max_relative_error((&grads, &dx), (&num_grads, &num_dx)))
}
