use super::{ApproxError, Gradients, MlpParams};
use crate::scalar::Scalar;

/// First/second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub first_moment: Gradients<S>,
    pub second_moment: Gradients<S>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &MlpParams<S>) -> Self {
        Self {
            first_moment: Gradients::zeros_like(params),
            second_moment: Gradients::zeros_like(params),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients leave both the
/// parameters and the optimizer state untouched.
pub fn adam_step<S: Scalar>(
    params: &mut MlpParams<S>,
    grads: &Gradients<S>,
    state: &mut AdamState<S>,
    lr: S,
) -> Result<(), ApproxError> {
    if !grads.matches(params) || !state.first_moment.matches(params) || !state.second_moment.matches(params) {
        return Err(ApproxError::GradientShape);
    }
    if !grads.is_finite() {
        return Err(ApproxError::NonFinite("gradient"));
    }
    state.step_count += 1;
    let (b1, b2) = (S::lit(state.beta1), S::lit(state.beta2));
    let t = state.step_count as i32;
    let correct1 = S::one() - b1.powi(t);
    let correct2 = S::one() - b2.powi(t);
    let eps = S::lit(state.epsilon);

    let moments = state.first_moment.values_mut().zip(state.second_moment.values_mut());
    for ((p, &g), (m, v)) in params.params_mut().zip(grads.values()).zip(moments) {
        *m = b1 * *m + (S::one() - b1) * g;
        *v = b2 * *v + (S::one() - b2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::OutputActivation;
    use crate::rng::seeded;

    fn scalar_net(w: f64) -> MlpParams<f64> {
        let mut net = MlpParams::zeros(&[(1, 1)], OutputActivation::Identity).unwrap();
        net.layers_mut()[0].weights[0] = w;
        net
    }

    #[test]
    fn zero_gradient_is_identity_but_counts() {
        let mut net: MlpParams<f64> = MlpParams::init(&[(3, 4), (4, 2)], OutputActivation::Identity, &mut seeded(0)).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &Gradients::zeros_like(&before), &mut state, 1e-3).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut net: MlpParams<f64> = MlpParams::init(&[(3, 4), (4, 2)], OutputActivation::Identity, &mut seeded(1)).unwrap();
        let before = net.clone();
        let mut grads = Gradients::zeros_like(&net);
        grads.values_mut().enumerate().for_each(|(i, g)| *g = (i as f64).sin());
        let mut state = AdamState::new(&net);
        for _ in 0..5 {
            adam_step(&mut net, &grads, &mut state, 0.0).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_matches_hand_trace() {
        // m = 0.1 g, v = 0.001 g², m̂ = g, v̂ = g², step = lr·g/(|g| + ε)
        for g in [0.37_f64, -2.5, 1e-3] {
            let mut net = scalar_net(1.0);
            let mut grads = Gradients::zeros_like(&net);
            grads.layers[0].weights[0] = g;
            let mut state = AdamState::new(&net);
            adam_step(&mut net, &grads, &mut state, 0.01).unwrap();
            let m = 0.1 * g;
            let v = 0.001 * g * g;
            let expected = 1.0 - 0.01 * (m / 0.1) / ((v / (1.0 - 0.999_f64)).sqrt() + 1e-8);
            assert!((net.layers()[0].weights[0] - expected).abs() < 1e-15, "g={g}");
            assert!((net.layers()[0].weights[0] - (1.0 - 0.01 * g.signum())).abs() < 1e-6);
        }
    }

    #[test]
    fn descends_a_quadratic_bowl() {
        let mut net: MlpParams<f64> = MlpParams::init(&[(4, 3)], OutputActivation::Identity, &mut seeded(2)).unwrap();
        net.params_mut().enumerate().for_each(|(i, w)| *w = 1.0 + 0.1 * i as f64);
        let start: f64 = net.params().map(|w| w * w).sum::<f64>().sqrt();
        let mut state = AdamState::new(&net);
        for _ in 0..200 {
            let mut grads = Gradients::zeros_like(&net);
            grads.values_mut().zip(net.params()).for_each(|(g, &w)| *g = 2.0 * w);
            adam_step(&mut net, &grads, &mut state, 0.05).unwrap();
        }
        let end: f64 = net.params().map(|w| w * w).sum::<f64>().sqrt();
        assert!(end * 10.0 <= start, "{start} -> {end}");
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut net = scalar_net(0.5);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].biases[0] = f64::NAN;
        let mut state = AdamState::new(&net);
        let before = (net.clone(), state.clone());
        assert_eq!(adam_step(&mut net, &grads, &mut state, 0.1), Err(ApproxError::NonFinite("gradient")));
        assert_eq!((net, state), before);
    }
}
