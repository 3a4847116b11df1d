use alloc::vec;
use alloc::vec::Vec;

use super::TrainError;
use crate::math;

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    /// Default decay rates (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`).
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    /// One update. Rejects non-finite gradients before touching any state,
    /// so a failed step leaves parameters and moments unchanged.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        if grads.len() != params.len() || params.len() != self.first_moment.len() {
            return Err(TrainError::GradientLengthMismatch {
                expected: self.first_moment.len(),
                got: grads.len().min(params.len()),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient { index, step: self.step + 1 });
        }
        self.step += 1;
        let bias1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bias2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grads[i];
            let m = &mut self.first_moment[i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            let v = &mut self.second_moment[i];
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            params[i] -= self.learning_rate * m_hat / (math::sqrt(v_hat) + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut opt = OptimizerState::new(0.001, 3);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        for _ in 0..5 {
            opt.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(opt.step, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With g = 1 the bias-corrected first step is lr / (1 + eps') with
        // eps' tiny, so the update is -lr to within ~1e-5 relative.
        let mut opt = OptimizerState::new(0.001, 1);
        let mut params = vec![0.0];
        opt.step(&mut params, &[1.0]).unwrap();
        assert!((params[0] + 0.001).abs() < 1e-7, "params[0]={}", params[0]);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let grads: Vec<Vec<f64>> =
            (0..10).map(|i| vec![0.1 * i as f64, -0.05 * i as f64]).collect();
        let run = || {
            let mut opt = OptimizerState::new(0.01, 2);
            let mut params = vec![0.3, -0.7];
            for g in &grads {
                opt.step(&mut params, g).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = OptimizerState::new(0.001, 2);
        let mut params = vec![1.0, 2.0];
        let err = opt.step(&mut params, &[0.1, f64::NAN]).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient { index: 1, step: 1 }));
        // Failed step: nothing moved.
        assert_eq!(params, vec![1.0, 2.0]);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut opt = OptimizerState::new(0.05, 2);
        let mut params = vec![3.0, -2.0];
        for _ in 0..500 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            opt.step(&mut params, &grads).unwrap();
        }
        assert!(params.iter().all(|p| p.abs() < 1e-2), "{params:?}");
    }
}
