use super::real::Real;
use crate::error::{Error, Result};

/// Hyperparameters of the adaptive moment optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::invalid(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// First/second moment accumulators, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam step applied in place.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grad: &[T],
    config: &AdamConfig,
    state: &mut AdamState<T>,
) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(params.len(), grad.len()));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("parameter gradient"));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(config.beta1);
    let b2 = T::of(config.beta2);
    let one = T::one();
    let step_size = T::of(config.learning_rate / (1.0 - config.beta1.powi(t)));
    let v_corr = T::of(1.0 / (1.0 - config.beta2.powi(t)));
    let eps = T::of(config.epsilon);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        *p -= step_size * *m / ((*v * v_corr).sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = vec![0.5f64, -1.0];
        let mut state = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &AdamConfig::default(), &mut state).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = vec![0.0f32; 2];
        let mut state = AdamState::new(2);
        let cfg = AdamConfig::default();
        assert!(adam_step(&mut p, &[0.0, f32::NAN], &cfg, &mut state).is_err());
        assert!(adam_step(&mut p, &[0.0], &cfg, &mut state).is_err());
    }

    /// Independent scalar transcription of the bias-corrected moment update.
    fn scalar_reference(theta0: f64, target: f64, steps: usize, cfg: &AdamConfig) -> Vec<f64> {
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        let mut trace = Vec::new();
        for t in 1..=steps {
            let g = 2.0 * (theta - target);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t as i32));
            let v_hat = v / (1.0 - cfg.beta2.powi(t as i32));
            theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            trace.push(theta);
        }
        trace
    }

    #[test]
    fn quadratic_converges_like_scalar_reference() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let target = 1.5;
        let reference = scalar_reference(-2.0, target, 400, &cfg);
        let mut p = vec![-2.0f64];
        let mut state = AdamState::new(1);
        for expected in &reference {
            let g = 2.0 * (p[0] - target);
            adam_step(&mut p, &[g], &cfg, &mut state).unwrap();
            assert!((p[0] - expected).abs() < 1e-12);
        }
        assert!((p[0] - target).abs() < 0.05);
        assert!((p[0] - target).abs() < 0.01 * (-2.0f64 - target).abs());
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.1f32, 0.2, 0.3];
            let mut s = AdamState::new(3);
            for _ in 0..5 {
                adam_step(&mut p, &[0.3, -0.2, 0.01], &AdamConfig::default(), &mut s).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }
}
