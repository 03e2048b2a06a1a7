//! Bias-corrected Adam. Weight decay is not applied here; it lives in the
//! loss as an explicit Frobenius-norm term.

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First/second moment accumulators for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update at global step `t` (1-based). Returns the flat index of
/// the first non-finite gradient, if any, without touching the parameters.
pub fn adam_step(
    values: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    lr: f64,
    t: usize,
) -> Result<(), usize> {
    debug_assert_eq!(values.len(), grads.len());
    debug_assert!(t >= 1);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(i);
    }
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for i in 0..values.len() {
        moments.m[i] = BETA1 * moments.m[i] + (1.0 - BETA1) * grads[i];
        moments.v[i] = BETA2 * moments.v[i] + (1.0 - BETA2) * grads[i] * grads[i];
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut values = vec![0.3, -0.7];
        let mut moments = Moments::zeros(2);
        adam_step(&mut values, &[0.0, 0.0], &mut moments, 1e-3, 1).unwrap();
        assert_eq!(values, vec![0.3, -0.7]);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        // m_hat = g, v_hat = g^2 at t = 1, so the step is lr / (1 + eps)
        let mut values = vec![1.0];
        let mut moments = Moments::zeros(1);
        adam_step(&mut values, &[1.0], &mut moments, 1e-3, 1).unwrap();
        assert!((values[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!(values[0] > 1.0 - 1e-3, "epsilon shrinks the step slightly");
    }

    #[test]
    fn non_finite_gradient_is_reported_with_index() {
        let mut values = vec![0.0, 0.0];
        let mut moments = Moments::zeros(2);
        let err = adam_step(&mut values, &[0.0, f64::NAN], &mut moments, 1e-3, 1);
        assert_eq!(err, Err(1));
        assert_eq!(values, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_runs_produce_identical_trajectories() {
        let run = || {
            let mut values = vec![0.5, -1.5, 2.0];
            let mut moments = Moments::zeros(3);
            for t in 1..=50 {
                let grads: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
                adam_step(&mut values, &grads, &mut moments, 1e-2, t).unwrap();
            }
            values
        };
        assert_eq!(run(), run());
    }
}
