//! Central-difference gradient checking.

use super::{Graph, Tensor, TensorError, TensorResult};

/// Scalar-valued graph builder checked by [`grad_check`].
pub trait ScalarFn: Fn(&mut Graph, Tensor) -> TensorResult<Tensor> {}
impl<F: Fn(&mut Graph, Tensor) -> TensorResult<Tensor>> ScalarFn for F {}

fn eval<F: ScalarFn>(f: &F, shape: &[usize], x: &[f64], requires_grad: bool) -> TensorResult<(Graph, Tensor, Tensor)> {
    let mut g = Graph::new();
    let leaf = g.leaf(shape, x.to_vec(), requires_grad)?;
    let out = f(&mut g, leaf)?;
    if g.values(out).len() != 1 {
        return Err(TensorError::NonScalarRoot {
            shape: g.shape(out).to_vec(),
        });
    }
    Ok((g, leaf, out))
}

/// Central-difference gradient of `f` at `x`, perturbing each coordinate by
/// +/- eps.
pub fn central_difference_gradient<F: ScalarFn>(
    f: &F,
    shape: &[usize],
    x: &[f64],
    eps: f64,
) -> TensorResult<Vec<f64>> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(TensorError::InvalidScalar {
            op: "grad_check eps",
            value: eps,
        });
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let (g_hi, _, out_hi) = eval(f, shape, &probe, false)?;
        let hi = g_hi.scalar_value(out_hi);
        probe[i] = x[i] - eps;
        let (g_lo, _, out_lo) = eval(f, shape, &probe, false)?;
        let lo = g_lo.scalar_value(out_lo);
        probe[i] = x[i];
        let d = (hi - lo) / (2.0 * eps);
        if !d.is_finite() {
            return Err(TensorError::NonFinite {
                op: "central_difference_gradient",
                index: i,
            });
        }
        grad.push(d);
    }
    Ok(grad)
}

/// max_i |ad_i - fd_i| / max(1, |ad_i|, |fd_i|).
pub fn max_relative_error(g_ad: &[f64], g_fd: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (a, d) in g_ad.iter().zip(g_fd) {
        let denom = 1.0f64.max(a.abs()).max(d.abs());
        worst = worst.max((a - d).abs() / denom);
    }
    worst
}

/// Compare the reverse-mode gradient of `f` at `x` against central
/// differences; returns the max relative error over coordinates.
pub fn grad_check<F: ScalarFn>(f: &F, shape: &[usize], x: &[f64], eps: f64) -> TensorResult<f64> {
    let (mut g, leaf, out) = eval(f, shape, x, true)?;
    g.backward(out)?;
    let g_ad = g.grad(leaf).to_vec();
    if let Some(i) = g_ad.iter().position(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite {
            op: "grad_check reverse gradient",
            index: i,
        });
    }
    let g_fd = central_difference_gradient(f, shape, x, eps)?;
    Ok(max_relative_error(&g_ad, &g_fd))
}
