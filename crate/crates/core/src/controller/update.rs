use super::rollout::CostToGo;
use crate::error::{param_err, shape_err, Result};
use crate::scalar::Real;
use crate::types::{ControlSequence, NoiseTensor};

/// Softmax-weighted control update.
pub fn update_controls<T: Real>(
    useq: &ControlSequence<T>,
    noise: &NoiseTensor<T>,
    ctg: &CostToGo<T>,
    lambda: T,
) -> Result<ControlSequence<T>> {
    update_controls_weighted(useq, noise, ctg, lambda).map(|(u, _)| u)
}

/// As [`update_controls`], also returning the normalised weights
/// `p[k * N + i]` (summing to one over `k` for each `i`).
pub fn update_controls_weighted<T: Real>(
    useq: &ControlSequence<T>,
    noise: &NoiseTensor<T>,
    ctg: &CostToGo<T>,
    lambda: T,
) -> Result<(ControlSequence<T>, Vec<T>)> {
    if !(lambda > T::zero()) {
        return param_err(format!("lambda must be positive, got {lambda}"));
    }
    let (kc, n, m) = (noise.trajectories(), noise.horizon(), noise.dim());
    if ctg.trajectories != kc || ctg.horizon != n || useq.horizon() != n || useq.dim() != m {
        return shape_err("controls, noise and cost-to-go disagree on (K, N, m)");
    }
    let mut out = useq.clone();
    let mut weights = vec![T::zero(); kc * n];
    let inv_lambda = lambda.recip();
    for i in 0..n {
        // shift by the minimum so the best trajectory has weight exactly one
        let min = (0..kc).map(|k| ctg.get(k, i)).fold(T::infinity(), T::min);
        let mut total = T::zero();
        for k in 0..kc {
            let w = (-(ctg.get(k, i) - min) * inv_lambda).exp();
            weights[k * n + i] = w;
            total += w;
        }
        let step = out.step_mut(i);
        for k in 0..kc {
            let p = weights[k * n + i] / total;
            weights[k * n + i] = p;
            for (s, &d) in step.iter_mut().zip(noise.sample(k, i)) {
                *s += p * d;
            }
        }
    }
    Ok((out, weights))
}
