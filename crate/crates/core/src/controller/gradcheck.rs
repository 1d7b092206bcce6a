//! Central finite-difference verification of the reverse pass.

use serde::{Deserialize, Serialize};

use super::backward::pi_net_backward;
use super::network::pi_net_forward;
use crate::error::Result;
use crate::models::{ControlCostWeight, FreezeSet, MlpCost, MlpDynamics, PiModels, TerminalCost};
use crate::params::ParamVector;
use crate::rng::{normal, standard_normal, uniform, SeededRng};
use crate::scalar::Real;
use crate::types::{ControlSequence, PiHyperParams};

/// Central differences of `loss(pi_net_forward(..))` for every parameter
/// outside `frozen` (frozen coordinates are left at zero). The same `rng`
/// is reused for every evaluation, so the noise is held fixed.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_gradient<T: Real>(
    x0: &[T],
    init: &ControlSequence<T>,
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    rng: &SeededRng,
    loss: &dyn Fn(&ControlSequence<T>) -> T,
    step: T,
    frozen: &FreezeSet,
) -> Result<ParamVector<T>> {
    let base = models.pack();
    let mut grad = base.zeros_like();
    let mut probe = models.clone();
    for seg in base.layout() {
        if frozen.contains(&seg.id) {
            continue;
        }
        for idx in seg.offset..seg.offset + seg.len {
            let mut eval = |delta: T| -> Result<T> {
                let mut pv = base.clone();
                pv.values_mut()[idx] += delta;
                probe.unpack(&pv)?;
                let (out, _) = pi_net_forward(x0, init, &probe, hp, rng, false)?;
                Ok(loss(&out))
            };
            let plus = eval(step)?;
            let minus = eval(-step)?;
            grad.values_mut()[idx] = (plus - minus) / (step + step);
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub id: String,
    pub len: usize,
    pub frozen: bool,
    /// Largest relative error over coordinates whose absolute difference
    /// exceeds the floor (the ones the relative tolerance judges).
    pub max_rel_err: f64,
    pub max_abs_diff: f64,
    pub worst_index: Option<usize>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Frozen segments must have an exactly zero analytic gradient.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub segments: Vec<SegmentCheck>,
    pub passed: bool,
}

/// Compares the reverse pass against central differences on one instance,
/// using the loss `sum_j w_j u*_j + ½ sum_j (u*_j)^2` with `w` drawn from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn gradcheck<T: Real>(
    x0: &[T],
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    rng: &SeededRng,
    frozen: &FreezeSet,
    step: T,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<GradcheckReport> {
    let init = ControlSequence::zeros(hp.horizon, models.control_dim());
    let mut wg = rng.substream(u64::MAX).generator();
    let w: Vec<T> = (0..hp.horizon * models.control_dim()).map(|_| standard_normal(&mut wg)).collect();
    let loss =
        |u: &ControlSequence<T>| -> T { u.as_slice().iter().zip(&w).map(|(&a, &b)| b * a + T::half() * a * a).sum() };
    let (out, tape) = pi_net_forward(x0, &init, models, hp, rng, true)?;
    let tape = tape.expect("recorded");
    let cot_vals: Vec<T> = out.as_slice().iter().zip(&w).map(|(&a, &b)| a + b).collect();
    let cot = ControlSequence::from_vec(out.horizon(), out.dim(), cot_vals)?;
    let analytic = pi_net_backward(&tape, models, &cot, frozen)?;
    let numeric = finite_difference_gradient(x0, &init, models, hp, rng, &loss, step, frozen)?;
    Ok(compare(&analytic, &numeric, frozen, rel_tol, abs_floor))
}

/// Per-segment comparison of two gradients with the same layout.
pub fn compare<T: Real>(
    analytic: &ParamVector<T>,
    numeric: &ParamVector<T>,
    frozen: &FreezeSet,
    rel_tol: f64,
    abs_floor: f64,
) -> GradcheckReport {
    let mut segments = Vec::new();
    for seg in analytic.layout() {
        let is_frozen = frozen.contains(&seg.id);
        let mut check = SegmentCheck {
            id: seg.id.clone(),
            len: seg.len,
            frozen: is_frozen,
            max_rel_err: 0.0,
            max_abs_diff: 0.0,
            worst_index: None,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            passed: true,
        };
        for idx in seg.offset..seg.offset + seg.len {
            let a = analytic.values()[idx].to_f64_lossy();
            let n = numeric.values()[idx].to_f64_lossy();
            if is_frozen {
                if a != 0.0 {
                    check.passed = false;
                    check.worst_index = Some(idx - seg.offset);
                    check.worst_analytic = a;
                }
                continue;
            }
            let diff = (a - n).abs();
            check.max_abs_diff = check.max_abs_diff.max(diff);
            let scale = a.abs().max(n.abs());
            let rel = if scale > 0.0 { diff / scale } else { 0.0 };
            if !(diff <= abs_floor || rel <= rel_tol) {
                check.passed = false;
            }
            // coordinates within the absolute floor pass whatever their ratio
            let score = if diff > abs_floor { rel } else { 0.0 };
            if check.worst_index.is_none() || score > check.max_rel_err {
                check.max_rel_err = check.max_rel_err.max(score);
                check.worst_index = Some(idx - seg.offset);
                check.worst_analytic = a;
                check.worst_numeric = n;
            }
        }
        segments.push(check);
    }
    let passed = segments.iter().all(|s| s.passed);
    GradcheckReport { rel_tol, abs_floor, segments, passed }
}

/// A small random problem for gradient checks: pendulum-shaped networks
/// (`n = 2`, `m = 1`) with a separate terminal network, `K = 4`, `N = 3`,
/// `U = 2`, and a temperature high enough that the softmax is not
/// saturated.
pub fn tiny_instance<T: Real>(rng: &SeededRng) -> Result<(Vec<T>, PiModels<T>, PiHyperParams<T>)> {
    let mut g = rng.substream(0).generator();
    let x0 = vec![uniform(&mut g, -T::PI(), T::PI()), uniform(&mut g, -T::one(), T::one())];
    let l = crate::linalg::Mat::from_fn(1, 1, |_, _| normal(&mut g, T::one(), T::lit(0.2)).abs() + T::lit(0.1));
    let models = PiModels::new(
        Box::new(MlpDynamics::initialized(12, T::lit(0.1), &rng.substream(1))),
        Box::new(MlpCost::initialized(12, 12, &rng.substream(2))),
        TerminalCost::Separate(Box::new(MlpCost::initialized(12, 12, &rng.substream(3)))),
        ControlCostWeight::from_factor(&l)?,
    )?;
    let hp = PiHyperParams {
        lambda: T::one(),
        nu: T::lit(2.0),
        sigma: T::lit(0.5),
        trajectories: 4,
        horizon: 3,
        iterations: 2,
    };
    Ok((x0, models, hp))
}
