use rayon::prelude::*;

use super::network::{KernelRecord, RolloutTape};
use crate::error::{shape_err, PiError, Result};
use crate::linalg::Mat;
use crate::models::{FreezeSet, PiModels, CONTROL_WEIGHT_ID, DYNAMICS_ID, RUNNING_COST_ID, TERMINAL_COST_ID};
use crate::params::ParamVector;
use crate::scalar::Real;
use crate::types::ControlSequence;

/// Per-trajectory contribution to one kernel iteration's reverse pass.
struct TrajGrad<T> {
    u_bar: Vec<T>,
    dyn_bar: Vec<T>,
    run_bar: Vec<T>,
    term_bar: Vec<T>,
    r_bar: Vec<T>,
}

struct Ctx<'a, T: Real> {
    models: &'a PiModels<T>,
    r: Mat<T>,
    noise_coeff: T,
    train_dyn: bool,
    train_run: bool,
    train_term: bool,
    train_r: bool,
}

/// Reverse pass of a recorded forward: gradient of a scalar loss with
/// respect to every model parameter, given `d loss / d output`.
///
/// Noise samples are treated as constants; softmax weights are
/// differentiated through both numerator and normaliser. Segments in
/// `frozen` come back exactly zero.
pub fn pi_net_backward<T: Real>(
    tape: &RolloutTape<T>,
    models: &PiModels<T>,
    output_cotangent: &ControlSequence<T>,
    frozen: &FreezeSet,
) -> Result<ParamVector<T>> {
    let params = models.pack();
    if params != tape.params || models.spec() != tape.spec {
        return Err(PiError::Consistency("models differ from the ones the tape was recorded with".into()));
    }
    if tape.records.len() != tape.hp.iterations {
        return Err(PiError::Consistency(format!(
            "tape holds {} iterations, hyperparameters say {}",
            tape.records.len(),
            tape.hp.iterations
        )));
    }
    if output_cotangent.horizon() != tape.output.horizon() || output_cotangent.dim() != tape.output.dim() {
        return shape_err("output cotangent does not match the control sequence shape");
    }

    let mut grad = params.zeros_like();
    let trains = |id: &str| grad.find(id).is_some_and(|s| s.len > 0) && !frozen.contains(id);
    let ctx = Ctx {
        models,
        r: models.control_weight.matrix(),
        noise_coeff: tape.hp.noise_cost_coeff(),
        train_dyn: trains(DYNAMICS_ID),
        train_run: trains(RUNNING_COST_ID),
        train_term: !models.terminal_is_shared() && trains(TERMINAL_COST_ID),
        train_r: trains(CONTROL_WEIGHT_ID),
    };
    let m = models.control_dim();
    let mut r_bar_total = vec![T::zero(); m * m];
    let mut out_bar = output_cotangent.as_slice().to_vec();

    for rec in tape.records.iter().rev() {
        out_bar = kernel_backward(&ctx, tape, rec, &out_bar, &mut grad, &mut r_bar_total)?;
    }

    if ctx.train_r {
        let r_bar = Mat::from_vec(m, m, r_bar_total)?;
        let seg = grad.segment_mut(CONTROL_WEIGHT_ID).expect("segment exists");
        models.control_weight.vjp(&r_bar, seg);
    }
    Ok(grad)
}

/// Returns the cotangent on this iteration's input sequence and
/// accumulates parameter gradients.
fn kernel_backward<T: Real>(
    ctx: &Ctx<'_, T>,
    tape: &RolloutTape<T>,
    rec: &KernelRecord<T>,
    out_bar: &[T],
    grad: &mut ParamVector<T>,
    r_bar_total: &mut [T],
) -> Result<Vec<T>> {
    let kc = rec.noise.trajectories();
    let n_steps = rec.noise.horizon();
    let m = rec.noise.dim();
    let inv_lambda = tape.hp.lambda.recip();

    // d loss / d S[k][i] through u*_i = u_i + sum_k p_k du_k
    let mut s_bar = vec![T::zero(); kc * n_steps];
    for i in 0..n_steps {
        let ob = &out_bar[i * m..(i + 1) * m];
        let g: Vec<T> = (0..kc).map(|k| ob.iter().zip(rec.noise.sample(k, i)).map(|(&a, &b)| a * b).sum()).collect();
        let mean: T = (0..kc).map(|k| rec.weights[k * n_steps + i] * g[k]).sum();
        for k in 0..kc {
            s_bar[k * n_steps + i] = -inv_lambda * rec.weights[k * n_steps + i] * (g[k] - mean);
        }
    }

    let per_traj: Vec<TrajGrad<T>> = (0..kc)
        .into_par_iter()
        .map(|k| trajectory_backward(ctx, tape, rec, k, &s_bar[k * n_steps..(k + 1) * n_steps]))
        .collect();

    let mut in_bar = out_bar.to_vec();
    for tg in per_traj {
        for (a, b) in in_bar.iter_mut().zip(&tg.u_bar) {
            *a += *b;
        }
        accumulate(grad, DYNAMICS_ID, &tg.dyn_bar);
        accumulate(grad, RUNNING_COST_ID, &tg.run_bar);
        accumulate(grad, TERMINAL_COST_ID, &tg.term_bar);
        for (a, b) in r_bar_total.iter_mut().zip(&tg.r_bar) {
            *a += *b;
        }
    }
    if in_bar.iter().any(|v| !v.is_finite()) {
        return Err(PiError::Numeric("non-finite cotangent in reverse pass".into()));
    }
    Ok(in_bar)
}

fn accumulate<T: Real>(grad: &mut ParamVector<T>, id: &str, part: &[T]) {
    if part.is_empty() {
        return;
    }
    if let Some(seg) = grad.segment_mut(id) {
        for (a, b) in seg.iter_mut().zip(part) {
            *a += *b;
        }
    }
}

fn trajectory_backward<T: Real>(
    ctx: &Ctx<'_, T>,
    tape: &RolloutTape<T>,
    rec: &KernelRecord<T>,
    k: usize,
    s_bar: &[T],
) -> TrajGrad<T> {
    let models = ctx.models;
    let n = tape.state_dim();
    let m = rec.noise.dim();
    let n_steps = rec.noise.horizon();
    let sized = |on: bool, len: usize| if on { vec![T::zero(); len] } else { Vec::new() };
    let mut tg = TrajGrad {
        u_bar: vec![T::zero(); n_steps * m],
        dyn_bar: sized(ctx.train_dyn, models.dynamics.param_count()),
        run_bar: sized(ctx.train_run, models.running_cost.param_count()),
        term_bar: sized(ctx.train_term, models.terminal().param_count()),
        r_bar: sized(ctx.train_r, m * m),
    };
    let state = |i: usize| {
        let start = (k * (n_steps + 1) + i) * n;
        &rec.states[start..start + n]
    };

    // S[k][i] sums costs j >= i, so cost j collects the prefix sum of s_bar.
    let terminal_bar: T = s_bar.iter().copied().sum();
    let mut x_bar = vec![T::zero(); n];
    {
        let p = if models.terminal_is_shared() {
            ctx.train_run.then_some(tg.run_bar.as_mut_slice())
        } else {
            ctx.train_term.then_some(tg.term_bar.as_mut_slice())
        };
        models.terminal().vjp(state(n_steps), terminal_bar, &mut x_bar, p);
    }

    let mut prefix = vec![T::zero(); n_steps];
    let mut acc = T::zero();
    for i in 0..n_steps {
        acc += s_bar[i];
        prefix[i] = acc;
    }

    let mut v = vec![T::zero(); m];
    let mut ru = vec![T::zero(); m];
    for i in (0..n_steps).rev() {
        let x = state(i);
        let u = rec.input.step(i);
        let du = rec.noise.sample(k, i);
        for j in 0..m {
            v[j] = u[j] + du[j];
        }
        let c_bar = prefix[i];
        let ub = &mut tg.u_bar[i * m..(i + 1) * m];

        // through x_{i+1} = f(x_i, v_i)
        let mut x_prev_bar = vec![T::zero(); n];
        models.dynamics.vjp(x, &v, &x_bar, &mut x_prev_bar, ub, ctx.train_dyn.then_some(tg.dyn_bar.as_mut_slice()));

        // through the modified running cost; R is symmetric, so d/du = R (u + du)
        if c_bar != T::zero() {
            models.running_cost.vjp(x, c_bar, &mut x_prev_bar, ctx.train_run.then_some(tg.run_bar.as_mut_slice()));
            ctx.r.mul_vec(&v, &mut ru);
            for j in 0..m {
                ub[j] += c_bar * ru[j];
            }
            if ctx.train_r {
                let half = T::half();
                for a in 0..m {
                    for b in 0..m {
                        tg.r_bar[a * m + b] +=
                            c_bar * (half * u[a] * u[b] + half * ctx.noise_coeff * du[a] * du[b] + u[a] * du[b]);
                    }
                }
            }
        }
        x_bar = x_prev_bar;
    }
    tg
}
