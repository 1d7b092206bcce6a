use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PiError, Result};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::types::ControlSequence;

/// A discrete-time problem with analytic first derivatives of the dynamics
/// and second derivatives of the state costs. Objective:
/// `phi(x_N) + sum_i (q(x_i) + ½uᵢᵀRuᵢ)`.
pub trait IlqrProblem<T: Real>: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn step(&self, x: &[T], u: &[T]) -> Vec<T>;
    /// `(df/dx, df/du)`
    fn linearize(&self, x: &[T], u: &[T]) -> (Mat<T>, Mat<T>);
    fn running_cost(&self, x: &[T]) -> T;
    fn running_grad(&self, x: &[T]) -> Vec<T>;
    fn running_hessian(&self, x: &[T]) -> Mat<T>;
    fn terminal_cost(&self, x: &[T]) -> T;
    fn terminal_grad(&self, x: &[T]) -> Vec<T>;
    fn terminal_hessian(&self, x: &[T]) -> Mat<T>;
    fn control_weight(&self) -> &Mat<T>;
    /// `a - b` in the state's tangent space (angles wrap).
    fn state_difference(&self, a: &[T], b: &[T]) -> Vec<T> {
        a.iter().zip(b).map(|(&x, &y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlqrSettings {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tolerance: f64,
    /// Levenberg-Marquardt term added to the value Hessian.
    pub mu_init: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    /// Step sizes tried are `backtrack^j` for `j < line_search_steps`.
    pub line_search_steps: usize,
    pub backtrack: f64,
}

impl Default for IlqrSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-6,
            mu_init: 0.0,
            mu_min: 1e-6,
            mu_max: 1e10,
            mu_factor: 10.0,
            line_search_steps: 12,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlqrResult<T> {
    pub controls: ControlSequence<T>,
    pub states: Vec<Vec<T>>,
    pub cost: T,
    /// Cost of the initial plan followed by each accepted iterate.
    pub cost_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// No decrease was found even at maximum regularisation.
    pub degraded: bool,
}

fn rollout<T: Real>(p: &dyn IlqrProblem<T>, x0: &[T], u: &ControlSequence<T>) -> Result<Vec<Vec<T>>> {
    let mut xs = Vec::with_capacity(u.horizon() + 1);
    xs.push(x0.to_vec());
    for i in 0..u.horizon() {
        let next = p.step(&xs[i], u.step(i));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(PiError::Numeric(format!("iLQR rollout diverged at step {}", i + 1)));
        }
        xs.push(next);
    }
    Ok(xs)
}

pub fn total_cost<T: Real>(p: &dyn IlqrProblem<T>, xs: &[Vec<T>], u: &ControlSequence<T>) -> T {
    let half = T::half();
    let r = p.control_weight();
    let running: T = (0..u.horizon()).map(|i| p.running_cost(&xs[i]) + half * r.bilinear(u.step(i), u.step(i))).sum();
    running + p.terminal_cost(&xs[u.horizon()])
}

struct Policy<T> {
    k_ff: Vec<Vec<T>>,
    k_fb: Vec<Mat<T>>,
    /// Predicted decrease terms: `d1 * alpha + d2 * alpha^2`.
    d1: T,
    d2: T,
}

fn backward_pass<T: Real>(
    p: &dyn IlqrProblem<T>,
    xs: &[Vec<T>],
    u: &ControlSequence<T>,
    lin: &[(Mat<T>, Mat<T>)],
    mu: T,
) -> Option<Policy<T>> {
    let n = p.state_dim();
    let m = p.control_dim();
    let horizon = u.horizon();
    let r = p.control_weight();
    let mut v_x = p.terminal_grad(&xs[horizon]);
    let mut v_xx = p.terminal_hessian(&xs[horizon]);
    let mut k_ff = vec![Vec::new(); horizon];
    let mut k_fb = vec![Mat::zeros(m, n); horizon];
    let (mut d1, mut d2) = (T::zero(), T::zero());
    let reg = Mat::identity(n).scale(mu);
    for i in (0..horizon).rev() {
        let (a, b) = &lin[i];
        let at = a.transpose();
        let bt = b.transpose();
        let mut q_x = p.running_grad(&xs[i]);
        at.mul_vec_acc(&v_x, &mut q_x);
        let mut q_u = r.vec(u.step(i));
        bt.mul_vec_acc(&v_x, &mut q_u);
        let q_xx = p.running_hessian(&xs[i]).add(&at.matmul(&v_xx).matmul(a));
        let v_reg = v_xx.add(&reg);
        let q_uu = r.add(&bt.matmul(&v_reg).matmul(b)).symmetrized();
        let q_ux = bt.matmul(&v_reg).matmul(a);
        q_uu.cholesky().ok()?;
        let rhs = Mat::from_fn(m, n + 1, |row, col| if col == 0 { q_u[row] } else { q_ux[(row, col - 1)] });
        let sol = q_uu.solve(&rhs).ok()?;
        let kf: Vec<T> = (0..m).map(|row| -sol[(row, 0)]).collect();
        let kb = Mat::from_fn(m, n, |row, col| -sol[(row, col + 1)]);
        // unregularised quantities for the value update
        let q_uu_raw = r.add(&bt.matmul(&v_xx).matmul(b));
        let q_ux_raw = bt.matmul(&v_xx).matmul(a);
        d1 += kf.iter().zip(&q_u).map(|(&x, &y)| x * y).sum::<T>();
        d2 += T::half() * q_uu_raw.bilinear(&kf, &kf);
        let kbt = kb.transpose();
        let quu_k = q_uu_raw.vec(&kf);
        let mut new_vx = q_x;
        kbt.mul_vec_acc(&quu_k, &mut new_vx);
        kbt.mul_vec_acc(&q_u, &mut new_vx);
        q_ux_raw.tr_mul_vec_acc(&kf, &mut new_vx);
        let new_vxx = q_xx
            .add(&kbt.matmul(&q_uu_raw).matmul(&kb))
            .add(&kbt.matmul(&q_ux_raw))
            .add(&q_ux_raw.transpose().matmul(&kb))
            .symmetrized();
        v_x = new_vx;
        v_xx = new_vxx;
        k_ff[i] = kf;
        k_fb[i] = kb;
    }
    Some(Policy { k_ff, k_fb, d1, d2 })
}

fn forward_pass<T: Real>(
    p: &dyn IlqrProblem<T>,
    xs: &[Vec<T>],
    u: &ControlSequence<T>,
    policy: &Policy<T>,
    alpha: T,
) -> Option<(Vec<Vec<T>>, ControlSequence<T>)> {
    let m = p.control_dim();
    let mut new_u = u.clone();
    let mut new_x = Vec::with_capacity(xs.len());
    new_x.push(xs[0].clone());
    for i in 0..u.horizon() {
        let dx = p.state_difference(&new_x[i], &xs[i]);
        let fb = policy.k_fb[i].vec(&dx);
        let step = new_u.step_mut(i);
        for j in 0..m {
            step[j] += alpha * policy.k_ff[i][j] + fb[j];
        }
        let next = p.step(&new_x[i], new_u.step(i));
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        new_x.push(next);
    }
    Some((new_x, new_u))
}

/// Iterative LQR from the plan `init`.
pub fn ilqr_solve<T: Real>(
    p: &dyn IlqrProblem<T>,
    x0: &[T],
    init: &ControlSequence<T>,
    settings: &IlqrSettings,
) -> Result<IlqrResult<T>> {
    if x0.len() != p.state_dim() || init.dim() != p.control_dim() {
        return shape_err("iLQR initial state or plan has the wrong dimension");
    }
    let mut u = init.clone();
    let mut xs = rollout(p, x0, &u)?;
    let mut cost = total_cost(p, &xs, &u);
    if !cost.is_finite() {
        return Err(PiError::Numeric("iLQR initial cost is not finite".into()));
    }
    let mut history = vec![cost];
    let mut mu = settings.mu_init;
    let tol = T::lit(settings.rel_tolerance);
    let mut converged = false;
    let mut degraded = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let lin: Vec<(Mat<T>, Mat<T>)> = (0..u.horizon()).map(|i| p.linearize(&xs[i], u.step(i))).collect();
        let policy = loop {
            if let Some(pol) = backward_pass(p, &xs, &u, &lin, T::lit(mu)) {
                break Some(pol);
            }
            mu = (mu * settings.mu_factor).max(settings.mu_min);
            if mu > settings.mu_max {
                break None;
            }
        };
        let Some(policy) = policy else {
            degraded = true;
            break;
        };
        // predicted decrease is -(d1 + d2) at alpha = 1
        let predicted = -(policy.d1 + policy.d2);
        if predicted.abs() <= tol * cost.abs().max(T::lit(1e-12)) {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut alpha = T::one();
        for _ in 0..settings.line_search_steps {
            if let Some((nx, nu)) = forward_pass(p, &xs, &u, &policy, alpha) {
                let c = total_cost(p, &nx, &nu);
                if c < cost {
                    accepted = Some((nx, nu, c));
                    break;
                }
            }
            alpha *= T::lit(settings.backtrack);
        }
        match accepted {
            Some((nx, nu, c)) => {
                let rel = (cost - c) / cost.abs().max(T::lit(1e-12));
                xs = nx;
                u = nu;
                cost = c;
                history.push(c);
                mu /= settings.mu_factor;
                if mu < settings.mu_min {
                    mu = 0.0;
                }
                if rel < tol {
                    converged = true;
                    break;
                }
            }
            None => {
                mu = (mu * settings.mu_factor).max(settings.mu_min);
                if mu > settings.mu_max {
                    degraded = true;
                    break;
                }
            }
        }
    }
    Ok(IlqrResult { controls: u, states: xs, cost, cost_history: history, iterations, converged, degraded })
}
