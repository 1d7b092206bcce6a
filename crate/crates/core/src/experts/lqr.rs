use crate::error::{param_err, shape_err, Result};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::types::ControlSequence;

/// Finite-horizon discrete-time LQ problem with cost
/// `sum_i (xᵢᵀQxᵢ/2 + uᵢᵀRuᵢ/2) + x_NᵀQx_N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem<T> {
    pub f: Mat<T>,
    pub g: Mat<T>,
    pub q: Mat<T>,
    pub r: Mat<T>,
    pub horizon: usize,
}

impl<T: Real> LqrProblem<T> {
    pub fn new(f: Mat<T>, g: Mat<T>, q: Mat<T>, r: Mat<T>, horizon: usize) -> Result<Self> {
        let n = f.rows();
        let m = g.cols();
        if !f.is_square() || g.rows() != n || q.rows() != n || !q.is_square() || r.rows() != m || !r.is_square() {
            return shape_err("LQR matrices have inconsistent shapes");
        }
        if horizon == 0 {
            return param_err("LQR horizon must be at least 1");
        }
        let tol = T::lit(1e-12) * (T::one() + q.max_abs());
        if q.sub(&q.transpose()).max_abs() > tol {
            return param_err("Q must be symmetric");
        }
        // PSD: Q + eps I admits a Cholesky factor
        let eps = T::lit(1e-10) * (T::one() + q.max_abs());
        if q.add(&Mat::identity(n).scale(eps)).cholesky().is_err() {
            return param_err("Q must be positive semidefinite");
        }
        if r.sub(&r.transpose()).max_abs() > T::lit(1e-12) * (T::one() + r.max_abs()) || r.cholesky().is_err() {
            return param_err("R must be symmetric positive definite");
        }
        Ok(Self { f, g, q, r, horizon })
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn control_dim(&self) -> usize {
        self.g.cols()
    }
}

/// Backward Riccati recursion. Returns the feedback gains `K_i` (with
/// `u_i = -K_i x_i`) and value matrices `P_0..P_N`.
pub fn lqr_gains<T: Real>(p: &LqrProblem<T>) -> Result<(Vec<Mat<T>>, Vec<Mat<T>>)> {
    let ft = p.f.transpose();
    let gt = p.g.transpose();
    let mut values = vec![p.q.clone()];
    let mut gains = Vec::with_capacity(p.horizon);
    let mut pm = p.q.clone();
    for _ in 0..p.horizon {
        let gtp = gt.matmul(&pm);
        let lhs = p.r.add(&gtp.matmul(&p.g));
        let k = lhs.solve(&gtp.matmul(&p.f))?;
        // P = Q + Fᵀ P (F - G K)
        let closed = p.f.sub(&p.g.matmul(&k));
        pm = p.q.add(&ft.matmul(&pm).matmul(&closed)).symmetrized();
        gains.push(k);
        values.push(pm.clone());
    }
    gains.reverse();
    values.reverse();
    Ok((gains, values))
}

/// States and controls of the optimal closed loop from `x0`.
pub fn lqr_rollout<T: Real>(p: &LqrProblem<T>, x0: &[T]) -> Result<(Vec<Vec<T>>, ControlSequence<T>)> {
    if x0.len() != p.state_dim() {
        return shape_err("initial state dimension mismatch");
    }
    let (gains, _) = lqr_gains(p)?;
    let m = p.control_dim();
    let mut states = vec![x0.to_vec()];
    let mut controls = Vec::with_capacity(p.horizon * m);
    for k in &gains {
        let x = states.last().expect("non-empty");
        let u: Vec<T> = k.vec(x).into_iter().map(|v| -v).collect();
        let mut next = p.f.vec(x);
        p.g.mul_vec_acc(&u, &mut next);
        controls.extend_from_slice(&u);
        states.push(next);
    }
    Ok((states, ControlSequence::from_vec(p.horizon, m, controls)?))
}

/// Exact minimiser of the LQ objective from `x0`.
pub fn lqr_solve<T: Real>(p: &LqrProblem<T>, x0: &[T]) -> Result<ControlSequence<T>> {
    lqr_rollout(p, x0).map(|(_, u)| u)
}

pub fn lqr_objective<T: Real>(p: &LqrProblem<T>, x0: &[T], useq: &ControlSequence<T>) -> T {
    let half = T::half();
    let mut x = x0.to_vec();
    let mut total = T::zero();
    for i in 0..useq.horizon() {
        let u = useq.step(i);
        total += half * p.q.bilinear(&x, &x) + half * p.r.bilinear(u, u);
        let mut next = p.f.vec(&x);
        p.g.mul_vec_acc(u, &mut next);
        x = next;
    }
    total + half * p.q.bilinear(&x, &x)
}
