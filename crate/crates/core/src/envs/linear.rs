use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experts::LqrProblem;
use crate::linalg::Mat;
use crate::models::{ControlCostWeight, Dynamics, LinearDynamics, PiModels, QuadraticCost, TerminalCost};
use crate::rng::{normal, standard_normal, SeededRng};
use crate::scalar::Real;

use super::mpc::Plant;

pub const LINEAR_STATE_DIM: usize = 4;
pub const LINEAR_CONTROL_DIM: usize = 2;
pub const LINEAR_DT: f64 = 0.01;

/// Random 4-state, 2-input linear system with `F = exp(dt (A - Aᵀ))`,
/// `G = [G_c; 0]` and `Q = R = dt I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTeacher<T> {
    pub f: Mat<T>,
    pub g: Mat<T>,
    pub q: Mat<T>,
    pub r: Mat<T>,
    pub dt: T,
}

/// Entries of `A` are `N(0, 1)`; entries of the 2x2 input block have
/// standard deviation `dt`.
pub fn sample_linear_teacher<T: Real>(rng: &SeededRng) -> Result<LinearTeacher<T>> {
    let (n, m) = (LINEAR_STATE_DIM, LINEAR_CONTROL_DIM);
    let dt = T::lit(LINEAR_DT);
    let mut g = rng.generator();
    let a = Mat::from_fn(n, n, |_, _| normal(&mut g, T::zero(), T::one()));
    let skew = a.sub(&a.transpose()).scale(dt);
    let f = skew.expm()?;
    let gc: Vec<T> = (0..m * m).map(|_| normal(&mut g, T::zero(), dt)).collect();
    let gm = Mat::from_fn(n, m, |r, c| if r < m { gc[r * m + c] } else { T::zero() });
    let eye = |d: usize| Mat::identity(d).scale(dt);
    Ok(LinearTeacher { f, g: gm, q: eye(n), r: eye(m), dt })
}

impl<T: Real> LinearTeacher<T> {
    pub fn lqr_problem(&self, horizon: usize) -> Result<LqrProblem<T>> {
        LqrProblem::new(self.f.clone(), self.g.clone(), self.q.clone(), self.r.clone(), horizon)
    }

    /// The teacher expressed as network models. The quadratic model
    /// evaluates `xᵀQx/2`, so its matrix is `Q` itself.
    pub fn models(&self) -> Result<PiModels<T>> {
        PiModels::new(
            Box::new(LinearDynamics::new(self.f.clone(), self.g.clone())?),
            Box::new(QuadraticCost::new(self.q.clone())?),
            TerminalCost::SameAsRunning,
            ControlCostWeight::from_matrix(&self.r)?,
        )
    }
}

/// Internal models for imitation: dynamics drawn like a teacher, `Q`
/// entries drawn with standard deviation `dt` (then symmetrised), and a
/// control-weight factor with diagonal `sqrt(dt)` and off-diagonal entries
/// of standard deviation `dt`.
pub fn initial_linear_models<T: Real>(rng: &SeededRng) -> Result<PiModels<T>> {
    let (n, m) = (LINEAR_STATE_DIM, LINEAR_CONTROL_DIM);
    let dt = T::lit(LINEAR_DT);
    let dynamics = sample_linear_teacher::<T>(&rng.substream(0))?;
    let mut g = rng.substream(1).generator();
    let q = Mat::from_fn(n, n, |_, _| normal(&mut g, T::zero(), dt));
    let l = Mat::from_fn(m, m, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Less => T::zero(),
        std::cmp::Ordering::Equal => dt.sqrt(),
        std::cmp::Ordering::Greater => normal(&mut g, T::zero(), dt),
    });
    PiModels::new(
        Box::new(LinearDynamics::new(dynamics.f, dynamics.g)?),
        Box::new(QuadraticCost::new(q)?),
        TerminalCost::SameAsRunning,
        ControlCostWeight::from_factor(&l)?,
    )
}

/// Mean of `|f(x, u) - x'| / |x'|` over `pairs` draws of `x, u` with
/// standard normal entries, where `x'` is the teacher's next state. Pair
/// `j` comes from `rng.substream(j)`.
pub fn one_step_relative_error<T: Real>(
    model: &dyn Dynamics<T>,
    teacher: &LinearTeacher<T>,
    rng: &SeededRng,
    pairs: usize,
) -> T {
    let (n, m) = (teacher.state_dim(), teacher.control_dim());
    let mut total = T::zero();
    for j in 0..pairs {
        let mut g = rng.substream(j as u64).generator();
        let x: Vec<T> = (0..n).map(|_| standard_normal(&mut g)).collect();
        let u: Vec<T> = (0..m).map(|_| standard_normal(&mut g)).collect();
        let truth = teacher.step(&x, &u);
        let mut pred = vec![T::zero(); n];
        model.forward(&x, &u, &mut pred);
        let err = pred.iter().zip(&truth).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
        total += err / truth.iter().map(|&b| b * b).sum::<T>().sqrt();
    }
    total / T::lit(pairs.max(1) as f64)
}

impl<T: Real> Plant<T> for LinearTeacher<T> {
    fn state_dim(&self) -> usize {
        LINEAR_STATE_DIM
    }

    fn control_dim(&self) -> usize {
        LINEAR_CONTROL_DIM
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn step(&self, x: &[T], u: &[T]) -> Vec<T> {
        let mut y = self.f.vec(x);
        self.g.mul_vec_acc(u, &mut y);
        y
    }

    fn state_cost(&self, x: &[T]) -> T {
        T::half() * self.q.bilinear(x, x)
    }

    fn control_weight(&self) -> &Mat<T> {
        &self.r
    }
}
