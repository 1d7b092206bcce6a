//! Torque-actuated pendulum, `theta_ddot = -sin(theta) + k u`, discretised
//! with one classical RK4 step per control interval.

use crate::experts::IlqrProblem;
use crate::linalg::Mat;
use crate::models::{ControlCostWeight, PendulumTeacherCost, PendulumTeacherDynamics, PiModels, TerminalCost};
use crate::rng::{uniform, SeededRng};
use crate::scalar::{wrap_angle, Real};

use super::metrics::success_metric;
use super::mpc::Plant;

pub const PENDULUM_DT: f64 = 0.1;
pub const PENDULUM_GAIN: f64 = 0.5;
pub const PENDULUM_R: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum<T> {
    pub dt: T,
    pub gain: T,
}

impl<T: Real> Default for Pendulum<T> {
    fn default() -> Self {
        Self { dt: T::lit(PENDULUM_DT), gain: T::lit(PENDULUM_GAIN) }
    }
}

impl<T: Real> Pendulum<T> {
    pub fn new(dt: T, gain: T) -> Self {
        Self { dt, gain }
    }

    #[inline]
    fn deriv(&self, x: [T; 2], u: T) -> [T; 2] {
        [x[1], -x[0].sin() + self.gain * u]
    }

    /// One RK4 step without angle wrapping.
    pub fn step_unwrapped(&self, x: [T; 2], u: T) -> [T; 2] {
        let h = self.dt;
        let half = h * T::half();
        let k1 = self.deriv(x, u);
        let k2 = self.deriv([x[0] + half * k1[0], x[1] + half * k1[1]], u);
        let k3 = self.deriv([x[0] + half * k2[0], x[1] + half * k2[1]], u);
        let k4 = self.deriv([x[0] + h * k3[0], x[1] + h * k3[1]], u);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        [
            x[0] + sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
            x[1] + sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
        ]
    }

    /// One RK4 step, angle wrapped to `(-pi, pi]`.
    pub fn step(&self, x: [T; 2], u: T) -> [T; 2] {
        let [th, om] = self.step_unwrapped(x, u);
        [wrap_angle(th), om]
    }

    /// Exact Jacobians `(d x'/dx, d x'/du)` of one RK4 step, by the chain
    /// rule through the four stages.
    pub fn jacobians(&self, x: [T; 2], u: T) -> (Mat<T>, Mat<T>) {
        let h = self.dt;
        let half = h * T::half();
        let k = self.gain;
        // stage derivative Jacobians w.r.t. its own input state
        let jf = |th: T| [[T::zero(), T::one()], [-th.cos(), T::zero()]];
        let mul = |a: [[T; 2]; 2], b: [[T; 2]; 2]| {
            let mut c = [[T::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            c
        };
        let mulv = |a: [[T; 2]; 2], v: [T; 2]| [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
        let eye = [[T::one(), T::zero()], [T::zero(), T::one()]];
        let bu = [T::zero(), k];
        let stage_in = |scale: T, dk: [[T; 2]; 2]| {
            let mut m = eye;
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += scale * dk[i][j];
                }
            }
            m
        };

        let k1 = self.deriv(x, u);
        let x2 = [x[0] + half * k1[0], x[1] + half * k1[1]];
        let k2 = self.deriv(x2, u);
        let x3 = [x[0] + half * k2[0], x[1] + half * k2[1]];
        let k3 = self.deriv(x3, u);
        let x4 = [x[0] + h * k3[0], x[1] + h * k3[1]];

        let dk1x = jf(x[0]);
        let dk1u = bu;
        let dk2x = mul(jf(x2[0]), stage_in(half, dk1x));
        let t = mulv(jf(x2[0]), [half * dk1u[0], half * dk1u[1]]);
        let dk2u = [t[0] + bu[0], t[1] + bu[1]];
        let dk3x = mul(jf(x3[0]), stage_in(half, dk2x));
        let t = mulv(jf(x3[0]), [half * dk2u[0], half * dk2u[1]]);
        let dk3u = [t[0] + bu[0], t[1] + bu[1]];
        let dk4x = mul(jf(x4[0]), stage_in(h, dk3x));
        let t = mulv(jf(x4[0]), [h * dk3u[0], h * dk3u[1]]);
        let dk4u = [t[0] + bu[0], t[1] + bu[1]];

        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        let a = Mat::from_fn(2, 2, |i, j| {
            eye[i][j] + sixth * (dk1x[i][j] + two * dk2x[i][j] + two * dk3x[i][j] + dk4x[i][j])
        });
        let b = Mat::from_fn(2, 1, |i, _| sixth * (dk1u[i] + two * dk2u[i] + two * dk3u[i] + dk4u[i]));
        (a, b)
    }

    /// Mechanical energy `theta_dot^2 / 2 - cos(theta)`.
    pub fn energy(x: [T; 2]) -> T {
        T::half() * x[1] * x[1] - x[0].cos()
    }
}

/// `q(theta, theta_dot) = (1 + cos theta)^2 + theta_dot^2`.
pub fn teacher_cost<T: Real>(x: &[T]) -> T {
    let c = T::one() + x[0].cos();
    c * c + x[1] * x[1]
}

pub fn teacher_cost_grad<T: Real>(x: &[T]) -> [T; 2] {
    let two = T::lit(2.0);
    [-two * (T::one() + x[0].cos()) * x[0].sin(), two * x[1]]
}

pub fn teacher_cost_hessian<T: Real>(x: &[T]) -> Mat<T> {
    let two = T::lit(2.0);
    let (s, c) = x[0].sin_cos();
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => two * s * s - two * (T::one() + c) * c,
        (1, 1) => two,
        _ => T::zero(),
    })
}

/// Angular distance from the upright position.
pub fn distance_from_upright<T: Real>(theta: T) -> T {
    (T::PI() - wrap_angle(theta).abs()).abs()
}

/// `pendulum_step` with the standard teacher constants.
pub fn pendulum_step<T: Real>(x: [T; 2], u: T) -> [T; 2] {
    Pendulum::default().step(x, u)
}

/// The swing-up task: teacher pendulum, teacher cost as both running and
/// terminal cost, and control weight `R = 5`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumTask<T> {
    pub pendulum: Pendulum<T>,
    r: Mat<T>,
}

impl<T: Real> Default for PendulumTask<T> {
    fn default() -> Self {
        Self { pendulum: Pendulum::default(), r: Mat::identity(1).scale(T::lit(PENDULUM_R)) }
    }
}

impl<T: Real> PendulumTask<T> {
    pub fn new(pendulum: Pendulum<T>, r: T) -> Self {
        Self { pendulum, r: Mat::identity(1).scale(r) }
    }
}

impl<T: Real> Plant<T> for PendulumTask<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn dt(&self) -> T {
        self.pendulum.dt
    }

    fn step(&self, x: &[T], u: &[T]) -> Vec<T> {
        self.pendulum.step([x[0], x[1]], u[0]).to_vec()
    }

    fn state_cost(&self, x: &[T]) -> T {
        teacher_cost(x)
    }

    fn control_weight(&self) -> &Mat<T> {
        &self.r
    }

    fn success(&self, states: &[Vec<T>]) -> bool {
        success_metric(states, self.pendulum.dt)
    }
}

impl<T: Real> IlqrProblem<T> for PendulumTask<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &[T], u: &[T]) -> Vec<T> {
        self.pendulum.step([x[0], x[1]], u[0]).to_vec()
    }

    fn linearize(&self, x: &[T], u: &[T]) -> (Mat<T>, Mat<T>) {
        self.pendulum.jacobians([x[0], x[1]], u[0])
    }

    fn running_cost(&self, x: &[T]) -> T {
        teacher_cost(x)
    }

    fn running_grad(&self, x: &[T]) -> Vec<T> {
        teacher_cost_grad(x).to_vec()
    }

    fn running_hessian(&self, x: &[T]) -> Mat<T> {
        teacher_cost_hessian(x)
    }

    fn terminal_cost(&self, x: &[T]) -> T {
        teacher_cost(x)
    }

    fn terminal_grad(&self, x: &[T]) -> Vec<T> {
        teacher_cost_grad(x).to_vec()
    }

    fn terminal_hessian(&self, x: &[T]) -> Mat<T> {
        teacher_cost_hessian(x)
    }

    fn control_weight(&self) -> &Mat<T> {
        &self.r
    }

    fn state_difference(&self, a: &[T], b: &[T]) -> Vec<T> {
        vec![wrap_angle(a[0] - b[0]), a[1] - b[1]]
    }
}

/// The teacher dynamics, cost and `R = 5` as network models.
pub fn pendulum_teacher_models<T: Real>() -> PiModels<T> {
    PiModels::new(
        Box::new(PendulumTeacherDynamics::new(T::lit(PENDULUM_DT), T::lit(PENDULUM_GAIN))),
        Box::new(PendulumTeacherCost),
        TerminalCost::SameAsRunning,
        ControlCostWeight::from_matrix(&Mat::identity(1).scale(T::lit(PENDULUM_R))).expect("positive weight"),
    )
    .expect("consistent shapes")
}

/// Initial states with `theta ~ U[-pi, pi]` and `theta_dot ~ U[-1, 1]`;
/// state `j` comes from `rng.substream(j)`.
pub fn pendulum_initial_states<T: Real>(rng: &SeededRng, count: usize) -> Vec<[T; 2]> {
    (0..count)
        .map(|j| {
            let mut g = rng.substream(j as u64).generator();
            let th = uniform(&mut g, -T::PI(), T::PI());
            let om = uniform(&mut g, -T::one(), T::one());
            [th, om]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fixed_points() {
        assert_eq!(pendulum_step([0.0f64, 0.0], 0.0), [0.0, 0.0]);
        let up = pendulum_step([PI, 0.0], 0.0);
        assert!((up[0] - PI).abs() < 1e-15 && up[1].abs() < 1e-15, "{up:?}");
        let down = pendulum_step([-PI, 0.0], 0.0);
        assert!((down[0] - PI).abs() < 1e-15 && down[1].abs() < 1e-15, "{down:?}");
    }

    #[test]
    fn matches_fine_step_integration() {
        let fine = Pendulum::new(1e-4, PENDULUM_GAIN);
        for (x0, u) in [([PI / 2.0, 0.0], 0.0), ([0.3, -1.2], 0.8), ([-2.5, 1.9], -1.5)] {
            let coarse = Pendulum::<f64>::default().step_unwrapped(x0, u);
            let mut x = x0;
            for _ in 0..1000 {
                x = fine.step_unwrapped(x, u);
            }
            assert!((coarse[0] - x[0]).abs() < 1e-5 && (coarse[1] - x[1]).abs() < 1e-5, "{coarse:?} vs {x:?}");
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let p = Pendulum::<f64>::default();
        for (x, u) in [([0.3, -1.2], 0.8), ([3.0, 0.1], -2.0), ([-1.7, 2.4], 0.0)] {
            let (a, b) = p.jacobians(x, u);
            let h = 1e-6;
            for j in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                let (fp, fm) = (p.step_unwrapped(xp, u), p.step_unwrapped(xm, u));
                for i in 0..2 {
                    assert!(((fp[i] - fm[i]) / (2.0 * h) - a[(i, j)]).abs() < 1e-8);
                }
            }
            let (fp, fm) = (p.step_unwrapped(x, u + h), p.step_unwrapped(x, u - h));
            for i in 0..2 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - b[(i, 0)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cost_values_and_derivatives() {
        assert_eq!(teacher_cost(&[0.0f64, 0.0]), 4.0);
        assert!(teacher_cost(&[PI, 0.0]) < 1e-30);
        assert!(teacher_cost(&[-PI, 0.0]) < 1e-30);
        let x = [0.7f64, -0.4];
        let g = teacher_cost_grad(&x);
        let hss = teacher_cost_hessian(&x);
        let h = 1e-6;
        let fd0 = (teacher_cost(&[x[0] + h, x[1]]) - teacher_cost(&[x[0] - h, x[1]])) / (2.0 * h);
        assert!((fd0 - g[0]).abs() < 1e-8);
        let fdd = (teacher_cost_grad(&[x[0] + h, x[1]])[0] - teacher_cost_grad(&[x[0] - h, x[1]])[0]) / (2.0 * h);
        assert!((fdd - hss[(0, 0)]).abs() < 1e-7);
    }

    #[test]
    fn energy_drift_is_small() {
        let p = Pendulum::<f64>::default();
        let mut g = crate::rng::SeededRng::new(4).generator();
        for _ in 0..500 {
            let x = [crate::rng::uniform(&mut g, -PI, PI), crate::rng::uniform(&mut g, -2.0, 2.0)];
            let y = p.step(x, 0.0);
            assert!((Pendulum::energy(y) - Pendulum::energy(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn ilqr_at_goal_stays_put() {
        use crate::experts::{ilqr_solve, IlqrSettings};
        use crate::types::ControlSequence;
        let task = PendulumTask::<f64>::default();
        let res = ilqr_solve(&task, &[PI, 0.0], &ControlSequence::zeros(30, 1), &IlqrSettings::default()).unwrap();
        assert!(res.cost < 1e-3, "{}", res.cost);
        assert!(res.controls.as_slice().iter().all(|u| u.abs() < 1e-6));
    }

    fn zero_plan_cost(task: &PendulumTask<f64>, x0: [f64; 2]) -> f64 {
        use crate::experts::total_cost;
        use crate::types::ControlSequence;
        let mut xs = vec![x0.to_vec()];
        for _ in 0..30 {
            let next = IlqrProblem::step(task, xs.last().unwrap(), &[0.0]);
            xs.push(next);
        }
        total_cost(task, &xs, &ControlSequence::zeros(30, 1))
    }

    #[test]
    fn ilqr_from_rest_never_worse_than_zero_plan() {
        use crate::experts::{ilqr_solve, IlqrSettings};
        use crate::types::ControlSequence;
        // Hanging at rest is a local optimum of the 3 s problem: pumping
        // energy costs more than the horizon can recover.
        let task = PendulumTask::<f64>::default();
        let base = zero_plan_cost(&task, [0.0, 0.0]);
        assert_eq!(base, 124.0);
        for c in [0.1, 1.0, -2.0] {
            let init = ControlSequence::filled(30, 1, c);
            let res = ilqr_solve(&task, &[0.0, 0.0], &init, &IlqrSettings::default()).unwrap();
            assert!(res.cost <= base + 1e-5, "{} vs {base}", res.cost);
            assert!(res.cost_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn ilqr_swing_up_beats_zero_plan() {
        use crate::experts::{ilqr_solve, IlqrSettings};
        use crate::types::ControlSequence;
        let task = PendulumTask::<f64>::default();
        for x0 in [[2.0, 0.5], [-1.5, -1.0], [0.5, 1.0]] {
            let base = zero_plan_cost(&task, x0);
            let res = ilqr_solve(&task, &x0, &ControlSequence::zeros(30, 1), &IlqrSettings::default()).unwrap();
            assert!(res.cost < base, "{x0:?}: {} vs {base}", res.cost);
            assert!(res.cost_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn initial_states_in_range() {
        let xs = pendulum_initial_states::<f64>(&SeededRng::new(1), 200);
        assert!(xs.iter().all(|x| x[0].abs() <= PI && x[1].abs() <= 1.0));
        assert_eq!(xs[..5], pendulum_initial_states::<f64>(&SeededRng::new(1), 5)[..]);
    }
}
