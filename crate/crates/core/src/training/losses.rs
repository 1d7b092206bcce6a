use crate::error::{param_err, shape_err, Result};
use crate::models::{Dynamics, StateCost};
use crate::scalar::{wrap_angle, Real};
use crate::types::ControlSequence;

use super::dataset::MpcSample;

fn check_same(pred: &ControlSequence<impl Real>, demo: &ControlSequence<impl Real>) -> Result<()> {
    if pred.horizon() != demo.horizon() || pred.dim() != demo.dim() {
        return shape_err(format!(
            "prediction is {}x{}, demonstration {}x{}",
            pred.horizon(),
            pred.dim(),
            demo.horizon(),
            demo.dim()
        ));
    }
    Ok(())
}

/// Mean squared error over all `N * m` entries.
pub fn loss_ctrl<T: Real>(pred: &ControlSequence<T>, demo: &ControlSequence<T>) -> Result<T> {
    check_same(pred, demo)?;
    let n = T::lit(pred.as_slice().len() as f64);
    Ok(pred.as_slice().iter().zip(demo.as_slice()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

/// `d loss_ctrl / d pred`.
pub fn loss_ctrl_grad<T: Real>(pred: &ControlSequence<T>, demo: &ControlSequence<T>) -> Result<ControlSequence<T>> {
    check_same(pred, demo)?;
    let scale = T::lit(2.0) / T::lit(pred.as_slice().len() as f64);
    let data = pred.as_slice().iter().zip(demo.as_slice()).map(|(&a, &b)| scale * (a - b)).collect();
    ControlSequence::from_vec(pred.horizon(), pred.dim(), data)
}

/// Mean squared error of the first control only.
pub fn loss_ctrl_first<T: Real>(pred: &ControlSequence<T>, demo: &[T]) -> Result<T> {
    if pred.dim() != demo.len() || pred.horizon() == 0 {
        return shape_err("first-control loss needs a control of the plan's dimension");
    }
    let n = T::lit(demo.len() as f64);
    Ok(pred.step(0).iter().zip(demo).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

pub fn loss_ctrl_first_grad<T: Real>(pred: &ControlSequence<T>, demo: &[T]) -> Result<ControlSequence<T>> {
    loss_ctrl_first(pred, demo)?;
    let scale = T::lit(2.0) / T::lit(demo.len() as f64);
    let mut g = ControlSequence::zeros(pred.horizon(), pred.dim());
    for ((o, &a), &b) in g.step_mut(0).iter_mut().zip(pred.step(0)).zip(demo) {
        *o = scale * (a - b);
    }
    Ok(g)
}

/// `pred - target`, with the first component taken on the circle when
/// `wrap` is set.
pub fn state_residual<T: Real>(pred: &[T], target: &[T], wrap: bool) -> Vec<T> {
    let mut r: Vec<T> = pred.iter().zip(target).map(|(&a, &b)| a - b).collect();
    if wrap && !r.is_empty() {
        r[0] = wrap_angle(r[0]);
    }
    r
}

fn predict<T: Real>(f: &dyn Dynamics<T>, s: &MpcSample<T>) -> Result<Vec<T>> {
    if s.x.len() != f.state_dim() || s.u.len() != f.control_dim() || s.x_next.len() != f.state_dim() {
        return shape_err("transition does not match the dynamics model");
    }
    let mut out = vec![T::zero(); s.x.len()];
    f.forward(&s.x, &s.u, &mut out);
    Ok(out)
}

/// Mean over samples and state components of the squared one-step
/// prediction error.
pub fn loss_dyn<T: Real>(f: &dyn Dynamics<T>, samples: &[MpcSample<T>], wrap: bool) -> Result<T> {
    if samples.is_empty() {
        return param_err("loss_dyn needs at least one transition");
    }
    let mut total = T::zero();
    for s in samples {
        let r = state_residual(&predict(f, s)?, &s.x_next, wrap);
        total += r.iter().map(|&v| v * v).sum::<T>();
    }
    Ok(total / T::lit((samples.len() * f.state_dim()) as f64))
}

/// Accumulates `d loss_dyn / d alpha` into `p_bar` and returns the loss.
pub fn loss_dyn_grad<T: Real>(f: &dyn Dynamics<T>, samples: &[MpcSample<T>], wrap: bool, p_bar: &mut [T]) -> Result<T> {
    if samples.is_empty() {
        return param_err("loss_dyn needs at least one transition");
    }
    let n = f.state_dim();
    let denom = T::lit((samples.len() * n) as f64);
    let mut total = T::zero();
    let mut x_bar = vec![T::zero(); n];
    let mut v_bar = vec![T::zero(); f.control_dim()];
    for s in samples {
        let r = state_residual(&predict(f, s)?, &s.x_next, wrap);
        total += r.iter().map(|&v| v * v).sum::<T>();
        // wrapping is locally the identity, so d r / d pred = I
        let cot: Vec<T> = r.iter().map(|&v| T::lit(2.0) * v / denom).collect();
        f.vjp(&s.x, &s.u, &cot, &mut x_bar, &mut v_bar, Some(&mut *p_bar));
    }
    Ok(total / denom)
}

/// Mean over goals and batch states of `max(0, q(goal) - q(x))`.
pub fn loss_cost<T: Real>(q: &dyn StateCost<T>, goals: &[Vec<T>], batch: &[Vec<T>]) -> Result<T> {
    if goals.is_empty() {
        return param_err("loss_cost needs at least one goal state");
    }
    if batch.is_empty() {
        return Ok(T::zero());
    }
    let qg: Vec<T> = goals.iter().map(|g| q.eval(g)).collect();
    let mut total = T::zero();
    for x in batch {
        let qx = q.eval(x);
        total += qg.iter().map(|&v| (v - qx).max(T::zero())).sum::<T>();
    }
    Ok(total / T::lit((goals.len() * batch.len()) as f64))
}

/// Accumulates `scale * d loss_cost / d beta` into `p_bar` and returns the
/// loss. The ramp's derivative at zero is taken as zero.
pub fn loss_cost_grad<T: Real>(
    q: &dyn StateCost<T>,
    goals: &[Vec<T>],
    batch: &[Vec<T>],
    scale: T,
    p_bar: &mut [T],
) -> Result<T> {
    let loss = loss_cost(q, goals, batch)?;
    if batch.is_empty() {
        return Ok(loss);
    }
    let w = scale / T::lit((goals.len() * batch.len()) as f64);
    let n = q.state_dim();
    let mut x_bar = vec![T::zero(); n];
    let qg: Vec<T> = goals.iter().map(|g| q.eval(g)).collect();
    for x in batch {
        let qx = q.eval(x);
        for (g, &v) in goals.iter().zip(&qg) {
            if v > qx {
                q.vjp(g, w, &mut x_bar, Some(&mut *p_bar));
                q.vjp(x, -w, &mut x_bar, Some(&mut *p_bar));
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{PendulumTask, Plant};
    use crate::linalg::Mat;
    use crate::models::{LinearDynamics, QuadraticCost};
    use crate::params::Parameterized;

    #[test]
    fn ctrl_examples() {
        let a = ControlSequence::from_vec(1, 1, vec![2.0]).unwrap();
        let b = ControlSequence::zeros(1, 1);
        assert_eq!(loss_ctrl(&a, &b).unwrap(), 4.0);
        assert_eq!(loss_ctrl(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_ctrl_grad(&a, &b).unwrap().as_slice(), &[4.0]);
        assert!(loss_ctrl(&a, &ControlSequence::zeros(2, 1)).is_err());
        let p = ControlSequence::from_vec(3, 1, vec![1.0, 5.0, 7.0]).unwrap();
        assert_eq!(loss_ctrl_first(&p, &[0.0]).unwrap(), 1.0);
        assert_eq!(loss_ctrl_first_grad(&p, &[0.0]).unwrap().as_slice(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn dyn_examples() {
        let task = PendulumTask::<f64>::default();
        let teacher = crate::models::PendulumTeacherDynamics::new(0.1, 0.5);
        let mut x = vec![0.3, 0.9];
        let mut samples = Vec::new();
        for i in 0..50 {
            let u = vec![(i as f64 * 0.3).sin() * 3.0];
            let next = task.step(&x, &u);
            samples.push(MpcSample { x: x.clone(), u, x_next: next.clone() });
            x = next;
        }
        assert!(loss_dyn(&teacher, &samples, true).unwrap() < 1e-28);
        let zero = LinearDynamics::new(Mat::zeros(2, 2), Mat::zeros(2, 1)).unwrap();
        let s = [MpcSample { x: vec![1.0, 1.0], u: vec![0.0], x_next: vec![2.0, -1.0] }];
        assert_eq!(loss_dyn(&zero, &s, false).unwrap(), 2.5);
    }

    #[test]
    fn dyn_grad_matches_finite_differences() {
        let mut f = LinearDynamics::new(
            Mat::from_fn(2, 2, |r, c| 0.3 * (r + 2 * c) as f64 - 0.4),
            Mat::from_fn(2, 1, |r, _| r as f64),
        )
        .unwrap();
        let samples: Vec<_> = (0..4)
            .map(|i| MpcSample {
                x: vec![i as f64, 1.0 - i as f64],
                u: vec![0.5 * i as f64],
                x_next: vec![0.1, -0.3 * i as f64],
            })
            .collect();
        let mut p = vec![0.0; f.param_count()];
        f.write_params(&mut p);
        let mut g = vec![0.0; p.len()];
        loss_dyn_grad(&f, &samples, false, &mut g).unwrap();
        let h = 1e-6;
        for j in 0..p.len() {
            let mut q = p.clone();
            q[j] += h;
            f.read_params(&q);
            let up = loss_dyn(&f, &samples, false).unwrap();
            q[j] -= 2.0 * h;
            f.read_params(&q);
            let down = loss_dyn(&f, &samples, false).unwrap();
            f.read_params(&p);
            assert!(((up - down) / (2.0 * h) - g[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn cost_ramp() {
        let q = QuadraticCost::new(Mat::identity(1).scale(2.0)).unwrap();
        // q(x) = x^2
        let goal = vec![vec![std::f64::consts::SQRT_2]];
        assert!((loss_cost(&q, &goal, &[vec![1.0]]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(loss_cost(&q, &goal, &[vec![3.0], vec![-2.0]]).unwrap(), 0.0);
        assert!(loss_cost(&q, &[], &[vec![1.0]]).is_err());
        let mut pb = vec![0.0; 1];
        loss_cost_grad(&q, &goal, &[vec![1.0]], 1.0, &mut pb).unwrap();
        // d/dQ (½Q g² - ½Q x²) = ½(2 - 1)
        assert!((pb[0] - 0.5).abs() < 1e-12);
    }
}
