use crate::linalg::Mat;
use crate::scalar::{wrap_angle, Real};

/// Minimum continuous upright time, seconds.
pub const SUCCESS_WINDOW: f64 = 5.0;
/// Maximum angular distance from upright, radians.
pub const SUCCESS_THRESHOLD: f64 = 0.5;

/// True when some run of consecutive states spanning at least five seconds
/// stays within the threshold of `theta = ±pi`.
pub fn success_metric<T: Real>(states: &[Vec<T>], dt: T) -> bool {
    let pi = T::PI();
    let thr = T::lit(SUCCESS_THRESHOLD);
    let need = T::lit(SUCCESS_WINDOW);
    // tolerate accumulated rounding in (count - 1) * dt
    let slack = dt * T::lit(1e-6);
    let mut run = 0usize;
    for x in states {
        let th = wrap_angle(x[0]);
        if (th - pi).abs() < thr || (th + pi).abs() < thr {
            run += 1;
            if run >= 2 && T::lit((run - 1) as f64) * dt + slack >= need {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// `phi(x_T) + sum_i (q(x_i) + ½uᵢᵀRuᵢ)` over one realised trajectory;
/// `states` has one more entry than `controls`.
pub fn trajectory_cost<T: Real>(
    states: &[Vec<T>],
    controls: &[Vec<T>],
    q: impl Fn(&[T]) -> T,
    phi: impl Fn(&[T]) -> T,
    r: &Mat<T>,
) -> T {
    debug_assert_eq!(states.len(), controls.len() + 1);
    let running: T = controls.iter().zip(states).map(|(u, x)| q(x) + T::half() * r.bilinear(u, u)).sum();
    match states.last() {
        Some(x) => running + phi(x),
        None => running,
    }
}
