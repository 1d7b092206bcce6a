use crate::error::{param_err, shape_err, Result};
use crate::linalg::Mat;
use crate::params::Parameterized;
use crate::scalar::Real;

/// Control cost weight `R = L Lᵀ` with `L` lower triangular.
///
/// Parameters are the lower-triangular entries of `L` in row-major order,
/// with each diagonal entry stored as its logarithm so any parameter value
/// yields a positive definite `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCostWeight<T> {
    dim: usize,
    raw: Vec<T>,
}

fn tri_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl<T: Real> ControlCostWeight<T> {
    pub fn identity(dim: usize) -> Self {
        Self { dim, raw: vec![T::zero(); dim * (dim + 1) / 2] }
    }

    /// From an explicit factor; only the lower triangle is read.
    pub fn from_factor(l: &Mat<T>) -> Result<Self> {
        if !l.is_square() || l.rows() == 0 {
            return shape_err("control weight factor must be square and non-empty");
        }
        let dim = l.rows();
        let mut raw = vec![T::zero(); dim * (dim + 1) / 2];
        for i in 0..dim {
            for j in 0..=i {
                let v = l[(i, j)];
                raw[tri_index(i, j)] = if i == j {
                    if !(v > T::zero()) || !v.is_finite() {
                        return param_err(format!("factor diagonal entry {i} must be positive, got {v}"));
                    }
                    v.ln()
                } else {
                    v
                };
            }
        }
        Ok(Self { dim, raw })
    }

    /// From a symmetric positive definite `R` via its Cholesky factor.
    pub fn from_matrix(r: &Mat<T>) -> Result<Self> {
        let l = r.cholesky().map_err(|_| crate::error::PiError::Parameter("R must be positive definite".into()))?;
        Self::from_factor(&l)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self) -> Mat<T> {
        Mat::from_fn(self.dim, self.dim, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => T::zero(),
            std::cmp::Ordering::Equal => self.raw[tri_index(i, i)].exp(),
            std::cmp::Ordering::Greater => self.raw[tri_index(i, j)],
        })
    }

    pub fn matrix(&self) -> Mat<T> {
        let l = self.factor();
        l.matmul(&l.transpose())
    }

    /// Accumulates the parameter gradient given `r_bar = dLoss/dR` (any, not
    /// necessarily symmetric, matrix).
    pub fn vjp(&self, r_bar: &Mat<T>, p_bar: &mut [T]) {
        let l = self.factor();
        // dLoss/dL = (R̄ + R̄ᵀ) L
        let sym = r_bar.add(&r_bar.transpose());
        let l_bar = sym.matmul(&l);
        for i in 0..self.dim {
            for j in 0..=i {
                let g = l_bar[(i, j)];
                p_bar[tri_index(i, j)] += if i == j { g * l[(i, i)] } else { g };
            }
        }
    }
}

impl<T: Real> Parameterized<T> for ControlCostWeight<T> {
    fn param_count(&self) -> usize {
        self.raw.len()
    }
    fn write_params(&self, out: &mut [T]) {
        out[..self.raw.len()].copy_from_slice(&self.raw);
    }
    fn read_params(&mut self, src: &[T]) {
        self.raw.copy_from_slice(src);
    }
}

/// `R = L Lᵀ` for an explicit factor, rejecting non-positive diagonals.
pub fn control_weight_matrix<T: Real>(l: &Mat<T>) -> Result<Mat<T>> {
    Ok(ControlCostWeight::from_factor(l)?.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, SeededRng};

    #[test]
    fn identity_and_scalar_factor() {
        assert_eq!(control_weight_matrix(&Mat::<f64>::identity(3)).unwrap(), Mat::identity(3));
        let r = control_weight_matrix(&Mat::from_rows(&[&[5.0f64.sqrt()]]).unwrap()).unwrap();
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);
        assert!(control_weight_matrix(&Mat::from_rows(&[&[0.0]]).unwrap()).is_err());
        assert!(control_weight_matrix(&Mat::from_rows(&[&[1.0, 0.0], &[0.3, -2.0]]).unwrap()).is_err());
    }

    #[test]
    fn random_factors_are_positive_definite() {
        let mut g = SeededRng::new(11).generator();
        for _ in 0..200 {
            let l = Mat::from_fn(3, 3, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => normal(&mut g, 0.0f64, 1.0).abs() + 1e-3,
                std::cmp::Ordering::Greater => normal(&mut g, 0.0, 2.0),
            });
            let r = control_weight_matrix(&l).unwrap();
            let na = nalgebra::DMatrix::from_row_slice(3, 3, r.as_slice());
            let min = na.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0);
        }
    }

    #[test]
    fn arbitrary_raw_parameters_stay_positive_definite() {
        let mut w = ControlCostWeight::<f64>::identity(2);
        for raw in [[-6.0, 20.0, -6.0], [5.0, -7.0, 0.0], [-3.0, 1e3, 2.0]] {
            w.read_params(&raw);
            let r = w.matrix();
            assert!(r.cholesky().is_ok(), "{raw:?}");
            assert_eq!(r[(0, 1)], r[(1, 0)]);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut w = ControlCostWeight::<f64>::identity(2);
        w.read_params(&[0.3, -0.4, 0.1]);
        let rbar = Mat::from_rows(&[&[0.7, -0.2], &[1.1, 0.4]]).unwrap();
        let loss = |w: &ControlCostWeight<f64>| {
            let r = w.matrix();
            (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| rbar[(i, j)] * r[(i, j)]).sum::<f64>()
        };
        let mut g = vec![0.0; 3];
        w.vjp(&rbar, &mut g);
        for p in 0..3 {
            let mut raw = vec![0.0; 3];
            w.write_params(&mut raw);
            let h = 1e-6;
            raw[p] += h;
            let mut wp = w.clone();
            wp.read_params(&raw);
            raw[p] -= 2.0 * h;
            let mut wm = w.clone();
            wm.read_params(&raw);
            let fd = (loss(&wp) - loss(&wm)) / (2.0 * h);
            assert!((fd - g[p]).abs() < 1e-8, "{p}: {fd} vs {}", g[p]);
        }
    }
}
