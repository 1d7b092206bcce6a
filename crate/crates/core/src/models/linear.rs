use super::{CostSpec, Dynamics, DynamicsSpec, StateCost};
use crate::error::{shape_err, Result};
use crate::linalg::Mat;
use crate::params::Parameterized;
use crate::scalar::Real;

/// `f(x, v) = F x + G v`. Parameters: `F` then `G`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics<T> {
    f: Mat<T>,
    g: Mat<T>,
}

impl<T: Real> LinearDynamics<T> {
    pub fn new(f: Mat<T>, g: Mat<T>) -> Result<Self> {
        if !f.is_square() || g.rows() != f.rows() || f.rows() == 0 || g.cols() == 0 {
            return shape_err(format!("F is {}x{}, G is {}x{}", f.rows(), f.cols(), g.rows(), g.cols()));
        }
        Ok(Self { f, g })
    }

    pub fn f(&self) -> &Mat<T> {
        &self.f
    }

    pub fn g(&self) -> &Mat<T> {
        &self.g
    }
}

impl<T: Real> Parameterized<T> for LinearDynamics<T> {
    fn param_count(&self) -> usize {
        self.f.as_slice().len() + self.g.as_slice().len()
    }
    fn write_params(&self, out: &mut [T]) {
        let nf = self.f.as_slice().len();
        out[..nf].copy_from_slice(self.f.as_slice());
        out[nf..nf + self.g.as_slice().len()].copy_from_slice(self.g.as_slice());
    }
    fn read_params(&mut self, src: &[T]) {
        let nf = self.f.as_slice().len();
        self.f.as_mut_slice().copy_from_slice(&src[..nf]);
        self.g.as_mut_slice().copy_from_slice(&src[nf..]);
    }
}

impl<T: Real> Dynamics<T> for LinearDynamics<T> {
    fn state_dim(&self) -> usize {
        self.f.rows()
    }

    fn control_dim(&self) -> usize {
        self.g.cols()
    }

    fn forward(&self, x: &[T], v: &[T], out: &mut [T]) {
        self.f.mul_vec(x, out);
        self.g.mul_vec_acc(v, out);
    }

    fn vjp(&self, x: &[T], v: &[T], cot: &[T], x_bar: &mut [T], v_bar: &mut [T], p_bar: Option<&mut [T]>) {
        self.f.tr_mul_vec_acc(cot, x_bar);
        self.g.tr_mul_vec_acc(cot, v_bar);
        if let Some(p) = p_bar {
            let (n, m) = (self.f.rows(), self.g.cols());
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] += cot[i] * x[j];
                }
                for j in 0..m {
                    p[n * n + i * m + j] += cot[i] * v[j];
                }
            }
        }
    }

    fn spec(&self) -> DynamicsSpec {
        DynamicsSpec::Linear { state_dim: self.f.rows(), control_dim: self.g.cols() }
    }

    fn boxed_clone(&self) -> Box<dyn Dynamics<T>> {
        Box::new(self.clone())
    }
}

/// `q(x) = xᵀ Q x / 2` with symmetric `Q`, parameterised by its upper
/// triangle (row-major, diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost<T> {
    q: Mat<T>,
}

impl<T: Real> QuadraticCost<T> {
    /// Symmetrises `q`.
    pub fn new(q: Mat<T>) -> Result<Self> {
        if !q.is_square() || q.rows() == 0 {
            return shape_err("Q must be square and non-empty");
        }
        Ok(Self { q: q.symmetrized() })
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.q
    }
}

impl<T: Real> Parameterized<T> for QuadraticCost<T> {
    fn param_count(&self) -> usize {
        let n = self.q.rows();
        n * (n + 1) / 2
    }
    fn write_params(&self, out: &mut [T]) {
        let n = self.q.rows();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                out[k] = self.q[(i, j)];
                k += 1;
            }
        }
    }
    fn read_params(&mut self, src: &[T]) {
        let n = self.q.rows();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                self.q[(i, j)] = src[k];
                self.q[(j, i)] = src[k];
                k += 1;
            }
        }
    }
}

impl<T: Real> StateCost<T> for QuadraticCost<T> {
    fn state_dim(&self) -> usize {
        self.q.rows()
    }

    fn eval(&self, x: &[T]) -> T {
        T::half() * self.q.bilinear(x, x)
    }

    fn vjp(&self, x: &[T], cot: T, x_bar: &mut [T], p_bar: Option<&mut [T]>) {
        let n = self.q.rows();
        for (i, xb) in x_bar.iter_mut().enumerate().take(n) {
            *xb += cot * self.q.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        }
        if let Some(p) = p_bar {
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    p[k] += if i == j { cot * T::half() * x[i] * x[i] } else { cot * x[i] * x[j] };
                    k += 1;
                }
            }
        }
    }

    fn spec(&self) -> CostSpec {
        CostSpec::Quadratic { state_dim: self.q.rows() }
    }

    fn boxed_clone(&self) -> Box<dyn StateCost<T>> {
        Box::new(self.clone())
    }
}
