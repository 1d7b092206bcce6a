use super::{fill_normal, CostSpec, Dynamics, DynamicsSpec, StateCost};
use crate::params::Parameterized;
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Stack buffer for the small activations in these networks; falls back
/// to the heap for wide layers.
enum Scratch<T> {
    Stack([T; 32], usize),
    Heap(Vec<T>),
}

impl<T: Copy + Default> Scratch<T> {
    fn new(len: usize) -> Self {
        if len <= 32 {
            Scratch::Stack([T::default(); 32], len)
        } else {
            Scratch::Heap(vec![T::default(); len])
        }
    }
}

impl<T> std::ops::Deref for Scratch<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        match self {
            Scratch::Stack(a, n) => &a[..*n],
            Scratch::Heap(v) => v,
        }
    }
}

impl<T> std::ops::DerefMut for Scratch<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        match self {
            Scratch::Stack(a, n) => &mut a[..*n],
            Scratch::Heap(v) => v,
        }
    }
}

/// One tanh hidden layer followed by an affine output layer.
/// Parameter layout: `W1 (hidden x inputs)`, `b1`, `W2 (outputs x hidden)`, `b2`.
#[derive(Debug, Clone, PartialEq)]
struct TanhNet<T> {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<T>,
}

impl<T: Real> TanhNet<T> {
    fn new(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let len = hidden * inputs + hidden + outputs * hidden + outputs;
        Self { inputs, hidden, outputs, params: vec![T::zero(); len] }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// Glorot-style normal initialisation, zero biases.
    fn init(&mut self, rng: &SeededRng) {
        let (b1, w2, b2) = self.offsets();
        let std1 = T::lit((2.0 / (self.inputs + self.hidden) as f64).sqrt());
        let std2 = T::lit((2.0 / (self.hidden + self.outputs) as f64).sqrt());
        fill_normal(&mut self.params[..b1], &rng.substream(0), std1);
        fill_normal(&mut self.params[w2..b2], &rng.substream(1), std2);
        self.params[b1..w2].iter_mut().for_each(|p| *p = T::zero());
        self.params[b2..].iter_mut().for_each(|p| *p = T::zero());
    }

    fn hidden_act(&self, input: &[T], h: &mut [T]) {
        let (b1, _, _) = self.offsets();
        for (j, hj) in h.iter_mut().enumerate() {
            let w = &self.params[j * self.inputs..(j + 1) * self.inputs];
            let z = self.params[b1 + j] + w.iter().zip(input).map(|(&a, &b)| a * b).sum::<T>();
            *hj = z.tanh();
        }
    }

    fn output(&self, h: &[T], out: &mut [T]) {
        let (_, w2, b2) = self.offsets();
        for (o, y) in out.iter_mut().enumerate() {
            let w = &self.params[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
            *y = self.params[b2 + o] + w.iter().zip(h).map(|(&a, &b)| a * b).sum::<T>();
        }
    }

    fn forward(&self, input: &[T], out: &mut [T]) {
        let mut h = Scratch::new(self.hidden);
        self.hidden_act(input, &mut h);
        self.output(&h, out);
    }

    /// Accumulates `in_bar` and (optionally) `p_bar` for output cotangent `out_bar`.
    fn backward(&self, input: &[T], out_bar: &[T], in_bar: &mut [T], p_bar: Option<&mut [T]>) {
        let (b1, w2, b2) = self.offsets();
        let mut h = Scratch::new(self.hidden);
        self.hidden_act(input, &mut h);
        let mut z_bar = Scratch::new(self.hidden);
        for j in 0..self.hidden {
            let hb: T = (0..self.outputs).map(|o| out_bar[o] * self.params[w2 + o * self.hidden + j]).sum();
            z_bar[j] = hb * (T::one() - h[j] * h[j]);
        }
        for (i, ib) in in_bar.iter_mut().enumerate().take(self.inputs) {
            *ib += (0..self.hidden).map(|j| z_bar[j] * self.params[j * self.inputs + i]).sum::<T>();
        }
        if let Some(p) = p_bar {
            for j in 0..self.hidden {
                for i in 0..self.inputs {
                    p[j * self.inputs + i] += z_bar[j] * input[i];
                }
                p[b1 + j] += z_bar[j];
            }
            for o in 0..self.outputs {
                for j in 0..self.hidden {
                    p[w2 + o * self.hidden + j] += out_bar[o] * h[j];
                }
                p[b2 + o] += out_bar[o];
            }
        }
    }
}

/// Pendulum dynamics network: predicts `theta_ddot` from `(theta, theta_dot, u)`
/// and integrates one explicit Euler step:
/// `theta' = theta + dt theta_dot`, `theta_dot' = theta_dot + dt theta_ddot`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDynamics<T> {
    net: TanhNet<T>,
    dt: T,
}

impl<T: Real> MlpDynamics<T> {
    pub fn new(hidden: usize, dt: T) -> Self {
        Self { net: TanhNet::new(3, hidden, 1), dt }
    }

    pub fn initialized(hidden: usize, dt: T, rng: &SeededRng) -> Self {
        let mut m = Self::new(hidden, dt);
        m.net.init(rng);
        m
    }

    pub fn hidden(&self) -> usize {
        self.net.hidden
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Predicted angular acceleration.
    pub fn acceleration(&self, x: &[T], u: T) -> T {
        let mut a = [T::zero()];
        self.net.forward(&[x[0], x[1], u], &mut a);
        a[0]
    }
}

impl<T: Real> Parameterized<T> for MlpDynamics<T> {
    fn param_count(&self) -> usize {
        self.net.params.len()
    }
    fn write_params(&self, out: &mut [T]) {
        out[..self.net.params.len()].copy_from_slice(&self.net.params);
    }
    fn read_params(&mut self, src: &[T]) {
        self.net.params.copy_from_slice(src);
    }
}

impl<T: Real> Dynamics<T> for MlpDynamics<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn forward(&self, x: &[T], v: &[T], out: &mut [T]) {
        let acc = self.acceleration(x, v[0]);
        out[0] = x[0] + self.dt * x[1];
        out[1] = x[1] + self.dt * acc;
    }

    fn vjp(&self, x: &[T], v: &[T], cot: &[T], x_bar: &mut [T], v_bar: &mut [T], p_bar: Option<&mut [T]>) {
        x_bar[0] += cot[0];
        x_bar[1] += cot[0] * self.dt + cot[1];
        let acc_bar = [cot[1] * self.dt];
        let mut in_bar = [T::zero(); 3];
        self.net.backward(&[x[0], x[1], v[0]], &acc_bar, &mut in_bar, p_bar);
        x_bar[0] += in_bar[0];
        x_bar[1] += in_bar[1];
        v_bar[0] += in_bar[2];
    }

    fn spec(&self) -> DynamicsSpec {
        DynamicsSpec::Mlp { hidden: self.net.hidden, dt: self.dt.to_f64_lossy() }
    }

    fn boxed_clone(&self) -> Box<dyn Dynamics<T>> {
        Box::new(self.clone())
    }
}

/// Pendulum cost network: `q(theta, theta_dot) = ||net(theta, theta_dot)||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCost<T> {
    net: TanhNet<T>,
}

impl<T: Real> MlpCost<T> {
    pub fn new(hidden: usize, outputs: usize) -> Self {
        Self { net: TanhNet::new(2, hidden, outputs) }
    }

    pub fn initialized(hidden: usize, outputs: usize, rng: &SeededRng) -> Self {
        let mut m = Self::new(hidden, outputs);
        m.net.init(rng);
        m
    }
}

impl<T: Real> Parameterized<T> for MlpCost<T> {
    fn param_count(&self) -> usize {
        self.net.params.len()
    }
    fn write_params(&self, out: &mut [T]) {
        out[..self.net.params.len()].copy_from_slice(&self.net.params);
    }
    fn read_params(&mut self, src: &[T]) {
        self.net.params.copy_from_slice(src);
    }
}

impl<T: Real> StateCost<T> for MlpCost<T> {
    fn state_dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[T]) -> T {
        let mut out = Scratch::new(self.net.outputs);
        self.net.forward(&x[..2], &mut out);
        out.iter().map(|&o| o * o).sum()
    }

    fn vjp(&self, x: &[T], cot: T, x_bar: &mut [T], p_bar: Option<&mut [T]>) {
        let mut out = Scratch::new(self.net.outputs);
        self.net.forward(&x[..2], &mut out);
        let two = T::lit(2.0);
        for o in out.iter_mut() {
            *o = two * *o * cot;
        }
        self.net.backward(&x[..2], &out, x_bar, p_bar);
    }

    fn spec(&self) -> CostSpec {
        CostSpec::Mlp { hidden: self.net.hidden, outputs: self.net.outputs }
    }

    fn boxed_clone(&self) -> Box<dyn StateCost<T>> {
        Box::new(self.clone())
    }
}
