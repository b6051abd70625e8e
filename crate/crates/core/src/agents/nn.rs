//! Small fully connected networks over a flat parameter vector, with batched
//! forward passes and hand-written backpropagation.
//!
//! Batches are column-major: an input batch is `in × B`, one sample per column.

use nalgebra::{DMatrix, DMatrixView, DVectorView};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Softplus,
    Tanh,
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Softplus => softplus(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and output `a`.
    fn slope(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(z),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Layer widths including input and output.
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Architecture {
    pub fn mlp(input: usize, hidden: &[usize], output: usize, out_act: Activation) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self { widths, hidden: Activation::Softplus, output: out_act }
    }

    pub fn input(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn act(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            self.hidden
        }
    }
}

/// A network: architecture descriptor plus flat parameters. Layer l stores
/// its weight matrix (out × in, column-major) followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximatorParams {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
pub struct Trace {
    /// Layer inputs; `acts[0]` is the network input, the last entry the output.
    acts: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.acts.last().unwrap()
    }
}

impl ApproximatorParams {
    /// Glorot-uniform hidden layers, zero biases, and a small uniform final
    /// layer (±3e−3) so that initial outputs sit near zero.
    pub fn init(arch: Architecture, rng: &mut impl Rng) -> Self {
        let mut values = Vec::with_capacity(arch.param_count());
        let last = arch.layers() - 1;
        for (l, w) in arch.widths.windows(2).enumerate() {
            let k = if l == last { 3e-3 } else { (6.0 / (w[0] + w[1]) as f64).sqrt() };
            values.extend((0..w[0] * w[1]).map(|_| rng.random_range(-k..=k)));
            values.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self { arch, values }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self { arch, values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn offsets(&self, layer: usize) -> (usize, usize, usize) {
        let off: usize = self.arch.widths.windows(2).take(layer).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.arch.widths[layer], self.arch.widths[layer + 1]);
        (off, i, o)
    }

    fn layer(&self, layer: usize) -> (DMatrixView<'_, f64>, DVectorView<'_, f64>) {
        let (off, i, o) = self.offsets(layer);
        (
            DMatrixView::from_slice(&self.values[off..off + i * o], o, i),
            DVectorView::from_slice(&self.values[off + i * o..off + i * o + o], o),
        )
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.arch.input(), "input width mismatch");
        let mut a = x.clone();
        for l in 0..self.arch.layers() {
            let (w, b) = self.layer(l);
            let mut z = w * &a;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            let act = self.arch.act(l);
            z.apply(|v| *v = act.apply(*v));
            a = z;
        }
        a
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        self.forward(&DMatrix::from_column_slice(x.len(), 1, x)).as_slice().to_vec()
    }

    pub fn forward_trace(&self, x: &DMatrix<f64>) -> Trace {
        assert_eq!(x.nrows(), self.arch.input(), "input width mismatch");
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.arch.layers());
        for l in 0..self.arch.layers() {
            let (w, b) = self.layer(l);
            let mut z = w * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b;
            }
            let act = self.arch.act(l);
            let a = z.map(|v| act.apply(v));
            pre.push(z);
            acts.push(a);
        }
        Trace { acts, pre }
    }

    /// Given ∂L/∂output for every sample, returns ∂L/∂params (summed over the
    /// batch) and ∂L/∂input.
    pub fn backward(&self, trace: &Trace, grad_out: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let mut grad = vec![0.0; self.values.len()];
        let mut delta = grad_out.clone();
        for l in (0..self.arch.layers()).rev() {
            let act = self.arch.act(l);
            let (z, a) = (&trace.pre[l], &trace.acts[l + 1]);
            delta.zip_zip_apply(z, a, |d, z, a| *d *= act.slope(z, a));
            let (off, i, o) = self.offsets(l);
            let dw = &delta * trace.acts[l].transpose();
            grad[off..off + i * o].copy_from_slice(dw.as_slice());
            for (r, g) in grad[off + i * o..off + i * o + o].iter_mut().enumerate() {
                *g = delta.row(r).sum();
            }
            let (w, _) = self.layer(l);
            delta = w.transpose() * &delta;
        }
        (grad, delta)
    }

    pub fn axpy(&mut self, alpha: f64, g: &[f64]) {
        assert_eq!(g.len(), self.values.len());
        for (p, d) in self.values.iter_mut().zip(g) {
            *p += alpha * d;
        }
    }

    /// self ← τ·online + (1 − τ)·self.
    pub fn soft_update(&mut self, online: &Self, tau: f64) {
        assert_eq!(self.arch, online.arch, "target and online architectures differ");
        for (t, o) in self.values.iter_mut().zip(&online.values) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimiser with its own moment state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        let n_state = if kind == OptimizerKind::Adam { n } else { 0 };
        Self { kind, lr, m: vec![0.0; n_state], v: vec![0.0; n_state], t: 0 }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, params: &mut ApproximatorParams, grad: &[f64]) {
        assert_eq!(grad.len(), params.values.len());
        match self.kind {
            OptimizerKind::Sgd => params.axpy(-self.lr, grad),
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - BETA1.powi(self.t as i32);
                let c2 = 1.0 - BETA2.powi(self.t as i32);
                for (k, p) in params.values.iter_mut().enumerate() {
                    let g = grad[k];
                    self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
                    self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
                    *p -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
