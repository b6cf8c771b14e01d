//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Forward and backward passes are generic over [`Scalar`], so running the
//! backward pass on [`Dual`] numbers seeded with a direction `v` yields the
//! Hessian-vector product `H·v` exactly (forward-over-reverse).

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn from_f64(x: f64) -> Self;
    fn value(self) -> f64;
    fn tanh(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// First-order dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Dual { re, eps }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.re / o.re, (self.eps * o.re - self.re * o.eps) / (o.re * o.re))
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl Scalar for Dual {
    fn from_f64(x: f64) -> Self {
        Dual::new(x, 0.0)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual::new(t, (1.0 - t * t) * self.eps)
    }
}

/// Shape of a dense network: `input → output` when `hidden` is `None`,
/// otherwise `input → hidden → tanh → output`.
///
/// Flat parameter layout: `W1` (row-major, `hidden × input`), `b1`, `W2`
/// (`output × hidden`), `b2`; the single-layer case stores `W`, `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub input: usize,
    pub hidden: Option<usize>,
    pub output: usize,
}

/// Activations kept from the forward pass.
#[derive(Clone, Debug)]
pub struct Trace<S> {
    pub hidden: Vec<S>,
    pub output: Vec<S>,
}

impl Mlp {
    pub fn linear(input: usize, output: usize) -> Self {
        Mlp { input, hidden: None, output }
    }

    pub fn tanh(input: usize, hidden: usize, output: usize) -> Self {
        Mlp { input, hidden: Some(hidden), output }
    }

    pub fn num_params(&self) -> usize {
        match self.hidden {
            None => self.output * self.input + self.output,
            Some(h) => h * self.input + h + self.output * h + self.output,
        }
    }

    /// `(name, rows, cols, offset)` of every tensor in the flat layout;
    /// biases have `cols == 1`.
    pub fn layout(&self) -> Vec<(&'static str, usize, usize, usize)> {
        match self.hidden {
            None => vec![("w", self.output, self.input, 0), ("b", self.output, 1, self.output * self.input)],
            Some(h) => {
                let w1 = 0;
                let b1 = h * self.input;
                let w2 = b1 + h;
                let b2 = w2 + self.output * h;
                vec![
                    ("w1", h, self.input, w1),
                    ("b1", h, 1, b1),
                    ("w2", self.output, h, w2),
                    ("b2", self.output, 1, b2),
                ]
            }
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, weights and biases alike.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.num_params());
        let layers: Vec<(usize, usize)> = match self.hidden {
            None => vec![(self.output, self.input)],
            Some(h) => vec![(h, self.input), (self.output, h)],
        };
        for (rows, cols) in layers {
            let bound = 1.0 / (cols as f64).sqrt();
            for _ in 0..rows * cols + rows {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        params
    }

    pub fn check(&self, params_len: usize, input_len: usize) -> Result<()> {
        if params_len != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), found: params_len });
        }
        if input_len != self.input {
            return Err(Error::DimensionMismatch { expected: self.input, found: input_len });
        }
        Ok(())
    }

    /// Callers must have checked dimensions with [`Mlp::check`].
    pub fn forward<S: Scalar>(&self, params: &[S], x: &[S]) -> Trace<S> {
        match self.hidden {
            None => {
                let output = affine(&params[..self.output * self.input], &params[self.output * self.input..], x);
                Trace { hidden: Vec::new(), output }
            }
            Some(h) => {
                let b1 = h * self.input;
                let w2 = b1 + h;
                let b2 = w2 + self.output * h;
                let mut hidden = affine(&params[..b1], &params[b1..w2], x);
                for a in hidden.iter_mut() {
                    *a = a.tanh();
                }
                let output = affine(&params[w2..b2], &params[b2..], &hidden);
                Trace { hidden, output }
            }
        }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`.
    pub fn backward<S: Scalar>(&self, params: &[S], x: &[S], trace: &Trace<S>, grad_output: &[S], grad: &mut [S]) {
        match self.hidden {
            None => {
                let (gw, gb) = grad.split_at_mut(self.output * self.input);
                affine_backward(x, grad_output, gw, gb);
            }
            Some(h) => {
                let b1 = h * self.input;
                let w2 = b1 + h;
                let b2 = w2 + self.output * h;
                let (g1, g2) = grad.split_at_mut(w2);
                let (gw2, gb2) = g2.split_at_mut(b2 - w2);
                affine_backward(&trace.hidden, grad_output, gw2, gb2);

                let weights2 = &params[w2..b2];
                let mut grad_hidden = vec![S::zero(); h];
                for (o, &go) in grad_output.iter().enumerate() {
                    let row = &weights2[o * h..(o + 1) * h];
                    for (gh, &w) in grad_hidden.iter_mut().zip(row) {
                        *gh += go * w;
                    }
                }
                for (gh, &a) in grad_hidden.iter_mut().zip(&trace.hidden) {
                    *gh = *gh * (S::from_f64(1.0) - a * a);
                }
                let (gw1, gb1) = g1.split_at_mut(b1);
                affine_backward(x, &grad_hidden, gw1, gb1);
            }
        }
    }
}

fn affine<S: Scalar>(w: &[S], b: &[S], x: &[S]) -> Vec<S> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let mut acc = bias;
            for (&wi, &xi) in w[r * cols..(r + 1) * cols].iter().zip(x) {
                acc += wi * xi;
            }
            acc
        })
        .collect()
}

fn affine_backward<S: Scalar>(x: &[S], grad_out: &[S], gw: &mut [S], gb: &mut [S]) {
    let cols = x.len();
    for (r, &go) in grad_out.iter().enumerate() {
        gb[r] += go;
        for (g, &xi) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g += go * xi;
        }
    }
}

pub(crate) fn lift_with(values: &[f64], direction: &[f64]) -> Vec<Dual> {
    values.iter().zip(direction).map(|(&v, &d)| Dual::new(v, d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_counts() {
        assert_eq!(Mlp::linear(4, 3).num_params(), 15);
        assert_eq!(Mlp::tanh(4, 3, 2).num_params(), 12 + 3 + 6 + 2);
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let mlp = Mlp::tanh(9, 4, 2);
        let p = mlp.init(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(p.len(), mlp.num_params());
        assert!(p[..40].iter().all(|v| v.abs() <= 1.0 / 3.0));
        assert!(p[40..].iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn dual_tanh_derivative() {
        let d = Dual::new(0.3, 1.0).tanh();
        let t = 0.3f64.tanh();
        assert_eq!(d.re, t);
        assert!((d.eps - (1.0 - t * t)).abs() < 1e-15);
    }
}
