use crate::checkpoint::{Checkpoint, Tensor};
use crate::error::{Error, Result};
use crate::nn::{lift_with, Mlp, Scalar};

use super::{MetaObjective, TaskBatch};

/// Per-phoneme acoustic model: articulatory vector → `tanh` hidden layer →
/// `K`-dim frame. The stand-in for a full TTS acoustic model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcousticModel {
    pub mlp: Mlp,
}

impl AcousticModel {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        AcousticModel { mlp: Mlp::tanh(input, hidden, output) }
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output
    }

    pub fn num_params(&self) -> usize {
        self.mlp.num_params()
    }

    /// Output for a single input vector.
    pub fn predict(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.mlp.check(params.len(), x.len())?;
        Ok(self.mlp.forward(params, x).output)
    }

    pub fn params_to_tensors(&self, params: &[f64], prefix: &str) -> Vec<Tensor> {
        self.mlp
            .layout()
            .into_iter()
            .map(|(name, rows, cols, offset)| {
                let shape = if cols == 1 { vec![rows] } else { vec![rows, cols] };
                let data = params[offset..offset + rows * cols].to_vec();
                Tensor { name: format!("{prefix}{name}"), shape, data }
            })
            .collect()
    }

    /// Recovers the model shape and flat parameters from `w1, b1, w2, b2`.
    pub fn params_from_checkpoint(ck: &Checkpoint, prefix: &str) -> Result<(Self, Vec<f64>)> {
        let w1 = ck.require(&format!("{prefix}w1"))?;
        let w2 = ck.require(&format!("{prefix}w2"))?;
        if w1.shape.len() != 2 || w2.shape.len() != 2 || w2.shape[1] != w1.shape[0] {
            return Err(Error::Checkpoint("inconsistent acoustic model shapes".into()));
        }
        let model = AcousticModel::new(w1.shape[1], w1.shape[0], w2.shape[0]);
        let mut params = Vec::with_capacity(model.mlp.num_params());
        for (name, rows, cols, _) in model.mlp.layout() {
            let t = ck.require(&format!("{prefix}{name}"))?;
            if t.data.len() != rows * cols {
                return Err(Error::Checkpoint(format!("tensor {:?} has wrong size", t.name)));
            }
            params.extend_from_slice(&t.data);
        }
        Ok((model, params))
    }

    fn check_batch(&self, params: &[f64], batch: &TaskBatch) -> Result<()> {
        if batch.inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if params.len() != self.mlp.num_params() {
            return Err(Error::DimensionMismatch { expected: self.mlp.num_params(), found: params.len() });
        }
        for (x, y) in batch.inputs.iter().zip(&batch.targets) {
            if x.len() != self.mlp.input {
                return Err(Error::DimensionMismatch { expected: self.mlp.input, found: x.len() });
            }
            if y.len() != self.mlp.output {
                return Err(Error::DimensionMismatch { expected: self.mlp.output, found: y.len() });
            }
        }
        Ok(())
    }

    /// Mean squared error over frames and dims, with its gradient.
    fn loss_grad<S: Scalar>(&self, params: &[S], batch: &TaskBatch) -> (S, Vec<S>) {
        let scale = S::from_f64(1.0 / (batch.inputs.len() * self.mlp.output) as f64);
        let two = S::from_f64(2.0);
        let mut loss = S::zero();
        let mut grad = vec![S::zero(); params.len()];
        for (x, y) in batch.inputs.iter().zip(&batch.targets) {
            let x = lift_scalar::<S>(x);
            let trace = self.mlp.forward(params, &x);
            let g_out: Vec<S> = trace
                .output
                .iter()
                .zip(y)
                .map(|(&o, &t)| {
                    let diff = o - S::from_f64(t);
                    loss += diff * diff;
                    two * diff * scale
                })
                .collect();
            self.mlp.backward(params, &x, &trace, &g_out, &mut grad);
        }
        (loss * scale, grad)
    }
}

fn lift_scalar<S: Scalar>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&v| S::from_f64(v)).collect()
}

/// Applies the model to every input.
pub fn forward(model: &AcousticModel, params: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| model.predict(params, x)).collect()
}

pub fn task_loss(model: &AcousticModel, params: &[f64], batch: &TaskBatch) -> Result<f64> {
    model.loss(params, batch)
}

impl MetaObjective for AcousticModel {
    type Batch = TaskBatch;

    fn loss(&self, params: &[f64], batch: &TaskBatch) -> Result<f64> {
        self.check_batch(params, batch)?;
        let mut loss = 0.0;
        for (x, y) in batch.inputs.iter().zip(&batch.targets) {
            let out = self.mlp.forward(params, x).output;
            loss += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
        }
        Ok(loss / (batch.inputs.len() * self.mlp.output) as f64)
    }

    fn gradient(&self, params: &[f64], batch: &TaskBatch) -> Result<(f64, Vec<f64>)> {
        self.check_batch(params, batch)?;
        Ok(self.loss_grad(params, batch))
    }

    fn hessian_vector(&self, params: &[f64], batch: &TaskBatch, v: &[f64]) -> Result<Vec<f64>> {
        self.check_batch(params, batch)?;
        if v.len() != params.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), found: v.len() });
        }
        let (_, grad) = self.loss_grad(&lift_with(params, v), batch);
        Ok(grad.into_iter().map(|g| g.eps).collect())
    }
}
