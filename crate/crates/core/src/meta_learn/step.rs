use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Tensor};
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};

use super::MetaObjective;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MamlMode {
    /// Differentiate through the inner loop.
    SecondOrder,
    /// Use the gradient at the adapted parameters directly.
    FirstOrder,
}

/// Optimizer applied to the meta parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum OuterOptimizer {
    Adam(Adam),
    GradientDescent { lr: f64 },
}

impl OuterOptimizer {
    fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        match self {
            OuterOptimizer::Adam(adam) => adam.step(params, grad),
            OuterOptimizer::GradientDescent { lr } => {
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteGradient { task: None, inner_step: None });
                }
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
                Ok(())
            }
        }
    }
}

/// Meta parameters `Θ` and the state of their optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaModelState {
    pub params: Vec<f64>,
    pub optimizer: OuterOptimizer,
    pub step: u64,
}

impl MetaModelState {
    pub fn with_adam(params: Vec<f64>, config: AdamConfig) -> Self {
        let n = params.len();
        MetaModelState { params, optimizer: OuterOptimizer::Adam(Adam::new(config, n)), step: 0 }
    }

    pub fn with_gradient_descent(params: Vec<f64>, lr: f64) -> Self {
        MetaModelState { params, optimizer: OuterOptimizer::GradientDescent { lr }, step: 0 }
    }

    /// Optimizer tensors (`opt.*`) plus the step counter; model weights are
    /// written by the caller, which knows their layout.
    pub fn optimizer_tensors(&self) -> Vec<Tensor> {
        let mut out = vec![Tensor::scalar("meta.step", self.step as f64)];
        match &self.optimizer {
            OuterOptimizer::Adam(adam) => {
                let c = adam.config;
                out.push(Tensor::vector("opt.adam.config", vec![c.lr, c.beta1, c.beta2, c.eps]));
                out.push(Tensor::scalar("opt.adam.step", adam.step as f64));
                out.push(Tensor::vector("opt.adam.m", adam.m.clone()));
                out.push(Tensor::vector("opt.adam.v", adam.v.clone()));
            }
            OuterOptimizer::GradientDescent { lr } => out.push(Tensor::scalar("opt.sgd.lr", *lr)),
        }
        out
    }

    pub fn from_checkpoint(ck: &Checkpoint, params: Vec<f64>) -> Result<Self> {
        let step = ck.require("meta.step")?.data[0] as u64;
        let optimizer = if let Some(lr) = ck.get("opt.sgd.lr") {
            OuterOptimizer::GradientDescent { lr: lr.data[0] }
        } else {
            let c = &ck.require("opt.adam.config")?.data;
            if c.len() != 4 {
                return Err(Error::Checkpoint("opt.adam.config must hold 4 values".into()));
            }
            let m = ck.require("opt.adam.m")?.data.clone();
            let v = ck.require("opt.adam.v")?.data.clone();
            if m.len() != params.len() || v.len() != params.len() {
                return Err(Error::Checkpoint("optimizer moments do not match parameters".into()));
            }
            OuterOptimizer::Adam(Adam {
                config: AdamConfig { lr: c[0], beta1: c[1], beta2: c[2], eps: c[3] },
                step: ck.require("opt.adam.step")?.data[0] as u64,
                m,
                v,
            })
        };
        Ok(MetaModelState { params, optimizer, step })
    }
}

fn check_finite(grad: &[f64], task: usize, inner_step: usize) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { task: Some(task), inner_step: Some(inner_step) })
    }
}

/// Sums per-task `(loss, gradient)` pairs in task order.
fn reduce(n_params: usize, per_task: Vec<(f64, Vec<f64>)>) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in per_task {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    (loss, grad)
}

/// One optimizer step on `Σᵢ L(Θ, Bᵢ)`. Returns the summed loss at the
/// pre-update parameters.
pub fn laml_step<O: MetaObjective>(objective: &O, state: &mut MetaModelState, batches: &[O::Batch]) -> Result<f64> {
    if batches.is_empty() {
        return Err(Error::InvalidArgument("at least one task batch is required".into()));
    }
    let params = &state.params;
    let per_task = batches
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let (l, g) = objective.gradient(params, b)?;
            check_finite(&g, i, 0)?;
            Ok((l, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let (loss, grad) = reduce(params.len(), per_task);
    state.optimizer.apply(&mut state.params, &grad)?;
    state.step += 1;
    Ok(loss)
}

/// Gradient of `Σᵢ L(θᵢ,d, outerᵢ)` with respect to `params`, where `θᵢ,d`
/// results from `inner_steps` gradient-descent steps on `innerᵢ`. Also
/// returns the summed post-adaptation loss.
pub fn meta_gradient<O: MetaObjective>(
    objective: &O,
    params: &[f64],
    inner: &[O::Batch],
    outer: &[O::Batch],
    inner_steps: usize,
    inner_lr: f64,
    mode: MamlMode,
) -> Result<(f64, Vec<f64>)> {
    if inner.len() != outer.len() || outer.is_empty() {
        return Err(Error::InvalidArgument("need one inner and one outer batch per task".into()));
    }
    if !(inner_lr > 0.0) {
        return Err(Error::InvalidArgument("inner_lr must be positive".into()));
    }
    let per_task = inner
        .par_iter()
        .zip(outer.par_iter())
        .enumerate()
        .map(|(i, (b_in, b_out))| {
            let mut theta = params.to_vec();
            let mut trajectory = Vec::new();
            for k in 0..inner_steps {
                let (_, g) = objective.gradient(&theta, b_in)?;
                check_finite(&g, i, k)?;
                if mode == MamlMode::SecondOrder {
                    trajectory.push(theta.clone());
                }
                for (t, gv) in theta.iter_mut().zip(&g) {
                    *t -= inner_lr * gv;
                }
            }
            let (loss, mut g) = objective.gradient(&theta, b_out)?;
            check_finite(&g, i, inner_steps)?;
            // dθ_{k+1}/dθ_k = I - α H(θ_k), applied right to left
            for (k, theta_k) in trajectory.iter().enumerate().rev() {
                let hv = objective.hessian_vector(theta_k, b_in, &g)?;
                check_finite(&hv, i, k)?;
                for (gv, h) in g.iter_mut().zip(&hv) {
                    *gv -= inner_lr * h;
                }
            }
            Ok((loss, g))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(params.len(), per_task))
}

/// MAML outer step: [`meta_gradient`] followed by one optimizer update.
/// Returns the summed post-adaptation loss.
pub fn maml_step<O: MetaObjective>(
    objective: &O,
    state: &mut MetaModelState,
    inner: &[O::Batch],
    outer: &[O::Batch],
    inner_steps: usize,
    inner_lr: f64,
    mode: MamlMode,
) -> Result<f64> {
    let (loss, grad) = meta_gradient(objective, &state.params, inner, outer, inner_steps, inner_lr, mode)?;
    state.optimizer.apply(&mut state.params, &grad)?;
    state.step += 1;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::super::toy::{LinearToy, Quadratic};
    use super::*;

    #[test]
    fn laml_scalar_gradient_descent() {
        // two tasks, each L = θ² (center 0)
        let obj = Quadratic;
        let mut state = MetaModelState::with_gradient_descent(vec![1.0], 0.1);
        laml_step(&obj, &mut state, &[vec![0.0], vec![0.0]]).unwrap();
        assert!((state.params[0] - 0.6).abs() < 1e-15);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn symmetric_tasks_cancel() {
        for lr in [0.05, 0.25, 0.45] {
            let batches = [vec![1.0], vec![-1.0]];
            let (_, g) = meta_gradient(&Quadratic, &[0.0], &batches, &batches, 1, lr, MamlMode::SecondOrder).unwrap();
            assert_eq!(g, vec![0.0]);
        }
    }

    #[test]
    fn quadratic_closed_form() {
        let batches = [vec![1.0], vec![2.0]];
        let (_, g) = meta_gradient(&Quadratic, &[0.0], &batches, &batches, 1, 0.25, MamlMode::SecondOrder).unwrap();
        assert!((g[0] + 1.5).abs() < 1e-12);
        // first-order drops the (1 - 2α) Jacobian factor
        let (_, g) = meta_gradient(&Quadratic, &[0.0], &batches, &batches, 1, 0.25, MamlMode::FirstOrder).unwrap();
        assert!((g[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn modes_agree_on_linear_losses() {
        let batches = [vec![1.0, -2.0, 0.5], vec![0.3, 0.3, -1.0]];
        for d in 0..4 {
            let a =
                meta_gradient(&LinearToy, &[0.1, 0.2, 0.3], &batches, &batches, d, 0.1, MamlMode::SecondOrder).unwrap();
            let b =
                meta_gradient(&LinearToy, &[0.1, 0.2, 0.3], &batches, &batches, d, 0.1, MamlMode::FirstOrder).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut state = MetaModelState::with_gradient_descent(vec![1.0], 0.1);
        assert!(laml_step(&Quadratic, &mut state, &[]).is_err());
        assert!(meta_gradient(&Quadratic, &[0.0], &[vec![1.0]], &[vec![1.0]], 1, 0.0, MamlMode::FirstOrder).is_err());
        let nan = [vec![f64::NAN]];
        assert!(matches!(
            meta_gradient(&Quadratic, &[0.0], &nan, &nan, 2, 0.1, MamlMode::FirstOrder),
            Err(Error::NonFiniteGradient { task: Some(0), inner_step: Some(0) })
        ));
    }

    #[test]
    fn optimizer_state_round_trips() {
        let mut state = MetaModelState::with_adam(vec![1.0, 2.0], AdamConfig::default());
        laml_step(&Quadratic, &mut state, &[vec![0.5, 0.5]]).unwrap();
        let mut ck = Checkpoint::new();
        for t in state.optimizer_tensors() {
            ck.push(t);
        }
        let back = MetaModelState::from_checkpoint(&ck, state.params.clone()).unwrap();
        assert_eq!(back, state);
    }
}
