//! Meta-learning over synthetic "languages".
//!
//! Three outer-loop procedures share one interface:
//!
//! * **LAML**: one optimizer step on `Σᵢ L(Θ, Bᵢ)`, no inner loop;
//! * **MAML**: per task, `d` plain gradient-descent steps from `Θ`, then the
//!   gradient of `Σᵢ L(θᵢ,d, Bᵢ)` with respect to `Θ`, differentiating
//!   through the inner loop (Hessian-vector products);
//! * **first-order MAML**: as MAML, but the gradient at `θᵢ,d` is applied to
//!   `Θ` directly.
//!
//! With `d = 0` all three coincide bit for bit.

mod corpus;
mod model;
mod step;
mod task;
pub mod toy;
mod train;

pub use corpus::{load_corpus, parse_corpus, write_corpus, CorpusRecord};
pub use model::{forward, task_loss, AcousticModel};
pub use step::{laml_step, maml_step, meta_gradient, MamlMode, MetaModelState, OuterOptimizer};
pub use task::{random_inventory, LinearMap, TaskBatch, TaskFamily, TaskPool, TaskSpec};
pub use train::{
    finetune, meta_train, steps_to_reach, FinetuneOptions, FinetuneRun, MetaTrainConfig, MetaTrainRun, Procedure,
};

use crate::error::Result;

/// A differentiable training objective over flat parameters.
pub trait MetaObjective: Sync {
    type Batch: Sync;

    fn loss(&self, params: &[f64], batch: &Self::Batch) -> Result<f64>;

    /// Loss and its gradient.
    fn gradient(&self, params: &[f64], batch: &Self::Batch) -> Result<(f64, Vec<f64>)>;

    /// `∇²L(params)·v`.
    fn hessian_vector(&self, params: &[f64], batch: &Self::Batch, v: &[f64]) -> Result<Vec<f64>>;
}
