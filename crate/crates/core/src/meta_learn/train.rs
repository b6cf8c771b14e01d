use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};

use super::{laml_step, maml_step, AcousticModel, MamlMode, MetaModelState, MetaObjective, TaskBatch, TaskPool};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Laml,
    Maml,
    Fomaml,
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "laml" => Ok(Procedure::Laml),
            "maml" => Ok(Procedure::Maml),
            "fomaml" | "firstordermaml" => Ok(Procedure::Fomaml),
            other => Err(Error::InvalidArgument(format!("unknown procedure {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaTrainConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub outer: AdamConfig,
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub procedure: Procedure,
    pub seed: u64,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        MetaTrainConfig {
            hidden: 32,
            batch_size: 16,
            outer: AdamConfig::default(),
            inner_steps: 1,
            inner_lr: 0.01,
            procedure: Procedure::Laml,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetaTrainRun {
    pub model: AcousticModel,
    pub state: MetaModelState,
    /// Summed task loss of every outer step (post-adaptation for MAML).
    pub losses: Vec<f64>,
}

/// Meta-trains a fresh acoustic model. Each outer step draws one batch per
/// task, in task order, from a single seeded stream.
pub fn meta_train(config: &MetaTrainConfig, pools: &[TaskPool], steps: usize) -> Result<MetaTrainRun> {
    let first = pools.first().ok_or_else(|| Error::InvalidArgument("meta-training needs at least one task".into()))?;
    if first.inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::InvalidConfig("batch_size and hidden must be positive".into()));
    }
    let model = AcousticModel::new(first.inputs[0].len(), config.hidden, first.targets[0].len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = model.mlp.init(&mut rng);
    let mut state = MetaModelState::with_adam(params, config.outer);
    let mut losses = Vec::with_capacity(steps);

    for _ in 0..steps {
        let batches: Vec<TaskBatch> = pools.iter().map(|p| p.sample(config.batch_size, &mut rng)).collect();
        let loss = match config.procedure {
            Procedure::Laml => laml_step(&model, &mut state, &batches)?,
            Procedure::Maml | Procedure::Fomaml => {
                let mode =
                    if config.procedure == Procedure::Maml { MamlMode::SecondOrder } else { MamlMode::FirstOrder };
                maml_step(&model, &mut state, &batches, &batches, config.inner_steps, config.inner_lr, mode)?
            }
        };
        losses.push(loss);
    }
    Ok(MetaTrainRun { model, state, losses })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneOptions {
    pub steps: usize,
    pub adam: AdamConfig,
    /// Keep a copy of the parameters every this many steps (0: none).
    pub snapshot_every: usize,
}

impl Default for FinetuneOptions {
    fn default() -> Self {
        FinetuneOptions { steps: 100, adam: AdamConfig::default(), snapshot_every: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneRun {
    pub params: Vec<f64>,
    /// Mean corpus loss; entry `k` is measured after `k` steps.
    pub losses: Vec<f64>,
    /// `(step, params)`, including step 0 and the final step when
    /// snapshotting is enabled.
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

fn corpus_loss(model: &AcousticModel, params: &[f64], corpus: &[TaskBatch]) -> Result<f64> {
    let mut total = 0.0;
    for b in corpus {
        total += model.loss(params, b)?;
    }
    Ok(total / corpus.len() as f64)
}

/// Plain supervised Adam from `init`; step `k` uses `corpus[k % len]`.
pub fn finetune(
    model: &AcousticModel,
    init: &[f64],
    corpus: &[TaskBatch],
    options: &FinetuneOptions,
) -> Result<FinetuneRun> {
    if corpus.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut params = init.to_vec();
    let mut adam = Adam::new(options.adam, params.len());
    let mut losses = vec![corpus_loss(model, &params, corpus)?];
    let mut snapshots = Vec::new();
    if options.snapshot_every > 0 {
        snapshots.push((0, params.clone()));
    }
    for step in 0..options.steps {
        let (_, grad) = model.gradient(&params, &corpus[step % corpus.len()])?;
        adam.step(&mut params, &grad)?;
        losses.push(corpus_loss(model, &params, corpus)?);
        let done = step + 1;
        if options.snapshot_every > 0 && (done % options.snapshot_every == 0 || done == options.steps) {
            snapshots.push((done, params.clone()));
        }
    }
    Ok(FinetuneRun { params, losses, snapshots })
}

/// First index at which the loss is at or below `target`.
pub fn steps_to_reach(losses: &[f64], target: f64) -> Option<usize> {
    losses.iter().position(|&l| l <= target)
}
