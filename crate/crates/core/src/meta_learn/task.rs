use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::artic::{FeatureTable, ARTIC_DIM};
use crate::error::{Error, Result};

/// A batch `Bᵢ` for one task: inputs and the frames they should produce.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBatch {
    pub task: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl TaskBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// `y = W·x + b`, row-major `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearMap {
    /// Gaussian weights with standard deviation `scale / sqrt(cols)`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let std = scale / (cols as f64).sqrt();
        let mut draw = || -> f64 { rng.sample::<f64, _>(StandardNormal) };
        let weights = (0..rows * cols).map(|_| draw() * std).collect();
        let bias = (0..rows).map(|_| draw() * 0.1 * scale).collect();
        LinearMap { rows, cols, weights, bias }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Tasks sharing one base map from articulatory vectors to frames; each task
/// adds its own speaker offset.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskFamily {
    pub base: LinearMap,
    pub offset_scale: f64,
}

impl TaskFamily {
    pub fn new(frame_dim: usize, offset_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TaskFamily { base: LinearMap::random(frame_dim, ARTIC_DIM, 1.0, &mut rng), offset_scale }
    }

    pub fn frame_dim(&self) -> usize {
        self.base.rows
    }

    /// Task with a Gaussian speaker offset drawn from `seed`.
    pub fn task(&self, id: usize, inventory: Vec<String>, noise: f64, seed: u64) -> TaskSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset = (0..self.frame_dim()).map(|_| rng.sample::<f64, _>(StandardNormal) * self.offset_scale).collect();
        TaskSpec { id, inventory, base: self.base.clone(), offset, noise }
    }
}

/// One synthetic "language + speaker".
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub id: usize,
    pub inventory: Vec<String>,
    pub base: LinearMap,
    pub offset: Vec<f64>,
    pub noise: f64,
}

impl TaskSpec {
    /// Noise-free frame for an articulatory vector.
    pub fn target(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.base.apply(x);
        for (v, o) in y.iter_mut().zip(&self.offset) {
            *v += o;
        }
        y
    }

    pub fn pool(&self, table: &FeatureTable) -> Result<TaskPool> {
        if self.inventory.is_empty() {
            return Err(Error::InvalidArgument(format!("task {} has an empty inventory", self.id)));
        }
        let mut pool =
            TaskPool { task: self.id, labels: Vec::new(), inputs: Vec::new(), targets: Vec::new(), noise: self.noise };
        for s in &self.inventory {
            let v = table.get(s).ok_or_else(|| Error::UnknownSymbol { position: 0, cluster: s.clone() })?;
            pool.labels.push(s.clone());
            pool.inputs.push(v.as_slice().to_vec());
            pool.targets.push(self.target(v.as_slice()));
        }
        Ok(pool)
    }

    /// All inventory items once, without noise.
    pub fn full_batch(&self, table: &FeatureTable) -> Result<TaskBatch> {
        let pool = self.pool(table)?;
        Ok(TaskBatch { task: self.id, inputs: pool.inputs, targets: pool.targets })
    }
}

/// Items a task's batches are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskPool {
    pub task: usize,
    pub labels: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Standard deviation of Gaussian noise added to sampled targets.
    pub noise: f64,
}

impl TaskPool {
    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> TaskBatch {
        let mut inputs = Vec::with_capacity(batch_size);
        let mut targets = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let k = rng.random_range(0..self.inputs.len());
            inputs.push(self.inputs[k].clone());
            let mut y = self.targets[k].clone();
            if self.noise > 0.0 {
                for v in &mut y {
                    *v += self.noise * rng.sample::<f64, _>(StandardNormal);
                }
            }
            targets.push(y);
        }
        TaskBatch { task: self.task, inputs, targets }
    }

    pub fn as_batch(&self) -> TaskBatch {
        TaskBatch { task: self.task, inputs: self.inputs.clone(), targets: self.targets.clone() }
    }
}

/// `size` distinct symbols drawn from the table, skipping `exclude` and
/// special rows, in table order.
pub fn random_inventory<R: Rng + ?Sized>(
    table: &FeatureTable,
    size: usize,
    exclude: &[String],
    rng: &mut R,
) -> Vec<String> {
    use crate::artic::PhonemeCategory;
    let excluded: Vec<String> = exclude
        .iter()
        .map(|s| table.row_of(s).map(|r| table.symbol(r).to_string()).unwrap_or_else(|| s.clone()))
        .collect();
    let candidates: Vec<usize> = (0..table.len())
        .filter(|&r| table.category(r) != PhonemeCategory::Special)
        .filter(|&r| !excluded.iter().any(|e| e == table.symbol(r)))
        .collect();
    let mut picked: Vec<usize> = candidates.choose_multiple(rng, size.min(candidates.len())).copied().collect();
    picked.sort_unstable();
    picked.into_iter().map(|r| table.symbol(r).to_string()).collect()
}
