//! Embedding functions that project articulatory vectors into a learned
//! phoneme-embedding space, and the trainer that fits them to gold vectors.
//!
//! The objective is the L1-minus-cosine distance
//! `d(A, B) = Σ|Aᵢ - Bᵢ| - (A·B) / (‖A‖‖B‖)`, whose minimum at `A = B` is −1.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artic::{FeatureBlock, FeatureTable};
use crate::checkpoint::{Checkpoint, Tensor};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::optim::{Adam, AdamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Linear,
    NonLinear,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "linear" => Ok(Architecture::Linear),
            "nonlinear" => Ok(Architecture::NonLinear),
            other => Err(Error::InvalidArgument(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub architecture: Architecture,
    pub input_dim: usize,
    /// Ignored for [`Architecture::Linear`].
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl EmbeddingConfig {
    pub fn new(architecture: Architecture, block: FeatureBlock) -> Self {
        EmbeddingConfig { architecture, input_dim: block.dim(), hidden_dim: 100, output_dim: 512, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig("embedding dims must be positive".into()));
        }
        if self.architecture == Architecture::NonLinear && self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("non-linear embedding needs hidden_dim >= 1".into()));
        }
        Ok(())
    }

    pub fn mlp(&self) -> Mlp {
        match self.architecture {
            Architecture::Linear => Mlp::linear(self.input_dim, self.output_dim),
            Architecture::NonLinear => Mlp::tanh(self.input_dim, self.hidden_dim, self.output_dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub mlp: Mlp,
    pub weights: Vec<f64>,
}

impl EmbeddingParams {
    pub fn init(config: &EmbeddingConfig) -> Result<Self> {
        config.validate()?;
        let mlp = config.mlp();
        let weights = mlp.init(&mut ChaCha8Rng::seed_from_u64(config.seed));
        Ok(EmbeddingParams { mlp, weights })
    }

    pub fn zeros(mlp: Mlp) -> Self {
        EmbeddingParams { mlp, weights: vec![0.0; mlp.num_params()] }
    }

    pub fn from_weights(mlp: Mlp, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != mlp.num_params() {
            return Err(Error::DimensionMismatch { expected: mlp.num_params(), found: weights.len() });
        }
        Ok(EmbeddingParams { mlp, weights })
    }

    pub fn architecture(&self) -> Architecture {
        match self.mlp.hidden {
            None => Architecture::Linear,
            Some(_) => Architecture::NonLinear,
        }
    }

    pub fn embed(&self, v: &[f64]) -> Result<Vec<f64>> {
        embed(self, v)
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<Tensor> {
        self.mlp
            .layout()
            .into_iter()
            .map(|(name, rows, cols, offset)| {
                let shape = if cols == 1 { vec![rows] } else { vec![rows, cols] };
                Tensor {
                    name: format!("{prefix}{name}"),
                    shape,
                    data: self.weights[offset..offset + rows * cols].to_vec(),
                }
            })
            .collect()
    }

    /// Reads `w, b` (linear) or `w1, b1, w2, b2` (non-linear) under `prefix`.
    pub fn from_checkpoint(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let mlp = if let Some(w) = ck.get(&format!("{prefix}w")) {
            match w.shape[..] {
                [out, inp] => Mlp::linear(inp, out),
                _ => return Err(Error::Checkpoint(format!("{prefix}w is not a matrix"))),
            }
        } else {
            let w1 = ck.require(&format!("{prefix}w1"))?;
            let w2 = ck.require(&format!("{prefix}w2"))?;
            match (&w1.shape[..], &w2.shape[..]) {
                (&[hidden, inp], &[out, h2]) if h2 == hidden => Mlp::tanh(inp, hidden, out),
                _ => return Err(Error::Checkpoint("inconsistent embedding shapes".into())),
            }
        };
        let mut weights = Vec::with_capacity(mlp.num_params());
        for (name, rows, cols, _) in mlp.layout() {
            let t = ck.require(&format!("{prefix}{name}"))?;
            if t.data.len() != rows * cols {
                return Err(Error::Checkpoint(format!("tensor {:?} has wrong size", t.name)));
            }
            weights.extend_from_slice(&t.data);
        }
        Ok(EmbeddingParams { mlp, weights })
    }
}

/// `W·v + b` for the linear design, `W₂·tanh(W₁·v + b₁) + b₂` otherwise.
pub fn embed(params: &EmbeddingParams, v: &[f64]) -> Result<Vec<f64>> {
    params.mlp.check(params.weights.len(), v.len())?;
    Ok(params.mlp.forward(&params.weights, v).output)
}

fn norms_and_dot(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        aa += x * x;
        bb += y * y;
        ab += x * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((aa.sqrt(), bb.sqrt(), ab))
}

/// L1 distance minus cosine similarity.
pub fn artic_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb, ab) = norms_and_dot(a, b)?;
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok(l1 - ab / (na * nb))
}

/// Distance and its gradient with respect to `a`. The L1 subgradient is 0
/// where `aᵢ = bᵢ`.
pub fn artic_distance_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (na, nb, ab) = norms_and_dot(a, b)?;
    let cos = ab / (na * nb);
    let mut l1 = 0.0;
    let grad = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let diff = x - y;
            l1 += diff.abs();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            sign - (y / (na * nb) - cos * x / (na * na))
        })
        .collect();
    Ok((l1 - cos, grad))
}

/// Input vectors (full articulatory vectors or one block of them) paired
/// with gold embedding vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldEmbeddingSet {
    pub labels: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub gold: Vec<Vec<f64>>,
    pub source: String,
}

impl GoldEmbeddingSet {
    pub fn new(
        labels: Vec<String>,
        inputs: Vec<Vec<f64>>,
        gold: Vec<Vec<f64>>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("gold embedding set is empty".into()));
        }
        if inputs.len() != gold.len() || labels.len() != gold.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: gold.len() });
        }
        let (in_dim, out_dim) = (inputs[0].len(), gold[0].len());
        for (x, y) in inputs.iter().zip(&gold) {
            if x.len() != in_dim {
                return Err(Error::DimensionMismatch { expected: in_dim, found: x.len() });
            }
            if y.len() != out_dim {
                return Err(Error::DimensionMismatch { expected: out_dim, found: y.len() });
            }
            if y.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroVector);
            }
        }
        Ok(GoldEmbeddingSet { labels, inputs, gold, source: source.into() })
    }

    /// Reads `symbol<TAB>g₁<TAB>g₂…` rows; symbols are resolved against
    /// `table` and the `block` of their articulatory vector becomes the input.
    pub fn load(path: impl AsRef<Path>, table: &FeatureTable, block: FeatureBlock) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, table, block, path.display().to_string())
    }

    pub fn parse(text: &str, table: &FeatureTable, block: FeatureBlock, source: String) -> Result<Self> {
        let (mut labels, mut inputs, mut gold) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let symbol = cols.next().unwrap_or_default().trim();
            let vector = table.get(symbol).ok_or_else(|| Error::MalformedRow {
                line: line_no,
                reason: format!("symbol {symbol:?} is not in the feature table"),
            })?;
            let values = cols
                .map(|c| {
                    c.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::MalformedRow {
                        line: line_no,
                        reason: format!("invalid gold component {c:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() || values.iter().all(|&v| v == 0.0) {
                return Err(Error::MalformedRow { line: line_no, reason: "gold vector is empty or zero".into() });
            }
            if let Some(first) = gold.first().map(Vec::len) {
                if first != values.len() {
                    return Err(Error::MalformedRow {
                        line: line_no,
                        reason: format!("gold vector has {} components, expected {first}", values.len()),
                    });
                }
            }
            labels.push(symbol.to_string());
            inputs.push(vector.block(block).to_vec());
            gold.push(values);
        }
        if labels.is_empty() {
            return Err(Error::MalformedRow { line: 0, reason: "no gold rows".into() });
        }
        Self::new(labels, inputs, gold, source)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.gold[0].len()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (label, g) in self.labels.iter().zip(&self.gold) {
            out.push_str(label);
            for v in g {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Gold vectors produced by a hidden `tanh` network ("teacher") applied to the
/// full articulatory vectors of `symbols`; inputs are restricted to `block`.
pub fn synthetic_gold(
    table: &FeatureTable,
    symbols: &[String],
    block: FeatureBlock,
    teacher: &EmbeddingParams,
) -> Result<GoldEmbeddingSet> {
    let mut inputs = Vec::with_capacity(symbols.len());
    let mut gold = Vec::with_capacity(symbols.len());
    for s in symbols {
        let v = table.get(s).ok_or_else(|| Error::UnknownSymbol { position: 0, cluster: s.clone() })?;
        inputs.push(v.block(block).to_vec());
        gold.push(embed(teacher, v.as_slice())?);
    }
    GoldEmbeddingSet::new(symbols.to_vec(), inputs, gold, "synthetic")
}

/// Teacher network for [`synthetic_gold`]: random `66 → hidden → output`
/// with first-layer weights scaled by `gain` so that `tanh` saturates.
pub fn teacher(hidden: usize, output: usize, gain: f64, seed: u64) -> EmbeddingParams {
    let mlp = Mlp::tanh(FeatureBlock::Combined.dim(), hidden, output);
    let mut weights = mlp.init(&mut ChaCha8Rng::seed_from_u64(seed));
    let first_layer = hidden * mlp.input + hidden;
    for w in &mut weights[..first_layer] {
        *w *= gain;
    }
    EmbeddingParams { mlp, weights }
}

/// Mean distance over all pairs.
pub fn evaluate_embedding(params: &EmbeddingParams, gold: &GoldEmbeddingSet) -> Result<f64> {
    let distances = gold
        .inputs
        .par_iter()
        .zip(gold.gold.par_iter())
        .map(|(x, y)| artic_distance(&embed(params, x)?, y))
        .collect::<Result<Vec<f64>>>()?;
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

/// Mean distance over `indices` and its gradient with respect to the weights.
pub fn training_loss_and_grad(
    params: &EmbeddingParams,
    gold: &GoldEmbeddingSet,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if indices.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mlp = params.mlp;
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.weights.len()];
    for &i in indices {
        let x = &gold.inputs[i];
        mlp.check(params.weights.len(), x.len())?;
        let trace = mlp.forward(&params.weights, x);
        let (d, mut g_out) = artic_distance_grad(&trace.output, &gold.gold[i])?;
        loss += d;
        for g in &mut g_out {
            *g *= scale;
        }
        mlp.backward(&params.weights, x, &trace, &g_out, &mut grad);
    }
    Ok((loss * scale, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 3000, batch_size: 32, adam: AdamConfig::default() }
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingRun {
    pub params: EmbeddingParams,
    pub final_avg_distance: f64,
    /// Average distance over the whole set: entry 0 before training, entry
    /// `e` after epoch `e`.
    pub history: Vec<f64>,
}

/// Mini-batch Adam on the mean distance. Every epoch shuffles the pairs with
/// the run seed; the last partial batch is kept.
pub fn train_embedding(
    config: &EmbeddingConfig,
    gold: &GoldEmbeddingSet,
    options: &TrainOptions,
) -> Result<EmbeddingRun> {
    let params = EmbeddingParams::init(config)?;
    train_from(params, config.seed, gold, options)
}

/// As [`train_embedding`], starting from the given weights.
pub fn train_from(
    mut params: EmbeddingParams,
    seed: u64,
    gold: &GoldEmbeddingSet,
    options: &TrainOptions,
) -> Result<EmbeddingRun> {
    if options.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    if gold.input_dim() != params.mlp.input || gold.output_dim() != params.mlp.output {
        return Err(Error::DimensionMismatch { expected: params.mlp.input, found: gold.input_dim() });
    }
    // separate stream from the one used for initialization
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut adam = Adam::new(options.adam, params.weights.len());
    let mut order: Vec<usize> = (0..gold.len()).collect();
    let mut history = vec![evaluate_embedding(&params, gold)?];

    for epoch in 1..=options.epochs {
        let epoch_start = params.clone();
        order.shuffle(&mut rng);
        for batch in order.chunks(options.batch_size) {
            let (loss, grad) = training_loss_and_grad(&params, gold, batch)?;
            if !loss.is_finite() || adam.step(&mut params.weights, &grad).is_err() {
                return Err(Error::NonFiniteLoss { epoch, last_finite: Box::new(epoch_start) });
            }
        }
        let avg = evaluate_embedding(&params, gold)?;
        if !avg.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, last_finite: Box::new(epoch_start) });
        }
        history.push(avg);
    }
    let final_avg_distance = *history.last().expect("history has the initial evaluation");
    Ok(EmbeddingRun { params, final_avg_distance, history })
}
