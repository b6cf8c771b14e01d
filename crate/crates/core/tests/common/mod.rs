#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest coordinate-wise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub const HELDOUT: &str = "e";
pub const TARGET_LOSS: f64 = 0.01;

/// Outcome of one meta-train / fine-tune trial on the synthetic family.
#[derive(Debug)]
pub struct Trial {
    pub meta_hit: Option<usize>,
    pub scratch_hit: Option<usize>,
    /// Fraction of other phonemes' targets farther from the zero-shot output
    /// than the held-out phoneme's own target.
    pub rank: f64,
    pub gap_before: f64,
    pub gap_after: f64,
    pub curve_best: Vec<f64>,
}

/// LAML on `tasks` synthetic languages that never contain the held-out
/// phoneme, then fine-tuning an unseen language that does.
pub fn adaptation_trial(seed: u64, tasks: usize, meta_steps: usize, finetune_steps: usize) -> Trial {
    use laml::analysis::{mean_frame, similarity_curve, speaker_probe, target_rank};
    use laml::artic::{FeatureTable, PhonemeCategory};
    use laml::meta_learn::{
        finetune, meta_train, random_inventory, steps_to_reach, FinetuneOptions, MetaTrainConfig, Procedure, TaskFamily,
    };
    use laml::optim::AdamConfig;

    let table = FeatureTable::bundled();
    let heldout = vec![HELDOUT.to_string()];
    let family = TaskFamily::new(8, 0.3, 50 + seed);
    let mut r = rng(seed);
    let pools: Vec<_> = (0..tasks)
        .map(|i| {
            let inv = random_inventory(&table, 30, &heldout, &mut r);
            family.task(i, inv, 0.0, 1000 * seed + i as u64).pool(&table).unwrap()
        })
        .collect();
    let mut inv = random_inventory(&table, 30, &heldout, &mut r);
    inv.push(HELDOUT.to_string());
    let unseen = family.task(tasks, inv, 0.0, 1000 * seed + 999);

    let config = MetaTrainConfig { procedure: Procedure::Laml, seed, ..Default::default() };
    let meta = meta_train(&config, &pools, meta_steps).unwrap();
    let model = meta.model;
    let corpus = vec![unseen.full_batch(&table).unwrap()];
    let options = FinetuneOptions { steps: finetune_steps, adam: AdamConfig::default(), snapshot_every: 10 };
    let from_meta = finetune(&model, &meta.state.params, &corpus, &options).unwrap();
    let scratch_init = model.mlp.init(&mut rng(seed + 7777));
    let from_scratch = finetune(&model, &scratch_init, &corpus, &options).unwrap();

    let x = table.get(HELDOUT).unwrap().as_slice().to_vec();
    let truth = unseen.target(&x);
    let others: Vec<Vec<f64>> = (0..table.len())
        .filter(|&i| table.category(i) != PhonemeCategory::Special && table.symbol(i) != HELDOUT)
        .map(|i| unseen.target(table.vector(i).as_slice()))
        .collect();
    let zero_shot = model.predict(&meta.state.params, &x).unwrap();
    let after_100 = from_meta.snapshots.iter().find(|(s, _)| *s == 100.min(finetune_steps)).unwrap();

    let reference = mean_frame(&corpus[0].targets).unwrap();
    let curve =
        similarity_curve(&from_meta.snapshots, |p| speaker_probe(&model, p, &corpus[0].inputs), &reference).unwrap();

    Trial {
        meta_hit: steps_to_reach(&from_meta.losses, TARGET_LOSS),
        scratch_hit: steps_to_reach(&from_scratch.losses, TARGET_LOSS),
        rank: target_rank(&zero_shot, &truth, &others),
        gap_before: mse(&zero_shot, &truth),
        gap_after: mse(&model.predict(&after_100.1, &x).unwrap(), &truth),
        curve_best: curve.best_so_far(),
    }
}

impl Trial {
    /// Fine-tuning from the meta-checkpoint hits the target strictly sooner.
    pub fn adapts_faster(&self) -> bool {
        match (self.meta_hit, self.scratch_hit) {
            (Some(m), Some(s)) => m < s,
            (Some(_), None) => true,
            _ => false,
        }
    }

    pub fn gap_shrink(&self) -> f64 {
        1.0 - self.gap_after / self.gap_before
    }
}
