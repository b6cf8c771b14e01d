//! Fine-tuning an unseen synthetic language from a LAML meta-checkpoint
//! versus from scratch, and the zero-shot behaviour of one held-out phoneme.
//!
//! cargo run --release --example low_resource_adaptation -- [seeds] [meta_steps] [tasks]

use laml::analysis::target_rank;
use laml::artic::{FeatureTable, PhonemeCategory};
use laml::meta_learn::{
    finetune, meta_train, random_inventory, steps_to_reach, FinetuneOptions, MetaTrainConfig, Procedure, TaskFamily,
};
use laml::optim::AdamConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const HELDOUT: &str = "e";
const TARGET_LOSS: f64 = 0.01;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn main() -> laml::Result<()> {
    let seeds = arg(1, 3) as u64;
    let meta_steps = arg(2, 2000);
    let n_tasks = arg(3, 6);
    let table = FeatureTable::bundled();
    let heldout = vec![HELDOUT.to_string()];

    for seed in 0..seeds {
        let family = TaskFamily::new(8, 0.3, 50 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pools = (0..n_tasks)
            .map(|i| {
                let inv = random_inventory(&table, 30, &heldout, &mut rng);
                family.task(i, inv, 0.0, 1000 * seed + i as u64).pool(&table)
            })
            .collect::<laml::Result<Vec<_>>>()?;
        let mut inv = random_inventory(&table, 30, &heldout, &mut rng);
        inv.push(HELDOUT.to_string());
        let unseen = family.task(n_tasks, inv, 0.0, 1000 * seed + 999);

        let config = MetaTrainConfig { procedure: Procedure::Laml, seed, ..Default::default() };
        let meta = meta_train(&config, &pools, meta_steps)?;
        let model = meta.model;
        let corpus = vec![unseen.full_batch(&table)?];
        let options = FinetuneOptions { steps: 3000, adam: AdamConfig::default(), snapshot_every: 0 };

        let from_meta = finetune(&model, &meta.state.params, &corpus, &options)?;
        let scratch_init = model.mlp.init(&mut ChaCha8Rng::seed_from_u64(seed + 7777));
        let from_scratch = finetune(&model, &scratch_init, &corpus, &options)?;
        let meta_hit = steps_to_reach(&from_meta.losses, TARGET_LOSS);
        let scratch_hit = steps_to_reach(&from_scratch.losses, TARGET_LOSS);

        // zero-shot: the held-out phoneme never appeared during meta-training
        let x = table.get(HELDOUT).expect("bundled symbol").as_slice().to_vec();
        let truth = unseen.target(&x);
        let others: Vec<Vec<f64>> = (0..table.len())
            .filter(|&r| table.category(r) != PhonemeCategory::Special && table.symbol(r) != HELDOUT)
            .map(|r| unseen.target(table.vector(r).as_slice()))
            .collect();
        let zero_shot = model.predict(&meta.state.params, &x)?;
        let rank = target_rank(&zero_shot, &truth, &others);
        let short = finetune(&model, &meta.state.params, &corpus, &FinetuneOptions { steps: 100, ..options })?;
        let gap_before = mse(&zero_shot, &truth);
        let gap_after = mse(&model.predict(&short.params, &x)?, &truth);

        println!(
            "seed {seed}: meta loss {:.4} -> {:.4}; steps to {TARGET_LOSS}: meta {meta_hit:?} scratch {scratch_hit:?}; \
             zero-shot rank {rank:.3}, gap {gap_before:.4} -> {gap_after:.4} ({:.0}% shrink)",
            meta.losses.first().copied().unwrap_or(f64::NAN),
            meta.losses.last().copied().unwrap_or(f64::NAN),
            100.0 * (1.0 - gap_after / gap_before),
        );
    }
    Ok(())
}
