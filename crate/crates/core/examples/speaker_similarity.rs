//! Fine-tune a meta-checkpoint on an unseen synthetic speaker and track how
//! close a probe of the model's outputs gets to that speaker's mean frame.
//!
//! cargo run --release --example speaker_similarity -- [finetune_steps]

use laml::analysis::{mean_frame, similarity_curve, speaker_probe};
use laml::artic::FeatureTable;
use laml::meta_learn::{finetune, meta_train, random_inventory, FinetuneOptions, MetaTrainConfig, TaskFamily};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> laml::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let table = FeatureTable::bundled();
    let family = TaskFamily::new(8, 0.6, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut specs: Vec<_> =
        (0..5).map(|i| family.task(i, random_inventory(&table, 30, &[], &mut rng), 0.0, 100 + i as u64)).collect();
    let unseen = specs.pop().expect("five specs");
    let pools = specs.iter().map(|s| s.pool(&table)).collect::<laml::Result<Vec<_>>>()?;

    let meta = meta_train(&MetaTrainConfig::default(), &pools, 1000)?;
    let corpus = vec![unseen.full_batch(&table)?];
    let options = FinetuneOptions { steps, snapshot_every: steps.div_ceil(20).max(1), ..Default::default() };
    let run = finetune(&meta.model, &meta.state.params, &corpus, &options)?;

    let reference = mean_frame(&corpus[0].targets)?;
    let curve = similarity_curve(&run.snapshots, |p| speaker_probe(&meta.model, p, &corpus[0].inputs), &reference)?;
    println!("step\tsimilarity\tbest\tloss");
    for ((step, sim), best) in curve.points.iter().zip(curve.best_so_far()) {
        println!("{step}\t{sim:.5}\t{best:.5}\t{:.5}", run.losses[*step]);
    }
    Ok(())
}
