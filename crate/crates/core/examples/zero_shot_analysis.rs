//! Meta-train without a few phonemes, then report their nearest seen
//! neighbours in articulatory space and in the model's output space, and
//! export every phoneme's output for external projection.
//!
//! cargo run --release --example zero_shot_analysis -- [out.tsv]

use laml::analysis::{export_embeddings, zero_shot_report, AcousticEncoder, COLLAPSE_TOLERANCE};
use laml::artic::FeatureTable;
use laml::meta_learn::{meta_train, random_inventory, MetaTrainConfig, TaskFamily};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> laml::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "zero_shot_embeddings.tsv".to_string());
    let table = FeatureTable::bundled();
    let heldout: Vec<String> = ["y", "ø", "ʏ"].iter().map(|s| s.to_string()).collect();
    let family = TaskFamily::new(8, 0.3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pools = (0..4)
        .map(|i| family.task(i, random_inventory(&table, 40, &heldout, &mut rng), 0.0, i as u64).pool(&table))
        .collect::<laml::Result<Vec<_>>>()?;
    let run = meta_train(&MetaTrainConfig::default(), &pools, 1500)?;
    let encoder = AcousticEncoder { model: &run.model, params: &run.state.params };

    for report in zero_shot_report(&table, &heldout, &encoder, 3, COLLAPSE_TOLERANCE)? {
        let fmt = |ns: &[laml::analysis::Neighbor]| {
            ns.iter().map(|n| format!("{} {:.3}", n.symbol, n.distance)).collect::<Vec<_>>().join(", ")
        };
        println!("{}: articulatory [{}] | output [{}]", report.symbol, fmt(&report.articulatory), fmt(&report.encoded));
        if report.collapsed {
            println!("  collapsed onto {}", report.encoded[0].symbol);
        }
    }
    export_embeddings(&table, &heldout, &encoder, &out)?;
    println!("wrote {out}");
    Ok(())
}
