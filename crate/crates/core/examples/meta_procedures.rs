//! LAML, first-order MAML and second-order MAML on the same synthetic
//! languages: final summed loss and wall time.
//!
//! cargo run --release --example meta_procedures -- [steps] [tasks] [inner_steps]

use std::time::Instant;

use laml::artic::FeatureTable;
use laml::meta_learn::{meta_train, random_inventory, MetaTrainConfig, Procedure, TaskFamily};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> laml::Result<()> {
    let (steps, tasks, inner_steps) = (arg(1, 300), arg(2, 4), arg(3, 1));
    let table = FeatureTable::bundled();
    let family = TaskFamily::new(8, 0.3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pools = (0..tasks)
        .map(|i| family.task(i, random_inventory(&table, 30, &[], &mut rng), 0.0, i as u64).pool(&table))
        .collect::<laml::Result<Vec<_>>>()?;

    println!("procedure\tfirst\tlast\tseconds");
    for procedure in [Procedure::Laml, Procedure::Fomaml, Procedure::Maml] {
        let config = MetaTrainConfig { procedure, inner_steps, inner_lr: 0.01, ..Default::default() };
        let start = Instant::now();
        let run = meta_train(&config, &pools, steps)?;
        println!(
            "{procedure:?}\t{:.4}\t{:.4}\t{:.2}",
            run.losses.first().copied().unwrap_or(f64::NAN),
            run.losses.last().copied().unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
