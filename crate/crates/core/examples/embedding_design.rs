//! Linear vs. non-linear embedding functions on each feature block, fitted to
//! gold vectors from a hidden non-linear teacher.
//!
//! cargo run --release --example embedding_design -- [epochs] [hidden] [output] [seeds]

use laml::artic::{FeatureBlock, FeatureTable};
use laml::embedding::{synthetic_gold, teacher, train_embedding, Architecture, EmbeddingConfig, TrainOptions};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> laml::Result<()> {
    let epochs = arg(1, 600);
    let hidden = arg(2, 32);
    let output = arg(3, 32);
    let seeds = arg(4, 1) as u64;
    let table = FeatureTable::bundled();

    println!("seed\tblock\tlinear\tnon-linear");
    for seed in 0..seeds {
        let t = teacher(64, output, 3.0, 100 + seed);
        for block in FeatureBlock::ALL {
            let gold = synthetic_gold(&table, table.symbols(), block, &t)?;
            let mut row = Vec::new();
            for arch in [Architecture::Linear, Architecture::NonLinear] {
                let config = EmbeddingConfig {
                    architecture: arch,
                    input_dim: block.dim(),
                    hidden_dim: hidden,
                    output_dim: output,
                    seed,
                };
                let options = TrainOptions { epochs, ..Default::default() };
                row.push(train_embedding(&config, &gold, &options)?.final_avg_distance);
            }
            println!("{seed}\t{block}\t{:.4}\t{:.4}", row[0], row[1]);
        }
    }
    Ok(())
}
