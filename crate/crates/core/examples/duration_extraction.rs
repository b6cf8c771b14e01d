//! Durations from a soft, noisy attention map, checked against exhaustive
//! search, plus the guided attention penalty of the same map.
//!
//! cargo run --example duration_extraction -- [frames] [phonemes] [seed]

use laml::align::{brute_force_align, guided_attention_loss, monotonic_viterbi, path_score, AttentionMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

/// Rows are softmaxes centred on a wandering monotone focus.
fn synthetic_attention(frames: usize, phonemes: usize, rng: &mut ChaCha8Rng) -> laml::Result<AttentionMap> {
    let mut rows = Vec::with_capacity(frames);
    for t in 0..frames {
        let focus = (t as f64 + 0.5) * phonemes as f64 / frames as f64 + rng.random_range(-0.4..0.4);
        let logits: Vec<f64> = (0..phonemes).map(|n| -2.0 * (n as f64 + 0.5 - focus).powi(2)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        rows.push(logits.iter().map(|l| l.exp() / z).collect());
    }
    AttentionMap::from_rows(&rows)
}

fn main() -> laml::Result<()> {
    let (frames, phonemes, seed) = (arg(1, 24), arg(2, 7), arg(3, 0) as u64);
    let att = synthetic_attention(frames, phonemes, &mut ChaCha8Rng::seed_from_u64(seed))?;

    let durations = monotonic_viterbi(&att)?;
    println!("durations: {durations} (sum {})", durations.total());
    println!("log score: {:.4}", path_score(&att, &durations));
    match brute_force_align(&att) {
        Ok(best) => println!("exhaustive search agrees: {}", path_score(&att, &best) == path_score(&att, &durations)),
        Err(e) => println!("exhaustive search skipped: {e}"),
    }
    println!("guided attention loss: {:.4}", guided_attention_loss(&att, 0.2)?);
    Ok(())
}
