//! Zero-shot phoneme reports, speaker-similarity curves and embedding exports.

use std::collections::BTreeSet;
use std::path::Path;

use crate::artic::{ArticulatoryVector, FeatureBlock, FeatureTable, PhonemeCategory};
use crate::embedding::{artic_distance, EmbeddingParams};
use crate::error::{Error, Result};
use crate::meta_learn::AcousticModel;

/// Default ratio below which a held-out output counts as collapsed onto its
/// nearest seen neighbour.
pub const COLLAPSE_TOLERANCE: f64 = 0.05;

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
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
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Anything that maps an articulatory vector to an output vector.
pub trait PhonemeEncoder {
    fn encode(&self, v: &ArticulatoryVector) -> Result<Vec<f64>>;
}

impl PhonemeEncoder for EmbeddingParams {
    /// Feeds the block matching the network's input width.
    fn encode(&self, v: &ArticulatoryVector) -> Result<Vec<f64>> {
        let block = FeatureBlock::from_dim(self.mlp.input)
            .ok_or(Error::DimensionMismatch { expected: FeatureBlock::Combined.dim(), found: self.mlp.input })?;
        self.embed(v.block(block))
    }
}

/// An acoustic model together with its parameters.
#[derive(Clone, Copy, Debug)]
pub struct AcousticEncoder<'a> {
    pub model: &'a AcousticModel,
    pub params: &'a [f64],
}

impl PhonemeEncoder for AcousticEncoder<'_> {
    fn encode(&self, v: &ArticulatoryVector) -> Result<Vec<f64>> {
        self.model.predict(self.params, v.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub symbol: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotReport {
    pub symbol: String,
    /// Nearest seen symbols by distance between raw articulatory vectors.
    pub articulatory: Vec<Neighbor>,
    /// Nearest seen symbols by distance between encoder outputs.
    pub encoded: Vec<Neighbor>,
    pub collapsed: bool,
}

/// All seen symbols sorted by ascending distance to `probe`; ties keep
/// table order.
fn ranked(probe: &[f64], seen: &[(String, Vec<f64>)]) -> Result<Vec<Neighbor>> {
    let mut out = seen
        .iter()
        .map(|(s, v)| Ok(Neighbor { symbol: s.clone(), distance: artic_distance(probe, v)? }))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(out)
}

/// Distances shifted by one so they are non-negative; a match up to rounding
/// (shifted distance below 1e-12) always counts as a collapse.
fn is_collapsed(ranked: &[Neighbor], tolerance: f64) -> bool {
    match ranked {
        [first, rest @ ..] => {
            let d1 = first.distance + 1.0;
            d1 < 1e-12 || rest.first().is_some_and(|second| d1 < tolerance * (second.distance + 1.0))
        }
        [] => false,
    }
}

/// One report per held-out symbol, in the order given. Neighbour lists hold at
/// most `k` entries drawn from the table symbols that are not held out.
pub fn zero_shot_report(
    table: &FeatureTable,
    heldout: &[String],
    encoder: &impl PhonemeEncoder,
    k: usize,
    collapse_tolerance: f64,
) -> Result<Vec<ZeroShotReport>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rows = BTreeSet::new();
    for s in heldout {
        rows.insert(table.row_of(s).ok_or_else(|| Error::HeldoutNotInTable(s.clone()))?);
    }
    let seen: Vec<usize> = (0..table.len()).filter(|r| !rows.contains(r)).collect();
    let seen_raw: Vec<(String, Vec<f64>)> =
        seen.iter().map(|&r| (table.symbol(r).to_string(), table.vector(r).as_slice().to_vec())).collect();
    let seen_encoded = seen
        .iter()
        .map(|&r| Ok((table.symbol(r).to_string(), encoder.encode(table.vector(r))?)))
        .collect::<Result<Vec<_>>>()?;

    heldout
        .iter()
        .map(|s| {
            let v = table.get(s).expect("checked above");
            let mut articulatory = ranked(v.as_slice(), &seen_raw)?;
            let mut encoded = ranked(&encoder.encode(v)?, &seen_encoded)?;
            let collapsed = is_collapsed(&encoded, collapse_tolerance);
            articulatory.truncate(k);
            encoded.truncate(k);
            let symbol = table.symbol(table.row_of(s).expect("checked above")).to_string();
            Ok(ZeroShotReport { symbol, articulatory, encoded, collapsed })
        })
        .collect()
}

/// Tab-separated report: one line per (held-out symbol, space, rank).
pub fn report_to_tsv(reports: &[ZeroShotReport]) -> String {
    let mut out = String::from("heldout\tspace\trank\tneighbor\tdistance\tcollapsed\n");
    for r in reports {
        for (space, list) in [("articulatory", &r.articulatory), ("encoded", &r.encoded)] {
            for (i, n) in list.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{space}\t{}\t{}\t{}\t{}\n",
                    r.symbol,
                    i + 1,
                    n.symbol,
                    n.distance,
                    r.collapsed
                ));
            }
        }
    }
    out
}

/// Fraction of `others` that lie strictly farther (squared error) from
/// `output` than `own` does.
pub fn target_rank(output: &[f64], own: &[f64], others: &[Vec<f64>]) -> f64 {
    let mse = |t: &[f64]| output.iter().zip(t).map(|(o, y)| (o - y) * (o - y)).sum::<f64>() / output.len() as f64;
    let own_err = mse(own);
    if others.is_empty() {
        return 1.0;
    }
    others.iter().filter(|t| mse(t) > own_err).count() as f64 / others.len() as f64
}

/// Writes `symbol  category  components…` for every table row. Held-out
/// symbols get the category prefixed with `unseen_`.
pub fn export_embeddings(
    table: &FeatureTable,
    heldout: &[String],
    encoder: &impl PhonemeEncoder,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = embeddings_tsv(table, heldout, encoder)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn embeddings_tsv(table: &FeatureTable, heldout: &[String], encoder: &impl PhonemeEncoder) -> Result<String> {
    let mut unseen = BTreeSet::new();
    for s in heldout {
        unseen.insert(table.row_of(s).ok_or_else(|| Error::HeldoutNotInTable(s.clone()))?);
    }
    let mut out = String::new();
    for row in 0..table.len() {
        let category = match table.category(row) {
            PhonemeCategory::Consonant => "consonant",
            PhonemeCategory::Vowel => "vowel",
            PhonemeCategory::Special => "special",
        };
        out.push_str(table.symbol(row));
        out.push('\t');
        if unseen.contains(&row) {
            out.push_str("unseen_");
        }
        out.push_str(category);
        for v in encoder.encode(table.vector(row))? {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityCurve {
    pub points: Vec<(usize, f64)>,
}

impl SimilarityCurve {
    /// Running maximum of the similarity.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.points
            .iter()
            .map(|&(_, s)| {
                best = best.max(s);
                best
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tsimilarity\n");
        for (step, s) in &self.points {
            out.push_str(&format!("{step}\t{s}\n"));
        }
        out
    }
}

/// Cosine similarity between `probe(params)` and `reference` for each
/// checkpoint, ordered by step.
pub fn similarity_curve<F>(checkpoints: &[(usize, Vec<f64>)], probe: F, reference: &[f64]) -> Result<SimilarityCurve>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("similarity curve needs at least one checkpoint".into()));
    }
    let mut order: Vec<&(usize, Vec<f64>)> = checkpoints.iter().collect();
    order.sort_by_key(|(step, _)| *step);
    if order.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("checkpoint steps must be distinct".into()));
    }
    let points = order
        .into_iter()
        .map(|(step, params)| Ok((*step, cosine_similarity(&probe(params)?, reference)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityCurve { points })
}

/// Speaker proxy: the mean model output over a fixed battery of inputs.
pub fn speaker_probe(model: &AcousticModel, params: &[f64], battery: &[Vec<f64>]) -> Result<Vec<f64>> {
    if battery.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut mean = vec![0.0; model.output_dim()];
    for x in battery {
        for (m, o) in mean.iter_mut().zip(model.predict(params, x)?) {
            *m += o;
        }
    }
    for m in &mut mean {
        *m /= battery.len() as f64;
    }
    Ok(mean)
}

/// Mean of a set of frames, used as the reference for [`speaker_probe`].
pub fn mean_frame(frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::EmptyBatch)?;
    let mut mean = vec![0.0; first.len()];
    for f in frames {
        if f.len() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), found: f.len() });
        }
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= frames.len() as f64;
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, -2.0], &[-1.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn curve_basics() {
        let probe = |p: &[f64]| Ok(p.to_vec());
        let c = similarity_curve(&[(5, vec![1.0, 1.0])], probe, &[2.0, 2.0]).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].0, 5);
        assert!((c.points[0].1 - 1.0).abs() < 1e-15);
        assert!(similarity_curve(&[], probe, &[1.0]).is_err());
        let c = similarity_curve(&[(2, vec![0.0, 1.0]), (0, vec![1.0, 0.0])], probe, &[1.0, 0.0]).unwrap();
        assert_eq!(c.points, vec![(0, 1.0), (2, 0.0)]);
        assert_eq!(c.best_so_far(), vec![1.0, 1.0]);
        assert_eq!(c.to_tsv(), "step\tsimilarity\n0\t1\n2\t0\n");
    }

    fn identity_encoder() -> EmbeddingParams {
        let mlp = Mlp::linear(66, 66);
        let mut w = vec![0.0; mlp.num_params()];
        for i in 0..66 {
            w[i * 66 + i] = 1.0;
        }
        EmbeddingParams::from_weights(mlp, w).unwrap()
    }

    #[test]
    fn report_truncates_and_sorts() {
        let table = FeatureTable::bundled();
        let enc = identity_encoder();
        let held = vec!["a".to_string()];
        let r = zero_shot_report(&table, &held, &enc, 10_000, COLLAPSE_TOLERANCE).unwrap();
        assert_eq!(r[0].articulatory.len(), table.len() - 1);
        assert!(r[0].encoded.windows(2).all(|w| w[0].distance <= w[1].distance));
        assert!(!r[0].articulatory.iter().any(|n| n.symbol == "a"));
        assert!(matches!(
            zero_shot_report(&table, &["ʘʘ".to_string()], &enc, 3, 0.05),
            Err(Error::HeldoutNotInTable(_))
        ));
    }

    #[test]
    fn duplicate_inputs_collapse() {
        let table = FeatureTable::bundled();
        // a constant encoder maps every phoneme to the same output
        let mlp = Mlp::linear(66, 2);
        let mut w = vec![0.0; mlp.num_params()];
        w[66 * 2] = 1.0;
        w[66 * 2 + 1] = 0.5;
        let enc = EmbeddingParams::from_weights(mlp, w).unwrap();
        let r = zero_shot_report(&table, &["p".to_string()], &enc, 2, COLLAPSE_TOLERANCE).unwrap();
        assert!(r[0].collapsed);
        let r = zero_shot_report(&table, &["p".to_string()], &identity_encoder(), 2, COLLAPSE_TOLERANCE).unwrap();
        assert!(!r[0].collapsed);
    }

    #[test]
    fn export_rows_and_tags() {
        let table = FeatureTable::bundled();
        let enc = identity_encoder();
        let all = embeddings_tsv(&table, &[], &enc).unwrap();
        assert_eq!(all.lines().count(), table.len());
        assert!(!all.contains("unseen_"));
        let held = embeddings_tsv(&table, &["a".to_string()], &enc).unwrap();
        assert!(held.lines().any(|l| l.starts_with("a\tunseen_vowel\t")));
        assert_eq!(embeddings_tsv(&table, &[], &enc).unwrap(), all);
    }

    #[test]
    fn rank_fraction() {
        let others = vec![vec![5.0], vec![0.1], vec![-3.0]];
        assert!((target_rank(&[0.0], &[0.5], &others) - 2.0 / 3.0).abs() < 1e-15);
    }
}
