//! Line-delimited JSON corpus: one utterance per line,
//! `{"task": "de", "ipa": "pa", "frames": [[...], [...]]}` with one frame per
//! phoneme segment.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artic::{segment_ipa, vectorize, FeatureTable};
use crate::error::{Error, Result};

use super::TaskPool;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub task: String,
    pub ipa: String,
    pub frames: Vec<Vec<f64>>,
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::MalformedRow { line: i + 1, reason: e.to_string() }))
        .collect()
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn write_corpus(records: &[CorpusRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("corpus records serialize");
        out.push(b'\n');
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(|e| Error::io(path, e))
}

impl TaskPool {
    /// Groups records by task (in order of first appearance) and pairs each
    /// phoneme's articulatory vector with its frame.
    pub fn from_corpus(records: &[CorpusRecord], table: &FeatureTable) -> Result<Vec<(String, TaskPool)>> {
        let mut out: Vec<(String, TaskPool)> = Vec::new();
        for (line, r) in records.iter().enumerate() {
            let segments = segment_ipa(&r.ipa, table)?;
            if segments.len() != r.frames.len() {
                return Err(Error::MalformedRow {
                    line: line + 1,
                    reason: format!("{} phonemes but {} frames", segments.len(), r.frames.len()),
                });
            }
            let idx = match out.iter().position(|(name, _)| *name == r.task) {
                Some(i) => i,
                None => {
                    let task = out.len();
                    out.push((
                        r.task.clone(),
                        TaskPool { task, labels: vec![], inputs: vec![], targets: vec![], noise: 0.0 },
                    ));
                    task
                }
            };
            let pool = &mut out[idx].1;
            for (s, f) in segments.into_iter().zip(&r.frames) {
                if let Some(first) = pool.targets.first() {
                    if first.len() != f.len() {
                        return Err(Error::MalformedRow { line: line + 1, reason: "inconsistent frame width".into() });
                    }
                }
                pool.inputs.push(vectorize(&s, table).as_slice().to_vec());
                pool.labels.push(s.symbol);
                pool.targets.push(f.clone());
            }
        }
        Ok(out)
    }
}
