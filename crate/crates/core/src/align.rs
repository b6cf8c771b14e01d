//! Duration extraction from soft attention maps.
//!
//! A monotonic path assigns every decoder frame `t` one phoneme `pₜ`, with
//! `p₀ = 0`, `p_{T-1} = N-1` and `pₜ₊₁ ∈ {pₜ, pₜ + 1}`. Its score is
//! `Σₜ ln att[t, pₜ]` (with `ln 0 = -∞`), accumulated in frame order. Among
//! equally scoring paths the one that advances latest wins: comparing two
//! paths from the last frame backwards, the first frame where they differ
//! decides in favour of the smaller phoneme index.

use std::path::Path;

use crate::checkpoint::Tensor;
use crate::error::{Error, Result};

/// `T × N` non-negative matrix, rows are decoder frames.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    frames: usize,
    phonemes: usize,
    data: Vec<f64>,
}

impl AttentionMap {
    pub fn new(frames: usize, phonemes: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || phonemes == 0 {
            return Err(Error::InvalidAttention("map must have at least one frame and one phoneme".into()));
        }
        if data.len() != frames * phonemes {
            return Err(Error::DimensionMismatch { expected: frames * phonemes, found: data.len() });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidAttention(format!("entry {v} is negative or not finite")));
        }
        if let Some(t) = (0..frames).find(|&t| data[t * phonemes..(t + 1) * phonemes].iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidAttention(format!("row {t} has no positive entry")));
        }
        Ok(AttentionMap { frames, phonemes, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let phonemes = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != phonemes) {
            return Err(Error::DimensionMismatch { expected: phonemes, found: r.len() });
        }
        Self::new(rows.len(), phonemes, rows.concat())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn phonemes(&self) -> usize {
        self.phonemes
    }

    pub fn get(&self, t: usize, n: usize) -> f64 {
        self.data[t * self.phonemes + n]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.phonemes..(t + 1) * self.phonemes]
    }

    /// Every entry multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.frames, self.phonemes, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn transposed(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for n in 0..self.phonemes {
            for t in 0..self.frames {
                data.push(self.get(t, n));
            }
        }
        Self::new(self.phonemes, self.frames, data)
    }

    /// Whitespace-separated rows; blank lines and `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|c| {
                    c.parse::<f64>().map_err(|_| Error::MalformedRow {
                        line: i + 1,
                        reason: format!("invalid attention weight {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if first != row.len() {
                    return Err(Error::MalformedRow {
                        line: i + 1,
                        reason: format!("{} columns, expected {first}", row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::MalformedRow { line: 0, reason: "empty attention map".into() });
        }
        Self::from_rows(&rows)
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(f64::to_string).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_tensor(&self, name: &str) -> Tensor {
        Tensor { name: name.to_string(), shape: vec![self.frames, self.phonemes], data: self.data.clone() }
    }

    pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
        match tensor.shape[..] {
            [frames, phonemes] => Self::new(frames, phonemes, tensor.data.clone()),
            _ => Err(Error::InvalidAttention(format!("tensor {:?} is not a matrix", tensor.name))),
        }
    }
}

/// Frames per phoneme; every entry is at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DurationSequence(pub Vec<usize>);

impl DurationSequence {
    pub fn from_path(path: &[usize], phonemes: usize) -> Self {
        let mut d = vec![0; phonemes];
        for &p in path {
            d[p] += 1;
        }
        DurationSequence(d)
    }

    pub fn to_path(&self) -> Vec<usize> {
        self.0.iter().enumerate().flat_map(|(n, &d)| std::iter::repeat_n(n, d)).collect()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for DurationSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

fn ln(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log score of a path given as durations, summed in frame order.
pub fn path_score(att: &AttentionMap, durations: &DurationSequence) -> f64 {
    let path = durations.to_path();
    let mut score = ln(att.get(0, path[0]));
    for (t, &p) in path.iter().enumerate().skip(1) {
        score += ln(att.get(t, p));
    }
    score
}

fn check_feasible(att: &AttentionMap) -> Result<()> {
    if att.frames < att.phonemes {
        return Err(Error::TooFewFrames { frames: att.frames, phonemes: att.phonemes });
    }
    Ok(())
}

/// Error for a map whose best path has probability zero.
fn infeasible(att: &AttentionMap) -> Error {
    let (t_len, n_len) = (att.frames, att.phonemes);
    for t in 0..t_len {
        let lo = (n_len + t).saturating_sub(t_len);
        let hi = t.min(n_len - 1);
        if (lo..=hi).all(|n| att.get(t, n) == 0.0) {
            return Error::DegenerateRow(t);
        }
    }
    Error::NoMonotonicPath
}

/// Most probable monotonic path, by dynamic programming in `O(T·N)`.
pub fn monotonic_viterbi(att: &AttentionMap) -> Result<DurationSequence> {
    check_feasible(att)?;
    let (t_len, n_len) = (att.frames, att.phonemes);
    let mut score = vec![f64::NEG_INFINITY; n_len];
    score[0] = ln(att.get(0, 0));
    // advanced[t * N + n]: frame t entered phoneme n from n - 1
    let mut advanced = vec![false; t_len * n_len];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; n_len];
        for n in 0..n_len.min(t + 1) {
            let stay = score[n];
            let adv = if n > 0 { score[n - 1] } else { f64::NEG_INFINITY };
            let take_adv = n > 0 && adv >= stay;
            advanced[t * n_len + n] = take_adv;
            next[n] = if take_adv { adv } else { stay } + ln(att.get(t, n));
        }
        score = next;
    }
    if score[n_len - 1] == f64::NEG_INFINITY {
        return Err(infeasible(att));
    }
    let mut path = vec![0; t_len];
    let mut n = n_len - 1;
    for t in (1..t_len).rev() {
        path[t] = n;
        if advanced[t * n_len + n] {
            n -= 1;
        }
    }
    debug_assert_eq!(n, 0);
    Ok(DurationSequence::from_path(&path, n_len))
}

/// Largest number of monotonic paths [`brute_force_align`] will enumerate.
pub const MAX_ENUMERATED_PATHS: u64 = 1 << 20;

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exhaustive search over every monotonic path; tie-breaking matches
/// [`monotonic_viterbi`].
pub fn brute_force_align(att: &AttentionMap) -> Result<DurationSequence> {
    check_feasible(att)?;
    let (t_len, n_len) = (att.frames, att.phonemes);
    if binomial(t_len as u64 - 1, n_len as u64 - 1) > MAX_ENUMERATED_PATHS {
        return Err(Error::InstanceTooLarge { frames: t_len, phonemes: n_len });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut path = vec![0usize; t_len];
    enumerate(att, 1, &mut path, &mut |p| {
        let d = DurationSequence::from_path(p, n_len);
        let s = path_score(att, &d);
        let better = match &best {
            None => true,
            Some((bs, bp)) => s > *bs || (s == *bs && later_advance(p, bp)),
        };
        if better {
            best = Some((s, p.to_vec()));
        }
    });
    match best {
        Some((s, p)) if s > f64::NEG_INFINITY => Ok(DurationSequence::from_path(&p, n_len)),
        _ => Err(infeasible(att)),
    }
}

/// `a` is preferred over `b`: scanning from the last frame, the first
/// difference has `a` on the smaller phoneme.
fn later_advance(a: &[usize], b: &[usize]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn enumerate(att: &AttentionMap, t: usize, path: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    let (t_len, n_len) = (att.frames, att.phonemes);
    if t == t_len {
        if path[t_len - 1] == n_len - 1 {
            visit(path);
        }
        return;
    }
    let prev = path[t - 1];
    // remaining frames must be enough to reach the last phoneme
    for next in [prev, prev + 1] {
        if next < n_len && n_len - 1 - next <= t_len - 1 - t {
            path[t] = next;
            enumerate(att, t + 1, path, visit);
        }
    }
}

/// Default width of the diagonal prior.
pub const GUIDED_ATTENTION_WIDTH: f64 = 0.2;

/// Mean over all cells of `att[t, n] · (1 - exp(-(n/N - t/T)² / (2g²)))`.
pub fn guided_attention_loss(att: &AttentionMap, g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::InvalidArgument("guided attention width must be positive".into()));
    }
    let (t_len, n_len) = (att.frames as f64, att.phonemes as f64);
    let mut total = 0.0;
    for t in 0..att.frames {
        let sum: f64 = att.row(t).iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NonStochasticRow { row: t, sum });
        }
        for (n, &a) in att.row(t).iter().enumerate() {
            let diff = n as f64 / n_len - t as f64 / t_len;
            total += a * (1.0 - (-(diff * diff) / (2.0 * g * g)).exp());
        }
    }
    Ok(total / (t_len * n_len))
}
