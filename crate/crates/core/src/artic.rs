//! IPA frontend: feature-table ingestion, segmentation of phonemic strings and
//! conversion of each segment into a 66-dimensional articulatory vector.
//!
//! An articulatory vector is the concatenation of two blocks:
//!
//! * 24 ternary phonological features (`-1`, `0`, `+1`), in the PanPhon order
//!   given by [`PANPHON_FEATURES`];
//! * 42 one-hot articulatory features, partitioned into named groups
//!   (phoneme class, vowel frontness, openness, rounding, consonant place,
//!   manner, voicing, length). Within a group at most one column is active.
//!
//! Table keys and input text are both brought to Unicode NFD before matching,
//! so `ã` typed as one code point or as `a` + U+0303 resolve to the same row.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const PANPHON_DIM: usize = 24;
pub const CATEGORICAL_DIM: usize = 42;
pub const ARTIC_DIM: usize = PANPHON_DIM + CATEGORICAL_DIM;

pub const PANPHON_FEATURES: [&str; PANPHON_DIM] = [
    "syl", "son", "cons", "cont", "delrel", "lat", "nas", "strid", "voi", "sg", "cg", "ant", "cor", "distr", "lab",
    "hi", "lo", "back", "round", "velaric", "tense", "long", "hitone", "hireg",
];

/// Index of the `syl` (syllabic) feature inside the ternary block.
pub const SYLLABIC: usize = 0;

const BUNDLED_TABLE: &str = include_str!("../data/features.tsv");

/// Symbol of the word-boundary row in the bundled table.
pub const WORD_BOUNDARY: &str = "_";

/// Which part of the articulatory vector a consumer looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureBlock {
    PanPhon,
    Categorical,
    Combined,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 3] = [Self::PanPhon, Self::Categorical, Self::Combined];

    pub fn range(self) -> Range<usize> {
        match self {
            FeatureBlock::PanPhon => 0..PANPHON_DIM,
            FeatureBlock::Categorical => PANPHON_DIM..ARTIC_DIM,
            FeatureBlock::Combined => 0..ARTIC_DIM,
        }
    }

    pub fn dim(self) -> usize {
        self.range().len()
    }

    /// Recovers the block from an input dimension (24, 42 or 66).
    pub fn from_dim(dim: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.dim() == dim)
    }
}

impl fmt::Display for FeatureBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureBlock::PanPhon => "panphon",
            FeatureBlock::Categorical => "categorical",
            FeatureBlock::Combined => "combined",
        })
    }
}

impl std::str::FromStr for FeatureBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "panphon" => Ok(Self::PanPhon),
            "categorical" => Ok(Self::Categorical),
            "combined" => Ok(Self::Combined),
            other => Err(Error::InvalidArgument(format!("unknown feature block {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct ArticulatoryVector([f64; ARTIC_DIM]);

impl ArticulatoryVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ARTIC_DIM] =
            values.try_into().map_err(|_| Error::DimensionMismatch { expected: ARTIC_DIM, found: values.len() })?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn panphon(&self) -> &[f64] {
        &self.0[FeatureBlock::PanPhon.range()]
    }

    pub fn categorical(&self) -> &[f64] {
        &self.0[FeatureBlock::Categorical.range()]
    }

    pub fn block(&self, block: FeatureBlock) -> &[f64] {
        &self.0[block.range()]
    }
}

impl fmt::Debug for ArticulatoryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ArticulatoryVector").field(&&self.0[..]).finish()
    }
}

/// A named one-hot group inside the 42-dim block. `span` is relative to the
/// start of that block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: String,
    pub span: Range<usize>,
    pub values: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhonemeCategory {
    Consonant,
    Vowel,
    Special,
}

impl PhonemeCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            PhonemeCategory::Consonant => "consonant",
            PhonemeCategory::Vowel => "vowel",
            PhonemeCategory::Special => "special",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeatureTable {
    symbols: Vec<String>,
    vectors: Vec<ArticulatoryVector>,
    index: HashMap<String, usize>,
    groups: Vec<FeatureGroup>,
    max_symbol_chars: usize,
}

impl FeatureTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The table shipped with the crate (116 entries).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled feature table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

        let (header_line, header) =
            lines.next().ok_or(Error::MalformedRow { line: 1, reason: "missing header row".into() })?;
        let groups = parse_header(header_line, header)?;

        let mut table = FeatureTable {
            symbols: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            groups,
            max_symbol_chars: 0,
        };
        for (line, row) in lines {
            table.push_row(line, row)?;
        }
        Ok(table)
    }

    fn push_row(&mut self, line: usize, row: &str) -> Result<()> {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 1 + ARTIC_DIM {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", 1 + ARTIC_DIM, cols.len()),
            });
        }
        let symbol: String = cols[0].trim().nfd().collect();
        if symbol.is_empty() {
            return Err(Error::MalformedRow { line, reason: "empty symbol".into() });
        }

        let mut values = [0.0; ARTIC_DIM];
        for (k, raw) in cols[1..].iter().enumerate() {
            let raw = raw.trim();
            let v = match (k < PANPHON_DIM, raw) {
                (true, "-1") => -1.0,
                (_, "0") => 0.0,
                (_, "1") => 1.0,
                _ => {
                    return Err(Error::MalformedRow {
                        line,
                        reason: format!("column {} has invalid value {raw:?}", k + 2),
                    })
                }
            };
            values[k] = v;
        }

        for g in &self.groups {
            let active = values[PANPHON_DIM..][g.span.clone()].iter().filter(|&&v| v != 0.0).count();
            if active > 1 {
                return Err(Error::OneHotViolation { symbol, group: g.name.clone() });
            }
        }

        if self.index.contains_key(&symbol) {
            return Err(Error::DuplicateSymbol(symbol));
        }
        self.max_symbol_chars = self.max_symbol_chars.max(symbol.chars().count());
        self.index.insert(symbol.clone(), self.symbols.len());
        self.symbols.push(symbol);
        self.vectors.push(ArticulatoryVector(values));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn panphon_dim(&self) -> usize {
        PANPHON_DIM
    }

    pub fn categorical_dim(&self) -> usize {
        CATEGORICAL_DIM
    }

    /// Symbols in file order, NFD-normalized.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &ArticulatoryVector)> {
        self.symbols.iter().map(String::as_str).zip(self.vectors.iter())
    }

    /// Row of `symbol`, which is normalized before lookup.
    pub fn row_of(&self, symbol: &str) -> Option<usize> {
        let key: String = symbol.nfd().collect();
        self.index.get(&key).copied()
    }

    pub fn get(&self, symbol: &str) -> Option<&ArticulatoryVector> {
        self.row_of(symbol).map(|r| &self.vectors[r])
    }

    pub fn vector(&self, row: usize) -> &ArticulatoryVector {
        &self.vectors[row]
    }

    pub fn symbol(&self, row: usize) -> &str {
        &self.symbols[row]
    }

    /// Category from the `class` group when the table has one, otherwise from
    /// the syllabic feature.
    pub fn category(&self, row: usize) -> PhonemeCategory {
        let v = &self.vectors[row];
        if let Some(g) = self.groups.iter().find(|g| g.name == "class") {
            let block = &v.categorical()[g.span.clone()];
            if let Some(k) = block.iter().position(|&x| x != 0.0) {
                match g.values[k].as_str() {
                    "vowel" => return PhonemeCategory::Vowel,
                    "consonant" => return PhonemeCategory::Consonant,
                    _ => return PhonemeCategory::Special,
                }
            }
        }
        if v.panphon().iter().all(|&x| x == 0.0) {
            PhonemeCategory::Special
        } else if v.panphon()[SYLLABIC] > 0.0 {
            PhonemeCategory::Vowel
        } else {
            PhonemeCategory::Consonant
        }
    }
}

fn parse_header(line: usize, header: &str) -> Result<Vec<FeatureGroup>> {
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols.len() != 1 + ARTIC_DIM {
        return Err(Error::MalformedRow {
            line,
            reason: format!("header has {} columns, expected {}", cols.len(), 1 + ARTIC_DIM),
        });
    }
    let mut groups: Vec<FeatureGroup> = Vec::new();
    for (k, name) in cols[1 + PANPHON_DIM..].iter().enumerate() {
        let (group, value) = name.split_once(':').ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("one-hot column {name:?} is not of the form group:value"),
        })?;
        match groups.last_mut() {
            Some(g) if g.name == group => {
                g.span.end = k + 1;
                g.values.push(value.to_string());
            }
            _ => {
                if groups.iter().any(|g| g.name == group) {
                    return Err(Error::MalformedRow { line, reason: format!("group {group:?} is not contiguous") });
                }
                groups.push(FeatureGroup { name: group.to_string(), span: k..k + 1, values: vec![value.to_string()] });
            }
        }
    }
    Ok(groups)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeSegment {
    pub symbol: String,
    pub table_row: usize,
}

#[derive(Clone, Debug)]
pub struct SegmentOptions {
    /// Characters dropped between segments, besides whitespace.
    pub delimiters: Vec<char>,
    /// When set and present in the table, every whitespace run becomes one
    /// segment of this row instead of being dropped.
    pub word_boundary: Option<String>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            delimiters: vec!['.', ',', ';', ':', '!', '?', '|', '‖', '-', '\'', '"', 'ˈ', 'ˌ'],
            word_boundary: None,
        }
    }
}

impl SegmentOptions {
    pub fn with_word_boundary(mut self, symbol: impl Into<String>) -> Self {
        self.word_boundary = Some(symbol.into());
        self
    }
}

/// Greedy longest-match segmentation with default options.
pub fn segment_ipa(text: &str, table: &FeatureTable) -> Result<Vec<PhonemeSegment>> {
    segment_ipa_with(text, table, &SegmentOptions::default())
}

/// Positions in [`Error::UnknownSymbol`] are code-point offsets into the
/// NFD-normalized input.
pub fn segment_ipa_with(text: &str, table: &FeatureTable, opts: &SegmentOptions) -> Result<Vec<PhonemeSegment>> {
    let chars: Vec<char> = text.nfd().collect();
    let boundary_row = opts.word_boundary.as_deref().and_then(|s| table.row_of(s));

    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            let start = i;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if let Some(row) = boundary_row {
                // leading/trailing whitespace carries no boundary
                if start > 0 && i < chars.len() {
                    out.push(PhonemeSegment { symbol: table.symbol(row).to_string(), table_row: row });
                }
            }
            continue;
        }
        if opts.delimiters.contains(&c) {
            i += 1;
            continue;
        }

        let run_end = (i..chars.len())
            .find(|&j| chars[j].is_whitespace() || opts.delimiters.contains(&chars[j]))
            .unwrap_or(chars.len());
        let longest = table.max_symbol_chars.min(run_end - i);
        let matched = (1..=longest).rev().find_map(|len| {
            let key: String = chars[i..i + len].iter().collect();
            table.index.get(&key).map(|&row| (len, row))
        });
        match matched {
            Some((len, table_row)) => {
                out.push(PhonemeSegment { symbol: table.symbol(table_row).to_string(), table_row });
                i += len;
            }
            None => {
                let mut end = i + 1;
                while end < run_end && is_combining_mark(chars[end]) {
                    end += 1;
                }
                return Err(Error::UnknownSymbol { position: i, cluster: chars[i..end].iter().collect() });
            }
        }
    }
    Ok(out)
}

/// The table row for `segment`, verbatim.
pub fn vectorize<'t>(segment: &PhonemeSegment, table: &'t FeatureTable) -> &'t ArticulatoryVector {
    table.vector(segment.table_row)
}

pub fn featurize_utterance(text: &str, table: &FeatureTable) -> Result<Vec<ArticulatoryVector>> {
    featurize_utterance_with(text, table, &SegmentOptions::default())
}

pub fn featurize_utterance_with(
    text: &str,
    table: &FeatureTable,
    opts: &SegmentOptions,
) -> Result<Vec<ArticulatoryVector>> {
    Ok(segment_ipa_with(text, table, opts)?.iter().map(|s| vectorize(s, table).clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut cols = vec!["symbol".to_string()];
        cols.extend(PANPHON_FEATURES.iter().map(|s| s.to_string()));
        cols.extend((0..CATEGORICAL_DIM).map(|k| format!("g{}:v{}", k / 6, k % 6)));
        cols.join("\t")
    }

    fn row(symbol: &str, pan: i32, hot: &[usize]) -> String {
        let mut cols = vec![symbol.to_string()];
        cols.extend((0..PANPHON_DIM).map(|_| pan.to_string()));
        cols.extend((0..CATEGORICAL_DIM).map(|k| if hot.contains(&k) { "1" } else { "0" }.to_string()));
        cols.join("\t")
    }

    fn small_table(rows: &[String]) -> Result<FeatureTable> {
        let mut text = format!("# comment\n{}\n", header());
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        FeatureTable::parse(&text)
    }

    #[test]
    fn loads_three_rows() {
        let t = small_table(&[row("p", -1, &[0]), row("a", 1, &[1]), row("pa", 0, &[])]).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.groups().len(), 7);
        assert_eq!(t.groups()[0].span, 0..6);
    }

    #[test]
    fn rejects_out_of_range_ternary() {
        let mut bad = row("p", 1, &[]);
        bad = bad.replacen("\t1", "\t2", 1);
        let err = small_table(&[bad]).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn rejects_wrong_column_count() {
        let err = small_table(&["p\t1\t0".to_string()]).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { .. }));
    }

    #[test]
    fn rejects_duplicates_after_normalization() {
        let err = small_table(&[row("a", 1, &[]), row("a", 1, &[])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateSymbol(ref s) if s == "a"));
        // precomposed vs decomposed forms collide
        let err = small_table(&[row("\u{e3}", 1, &[]), row("a\u{303}", 1, &[])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateSymbol(_)));
    }

    #[test]
    fn rejects_two_hot_in_group() {
        let err = small_table(&[row("p", 0, &[0, 1])]).unwrap_err();
        assert!(matches!(err, Error::OneHotViolation { ref group, .. } if group == "g0"));
        // different groups are fine
        small_table(&[row("p", 0, &[0, 6])]).unwrap();
    }

    #[test]
    fn missing_file_is_file_not_found() {
        let err = FeatureTable::load("/nonexistent/table.tsv").unwrap_err();
        assert!(matches!(err, Error::FileNotFound(_)));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn segmentation_examples() {
        let t = small_table(&[row("p", -1, &[0]), row("a", 1, &[1]), row("pa", 0, &[])]).unwrap();
        assert!(segment_ipa("", &t).unwrap().is_empty());
        let segs = segment_ipa("pa", &t).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].symbol, "pa");
        match segment_ipa("p5", &t).unwrap_err() {
            Error::UnknownSymbol { position, cluster } => {
                assert_eq!(position, 1);
                assert_eq!(cluster, "5");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn featurize_without_compound_key() {
        let t = small_table(&[row("p", -1, &[0]), row("a", 1, &[1])]).unwrap();
        assert!(featurize_utterance("", &t).unwrap().is_empty());
        let v = featurize_utterance("pa", &t).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], *t.get("p").unwrap());
        assert!(matches!(featurize_utterance("paxa", &t), Err(Error::UnknownSymbol { position: 2, .. })));
    }

    #[test]
    fn bundled_p_and_a() {
        let t = FeatureTable::bundled();
        let p = t.get("p").unwrap();
        let a = t.get("a").unwrap();
        // PanPhon "p": -syl -son +cons -cont ... -voi ... +ant -cor +lab
        let expect_p = [
            -1., -1., 1., -1., -1., -1., -1., -1., -1., -1., -1., 1., -1., 0., 1., -1., -1., -1., -1., -1., 0., -1.,
            0., 0.,
        ];
        assert_eq!(p.panphon(), &expect_p);
        let hot = |sym: &ArticulatoryVector, group: &str, value: &str| {
            let g = t.groups().iter().find(|g| g.name == group).unwrap();
            let k = g.values.iter().position(|v| v == value).unwrap();
            sym.categorical()[g.span.start + k]
        };
        assert_eq!(hot(p, "manner", "plosive"), 1.0);
        assert_eq!(hot(p, "place", "bilabial"), 1.0);
        assert_eq!(hot(p, "voicing", "voiceless"), 1.0);
        assert_eq!(p.panphon()[SYLLABIC], -1.0);
        assert_eq!(a.panphon()[SYLLABIC], 1.0);
        assert_eq!(vectorize(&segment_ipa("p", &t).unwrap()[0], &t), p);
        assert_eq!(t.category(t.row_of("p").unwrap()), PhonemeCategory::Consonant);
        assert_eq!(t.category(t.row_of("a").unwrap()), PhonemeCategory::Vowel);
        assert_eq!(t.category(t.row_of("_").unwrap()), PhonemeCategory::Special);
    }

    #[test]
    fn diacritics_and_delimiters() {
        let t = FeatureTable::bundled();
        let segs = segment_ipa("ˈt͡ʃaːo tʰã.", &t).unwrap();
        let syms: Vec<_> = segs.iter().map(|s| s.symbol.nfc().collect::<String>()).collect();
        assert_eq!(syms, ["t͡ʃ", "aː", "o", "tʰ", "ã"]);
        let opts = SegmentOptions::default().with_word_boundary(WORD_BOUNDARY);
        let segs = segment_ipa_with(" pa  ta ", &t, &opts).unwrap();
        let syms: Vec<_> = segs.iter().map(|s| s.symbol.as_str()).collect();
        assert_eq!(syms, ["p", "a", "_", "t", "a"]);
    }

    #[test]
    fn unknown_diacritic_reports_cluster() {
        let t = FeatureTable::bundled();
        // U+0330 (tilde below) is not in the table on its own or on "a"
        match segment_ipa("pa\u{330}", &t).unwrap_err() {
            Error::UnknownSymbol { position, cluster } => {
                assert_eq!(position, 2);
                assert_eq!(cluster, "\u{330}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn block_dims() {
        assert_eq!(FeatureBlock::PanPhon.dim() + FeatureBlock::Categorical.dim(), 66);
        assert_eq!(FeatureBlock::from_dim(42), Some(FeatureBlock::Categorical));
        assert_eq!(FeatureBlock::from_dim(7), None);
    }
}
