//! Segment an IPA string and print each phoneme's articulatory vector.
//!
//! cargo run --example featurize -- "ˈʃɪp tʰeɪ"

use laml::artic::{segment_ipa_with, vectorize, FeatureTable, SegmentOptions, PANPHON_DIM, WORD_BOUNDARY};

fn main() -> laml::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "ʃiː ˈdʒʊŋ".to_string());
    let table = FeatureTable::bundled();
    let opts = SegmentOptions::default().with_word_boundary(WORD_BOUNDARY);

    for seg in segment_ipa_with(&text, &table, &opts)? {
        let v = vectorize(&seg, &table);
        let ternary: String = v.panphon().iter().map(|&x| match x as i8 { 1 => '+', -1 => '-', _ => '0' }).collect();
        let active: Vec<&str> = table
            .groups()
            .iter()
            .filter_map(|g| {
                let block = &v.categorical()[g.span.clone()];
                block.iter().position(|&x| x == 1.0).map(|i| g.values[i].as_str())
            })
            .collect();
        println!("{:<4} {:<10} {ternary} {}", seg.symbol, table.category(seg.table_row).as_str(), active.join(","));
    }
    println!("({} PanPhon + {} one-hot columns)", PANPHON_DIM, table.categorical_dim());
    Ok(())
}
