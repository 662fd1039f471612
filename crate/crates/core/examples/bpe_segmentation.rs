//! Learns a small merge table and shows how sentences split into subwords,
//! with the characters each token contributes.

use lenctl::textproc::{apply_bpe, char_length, detokenize, learn_bpe};

fn main() -> lenctl::Result<()> {
    let corpus = [
        "the lower the newer",
        "newest and lowest",
        "wider and widest",
        "the new lower road",
    ];
    let merges = learn_bpe(&corpus, 12)?;
    println!("{} merges:", merges.len());
    for (a, b) in merges.merges() {
        println!("  {a} + {b}");
    }
    for sentence in ["the newest road", "lowering widths"] {
        let seq = apply_bpe(sentence, &merges);
        println!("\n{sentence:?} ({} chars)", char_length(sentence));
        for ((tok, len), cur) in seq.tokens.iter().zip(&seq.char_lens).zip(seq.cursor_positions()) {
            println!("  {tok:<10} chars={len} cursor={cur}");
        }
        assert_eq!(detokenize(&seq)?, sentence);
        assert_eq!(seq.total_chars, char_length(sentence));
    }
    Ok(())
}
