//! Scores a toy system output with BLEU, BLEU* and length ratios.

use lenctl::eval::{corpus_bleu, length_stats, EvalRecord};

fn main() -> lenctl::Result<()> {
    let src = ["the cat sat on the mat", "a quick brown fox", "rain again today"];
    let refs = ["le chat est assis sur le tapis", "un renard brun rapide", "encore de la pluie aujourd'hui"];
    let hyps = ["le chat assis sur le tapis", "un renard brun rapide", "encore la pluie"];

    let bleu = corpus_bleu(&hyps, &refs)?;
    let lengths = length_stats(&hyps, &src, &refs)?;
    print!("{}", EvalRecord::new(&bleu, &lengths).to_text());
    println!("record: {}", serde_json::to_string(&EvalRecord::new(&bleu, &lengths)).unwrap());
    Ok(())
}
