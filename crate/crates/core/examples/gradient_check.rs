//! Finite-difference check of the full encoder-decoder gradient in f64.

use lenctl::corpus::{SentencePair, Thresholds};
use lenctl::encodings::Variant;
use lenctl::model::{LengthMode, Model, ModelConfig, Vocab};
use lenctl::nnet::GradCheckConfig;
use lenctl::textproc::learn_bpe;

fn main() -> lenctl::Result<()> {
    let th = Thresholds::default();
    let pairs = vec![
        SentencePair::new("ab cd", "abx cdx", &th)?,
        SentencePair::new("cd ab ab", "cd ab", &th)?,
    ];
    let text: Vec<&str> = pairs.iter().flat_map(|p| [p.src.as_str(), p.tgt.as_str()]).collect();
    let merges = learn_bpe(&text, 4)?;
    for mode in [LengthMode::None, LengthMode::Token, LengthMode::TokenEnc(Variant::LeAbs), LengthMode::Enc(Variant::LeRel)] {
        let vocab = Vocab::build(&text, &merges, mode.uses_token());
        let config = ModelConfig {
            d_model: 8,
            ffn_hidden: 16,
            heads: 2,
            layers: 1,
            length_mode: mode,
            ..ModelConfig::default()
        };
        let model = Model::<f64>::build(config, vocab, merges.clone(), 1)?;
        let report = model.check_gradients(&pairs, 0.1, &GradCheckConfig { tolerance: 1e-4, ..Default::default() })?;
        println!(
            "{mode:<14} params={:<5} max rel err {:.2e}  {}",
            report.checked,
            report.max_rel_error,
            if report.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
