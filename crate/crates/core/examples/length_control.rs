//! Fine-tunes a baseline with length tokens and with a length encoding,
//! then decodes the same sentences with different length requests.

use lenctl::corpus::{generate_synthetic, LengthClass, SynthSpec, Thresholds};
use lenctl::decode::{translate, DecodeControl, TargetLen};
use lenctl::encodings::Variant;
use lenctl::model::{finetune, train, LengthMode, Model, ModelConfig, Vocab};
use lenctl::nnet::TrainHyper;
use lenctl::textproc::learn_bpe;

fn main() -> lenctl::Result<()> {
    let th = Thresholds::default();
    let spec = SynthSpec { num_pairs: 800, ..SynthSpec::default() };
    let train_set = generate_synthetic(&spec, &th)?;
    let dev = generate_synthetic(&SynthSpec { num_pairs: 60, seed: 100, realizations_per_source: 1, ..spec.clone() }, &th)?;
    let text: Vec<&str> = train_set.iter().flat_map(|p| [p.src.as_str(), p.tgt.as_str()]).collect();
    let merges = learn_bpe(&text, 150)?;
    let config = ModelConfig { d_model: 32, ffn_hidden: 64, heads: 4, layers: 1, ..ModelConfig::default() };
    let hyper = TrainHyper { lr_peak: 3e-3, warmup_steps: 50, dropout: 0.1, max_steps: 600, eval_every: 100, ..TrainHyper::default() };
    let base = train(Model::build(config, Vocab::build(&text, &merges, false), merges, 1)?, &train_set, &dev, &hyper)?;

    let ft = TrainHyper { max_steps: 400, ..hyper };
    let token = finetune(&base.checkpoint, &train_set, &dev, LengthMode::Token, &ft)?;
    let abs = finetune(&base.checkpoint, &train_set, &dev, LengthMode::Enc(Variant::LeAbs), &ft)?;

    for pair in dev.iter().take(3) {
        println!("\nsource ({} chars): {}", pair.src_chars, pair.src);
        for class in LengthClass::ALL {
            let ctrl = DecodeControl { token_class: Some(class), ..DecodeControl::default() };
            let t = translate(&token.checkpoint.model, &pair.src, &ctrl)?;
            println!("  token {:<7} {:>3} chars  {}", class.to_string(), t.out_chars, t.output);
        }
        for budget in [pair.src_chars / 2, pair.src_chars, pair.src_chars * 3 / 2] {
            let ctrl = DecodeControl { target_len: TargetLen::Fixed(budget.max(1)), ..DecodeControl::default() };
            let t = translate(&abs.checkpoint.model, &pair.src, &ctrl)?;
            println!("  abs   len={budget:<3} {:>3} chars  {}", t.out_chars, t.output);
        }
    }
    Ok(())
}
