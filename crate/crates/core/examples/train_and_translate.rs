//! Trains a small baseline on synthetic data, saves and reloads the
//! checkpoint, then translates a few test sentences.

use lenctl::corpus::{generate_synthetic, SynthSpec, Thresholds};
use lenctl::decode::{translate, DecodeControl};
use lenctl::model::{train, Checkpoint, Model, ModelConfig, Vocab};
use lenctl::nnet::TrainHyper;
use lenctl::textproc::learn_bpe;

fn main() -> lenctl::Result<()> {
    let th = Thresholds::default();
    let spec = SynthSpec { num_pairs: 600, ..SynthSpec::default() };
    let train_set = generate_synthetic(&spec, &th)?;
    let dev = generate_synthetic(&SynthSpec { num_pairs: 60, seed: 100, realizations_per_source: 1, ..spec.clone() }, &th)?;

    let text: Vec<&str> = train_set.iter().flat_map(|p| [p.src.as_str(), p.tgt.as_str()]).collect();
    let merges = learn_bpe(&text, 120)?;
    let vocab = Vocab::build(&text, &merges, false);
    let config = ModelConfig { d_model: 32, ffn_hidden: 64, heads: 4, layers: 1, ..ModelConfig::default() };
    let model = Model::build(config, vocab, merges, 1)?;
    let hyper = TrainHyper {
        lr_peak: 3e-3,
        warmup_steps: 50,
        dropout: 0.1,
        max_steps: 400,
        eval_every: 100,
        ..TrainHyper::default()
    };
    let out = train(model, &train_set, &dev, &hyper)?;
    for r in &out.log {
        println!("step {:>4}  lr {:.2e}  dev loss {:.3}", r.step, r.lr, r.dev_loss);
    }

    let path = std::env::temp_dir().join("lenctl_example.lctl");
    out.checkpoint.save(&path)?;
    let ckpt = Checkpoint::load(&path)?;
    println!("checkpoint {} ({})", path.display(), &ckpt.fingerprint()?[..16]);

    for pair in dev.iter().take(5) {
        let t = translate(&ckpt.model, &pair.src, &DecodeControl::default())?;
        println!("\nsrc {}\nref {}\nhyp {}", pair.src, pair.tgt, t.output);
    }
    Ok(())
}
