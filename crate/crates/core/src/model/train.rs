use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{LengthMode, ModelConfig};
use super::transformer::{DropoutPlan, DropoutRates, Model};
use super::vocab::PAD;
use crate::corpus::{make_batches, SentencePair};
use crate::error::{Error, Result};
use crate::nnet::{Adam, GradAccumulator, ParamStore, Tensor, TrainHyper};

/// One validation evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the updates since the previous record.
    pub train_loss: Option<f64>,
    pub dev_loss: f64,
    /// Whether this evaluation improved on every earlier one.
    pub best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub checkpoint: Checkpoint,
    pub log: Vec<TrainRecord>,
    /// Updates actually performed.
    pub steps: usize,
}

fn diverged(step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged { step, loss: f64::NAN },
        other => other,
    }
}

/// Trains with Adam and label smoothing, evaluating on `dev` every
/// `eval_every` updates and stopping after `patience` evaluations without
/// improvement or at `max_steps`.
pub fn train(
    mut model: Model<f32>,
    train: &[SentencePair],
    dev: &[SentencePair],
    hyper: &TrainHyper,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let train_tp = model.tokenize_corpus(train)?;
    let dev_tp = model.tokenize_corpus(dev)?;
    let rates = DropoutRates {
        hidden: hyper.dropout,
        attn: hyper.attn_dropout,
    };
    let eval = |m: &Model<f32>, step: usize| m.mean_loss(&dev_tp, hyper.label_smoothing).map_err(|e| diverged(step, e));

    let mut best_loss = eval(&model, 0)?;
    let mut best_params: ParamStore<f32> = model.params().clone();
    let mut best_step = 0;
    let mut log = vec![TrainRecord {
        step: 0,
        epoch: 0,
        lr: 0.0,
        train_loss: None,
        dev_loss: best_loss,
        best: true,
    }];

    let mut adam = Adam::new(model.params(), hyper);
    let mut acc = GradAccumulator::new(model.params().len(), hyper.accumulate);
    let (mut step, mut micro, mut epoch, mut stale) = (0usize, 0u64, 0usize, 0usize);
    let (mut run_sum, mut run_n) = (0.0, 0usize);

    'outer: while step < hyper.max_steps {
        let batches = make_batches(&train_tp, hyper.max_tokens_per_batch, PAD, hyper.seed.wrapping_add(epoch as u64))?;
        for batch in &batches {
            let plan = DropoutPlan {
                rates,
                seed: hyper.seed,
                step: micro,
            };
            micro += 1;
            let (loss, grads) = model
                .loss_and_grads(&batch.pairs, hyper.label_smoothing, Some(plan))
                .map_err(|e| diverged(step + 1, e))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step: step + 1, loss });
            }
            run_sum += loss;
            run_n += 1;
            let Some(g) = acc.push(&grads) else { continue };
            let lr = adam.step(model.params_mut(), &g, hyper).map_err(|e| diverged(step + 1, e))?;
            step += 1;
            if step % hyper.eval_every == 0 || step == hyper.max_steps {
                let dev_loss = eval(&model, step)?;
                let improved = dev_loss < best_loss;
                log.push(TrainRecord {
                    step,
                    epoch,
                    lr,
                    train_loss: (run_n > 0).then(|| run_sum / run_n as f64),
                    dev_loss,
                    best: improved,
                });
                (run_sum, run_n) = (0.0, 0);
                if improved {
                    best_loss = dev_loss;
                    best_params = model.params().clone();
                    best_step = step;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= hyper.patience {
                        break 'outer;
                    }
                }
            }
            if step >= hyper.max_steps {
                break 'outer;
            }
        }
        epoch += 1;
    }

    *model.params_mut() = best_params;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            hyper: hyper.clone(),
            step: best_step,
            dev_loss: Some(best_loss),
            lineage: None,
            meta: Default::default(),
        },
        log,
        steps: step,
    })
}

/// Copies `base` into a model with `target`'s length mode. When the target
/// adds token conditioning, the three length tokens get fresh embedding rows
/// and output columns drawn from `seed`; every other value is copied.
pub fn prepare_finetune(base: &Model<f32>, target: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    let b = base.config();
    for (key, have, want) in [
        ("d_model", b.d_model, target.d_model),
        ("ffn_hidden", b.ffn_hidden, target.ffn_hidden),
        ("heads", b.heads, target.heads),
        ("layers", b.layers, target.layers),
    ] {
        if have != want {
            return Err(Error::Incompatible(format!("{key} is {have} in the base, {want} requested")));
        }
    }
    let base_token = b.length_mode.uses_token();
    let want_token = target.length_mode.uses_token();
    if base_token && !want_token {
        return Err(Error::Incompatible(format!(
            "base mode `{}` has length tokens that `{}` would drop",
            b.length_mode, target.length_mode
        )));
    }
    let vocab = if want_token {
        base.vocab().with_length_tokens()
    } else {
        base.vocab().clone()
    };
    let (old_v, new_v) = (base.vocab().len(), vocab.len());
    let d = b.d_model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    for (_, name, t) in base.params().iter() {
        let t = match name {
            _ if new_v == old_v => t.clone(),
            "embed" => {
                let fresh = Tensor::<f32>::randn(&[new_v - old_v, d], 1.0, &mut rng);
                let mut data = t.data().to_vec();
                data.extend_from_slice(fresh.data());
                Tensor::matrix(new_v, d, data)?
            }
            "out.w" => {
                let std = (2.0 / (d + new_v) as f64).sqrt();
                let fresh = Tensor::<f32>::randn(&[d, new_v - old_v], std, &mut rng);
                let mut data = Vec::with_capacity(d * new_v);
                for r in 0..d {
                    data.extend_from_slice(t.row(r));
                    data.extend_from_slice(fresh.row(r));
                }
                Tensor::matrix(d, new_v, data)?
            }
            "out.b" => {
                let mut data = t.data().to_vec();
                data.resize(new_v, 0.0);
                Tensor::matrix(1, new_v, data)?
            }
            _ => t.clone(),
        };
        params.add(name, t)?;
    }
    let config = ModelConfig {
        vocab_size: new_v,
        ..target.clone()
    };
    Model::from_parts(config, vocab, base.merges().clone(), params)
}

/// Continues training `base` with length information of kind `mode`.
pub fn finetune(
    base: &Checkpoint,
    train_set: &[SentencePair],
    dev: &[SentencePair],
    mode: LengthMode,
    hyper: &TrainHyper,
) -> Result<TrainOutcome> {
    let target = ModelConfig {
        length_mode: mode,
        ..base.model.config().clone()
    };
    let model = prepare_finetune(&base.model, &target, hyper.seed)?;
    let mut out = train(model, train_set, dev, hyper)?;
    out.checkpoint.lineage = Some(base.fingerprint()?);
    Ok(out)
}
