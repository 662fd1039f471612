use std::sync::LazyLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{LengthMode, ModelConfig};
use super::vocab::{Vocab, BOS, EOS};
use crate::corpus::{Batch, LengthClass, SentencePair, TokenizedPair};
use crate::encodings::{EncodingCache, EncodingSpec, Variant};
use crate::error::{Error, Result};
use crate::nnet::{gradient_check, GradCheckConfig, GradCheckReport, Grads, Graph, NodeId, ParamId, ParamStore, Scalar, Tensor};
use crate::textproc::{apply_bpe, MergeTable, TokenSeq};

static ENCODINGS: LazyLock<EncodingCache> = LazyLock::new(EncodingCache::new);

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

fn xavier(fan_in: usize, fan_out: usize) -> Init {
    Init::Normal((2.0 / (fan_in + fan_out) as f64).sqrt())
}

type Spec = (String, Vec<usize>, Init);

fn norm_specs(prefix: &str, d: usize, out: &mut Vec<Spec>) {
    out.push((format!("{prefix}.g"), vec![1, d], Init::Ones));
    out.push((format!("{prefix}.b"), vec![1, d], Init::Zeros));
}

fn attn_specs(prefix: &str, d: usize, out: &mut Vec<Spec>) {
    for m in ["q", "k", "v", "o"] {
        out.push((format!("{prefix}.w{m}"), vec![d, d], xavier(d, d)));
        out.push((format!("{prefix}.b{m}"), vec![1, d], Init::Zeros));
    }
}

fn ffn_specs(prefix: &str, d: usize, f: usize, out: &mut Vec<Spec>) {
    out.push((format!("{prefix}.w1"), vec![d, f], xavier(d, f)));
    out.push((format!("{prefix}.b1"), vec![1, f], Init::Zeros));
    out.push((format!("{prefix}.w2"), vec![f, d], xavier(f, d)));
    out.push((format!("{prefix}.b2"), vec![1, d], Init::Zeros));
}

/// Parameter names, shapes and initializers in creation order.
fn param_specs(c: &ModelConfig) -> Vec<Spec> {
    let (d, f, v) = (c.d_model, c.ffn_hidden, c.vocab_size);
    let mut s = vec![("embed".to_string(), vec![v, d], Init::Normal(1.0))];
    for l in 0..c.layers {
        let p = format!("enc.{l}");
        norm_specs(&format!("{p}.ln1"), d, &mut s);
        attn_specs(&format!("{p}.self"), d, &mut s);
        norm_specs(&format!("{p}.ln2"), d, &mut s);
        ffn_specs(&format!("{p}.ffn"), d, f, &mut s);
    }
    norm_specs("enc.ln", d, &mut s);
    for l in 0..c.layers {
        let p = format!("dec.{l}");
        norm_specs(&format!("{p}.ln1"), d, &mut s);
        attn_specs(&format!("{p}.self"), d, &mut s);
        norm_specs(&format!("{p}.ln2"), d, &mut s);
        attn_specs(&format!("{p}.cross"), d, &mut s);
        norm_specs(&format!("{p}.ln3"), d, &mut s);
        ffn_specs(&format!("{p}.ffn"), d, f, &mut s);
    }
    norm_specs("dec.ln", d, &mut s);
    s.push(("out.w".to_string(), vec![d, v], xavier(d, v)));
    s.push(("out.b".to_string(), vec![1, v], Init::Zeros));
    s
}

#[derive(Debug, Clone)]
struct Norm {
    g: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct Attn {
    w: [ParamId; 4],
    b: [ParamId; 4],
}

#[derive(Debug, Clone)]
struct Ffn {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone)]
struct Layout {
    embed: ParamId,
    enc: Vec<EncLayer>,
    enc_ln: Norm,
    dec: Vec<DecLayer>,
    dec_ln: Norm,
    out_w: ParamId,
    out_b: ParamId,
}

impl Layout {
    fn resolve<T: Scalar>(params: &ParamStore<T>, c: &ModelConfig) -> Result<Self> {
        let specs = param_specs(c);
        if specs.len() != params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &specs {
            match params.by_name(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Shape(format!(
                        "parameter `{name}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(Error::Shape(format!("missing parameter `{name}`"))),
            }
        }
        let id = |n: String| params.id(&n).expect("checked above");
        let norm = |p: &str| Norm {
            g: id(format!("{p}.g")),
            b: id(format!("{p}.b")),
        };
        let attn = |p: &str| Attn {
            w: ["q", "k", "v", "o"].map(|m| id(format!("{p}.w{m}"))),
            b: ["q", "k", "v", "o"].map(|m| id(format!("{p}.b{m}"))),
        };
        let ffn = |p: &str| Ffn {
            w1: id(format!("{p}.w1")),
            b1: id(format!("{p}.b1")),
            w2: id(format!("{p}.w2")),
            b2: id(format!("{p}.b2")),
        };
        Ok(Self {
            embed: id("embed".into()),
            enc: (0..c.layers)
                .map(|l| EncLayer {
                    ln1: norm(&format!("enc.{l}.ln1")),
                    attn: attn(&format!("enc.{l}.self")),
                    ln2: norm(&format!("enc.{l}.ln2")),
                    ffn: ffn(&format!("enc.{l}.ffn")),
                })
                .collect(),
            enc_ln: norm("enc.ln"),
            dec: (0..c.layers)
                .map(|l| DecLayer {
                    ln1: norm(&format!("dec.{l}.ln1")),
                    self_attn: attn(&format!("dec.{l}.self")),
                    ln2: norm(&format!("dec.{l}.ln2")),
                    cross: attn(&format!("dec.{l}.cross")),
                    ln3: norm(&format!("dec.{l}.ln3")),
                    ffn: ffn(&format!("dec.{l}.ffn")),
                })
                .collect(),
            dec_ln: norm("dec.ln"),
            out_w: id("out.w".into()),
            out_b: id("out.b".into()),
        })
    }
}

/// Dropout rates applied while building a training graph.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct DropoutRates {
    pub hidden: f64,
    pub attn: f64,
}

/// Seeds for per-sentence dropout masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DropoutPlan {
    pub rates: DropoutRates,
    pub seed: u64,
    pub step: u64,
}

fn mix(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl DropoutPlan {
    fn rng(&self, sentence: usize) -> ChaCha8Rng {
        let s = mix(self.seed ^ mix(self.step.wrapping_add(1)) ^ mix((sentence as u64) << 20 | 0x5a5a));
        ChaCha8Rng::seed_from_u64(s)
    }
}

/// Encoder-decoder parameters together with the vocabulary and subword
/// merges they were trained with.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    config: ModelConfig,
    vocab: Vocab,
    merges: MergeTable,
    params: ParamStore<T>,
    layout: Layout,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with parameters drawn from `seed`. A zero `vocab_size`
    /// in `config` is taken from `vocab`.
    pub fn build(mut config: ModelConfig, vocab: Vocab, merges: MergeTable, seed: u64) -> Result<Self> {
        if config.vocab_size == 0 {
            config.vocab_size = vocab.len();
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape, init) in param_specs(&config) {
            let t = match init {
                Init::Normal(std) => Tensor::randn(&shape, std, &mut rng),
                Init::Zeros => Tensor::zeros(&shape),
                Init::Ones => Tensor::filled(&shape, T::one()),
            };
            params.add(name, t)?;
        }
        Self::from_parts(config, vocab, merges, params)
    }

    pub fn from_parts(config: ModelConfig, vocab: Vocab, merges: MergeTable, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            return Err(Error::ModelConfig(format!(
                "vocab_size {} but vocabulary has {} entries",
                config.vocab_size,
                vocab.len()
            )));
        }
        if config.length_mode.uses_token() != vocab.has_length_tokens() {
            return Err(Error::ModelConfig(format!(
                "length mode `{}` {} length tokens in the vocabulary",
                config.length_mode,
                if vocab.has_length_tokens() { "forbids" } else { "requires" }
            )));
        }
        let layout = Layout::resolve(&params, &config)?;
        Ok(Self {
            config,
            vocab,
            merges,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn length_mode(&self) -> LengthMode {
        self.config.length_mode
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn merges(&self) -> &MergeTable {
        &self.merges
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_parts(self) -> (ModelConfig, Vocab, MergeTable, ParamStore<T>) {
        (self.config, self.vocab, self.merges, self.params)
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            merges: self.merges.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }

    fn pe_spec(&self) -> EncodingSpec {
        EncodingSpec::new(self.config.d_model, Variant::Pe).expect("validated dimension")
    }

    fn le_spec(&self) -> Option<EncodingSpec> {
        let v = self.config.length_mode.encoding()?;
        Some(
            EncodingSpec::new(self.config.d_model, v)
                .and_then(|s| s.with_levels(self.config.levels))
                .expect("validated config"),
        )
    }

    // -- tokenization ------------------------------------------------------

    /// Source ids for a plain sentence: the class token in token modes, the
    /// subwords, then EOS. Also returns the subword sequence.
    pub fn source_ids(&self, plain_src: &str, class: Option<LengthClass>) -> Result<(Vec<usize>, TokenSeq)> {
        let seq = apply_bpe(plain_src, &self.merges);
        let mut ids = Vec::with_capacity(seq.len() + 2);
        if self.config.length_mode.uses_token() {
            let class = class.ok_or_else(|| {
                Error::LengthInput(format!("length mode `{}` needs a length class", self.config.length_mode))
            })?;
            ids.push(self.vocab.length_token_id(class).expect("token mode vocabulary"));
        }
        ids.extend(self.vocab.encode(&seq));
        ids.push(EOS);
        Ok((ids, seq))
    }

    /// Maps a pair to ids. In token modes the class is the injected token if
    /// present, otherwise the pair's own class.
    pub fn tokenize_pair(&self, pair: &SentencePair, index: usize) -> Result<TokenizedPair> {
        let class = pair.injected_class().unwrap_or(pair.class);
        let (src_ids, src_seq) = self.source_ids(pair.plain_src(), Some(class))?;
        let tgt_seq = apply_bpe(&pair.tgt, &self.merges);
        if tgt_seq.is_empty() {
            return Err(Error::MalformedTokens(format!("empty target in pair {index}")));
        }
        Ok(TokenizedPair {
            index,
            src_ids,
            tgt_ids: self.vocab.encode(&tgt_seq),
            tgt_cursor: tgt_seq.cursor_positions(),
            src_chars: src_seq.total_chars,
            tgt_chars: tgt_seq.total_chars,
        })
    }

    pub fn tokenize_corpus(&self, pairs: &[SentencePair]) -> Result<Vec<TokenizedPair>> {
        pairs.iter().enumerate().map(|(i, p)| self.tokenize_pair(p, i)).collect()
    }

    // -- graph construction ------------------------------------------------

    fn linear(&self, g: &mut Graph<'_, T>, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
        let (w, b) = (g.param(w), g.param(b));
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }

    fn norm(&self, g: &mut Graph<'_, T>, x: NodeId, n: &Norm) -> Result<NodeId> {
        let (gamma, beta) = (g.param(n.g), g.param(n.b));
        g.layer_norm(x, gamma, beta)
    }

    fn attention(
        &self,
        g: &mut Graph<'_, T>,
        xq: NodeId,
        xkv: NodeId,
        a: &Attn,
        causal: bool,
        drop: f64,
    ) -> Result<NodeId> {
        let q = self.linear(g, xq, a.w[0], a.b[0])?;
        let k = self.linear(g, xkv, a.w[1], a.b[1])?;
        let v = self.linear(g, xkv, a.w[2], a.b[2])?;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.heads);
        for h in 0..self.config.heads {
            let qh = g.slice_cols(q, h * dh, dh)?;
            let kh = g.slice_cols(k, h * dh, dh)?;
            let vh = g.slice_cols(v, h * dh, dh)?;
            let s = g.matmul_bt(qh, kh)?;
            let s = g.scale(s, scale);
            let p = g.softmax_rows(s, causal);
            let p = g.dropout(p, drop);
            heads.push(g.matmul(p, vh)?);
        }
        let ctx = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
        self.linear(g, ctx, a.w[3], a.b[3])
    }

    fn feed_forward(&self, g: &mut Graph<'_, T>, x: NodeId, f: &Ffn) -> Result<NodeId> {
        let h = self.linear(g, x, f.w1, f.b1)?;
        let h = g.relu(h);
        self.linear(g, h, f.w2, f.b2)
    }

    fn positional(&self, n: usize) -> Result<Tensor<T>> {
        let table = ENCODINGS.table(&self.pe_spec(), n.max(1))?;
        let d = self.config.d_model;
        let data = table[..n].iter().flat_map(|r| r.iter().map(|&x| T::of(x))).collect();
        Tensor::matrix(n, d, data)
    }

    fn encode_graph(&self, g: &mut Graph<'_, T>, src: &[usize], drop: DropoutRates) -> Result<NodeId> {
        let emb = g.param(self.layout.embed);
        let x = g.gather(emb, src)?;
        let pe = g.constant(self.positional(src.len())?);
        let mut x = g.add(x, pe)?;
        x = g.dropout(x, drop.hidden);
        for layer in &self.layout.enc {
            let h = self.norm(g, x, &layer.ln1)?;
            let h = self.attention(g, h, h, &layer.attn, false, drop.attn)?;
            let h = g.dropout(h, drop.hidden);
            x = g.add(x, h)?;
            let h = self.norm(g, x, &layer.ln2)?;
            let h = self.feed_forward(g, h, &layer.ffn)?;
            let h = g.dropout(h, drop.hidden);
            x = g.add(x, h)?;
        }
        self.norm(g, x, &self.layout.enc_ln)
    }

    /// Positional plus length encoding for each decoder input row.
    fn decoder_offsets(&self, cursors: &[usize], len: Option<usize>) -> Result<Tensor<T>> {
        let n = cursors.len();
        let d = self.config.d_model;
        let table = ENCODINGS.table(&self.pe_spec(), n.max(1))?;
        let le = match (self.le_spec(), len) {
            (Some(spec), Some(len)) => Some((spec, len)),
            (Some(_), None) => {
                return Err(Error::LengthInput(format!(
                    "length mode `{}` needs a target length",
                    self.config.length_mode
                )))
            }
            (None, Some(_)) => {
                return Err(Error::LengthInput(format!(
                    "length mode `{}` takes no target length",
                    self.config.length_mode
                )))
            }
            (None, None) => None,
        };
        let mut data = Vec::with_capacity(n * d);
        for (t, &pos) in cursors.iter().enumerate() {
            match &le {
                Some((spec, len)) => {
                    let row = ENCODINGS.row(spec, pos, *len)?;
                    data.extend(table[t].iter().zip(&row).map(|(p, l)| T::of(p + l)));
                }
                None => data.extend(table[t].iter().map(|&p| T::of(p))),
            }
        }
        Tensor::matrix(n, d, data)
    }

    fn decoder_input_graph(
        &self,
        g: &mut Graph<'_, T>,
        ids: &[usize],
        cursors: &[usize],
        len: Option<usize>,
    ) -> Result<NodeId> {
        if ids.len() != cursors.len() {
            return Err(Error::Shape(format!("{} decoder inputs, {} cursors", ids.len(), cursors.len())));
        }
        let emb = g.param(self.layout.embed);
        let x = g.gather(emb, ids)?;
        let off = g.constant(self.decoder_offsets(cursors, len)?);
        g.add(x, off)
    }

    fn decode_graph(&self, g: &mut Graph<'_, T>, memory: NodeId, input: NodeId, drop: DropoutRates) -> Result<NodeId> {
        let mut x = g.dropout(input, drop.hidden);
        for layer in &self.layout.dec {
            let h = self.norm(g, x, &layer.ln1)?;
            let h = self.attention(g, h, h, &layer.self_attn, true, drop.attn)?;
            let h = g.dropout(h, drop.hidden);
            x = g.add(x, h)?;
            let h = self.norm(g, x, &layer.ln2)?;
            let h = self.attention(g, h, memory, &layer.cross, false, drop.attn)?;
            let h = g.dropout(h, drop.hidden);
            x = g.add(x, h)?;
            let h = self.norm(g, x, &layer.ln3)?;
            let h = self.feed_forward(g, h, &layer.ffn)?;
            let h = g.dropout(h, drop.hidden);
            x = g.add(x, h)?;
        }
        self.norm(g, x, &self.layout.dec_ln)
    }

    fn project(&self, g: &mut Graph<'_, T>, h: NodeId) -> Result<NodeId> {
        self.linear(g, h, self.layout.out_w, self.layout.out_b)
    }

    fn target_len(&self, pair: &TokenizedPair) -> Option<usize> {
        self.config.length_mode.encoding().map(|_| pair.tgt_chars)
    }

    /// Teacher-forced logits `[T + 1, V]` for one pair: one row per target
    /// token plus the EOS prediction.
    fn pair_logits(
        &self,
        g: &mut Graph<'_, T>,
        pair: &TokenizedPair,
        len: Option<usize>,
        drop: DropoutRates,
    ) -> Result<NodeId> {
        if pair.tgt_cursor.len() != pair.tgt_ids.len() + 1 {
            return Err(Error::Shape(format!(
                "pair {} has {} cursors for {} target tokens",
                pair.index,
                pair.tgt_cursor.len(),
                pair.tgt_ids.len()
            )));
        }
        let memory = self.encode_graph(g, &pair.src_ids, drop)?;
        let mut ids = Vec::with_capacity(pair.tgt_ids.len() + 1);
        ids.push(BOS);
        ids.extend(&pair.tgt_ids);
        let input = self.decoder_input_graph(g, &ids, &pair.tgt_cursor, len)?;
        let h = self.decode_graph(g, memory, input, drop)?;
        self.project(g, h)
    }

    // -- public evaluation -------------------------------------------------

    /// Teacher-forced logits `[B, T_max + 1, V]` in evaluation mode.
    /// Rows past a pair's own length are zero.
    ///
    /// `target_lens` must be given exactly when the length mode carries a
    /// length encoding, one entry per pair.
    pub fn forward(&self, batch: &Batch, target_lens: Option<&[usize]>) -> Result<Tensor<T>> {
        let uses_enc = self.config.length_mode.encoding().is_some();
        match (uses_enc, target_lens) {
            (true, None) => return Err(Error::LengthInput("target lengths required".into())),
            (false, Some(_)) => {
                return Err(Error::LengthInput(format!(
                    "length mode `{}` takes no target lengths",
                    self.config.length_mode
                )))
            }
            (true, Some(l)) if l.len() != batch.len() => {
                return Err(Error::LengthInput(format!(
                    "{} target lengths for a batch of {}",
                    l.len(),
                    batch.len()
                )))
            }
            _ => {}
        }
        let rows = batch.pairs.iter().map(|p| p.tgt_ids.len() + 1).max().unwrap_or(0);
        let v = self.config.vocab_size;
        let mut out = Tensor::zeros(&[batch.len(), rows, v]);
        for (i, pair) in batch.pairs.iter().enumerate() {
            let mut g = Graph::new(&self.params);
            let logits = self.pair_logits(&mut g, pair, target_lens.map(|l| l[i]), DropoutRates::default())?;
            let lv = g.value(logits);
            let start = i * rows * v;
            out.data_mut()[start..start + lv.len()].copy_from_slice(lv.data());
        }
        Ok(out)
    }

    /// Decoder input rows (embedding plus encodings) before any layer, for
    /// inspecting how length information enters the decoder.
    pub fn decoder_inputs(&self, ids: &[usize], cursors: &[usize], len: Option<usize>) -> Result<Tensor<T>> {
        let mut g = Graph::new(&self.params);
        let x = self.decoder_input_graph(&mut g, ids, cursors, len)?;
        Ok(g.value(x).clone())
    }

    /// Mean label-smoothed cross-entropy per target token over `pairs` and
    /// its gradient. Dropout is active only when `plan` is given.
    pub(crate) fn loss_and_grads(
        &self,
        pairs: &[TokenizedPair],
        smoothing: f64,
        plan: Option<DropoutPlan>,
    ) -> Result<(f64, Grads<T>)> {
        let tokens: usize = pairs.iter().map(|p| p.tgt_ids.len() + 1).sum();
        if tokens == 0 {
            return Err(Error::AllPadding);
        }
        let seed = T::of(1.0 / tokens as f64);
        let parts = pairs
            .par_iter()
            .map(|pair| {
                let (mut g, rates) = match plan {
                    Some(p) => (Graph::with_dropout(&self.params, p.rng(pair.index)), p.rates),
                    None => (Graph::new(&self.params), DropoutRates::default()),
                };
                let logits = self.pair_logits(&mut g, pair, self.target_len(pair), rates)?;
                let mut targets = pair.tgt_ids.clone();
                targets.push(EOS);
                let loss = g.xent(logits, &targets, smoothing)?;
                let value = g.value(loss).data()[0].as_f64();
                Ok((value, g.backward(loss, seed)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        let mut grads = Grads::empty(self.params.len());
        for (loss, g) in &parts {
            total += loss;
            grads.accumulate(g);
        }
        Ok((total / tokens as f64, grads))
    }

    /// Mean label-smoothed cross-entropy per target token, evaluation mode.
    pub fn mean_loss(&self, pairs: &[TokenizedPair], smoothing: f64) -> Result<f64> {
        let tokens: usize = pairs.iter().map(|p| p.tgt_ids.len() + 1).sum();
        if tokens == 0 {
            return Err(Error::AllPadding);
        }
        let losses = pairs
            .par_iter()
            .map(|pair| {
                let mut g = Graph::new(&self.params);
                let logits = self.pair_logits(&mut g, pair, self.target_len(pair), DropoutRates::default())?;
                let mut targets = pair.tgt_ids.clone();
                targets.push(EOS);
                let loss = g.xent(logits, &targets, smoothing)?;
                Ok(g.value(loss).data()[0].as_f64())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / tokens as f64)
    }

    /// Encoder output for a source id sequence.
    pub fn encode_source(&self, src_ids: &[usize]) -> Result<Tensor<T>> {
        if src_ids.is_empty() {
            return Err(Error::Shape("empty source".into()));
        }
        let mut g = Graph::new(&self.params);
        let m = self.encode_graph(&mut g, src_ids, DropoutRates::default())?;
        Ok(g.value(m).clone())
    }

    /// Log-probabilities of the next token after `prefix` (generated tokens,
    /// without BOS). `cursors` holds the character cursor before each decoder
    /// input, so it is one longer than `prefix`.
    pub fn next_log_probs(
        &self,
        memory: &Tensor<T>,
        prefix: &[usize],
        cursors: &[usize],
        len: Option<usize>,
    ) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let mem = g.constant(memory.clone());
        let mut ids = Vec::with_capacity(prefix.len() + 1);
        ids.push(BOS);
        ids.extend_from_slice(prefix);
        let input = self.decoder_input_graph(&mut g, &ids, cursors, len)?;
        let h = self.decode_graph(&mut g, mem, input, DropoutRates::default())?;
        let last = g.gather(h, &[prefix.len()])?;
        let logits = self.project(&mut g, last)?;
        let row = g.value(logits).row(0);
        row.iter().try_for_each(|x| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite("decoder logits".into()))
            }
        })?;
        let max = row.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x.as_f64() - max).exp()).sum::<f64>().ln();
        Ok(row.iter().map(|x| x.as_f64() - log_z).collect())
    }
}

impl Model<f64> {
    /// Compares the analytic gradient of the mean training loss on `pairs`
    /// with central differences, dropout off.
    pub fn check_gradients(&self, pairs: &[SentencePair], smoothing: f64, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
        let tokenized = self.tokenize_corpus(pairs)?;
        let point = self.params.flatten();
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut m = self.clone();
            m.params.unflatten(x)?;
            let (loss, grads) = m.loss_and_grads(&tokenized, smoothing, None)?;
            Ok((loss, grads.flatten(&m.params)))
        };
        gradient_check(f, &point, cfg)
    }
}
