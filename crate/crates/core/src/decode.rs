//! Greedy and beam-search decoding with length controls.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_length_token, LengthClass};
use crate::encodings::CharCursor;
use crate::error::{Error, Result};
use crate::model::{Model, EOS};
use crate::nnet::Tensor;
use crate::textproc::{char_length, detokenize_tokens, is_word_final, surface_of, TokenSeq, CONTINUATION_MARKER};

/// Where the decoder's character budget comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetLen {
    /// The source sentence's character length.
    #[default]
    Source,
    Fixed(usize),
}

impl fmt::Display for TargetLen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetLen::Source => f.write_str("source"),
            TargetLen::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

impl FromStr for TargetLen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "source" {
            return Ok(TargetLen::Source);
        }
        match s.strip_prefix("fixed:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(TargetLen::Fixed(n)),
            _ => Err(Error::Usage(format!(
                "bad target length mode `{s}` (source|fixed:N with N >= 1)"
            ))),
        }
    }
}

impl Serialize for TargetLen {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetLen {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeControl {
    pub beam_size: usize,
    /// Length-penalty exponent.
    pub alpha: f64,
    pub token_class: Option<LengthClass>,
    pub target_len: TargetLen,
    pub scale: f64,
    /// Hard cap on generated tokens; `2 * source tokens + 10` when unset.
    pub max_len_tokens: Option<usize>,
}

impl Default for DecodeControl {
    fn default() -> Self {
        Self {
            beam_size: 4,
            alpha: 0.0,
            token_class: None,
            target_len: TargetLen::Source,
            scale: 1.0,
            max_len_tokens: None,
        }
    }
}

impl DecodeControl {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::DecodeControl("beam_size must be >= 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::DecodeControl(format!("scale must be positive, got {}", self.scale)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::DecodeControl("alpha must be finite".into()));
        }
        if self.max_len_tokens == Some(0) {
            return Err(Error::DecodeControl("max_len_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// `((5 + len) / 6)^alpha`.
pub fn length_penalty(len_tokens: usize, alpha: f64) -> f64 {
    ((5.0 + len_tokens as f64) / 6.0).powf(alpha)
}

/// Character budget: the explicit target or the source length, times
/// `scale`, rounded half up, at least 1.
pub fn resolve_target_len(src: &TokenSeq, ctrl: &DecodeControl) -> usize {
    let base = match ctrl.target_len {
        TargetLen::Fixed(n) => n,
        TargetLen::Source => src.total_chars,
    };
    let scaled = (base as f64 * ctrl.scale + 0.5).floor();
    (scaled as usize).max(1)
}

/// Next-token distribution over a fixed vocabulary.
pub trait StepScorer {
    fn vocab_size(&self) -> usize;
    fn eos(&self) -> usize;
    /// Log-probabilities after `prefix`; `cursors` holds the character
    /// cursor before each decoder input and is one longer than `prefix`.
    fn log_probs(&self, prefix: &[usize], cursors: &[usize]) -> Result<Vec<f64>>;
    /// Surface form of a token id.
    fn token(&self, id: usize) -> &str;
    /// Ids that may never be generated.
    fn banned(&self, _id: usize) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated ids, EOS excluded.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub cursor: CharCursor,
    pub finished: bool,
    cursors: Vec<usize>,
    at_boundary: bool,
}

impl Hypothesis {
    fn root(len: usize) -> Self {
        Self {
            tokens: Vec::new(),
            log_prob: 0.0,
            cursor: CharCursor::new(0, len),
            finished: false,
            cursors: vec![0],
            at_boundary: false,
        }
    }

    fn extend<S: StepScorer + ?Sized>(&self, scorer: &S, id: usize, lp: f64) -> Self {
        let mut h = self.clone();
        h.log_prob += lp;
        if id == scorer.eos() {
            h.finished = true;
            return h;
        }
        let tok = scorer.token(id);
        let mut pos = h.cursor.pos + surface_of(tok).chars().count();
        if h.at_boundary {
            pos += 1;
        }
        h.cursor.pos = pos;
        h.at_boundary = is_word_final(tok);
        h.tokens.push(id);
        h.cursors.push(pos);
        h
    }

    /// Tokens scored by the length penalty, EOS included once emitted.
    pub fn scored_len(&self) -> usize {
        self.tokens.len() + usize::from(self.finished)
    }

    pub fn penalized(&self, alpha: f64) -> f64 {
        self.log_prob / length_penalty(self.scored_len().max(1), alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Best first by penalized score.
    pub ranked: Vec<(Hypothesis, f64)>,
    /// Set when no hypothesis emitted EOS within the token cap.
    pub unfinished: bool,
}

fn rank(mut hyps: Vec<Hypothesis>, alpha: f64) -> Vec<(Hypothesis, f64)> {
    let mut scored: Vec<(Hypothesis, f64)> = hyps
        .drain(..)
        .map(|h| {
            let s = h.penalized(alpha);
            (h, s)
        })
        .collect();
    // Stable: equal scores keep the order in which hypotheses finished.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    scored
}

fn allowed<S: StepScorer + ?Sized>(scorer: &S, lp: &[f64]) -> Result<()> {
    if lp.len() != scorer.vocab_size() {
        return Err(Error::Shape(format!(
            "scorer returned {} scores for a vocabulary of {}",
            lp.len(),
            scorer.vocab_size()
        )));
    }
    Ok(())
}

/// Beam search over any scorer. The `beam_size` best extensions by raw
/// log-probability survive each step; those ending in EOS leave the beam
/// and are ranked by penalized score at the end.
pub fn beam_search_with<S: StepScorer + ?Sized>(
    scorer: &S,
    beam_size: usize,
    alpha: f64,
    max_len: usize,
    len: usize,
) -> Result<BeamResult> {
    let k = beam_size.max(1);
    let mut live = vec![Hypothesis::root(len)];
    let mut finished = Vec::new();
    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (hi, h) in live.iter().enumerate() {
            let lp = scorer.log_probs(&h.tokens, &h.cursors)?;
            allowed(scorer, &lp)?;
            let mut local: Vec<(f64, usize, usize)> = lp
                .iter()
                .enumerate()
                .filter(|(id, s)| !scorer.banned(*id) && s.is_finite())
                .map(|(id, s)| (h.log_prob + s, hi, id))
                .collect();
            local.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.2.cmp(&b.2)));
            local.truncate(k);
            cands.extend(local);
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        cands.truncate(k);
        let mut next = Vec::with_capacity(k);
        for (total, hi, id) in cands {
            let parent = &live[hi];
            let h = parent.extend(scorer, id, total - parent.log_prob);
            if h.finished {
                finished.push(h);
            } else {
                next.push(h);
            }
        }
        live = next;
    }
    if finished.is_empty() {
        return Ok(BeamResult {
            ranked: rank(live, alpha),
            unfinished: true,
        });
    }
    Ok(BeamResult {
        ranked: rank(finished, alpha),
        unfinished: false,
    })
}

/// Argmax rollout; ties go to the lowest id.
pub fn greedy_with<S: StepScorer + ?Sized>(scorer: &S, max_len: usize, len: usize) -> Result<Hypothesis> {
    let mut h = Hypothesis::root(len);
    for _ in 0..max_len {
        let lp = scorer.log_probs(&h.tokens, &h.cursors)?;
        allowed(scorer, &lp)?;
        let best = lp
            .iter()
            .enumerate()
            .filter(|(id, s)| !scorer.banned(*id) && s.is_finite())
            .fold(None::<(usize, f64)>, |acc, (id, &s)| match acc {
                Some((_, b)) if b >= s => acc,
                _ => Some((id, s)),
            });
        let Some((id, s)) = best else {
            return Err(Error::NonFinite("every next-token score".into()));
        };
        h = h.extend(scorer, id, s);
        if h.finished {
            break;
        }
    }
    Ok(h)
}

/// A source sentence prepared for decoding with a particular model.
struct ModelScorer<'m> {
    model: &'m Model<f32>,
    memory: Tensor<f32>,
    len: Option<usize>,
}

impl StepScorer for ModelScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.model.vocab().len()
    }

    fn eos(&self) -> usize {
        EOS
    }

    fn log_probs(&self, prefix: &[usize], cursors: &[usize]) -> Result<Vec<f64>> {
        self.model.next_log_probs(&self.memory, prefix, cursors, self.len)
    }

    fn token(&self, id: usize) -> &str {
        self.model.vocab().token(id)
    }

    fn banned(&self, id: usize) -> bool {
        self.model.vocab().is_control(id)
    }
}

/// One decoded sentence with the metadata evaluation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub output: String,
    pub score: f64,
    pub log_prob: f64,
    pub src_chars: usize,
    pub out_chars: usize,
    /// Character budget given to the length encoding.
    pub target_len: Option<usize>,
    /// No hypothesis finished within the token cap.
    pub unfinished: bool,
}

struct Prepared<'m> {
    scorer: ModelScorer<'m>,
    src_chars: usize,
    max_len: usize,
    budget: usize,
}

fn prepare<'m>(model: &'m Model<f32>, src: &str, ctrl: &DecodeControl) -> Result<Prepared<'m>> {
    ctrl.validate()?;
    let mode = model.length_mode();
    let (injected, plain) = split_length_token(src);
    let class = ctrl.token_class.or(injected);
    if mode.uses_token() && class.is_none() {
        return Err(Error::DecodeControl(format!("length mode `{mode}` needs a length class")));
    }
    if !mode.uses_token() && ctrl.token_class.is_some() {
        return Err(Error::DecodeControl(format!("length mode `{mode}` takes no length class")));
    }
    if mode.encoding().is_none() && (ctrl.target_len != TargetLen::Source || ctrl.scale != 1.0) {
        return Err(Error::DecodeControl(format!(
            "length mode `{mode}` has no length encoding to set a target for"
        )));
    }
    let (ids, seq) = model.source_ids(plain, class)?;
    let len = mode.encoding().map(|_| resolve_target_len(&seq, ctrl));
    let memory = model.encode_source(&ids)?;
    Ok(Prepared {
        scorer: ModelScorer { model, memory, len },
        src_chars: seq.total_chars,
        max_len: ctrl.max_len_tokens.unwrap_or(2 * seq.len() + 10),
        budget: len.unwrap_or(seq.total_chars),
    })
}

/// Lenient surface string: a dangling continuation on the last token is
/// treated as a word end.
fn surface(model: &Model<f32>, h: &Hypothesis) -> Result<String> {
    let mut toks: Vec<&str> = h.tokens.iter().map(|&id| model.vocab().token(id)).collect();
    if let Some(last) = toks.last_mut() {
        *last = last.strip_suffix(CONTINUATION_MARKER).unwrap_or(last);
    }
    detokenize_tokens(&toks)
}

fn to_translation(model: &Model<f32>, p: &Prepared<'_>, h: &Hypothesis, score: f64, unfinished: bool) -> Result<Translation> {
    let output = surface(model, h)?;
    Ok(Translation {
        out_chars: char_length(&output),
        output,
        score,
        log_prob: h.log_prob,
        src_chars: p.src_chars,
        target_len: p.scorer.len,
        unfinished,
    })
}

/// All finished hypotheses of a beam search, best first. A leading length
/// token in `src` is used when `ctrl` names no class.
pub fn beam_search(model: &Model<f32>, src: &str, ctrl: &DecodeControl) -> Result<Vec<Translation>> {
    let p = prepare(model, src, ctrl)?;
    let res = beam_search_with(&p.scorer, ctrl.beam_size, ctrl.alpha, p.max_len, p.budget)?;
    res.ranked
        .iter()
        .map(|(h, s)| to_translation(model, &p, h, *s, res.unfinished))
        .collect()
}

/// The top-ranked beam hypothesis.
pub fn translate(model: &Model<f32>, src: &str, ctrl: &DecodeControl) -> Result<Translation> {
    beam_search(model, src, ctrl)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::DecodeControl("beam produced no hypothesis".into()))
}

pub fn greedy(model: &Model<f32>, src: &str, ctrl: &DecodeControl) -> Result<Translation> {
    let p = prepare(model, src, ctrl)?;
    let h = greedy_with(&p.scorer, p.max_len, p.budget)?;
    let score = h.penalized(ctrl.alpha);
    to_translation(model, &p, &h, score, !h.finished)
}

/// Decodes every sentence, in input order. A failure is recorded on its
/// own line and does not stop the rest.
pub fn translate_corpus<S: AsRef<str> + Sync>(
    model: &Model<f32>,
    sentences: &[S],
    ctrl: &DecodeControl,
) -> Vec<Result<Translation>> {
    sentences
        .par_iter()
        .map(|s| translate(model, s.as_ref(), ctrl))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::apply_bpe;
    use crate::textproc::MergeTable;

    /// Scores from a closure over the prefix; every token is a one-letter word.
    struct Toy<F> {
        names: Vec<String>,
        f: F,
    }

    impl<F: Fn(&[usize]) -> Vec<f64>> StepScorer for Toy<F> {
        fn vocab_size(&self) -> usize {
            self.names.len()
        }
        fn eos(&self) -> usize {
            0
        }
        fn log_probs(&self, prefix: &[usize], cursors: &[usize]) -> Result<Vec<f64>> {
            assert_eq!(cursors.len(), prefix.len() + 1);
            let p = (self.f)(prefix);
            let z: f64 = p.iter().sum();
            Ok(p.iter().map(|x| (x / z).ln()).collect())
        }
        fn token(&self, id: usize) -> &str {
            &self.names[id]
        }
    }

    fn toy<F: Fn(&[usize]) -> Vec<f64>>(v: usize, f: F) -> Toy<F> {
        let names = (0..v).map(|i| if i == 0 { "</s>".into() } else { ((b'a' + i as u8) as char).to_string() }).collect();
        Toy { names, f }
    }

    /// Deterministic pseudo-random positive weights for a prefix.
    fn weights(seed: u64, v: usize) -> impl Fn(&[usize]) -> Vec<f64> {
        move |prefix: &[usize]| {
            let mut h = seed;
            for &t in prefix {
                h = h.wrapping_mul(6364136223846793005).wrapping_add(t as u64 + 1);
            }
            (0..v)
                .map(|k| {
                    let x = h.wrapping_mul(2862933555777941757).wrapping_add(k as u64 * 3037000493);
                    0.05 + ((x >> 33) % 1000) as f64 / 1000.0
                })
                .collect()
        }
    }

    #[test]
    fn penalty_values() {
        assert_eq!(length_penalty(7, 0.0), 1.0);
        assert_eq!(length_penalty(1, 0.5), 1.0);
        assert!((length_penalty(13, 0.5) - 3f64.sqrt()).abs() < 1e-12);
        assert!((length_penalty(13, 0.5) - 1.7320508).abs() < 1e-7);
    }

    #[test]
    fn target_length_resolution() {
        let seq = apply_bpe("abcd efgh ijklmnopqr", &MergeTable::new(vec![]).unwrap());
        assert_eq!(seq.total_chars, 20);
        let ctrl = DecodeControl::default();
        assert_eq!(resolve_target_len(&seq, &ctrl), 20);
        let c = DecodeControl { scale: 1.2, ..ctrl.clone() };
        assert_eq!(resolve_target_len(&seq, &c), 24);
        let c = DecodeControl {
            scale: 0.93,
            target_len: TargetLen::Fixed(15),
            ..ctrl.clone()
        };
        assert_eq!(resolve_target_len(&seq, &c), 14);
        let c = DecodeControl { scale: 0.01, ..ctrl };
        assert_eq!(resolve_target_len(&seq, &c), 1);
    }

    #[test]
    fn target_len_parsing() {
        assert_eq!("source".parse::<TargetLen>().unwrap(), TargetLen::Source);
        assert_eq!("fixed:12".parse::<TargetLen>().unwrap(), TargetLen::Fixed(12));
        assert!("fixed:0".parse::<TargetLen>().is_err());
        assert!("12".parse::<TargetLen>().is_err());
    }

    #[test]
    fn beam_one_is_greedy() {
        for seed in 0..30 {
            let t = toy(5, weights(seed, 5));
            let g = greedy_with(&t, 6, 10).unwrap();
            let b = beam_search_with(&t, 1, 0.0, 6, 10).unwrap();
            assert_eq!(b.ranked[0].0.tokens, g.tokens);
            assert_eq!(b.ranked[0].0.finished, g.finished);
            assert_eq!(b.ranked[0].0.log_prob, g.log_prob);
        }
    }

    /// All sequences of at most `max_len` tokens ending in EOS.
    fn exhaustive<S: StepScorer>(s: &S, max_len: usize, alpha: f64) -> (Vec<usize>, f64) {
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        let mut stack = vec![(Vec::<usize>::new(), 0.0)];
        while let Some((prefix, lp)) = stack.pop() {
            let cursors = vec![0; prefix.len() + 1];
            let scores = s.log_probs(&prefix, &cursors).unwrap();
            let end = (lp + scores[0]) / length_penalty(prefix.len() + 1, alpha);
            if end > best.1 {
                best = (prefix.clone(), end);
            }
            if prefix.len() + 1 < max_len {
                for (id, sc) in scores.iter().enumerate().skip(1) {
                    let mut p = prefix.clone();
                    p.push(id);
                    stack.push((p, lp + sc));
                }
            }
        }
        best
    }

    #[test]
    fn wide_beam_matches_exhaustive_search() {
        for seed in 0..40 {
            for alpha in [0.0, 0.5, 1.0] {
                let t = toy(4, weights(seed, 4));
                let (want, want_score) = exhaustive(&t, 4, alpha);
                let b = beam_search_with(&t, 4usize.pow(4), alpha, 4, 10).unwrap();
                assert!(!b.unfinished);
                let (h, score) = &b.ranked[0];
                assert!((score - want_score).abs() < 1e-12, "seed {seed}");
                assert_eq!(h.tokens, want, "seed {seed} alpha {alpha}");
            }
        }
    }

    #[test]
    fn three_token_forced_model() {
        // Prefers a, then b, then EOS; the beam must find exactly that.
        let t = toy(3, |p: &[usize]| match p.len() {
            0 => vec![0.1, 0.8, 0.1],
            1 => vec![0.2, 0.1, 0.7],
            _ => vec![0.9, 0.05, 0.05],
        });
        let (want, _) = exhaustive(&t, 4, 0.0);
        let b = beam_search_with(&t, 3, 0.0, 4, 10).unwrap();
        assert_eq!(b.ranked[0].0.tokens, want);
        assert_eq!(want, vec![1, 2]);
    }

    #[test]
    fn penalty_reorders_tied_hypotheses() {
        // "b </s>" and "b c </s>" both have probability 1/2.
        let t = toy(3, |p: &[usize]| match p {
            [] => vec![1e-12, 1.0, 1e-12],
            [1] => vec![0.5, 1e-12, 0.5],
            _ => vec![1.0, 1e-12, 1e-12],
        });
        let plain = beam_search_with(&t, 3, 0.0, 5, 10).unwrap();
        let pen = beam_search_with(&t, 3, 0.5, 5, 10).unwrap();
        let top = |r: &BeamResult| r.ranked[0].0.tokens.clone();
        assert!((plain.ranked[0].1 - plain.ranked[1].1).abs() < 1e-9);
        assert_eq!(top(&plain), vec![1]);
        // Dividing equal negative scores by a penalty that grows with
        // length favours the longer hypothesis.
        assert_eq!(top(&pen), vec![1, 2]);
    }

    #[test]
    fn raw_scores_never_increase_and_cursors_track_output() {
        let names = ["</s>", "ab@@", "c", "de"].map(String::from).to_vec();
        let t = Toy {
            names,
            f: weights(3, 4),
        };
        let r = beam_search_with(&t, 4, 0.0, 6, 10).unwrap();
        for (h, _) in &r.ranked {
            let toks: Vec<&str> = h.tokens.iter().map(|&i| t.token(i)).collect();
            let mut toks = toks.clone();
            if let Some(l) = toks.last_mut() {
                *l = l.strip_suffix("@@").unwrap_or(l);
            }
            let text = detokenize_tokens(&toks).unwrap();
            assert_eq!(h.cursor.pos, char_length(&text));
            assert!(h.log_prob <= 0.0);
            assert_eq!(h.cursors.len(), h.tokens.len() + 1);
            assert!(h.cursors.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn unfinished_search_is_flagged() {
        let t = toy(3, |_: &[usize]| vec![1e-9, 1.0, 1.0]);
        let r = beam_search_with(&t, 2, 0.0, 3, 10).unwrap();
        assert!(r.unfinished);
        assert_eq!(r.ranked[0].0.tokens.len(), 3);
    }

    #[test]
    fn model_beam_one_matches_greedy_and_corpus_is_aligned() {
        use crate::encodings::Variant;
        use crate::model::{toy_model, LengthMode};
        let m = toy_model::<f32>(LengthMode::TokenEnc(Variant::LeAbs), 8);
        let ctrl = DecodeControl {
            beam_size: 1,
            token_class: Some(LengthClass::Normal),
            scale: 1.1,
            ..Default::default()
        };
        for src in ["ab cd", "cd ab ab", "dc"] {
            let g = greedy(&m, src, &ctrl).unwrap();
            let b = translate(&m, src, &ctrl).unwrap();
            assert_eq!(g, b);
        }
        let none: Vec<String> = Vec::new();
        assert!(translate_corpus(&m, &none, &ctrl).is_empty());
        let srcs = ["ab cd", "", "ba", "cd ab ab"];
        let a = translate_corpus(&m, &srcs, &ctrl);
        assert_eq!(a.len(), 4);
        assert!(a[1].is_err() || a[1].as_ref().unwrap().src_chars == 0);
        let b = translate_corpus(&m, &srcs, &ctrl);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().ok(), y.as_ref().ok());
        }
        assert_eq!(a[3].as_ref().unwrap().src_chars, 8);
        assert!(translate(&m, "ab", &DecodeControl::default()).is_err());
    }

    #[test]
    fn control_validation() {
        assert!(DecodeControl { beam_size: 0, ..Default::default() }.validate().is_err());
        assert!(DecodeControl { scale: 0.0, ..Default::default() }.validate().is_err());
        DecodeControl::default().validate().unwrap();
    }
}
