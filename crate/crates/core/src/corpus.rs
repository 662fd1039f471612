//! Parallel corpora, length-ratio classes, and the synthetic length task.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::char_length;

/// Ratio boundaries between the short, normal and long classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            t_min: 1.0,
            t_max: 1.2,
        }
    }
}

impl Thresholds {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        let th = Self { t_min, t_max };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max.is_finite()) {
            return Err(Error::config(
                "thresholds",
                format!("need 0 < t_min <= t_max, got ({}, {})", self.t_min, self.t_max),
            ));
        }
        Ok(())
    }

    /// Tertile boundaries of an empirical ratio distribution.
    pub fn from_tertiles(ratios: &[f64]) -> Result<Self> {
        Self::from_quantiles(ratios, 1.0 / 3.0, 2.0 / 3.0)
    }

    /// Boundaries at two quantiles of an empirical ratio distribution, so
    /// roughly a `lo` share of pairs is short and `1 - hi` is long.
    pub fn from_quantiles(ratios: &[f64], lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::config("threshold_quantiles", format!("need 0 < lo <= hi < 1, got ({lo}, {hi})")));
        }
        if ratios.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut sorted = ratios.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let idx = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
            sorted[idx]
        };
        Self::new(at(lo), at(hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthClass {
    Short,
    Normal,
    Long,
}

impl LengthClass {
    pub const ALL: [LengthClass; 3] = [LengthClass::Short, LengthClass::Normal, LengthClass::Long];

    /// Reserved source-side token for the class.
    pub fn token(self) -> &'static str {
        match self {
            LengthClass::Short => "<short>",
            LengthClass::Normal => "<normal>",
            LengthClass::Long => "<long>",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.token() == token)
    }

    pub fn name(self) -> &'static str {
        match self {
            LengthClass::Short => "short",
            LengthClass::Normal => "normal",
            LengthClass::Long => "long",
        }
    }
}

impl fmt::Display for LengthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LengthClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(LengthClass::Short),
            "normal" => Ok(LengthClass::Normal),
            "long" => Ok(LengthClass::Long),
            other => Err(Error::Usage(format!(
                "unknown length class `{other}` (expected short|normal|long)"
            ))),
        }
    }
}

pub fn classify(ratio: f64, th: &Thresholds) -> LengthClass {
    if ratio <= th.t_min {
        LengthClass::Short
    } else if ratio <= th.t_max {
        LengthClass::Normal
    } else {
        LengthClass::Long
    }
}

/// Splits a leading length token off a source line.
pub fn split_length_token(src: &str) -> (Option<LengthClass>, &str) {
    let trimmed = src.trim_start();
    let first = trimmed.split_whitespace().next().unwrap_or("");
    match LengthClass::from_token(first) {
        Some(class) => (Some(class), trimmed[first.len()..].trim_start()),
        None => (None, src),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub src: String,
    pub tgt: String,
    /// Source length without any length token.
    pub src_chars: usize,
    pub tgt_chars: usize,
    pub ratio: f64,
    pub class: LengthClass,
}

impl SentencePair {
    pub fn new(src: &str, tgt: &str, th: &Thresholds) -> Result<Self> {
        let (_, plain) = split_length_token(src);
        let src_chars = char_length(plain);
        if src_chars == 0 {
            return Err(Error::EmptySource { line: 0 });
        }
        let tgt_chars = char_length(tgt);
        let ratio = tgt_chars as f64 / src_chars as f64;
        Ok(Self {
            src: src.trim().to_owned(),
            tgt: tgt.trim().to_owned(),
            src_chars,
            tgt_chars,
            ratio,
            class: classify(ratio, th),
        })
    }

    /// Source text without a length token.
    pub fn plain_src(&self) -> &str {
        split_length_token(&self.src).1
    }

    pub fn injected_class(&self) -> Option<LengthClass> {
        split_length_token(&self.src).0
    }

    /// Re-derives lengths, ratio and class from the text fields.
    pub fn is_consistent(&self, th: &Thresholds) -> bool {
        let src_chars = char_length(self.plain_src());
        let tgt_chars = char_length(&self.tgt);
        src_chars == self.src_chars
            && tgt_chars == self.tgt_chars
            && src_chars > 0
            && (self.ratio - tgt_chars as f64 / src_chars as f64).abs() < 1e-12
            && classify(self.ratio, th) == self.class
    }
}

/// Prepends the pair's class token to its source.
pub fn inject_token(pair: &SentencePair) -> Result<SentencePair> {
    inject_class(pair, pair.class)
}

/// Prepends an arbitrary class token, e.g. a user-chosen one at inference.
pub fn inject_class(pair: &SentencePair, class: LengthClass) -> Result<SentencePair> {
    if pair.injected_class().is_some() {
        return Err(Error::DoubleInjection);
    }
    Ok(SentencePair {
        src: format!("{} {}", class.token(), pair.src),
        ..pair.clone()
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub short: usize,
    pub normal: usize,
    pub long: usize,
}

impl BucketCounts {
    pub fn total(&self) -> usize {
        self.short + self.normal + self.long
    }

    pub fn get(&self, class: LengthClass) -> usize {
        match class {
            LengthClass::Short => self.short,
            LengthClass::Normal => self.normal,
            LengthClass::Long => self.long,
        }
    }

    /// Single-line machine-readable record.
    pub fn to_record(&self) -> String {
        serde_json::json!({
            "short": self.short,
            "normal": self.normal,
            "long": self.long,
            "total": self.total(),
        })
        .to_string()
    }
}

impl fmt::Display for BucketCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.short, self.normal, self.long)
    }
}

pub fn bucket_stats(corpus: &[SentencePair]) -> BucketCounts {
    let mut counts = BucketCounts::default();
    for pair in corpus {
        match pair.class {
            LengthClass::Short => counts.short += 1,
            LengthClass::Normal => counts.normal += 1,
            LengthClass::Long => counts.long += 1,
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// Ingestion

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn pairs_from_lines<'a>(
    lines: impl Iterator<Item = (&'a str, &'a str)>,
    th: &Thresholds,
) -> Result<Vec<SentencePair>> {
    lines
        .enumerate()
        .map(|(i, (s, t))| {
            SentencePair::new(s, t, th).map_err(|e| match e {
                Error::EmptySource { .. } => Error::EmptySource { line: i + 1 },
                other => other,
            })
        })
        .collect()
}

/// Reads one tab-separated `source<TAB>target` pair per line.
pub fn read_tsv(path: impl AsRef<Path>, th: &Thresholds) -> Result<Vec<SentencePair>> {
    let lines = read_lines(path.as_ref())?;
    let mut split = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match line.split_once('\t') {
            Some(p) => split.push(p),
            None => {
                return Err(Error::Usage(format!(
                    "{}:{}: expected `source<TAB>target`",
                    path.as_ref().display(),
                    i + 1
                )))
            }
        }
    }
    pairs_from_lines(split.into_iter(), th)
}

/// Reads two aligned one-sentence-per-line files.
pub fn read_parallel(
    src: impl AsRef<Path>,
    tgt: impl AsRef<Path>,
    th: &Thresholds,
) -> Result<Vec<SentencePair>> {
    let s = read_lines(src.as_ref())?;
    let t = read_lines(tgt.as_ref())?;
    if s.len() != t.len() {
        return Err(Error::LengthMismatch {
            hyps: s.len(),
            refs: t.len(),
        });
    }
    pairs_from_lines(s.iter().map(String::as_str).zip(t.iter().map(String::as_str)), th)
}

pub fn write_tsv(path: impl AsRef<Path>, corpus: &[SentencePair]) -> Result<()> {
    let mut out = String::new();
    for p in corpus {
        out.push_str(&p.src);
        out.push('\t');
        out.push_str(&p.tgt);
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Synthetic task

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Terse,
    Neutral,
    Verbose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleMix {
    pub terse: f64,
    pub neutral: f64,
    pub verbose: f64,
}

impl Default for StyleMix {
    fn default() -> Self {
        Self {
            terse: 0.2,
            neutral: 0.6,
            verbose: 0.2,
        }
    }
}

/// Generator settings for a word-for-word translation task in which every
/// source lemma has one short and one long target realization.
///
/// Terse sentences use only short forms, verbose ones only long forms, and
/// neutral ones use each lemma's canonical form with occasional flips. The
/// same source sentence is realized several times, so its target length is
/// ambiguous unless the model is told which length to produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub lexicon_size: usize,
    /// Inclusive range of source word lengths.
    pub source_word_len: [usize; 2],
    /// Short form length is `source length - d` for `d` in this range (min 1).
    pub short_delta: [usize; 2],
    /// Long form length is `source length + d` for `d` in this range.
    pub long_delta: [usize; 2],
    /// Fraction of lemmas whose neutral realization is the long form.
    pub canonical_long_fraction: f64,
    /// Per-word probability that a neutral sentence uses the other form.
    pub neutral_flip_prob: f64,
    pub style_mix: StyleMix,
    /// Inclusive range of words per sentence.
    pub sentence_words: [usize; 2],
    pub num_pairs: usize,
    /// Target realizations drawn for each distinct source sentence.
    pub realizations_per_source: usize,
    /// Seeds the lexicon; train and test sets must share it.
    pub lexicon_seed: u64,
    /// Seeds sentence sampling.
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            lexicon_size: 24,
            source_word_len: [3, 6],
            short_delta: [1, 3],
            long_delta: [2, 4],
            canonical_long_fraction: 0.5,
            neutral_flip_prob: 0.2,
            style_mix: StyleMix::default(),
            sentence_words: [3, 7],
            num_pairs: 1000,
            realizations_per_source: 2,
            lexicon_seed: 1,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleSpec(m.to_owned()));
        if self.lexicon_size == 0 {
            return bad("empty lexicon");
        }
        let ordered = |r: [usize; 2]| r[0] <= r[1];
        if !ordered(self.source_word_len) || self.source_word_len[0] == 0 {
            return bad("source_word_len must be a non-empty range of positive lengths");
        }
        if !ordered(self.short_delta) || !ordered(self.long_delta) {
            return bad("delta ranges must be ordered");
        }
        if self.long_delta[0] == 0 {
            return bad("long forms must be strictly longer than source words");
        }
        if !ordered(self.sentence_words) || self.sentence_words[0] == 0 {
            return bad("sentence_words must be a non-empty range of positive counts");
        }
        if self.realizations_per_source == 0 {
            return bad("realizations_per_source must be positive");
        }
        let m = &self.style_mix;
        let parts = [m.terse, m.neutral, m.verbose];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p))
            || ((m.terse + m.neutral + m.verbose) - 1.0).abs() > 1e-9
        {
            return bad("style fractions must lie in [0,1] and sum to 1");
        }
        if !(0.0..=1.0).contains(&self.canonical_long_fraction)
            || !(0.0..=1.0).contains(&self.neutral_flip_prob)
        {
            return bad("probabilities must lie in [0,1]");
        }
        // Distinct words need enough room in the syllable space.
        let capacity = 5usize.pow(self.source_word_len[1].min(8) as u32);
        if self.lexicon_size * 3 > capacity {
            return bad("lexicon too large for the configured word lengths");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lemma {
    pub source: String,
    pub short: String,
    pub long: String,
    pub canonical_long: bool,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    let start_with_vowel = rng.random_bool(0.3);
    (0..len)
        .map(|i| {
            let vowel = (i % 2 == 0) == start_with_vowel;
            let set = if vowel { VOWELS } else { CONSONANTS };
            set[rng.random_range(0..set.len())] as char
        })
        .collect()
}

/// Builds the lemma table; depends only on the lexicon fields and seed.
pub fn build_lexicon(spec: &SynthSpec) -> Result<Vec<Lemma>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.lexicon_seed);
    let mut seen = std::collections::HashSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng, len: usize| -> Result<String> {
        for _ in 0..10_000 {
            let w = pseudo_word(rng, len);
            if seen.insert(w.clone()) {
                return Ok(w);
            }
        }
        Err(Error::InfeasibleSpec(format!("cannot find distinct words of length {len}")))
    };
    let mut lexicon = Vec::with_capacity(spec.lexicon_size);
    for _ in 0..spec.lexicon_size {
        let src_len = rng.random_range(spec.source_word_len[0]..=spec.source_word_len[1]);
        let sd = rng.random_range(spec.short_delta[0]..=spec.short_delta[1]);
        let ld = rng.random_range(spec.long_delta[0]..=spec.long_delta[1]);
        let canonical_long = rng.random_bool(spec.canonical_long_fraction);
        let source = fresh(&mut rng, src_len)?;
        let short = fresh(&mut rng, src_len.saturating_sub(sd).max(1))?;
        let long = fresh(&mut rng, src_len + ld)?;
        lexicon.push(Lemma {
            source,
            short,
            long,
            canonical_long,
        });
    }
    Ok(lexicon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub pair: SentencePair,
    pub style: Style,
}

pub fn generate_synthetic(spec: &SynthSpec, th: &Thresholds) -> Result<Vec<SentencePair>> {
    Ok(generate_synthetic_with_styles(spec, th)?
        .into_iter()
        .map(|e| e.pair)
        .collect())
}

pub fn generate_synthetic_with_styles(spec: &SynthSpec, th: &Thresholds) -> Result<Vec<SynthExample>> {
    let lexicon = build_lexicon(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mix = spec.style_mix;
    let mut out = Vec::with_capacity(spec.num_pairs);
    while out.len() < spec.num_pairs {
        let n = rng.random_range(spec.sentence_words[0]..=spec.sentence_words[1]);
        let lemmas: Vec<&Lemma> = (0..n)
            .map(|_| &lexicon[rng.random_range(0..lexicon.len())])
            .collect();
        let src = lemmas
            .iter()
            .map(|l| l.source.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        for _ in 0..spec.realizations_per_source {
            if out.len() == spec.num_pairs {
                break;
            }
            let u: f64 = rng.random();
            let style = if u < mix.terse {
                Style::Terse
            } else if u < mix.terse + mix.neutral {
                Style::Neutral
            } else {
                Style::Verbose
            };
            let words: Vec<&str> = lemmas
                .iter()
                .map(|l| {
                    let long = match style {
                        Style::Terse => false,
                        Style::Verbose => true,
                        Style::Neutral => l.canonical_long ^ rng.random_bool(spec.neutral_flip_prob),
                    };
                    if long {
                        l.long.as_str()
                    } else {
                        l.short.as_str()
                    }
                })
                .collect();
            let tgt = words.join(" ");
            out.push(SynthExample {
                pair: SentencePair::new(&src, &tgt, th)?,
                style,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Batching

/// A pair mapped to vocabulary ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedPair {
    /// Position of the pair in the corpus it came from.
    pub index: usize,
    pub src_ids: Vec<usize>,
    pub tgt_ids: Vec<usize>,
    /// Decoder character cursor before each target token and before EOS.
    pub tgt_cursor: Vec<usize>,
    pub src_chars: usize,
    pub tgt_chars: usize,
}

impl TokenizedPair {
    pub fn num_tokens(&self) -> usize {
        self.src_ids.len() + self.tgt_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub pairs: Vec<TokenizedPair>,
    /// Source ids padded to the longest source in the batch.
    pub src: Vec<Vec<usize>>,
    pub src_mask: Vec<Vec<bool>>,
    /// Target ids padded to the longest target in the batch.
    pub tgt: Vec<Vec<usize>>,
    pub tgt_mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn new(pairs: Vec<TokenizedPair>, pad_id: usize) -> Self {
        let (src, src_mask) = pad(pairs.iter().map(|p| p.src_ids.as_slice()), pad_id);
        let (tgt, tgt_mask) = pad(pairs.iter().map(|p| p.tgt_ids.as_slice()), pad_id);
        Self {
            pairs,
            src,
            src_mask,
            tgt,
            tgt_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.pairs.iter().map(TokenizedPair::num_tokens).sum()
    }
}

fn pad<'a>(rows: impl Iterator<Item = &'a [usize]> + Clone, pad_id: usize) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let width = rows.clone().map(<[usize]>::len).max().unwrap_or(0);
    rows.map(|r| {
        let mut ids = r.to_vec();
        let mut mask = vec![true; r.len()];
        ids.resize(width, pad_id);
        mask.resize(width, false);
        (ids, mask)
    })
    .unzip()
}

/// Shuffles with `seed` and packs pairs greedily into batches of at most
/// `max_tokens` source plus target tokens.
pub fn make_batches(
    corpus: &[TokenizedPair],
    max_tokens: usize,
    pad_id: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if let Some(p) = corpus.iter().find(|p| p.num_tokens() > max_tokens) {
        return Err(Error::PairExceedsBudget {
            index: p.index,
            tokens: p.num_tokens(),
            budget: max_tokens,
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0;
    for i in order {
        let p = &corpus[i];
        if used + p.num_tokens() > max_tokens && !current.is_empty() {
            batches.push(Batch::new(std::mem::take(&mut current), pad_id));
            used = 0;
        }
        used += p.num_tokens();
        current.push(p.clone());
    }
    if !current.is_empty() {
        batches.push(Batch::new(current, pad_id));
    }
    Ok(batches)
}
