//! Subword segmentation and character-length bookkeeping.
//!
//! Every length in the crate is measured with [`char_length`]: Unicode scalar
//! values of the whitespace-normalized string, single inter-word spaces
//! included. [`TokenSeq`] carries per-token character contributions so that
//! cursor arithmetic over subwords always adds up to the surface length.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::LengthClass;
use crate::error::{Error, Result};

/// Suffix marking a subword that continues into the next one.
pub const CONTINUATION_MARKER: &str = "@@";

/// Header line of the merge-table text format.
pub const MERGE_FILE_HEADER: &str = "#bpe-v1";

/// Default number of merges at desk scale.
pub const DEFAULT_NUM_MERGES: usize = 500;

/// Character length of a surface string after whitespace normalization.
pub fn char_length(text: &str) -> usize {
    let mut total = 0;
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            total += 1;
        }
        total += word.chars().count();
    }
    total
}

/// Collapses runs of whitespace to single spaces and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Learned BPE merges, in the order they were learned.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            if pair.0.is_empty() || pair.1.is_empty() {
                return Err(Error::MergeTable(format!("empty symbol in merge {rank}")));
            }
            if ranks.insert(pair.clone(), rank).is_some() {
                return Err(Error::MergeTable(format!(
                    "duplicate merge `{} {}`",
                    pair.0, pair.1
                )));
            }
        }
        Ok(Self { merges, ranks })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Symbols produced by the merges.
    pub fn vocab(&self) -> HashSet<String> {
        self.merges
            .iter()
            .map(|(l, r)| format!("{l}{r}"))
            .collect()
    }

    fn rank(&self, left: &str, right: &str) -> Option<usize> {
        // Allocation-free lookup would need a borrowed pair key; tables are small.
        self.ranks.get(&(left.to_owned(), right.to_owned())).copied()
    }

    /// Renders the `#bpe-v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from(MERGE_FILE_HEADER);
        out.push('\n');
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == MERGE_FILE_HEADER => {}
            Some(h) => {
                return Err(Error::MergeTable(format!(
                    "expected header `{MERGE_FILE_HEADER}`, found `{h}`"
                )))
            }
            None => return Err(Error::MergeTable("empty file".into())),
        }
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_owned(), r.to_owned()))
                }
                _ => {
                    return Err(Error::MergeTable(format!(
                        "line {}: expected `left right`",
                        i + 2
                    )))
                }
            }
        }
        Self::new(merges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_text(&text)
    }
}

/// Subword tokens annotated with their surface-character contributions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    /// Characters contributed by each token. The last subword of every
    /// non-final word also owns the following space.
    pub char_lens: Vec<usize>,
    pub total_chars: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Rebuilds the character bookkeeping from bare tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let n = tokens.len();
        let mut char_lens = Vec::with_capacity(n);
        for (i, tok) in tokens.iter().enumerate() {
            let surface = surface_of(tok);
            if surface.is_empty() {
                return Err(Error::MalformedTokens(format!("empty token at {i}")));
            }
            let mut len = surface.chars().count();
            if is_word_final(tok) && i + 1 < n {
                len += 1;
            }
            char_lens.push(len);
        }
        if let Some(last) = tokens.last() {
            if !is_word_final(last) {
                return Err(Error::MalformedTokens(format!(
                    "dangling continuation marker on final token `{last}`"
                )));
            }
        }
        let total_chars = char_lens.iter().sum();
        Ok(Self {
            tokens,
            char_lens,
            total_chars,
        })
    }

    /// Character cursor before each token and after the last one.
    ///
    /// Entry `t` is the length of the surface string spelled by tokens
    /// `0..t`. A word separator is counted once the next word starts, so every
    /// entry is computable left to right and the final entry equals
    /// `total_chars`.
    pub fn cursor_positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.tokens.len() + 1);
        let mut pos = 0;
        let mut at_word_boundary = false;
        out.push(0);
        for tok in &self.tokens {
            if at_word_boundary {
                pos += 1;
            }
            pos += surface_of(tok).chars().count();
            at_word_boundary = is_word_final(tok);
            out.push(pos);
        }
        out
    }
}

/// Surface form of a token, marker removed.
pub fn surface_of(token: &str) -> &str {
    token.strip_suffix(CONTINUATION_MARKER).unwrap_or(token)
}

/// Whether a token ends a word (carries no continuation marker).
pub fn is_word_final(token: &str) -> bool {
    !token.ends_with(CONTINUATION_MARKER)
}

fn is_reserved(word: &str) -> bool {
    LengthClass::ALL.iter().any(|c| c.token() == word)
}

/// Learns up to `num_merges` merges by repeatedly merging the most frequent
/// adjacent symbol pair; ties go to the lexicographically smallest pair.
pub fn learn_bpe<S: AsRef<str>>(corpus: &[S], num_merges: usize) -> Result<MergeTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for sentence in corpus {
        for word in sentence.as_ref().split_whitespace() {
            if !is_reserved(word) {
                *word_freq.entry(word).or_default() += 1;
            }
        }
    }
    let mut words: Vec<(Vec<String>, usize)> = word_freq
        .into_iter()
        .map(|(w, f)| (w.chars().map(String::from).collect(), f))
        .collect();

    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
        for (symbols, freq) in &words {
            for pair in symbols.windows(2) {
                *counts.entry((&pair[0], &pair[1])).or_default() += freq;
            }
        }
        let best = counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let (left, right) = (left.to_owned(), right.to_owned());
        for (symbols, _) in &mut words {
            merge_in_place(symbols, &left, &right);
        }
        merges.push((left, right));
    }
    MergeTable::new(merges)
}

fn merge_in_place(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let r = symbols.remove(i + 1);
            symbols[i].push_str(&r);
        }
        i += 1;
    }
}

fn segment_word(word: &str, table: &MergeTable) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    loop {
        let best = symbols
            .windows(2)
            .filter_map(|p| table.rank(&p[0], &p[1]))
            .min();
        let Some(rank) = best else { break };
        let (left, right) = &table.merges[rank];
        merge_in_place(&mut symbols, left, right);
    }
    symbols
}

/// Segments a sentence with the learned merges.
pub fn apply_bpe(sentence: &str, table: &MergeTable) -> TokenSeq {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let mut tokens = Vec::new();
    let mut char_lens = Vec::new();
    for (wi, word) in words.iter().enumerate() {
        let pieces = segment_word(word, table);
        let last = pieces.len() - 1;
        for (pi, piece) in pieces.into_iter().enumerate() {
            let mut len = piece.chars().count();
            if pi == last {
                if wi + 1 < words.len() {
                    len += 1;
                }
                tokens.push(piece);
            } else {
                tokens.push(piece + CONTINUATION_MARKER);
            }
            char_lens.push(len);
        }
    }
    let total_chars = char_lens.iter().sum();
    TokenSeq {
        tokens,
        char_lens,
        total_chars,
    }
}

/// Joins subwords back into a surface string.
pub fn detokenize(seq: &TokenSeq) -> Result<String> {
    detokenize_tokens(&seq.tokens)
}

pub fn detokenize_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<String> {
    let mut out = String::new();
    let mut pending_space = false;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        let surface = surface_of(tok);
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::MalformedTokens(format!("bad token `{tok}` at {i}")));
        }
        if pending_space {
            out.push(' ');
        }
        out.push_str(surface);
        pending_space = is_word_final(tok);
    }
    if !pending_space && !tokens.is_empty() {
        return Err(Error::MalformedTokens(
            "sequence ends with a continuation marker".into(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(l: &str, r: &str) -> (String, String) {
        (l.into(), r.into())
    }

    #[test]
    fn char_length_counts_single_spaces() {
        assert_eq!(char_length(""), 0);
        assert_eq!(char_length("Hello world"), 11);
        assert_eq!(char_length("  a  b "), 3);
        assert_eq!(char_length("é ü"), 3);
    }

    /// Brute-force adjacent pair counter over whitespace words.
    fn pair_counts(corpus: &[&str]) -> BTreeMap<(String, String), usize> {
        let mut out = BTreeMap::new();
        for s in corpus {
            for w in s.split_whitespace() {
                let chars: Vec<char> = w.chars().collect();
                for p in chars.windows(2) {
                    *out.entry((p[0].to_string(), p[1].to_string())).or_default() += 1;
                }
            }
        }
        out
    }

    #[test]
    fn first_merge_matches_pair_count_oracle() {
        let counts = pair_counts(&["aaab"]);
        assert_eq!(counts[&pair("a", "a")], 2);
        assert_eq!(counts[&pair("a", "b")], 1);
        let t = learn_bpe(&["aaab"], 1).unwrap();
        assert_eq!(t.merges(), &[pair("a", "a")]);

        let counts = pair_counts(&["low low lower"]);
        assert_eq!(counts[&pair("l", "o")], 3);
        assert_eq!(counts[&pair("o", "w")], 3);
        let t = learn_bpe(&["low low lower"], 2).unwrap();
        assert_eq!(t.merges()[0], pair("l", "o"));
        assert_eq!(t.merges()[1], pair("lo", "w"));
    }

    #[test]
    fn zero_merges_and_empty_corpus() {
        assert!(learn_bpe(&["ab"], 0).unwrap().is_empty());
        let empty: [&str; 0] = [];
        assert!(matches!(learn_bpe(&empty, 3), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn apply_examples() {
        let t = MergeTable::new(vec![pair("a", "b")]).unwrap();
        let s = apply_bpe("ab", &t);
        assert_eq!(s.tokens, ["ab"]);
        assert_eq!(s.char_lens, [2]);
        assert_eq!(s.total_chars, 2);

        let empty = MergeTable::default();
        let s = apply_bpe("ab", &empty);
        assert_eq!(s.tokens, ["a@@", "b"]);
        assert_eq!(s.char_lens, [1, 1]);

        let s = apply_bpe("ab ab", &empty);
        assert_eq!(s.char_lens, [1, 2, 1, 1]);
        assert_eq!(s.total_chars, char_length("ab ab"));
    }

    #[test]
    fn detokenize_examples_and_errors() {
        assert_eq!(detokenize_tokens(&["ab"]).unwrap(), "ab");
        assert_eq!(detokenize_tokens(&["a@@", "b"]).unwrap(), "ab");
        assert!(detokenize_tokens(&["a@@"]).is_err());
        assert!(detokenize_tokens(&["@@", "b"]).is_err());
        assert!(TokenSeq::from_tokens(vec!["x@@".into()]).is_err());
    }

    #[test]
    fn cursor_positions_track_surface_prefix() {
        let s = apply_bpe("ab cd", &MergeTable::default());
        assert_eq!(s.cursor_positions(), [0, 1, 2, 4, 5]);
        let s = apply_bpe("", &MergeTable::default());
        assert_eq!(s.cursor_positions(), [0]);
    }

    #[test]
    fn merge_file_round_trip_and_errors() {
        let t = learn_bpe(&["the cat sat on the mat"], 6).unwrap();
        let back = MergeTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(MergeTable::from_text("a b\n").is_err());
        assert!(MergeTable::from_text("#bpe-v1\na b\na b\n").is_err());
        assert!(MergeTable::from_text("#bpe-v1\nab\n").is_err());
    }

    #[test]
    fn reserved_tokens_never_learned() {
        let t = learn_bpe(&["<short> ab ab", "<long> ab"], 50).unwrap();
        assert!(!t.vocab().contains("<short>"));
        assert!(t.vocab().iter().all(|s| !s.contains('<')));
    }

    #[test]
    fn round_trip_fixed_sentence_under_any_table() {
        for n in 0..12 {
            let t = learn_bpe(&["the cat sat", "a cat ate the rat"], n).unwrap();
            let seq = apply_bpe("the cat sat", &t);
            assert_eq!(detokenize(&seq).unwrap(), "the cat sat");
        }
    }

    proptest! {
        #[test]
        fn bpe_round_trip_and_length_conservation(
            train in proptest::collection::vec("[a-e ]{0,12}", 1..5),
            sentence in "[a-f ]{0,20}",
            merges in 0usize..20,
        ) {
            let table = learn_bpe(&train, merges).unwrap();
            let seq = apply_bpe(&sentence, &table);
            prop_assert_eq!(seq.char_lens.iter().sum::<usize>(), seq.total_chars);
            prop_assert_eq!(seq.total_chars, char_length(&sentence));
            let surface = detokenize(&seq).unwrap();
            prop_assert_eq!(&surface, &normalize_whitespace(&sentence));
            prop_assert_eq!(*seq.cursor_positions().last().unwrap(), seq.total_chars);
            let rebuilt = TokenSeq::from_tokens(seq.tokens.clone()).unwrap();
            prop_assert_eq!(rebuilt, seq);
        }

        #[test]
        fn training_words_reassemble(train in proptest::collection::vec("[a-d]{1,8}", 1..6), merges in 0usize..15) {
            let table = learn_bpe(&train, merges).unwrap();
            for w in &train {
                let seq = apply_bpe(w, &table);
                let joined: String = seq.tokens.iter().map(|t| surface_of(t)).collect();
                prop_assert_eq!(&joined, w);
            }
        }
    }
}
