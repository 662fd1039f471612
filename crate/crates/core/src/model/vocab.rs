use std::collections::{BTreeSet, HashMap};

use crate::corpus::{split_length_token, LengthClass};
use crate::error::{Error, Result};
use crate::textproc::{apply_bpe, MergeTable, TokenSeq, CONTINUATION_MARKER};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Shared source/target symbol inventory.
///
/// Layout: the four specials, then subword symbols in sorted order, then the
/// three length tokens when present. Appending the length tokens last keeps
/// every other id stable when a model is extended for token conditioning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Every subword the merges produce on `sentences`, plus each seen
    /// character in word-final and continued form so unseen words still map.
    pub fn build<S: AsRef<str>>(sentences: &[S], merges: &MergeTable, length_tokens: bool) -> Self {
        let mut symbols = BTreeSet::new();
        for s in sentences {
            let (_, plain) = split_length_token(s.as_ref());
            for tok in apply_bpe(plain, merges).tokens {
                symbols.insert(tok);
            }
            for c in plain.chars().filter(|c| !c.is_whitespace()) {
                symbols.insert(c.to_string());
                symbols.insert(format!("{c}{CONTINUATION_MARKER}"));
            }
        }
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(symbols.into_iter().filter(|s| !SPECIALS.contains(&s.as_str())));
        let v = Self::from_tokens(tokens).expect("symbols are unique");
        if length_tokens {
            v.with_length_tokens()
        } else {
            v
        }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Shape("vocabulary must start with the reserved symbols".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Shape(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        let v = Self { tokens, index };
        let present = LengthClass::ALL.iter().filter(|c| v.get(c.token()).is_some()).count();
        if present != 0 && present != 3 {
            return Err(Error::Shape("vocabulary holds a partial set of length tokens".into()));
        }
        Ok(v)
    }

    /// Copy with the three length tokens appended; unchanged if present.
    pub fn with_length_tokens(&self) -> Self {
        if self.has_length_tokens() {
            return self.clone();
        }
        let mut tokens = self.tokens.clone();
        tokens.extend(LengthClass::ALL.iter().map(|c| c.token().to_string()));
        Self::from_tokens(tokens).expect("length tokens are new")
    }

    pub fn has_length_tokens(&self) -> bool {
        self.get(LengthClass::Short.token()).is_some()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or `UNK`.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn length_token_id(&self, class: LengthClass) -> Option<usize> {
        self.get(class.token())
    }

    pub fn encode(&self, seq: &TokenSeq) -> Vec<usize> {
        seq.tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Symbols a decoder must never emit.
    pub fn is_control(&self, id: usize) -> bool {
        id == PAD || id == UNK || id == BOS || LengthClass::from_token(&self.tokens[id]).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::learn_bpe;

    #[test]
    fn layout_and_extension() {
        let corpus = ["low lower lowest", "new newer"];
        let merges = learn_bpe(&corpus, 10).unwrap();
        let v = Vocab::build(&corpus, &merges, false);
        assert_eq!(&v.tokens()[..4], &SPECIALS);
        assert!(!v.has_length_tokens());
        let w = v.with_length_tokens();
        assert_eq!(w.len(), v.len() + 3);
        assert_eq!(&w.tokens()[..v.len()], v.tokens());
        assert!(w.is_control(w.length_token_id(LengthClass::Long).unwrap()));
        assert!(!w.is_control(EOS));
    }

    #[test]
    fn unseen_words_fall_back_to_characters() {
        let corpus = ["abc abd"];
        let merges = learn_bpe(&corpus, 5).unwrap();
        let v = Vocab::build(&corpus, &merges, false);
        let seq = apply_bpe("cab", &MergeTable::new(vec![]).unwrap());
        assert!(v.encode(&seq).iter().all(|&id| id != UNK));
    }

    #[test]
    fn length_tokens_in_text_are_not_symbols() {
        let corpus = ["<long> abc"];
        let merges = learn_bpe(&corpus, 5).unwrap();
        let v = Vocab::build(&corpus, &merges, false);
        assert!(!v.has_length_tokens());
        assert!(v.get("<").is_none());
    }
}
