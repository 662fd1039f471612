use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::encodings::{Variant, DEFAULT_LEVELS};
use crate::error::{Error, Result};

/// Which length signals the model receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LengthMode {
    #[default]
    None,
    /// Class token prepended to the source.
    Token,
    /// Length encoding added to decoder inputs.
    Enc(Variant),
    TokenEnc(Variant),
}

impl LengthMode {
    pub fn uses_token(self) -> bool {
        matches!(self, LengthMode::Token | LengthMode::TokenEnc(_))
    }

    /// The decoder-side length encoding, if any.
    pub fn encoding(self) -> Option<Variant> {
        match self {
            LengthMode::Enc(v) | LengthMode::TokenEnc(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for LengthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let enc = |v: &Variant| if *v == Variant::LeAbs { "abs" } else { "rel" };
        match self {
            LengthMode::None => f.write_str("none"),
            LengthMode::Token => f.write_str("token"),
            LengthMode::Enc(v) => write!(f, "enc-{}", enc(v)),
            LengthMode::TokenEnc(v) => write!(f, "token+enc-{}", enc(v)),
        }
    }
}

impl FromStr for LengthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => LengthMode::None,
            "token" => LengthMode::Token,
            "enc-abs" => LengthMode::Enc(Variant::LeAbs),
            "enc-rel" => LengthMode::Enc(Variant::LeRel),
            "token+enc-abs" => LengthMode::TokenEnc(Variant::LeAbs),
            "token+enc-rel" => LengthMode::TokenEnc(Variant::LeRel),
            other => {
                return Err(Error::Usage(format!(
                    "unknown length mode `{other}` (none|token|enc-abs|enc-rel|token+enc-abs|token+enc-rel)"
                )))
            }
        })
    }
}

impl Serialize for LengthMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LengthMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub ffn_hidden: usize,
    pub heads: usize,
    pub layers: usize,
    /// Shared source/target vocabulary size; filled in from the vocabulary.
    pub vocab_size: usize,
    pub length_mode: LengthMode,
    /// Quantization levels of the relative length encoding.
    pub levels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            ffn_hidden: 256,
            heads: 4,
            layers: 2,
            vocab_size: 0,
            length_mode: LengthMode::None,
            levels: DEFAULT_LEVELS,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelConfig(m));
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return bad(format!("d_model {} not divisible by {} heads", self.d_model, self.heads));
        }
        if self.d_model == 0 || self.d_model % 2 != 0 {
            return Err(Error::OddDimension(self.d_model));
        }
        if self.layers == 0 {
            return bad("layers must be >= 1".into());
        }
        if self.ffn_hidden == 0 {
            return bad("ffn_hidden must be >= 1".into());
        }
        if self.levels == 0 {
            return bad("levels must be >= 1".into());
        }
        if self.vocab_size < super::vocab::SPECIALS.len() {
            return bad(format!("vocab_size {} below the reserved symbols", self.vocab_size));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in [
            LengthMode::None,
            LengthMode::Token,
            LengthMode::Enc(Variant::LeAbs),
            LengthMode::Enc(Variant::LeRel),
            LengthMode::TokenEnc(Variant::LeAbs),
            LengthMode::TokenEnc(Variant::LeRel),
        ] {
            assert_eq!(m.to_string().parse::<LengthMode>().unwrap(), m);
        }
        assert!("enc".parse::<LengthMode>().is_err());
    }

    #[test]
    fn head_dim_and_validation() {
        let c = ModelConfig {
            vocab_size: 10,
            ..ModelConfig::default()
        };
        assert_eq!(c.head_dim(), 16);
        c.validate().unwrap();
        let bad = ModelConfig { heads: 3, ..c.clone() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { layers: 0, ..c };
        assert!(bad.validate().is_err());
    }
}
