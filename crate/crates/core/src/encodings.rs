//! Trigonometric positional and length encodings.
//!
//! Component `2i` is `sin(x / base^(2i/d))` and component `2i+1` is
//! `cos(x / base^((2i+1)/d))` for `i = 0..d/2`. Note the odd components use
//! their own exponent `(2i+1)/d`, not the `2i/d` shared by many transformer
//! implementations. The argument `x` is the token index for positional
//! encoding, the remaining characters `len - pos` for the absolute length
//! encoding, and the quantized covered proportion for the relative one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BASE: f64 = 10_000.0;
pub const DEFAULT_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Token-index positional encoding.
    #[serde(rename = "pe")]
    Pe,
    /// Remaining character length.
    #[serde(rename = "abs")]
    LeAbs,
    /// Quantized proportion of the length budget already covered.
    #[serde(rename = "rel")]
    LeRel,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pe" => Ok(Variant::Pe),
            "abs" => Ok(Variant::LeAbs),
            "rel" => Ok(Variant::LeRel),
            other => Err(Error::Usage(format!("unknown encoding variant `{other}` (pe|abs|rel)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub d: usize,
    pub variant: Variant,
    /// Quantization levels, relative variant only.
    pub levels: usize,
    pub base: f64,
}

impl EncodingSpec {
    pub fn new(d: usize, variant: Variant) -> Result<Self> {
        let spec = Self {
            d,
            variant,
            levels: DEFAULT_LEVELS,
            base: DEFAULT_BASE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_levels(mut self, levels: usize) -> Result<Self> {
        self.levels = levels;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d % 2 != 0 {
            return Err(Error::OddDimension(self.d));
        }
        if self.levels == 0 {
            return Err(Error::EncodingSpec("quantization levels must be >= 1".into()));
        }
        if !(self.base > 1.0 && self.base.is_finite()) {
            return Err(Error::EncodingSpec(format!("base must be > 1, got {}", self.base)));
        }
        Ok(())
    }

    fn expect(&self, variant: Variant) -> Result<()> {
        self.validate()?;
        if self.variant != variant {
            return Err(Error::EncodingSpec(format!(
                "expected {variant:?} spec, got {:?}",
                self.variant
            )));
        }
        Ok(())
    }
}

/// Decoder character cursor: characters produced so far against the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CharCursor {
    pub pos: usize,
    pub len: usize,
}

impl CharCursor {
    /// `len` of zero is raised to one.
    pub fn new(pos: usize, len: usize) -> Self {
        Self { pos, len: len.max(1) }
    }

    /// Remaining characters; negative after overshooting the budget.
    pub fn remaining(&self) -> i64 {
        self.len as i64 - self.pos as i64
    }
}

fn trig(x: f64, d: usize, base: f64) -> Vec<f64> {
    let df = d as f64;
    (0..d)
        .map(|k| {
            let angle = x / base.powf(k as f64 / df);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

pub fn sinusoidal_pe(pos: usize, spec: &EncodingSpec) -> Result<Vec<f64>> {
    spec.expect(Variant::Pe)?;
    Ok(trig(pos as f64, spec.d, spec.base))
}

pub fn le_abs(cursor: CharCursor, spec: &EncodingSpec) -> Result<Vec<f64>> {
    spec.expect(Variant::LeAbs)?;
    Ok(trig(cursor.remaining() as f64, spec.d, spec.base))
}

/// `floor(min(pos/len, 1) * levels)`, so the codomain is `0..=levels`.
pub fn quantize(cursor: CharCursor, levels: usize) -> usize {
    let len = cursor.len.max(1);
    if cursor.pos >= len {
        return levels;
    }
    // Integer form of floor(pos * levels / len); avoids rounding at bucket edges.
    cursor.pos * levels / len
}

pub fn le_rel(cursor: CharCursor, spec: &EncodingSpec) -> Result<Vec<f64>> {
    spec.expect(Variant::LeRel)?;
    Ok(trig(quantize(cursor, spec.levels) as f64, spec.d, spec.base))
}

/// Length encoding of whichever length variant `spec` selects.
pub fn length_encoding(cursor: CharCursor, spec: &EncodingSpec) -> Result<Vec<f64>> {
    match spec.variant {
        Variant::LeAbs => le_abs(cursor, spec),
        Variant::LeRel => le_rel(cursor, spec),
        Variant::Pe => Err(Error::EncodingSpec("positional spec used as length encoding".into())),
    }
}

/// Evaluates `spec` at a row index: token position for `Pe`, cursor position
/// against `len` for the length variants.
pub fn encode_row(spec: &EncodingSpec, pos: usize, len: usize) -> Result<Vec<f64>> {
    match spec.variant {
        Variant::Pe => sinusoidal_pe(pos, spec),
        _ => length_encoding(CharCursor::new(pos, len), spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    variant: Variant,
    d: usize,
    levels: usize,
    len: usize,
    base_bits: u64,
}

/// Shared per-length encoding tables over `pos = 0..=len`.
///
/// Readers take a shared lock; a missing table is built once under the write
/// lock. Cursor positions past `len` are computed on the fly.
#[derive(Debug, Default)]
pub struct EncodingCache {
    tables: RwLock<HashMap<CacheKey, Arc<Vec<Vec<f64>>>>>,
}

impl EncodingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self, spec: &EncodingSpec, len: usize) -> Result<Arc<Vec<Vec<f64>>>> {
        let key = CacheKey {
            variant: spec.variant,
            d: spec.d,
            levels: spec.levels,
            len,
            base_bits: spec.base.to_bits(),
        };
        if let Some(t) = self.tables.read().expect("encoding cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let mut guard = self.tables.write().expect("encoding cache poisoned");
        if let Some(t) = guard.get(&key) {
            return Ok(Arc::clone(t));
        }
        let rows = (0..=len)
            .map(|pos| encode_row(spec, pos, len))
            .collect::<Result<Vec<_>>>()?;
        let table = Arc::new(rows);
        guard.insert(key, Arc::clone(&table));
        Ok(table)
    }

    pub fn row(&self, spec: &EncodingSpec, pos: usize, len: usize) -> Result<Vec<f64>> {
        let len = len.max(1);
        if pos > len {
            return encode_row(spec, pos, len);
        }
        Ok(self.table(spec, len)?[pos].clone())
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("encoding cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Text matrix with one row per position `0..=rows`: the row index first,
/// then `d` space-separated components.
pub fn dump_table(spec: &EncodingSpec, len: usize, rows: usize) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# variant={:?} d={} levels={} base={} len={}",
        spec.variant, spec.d, spec.levels, spec.base, len
    );
    for pos in 0..=rows {
        let row = encode_row(spec, pos, len)?;
        let _ = write!(out, "{pos}");
        for v in row {
            let _ = write!(out, " {v:.9}");
        }
        out.push('\n');
    }
    Ok(out)
}
