//! Corpus BLEU and character length ratios.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::split_length_token;
use crate::error::{Error, Result};
use crate::textproc::char_length;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// Modified n-gram precisions for n = 1..4.
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    /// 0 to 100.
    pub bleu: f64,
    /// BLEU without the brevity penalty.
    pub bleu_star: f64,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
}

fn ngram_counts<'a, 'b>(tokens: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU over whitespace tokens with per-sentence clipping. A zero
/// precision at any order gives a score of 0.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R]) -> Result<BleuReport> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut c, mut r) = (0, 0);
    for (h, rf) in hyps.iter().zip(refs) {
        let ht: Vec<&str> = h.as_ref().split_whitespace().collect();
        let rt: Vec<&str> = rf.as_ref().split_whitespace().collect();
        c += ht.len();
        r += rt.len();
        for n in 1..=MAX_ORDER {
            let rc = ngram_counts(&rt, n);
            for (g, k) in ngram_counts(&ht, n) {
                matches[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += ht.len().saturating_sub(n - 1);
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let bleu_star = if precisions.iter().all(|&p| p > 0.0) {
        100.0 * (precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64).exp()
    } else {
        0.0
    };
    Ok(BleuReport {
        precisions,
        matches,
        totals,
        brevity_penalty,
        bleu: bleu_star * brevity_penalty,
        bleu_star,
        hyp_tokens: c,
        ref_tokens: r,
    })
}

/// BLEU with the brevity penalty divided out.
pub fn bleu_star(report: &BleuReport) -> f64 {
    if report.brevity_penalty > 0.0 {
        report.bleu / report.brevity_penalty
    } else {
        report.bleu_star
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    /// Mean per-sentence output/source character ratio.
    pub lr_src: f64,
    /// Mean per-sentence output/reference character ratio.
    pub lr_ref: f64,
    /// Population standard deviation of the output/source ratios.
    pub lr_src_std: f64,
    pub mean_out_chars: f64,
    pub sentences: usize,
    /// Sentences skipped for an empty source or reference.
    pub excluded: usize,
    /// Per-sentence output/source ratios of the included sentences.
    #[serde(skip)]
    pub src_ratios: Vec<f64>,
}

/// Character length ratios. A leading length token on a source is not
/// counted. Pairs with an empty source or reference are excluded.
pub fn length_stats<O, S, R>(outputs: &[O], sources: &[S], references: &[R]) -> Result<LengthStats>
where
    O: AsRef<str>,
    S: AsRef<str>,
    R: AsRef<str>,
{
    if outputs.len() != sources.len() || outputs.len() != references.len() {
        return Err(Error::Shape(format!(
            "{} outputs, {} sources, {} references",
            outputs.len(),
            sources.len(),
            references.len()
        )));
    }
    let mut src_ratios = Vec::new();
    let mut ref_ratios = Vec::new();
    let mut out_chars = Vec::new();
    let mut excluded = 0;
    for ((o, s), r) in outputs.iter().zip(sources).zip(references) {
        let sc = char_length(split_length_token(s.as_ref()).1);
        let rc = char_length(r.as_ref());
        if sc == 0 || rc == 0 {
            excluded += 1;
            continue;
        }
        let oc = char_length(o.as_ref()) as f64;
        src_ratios.push(oc / sc as f64);
        ref_ratios.push(oc / rc as f64);
        out_chars.push(oc);
    }
    if src_ratios.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = src_ratios.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let lr_src = mean(&src_ratios);
    let var = src_ratios.iter().map(|x| (x - lr_src).powi(2)).sum::<f64>() / n;
    Ok(LengthStats {
        lr_src,
        lr_ref: mean(&ref_ratios),
        lr_src_std: var.sqrt(),
        mean_out_chars: mean(&out_chars),
        sentences: src_ratios.len(),
        excluded,
        src_ratios,
    })
}

/// Flat evaluation record: BLEU report and length statistics side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub bleu: f64,
    pub bleu_star: f64,
    pub brevity_penalty: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
    pub lr_src: f64,
    pub lr_ref: f64,
    pub lr_src_std: f64,
    pub std_kind: String,
    pub mean_out_chars: f64,
    pub sentences: usize,
    pub excluded: usize,
}

impl EvalRecord {
    pub fn new(b: &BleuReport, l: &LengthStats) -> Self {
        Self {
            bleu: b.bleu,
            bleu_star: b.bleu_star,
            brevity_penalty: b.brevity_penalty,
            p1: b.precisions[0],
            p2: b.precisions[1],
            p3: b.precisions[2],
            p4: b.precisions[3],
            hyp_tokens: b.hyp_tokens,
            ref_tokens: b.ref_tokens,
            lr_src: l.lr_src,
            lr_ref: l.lr_ref,
            lr_src_std: l.lr_src_std,
            std_kind: "population".into(),
            mean_out_chars: l.mean_out_chars,
            sentences: l.sentences,
            excluded: l.excluded,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, hyp_len={}, ref_len={})\n\
             BLEU* = {:.2}\n\
             LR_src = {:.4} (std {:.4}), LR_ref = {:.4}, sentences = {}, excluded = {}\n",
            self.bleu,
            100.0 * self.p1,
            100.0 * self.p2,
            100.0 * self.p3,
            100.0 * self.p4,
            self.brevity_penalty,
            self.hyp_tokens,
            self.ref_tokens,
            self.bleu_star,
            self.lr_src,
            self.lr_src_std,
            self.lr_ref,
            self.sentences,
            self.excluded
        )
    }
}

pub const COLUMNS: [&str; 6] = ["label", "BLEU", "BLEU*", "LR_src", "LR_ref", "LR_std"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    #[serde(rename = "BLEU")]
    pub bleu: f64,
    #[serde(rename = "BLEU*")]
    pub bleu_star: f64,
    #[serde(rename = "LR_src")]
    pub lr_src: f64,
    #[serde(rename = "LR_ref")]
    pub lr_ref: f64,
    #[serde(rename = "LR_std")]
    pub lr_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// One row per labelled run, in input order.
pub fn compare_runs(runs: &[(String, BleuReport, LengthStats)]) -> ComparisonTable {
    ComparisonTable {
        rows: runs
            .iter()
            .map(|(label, b, l)| ComparisonRow {
                label: label.clone(),
                bleu: b.bleu,
                bleu_star: b.bleu_star,
                lr_src: l.lr_src,
                lr_ref: l.lr_ref,
                lr_std: l.lr_src_std,
            })
            .collect(),
    }
}

impl ComparisonTable {
    pub fn get(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
        let mut s = format!(
            "{:<w$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n",
            COLUMNS[0], COLUMNS[1], COLUMNS[2], COLUMNS[3], COLUMNS[4], COLUMNS[5]
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:>7.2}  {:>7.2}  {:>7.3}  {:>7.3}  {:>7.3}",
                r.label, r.bleu, r.bleu_star, r.lr_src, r.lr_ref, r.lr_std
            );
        }
        s
    }

    /// One JSON object per row.
    pub fn to_records(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain row") + "\n")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_scores_100() {
        let r = corpus_bleu(&["a b c d e"], &["a b c d e"]).unwrap();
        assert!(close(r.bleu, 100.0, 1e-9));
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn longer_hypothesis() {
        let r = corpus_bleu(&["a b c d e"], &["a b c d"]).unwrap();
        assert_eq!(r.precisions, [0.8, 0.75, 2.0 / 3.0, 0.5]);
        assert_eq!(r.brevity_penalty, 1.0);
        let want = 100.0 * (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert!(close(r.bleu, want, 1e-9));
        assert!(close(r.bleu, 66.87, 0.01));
        assert_eq!(bleu_star(&r), r.bleu);
    }

    #[test]
    fn shorter_hypothesis_pays_brevity_penalty() {
        let r = corpus_bleu(&["a b c d"], &["a b c d e"]).unwrap();
        assert_eq!(r.precisions, [1.0; 4]);
        assert!(close(r.brevity_penalty, (-0.25f64).exp(), 1e-12));
        assert!(close(r.bleu, 77.88, 0.01));
        assert!(close(bleu_star(&r), 100.0, 1e-9));
        assert!(r.bleu_star > r.bleu);
    }

    #[test]
    fn zero_precision_keeps_reporting_precisions() {
        let r = corpus_bleu(&["a b c"], &["a b x"]).unwrap();
        assert_eq!(r.bleu, 0.0);
        assert_eq!(bleu_star(&r), 0.0);
        assert!(r.precisions[0] > 0.0);
        assert_eq!(r.precisions[2], 0.0);
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(matches!(
            corpus_bleu(&["a"], &["a", "b"]),
            Err(Error::LengthMismatch { hyps: 1, refs: 2 })
        ));
    }

    #[test]
    fn length_stat_examples() {
        let s = length_stats(&["abc", "de"], &["abc", "de"], &["x", "y"]).unwrap();
        assert_eq!((s.lr_src, s.lr_src_std), (1.0, 0.0));
        let s = length_stats(&["abcdefghi", "abcdefghijk"], &["abcdefghij"; 2], &["abcdefghi", "abcdefghijk"]).unwrap();
        assert!(close(s.lr_src, 1.0, 1e-12));
        assert!(close(s.lr_src_std, 0.1, 1e-12));
        assert!(close(s.lr_ref, 1.0, 1e-12));
        assert_eq!(s.mean_out_chars, 10.0);
    }

    #[test]
    fn length_token_and_empty_lines() {
        let s = length_stats(&["abc", "x"], &["<long> abc", ""], &["abc", "y"]).unwrap();
        assert_eq!(s.lr_src, 1.0);
        assert_eq!((s.sentences, s.excluded), (1, 1));
    }

    #[test]
    fn comparison_table_layout() {
        let b = corpus_bleu(&["a b c d"], &["a b c d e"]).unwrap();
        let l = length_stats(&["ab"], &["ab"], &["ab"]).unwrap();
        let t = compare_runs(&[("one".into(), b.clone(), l.clone()), ("two".into(), b, l)]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].label, "one");
        let rec: serde_json::Value = serde_json::from_str(t.to_records().lines().next().unwrap()).unwrap();
        let mut keys: Vec<&str> = rec.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        let mut want = COLUMNS.to_vec();
        want.sort();
        assert_eq!(keys, want);
        assert!(t.to_text().starts_with("label"));
    }

    /// Brute-force oracle: enumerate every n-gram position explicitly and
    /// clip by counting occurrences in the reference with nested loops.
    fn oracle(hyps: &[Vec<u8>], refs: &[Vec<u8>]) -> f64 {
        let mut m = [0f64; 4];
        let mut t = [0f64; 4];
        let (mut c, mut r) = (0usize, 0usize);
        for (h, rf) in hyps.iter().zip(refs) {
            c += h.len();
            r += rf.len();
            for n in 1..=4 {
                if h.len() < n {
                    continue;
                }
                let mut seen: Vec<&[u8]> = Vec::new();
                for i in 0..=h.len() - n {
                    let g = &h[i..i + n];
                    t[n - 1] += 1.0;
                    if seen.contains(&g) {
                        continue;
                    }
                    seen.push(g);
                    let in_h = (0..=h.len() - n).filter(|&j| &h[j..j + n] == g).count();
                    let in_r = if rf.len() >= n {
                        (0..=rf.len() - n).filter(|&j| &rf[j..j + n] == g).count()
                    } else {
                        0
                    };
                    m[n - 1] += in_h.min(in_r) as f64;
                }
            }
        }
        if c == 0 || (0..4).any(|n| m[n] == 0.0) {
            return 0.0;
        }
        let logp: f64 = (0..4).map(|n| (m[n] / t[n]).ln()).sum::<f64>() / 4.0;
        let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
        100.0 * bp * logp.exp()
    }

    fn render(s: &[u8]) -> String {
        s.iter().map(|b| format!("w{b}")).collect::<Vec<_>>().join(" ")
    }

    fn corpus() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>)>> {
        let sent = || proptest::collection::vec(0u8..6, 0..9);
        proptest::collection::vec((sent(), sent()), 1..=5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_brute_force(c in corpus()) {
            let (h, r): (Vec<_>, Vec<_>) = c.into_iter().unzip();
            let hs: Vec<String> = h.iter().map(|s| render(s)).collect();
            let rs: Vec<String> = r.iter().map(|s| render(s)).collect();
            let rep = corpus_bleu(&hs, &rs).unwrap();
            prop_assert!((rep.bleu - oracle(&h, &r)).abs() < 1e-9);
            prop_assert!(rep.bleu_star >= rep.bleu);
            if rep.hyp_tokens >= rep.ref_tokens {
                prop_assert_eq!(rep.bleu_star, rep.bleu);
            }
        }

        #[test]
        fn order_does_not_matter(c in corpus(), rot in 0usize..5) {
            let (h, r): (Vec<_>, Vec<_>) = c.into_iter().unzip();
            let hs: Vec<String> = h.iter().map(|s| render(s)).collect();
            let rs: Vec<String> = r.iter().map(|s| render(s)).collect();
            let k = rot % hs.len();
            let (mut hs2, mut rs2) = (hs.clone(), rs.clone());
            hs2.rotate_left(k);
            rs2.rotate_left(k);
            let a = corpus_bleu(&hs, &rs).unwrap();
            let b = corpus_bleu(&hs2, &rs2).unwrap();
            prop_assert!((a.bleu - b.bleu).abs() < 1e-9);
            if let (Ok(x), Ok(y)) = (length_stats(&hs, &hs, &rs), length_stats(&hs2, &hs2, &rs2)) {
                prop_assert!((x.lr_src - y.lr_src).abs() < 1e-12);
                prop_assert!((x.lr_ref - y.lr_ref).abs() < 1e-12);
                prop_assert!((x.lr_src_std - y.lr_src_std).abs() < 1e-12);
            }
        }

        #[test]
        fn bleu_ignores_characters_and_ratios_ignore_tokenization(c in corpus()) {
            // Renaming tokens to longer strings keeps BLEU; splitting the
            // surface differently keeps character ratios.
            let (h, r): (Vec<_>, Vec<_>) = c.into_iter().unzip();
            let short: Vec<String> = h.iter().map(|s| render(s)).collect();
            let shortr: Vec<String> = r.iter().map(|s| render(s)).collect();
            let long: Vec<String> = short.iter().map(|s| s.replace('w', "word")).collect();
            let longr: Vec<String> = shortr.iter().map(|s| s.replace('w', "word")).collect();
            let a = corpus_bleu(&short, &shortr).unwrap();
            let b = corpus_bleu(&long, &longr).unwrap();
            prop_assert!((a.bleu - b.bleu).abs() < 1e-9);
            let glued: Vec<String> = short.iter().map(|s| s.replace(' ', "_")).collect();
            if let (Ok(x), Ok(y)) = (length_stats(&short, &shortr, &shortr), length_stats(&glued, &shortr, &shortr)) {
                prop_assert!((x.lr_src - y.lr_src).abs() < 1e-12);
            }
        }
    }
}
