//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]`
//! line; run with `--nocapture` to see them.
//!
//! The length-control checks share one trained comparison built from
//! `configs/acceptance.toml` (about ten minutes on a single core).

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lenctl::corpus::{bucket_stats, classify, LengthClass, SentencePair, Thresholds};
use lenctl::encodings::{le_abs, le_rel, quantize, sinusoidal_pe, CharCursor, EncodingSpec, Variant};
use lenctl::eval::{bleu_star, corpus_bleu};
use lenctl::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use lenctl::model::{LengthMode, Model, ModelConfig, Vocab};
use lenctl::nnet::GradCheckConfig;
use lenctl::textproc::learn_bpe;

fn report(name: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

// ---------------------------------------------------------------------------
// Encodings

/// Independent evaluation: exponent through exp/ln rather than powf.
fn oracle_component(x: f64, k: usize, d: usize) -> f64 {
    let angle = x * (-(k as f64 / d as f64) * 10000f64.ln()).exp();
    if k % 2 == 0 {
        angle.sin()
    } else {
        angle.cos()
    }
}

/// (variant, d, pos, len, component, value) evaluated at 30 significant digits.
const SPOT_VALUES: &[(&str, usize, usize, usize, usize, f64)] = &[
    ("pe", 64, 999, 0, 0, -0.02646075273706412689),
    ("pe", 64, 999, 0, 1, -0.39899175771660657939),
    ("pe", 64, 999, 0, 2, 0.99213110495729653689),
    ("pe", 64, 999, 0, 31, 0.51473432366572864933),
    ("pe", 64, 999, 0, 32, -0.53560333461429114914),
    ("pe", 64, 999, 0, 63, 0.99335309801679231462),
    ("pe", 2, 1, 0, 0, 0.84147098480789650665),
    ("pe", 2, 1, 0, 1, 0.99995000041666527778),
    ("abs", 4, 3, 1000, 0, -0.89796748049795113582),
    ("abs", 4, 3, 1000, 1, 0.67416340505111018351),
    ("abs", 4, 3, 1000, 2, -0.51860794952931020374),
    ("abs", 4, 3, 1000, 3, 0.54282428367739279237),
    ("abs", 64, 0, 777, 0, -0.8555511930921242507),
    ("abs", 64, 0, 777, 1, 0.85071545440865829641),
    ("abs", 64, 0, 777, 40, 0.63228797867161577198),
    ("abs", 64, 0, 777, 63, 0.99597727214991951928),
    ("rel", 2, 37, 50, 0, 0.1411200080598672221),
    ("rel", 2, 37, 50, 1, 0.99955003374898751627),
    ("rel", 64, 999, 1000, 0, -0.75680249530792825137),
    ("rel", 64, 999, 1000, 1, -0.94852060460223306727),
    ("rel", 64, 999, 1000, 10, 0.81257090773397990183),
    ("rel", 64, 999, 1000, 63, 0.99999989331828732377),
];

fn encode(variant: &str, d: usize, pos: usize, len: usize) -> Vec<f64> {
    let cursor = CharCursor::new(pos, len);
    match variant {
        "pe" => sinusoidal_pe(pos, &EncodingSpec::new(d, Variant::Pe).unwrap()).unwrap(),
        "abs" => le_abs(cursor, &EncodingSpec::new(d, Variant::LeAbs).unwrap()).unwrap(),
        _ => le_rel(cursor, &EncodingSpec::new(d, Variant::LeRel).unwrap()).unwrap(),
    }
}

#[test]
fn encoding_exactness() {
    let start = Instant::now();
    let mut worst = 0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for &d in &[2usize, 4, 64] {
        for _ in 0..300 {
            let len = rng.random_range(1..=1000usize);
            let pos = rng.random_range(0..=1000usize);
            let q = ((pos as f64 / len as f64).min(1.0) * 5.0).floor();
            let remaining = len as f64 - pos as f64;
            for (variant, x) in [("pe", pos as f64), ("abs", remaining), ("rel", q)] {
                let got = encode(variant, d, pos, len);
                for (k, v) in got.iter().enumerate() {
                    worst = worst.max((v - oracle_component(x, k, d)).abs());
                }
            }
            if pos <= len {
                let abs = encode("abs", d, pos, len);
                let pe = encode("pe", d, len - pos, 0);
                assert_eq!(abs, pe, "abs({len},{pos}) differs from pe({})", len - pos);
            }
        }
    }
    for &(variant, d, pos, len, k, want) in SPOT_VALUES {
        worst = worst.max((encode(variant, d, pos, len)[k] - want).abs());
    }
    let mut quantize_ok = true;
    for len in 1..=50usize {
        for pos in 0..=2 * len {
            let want = ((pos as f64 / len as f64).min(1.0) * 5.0).floor() as usize;
            quantize_ok &= quantize(CharCursor::new(pos, len), 5) == want;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-9 && quantize_ok && elapsed < Duration::from_secs(5);
    report(
        "encoding exactness",
        ok,
        format!("max abs error {worst:.2e}, quantize exhaustive {quantize_ok}, {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Bucketing

#[test]
fn bucketing_boundaries() {
    let start = Instant::now();
    let th = Thresholds::default();
    let boundaries = classify(1.0, &th) == LengthClass::Short
        && classify(1.2, &th) == LengthClass::Normal
        && classify(1.2 + 1e-12, &th) == LengthClass::Long
        && classify(1.0 + 1e-12, &th) == LengthClass::Normal;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut partition = true;
    for _ in 0..200 {
        let n = rng.random_range(0..40);
        let corpus: Vec<SentencePair> = (0..n)
            .map(|_| {
                let s = "x".repeat(rng.random_range(1..30));
                let t = "y".repeat(rng.random_range(1..40));
                SentencePair::new(&s, &t, &th).unwrap()
            })
            .collect();
        let c = bucket_stats(&corpus);
        let by_class = LengthClass::ALL
            .iter()
            .all(|&k| c.get(k) == corpus.iter().filter(|p| p.class == k).count());
        partition &= c.total() == corpus.len() && by_class;
    }
    let elapsed = start.elapsed();
    let ok = boundaries && partition && elapsed < Duration::from_secs(1);
    report(
        "bucketing",
        ok,
        format!("boundaries {boundaries}, counts partition {partition}, {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// BLEU

/// Clipped n-gram matches by linear scans, no hashing.
fn oracle_bleu(hyps: &[Vec<&str>], refs: &[Vec<&str>]) -> f64 {
    let (mut c, mut r) = (0usize, 0usize);
    let mut log_sum = 0.0;
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            let hg: Vec<&[&str]> = h.windows(n).collect();
            let rg: Vec<&[&str]> = if rf.len() >= n { rf.windows(n).collect() } else { vec![] };
            total[n - 1] += hg.len();
            let mut seen: Vec<&[&str]> = Vec::new();
            for g in &hg {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let in_h = hg.iter().filter(|x| *x == g).count();
                let in_r = rg.iter().filter(|x| *x == g).count();
                matched[n - 1] += in_h.min(in_r);
            }
        }
    }
    for n in 0..4 {
        if matched[n] == 0 || total[n] == 0 {
            return 0.0;
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    100.0 * bp * (log_sum / 4.0).exp()
}

#[test]
fn bleu_matches_oracle() {
    let start = Instant::now();
    let words = ["a", "b", "c", "d"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..4);
        let sent = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            (0..rng.random_range(0..8)).map(|_| words[rng.random_range(0..words.len())]).collect()
        };
        let hyps: Vec<Vec<&str>> = (0..n).map(|_| sent(&mut rng)).collect();
        let refs: Vec<Vec<&str>> = (0..n).map(|_| sent(&mut rng)).collect();
        let h: Vec<String> = hyps.iter().map(|s| s.join(" ")).collect();
        let r: Vec<String> = refs.iter().map(|s| s.join(" ")).collect();
        let got = corpus_bleu(&h, &r).unwrap().bleu;
        worst = worst.max((got - oracle_bleu(&hyps, &refs)).abs());
    }
    let same = corpus_bleu(&["a b c d"], &["a b c d"]).unwrap();
    let longer = corpus_bleu(&["a b c d e"], &["a b c d"]).unwrap();
    let shorter = corpus_bleu(&["a b c d"], &["a b c d e"]).unwrap();
    let examples = (same.bleu - 100.0).abs() <= 0.01
        && (longer.bleu - 66.87).abs() <= 0.01
        && (shorter.bleu - 77.88).abs() <= 0.01;
    let star = (bleu_star(&shorter) - shorter.bleu / shorter.brevity_penalty).abs() < 1e-9
        && bleu_star(&shorter) > shorter.bleu
        && (bleu_star(&longer) - longer.bleu).abs() < 1e-12;
    let elapsed = start.elapsed();
    let ok = worst <= 1e-9 && examples && star && elapsed < Duration::from_secs(10);
    report(
        "BLEU oracle",
        ok,
        format!(
            "max |diff| {worst:.2e} over 200 corpora, examples {:.2}/{:.2}/{:.2}, BLEU* {:.2} > BLEU {:.2}, {elapsed:.2?}",
            same.bleu,
            longer.bleu,
            shorter.bleu,
            bleu_star(&shorter),
            shorter.bleu
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Gradients

#[test]
fn full_model_gradients() {
    let start = Instant::now();
    let th = Thresholds::default();
    let pairs: Vec<SentencePair> = [("ab cd", "abx cdx"), ("cd ab ab", "cd ab"), ("ba dc", "bax dcxx")]
        .iter()
        .map(|(s, t)| SentencePair::new(s, t, &th).unwrap())
        .collect();
    let text: Vec<&str> = pairs.iter().flat_map(|p| [p.src.as_str(), p.tgt.as_str()]).collect();
    let merges = learn_bpe(&text, 4).unwrap();
    let mut worst = 0f64;
    let mut checked = 0;
    for mode in [LengthMode::TokenEnc(Variant::LeAbs), LengthMode::Enc(Variant::LeRel)] {
        let vocab = Vocab::build(&text, &merges, mode.uses_token());
        let config = ModelConfig {
            d_model: 8,
            ffn_hidden: 16,
            heads: 2,
            layers: 1,
            length_mode: mode,
            ..ModelConfig::default()
        };
        let model = Model::<f64>::build(config, vocab, merges.clone(), 5).unwrap();
        let cfg = GradCheckConfig {
            tolerance: 1e-4,
            ..GradCheckConfig::default()
        };
        let r = model.check_gradients(&pairs, 0.1, &cfg).unwrap();
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
    }
    let elapsed = start.elapsed();
    let ok = worst < 1e-4 && elapsed < Duration::from_secs(60);
    report(
        "gradient integrity",
        ok,
        format!("max relative error {worst:.2e} over {checked} coordinates, {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Trained comparison

struct Trained {
    outcome: ExperimentOutcome,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::load(config_path("acceptance.toml")).unwrap();
        cfg.output_dir = dir.path().join("run");
        let start = Instant::now();
        let outcome = run_experiment(&cfg, false).unwrap();
        Trained {
            outcome,
            elapsed: start.elapsed(),
            _dir: dir,
        }
    })
}

fn lr_src(label: &str) -> f64 {
    trained().outcome.result(label).unwrap_or_else(|| panic!("no strategy {label}")).lengths.lr_src
}

fn lr_std(label: &str) -> f64 {
    trained().outcome.result(label).unwrap().lengths.lr_src_std
}

#[test]
fn length_token_control() {
    let t = trained();
    let (s, n, l) = (lr_src("token/short"), lr_src("token/normal"), lr_src("token/long"));
    // Train the baseline, fine-tune with length tokens and decode all three classes.
    let path: Duration = t
        .outcome
        .timings
        .iter()
        .filter(|(k, _)| k == "train/baseline" || k == "train/token" || k.starts_with("decode/token/"))
        .map(|(_, d)| *d)
        .sum();
    let ok = s <= n && n <= l && l - s >= 0.10 && path <= Duration::from_secs(15 * 60);
    report(
        "length token control",
        ok,
        format!(
            "LR_src short {s:.3} <= normal {n:.3} <= long {l:.3}; gap {:.3}; token path {:.0?} (full run {:.0?})",
            l - s,
            path,
            t.elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn absolute_encoding_tracks_source_length() {
    let lr = lr_src("enc-abs");
    let ok = (lr - 1.0).abs() <= 0.05;
    report("absolute length encoding", ok, format!("LR_src {lr:.3} (|LR-1| <= 0.05)"));
    assert!(ok);
}

#[test]
fn stability_ordering() {
    let (abs, rel, tok) = (lr_std("enc-abs"), lr_std("enc-rel"), lr_std("token/normal"));
    let ok = abs <= rel + 0.02 && rel <= tok + 0.02;
    report(
        "length ratio stability",
        ok,
        format!("std abs {abs:.3} <= rel {rel:.3} <= token {tok:.3} (slack 0.02)"),
    );
    assert!(ok);
}

#[test]
fn scale_factor_response() {
    let t = trained();
    let labels = [
        "token+enc-rel/normal@0.93",
        "token+enc-rel/normal",
        "token+enc-rel/normal@1.1",
        "token+enc-rel/normal@1.2",
    ];
    let chars: Vec<f64> = labels
        .iter()
        .map(|l| t.outcome.result(l).unwrap().lengths.mean_out_chars)
        .collect();
    let ok = chars.windows(2).all(|w| w[0] <= w[1]);
    report(
        "target length scaling",
        ok,
        format!("mean output chars at 0.93/1.0/1.1/1.2: {chars:.2?}"),
    );
    assert!(ok);
}

#[test]
fn finetuning_keeps_quality() {
    let t = trained();
    let base = t.outcome.result("baseline").unwrap().bleu.bleu;
    let tok = t.outcome.result("token/normal").unwrap().bleu.bleu;
    let ok = (tok - base).abs() <= 2.0;
    report(
        "fine-tuning neutrality",
        ok,
        format!("BLEU baseline {base:.2}, token/normal {tok:.2}, diff {:.2}", tok - base),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Determinism

#[test]
fn experiment_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig::load(config_path("smoke.toml")).unwrap();
    let run = |name: &str| {
        let cfg = ExperimentConfig {
            output_dir: dir.path().join(name),
            ..base.clone()
        };
        let out = run_experiment(&cfg, false).unwrap();
        let file = std::fs::read_to_string(cfg.output_dir.join("comparison.txt")).unwrap();
        (out.table, file)
    };
    let (a, fa) = run("first");
    let (b, fb) = run("second");
    let ok = a == b && fa == fb;
    report(
        "end-to-end determinism",
        ok,
        format!("{} strategies, tables identical {}", a.rows.len(), ok),
    );
    assert!(ok);
}
