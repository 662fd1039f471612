//! Declarative end-to-end comparison runs.
//!
//! A run builds or reads the data, learns subword merges, trains a
//! baseline, fine-tunes one model per length mode, decodes the test set
//! with every strategy and writes a comparison table. Every artifact is
//! listed in `manifest.json` with its checksum, the config hash and seed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{bucket_stats, generate_synthetic, read_tsv, write_tsv, LengthClass, SentencePair, SynthSpec, Thresholds};
use crate::decode::{translate_corpus, DecodeControl, TargetLen, Translation};
use crate::error::{Error, Result};
use crate::eval::{compare_runs, corpus_bleu, length_stats, BleuReport, ComparisonTable, LengthStats};
use crate::model::{finetune, train, Checkpoint, LengthMode, Model, ModelConfig, TrainRecord, Vocab};
use crate::nnet::TrainHyper;
use crate::textproc::learn_bpe;

/// Either a synthetic generator or three TSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub synth: Option<SynthSpec>,
    #[serde(default = "default_split")]
    pub dev_pairs: usize,
    #[serde(default = "default_split")]
    pub test_pairs: usize,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

fn default_split() -> usize {
    200
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            synth: Some(SynthSpec::default()),
            dev_pairs: default_split(),
            test_pairs: default_split(),
            train: None,
            dev: None,
            test: None,
        }
    }
}

/// Which decoding strategies to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeGrid {
    pub beam_size: usize,
    /// Exponent of the baseline's length-penalty strategy.
    pub penalty_alpha: f64,
    /// Target-length scale factors tried with combined models.
    pub scales: Vec<f64>,
    pub max_len_tokens: Option<usize>,
}

impl Default for DecodeGrid {
    fn default() -> Self {
        Self {
            beam_size: 4,
            penalty_alpha: 0.5,
            scales: vec![0.93, 1.0, 1.1, 1.2],
            max_len_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_merges")]
    pub bpe_merges: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// When set, thresholds are re-derived from the training ratios at
    /// these two quantiles and replace `thresholds`.
    #[serde(default)]
    pub threshold_quantiles: Option<[f64; 2]>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainHyper,
    #[serde(default)]
    pub finetune: TrainHyper,
    /// Length modes fine-tuned from the baseline.
    #[serde(default = "default_variants")]
    pub variants: Vec<LengthMode>,
    #[serde(default)]
    pub decode: DecodeGrid,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
}

fn default_merges() -> usize {
    crate::textproc::DEFAULT_NUM_MERGES
}

fn default_variants() -> Vec<LengthMode> {
    use crate::encodings::Variant;
    vec![
        LengthMode::Token,
        LengthMode::Enc(Variant::LeAbs),
        LengthMode::Enc(Variant::LeRel),
        LengthMode::TokenEnc(Variant::LeRel),
    ]
}

/// Key named in a TOML error: the left side of the offending line.
fn offending_key(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message();
    if msg.starts_with("unknown field") {
        if let Some(field) = msg.split('`').nth(1) {
            return field.to_string();
        }
    }
    e.span()
        .and_then(|span| {
            let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
            text[start..].lines().next()
        })
        .map(|line| line.split('=').next().unwrap_or("").trim().trim_matches(['[', ']']).to_string())
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "<config>".into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(offending_key(text, &e), e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let prefixed = |p: &str, e: Error| match e {
            Error::Config { key, message } => Error::config(format!("{p}.{key}"), message),
            Error::InfeasibleSpec(m) | Error::ModelConfig(m) => Error::config(p, m),
            Error::OddDimension(d) => Error::config(format!("{p}.d_model"), format!("must be even, got {d}")),
            other => Error::config(p, other.to_string()),
        };
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        self.thresholds.validate().map_err(|e| prefixed("thresholds", e))?;
        if let Some([lo, hi]) = self.threshold_quantiles {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::config("threshold_quantiles", "need 0 < lo <= hi < 1"));
            }
        }
        self.train.validate().map_err(|e| prefixed("train", e))?;
        self.finetune.validate().map_err(|e| prefixed("finetune", e))?;
        let probe = ModelConfig {
            vocab_size: crate::model::SPECIALS.len(),
            ..self.model.clone()
        };
        probe.validate().map_err(|e| prefixed("model", e))?;
        if self.model.length_mode != LengthMode::None {
            return Err(Error::config("model.length_mode", "the baseline is trained without length information; list modes under `variants`"));
        }
        let d = &self.data;
        let paths = [&d.train, &d.dev, &d.test].iter().filter(|p| p.is_some()).count();
        match (&d.synth, paths) {
            (Some(spec), 0) => {
                spec.validate().map_err(|e| prefixed("data.synth", e))?;
                if d.dev_pairs == 0 || d.test_pairs == 0 {
                    return Err(Error::config("data.dev_pairs", "dev and test splits must be non-empty"));
                }
            }
            (None, 3) => {}
            _ => {
                return Err(Error::config(
                    "data",
                    "give either `synth` or all of `train`, `dev` and `test`",
                ))
            }
        }
        let g = &self.decode;
        DecodeControl {
            beam_size: g.beam_size,
            alpha: g.penalty_alpha,
            max_len_tokens: g.max_len_tokens,
            ..DecodeControl::default()
        }
        .validate()
        .map_err(|e| prefixed("decode", e))?;
        if g.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("decode.scales", "scales must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out settings that
    /// cannot change results (where to write, how many threads).
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("serializable config");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
            map.remove("threads");
        }
        hex::encode(Sha256::digest(value.to_string()))
    }
}

/// One decoding strategy applied to one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strategy {
    pub label: String,
    /// Index into the trained models: 0 is the baseline.
    pub model: usize,
    pub control: DecodeControl,
}

/// Strategies for a baseline plus `variants`, in table order.
pub fn strategies(variants: &[LengthMode], grid: &DecodeGrid) -> Vec<Strategy> {
    let base = DecodeControl {
        beam_size: grid.beam_size,
        max_len_tokens: grid.max_len_tokens,
        ..DecodeControl::default()
    };
    let mut out = vec![
        Strategy {
            label: "baseline".into(),
            model: 0,
            control: base.clone(),
        },
        Strategy {
            label: "baseline/penalty".into(),
            model: 0,
            control: DecodeControl {
                alpha: grid.penalty_alpha,
                ..base.clone()
            },
        },
    ];
    for (i, mode) in variants.iter().enumerate() {
        let m = i + 1;
        let name = mode.to_string();
        let classes: Vec<Option<LengthClass>> = if mode.uses_token() {
            LengthClass::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for class in &classes {
            let label = match class {
                Some(c) => format!("{name}/{c}"),
                None => name.clone(),
            };
            out.push(Strategy {
                label,
                model: m,
                control: DecodeControl {
                    token_class: *class,
                    ..base.clone()
                },
            });
        }
        if mode.encoding().is_some() {
            let class = mode.uses_token().then_some(LengthClass::Normal);
            for &scale in grid.scales.iter().filter(|&&s| s != 1.0) {
                let label = match class {
                    Some(c) => format!("{name}/{c}@{scale}"),
                    None => format!("{name}@{scale}"),
                };
                out.push(Strategy {
                    label,
                    model: m,
                    control: DecodeControl {
                        token_class: class,
                        target_len: TargetLen::Source,
                        scale,
                        ..base.clone()
                    },
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub bleu: BleuReport,
    pub lengths: LengthStats,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config_hash: String,
    pub table: ComparisonTable,
    pub results: Vec<StrategyResult>,
    /// Baseline first, then one checkpoint per variant.
    pub checkpoints: Vec<Checkpoint>,
    /// Wall time of each training run and decoding strategy, by label.
    pub timings: Vec<(String, Duration)>,
    pub output_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn result(&self, label: &str) -> Option<&StrategyResult> {
        self.results.iter().find(|r| r.strategy.label == label)
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    config_hash: String,
    seed: u64,
}

/// Writes artifacts under one directory and remembers each for the manifest.
struct Artifacts {
    root: PathBuf,
    hash: String,
    seed: u64,
    entries: Mutex<Vec<ManifestEntry>>,
    log: Mutex<fs::File>,
    echo: bool,
    started: Instant,
}

impl Artifacts {
    fn new(root: &Path, hash: String, seed: u64, echo: bool) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let log_path = root.join("run.log");
        let log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            hash,
            seed,
            entries: Mutex::new(Vec::new()),
            log: Mutex::new(log),
            echo,
            started: Instant::now(),
        })
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    fn record(&self, rel: &str) -> Result<()> {
        let p = self.root.join(rel);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        self.entries.lock().expect("manifest lock").push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            config_hash: self.hash.clone(),
            seed: self.seed,
        });
        Ok(())
    }

    fn write(&self, rel: &str, contents: &str) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        self.record(rel)
    }

    /// JSON lines with a leading provenance record.
    fn write_records<T: Serialize>(&self, rel: &str, kind: &str, rows: &[T]) -> Result<()> {
        let mut s = serde_json::to_string(&json!({"kind": "header", "content": kind, "config_hash": self.hash, "seed": self.seed}))
            .expect("json");
        s.push('\n');
        for r in rows {
            s.push_str(&serde_json::to_string(r).map_err(|e| Error::Shape(e.to_string()))?);
            s.push('\n');
        }
        self.write(rel, &s)
    }

    fn event(&self, mut value: serde_json::Value) {
        value["elapsed_s"] = json!((self.started.elapsed().as_secs_f64() * 10.0).round() / 10.0);
        let line = value.to_string();
        if self.echo {
            eprintln!("{line}");
        }
        let _ = writeln!(self.log.lock().expect("log lock"), "{line}");
    }

    fn finish(&self, status: &str, error: Option<String>) -> Result<()> {
        let entries = self.entries.lock().expect("manifest lock");
        let doc = json!({
            "config_hash": self.hash,
            "seed": self.seed,
            "status": status,
            "error": error,
            "artifacts": *entries,
        });
        let p = self.root.join("manifest.json");
        fs::write(&p, serde_json::to_string_pretty(&doc).expect("json") + "\n").map_err(|e| Error::io(&p, e))
    }
}

fn load_splits(cfg: &ExperimentConfig) -> Result<[Vec<SentencePair>; 3]> {
    let th = &cfg.thresholds;
    if let Some(spec) = &cfg.data.synth {
        let split = |seed_offset: u64, n: usize, reals: usize| {
            let s = SynthSpec {
                seed: spec.seed.wrapping_add(seed_offset),
                num_pairs: n,
                realizations_per_source: reals,
                ..spec.clone()
            };
            generate_synthetic(&s, th)
        };
        return Ok([
            split(0, spec.num_pairs, spec.realizations_per_source)?,
            split(1, cfg.data.dev_pairs, 1)?,
            split(2, cfg.data.test_pairs, 1)?,
        ]);
    }
    let get = |p: &Option<PathBuf>| read_tsv(p.as_ref().expect("validated"), th);
    Ok([get(&cfg.data.train)?, get(&cfg.data.dev)?, get(&cfg.data.test)?])
}

fn with_meta(mut c: Checkpoint, hash: &str, seed: u64, name: &str) -> Checkpoint {
    c.meta.insert("config_hash".into(), hash.into());
    c.meta.insert("seed".into(), seed.to_string());
    c.meta.insert("name".into(), name.into());
    c
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Runs the whole comparison. `echo` mirrors log records to stderr.
pub fn run_experiment(cfg: &ExperimentConfig, echo: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let hash = cfg.hash();
    let art = Artifacts::new(&cfg.output_dir, hash.clone(), cfg.seed, echo)?;
    art.write("config.json", &(serde_json::to_string_pretty(cfg).expect("json") + "\n"))?;
    let result = pool.install(|| pipeline(cfg, &art));
    match &result {
        Ok(_) => art.finish("complete", None)?,
        Err(e) => {
            art.event(json!({"event": "failed", "error": e.to_string()}));
            art.finish("failed", Some(e.to_string()))?;
        }
    }
    result
}

fn pipeline(cfg: &ExperimentConfig, art: &Artifacts) -> Result<ExperimentOutcome> {
    let hash = &art.hash;
    art.event(json!({"event": "start", "config_hash": hash, "seed": cfg.seed}));
    let [mut train_set, mut dev_set, mut test_set] = load_splits(cfg)?;
    if let Some([lo, hi]) = cfg.threshold_quantiles {
        let ratios: Vec<f64> = train_set.iter().map(|p| p.ratio).collect();
        let th = Thresholds::from_quantiles(&ratios, lo, hi)?;
        for set in [&mut train_set, &mut dev_set, &mut test_set] {
            *set = set.iter().map(|p| SentencePair::new(&p.src, &p.tgt, &th)).collect::<Result<_>>()?;
        }
        art.write_records("data/thresholds.jsonl", "thresholds", &[th])?;
        art.event(json!({"event": "thresholds", "t_min": th.t_min, "t_max": th.t_max}));
    }
    for (name, set) in [("train", &train_set), ("dev", &dev_set), ("test", &test_set)] {
        let rel = format!("data/{name}.tsv");
        write_tsv(art.path(&rel)?, set)?;
        art.record(&rel)?;
    }
    let buckets = bucket_stats(&train_set);
    art.write_records("data/buckets.jsonl", "buckets", &[serde_json::from_str::<serde_json::Value>(&buckets.to_record()).expect("json")])?;
    art.event(json!({"event": "data", "train": train_set.len(), "dev": dev_set.len(), "test": test_set.len(), "buckets": buckets.to_string()}));

    let text: Vec<&str> = train_set.iter().flat_map(|p| [p.plain_src(), p.tgt.as_str()]).collect();
    let merges = learn_bpe(&text, cfg.bpe_merges)?;
    art.write("bpe.merges", &merges.to_text())?;
    let vocab = Vocab::build(&text, &merges, false);
    art.event(json!({"event": "bpe", "merges": merges.len(), "vocab": vocab.len()}));

    let save_log = |name: &str, log: &[TrainRecord]| art.write_records(&format!("logs/train_{name}.jsonl"), "train_log", log);
    let base_model = Model::build(cfg.model.clone(), vocab, merges, cfg.seed)?;
    let hyper = TrainHyper {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let mut timings = Vec::new();
    let clock = Instant::now();
    let base = train(base_model, &train_set, &dev_set, &hyper)?;
    timings.push(("train/baseline".to_string(), clock.elapsed()));
    save_log("baseline", &base.log)?;
    art.event(json!({"event": "trained", "model": "baseline", "steps": base.steps, "best_step": base.checkpoint.step, "dev_loss": base.checkpoint.dev_loss}));
    let base_ckpt = with_meta(base.checkpoint, hash, cfg.seed, "baseline");
    base_ckpt.save(art.path("models/baseline.lctl")?)?;
    art.record("models/baseline.lctl")?;

    let mut checkpoints = vec![base_ckpt];
    for (i, mode) in cfg.variants.iter().enumerate() {
        let name = file_stem(&mode.to_string());
        let h = TrainHyper {
            seed: cfg.seed.wrapping_add(i as u64 + 1),
            ..cfg.finetune.clone()
        };
        let clock = Instant::now();
        let out = finetune(&checkpoints[0], &train_set, &dev_set, *mode, &h)?;
        timings.push((format!("train/{mode}"), clock.elapsed()));
        save_log(&name, &out.log)?;
        art.event(json!({"event": "trained", "model": mode.to_string(), "steps": out.steps, "best_step": out.checkpoint.step, "dev_loss": out.checkpoint.dev_loss}));
        let ckpt = with_meta(out.checkpoint, hash, cfg.seed, &mode.to_string());
        let rel = format!("models/{name}.lctl");
        ckpt.save(art.path(&rel)?)?;
        art.record(&rel)?;
        checkpoints.push(ckpt);
    }

    let sources: Vec<&str> = test_set.iter().map(|p| p.plain_src()).collect();
    let refs: Vec<&str> = test_set.iter().map(|p| p.tgt.as_str()).collect();
    let mut results = Vec::new();
    for strategy in strategies(&cfg.variants, &cfg.decode) {
        let model = &checkpoints[strategy.model].model;
        let clock = Instant::now();
        let outs: Vec<Result<Translation>> = translate_corpus(model, &sources, &strategy.control);
        timings.push((format!("decode/{}", strategy.label), clock.elapsed()));
        let mut hyps = Vec::with_capacity(outs.len());
        let mut meta = Vec::with_capacity(outs.len());
        let mut failures = 0;
        for (i, o) in outs.iter().enumerate() {
            match o {
                Ok(t) => {
                    hyps.push(t.output.clone());
                    meta.push(json!({"line": i, "src_chars": t.src_chars, "out_chars": t.out_chars, "score": t.score, "target_len": t.target_len, "unfinished": t.unfinished}));
                }
                Err(e) => {
                    failures += 1;
                    hyps.push(String::new());
                    meta.push(json!({"line": i, "error": e.to_string()}));
                }
            }
        }
        let stem = file_stem(&strategy.label);
        art.write(&format!("hyp/{stem}.txt"), &(hyps.join("\n") + "\n"))?;
        art.write_records(&format!("hyp/{stem}.meta.jsonl"), "translation_meta", &meta)?;
        let bleu = corpus_bleu(&hyps, &refs)?;
        let lengths = length_stats(&hyps, &sources, &refs)?;
        art.event(json!({"event": "decoded", "label": strategy.label, "bleu": bleu.bleu, "lr_src": lengths.lr_src, "failures": failures}));
        results.push(StrategyResult {
            strategy,
            bleu,
            lengths,
            failures,
        });
    }
    let table = compare_runs(
        &results
            .iter()
            .map(|r| (r.strategy.label.clone(), r.bleu.clone(), r.lengths.clone()))
            .collect::<Vec<_>>(),
    );
    art.write(
        "comparison.txt",
        &format!("# config_hash={hash} seed={}\n{}", cfg.seed, table.to_text()),
    )?;
    art.write_records("comparison.jsonl", "comparison", &table.rows)?;
    let summary: BTreeMap<&str, f64> = results.iter().map(|r| (r.strategy.label.as_str(), r.bleu.bleu)).collect();
    art.event(json!({"event": "done", "bleu": summary}));
    Ok(ExperimentOutcome {
        config_hash: hash.clone(),
        table,
        results,
        checkpoints,
        timings,
        output_dir: art.root.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
output_dir = "out"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.bpe_merges, crate::textproc::DEFAULT_NUM_MERGES);
        assert_eq!(c.variants.len(), 4);
        assert_eq!(c.hash(), ExperimentConfig::from_toml(MINIMAL).unwrap().hash());
        let moved = ExperimentConfig {
            output_dir: "elsewhere".into(),
            threads: 3,
            ..c.clone()
        };
        assert_eq!(moved.hash(), c.hash());
        let reseeded = ExperimentConfig { seed: 4, ..c.clone() };
        assert_ne!(reseeded.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml("seed = 1\noutput_dir = \"o\"\n[train]\nlr_peek = 0.1\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "lr_peek"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = ExperimentConfig::from_toml("seed = 1\noutput_dir = \"o\"\n[train]\ndropout = 1.5\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "train.dropout"), "{err}");
        let err = ExperimentConfig::from_toml("seed = 1\noutput_dir = \"o\"\n[model]\nheads = 5\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "model"), "{err}");
        let err = ExperimentConfig::from_toml("seed = \"x\"\noutput_dir = \"o\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "seed"), "{err}");
    }

    #[test]
    fn strategy_labels() {
        let labels: Vec<String> = strategies(&default_variants(), &DecodeGrid::default())
            .into_iter()
            .map(|s| s.label)
            .collect();
        assert_eq!(&labels[..5], ["baseline", "baseline/penalty", "token/short", "token/normal", "token/long"]);
        assert!(labels.contains(&"enc-abs".to_string()));
        assert!(labels.contains(&"token+enc-rel/normal@1.2".to_string()));
        assert!(labels.contains(&"token+enc-rel/normal".to_string()));
    }
}
