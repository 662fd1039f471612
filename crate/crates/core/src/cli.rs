//! Command-line front end. Every subcommand reads its inputs from named
//! files, writes only to the paths it is given and reports progress as
//! JSON lines on stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{bucket_stats, generate_synthetic, read_tsv, write_tsv, LengthClass, SynthSpec, Thresholds};
use crate::decode::{translate_corpus, DecodeControl, TargetLen};
use crate::encodings::{dump_table, EncodingSpec, Variant};
use crate::error::{Error, Result};
use crate::eval::{corpus_bleu, length_stats, EvalRecord};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::model::{finetune, train, Checkpoint, LengthMode, Model, ModelConfig, Vocab};
use crate::nnet::TrainHyper;
use crate::textproc::{learn_bpe, MergeTable, DEFAULT_NUM_MERGES};

#[derive(Debug, Parser)]
#[command(name = "lenctl", version, about = "Length-controlled neural machine translation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic parallel corpus as TSV.
    Synth(SynthArgs),
    /// Learn subword merges from a TSV corpus.
    Bpe(BpeArgs),
    /// Count pairs per length class; prints (short,normal,long).
    Bucket(BucketArgs),
    /// Train a model from scratch.
    Train(TrainArgs),
    /// Continue training a checkpoint with length information enabled.
    Finetune(FinetuneArgs),
    /// Translate one sentence per line.
    Translate(TranslateArgs),
    /// Score hypotheses against references.
    Evaluate(EvaluateArgs),
    /// Run a full comparison from a TOML config.
    Experiment(ExperimentArgs),
    /// Print a table of positional or length encodings.
    Encodings(EncodingsArgs),
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 1.0)]
    t_min: f64,
    #[arg(long, default_value_t = 1.2)]
    t_max: f64,
}

impl ThresholdArgs {
    fn get(&self) -> Result<Thresholds> {
        Thresholds::new(self.t_min, self.t_max)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML file with generator settings; defaults apply otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prefix each source with its length token.
    #[arg(long)]
    tokens: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
struct BpeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NUM_MERGES)]
    merges: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Record,
}

#[derive(Debug, Args)]
struct BucketArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

/// `[model]` and `[train]` tables for the train and finetune commands.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct TrainFile {
    model: ModelConfig,
    train: TrainHyper,
}

impl TrainFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: Self = toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.message()))?;
        f.train.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("train.{key}"), message),
            other => other,
        })?;
        Ok(f)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Merge table from `bpe`.
    #[arg(long)]
    bpe: PathBuf,
    /// TOML with optional `[model]` and `[train]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Length mode: none, token, enc-abs, enc-rel, token+enc-abs or token+enc-rel.
    #[arg(long, default_value = "none")]
    mode: LengthMode,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Training log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    mode: LengthMode,
    /// TOML with a `[train]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Length class for token models; a leading token on a line also works.
    #[arg(long)]
    class: Option<LengthClass>,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4)]
    beam: usize,
    /// Character budget for encoding models: `source` or `fixed:N`.
    #[arg(long, default_value = "source")]
    target_len_mode: TargetLen,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EncodingsArgs {
    /// pe, abs or rel.
    #[arg(long, default_value = "abs")]
    variant: Variant,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 20)]
    len: usize,
    #[arg(long, default_value_t = 20)]
    rows: usize,
}

fn log(value: serde_json::Value) {
    eprintln!("{value}");
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_log<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).expect("serializable"));
        s.push('\n');
    }
    write_file(path, &s)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| Error::config(p.display().to_string(), e.message()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(n) = a.pairs {
        spec.num_pairs = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let th = a.thresholds.get()?;
    let mut pairs = generate_synthetic(&spec, &th)?;
    if a.tokens {
        pairs = pairs.iter().map(crate::corpus::inject_token).collect::<Result<_>>()?;
    }
    write_tsv(&a.out, &pairs)?;
    log(json!({"event": "synth", "pairs": pairs.len(), "buckets": bucket_stats(&pairs).to_string(), "out": a.out}));
    Ok(())
}

fn cmd_bpe(a: BpeArgs) -> Result<()> {
    let pairs = read_tsv(&a.input, &Thresholds::default())?;
    let text: Vec<&str> = pairs.iter().flat_map(|p| [p.plain_src(), p.tgt.as_str()]).collect();
    let table = learn_bpe(&text, a.merges)?;
    table.save(&a.out)?;
    log(json!({"event": "bpe", "merges": table.len(), "out": a.out}));
    Ok(())
}

fn cmd_bucket(a: BucketArgs) -> Result<()> {
    let counts = bucket_stats(&read_tsv(&a.input, &a.thresholds.get()?)?);
    match a.format {
        Format::Text => println!("{counts}"),
        Format::Record => println!("{}", counts.to_record()),
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let th = a.thresholds.get()?;
    let cfg = TrainFile::load(a.config.as_deref())?;
    let (train_set, dev_set) = (read_tsv(&a.train, &th)?, read_tsv(&a.dev, &th)?);
    let merges = MergeTable::load(&a.bpe)?;
    let text: Vec<&str> = train_set.iter().flat_map(|p| [p.plain_src(), p.tgt.as_str()]).collect();
    let vocab = Vocab::build(&text, &merges, a.mode.uses_token());
    let hyper = TrainHyper {
        seed: a.seed.unwrap_or(cfg.train.seed),
        ..cfg.train
    };
    let model = Model::build(ModelConfig { length_mode: a.mode, ..cfg.model }, vocab, merges, hyper.seed)?;
    let out = train(model, &train_set, &dev_set, &hyper)?;
    write_log(a.log.as_deref(), &out.log)?;
    out.checkpoint.save(&a.out)?;
    log(json!({"event": "trained", "steps": out.steps, "best_step": out.checkpoint.step, "dev_loss": out.checkpoint.dev_loss, "out": a.out}));
    Ok(())
}

fn cmd_finetune(a: FinetuneArgs) -> Result<()> {
    let th = a.thresholds.get()?;
    let cfg = TrainFile::load(a.config.as_deref())?;
    let base = Checkpoint::load(&a.base)?;
    let (train_set, dev_set) = (read_tsv(&a.train, &th)?, read_tsv(&a.dev, &th)?);
    let hyper = TrainHyper {
        seed: a.seed.unwrap_or(cfg.train.seed),
        ..cfg.train
    };
    let out = finetune(&base, &train_set, &dev_set, a.mode, &hyper)?;
    write_log(a.log.as_deref(), &out.log)?;
    out.checkpoint.save(&a.out)?;
    log(json!({"event": "finetuned", "mode": a.mode.to_string(), "steps": out.steps, "dev_loss": out.checkpoint.dev_loss, "out": a.out}));
    Ok(())
}

fn cmd_translate(a: TranslateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let ctrl = DecodeControl {
        beam_size: a.beam,
        alpha: a.alpha,
        token_class: a.class,
        target_len: a.target_len_mode,
        scale: a.scale,
        max_len_tokens: a.max_len,
    };
    ctrl.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let lines = read_lines(&a.input)?;
    let results = translate_corpus(&ckpt.model, &lines, &ctrl);
    let mut out = String::new();
    let mut meta = String::new();
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                out.push_str(&t.output);
                meta.push_str(
                    &json!({"line": i, "src_chars": t.src_chars, "out_chars": t.out_chars, "score": t.score, "target_len": t.target_len, "unfinished": t.unfinished})
                        .to_string(),
                );
            }
            Err(e) => {
                failures += 1;
                log(json!({"event": "translate_error", "line": i, "error": e.to_string()}));
                meta.push_str(&json!({"line": i, "error": e.to_string()}).to_string());
            }
        }
        out.push('\n');
        meta.push('\n');
    }
    write_file(&a.out, &out)?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".meta.jsonl");
    write_file(Path::new(&sidecar), &meta)?;
    log(json!({"event": "translated", "lines": lines.len(), "failures": failures, "out": a.out}));
    if failures == lines.len() && !lines.is_empty() {
        return Err(Error::DecodeControl("every line failed to translate".into()));
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let hyps = read_lines(&a.hyp)?;
    let srcs = read_lines(&a.src)?;
    let refs = read_lines(&a.reference)?;
    let bleu = corpus_bleu(&hyps, &refs)?;
    let lengths = length_stats(&hyps, &srcs, &refs)?;
    let rec = EvalRecord::new(&bleu, &lengths);
    match a.format {
        Format::Text => print!("{}", rec.to_text()),
        Format::Record => println!("{}", serde_json::to_string(&rec).expect("serializable")),
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let outcome = run_experiment(&cfg, true)?;
    print!("{}", outcome.table.to_text());
    Ok(())
}

fn cmd_encodings(a: EncodingsArgs) -> Result<()> {
    let spec = EncodingSpec::new(a.d, a.variant)
        .and_then(|s| s.with_levels(a.levels))
        .map_err(|e| Error::Usage(e.to_string()))?;
    print!("{}", dump_table(&spec, a.len, a.rows)?);
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Bpe(a) => cmd_bpe(a),
        Command::Bucket(a) => cmd_bucket(a),
        Command::Train(a) => cmd_train(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Encodings(a) => cmd_encodings(a),
    }
}

/// Exit code for an error: 1 for bad input, 2 for failures during work.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config { .. } | Error::ModelConfig(_) | Error::InfeasibleSpec(_) | Error::OddDimension(_) => 1,
        Error::EncodingSpec(_) | Error::DecodeControl(_) | Error::Incompatible(_) => 1,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            log(json!({"event": "error", "exit_code": code, "error": e.to_string()}));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["lenctl", "--help"]), 0);
        assert_eq!(run(["lenctl", "translate", "--help"]), 0);
        assert_eq!(run(["lenctl", "nonsense"]), 1);
        assert_eq!(run(["lenctl", "translate", "--ckpt", "x"]), 1);
        assert_eq!(run(["lenctl", "encodings", "--d", "3"]), 1);
    }

    #[test]
    fn missing_input_is_a_runtime_failure() {
        assert_eq!(run(["lenctl", "bucket", "--in", "/nonexistent/file.tsv"]), 2);
    }

    #[test]
    fn bad_target_len_mode_is_a_usage_error() {
        assert_eq!(
            run(["lenctl", "translate", "--ckpt", "a", "--in", "b", "--out", "c", "--target-len-mode", "fixed:x"]),
            1
        );
    }
}
