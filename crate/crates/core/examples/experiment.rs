//! Runs a full comparison from a TOML config and prints the table.
//!
//! cargo run --release --example experiment -- configs/smoke.toml

use lenctl::experiment::{run_experiment, ExperimentConfig};

fn main() -> lenctl::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/smoke.toml".into());
    let cfg = ExperimentConfig::load(&path)?;
    let outcome = run_experiment(&cfg, true)?;
    println!("config_hash={}", outcome.config_hash);
    print!("{}", outcome.table.to_text());
    for r in &outcome.results {
        println!("{:<28} mean_out_chars={:.2}", r.strategy.label, r.lengths.mean_out_chars);
    }
    Ok(())
}
