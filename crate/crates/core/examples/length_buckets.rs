//! Generates the synthetic corpus, classifies each pair by its
//! target/source character ratio and prefixes the matching length token.

use lenctl::corpus::{bucket_stats, generate_synthetic, inject_token, SynthSpec, Thresholds};

fn main() -> lenctl::Result<()> {
    let th = Thresholds::default();
    let spec = SynthSpec {
        num_pairs: 300,
        ..SynthSpec::default()
    };
    let pairs = generate_synthetic(&spec, &th)?;
    println!("buckets (short,normal,long) = {}", bucket_stats(&pairs));
    for pair in pairs.iter().take(6) {
        let tagged = inject_token(pair)?;
        println!("{:.2}  {}\n      -> {}", pair.ratio, tagged.src, pair.tgt);
    }
    let tertiles = Thresholds::from_tertiles(&pairs.iter().map(|p| p.ratio).collect::<Vec<_>>())?;
    println!("\nequal-size thresholds for this corpus: {:.3} / {:.3}", tertiles.t_min, tertiles.t_max);
    Ok(())
}
