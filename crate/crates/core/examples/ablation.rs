//! Synthetic end-to-end ablation.
//!
//! ```text
//! cargo run --release -p csishield --example ablation -- [sim.toml] [experiment.toml]
//! ```

use std::time::Instant;

use csishield::eval::ablation::{ablation_csv, run_ablation, ExperimentConfig};
use csishield::ingest::{pair_acquisitions, Condition};
use csishield::sim::{generate_acquisitions, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sim = match args.first() {
        Some(p) => SimConfig::from_toml(&std::fs::read_to_string(p)?)?,
        None => SimConfig::default(),
    };
    let exp: ExperimentConfig = match args.get(1) {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    let start = Instant::now();
    let acqs = generate_acquisitions(30, &sim, 7)?;
    let (shielded, unshielded): (Vec<_>, Vec<_>) = acqs.into_iter().partition(|a| a.condition == Condition::Shielded);
    let pairs = pair_acquisitions(&shielded, &unshielded)?.pairs;
    eprintln!("{} pairs in {:.1}s", pairs.len(), start.elapsed().as_secs_f64());
    let out = run_ablation(&pairs, &exp, |m| eprintln!("[{:7.1}s] {m}", start.elapsed().as_secs_f64()))?;
    print!("{}", ablation_csv(&out.rows));
    println!("noisy_mse={:.4} ragan_mse={:.4} dae_mse={:.4}", out.noisy_mse, out.ragan_mse, out.dae_mse);
    eprintln!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
