//! Monte Carlo estimate for one (b, m) cell against the exact probability,
//! once with independent trials and once in the 1000 x 100 layout where
//! trials share a path.
//!
//! cargo run --release --example simulate_cell -- 6 50

use merkle_falsify::simulation::Z_THRESHOLD;
use merkle_falsify::{run_grid, ExperimentConfig};

fn main() -> merkle_falsify::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (bits, path_len) = match args[..] {
        [b, m] => (b as u32, m),
        _ => (6, 50),
    };
    let independent = ExperimentConfig::new(bits, path_len).with_trials(1, 100_000);
    let shared = ExperimentConfig::new(bits, path_len);
    let report = run_grid(&[independent, shared], 0)?;
    for c in &report.cells {
        println!(
            "{} x {}: empirical {:.5} exact {:.5} z {:+.2} {}",
            c.config.trials_per_experiment,
            c.config.num_experiments,
            c.empirical_p,
            c.exact_p,
            c.z_score,
            if c.within(Z_THRESHOLD) { "within" } else { "outside" },
        );
        if let (true, Some(z)) = (c.config.trials_per_experiment > 1, c.clustered_z_score) {
            println!("    between-experiment z {z:+.2}");
        }
    }
    println!("{:.2?}", report.duration);
    Ok(())
}
