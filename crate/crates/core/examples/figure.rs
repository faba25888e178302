//! Simulate a small grid and write the SVG chart next to its CSV.
//!
//! cargo run --release --example figure -- /tmp/fig

use std::fs;
use std::path::PathBuf;

use merkle_falsify::report::{read_simulation_csv, render_figure, write_simulation_csv};
use merkle_falsify::{run_grid, ExperimentConfig};

fn main() -> merkle_falsify::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let configs: Vec<_> = [2, 4, 6, 8]
        .iter()
        .flat_map(|&b| [0, 3, 10, 30, 100].map(|m| ExperimentConfig::new(b, m).with_trials(1, 20_000)))
        .collect();
    let report = run_grid(&configs, 0)?;

    let mut csv = Vec::new();
    write_simulation_csv(&report, &mut csv)?;
    let svg = render_figure(&read_simulation_csv(csv.as_slice())?)?;
    fs::write(dir.join("simulation.csv"), &csv)?;
    fs::write(dir.join("figure.svg"), svg)?;
    println!("wrote {} cells to {}", report.cells.len(), dir.display());
    Ok(())
}
