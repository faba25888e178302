//! Merkle trees over `b`-bit truncated hashes, the probability that a
//! substituted leaf leaves the root unchanged, and a seeded Monte Carlo
//! harness that measures it.
//!
//! * [`hashing`]: truncated SHA-256 and an ideal random oracle.
//! * [`merkle`]: tree construction, inclusion proofs, verification, and the
//!   parent-first path fold.
//! * [`probability`]: exact and approximate falsification probabilities in
//!   exact rationals and 320-bit floats.
//! * [`simulation`]: deterministic, parallel replay of random substitutions.
//! * [`report`]: CSV/markdown tables and an SVG chart.
//! * [`cli`]: the `merkle-falsify` command line.
//!
//! ```
//! use merkle_falsify::probability::{exact_falsification_prob, PathParams};
//!
//! let p = exact_falsification_prob(PathParams::new(2, 10).unwrap());
//! assert!((p.to_f64() - 0.9577648639678955).abs() < 1e-15);
//! ```

pub mod cli;
pub mod error;
pub mod hashing;
pub mod merkle;
pub mod probability;
pub mod report;
pub mod simulation;

pub use error::{Error, Result};
pub use hashing::{hash_bytes, hash_concat, Digest, HashAlgorithm, HashSpec, OracleState};
pub use merkle::{build_tree, fold_path, generate_proof, root, verify_proof, MerkleProof, MerkleTree, ProofStep, Side};
pub use probability::{
    approx_falsification_prob, approximation_error, diff_table, exact_falsification_prob,
    exact_falsification_prob_termsum, geometric_sum, single_collision_prob, FalsificationEstimate, PathParams,
    Probability, Real,
};
pub use simulation::{derive_cell_seed, run_cell, run_experiment, run_grid, CellResult, ExperimentConfig, SimulationReport};
