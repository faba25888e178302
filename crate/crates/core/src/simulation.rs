//! Monte Carlo replay of random leaf substitution along a random path.
//!
//! One *experiment* draws `m` uniform sibling digests and a base datum `D`,
//! folds `H(D)` up the path to get `R`, then runs `trials_per_experiment`
//! substitutions: draw `D' != D`, fold `H(D')` up the same path, and count
//! `R' == R`. A *cell* sums `num_experiments` experiments for one `(b, m)`.
//!
//! Every experiment is seeded from `(master_seed, b, m, experiment_index)`
//! through [`derive_cell_seed`], and its RNG is ChaCha8 (`rand_chacha`)
//! seeded with `seed_from_u64`. Results therefore depend only on the
//! configuration, never on how experiments are scheduled across workers.
//! Golden match counts in the tests are tied to that generator.
//!
//! Trials inside one experiment share the path and, under the ideal oracle,
//! the oracle table, so they are only independent *given* the path. For small
//! `b` the per-path match rate swings widely around the exact probability, and
//! the binomial standard error understates the spread of a cell built from
//! few, large experiments. [`CellResult::clustered_std_error`] measures the
//! spread across experiments instead. With one trial per experiment every trial
//! gets a fresh path and the binomial error is exact.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::hashing::{hash_bytes, hash_concat, Digest, HashAlgorithm, HashSpec, OracleState};
use crate::probability::{exact_falsification_prob, PathParams, Probability};

/// `|z|` above this fails a cell.
pub const Z_THRESHOLD: f64 = 5.0;

pub const DEFAULT_TRIALS_PER_EXPERIMENT: u64 = 1000;
pub const DEFAULT_NUM_EXPERIMENTS: u64 = 100;
pub const DEFAULT_DATA_LENGTH: usize = 16;

const ALPHANUMERIC: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Alphabet {
    /// ASCII letters followed by digits, 62 symbols.
    #[default]
    Alphanumeric,
}

impl Alphabet {
    pub fn symbols(self) -> &'static [u8] {
        match self {
            Alphabet::Alphanumeric => ALPHANUMERIC,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub bits: u32,
    pub path_len: u64,
    pub trials_per_experiment: u64,
    pub num_experiments: u64,
    pub data_length: usize,
    pub alphabet: Alphabet,
    pub oracle_kind: HashAlgorithm,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// 1000 trials × 100 experiments with truncated SHA-256 and seed 0.
    pub fn new(bits: u32, path_len: u64) -> Self {
        Self {
            bits,
            path_len,
            trials_per_experiment: DEFAULT_TRIALS_PER_EXPERIMENT,
            num_experiments: DEFAULT_NUM_EXPERIMENTS,
            data_length: DEFAULT_DATA_LENGTH,
            alphabet: Alphabet::Alphanumeric,
            oracle_kind: HashAlgorithm::Sha256Truncated,
            master_seed: 0,
        }
    }

    pub fn with_trials(mut self, trials_per_experiment: u64, num_experiments: u64) -> Self {
        self.trials_per_experiment = trials_per_experiment;
        self.num_experiments = num_experiments;
        self
    }

    pub fn with_oracle(mut self, kind: HashAlgorithm) -> Self {
        self.oracle_kind = kind;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn hash_spec(&self) -> Result<HashSpec> {
        HashSpec::new(self.oracle_kind, self.bits)
    }

    pub fn total_trials(&self) -> u64 {
        self.trials_per_experiment * self.num_experiments
    }

    pub fn validate(&self) -> Result<()> {
        self.hash_spec()?;
        if self.trials_per_experiment == 0 {
            return Err(Error::Config("trials_per_experiment must be at least 1".into()));
        }
        if self.num_experiments == 0 {
            return Err(Error::Config("num_experiments must be at least 1".into()));
        }
        if self.data_length == 0 {
            return Err(Error::Config("data_length must be at least 1".into()));
        }
        if self
            .trials_per_experiment
            .checked_mul(self.num_experiments)
            .is_none()
        {
            return Err(Error::Config("total trial count overflows u64".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub config: ExperimentConfig,
    /// Match count of each experiment, by experiment index.
    pub experiment_matches: Vec<u64>,
    pub matches: u64,
    pub total_trials: u64,
    pub empirical_p: f64,
    /// Exact falsification probability at working precision.
    pub exact: Probability,
    pub exact_p: f64,
    /// Binomial standard error under the exact probability.
    pub std_error: f64,
    pub z_score: f64,
    /// Standard error of the mean experiment rate, from the sample spread of
    /// per-experiment rates. `None` with fewer than two experiments or no spread.
    pub clustered_std_error: Option<f64>,
    pub clustered_z_score: Option<f64>,
}

impl CellResult {
    fn new(config: ExperimentConfig, experiment_matches: Vec<u64>) -> Result<Self> {
        let matches = experiment_matches.iter().sum();
        let total_trials = config.total_trials();
        let exact = exact_falsification_prob(PathParams::new(config.bits, config.path_len)?);
        let exact_p = exact.to_f64();
        let empirical_p = matches as f64 / total_trials as f64;
        let std_error = (exact_p * (1.0 - exact_p) / total_trials as f64).sqrt();
        let z_score = if std_error > 0.0 {
            (empirical_p - exact_p) / std_error
        } else {
            0.0
        };
        let clustered_std_error = clustered_std_error(&experiment_matches, config.trials_per_experiment);
        let clustered_z_score = clustered_std_error.map(|se| (empirical_p - exact_p) / se);
        Ok(Self {
            config,
            experiment_matches,
            matches,
            total_trials,
            empirical_p,
            exact,
            exact_p,
            std_error,
            z_score,
            clustered_std_error,
            clustered_z_score,
        })
    }

    pub fn within(&self, z_limit: f64) -> bool {
        self.z_score.abs() <= z_limit
    }
}

fn clustered_std_error(experiment_matches: &[u64], trials: u64) -> Option<f64> {
    let k = experiment_matches.len();
    if k < 2 {
        return None;
    }
    let rates: Vec<f64> = experiment_matches.iter().map(|&c| c as f64 / trials as f64).collect();
    let mean = rates.iter().sum::<f64>() / k as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let se = (var / k as f64).sqrt();
    (se > 0.0).then_some(se)
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub cells: Vec<CellResult>,
    pub master_seed: u64,
    pub duration: Duration,
}

impl SimulationReport {
    pub fn all_within(&self, z_limit: f64) -> bool {
        self.cells.iter().all(|c| c.within(z_limit))
    }
}

/// Low 64 bits of `SHA-256("seed:<master>:<bits>:<path_len>:<index>")`,
/// read big-endian from the last eight digest bytes.
pub fn derive_cell_seed(master_seed: u64, bits: u32, path_len: u64, experiment_index: u64) -> u64 {
    let label = format!("seed:{master_seed}:{bits}:{path_len}:{experiment_index}");
    let full = Sha256::digest(label.as_bytes());
    u64::from_be_bytes(full[24..32].try_into().expect("8 bytes"))
}

fn draw_data<R: Rng>(rng: &mut R, alphabet: Alphabet, len: usize, out: &mut Vec<u8>) {
    let symbols = alphabet.symbols();
    out.clear();
    out.extend((0..len).map(|_| symbols[rng.gen_range(0..symbols.len())]));
}

/// Runs one experiment and returns how many substitutions kept the root.
pub fn run_experiment(config: &ExperimentConfig, experiment_index: u64) -> Result<u64> {
    config.validate()?;
    let spec = config.hash_spec()?;
    let seed = derive_cell_seed(config.master_seed, config.bits, config.path_len, experiment_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = match config.oracle_kind {
        HashAlgorithm::IdealOracle => Some(OracleState::new(seed)),
        HashAlgorithm::Sha256Truncated => None,
    };

    let siblings: Vec<Digest> = (0..config.path_len)
        .map(|_| Digest::random(&mut rng, config.bits))
        .collect();
    let mut base = Vec::with_capacity(config.data_length);
    draw_data(&mut rng, config.alphabet, config.data_length, &mut base);

    // chain[j] is the running node after j siblings; chain[m] is the root.
    let mut chain = Vec::with_capacity(siblings.len() + 1);
    chain.push(hash_bytes(&base, &spec, oracle.as_mut())?);
    for s in &siblings {
        let next = hash_concat(chain.last().expect("non-empty"), s, &spec, oracle.as_mut())?;
        chain.push(next);
    }

    let mut substitute = Vec::with_capacity(config.data_length);
    let mut matches = 0u64;
    for _ in 0..config.trials_per_experiment {
        loop {
            draw_data(&mut rng, config.alphabet, config.data_length, &mut substitute);
            if substitute != base {
                break;
            }
        }
        // Once the substitute's running node meets the original chain the
        // remaining hashes are identical, so the roots agree.
        let mut node = hash_bytes(&substitute, &spec, oracle.as_mut())?;
        for (j, original) in chain.iter().enumerate() {
            if node == *original {
                matches += 1;
                break;
            }
            if let Some(s) = siblings.get(j) {
                node = hash_concat(&node, s, &spec, oracle.as_mut())?;
            }
        }
    }
    Ok(matches)
}

pub fn run_cell(config: &ExperimentConfig) -> Result<CellResult> {
    config.validate()?;
    let counts = (0..config.num_experiments)
        .map(|i| run_experiment(config, i))
        .collect::<Result<Vec<_>>>()?;
    CellResult::new(config.clone(), counts)
}

/// Evaluates every cell, spreading experiments over `workers` threads
/// (`0` picks the machine's parallelism). Output order follows `configs`.
pub fn run_grid(configs: &[ExperimentConfig], workers: usize) -> Result<SimulationReport> {
    if configs.is_empty() {
        return Err(Error::Usage("simulation grid is empty".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.num_experiments).map(move |e| (ci, e)))
        .collect();
    let counts: Vec<Result<u64>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, e)| run_experiment(&configs[ci], e))
            .collect()
    });

    let mut matches: Vec<Vec<u64>> = configs
        .iter()
        .map(|c| Vec::with_capacity(c.num_experiments as usize))
        .collect();
    for (&(ci, _), count) in jobs.iter().zip(counts) {
        matches[ci].push(count?);
    }
    let cells = configs
        .iter()
        .zip(matches)
        .map(|(c, m)| CellResult::new(c.clone(), m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport {
        cells,
        master_seed: configs[0].master_seed,
        duration: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::fold_path;

    /// Straightforward replay of one experiment: full fold for every trial.
    fn naive_experiment(config: &ExperimentConfig, experiment_index: u64) -> u64 {
        let spec = config.hash_spec().unwrap();
        let seed = derive_cell_seed(config.master_seed, config.bits, config.path_len, experiment_index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut oracle = match config.oracle_kind {
            HashAlgorithm::IdealOracle => Some(OracleState::new(seed)),
            HashAlgorithm::Sha256Truncated => None,
        };
        let siblings: Vec<Digest> = (0..config.path_len)
            .map(|_| Digest::random(&mut rng, config.bits))
            .collect();
        let mut base = Vec::new();
        draw_data(&mut rng, config.alphabet, config.data_length, &mut base);
        let leaf = hash_bytes(&base, &spec, oracle.as_mut()).unwrap();
        let root = fold_path(&leaf, &siblings, &spec, oracle.as_mut()).unwrap();
        let mut count = 0;
        let mut sub = Vec::new();
        for _ in 0..config.trials_per_experiment {
            loop {
                draw_data(&mut rng, config.alphabet, config.data_length, &mut sub);
                if sub != base {
                    break;
                }
            }
            let l = hash_bytes(&sub, &spec, oracle.as_mut()).unwrap();
            if fold_path(&l, &siblings, &spec, oracle.as_mut()).unwrap() == root {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn seed_derivation_frozen() {
        // SHA-256 of the label strings, computed independently.
        assert_eq!(derive_cell_seed(0, 2, 10, 0), 6_894_408_645_117_381_920);
        assert_eq!(derive_cell_seed(0, 2, 10, 1), 12_860_353_155_510_328_120);
        assert_eq!(derive_cell_seed(1, 2, 10, 0), 10_777_739_058_387_291_142);
        assert_eq!(derive_cell_seed(0, 2, 10, 0), derive_cell_seed(0, 2, 10, 0));
    }

    #[test]
    fn shortcut_matches_naive_fold() {
        for (kind, bits, m) in [
            (HashAlgorithm::Sha256Truncated, 2, 10),
            (HashAlgorithm::Sha256Truncated, 4, 3),
            (HashAlgorithm::IdealOracle, 1, 5),
            (HashAlgorithm::IdealOracle, 3, 0),
            (HashAlgorithm::Sha256Truncated, 9, 40),
        ] {
            let cfg = ExperimentConfig::new(bits, m).with_trials(300, 3).with_oracle(kind);
            for e in 0..3 {
                assert_eq!(
                    run_experiment(&cfg, e).unwrap(),
                    naive_experiment(&cfg, e),
                    "{kind} b={bits} m={m} e={e}"
                );
            }
        }
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(4, 1);
        assert!(base.validate().is_ok());
        assert!(base.clone().with_trials(0, 1).validate().is_err());
        assert!(base.clone().with_trials(1, 0).validate().is_err());
        let mut short = base.clone();
        short.data_length = 0;
        assert!(short.validate().is_err());
        assert!(ExperimentConfig::new(0, 1).validate().is_err());
        assert!(ExperimentConfig::new(65, 1)
            .with_oracle(HashAlgorithm::IdealOracle)
            .validate()
            .is_err());
        assert!(run_grid(&[], 1).is_err());
    }

    #[test]
    fn one_bit_leaf_only() {
        let cfg = ExperimentConfig::new(1, 0)
            .with_trials(1000, 1)
            .with_oracle(HashAlgorithm::IdealOracle)
            .with_seed(42);
        let matches = run_experiment(&cfg, 0).unwrap();
        assert!((matches as f64 / 1000.0 - 0.5).abs() <= 5.0 * (0.25f64 / 1000.0).sqrt());
    }

    #[test]
    fn single_experiment_cell() {
        let cfg = ExperimentConfig::new(3, 4).with_trials(500, 1).with_seed(7);
        let cell = run_cell(&cfg).unwrap();
        assert_eq!(cell.matches, run_experiment(&cfg, 0).unwrap());
        assert_eq!(cell.total_trials, 500);
        assert_eq!(cell.empirical_p, cell.matches as f64 / 500.0);
        assert_eq!(run_cell(&cfg).unwrap(), cell);
    }

    #[test]
    fn grid_independent_of_workers() {
        let configs: Vec<_> = [(2, 3), (5, 8), (3, 0)]
            .iter()
            .map(|&(b, m)| ExperimentConfig::new(b, m).with_trials(200, 6).with_seed(11))
            .collect();
        let one = run_grid(&configs, 1).unwrap();
        let four = run_grid(&configs, 4).unwrap();
        assert_eq!(one.cells, four.cells);
        assert_eq!(one.cells[1], run_cell(&configs[1]).unwrap());
        assert_eq!(one.master_seed, 11);
    }

    #[test]
    fn resampling_guard_with_single_char_data() {
        let mut cfg = ExperimentConfig::new(4, 2).with_trials(1, 4000);
        cfg.data_length = 1;
        // With one character, D' == D would occur ~1/62 of the time; the
        // count stays consistent with a guarded draw.
        let cell = run_cell(&cfg).unwrap();
        assert_eq!(cell.total_trials, 4000);
        assert!(cell.within(Z_THRESHOLD), "z = {}", cell.z_score);
        let wide = cfg.with_trials(2000, 1);
        assert_eq!(run_experiment(&wide, 0).unwrap(), naive_experiment(&wide, 0));
    }

    #[test]
    fn draw_data_never_repeats_base_in_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut base = Vec::new();
        draw_data(&mut rng, Alphabet::Alphanumeric, 1, &mut base);
        let mut sub = Vec::new();
        for _ in 0..5000 {
            loop {
                draw_data(&mut rng, Alphabet::Alphanumeric, 1, &mut sub);
                if sub != base {
                    break;
                }
            }
            assert_ne!(sub, base);
            assert!(ALPHANUMERIC.contains(&sub[0]));
        }
    }

    #[test]
    fn independent_cells_within_binomial_band() {
        let ideal = ExperimentConfig::new(2, 1)
            .with_trials(1, 100_000)
            .with_oracle(HashAlgorithm::IdealOracle);
        let sha = ExperimentConfig::new(8, 10).with_trials(1, 100_000);
        let report = run_grid(&[ideal, sha], 0).unwrap();
        let [a, b] = &report.cells[..] else { panic!("two cells") };
        assert_eq!(a.exact_p, 0.4375);
        assert!((b.std_error - 6.35e-4).abs() < 1e-6, "{}", b.std_error);
        assert!((b.exact_p - 0.0421392).abs() < 1e-7);
        assert!(report.all_within(Z_THRESHOLD), "{} {}", a.z_score, b.z_score);
    }

    #[test]
    fn shared_oracle_breaks_level_independence() {
        // b=1, m=2: when both siblings agree, one oracle function is applied
        // twice, and two distinct inputs that survived the first level always
        // stay distinct. Enumeration gives 13/16 instead of 1 - (1/2)^3 = 7/8.
        let cfg = ExperimentConfig::new(1, 2)
            .with_trials(1, 100_000)
            .with_oracle(HashAlgorithm::IdealOracle);
        let cell = run_cell(&cfg).unwrap();
        assert_eq!(cell.exact_p, 0.875);
        let se = (13.0 / 16.0 * 3.0 / 16.0 / 1e5f64).sqrt();
        assert!((cell.empirical_p - 13.0 / 16.0).abs() <= Z_THRESHOLD * se, "{}", cell.empirical_p);
        assert!(!cell.within(Z_THRESHOLD));
    }

    #[test]
    fn shared_path_layout_is_clustered() {
        // 1000 trials share each path, so per-experiment rates spread far more
        // than the binomial error predicts; the mean is still unbiased.
        let cell = run_cell(&ExperimentConfig::new(2, 10)).unwrap();
        let clustered = cell.clustered_std_error.unwrap();
        assert!(clustered > 5.0 * cell.std_error, "{clustered} vs {}", cell.std_error);
        assert!(cell.clustered_z_score.unwrap().abs() <= Z_THRESHOLD);
        assert_eq!(cell.experiment_matches.len(), 100);
        assert_eq!(cell.experiment_matches.iter().sum::<u64>(), cell.matches);
    }
}
