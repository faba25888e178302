//! Command-line front end. The binary only parses arguments and calls [`run`].
//!
//! Exit codes: 0 success, 1 a check failed (proof mismatch, a simulation cell
//! beyond 5σ) or output could not be written, 2 bad arguments or malformed
//! input.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::hashing::{Digest, HashAlgorithm, HashSpec};
use crate::merkle::{build_tree, verify_proof, MerkleProof};
use crate::probability::{
    approx_falsification_prob, approximation_error, diff_table, exact_falsification_prob, PathParams,
    DIFF_TABLE_BITS, DIFF_TABLE_PATH_LENS,
};
use crate::report::{
    format_real, read_simulation_csv, render_figure, write_simulation_csv, ReportTable, TableFormat,
};
use crate::simulation::{
    run_grid, ExperimentConfig, DEFAULT_DATA_LENGTH, DEFAULT_NUM_EXPERIMENTS, DEFAULT_TRIALS_PER_EXPERIMENT,
    Z_THRESHOLD,
};

/// Environment variable consulted for the master seed when `--seed` is absent.
pub const SEED_ENV: &str = "MERKLE_FALSIFY_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "merkle-falsify", version, about = "Merkle root falsification probabilities and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the exact or approximate falsification probability.
    Prob(ProbArgs),
    /// Print the exact/approximate difference table.
    Table(TableArgs),
    /// Run the Monte Carlo experiment over a (b, m) grid.
    Simulate(SimulateArgs),
    /// Build trees, produce proofs and verify them.
    #[command(subcommand)]
    Merkle(MerkleCommand),
    /// Draw an SVG chart from a simulation CSV.
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProbKind {
    Exact,
    Approx,
    Diff,
}

#[derive(Debug, Args)]
pub struct ProbArgs {
    #[arg(value_enum)]
    pub kind: ProbKind,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub bits: u32,
    #[arg(long)]
    pub path_len: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Md,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DIFF_TABLE_BITS.to_vec())]
    pub bits: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = DIFF_TABLE_PATH_LENS.to_vec())]
    pub path_lens: Vec<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleArg {
    Sha256,
    Ideal,
}

impl From<OracleArg> for HashAlgorithm {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::Sha256 => HashAlgorithm::Sha256Truncated,
            OracleArg::Ideal => HashAlgorithm::IdealOracle,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DIFF_TABLE_BITS.to_vec())]
    pub bits: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 100, 1000])]
    pub path_lens: Vec<u64>,
    /// Substitutions per experiment. The default of 1 keeps trials independent;
    /// `--trials 1000 --experiments 100` shares each path across 1000 trials.
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Experiments per cell, each with a fresh path and base datum.
    #[arg(long, default_value_t = DEFAULT_TRIALS_PER_EXPERIMENT * DEFAULT_NUM_EXPERIMENTS)]
    pub experiments: u64,
    /// Master seed; falls back to $MERKLE_FALSIFY_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "sha256")]
    pub oracle: OracleArg,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = DEFAULT_DATA_LENGTH)]
    pub data_length: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MerkleCommand {
    /// Print the root of a tree over the lines of a file.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 256)]
        bits: u32,
    },
    /// Write the inclusion proof for one line as JSON.
    Prove {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 256)]
        bits: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a data block against a proof and a trusted root.
    Verify {
        #[arg(long)]
        proof: PathBuf,
        /// Expected root, lowercase hex.
        #[arg(long)]
        root: String,
        /// Data block given inline.
        #[arg(long, conflicts_with_all = ["data_file", "input"])]
        data: Option<String>,
        /// Data block read verbatim from a file.
        #[arg(long, conflicts_with = "input")]
        data_file: Option<PathBuf>,
        /// Data block taken from a line of a block file.
        #[arg(long, requires = "index")]
        input: Option<PathBuf>,
        #[arg(long)]
        index: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

/// Executes a parsed command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Prob(a) => cmd_prob(&a, out),
        Command::Table(a) => cmd_table(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Merkle(m) => cmd_merkle(&m, out),
        Command::Figure(a) => cmd_figure(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, out: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| {
            Error::Io(io::Error::new(e.kind(), format!("cannot write {}: {e}", p.display())))
        }),
        None => Ok(out.write_all(bytes)?),
    }
}

/// Splits a block file on `\n`; a trailing empty line is not a block.
pub fn split_blocks(contents: &[u8]) -> Vec<&[u8]> {
    let mut blocks: Vec<&[u8]> = contents.split(|&c| c == b'\n').collect();
    if blocks.last().is_some_and(|b| b.is_empty()) {
        blocks.pop();
    }
    blocks
}

pub fn cmd_prob(args: &ProbArgs, out: &mut dyn Write) -> Result<i32> {
    let params = PathParams::new(args.bits, args.path_len)?;
    let value = match args.kind {
        ProbKind::Exact => exact_falsification_prob(params).value,
        ProbKind::Approx => approx_falsification_prob(params).value,
        ProbKind::Diff => approximation_error(params).abs_diff,
    };
    writeln!(out, "{}", format_real(&value))?;
    Ok(EXIT_OK)
}

pub fn cmd_table(args: &TableArgs, out: &mut dyn Write) -> Result<i32> {
    let table = ReportTable::from_estimates(&diff_table(&args.bits, &args.path_lens)?);
    let format = match args.format {
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Md => TableFormat::Markdown,
    };
    let mut buf = Vec::new();
    table.write(format, &mut buf)?;
    write_output(args.output.as_deref(), out, &buf)?;
    Ok(EXIT_OK)
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

pub fn simulation_configs(args: &SimulateArgs) -> Result<Vec<ExperimentConfig>> {
    if args.bits.is_empty() || args.path_lens.is_empty() {
        return Err(Error::Usage("need at least one --bits and one --path-lens value".into()));
    }
    let seed = resolve_seed(args.seed)?;
    let mut configs = Vec::new();
    for &b in &args.bits {
        for &m in &args.path_lens {
            let mut c = ExperimentConfig::new(b, m)
                .with_trials(args.trials, args.experiments)
                .with_oracle(args.oracle.into())
                .with_seed(seed);
            c.data_length = args.data_length;
            c.validate()?;
            configs.push(c);
        }
    }
    configs.sort_by_key(|c| (c.bits, c.path_len));
    configs.dedup_by_key(|c| (c.bits, c.path_len));
    Ok(configs)
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let configs = simulation_configs(args)?;
    let report = run_grid(&configs, args.workers)?;
    let mut csv = Vec::new();
    write_simulation_csv(&report, &mut csv)?;
    write_output(args.output.as_deref(), out, &csv)?;

    // Keep stdout pure CSV when the table goes there.
    let summary: &mut dyn Write = if args.output.is_some() { out } else { err };
    let mut failed = 0;
    for c in &report.cells {
        let ok = c.within(Z_THRESHOLD);
        failed += usize::from(!ok);
        writeln!(
            summary,
            "{} b={} m={} empirical={} exact={} z={:.3}{}",
            if ok { "PASS" } else { "FAIL" },
            c.config.bits,
            c.config.path_len,
            crate::report::format_f64(c.empirical_p),
            crate::report::format_f64(c.exact_p),
            c.z_score,
            match (c.config.trials_per_experiment, c.clustered_z_score) {
                (1, _) | (_, None) => String::new(),
                (_, Some(z)) => format!(" clustered_z={z:.3}"),
            }
        )?;
    }
    writeln!(
        summary,
        "{} of {} cells within {Z_THRESHOLD} sigma (seed {}, {:.2?})",
        report.cells.len() - failed,
        report.cells.len(),
        report.master_seed,
        report.duration
    )?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILED })
}

fn block_at(contents: &[u8], index: usize) -> Result<Vec<u8>> {
    split_blocks(contents)
        .get(index)
        .map(|b| b.to_vec())
        .ok_or_else(|| Error::Usage(format!("no data block at index {index}")))
}

pub fn cmd_merkle(cmd: &MerkleCommand, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        MerkleCommand::Build { input, bits } => {
            let contents = read_input(input)?;
            let tree = build_tree(&split_blocks(&contents), HashSpec::sha256(*bits)?)?;
            writeln!(out, "{}", tree.root())?;
            Ok(EXIT_OK)
        }
        MerkleCommand::Prove {
            input,
            index,
            bits,
            output,
        } => {
            let contents = read_input(input)?;
            let tree = build_tree(&split_blocks(&contents), HashSpec::sha256(*bits)?)?;
            let mut json = tree.generate_proof(*index)?.to_json(*bits)?;
            json.push('\n');
            write_output(output.as_deref(), out, json.as_bytes())?;
            Ok(EXIT_OK)
        }
        MerkleCommand::Verify {
            proof,
            root,
            data,
            data_file,
            input,
            index,
        } => {
            let text = String::from_utf8(read_input(proof)?)
                .map_err(|_| Error::Parse("proof file is not UTF-8".into()))?;
            let (proof, bits) = MerkleProof::from_json(&text)?;
            let spec = HashSpec::sha256(bits)?;
            let root = Digest::from_hex(root.trim(), bits)?;
            let block = match (data, data_file, input, index) {
                (Some(d), _, _, _) => d.as_bytes().to_vec(),
                (_, Some(f), _, _) => read_input(f)?,
                (_, _, Some(f), Some(i)) => block_at(&read_input(f)?, *i)?,
                _ => {
                    return Err(Error::Usage(
                        "give the data block with --data, --data-file, or --input/--index".into(),
                    ))
                }
            };
            if verify_proof(&block, &proof, &root, &spec)? {
                writeln!(out, "OK")?;
                Ok(EXIT_OK)
            } else {
                writeln!(out, "MISMATCH")?;
                Ok(EXIT_FAILED)
            }
        }
    }
}

pub fn cmd_figure(args: &FigureArgs) -> Result<i32> {
    let rows = read_simulation_csv(read_input(&args.input)?.as_slice())?;
    let svg = render_figure(&rows)?;
    write_output(Some(&args.output), &mut io::sink(), svg.as_bytes())?;
    Ok(EXIT_OK)
}
