//! Command-line front end behind the `squeezefit` binary.
//!
//! Every subcommand resolves its settings from defaults, an optional JSON
//! config file and flags (in increasing priority), writes `results.json`
//! plus command-specific artifacts into the output directory, and maps
//! errors onto exit codes: 0 success, 1 verification failure, 2
//! infeasibility, 3 input error.

pub mod config;
mod plot;
pub mod record;

pub mod compare;
mod gen;
mod recover;
mod solve;
mod statdim;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_csv, CsvOptions, LabeledDataset};
use crate::error::{Error, Result};
use crate::solver::{Mode, Refinement, SqueezeConfig};

use config::{
    BaseKind, ComparePreset, ConeKind, CsvSource, ExperimentConfig, GenKind, Method, RecoverPreset,
    SolverTuning,
};
use record::ResultRecord;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "squeezefit",
    version,
    about = "Low-rank metric learning by semidefinite squeezing"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for trial pools.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Record wall-clock times in results.json.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the squeeze program on a labeled CSV.
    Solve(SolveArgs),
    /// Certify a candidate optimum with a dual certificate.
    Certify(CertifyArgs),
    /// Planted-model recovery trials.
    Recover(RecoverArgs),
    /// PCA / LDA / SqueezeFit k-NN comparison table.
    Compare(CompareArgs),
    /// Monte Carlo statistical dimension of a cone.
    Statdim(StatdimArgs),
    /// Write a synthetic dataset to CSV.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Labeled CSV, one point per row.
    #[arg(long, value_name = "CSV")]
    pub data: Option<PathBuf>,
    /// Zero-based label column [default: 0].
    #[arg(long)]
    pub label_column: Option<usize>,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub delta: Option<f64>,
    /// hard, hinge, zero_plus or hinge_zero_plus.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Keep only the s nearest cross-class neighbors per point and class.
    #[arg(long)]
    pub s: Option<usize>,
    /// Certify the result against all cross-class pairs.
    #[arg(long)]
    pub certify: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_feas: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Dense JSON matrix {"dim": d, "data": [...]}.
    #[arg(long, value_name = "JSON")]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Dual certificate JSON to fall back on.
    #[arg(long, value_name = "JSON")]
    pub hint: Option<PathBuf>,
    #[arg(long)]
    pub tol_feas: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long, value_enum)]
    pub preset: Option<RecoverPreset>,
    #[arg(long, value_enum)]
    pub base: Option<BaseKind>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    /// Comma-separated SNR values.
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Noise standard deviation; overrides --snr.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub s_init: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub preset: Option<ComparePreset>,
    /// Dataset directory [default: $SQZ_DATA_DIR].
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Training CSV (custom preset).
    #[arg(long, value_name = "CSV")]
    pub train: Option<PathBuf>,
    /// Test CSV (custom preset).
    #[arg(long, value_name = "CSV")]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<usize>,
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Training subsample size for SqueezeFit and LDA.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated neighbor counts.
    #[arg(long = "k", value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub pca_ranks: Option<Vec<usize>>,
    /// Also fit LDA on the whole training set.
    #[arg(long)]
    pub lda_full: Option<bool>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "full_constraints")]
    pub s: Option<usize>,
    /// Use every cross-class pair of the subsample.
    #[arg(long)]
    pub full_constraints: bool,
}

#[derive(Debug, Args)]
pub struct StatdimArgs {
    #[arg(long, value_enum)]
    pub cone: Option<ConeKind>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub c1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Option<GenKind>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub base: Option<BaseKind>,
    /// Output file stem.
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    let key = s.replace('-', "_");
    serde_json::from_value(serde_json::Value::String(key))
        .map_err(|_| format!("unknown mode {s:?} (hard, hinge, zero_plus, hinge_zero_plus)"))
}

/// Shared run settings.
pub(crate) struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub timings: bool,
    started: Instant,
}

impl Context {
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Adds the elapsed time when timings were requested, then writes
    /// `results.json`.
    pub fn finish(&self, mut record: ResultRecord) -> Result<()> {
        if self.timings {
            record
                .timings
                .get_or_insert_with(Default::default)
                .insert("total_seconds".into(), self.started.elapsed().as_secs_f64());
        }
        std::fs::write(self.out_path("results.json"), record.to_json()?)?;
        Ok(())
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Inconclusive(_) | Error::CertificateNotFound { .. } => EXIT_VERIFICATION,
        _ => EXIT_INPUT,
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn merge_data(src: &mut CsvSource, args: DataArgs) {
    if args.data.is_some() {
        src.path = args.data;
    }
    set(&mut src.label_column, args.label_column);
    if args.header {
        src.header = true;
    }
}

pub(crate) fn load_source(src: &CsvSource, flag: &str) -> Result<LabeledDataset> {
    let path = src
        .path
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("missing {flag} (or the config equivalent)")))?;
    load_csv(
        path,
        CsvOptions {
            label_column: src.label_column,
            has_header: src.header,
        },
    )
}

pub(crate) fn squeeze_config(
    mode: Mode,
    delta: f64,
    lambda: f64,
    t: &SolverTuning,
) -> SqueezeConfig {
    SqueezeConfig {
        delta,
        mode,
        lambda,
        max_iters: t.max_iters,
        tol_obj: t.tol_obj,
        tol_feas: t.tol_feas,
        refine: t.refine_tol.map(|tol| Refinement {
            tol,
            ..Refinement::default()
        }),
        ..SqueezeConfig::default()
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<i32> {
    let file = match &cli.global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.global.seed.or(file.seed).unwrap_or(0);
    let out = cli
        .global
        .out
        .clone()
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = cli.global.threads.or(file.threads) {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        // The global pool can only be configured once per process.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::debug!("thread pool already configured: {e}");
        }
    }
    create_dir(&out)?;
    let ctx = Context {
        seed,
        out,
        timings: cli.global.timings,
        started: Instant::now(),
    };

    match cli.command {
        Command::Solve(a) => {
            let mut c = file.solve.unwrap_or_default();
            let delta_given = a.delta.is_some();
            merge_data(&mut c.data, a.data);
            set(&mut c.delta, a.delta);
            set(&mut c.mode, a.mode);
            set(&mut c.lambda, a.lambda);
            if a.s.is_some() {
                c.s = a.s;
            }
            c.certify |= a.certify;
            set(&mut c.solver.max_iters, a.max_iters);
            set(&mut c.solver.tol_feas, a.tol_feas);
            solve::cmd_solve(&ctx, c, delta_given)
        }
        Command::Certify(a) => {
            let mut c = file.certify.unwrap_or_default();
            merge_data(&mut c.data, a.data);
            if a.matrix.is_some() {
                c.matrix = a.matrix;
            }
            if a.hint.is_some() {
                c.hint = a.hint;
            }
            set(&mut c.delta, a.delta);
            set(&mut c.tol_feas, a.tol_feas);
            solve::cmd_certify(&ctx, c)
        }
        Command::Recover(a) => {
            let mut c = file.recover.unwrap_or_default();
            set(&mut c.preset, a.preset);
            set(&mut c.base, a.base);
            set(&mut c.d, a.d);
            set(&mut c.r, a.r);
            set(&mut c.b, a.b);
            set(&mut c.snr, a.snr);
            if a.sigma.is_some() {
                c.sigma = a.sigma;
            }
            set(&mut c.trials, a.trials);
            set(&mut c.s_init, a.s_init);
            recover::cmd_recover(&ctx, c)
        }
        Command::Compare(a) => {
            let mut c = file.compare.unwrap_or_default();
            set(&mut c.preset, a.preset);
            if a.data_dir.is_some() {
                c.data_dir = a.data_dir;
            }
            if a.train.is_some() {
                c.train.path = a.train;
            }
            if a.test.is_some() {
                c.test.path = a.test;
            }
            if let Some(l) = a.label_column {
                c.train.label_column = l;
                c.test.label_column = l;
            }
            if a.header {
                c.train.header = true;
                c.test.header = true;
            }
            set(&mut c.methods, a.methods);
            set(&mut c.n, a.n);
            set(&mut c.ks, a.ks);
            set(&mut c.pca_ranks, a.pca_ranks);
            set(&mut c.lda_full, a.lda_full);
            set(&mut c.lambda, a.lambda);
            if a.s.is_some() {
                c.s = a.s;
            }
            if a.full_constraints {
                c.s = None;
            }
            compare::cmd_compare(&ctx, c)
        }
        Command::Statdim(a) => {
            let mut c = file.statdim.unwrap_or_default();
            set(&mut c.cone, a.cone);
            set(&mut c.n, a.n);
            set(&mut c.trials, a.trials);
            set(&mut c.c1, a.c1);
            statdim::cmd_statdim(&ctx, c)
        }
        Command::Gen(a) => {
            let mut c = file.gen.unwrap_or_default();
            set(&mut c.kind, a.kind);
            set(&mut c.d, a.d);
            set(&mut c.r, a.r);
            set(&mut c.b, a.b);
            set(&mut c.sigma, a.sigma);
            set(&mut c.base, a.base);
            if a.name.is_some() {
                c.name = a.name;
            }
            gen::cmd_gen(&ctx, c)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse() {
        assert_eq!(parse_mode("zero_plus").unwrap(), Mode::ZeroPlus);
        assert_eq!(parse_mode("hinge-zero-plus").unwrap(), Mode::HingeZeroPlus);
        assert!(parse_mode("soft").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::Infeasible {
                delta: 3.0,
                min_distance: 2.0
            }),
            EXIT_INFEASIBLE
        );
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_INPUT);
        assert_eq!(exit_code(&Error::format(Some(1), "x")), EXIT_INPUT);
        assert_eq!(
            exit_code(&Error::Inconclusive("x".into())),
            EXIT_VERIFICATION
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
