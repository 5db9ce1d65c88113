use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orthocp::metrics::Matching;
use orthocp::{AlsConfig, ApproxConfig, Exec, Extractor};

#[derive(Debug, Parser)]
#[command(
    name = "orthocp",
    version,
    about = "CP approximations with orthonormal trailing factors",
    long_about = "CP approximations with orthonormal trailing factors.\n\n\
                  The worker count can be capped with the OTNS_THREADS environment variable."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the approximation algorithm on one tensor and emit a JSON record.
    Approx(ApproxArgs),
    /// Compare achieved ratios with their guarantees over a parameter sweep (CSV).
    RatioSweep(SweepArgs),
    /// Factor recovery on planted instances, before and after refinement (CSV).
    Recover(RecoverArgs),
    /// Time the sequential and parallel executions on a Gaussian tensor (JSON).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Gaussian,
    Structured,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Tensor file: `.json` nested arrays, anything else the OTNS binary format.
    #[arg(long, conflicts_with = "gen")]
    pub input: Option<PathBuf>,
    /// Synthetic generator.
    #[arg(long, value_enum)]
    pub gen: Option<Generator>,
    /// Comma-separated mode sizes for the generator.
    #[arg(long, value_delimiter = ',')]
    pub shape: Option<Vec<usize>>,
    /// Noise level of the structured generator.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Noise-free structured instance with strictly decreasing weights.
    #[arg(long)]
    pub exact: bool,
    /// Incoherence bound for the leading structured factors.
    #[arg(long)]
    pub incoherence: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AlgoArgs {
    /// Target rank.
    #[arg(long = "R", visible_alias = "rank", default_value_t = 1)]
    pub rank: usize,
    /// Number of orthonormal trailing factors (defaults to the tensor order).
    #[arg(long = "t")]
    pub t: Option<usize>,
    /// Extraction procedure.
    #[arg(long, default_value = "A")]
    pub variant: Extractor,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Power sweeps after each rank-1 approximation.
    #[arg(long, default_value_t = 10)]
    pub power_iters: usize,
    /// Run without the thread pool.
    #[arg(long)]
    pub sequential: bool,
}

impl AlgoArgs {
    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub fn config(&self, order: usize, seed: u64) -> ApproxConfig {
        ApproxConfig::new(self.rank, self.t.unwrap_or(order))
            .with_extractor(self.variant)
            .with_seed(seed)
            .with_power_iters(self.power_iters)
            .with_exec(self.exec())
    }
}

#[derive(Debug, Clone, Args)]
pub struct AlsArgs {
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    /// Relative factor-change tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
}

impl AlsArgs {
    pub fn config(&self) -> AlsConfig {
        AlsConfig {
            max_iters: self.max_iters,
            rel_change_tol: self.tol,
            regularizer_eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Output directory for the record and the factor matrices (stdout only if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the invariant battery and fail on any violation.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// `G / Σλ²` of the full algorithm.
    Objective,
    /// `‖v‖² / ‖M‖_F²` of one extraction.
    Extraction,
    /// `Σ⟨u,v⟩² / ‖V‖_F²` of one gathering step.
    Gathering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "n")]
    N,
    #[value(name = "R", alias = "r")]
    R,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "objective")]
    pub family: Family,
    /// Swept parameter.
    #[arg(long, value_enum, default_value = "n")]
    pub sweep: SweepParam,
    #[arg(long, default_value_t = 4)]
    pub from: usize,
    #[arg(long, default_value_t = 10)]
    pub to: usize,
    /// Tensor order.
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Mode size when sweeping R (also the fixed column count of extraction matrices).
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Instances per sweep point.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail if a deterministic variant misses its guarantee on any instance.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    /// Mode sizes of the planted instances.
    #[arg(long, value_delimiter = ',', required = true)]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub incoherence: Option<f64>,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[command(flatten)]
    pub als: AlsArgs,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Also refine from random feasible factors.
    #[arg(long)]
    pub random_init: bool,
    /// Skip the refinement stage.
    #[arg(long)]
    pub no_refine: bool,
    /// Match components with one permutation shared by every mode.
    #[arg(long)]
    pub global_perm: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub check: bool,
}

impl RecoverArgs {
    pub fn matching(&self) -> Matching {
        if self.global_perm {
            Matching::Global
        } else {
            Matching::PerMode
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,16,16,16")]
    pub shape: Vec<usize>,
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub check: bool,
}
