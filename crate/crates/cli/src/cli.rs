use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Parser)]
#[command(name = "permbounds", version, about = "Bounds and estimates for permanents of nonnegative matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Convergence tolerance (scaling residual, duality gap)
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    #[arg(long = "max-iter", global = true, default_value_t = 10_000)]
    pub max_iter: usize,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output format; ensemble runs default to csv, everything else to json
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Matching size for perm-m and friedland
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Line sum of the Λ(k, n) family
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Matrix order, or a comma-separated list for ensemble runs
    #[arg(long, global = true)]
    pub n: Option<String>,

    #[arg(long, global = true)]
    pub samples: Option<usize>,

    #[arg(long, global = true)]
    pub ensemble: Option<String>,

    /// ψ_a parameter in [1, e), or `auto` for the canonical root
    #[arg(long, global = true)]
    pub a: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact permanent by Ryser's formula (n <= 24)
    Exact { input: PathBuf },

    /// Sinkhorn scaling followed by the Bethe 2^n sandwich
    Approx { input: PathBuf },

    /// Every applicable bound, checked against the exact value when available
    Bounds {
        input: PathBuf,
        /// Restrict to these bounds (repeatable)
        #[arg(long = "bound")]
        bounds: Vec<String>,
    },

    /// Maximize the Bethe lower bound over doubly stochastic matrices
    BetheOpt { input: PathBuf },

    /// Sinkhorn scaling factors and the scaled matrix
    Scale { input: PathBuf },

    /// Sum of permanents of all m x m submatrices
    PermM { input: PathBuf },

    /// Monomer-dimer lower bounds against sampled Per_m on Λ(k, n)
    Friedland {
        /// Dimer density; m = round(p n). Without --p or --m every m is reported.
        #[arg(long)]
        p: Option<f64>,
    },

    /// Grid check of the ψ conditions behind the Orlicz upper bound
    VerifyPsi {
        #[arg(long, default_value_t = 100_000)]
        grid: usize,
    },

    /// Randomized search for counterexamples to two open permanent inequalities
    ScanConjectures {
        /// `half-power-upper`, `phi0-bregman`, or all when omitted
        #[arg(long)]
        conjecture: Option<String>,
    },

    /// Bounds against exact values over a random ensemble
    Bench,
}
