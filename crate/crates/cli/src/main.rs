//! `charlab`: run character-sum, counting-measure and equidistribution
//! experiments over ranges of finite fields and write CSV or JSON reports.

mod commands;
mod inputs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "charlab",
    version,
    about = "Finite-field character sum and equidistribution experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Definition file (.cdl); may be repeated.
    #[arg(long = "def", value_name = "FILE")]
    pub defs: Vec<PathBuf>,
    /// Primes as an inclusive range `a..b` or a list `5,7,11`.
    #[arg(long)]
    pub primes: Option<String>,
    /// Field sizes such as `9,3^3,7^2`.
    #[arg(long)]
    pub q: Option<String>,
    /// Largest prime to use.
    #[arg(long)]
    pub pmax: Option<u64>,
    /// Report path; `.csv` selects CSV, anything else JSON. Defaults to
    /// JSON on standard output.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Expectation file; exit with status 1 if any check fails.
    #[arg(long = "assert", value_name = "FILE")]
    #[serde(skip)]
    pub expect: Option<PathBuf>,
    /// Enumeration budget (overrides CHARLAB_BUDGET).
    #[arg(long)]
    pub budget: Option<u64>,
    /// Worker threads for per-field tasks.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Character choice per field.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Chars {
    /// `std` or `twist:c`.
    #[arg(long, default_value = "std")]
    pub psi: String,
    /// `index:k` (χ_γ^k) or `order:r` (exact order r, skipping fields with r ∤ q−1).
    #[arg(long, default_value = "index:1")]
    pub chi: String,
}

/// Names of the declarations making up `Σ_{C′} Ψ(g)χ(h)`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct SumInputs {
    /// Name of the `poly` declarations cutting out C (absent: affine space).
    #[arg(long, default_value = "curve")]
    pub curve: String,
    /// Name of the `poly` declaration for g (absent: 0).
    #[arg(long, default_value = "g")]
    pub g: String,
    /// Name of the `poly` declaration for h (absent: 1).
    #[arg(long, default_value = "h")]
    pub h: String,
}

/// A predicate integrated over a definable set.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Integrand {
    /// Name of the `predicate` declaration (default: the first).
    #[arg(long)]
    pub name: Option<String>,
    /// Name of the `formula` declaration for the domain (default: the first,
    /// or the whole space).
    #[arg(long)]
    pub domain: Option<String>,
    /// Integer parameters, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<i128>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One character sum over C′(F_q).
    Sum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[command(flatten)]
        inputs: SumInputs,
    },
    /// Character sums across fields with the normalized maximum.
    WeilScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[command(flatten)]
        inputs: SumInputs,
    },
    /// The finite axiom-(4) inequality for a Laurent polynomial h on C′.
    Axiom4 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[arg(long, default_value = "curve")]
        curve: String,
        /// Name of the `laurent` declaration (default: the first).
        #[arg(long)]
        h: Option<String>,
        #[arg(long, default_value_t = 4.0)]
        k_suite: f64,
    },
    /// Grid coverage of (Ψ∘α, χ∘β) on C′.
    Density {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[arg(long, default_value = "curve")]
        curve: String,
        /// Name of the `linmap` declaration (default: the first).
        #[arg(long)]
        alpha: Option<String>,
        /// Name of the `multmap` declaration (default: the first).
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 10)]
        grid_res: u64,
        /// Height bound of the containment searches.
        #[arg(long, default_value_t = 2)]
        height: u32,
    },
    /// Θ at every parameter tuple.
    Theta {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        /// Name of the `theta` declaration (default: the first).
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit |φ(F_q)| ≈ μ q^d.
    MeasureFit {
        #[command(flatten)]
        common: Common,
        /// Name of the `formula` declaration (default: the first).
        #[arg(long)]
        name: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<i128>,
    },
    /// Average of a predicate over a definable set, per field.
    Integrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[command(flatten)]
        integrand: Integrand,
    },
    /// Compare the average with the iterated average over fibers.
    Fubini {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[command(flatten)]
        integrand: Integrand,
        /// Number of leading coordinates in the outer block.
        #[arg(long, default_value_t = 1)]
        outer: usize,
    },
    /// Split the domain by χ-values and rebuild the average from the cells.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chars: Chars,
        #[command(flatten)]
        integrand: Integrand,
        #[arg(long, default_value_t = charlab::measure::DEFAULT_MAX_ORDER)]
        max_order: u64,
    },
    /// Discrepancy of a point set and its Erdős–Turán–Koksma bounds.
    Discrepancy {
        #[command(flatten)]
        common: Common,
        /// File with one point per line, coordinates as `a/b` or decimals.
        #[arg(long, conflicts_with = "alpha")]
        points: Option<PathBuf>,
        /// Kronecker sequence frac(i·α), i = 1..n; comma-separated α.
        #[arg(long, requires = "n")]
        alpha: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// ETK frequency bounds H.
        #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
        h: Vec<u32>,
        /// ETK constant (default (3/2)^d).
        #[arg(long)]
        c_d: Option<f64>,
        /// Grid resolution for d ≥ 3.
        #[arg(long)]
        resolution: Option<u32>,
    },
    /// Smallest l ≡ f (mod R) moving rational angles into a box.
    EtkSearch {
        #[command(flatten)]
        common: Common,
        /// Angles `a/b`, comma-separated.
        #[arg(long)]
        gammas: String,
        /// Arcs such as `(0:1/10),[1/3:1/2]` (default: the full torus).
        #[arg(long = "box")]
        region: Option<String>,
        #[arg(long, default_value_t = 1)]
        modulus: u64,
        #[arg(long, default_value_t = 1)]
        residue: u64,
        #[arg(long, default_value_t = 1)]
        min_order: u64,
        #[arg(long, default_value_t = 1_000_000)]
        l_max: u64,
        #[arg(long, default_value_t = charlab::equidist::DEFAULT_H_CHECK)]
        h_check: u64,
    },
    /// Primes and characters matching a witness declaration.
    Witness {
        #[command(flatten)]
        common: Common,
        /// Name of the `witness` declaration (default: the first).
        #[arg(long)]
        name: Option<String>,
        /// Stop after this many records.
        #[arg(long)]
        limit: Option<usize>,
        /// Override the minimum character order.
        #[arg(long)]
        min_order: Option<u64>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Sum { common, .. }
            | Command::WeilScan { common, .. }
            | Command::Axiom4 { common, .. }
            | Command::Density { common, .. }
            | Command::Theta { common, .. }
            | Command::MeasureFit { common, .. }
            | Command::Integrate { common, .. }
            | Command::Fubini { common, .. }
            | Command::Decompose { common, .. }
            | Command::Discrepancy { common, .. }
            | Command::EtkSearch { common, .. }
            | Command::Witness { common, .. } => common,
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.command.common().threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (name, common, config, outcome) = commands::dispatch(cli.command)?;
    let doc = report::document(name, config, &outcome);
    report::write(common.out.as_deref(), &doc, &outcome.table)?;
    if let Some(e) = &outcome.error {
        eprintln!("error: {e:#}");
        return Ok(ExitCode::from(2));
    }
    if let Some(exp) = &common.expect {
        let failures = report::check(&doc, exp)?;
        if !failures.is_empty() {
            for f in &failures {
                eprintln!("assertion failed: {f}");
            }
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
