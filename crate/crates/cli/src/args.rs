use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::Usage;

/// Noise model, Fock oracle and fits for heralded three-photon sources.
///
/// Physical defaults: κ = 0.1, α = 0.08, t1 = t2 = 0.3, N = 3, laser
/// repetition rate 80 MHz, acquisition 100 s. Every flag can also be set
/// through a THREEPHOTON_* environment variable.
#[derive(Parser, Debug)]
#[command(name = "threephoton", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub io: OutputArgs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// SNR against the ratio R, one curve per expansion order plus its optimum
    SweepR,
    /// Simulate the three shutter steps and report CC_a, CC_s, CC_f, CC_g
    ThreeStep {
        /// Draw Poisson counts for one acquisition instead of exact rates
        #[arg(long, env = "THREEPHOTON_SAMPLED")]
        sampled: bool,
    },
    /// Average teleportation fidelity against SNR
    Fidelity {
        /// Genuine counts per acquisition; enables Monte-Carlo intervals
        #[arg(long, env = "THREEPHOTON_CCG")]
        ccg: Option<f64>,
        /// Noise split CC_f / CC_s used for the Monte-Carlo counts
        #[arg(long, default_value_t = 0.35, env = "THREEPHOTON_RATIO_R")]
        ratio_r: f64,
        /// Monte-Carlo trials per point
        #[arg(long, default_value_t = 10_000, env = "THREEPHOTON_TRIALS")]
        trials: usize,
        /// Interval summary: `envelope` or a central fraction such as `0.68`
        #[arg(long, default_value = "envelope", env = "THREEPHOTON_INTERVAL")]
        interval: IntervalArg,
    },
    /// Fit the noise model to an embedded or supplied dataset
    Fit {
        /// Read data from this CSV instead of the embedded table
        #[arg(long, env = "THREEPHOTON_INPUT")]
        input: Option<PathBuf>,
        /// Leave the pump-power exponent free instead of 3/2
        #[arg(long, env = "THREEPHOTON_FREE_EXPONENT")]
        free_exponent: bool,
    },
    /// Embedded measurement tables
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum DatasetAction {
    /// Print the dataset names
    List,
    /// Write one dataset as CSV or JSON
    Export,
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    /// SPDC gain |κ|
    #[arg(long, global = true, default_value_t = 0.1, env = "THREEPHOTON_KAPPA")]
    pub kappa: f64,
    /// Coherent amplitude |α| of the attenuated laser
    #[arg(long, global = true, default_value_t = 0.08, env = "THREEPHOTON_ALPHA")]
    pub alpha: f64,
    /// Idler coupling transmissivity
    #[arg(long, global = true, default_value_t = 0.3, env = "THREEPHOTON_T1")]
    pub t1: f64,
    /// Signal coupling transmissivity
    #[arg(long, global = true, default_value_t = 0.3, env = "THREEPHOTON_T2")]
    pub t2: f64,
    /// Coherent expansion order(s), comma separated
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        default_value = "3",
        env = "THREEPHOTON_N_TERMS"
    )]
    pub n_terms: Vec<u32>,
    /// Engine for three-step runs
    #[arg(long, global = true, value_enum, default_value_t = EngineArg::Analytic, env = "THREEPHOTON_ENGINE")]
    pub engine: EngineArg,
    /// Per-mode Fock cutoff of the oracle
    #[arg(long, global = true, default_value_t = 4, env = "THREEPHOTON_CUTOFF")]
    pub cutoff: usize,
    /// Seed for sampled runs and Monte-Carlo intervals
    #[arg(long, global = true, default_value_t = 0, env = "THREEPHOTON_SEED")]
    pub seed: u64,
    /// Laser repetition rate in Hz
    #[arg(
        long,
        global = true,
        default_value_t = 80e6,
        env = "THREEPHOTON_REP_RATE"
    )]
    pub rep_rate: f64,
    /// Acquisition time in seconds
    #[arg(
        long,
        global = true,
        default_value_t = 100.0,
        env = "THREEPHOTON_DURATION"
    )]
    pub duration: f64,
    /// Sweep as `var:lo:hi:steps:log|lin`
    #[arg(long, global = true, env = "THREEPHOTON_SWEEP")]
    pub sweep: Option<SweepSpec>,
    /// Dataset name for `fit` and `dataset export`
    #[arg(long, global = true, env = "THREEPHOTON_DATASET")]
    pub dataset: Option<String>,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv, env = "THREEPHOTON_FORMAT")]
    pub format: Format,
    /// Output file; stdout when absent
    #[arg(long, global = true, env = "THREEPHOTON_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineArg {
    Analytic,
    Oracle,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntervalArg {
    Envelope,
    Central(f64),
}

impl FromStr for IntervalArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("envelope") {
            return Ok(IntervalArg::Envelope);
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(IntervalArg::Central(f)),
            _ => Err(format!(
                "expected `envelope` or a fraction in (0, 1], got `{s}`"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub var: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [var, lo, hi, steps, scale] = parts.as_slice() else {
            return Err(format!("expected var:lo:hi:steps:log|lin, got `{s}`"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let steps: usize = steps.parse().map_err(|e| format!("steps `{steps}`: {e}"))?;
        let log = match *scale {
            "log" => true,
            "lin" => false,
            other => return Err(format!("scale must be log or lin, got `{other}`")),
        };
        if steps < 2 {
            return Err(format!("steps = {steps}, need at least 2"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("range [{lo}, {hi}] must be finite with lo < hi"));
        }
        if log && lo <= 0.0 {
            return Err(format!("log sweep needs lo > 0, got {lo}"));
        }
        Ok(SweepSpec {
            var: var.to_ascii_lowercase(),
            lo,
            hi,
            steps,
            log,
        })
    }
}

impl SweepSpec {
    /// Sweep points in index order.
    pub fn points(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let f = i as f64 / last;
                if i == 0 {
                    self.lo
                } else if i + 1 == self.steps {
                    self.hi
                } else if self.log {
                    (self.lo.ln() + f * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + f * (self.hi - self.lo)
                }
            })
            .collect()
    }

    pub fn expect_var(&self, names: &[&str]) -> Result<(), Usage> {
        if names.contains(&self.var.as_str()) {
            Ok(())
        } else {
            Err(Usage(format!(
                "sweep variable `{}` not supported here (use {})",
                self.var,
                names.join(" or ")
            )))
        }
    }
}

impl std::fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let scale = if self.log { "log" } else { "lin" };
        write!(
            f,
            "{}:{}:{}:{}:{scale}",
            self.var, self.lo, self.hi, self.steps
        )
    }
}
