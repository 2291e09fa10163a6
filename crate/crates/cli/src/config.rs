use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ppga_core::privacy::DpRequest;
use ppga_core::{BaselineParams, FailurePolicy, SolverParams};

/// A number or the literal `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Auto<T>(pub Option<T>);

impl<T: FromStr> FromStr for Auto<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Auto(None));
        }
        s.parse::<T>()
            .map(|v| Auto(Some(v)))
            .map_err(|e| format!("expected a number or `auto`: {e}"))
    }
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ppga", version, about = "Differentially private public-good allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Private allocation of one election.
    Solve(SolveArgs),
    /// Noiseless baseline (the exact core allocation).
    Baseline(BaselineArgs),
    /// Baseline, then private runs over a range of seeds.
    Compare(CompareArgs),
    /// Metrics of a given allocation.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Election file in the `.pb` layout.
    #[arg(long)]
    pub input: PathBuf,
    /// Keep a seeded uniform subsample of this many voters.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = ppga_core::ppga::DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub upsilon: f64,
    /// x-update accuracy; defaults depend on the command.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Worker threads; does not change the output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Keep the best iterate when an x-update misses its accuracy target.
    #[arg(long)]
    pub accept_uncertified: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DpArgs {
    #[arg(long, default_value = "auto")]
    pub epsilon: Auto<f64>,
    #[arg(long, default_value = "auto")]
    pub delta: Auto<f64>,
    #[arg(long, default_value = "auto")]
    pub iterations: Auto<usize>,
    #[arg(long, default_value = "auto")]
    pub alpha: Auto<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct StopArgs {
    #[arg(long, default_value_t = ppga_core::ppga::BASELINE_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = ppga_core::ppga::BASELINE_MAX_ITERS)]
    pub max_iters: usize,
    /// Keep ρ fixed instead of balancing the residuals.
    #[arg(long)]
    pub fixed_rho: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub dp: DpArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub dp: DpArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Private runs with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Per-seed social-welfare ratios as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Skip the private runs.
    #[arg(long)]
    pub baseline_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// JSON array, or a report with an `allocation` field.
    #[arg(long)]
    pub allocation: PathBuf,
    /// Reference allocation for the statistical distance, same formats.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub upsilon: f64,
}

/// Invalid flag combination, caught before any compute.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError(format!("--{name} must be a positive number, got {v}")))
    }
}

impl InputArgs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sample == Some(0) {
            return Err(ConfigError("--sample must be at least 1".into()));
        }
        Ok(())
    }
}

impl SolverArgs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("rho", self.rho)?;
        if !(self.upsilon.is_finite() && self.upsilon >= 0.0) {
            return Err(ConfigError(format!(
                "--upsilon must be non-negative, got {}",
                self.upsilon
            )));
        }
        if let Some(xi) = self.xi {
            positive("xi", xi)?;
        }
        if self.threads == Some(0) {
            return Err(ConfigError("--threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self, seed: u64) -> SolverParams {
        SolverParams {
            rho: self.rho,
            upsilon: self.upsilon,
            xi: self.xi,
            seed,
            threads: self.threads,
            policy: if self.accept_uncertified {
                FailurePolicy::AcceptBest
            } else {
                FailurePolicy::Abort
            },
        }
    }
}

impl DpArgs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(e) = self.epsilon.0 {
            positive("epsilon", e)?;
        }
        if let Some(d) = self.delta.0 {
            if !(d > 0.0 && d < 1.0) {
                return Err(ConfigError(format!("--delta must lie in (0, 1), got {d}")));
            }
        }
        if let Some(a) = self.alpha.0 {
            if !(a.is_finite() && a > 1.0) {
                return Err(ConfigError(format!("--alpha must exceed 1, got {a}")));
            }
        }
        if self.iterations.0 == Some(0) {
            return Err(ConfigError("--iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn request(&self) -> DpRequest {
        DpRequest {
            epsilon: self.epsilon.0,
            delta: self.delta.0,
            alpha: self.alpha.0,
            iterations: self.iterations.0,
        }
    }
}

impl StopArgs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("tol", self.tol)?;
        if self.max_iters == 0 {
            return Err(ConfigError("--max-iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self, solver: SolverParams) -> BaselineParams {
        BaselineParams {
            solver,
            tol: self.tol,
            max_iters: self.max_iters,
            adaptive_rho: !self.fixed_rho,
        }
    }
}

impl CompareArgs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 && !self.baseline_only {
            return Err(ConfigError("--runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Requested values as given on the command line; `None` means `auto`.
#[derive(Debug, Clone, Serialize)]
pub struct DpEcho {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
}

impl From<&DpArgs> for DpEcho {
    fn from(a: &DpArgs) -> Self {
        Self {
            epsilon: a.epsilon.0,
            delta: a.delta.0,
            alpha: a.alpha.0,
            iterations: a.iterations.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_parses_both_forms() {
        assert_eq!("auto".parse::<Auto<f64>>().unwrap(), Auto(None));
        assert_eq!("AUTO".parse::<Auto<usize>>().unwrap(), Auto(None));
        assert_eq!("0.25".parse::<Auto<f64>>().unwrap(), Auto(Some(0.25)));
        assert!("ten".parse::<Auto<usize>>().is_err());
        assert_eq!(Auto(Some(3usize)).to_string(), "3");
    }

    #[test]
    fn flags_parse_into_config() {
        let cli = Cli::try_parse_from([
            "ppga",
            "compare",
            "--input",
            "x.pb",
            "--epsilon",
            "0.5",
            "--iterations",
            "auto",
            "--runs",
            "3",
            "--threads",
            "2",
            "--baseline-only",
        ])
        .unwrap();
        let Command::Compare(args) = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(args.dp.epsilon, Auto(Some(0.5)));
        assert_eq!(args.dp.iterations, Auto(None));
        assert_eq!(args.runs, 3);
        assert!(args.baseline_only);
        assert_eq!(args.solver.params(7).threads, Some(2));
        assert_eq!(args.solver.params(7).seed, 7);
    }

    #[test]
    fn invalid_values_rejected_before_compute() {
        let dp = DpArgs {
            epsilon: Auto(Some(-1.0)),
            delta: Auto(None),
            iterations: Auto(None),
            alpha: Auto(None),
        };
        assert!(dp.validate().is_err());
        let dp = DpArgs {
            epsilon: Auto(None),
            delta: Auto(Some(1.5)),
            ..dp
        };
        assert!(dp.validate().is_err());
        let stop = StopArgs {
            tol: 0.0,
            max_iters: 10,
            fixed_rho: false,
        };
        assert!(stop.validate().is_err());
    }
}
