//! Noised consensus ADMM on the smoothed Nash-welfare objective, and the
//! noiseless baseline that converges to the exact core allocation.
//!
//! Each iteration:
//! 1. every agent solves its x-update against `(z^(k-1), γ_i^(k-1))`;
//! 2. `q^(k) ~ N(0, σ² I_m)` is drawn from the `(seed, k)` stream;
//! 3. `z^(k) = mean_i x_i^(k) + q^(k) - q^(k-1)`;
//! 4. `γ_i^(k) = γ_i^(k-1) + ρ (x_i^(k) - z^(k))`.
//!
//! The output is the projection of the time-average of `z^(1..K)`.
//!
//! Voters with identical approval sets start from the same state and receive
//! the same broadcasts, so their iterates coincide exactly. They are solved
//! once per ballot class and weighted by multiplicity in every sum.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, SubsolverError};
use crate::geometry::project_point;
use crate::metrics::{self, MetricsReport};
use crate::model::{FeasibleRegion, Instance};
use crate::privacy::{DpParams, NoiseSource, PrivacyLedger};
use crate::subsolver::{solve_x_subproblem, Approvals, SubproblemSpec};

pub const DEFAULT_RHO: f64 = 1.0;
pub const BASELINE_XI: f64 = 1e-8;
pub const BASELINE_TOL: f64 = 1e-7;
pub const BASELINE_MAX_ITERS: usize = 20_000;
const RHO_BALANCE: f64 = 10.0;
const RHO_FACTOR: f64 = 2.0;

/// What to do when an agent's x-update misses its certificate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Keep the best feasible iterate and count it in the trace.
    AcceptBest,
}

/// Knobs shared by the private and the noiseless runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub rho: f64,
    pub upsilon: f64,
    /// First-order accuracy of each x-update; `None` picks the run's default.
    pub xi: Option<f64>,
    pub seed: u64,
    /// Worker threads for the x-updates; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
    pub policy: FailurePolicy,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            upsilon: 0.0,
            xi: None,
            seed: 0,
            threads: None,
            policy: FailurePolicy::Abort,
        }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<(), Error> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Param(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.upsilon.is_finite() && self.upsilon >= 0.0) {
            return Err(Error::Param(format!(
                "upsilon must be non-negative, got {}",
                self.upsilon
            )));
        }
        if let Some(xi) = self.xi {
            if !(xi.is_finite() && xi > 0.0) {
                return Err(Error::Param(format!("xi must be positive, got {xi}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Param("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default x-update accuracy for private runs: `max(1e-8, 0.1/√n)`.
pub fn private_xi(voters: usize) -> f64 {
    (0.1 / (voters as f64).sqrt()).max(1e-8)
}

/// Stopping rule of the noiseless baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub solver: SolverParams,
    pub tol: f64,
    pub max_iters: usize,
    /// Rescale ρ each iteration to keep primal and dual residuals within a
    /// factor of ten. Only sound without noise.
    pub adaptive_rho: bool,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            solver: SolverParams::default(),
            tol: BASELINE_TOL,
            max_iters: BASELINE_MAX_ITERS,
            adaptive_rho: true,
        }
    }
}

/// Voters sharing one approval set.
#[derive(Debug, Clone, PartialEq)]
pub struct BallotClass {
    pub approvals: Vec<usize>,
    /// Lowest voter index in the class.
    pub representative: usize,
    pub weight: usize,
}

/// Groups voters by approval set, in order of first appearance.
pub fn ballot_classes(instance: &Instance) -> (Vec<BallotClass>, Vec<usize>) {
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut classes: Vec<BallotClass> = Vec::new();
    let mut voter_class = Vec::with_capacity(instance.voters());
    for (voter, set) in instance.all_approvals().iter().enumerate() {
        let c = *index.entry(set.as_slice()).or_insert_with(|| {
            classes.push(BallotClass {
                approvals: set.clone(),
                representative: voter,
                weight: 0,
            });
            classes.len() - 1
        });
        classes[c].weight += 1;
        voter_class.push(c);
    }
    (classes, voter_class)
}

/// Iterate of the consensus ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub k: usize,
    /// Local iterates, one per ballot class.
    pub x: Vec<Vec<f64>>,
    /// Duals, one per ballot class.
    pub gamma: Vec<Vec<f64>>,
    /// Global iterate `z^(k)`; may leave the feasible region because of noise.
    pub z: Vec<f64>,
    pub q_prev: Vec<f64>,
    /// `Σ_{t<=k} z^(t)`
    pub z_accum: Vec<f64>,
    pub rho: f64,
    voter_class: Vec<usize>,
    weights: Vec<usize>,
}

impl AdmmState {
    /// All-zeros start.
    pub fn new(instance: &Instance, classes: &[BallotClass], voter_class: Vec<usize>, rho: f64) -> Self {
        let m = instance.projects();
        Self {
            k: 0,
            x: vec![vec![0.0; m]; classes.len()],
            gamma: vec![vec![0.0; m]; classes.len()],
            z: vec![0.0; m],
            q_prev: vec![0.0; m],
            z_accum: vec![0.0; m],
            rho,
            voter_class,
            weights: classes.iter().map(|c| c.weight).collect(),
        }
    }

    pub fn voters(&self) -> usize {
        self.voter_class.len()
    }

    /// `x_i^(k)` for one voter.
    pub fn local(&self, voter: usize) -> &[f64] {
        &self.x[self.voter_class[voter]]
    }

    /// `γ_i^(k)` for one voter.
    pub fn dual(&self, voter: usize) -> &[f64] {
        &self.gamma[self.voter_class[voter]]
    }

    /// `Σ_i γ_i^(k)` over all voters.
    pub fn dual_sum(&self) -> Vec<f64> {
        weighted_sum(&self.gamma, &self.weights, self.z.len())
    }

    /// `‖Σ_i γ_i + ρ n q^(k)‖_∞`, zero in exact arithmetic.
    pub fn dual_noise_gap(&self) -> f64 {
        let n = self.voters() as f64;
        self.dual_sum()
            .iter()
            .zip(&self.q_prev)
            .map(|(s, q)| (s + self.rho * n * q).abs())
            .fold(0.0, f64::max)
    }

    /// `‖x - 1⊗z‖₂ / √n`
    pub fn primal_residual(&self) -> f64 {
        let n = self.voters() as f64;
        let total: f64 = self
            .x
            .iter()
            .zip(&self.weights)
            .map(|(x, &w)| w as f64 * x.iter().zip(&self.z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        (total / n).sqrt()
    }
}

fn weighted_sum(rows: &[Vec<f64>], weights: &[usize], m: usize) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    for (row, &w) in rows.iter().zip(weights) {
        let w = w as f64;
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += w * v;
        }
    }
    acc
}

/// Per-iteration scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `‖x - 1⊗z‖₂ / √n`
    pub primal_residual: f64,
    /// `‖z^(k) - z^(k-1)‖₂`
    pub z_change: f64,
    /// Voter-weighted mean first-order residual of the x-updates.
    pub mean_subproblem_residual: f64,
    pub max_subproblem_residual: f64,
    pub inner_iterations: usize,
    /// Voters whose x-update was accepted without a certificate.
    pub uncertified: usize,
    /// `‖q^(k)‖₂`
    pub noise_norm: f64,
    /// `‖Σ_i γ_i^(k) + ρ n q^(k)‖_∞`
    pub dual_noise_gap: f64,
}

/// Fixed per-run context for [`AdmmState::iterate`].
#[derive(Debug, Clone)]
pub struct AdmmContext<'a> {
    pub instance: &'a Instance,
    pub classes: &'a [BallotClass],
    pub upsilon: f64,
    pub xi: f64,
    pub noise: NoiseSource,
    pub policy: FailurePolicy,
}

/// Local iterate, its residual, inner iterations, and whether it certified.
type XUpdate = (Vec<f64>, f64, usize, bool);

impl AdmmState {
    /// One consensus-ADMM iteration (`k -> k+1`).
    pub fn iterate(&mut self, ctx: &AdmmContext<'_>) -> Result<IterationRecord, Error> {
        let region: &FeasibleRegion = ctx.instance.feasible_region();
        let m = region.dim();
        let k = self.k + 1;

        let z_prev = &self.z;
        let outcomes: Vec<Result<XUpdate, SubsolverError>> = ctx
            .classes
            .par_iter()
            .zip(self.gamma.par_iter())
            .zip(self.x.par_iter())
            .map(|((class, gamma), warm)| {
                let mut spec = SubproblemSpec::new(
                    class.representative,
                    Approvals(&class.approvals),
                    z_prev,
                    gamma,
                    self.rho,
                    ctx.upsilon,
                    ctx.xi,
                );
                spec.warm_start = Some(warm);
                match solve_x_subproblem(&spec, region) {
                    Ok(out) => Ok((out.x, out.residual, out.iterations, true)),
                    Err(e) => match ctx.policy {
                        FailurePolicy::Abort => Err(e),
                        FailurePolicy::AcceptBest => Ok((e.best.clone(), e.residual, e.iterations, false)),
                    },
                }
            })
            .collect();

        let n = self.voters() as f64;
        let mut new_x = Vec::with_capacity(outcomes.len());
        let (mut res_sum, mut res_max, mut inner, mut uncertified) = (0.0, 0.0_f64, 0usize, 0usize);
        for (outcome, &w) in outcomes.into_iter().zip(&self.weights) {
            let (x, residual, iterations, certified) = outcome?;
            res_sum += w as f64 * residual;
            res_max = res_max.max(residual);
            inner += iterations;
            if !certified {
                uncertified += w;
            }
            new_x.push(x);
        }

        let q = ctx.noise.sample(m, k);
        let mean_x: Vec<f64> = weighted_sum(&new_x, &self.weights, m)
            .into_iter()
            .map(|s| s / n)
            .collect();
        let z_new: Vec<f64> = mean_x
            .iter()
            .zip(&q)
            .zip(&self.q_prev)
            .map(|((&a, &qk), &qp)| a + qk - qp)
            .collect();

        let rho = self.rho;
        self.gamma.par_iter_mut().zip(new_x.par_iter()).for_each(|(gamma, x)| {
            for ((g, &xj), &zj) in gamma.iter_mut().zip(x).zip(&z_new) {
                *g += rho * (xj - zj);
            }
        });

        let z_change = z_new
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        for (acc, &v) in self.z_accum.iter_mut().zip(&z_new) {
            *acc += v;
        }
        self.x = new_x;
        self.z = z_new;
        self.q_prev = q;
        self.k = k;

        Ok(IterationRecord {
            k,
            primal_residual: self.primal_residual(),
            z_change,
            mean_subproblem_residual: res_sum / n,
            max_subproblem_residual: res_max,
            inner_iterations: inner,
            uncertified,
            noise_norm: self.q_prev.iter().map(|v| v * v).sum::<f64>().sqrt(),
            dual_noise_gap: self.dual_noise_gap(),
        })
    }
}

/// Result of a private or baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Feasible output allocation.
    pub allocation: Vec<f64>,
    /// Unprojected point that was projected to obtain `allocation`.
    pub raw: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    pub ledger: Option<PrivacyLedger>,
    pub metrics: MetricsReport,
    pub params: SolverParams,
    pub ballot_classes: usize,
    /// Excluded from serialization so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: Duration,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Param(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Private run: `dp.iterations` noised iterations from the origin; returns the
/// projection of the averaged global iterate.
pub fn run(instance: &Instance, dp: &DpParams, params: &SolverParams) -> Result<SolverReport, Error> {
    params.validate()?;
    if dp.voters != instance.voters() {
        return Err(Error::Param(format!(
            "privacy parameters calibrated for n={} but the instance has n={}",
            dp.voters,
            instance.voters()
        )));
    }
    let start = Instant::now();
    let xi = params.xi.unwrap_or_else(|| private_xi(instance.voters()));
    let (classes, voter_class) = ballot_classes(instance);
    let ctx = AdmmContext {
        instance,
        classes: &classes,
        upsilon: params.upsilon,
        xi,
        noise: NoiseSource::new(dp.sigma2, params.seed),
        policy: params.policy,
    };
    let mut state = AdmmState::new(instance, &classes, voter_class, params.rho);
    let trace = with_pool(params.threads, || {
        (0..dp.iterations)
            .map(|_| state.iterate(&ctx))
            .collect::<Result<Vec<_>, Error>>()
    })??;

    let raw: Vec<f64> = state.z_accum.iter().map(|s| s / dp.iterations as f64).collect();
    let allocation = project_point(&raw, instance.feasible_region());
    let metrics = metrics::evaluate(instance, &allocation, None, params.upsilon);
    Ok(SolverReport {
        allocation,
        raw,
        iterations: dp.iterations,
        converged: true,
        trace,
        ledger: Some(dp.ledger(instance.projects())),
        metrics,
        params: SolverParams {
            xi: Some(xi),
            ..*params
        },
        ballot_classes: classes.len(),
        wall_time: start.elapsed(),
    })
}

/// Noiseless baseline: iterates until the primal residual and the change in `z`
/// both fall below `tol`, then projects the last global iterate.
pub fn run_noiseless(instance: &Instance, params: &BaselineParams) -> Result<SolverReport, Error> {
    let solver = &params.solver;
    solver.validate()?;
    if !(params.tol > 0.0) || params.max_iters == 0 {
        return Err(Error::Param("baseline needs tol > 0 and max_iters >= 1".into()));
    }
    let start = Instant::now();
    let xi = solver.xi.unwrap_or(BASELINE_XI);
    let (classes, voter_class) = ballot_classes(instance);
    let ctx = AdmmContext {
        instance,
        classes: &classes,
        upsilon: solver.upsilon,
        xi,
        noise: NoiseSource::silent(),
        policy: solver.policy,
    };
    let mut state = AdmmState::new(instance, &classes, voter_class, solver.rho);
    let (trace, converged) = with_pool(solver.threads, || -> Result<_, Error> {
        let mut trace = Vec::new();
        let mut converged = false;
        while state.k < params.max_iters {
            let rec = state.iterate(&ctx)?;
            let done = rec.primal_residual <= params.tol && rec.z_change <= params.tol;
            if params.adaptive_rho {
                // Residual balancing; both residuals are per-√n.
                let dual = state.rho * rec.z_change;
                if rec.primal_residual > RHO_BALANCE * dual {
                    state.rho *= RHO_FACTOR;
                } else if dual > RHO_BALANCE * rec.primal_residual {
                    state.rho /= RHO_FACTOR;
                }
            }
            trace.push(rec);
            if done {
                converged = true;
                break;
            }
        }
        Ok((trace, converged))
    })??;
    if !converged {
        log::warn!(
            "baseline stopped at max_iters={} without reaching tol={}",
            params.max_iters,
            params.tol
        );
    }

    let raw = state.z.clone();
    let allocation = project_point(&raw, instance.feasible_region());
    let metrics = metrics::evaluate(instance, &allocation, None, solver.upsilon);
    Ok(SolverReport {
        allocation,
        raw,
        iterations: state.k,
        converged,
        trace,
        ledger: None,
        metrics,
        params: SolverParams {
            xi: Some(xi),
            ..*solver
        },
        ballot_classes: classes.len(),
        wall_time: start.elapsed(),
    })
}
