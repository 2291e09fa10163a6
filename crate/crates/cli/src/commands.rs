use std::fs;
use std::path::Path;

use anyhow::Context;
use log::info;

use ppga_core::metrics::{self, evaluate, social_welfare};
use ppga_core::ppga::ballot_classes;
use ppga_core::{cost_utility, parse_pabulib, run, run_noiseless, Instance, SolverReport};

use crate::config::{BaselineArgs, CompareArgs, DpEcho, InputArgs, MetricsArgs, SolveArgs, SolverArgs, StopArgs};
use crate::error::CliError;
use crate::report::{
    aggregate, sw_ratio_csv, to_json, CompareReport, ConfigEcho, CoreSummary, InstanceEcho, MetricsOnlyReport,
    RunReport, SeedRow, REPORT_VERSION,
};

pub struct Loaded {
    pub instance: Instance,
    pub dropped_approvals: usize,
}

pub fn load(input: &InputArgs) -> Result<Loaded, CliError> {
    let path = &input.input;
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::input)?;
    let mut raw = parse_pabulib(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(CliError::input)?;
    if let Some(n) = input.sample {
        if n < raw.votes.len() {
            info!(
                "subsampling {} of {} voters with seed {}",
                n,
                raw.votes.len(),
                input.seed
            );
        }
        raw = raw.subsample(n, input.seed);
    }
    let dropped_approvals = raw.dropped_approvals();
    let instance = cost_utility(&raw)
        .with_context(|| format!("invalid election in {}", path.display()))
        .map_err(CliError::input)?;
    info!("loaded n={} m={}", instance.voters(), instance.projects());
    Ok(Loaded {
        instance,
        dropped_approvals,
    })
}

fn echo(input: &InputArgs, solver: Option<&SolverArgs>, loaded: &Loaded, xi: Option<f64>) -> ConfigEcho {
    let inst = &loaded.instance;
    ConfigEcho {
        tool_version: env!("CARGO_PKG_VERSION"),
        input: input.input.display().to_string(),
        sample: input.sample,
        seed: input.seed,
        rho: solver.map_or(ppga_core::ppga::DEFAULT_RHO, |s| s.rho),
        upsilon: solver.map_or(0.0, |s| s.upsilon),
        xi,
        policy: solver.map_or_else(Default::default, |s| s.params(0).policy),
        dp: None,
        tol: None,
        max_iters: None,
        adaptive_rho: None,
        runs: None,
        instance: InstanceEcho {
            voters: inst.voters(),
            projects: inst.projects(),
            ballot_classes: ballot_classes(inst).0.len(),
            excluded_voters: inst.excluded_voters(),
            dropped_approvals: loaded.dropped_approvals,
        },
    }
}

fn with_stop(mut echo: ConfigEcho, stop: &StopArgs) -> ConfigEcho {
    echo.tol = Some(stop.tol);
    echo.max_iters = Some(stop.max_iters);
    echo.adaptive_rho = Some(!stop.fixed_rho);
    echo
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(CliError::other),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .context("cannot write report")
                .map_err(CliError::other)
        }
    }
}

fn emit<T: serde::Serialize>(out: Option<&Path>, report: &T) -> Result<(), CliError> {
    let bytes = to_json(report)
        .context("cannot serialize report")
        .map_err(CliError::other)?;
    write_out(out, &bytes)
}

fn run_report(command: &'static str, rep: SolverReport, config_echo: ConfigEcho) -> RunReport {
    RunReport {
        version: REPORT_VERSION,
        command,
        allocation: rep.allocation,
        metrics: rep.metrics,
        ledger: rep.ledger,
        iterations: rep.iterations,
        converged: rep.converged,
        trace: rep.trace,
        config_echo,
    }
}

pub fn solve(args: &SolveArgs) -> Result<(), CliError> {
    args.input.validate()?;
    args.solver.validate()?;
    args.dp.validate()?;
    let loaded = load(&args.input)?;
    let inst = &loaded.instance;
    let dp = args.dp.request().resolve(inst.voters())?;
    if dp.noise_warning(inst.projects()) {
        log::warn!(
            "m·σ² = {:.3e} >= 1: the noise dominates the allocation",
            dp.noise_magnitude(inst.projects())
        );
    }
    let rep = run(inst, &dp, &args.solver.params(args.input.seed))?;
    info!("private run finished in {:?}", rep.wall_time);
    let mut config_echo = echo(&args.input, Some(&args.solver), &loaded, rep.params.xi);
    config_echo.dp = Some(DpEcho::from(&args.dp));
    emit(args.input.out.as_deref(), &run_report("solve", rep, config_echo))
}

pub fn baseline(args: &BaselineArgs) -> Result<(), CliError> {
    args.input.validate()?;
    args.solver.validate()?;
    args.stop.validate()?;
    let loaded = load(&args.input)?;
    let params = args.stop.params(args.solver.params(args.input.seed));
    let rep = run_noiseless(&loaded.instance, &params)?;
    info!("baseline: {} iterations, converged {}", rep.iterations, rep.converged);
    let config_echo = with_stop(
        echo(&args.input, Some(&args.solver), &loaded, rep.params.xi),
        &args.stop,
    );
    emit(args.input.out.as_deref(), &run_report("baseline", rep, config_echo))
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    args.input.validate()?;
    args.solver.validate()?;
    args.dp.validate()?;
    args.stop.validate()?;
    args.validate()?;
    let loaded = load(&args.input)?;
    let inst = &loaded.instance;
    // Resolve the budget up front so a bad budget fails before the baseline runs.
    let dp = if args.baseline_only {
        None
    } else {
        Some(args.dp.request().resolve(inst.voters())?)
    };

    let core = run_noiseless(inst, &args.stop.params(args.solver.params(args.input.seed)))?;
    info!("baseline: {} iterations, converged {}", core.iterations, core.converged);
    let core_sw = social_welfare(inst, &core.allocation).map_err(|e| CliError::from(ppga_core::Error::from(e)))?;

    let mut rows = Vec::new();
    if let Some(dp) = &dp {
        for r in 0..args.runs {
            let seed = args.input.seed.wrapping_add(r as u64);
            let rep = run(inst, dp, &args.solver.params(seed))?;
            let m = evaluate(inst, &rep.allocation, Some(&core.allocation), args.solver.upsilon);
            info!("seed {seed}: sw ratio {:.4}", m.sw / core_sw);
            rows.push(SeedRow {
                seed,
                sw: m.sw,
                sw_ratio: m.sw / core_sw,
                ps_min_times_n: m.ps_min_times_n,
                ps_avg: m.ps_avg,
                sd_per_m: m.sd_per_m,
                core_violation: m.core_violation,
                allocation: rep.allocation,
            });
        }
    }

    if let Some(path) = &args.csv {
        let bytes = sw_ratio_csv(&rows, core_sw)
            .context("cannot format CSV")
            .map_err(CliError::other)?;
        write_out(Some(path), &bytes)?;
    }

    let mut config_echo = with_stop(
        echo(&args.input, Some(&args.solver), &loaded, args.solver.xi),
        &args.stop,
    );
    config_echo.dp = (!args.baseline_only).then(|| DpEcho::from(&args.dp));
    config_echo.runs = Some(if args.baseline_only { 0 } else { args.runs });
    let report = CompareReport {
        version: REPORT_VERSION,
        command: "compare",
        core: CoreSummary {
            allocation: core.allocation,
            metrics: core.metrics,
            iterations: core.iterations,
            converged: core.converged,
        },
        ledger: dp.map(|d| d.ledger(inst.projects())),
        aggregate: aggregate(&rows),
        runs: rows,
        config_echo,
    };
    emit(args.input.out.as_deref(), &report)
}

/// Reads a bare JSON array or the `allocation` field of a report.
pub fn read_allocation(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::input)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not JSON", path.display()))
        .map_err(CliError::input)?;
    let array = match &value {
        serde_json::Value::Object(map) => map.get("allocation").cloned().unwrap_or(serde_json::Value::Null),
        other => other.clone(),
    };
    serde_json::from_value(array)
        .with_context(|| format!("{} holds no allocation array", path.display()))
        .map_err(CliError::input)
}

pub fn metrics(args: &MetricsArgs) -> Result<(), CliError> {
    args.input.validate()?;
    if !(args.upsilon.is_finite() && args.upsilon >= 0.0) {
        return Err(CliError::config(format!(
            "--upsilon must be non-negative, got {}",
            args.upsilon
        )));
    }
    let loaded = load(&args.input)?;
    let inst = &loaded.instance;
    let z = read_allocation(&args.allocation)?;
    let reference = args.reference.as_deref().map(read_allocation).transpose()?;
    for v in std::iter::once(&z).chain(reference.as_ref()) {
        if v.len() != inst.projects() {
            return Err(CliError::input(anyhow::anyhow!(
                "allocation has {} entries, election has {} projects",
                v.len(),
                inst.projects()
            )));
        }
    }
    if !inst.feasible_region().contains(&z, 1e-9) {
        log::warn!("allocation lies outside the feasible region");
    }
    let report = MetricsOnlyReport {
        version: REPORT_VERSION,
        command: "metrics",
        metrics: metrics::evaluate(inst, &z, reference.as_deref(), args.upsilon),
        config_echo: echo(&args.input, None, &loaded, None),
    };
    emit(args.input.out.as_deref(), &report)
}
