//! Welfare and fairness measurements of an allocation.
//!
//! Voters with an empty approval set are left out of the proportionality and
//! Nash-welfare aggregates, but still count in `n` for social welfare and for
//! the core certificate.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::geometry::max_linear_value;
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `(1/n) Σ_i U_i(z)`
    pub sw: f64,
    /// `n · min_i PS_i`; `None` when no voter can gain utility.
    pub ps_min_times_n: Option<f64>,
    pub ps_avg: Option<f64>,
    /// `½‖z - z_ref‖₁ / m`, when a reference was supplied.
    pub sd_per_m: Option<f64>,
    /// `Σ_i ln(U_i + υ)`; `None` stands for `-∞`.
    pub nash_welfare: Option<f64>,
    /// Core certificate ratio at `ε = δ = 0`; `None` when some voter gets zero utility.
    pub core_violation: Option<f64>,
    pub excluded_voters: usize,
}

/// Collects every metric, tolerating the undefined ones.
pub fn evaluate(instance: &Instance, z: &[f64], reference: Option<&[f64]>, upsilon: f64) -> MetricsReport {
    let (ps_min_times_n, ps_avg) = match proportionality(instance, z) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    let nw = nash_welfare(instance, z, upsilon);
    MetricsReport {
        sw: social_welfare(instance, z).unwrap_or(f64::NAN),
        ps_min_times_n,
        ps_avg,
        sd_per_m: reference.and_then(|r| statistical_distance(z, r).ok()),
        nash_welfare: nw.is_finite().then_some(nw),
        core_violation: core_violation(instance, z, 0.0, 0.0).ok(),
        excluded_voters: instance.excluded_voters(),
    }
}

pub fn social_welfare(instance: &Instance, z: &[f64]) -> Result<f64, MetricsError> {
    instance.check_len(z)?;
    let total: f64 = (0..instance.voters())
        .map(|i| instance.utility(i, z))
        .sum::<Result<f64, _>>()?;
    Ok(total / instance.voters() as f64)
}

/// `(n · min_i PS_i, mean_i PS_i)` with `PS_i = U_i(z) / max U_i`, over voters
/// whose attainable utility is positive.
pub fn proportionality(instance: &Instance, z: &[f64]) -> Result<(f64, f64), MetricsError> {
    instance.check_len(z)?;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..instance.voters() {
        let best = instance.max_utility(i)?;
        if best <= 0.0 {
            continue;
        }
        let ps = instance.utility(i, z)? / best;
        min = min.min(ps);
        sum += ps;
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::NoEligibleVoters);
    }
    Ok((instance.voters() as f64 * min, sum / count as f64))
}

/// Total-variation distance normalized by the number of projects.
pub fn statistical_distance(z: &[f64], reference: &[f64]) -> Result<f64, MetricsError> {
    if z.len() != reference.len() {
        return Err(MetricsError::LengthMismatch(z.len(), reference.len()));
    }
    if z.is_empty() {
        return Ok(0.0);
    }
    let l1: f64 = z.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * l1 / z.len() as f64)
}

/// `max_{z'} (1/n) Σ_i U_i(z') / (U_i(z) + δ/(1+ε))`.
///
/// For approval utilities the ratio sum is linear in `z'` with weights
/// `w_j = (1/n) Σ_{i approves j} 1/(U_i(z) + δ/(1+ε))`, so the maximum is one
/// greedy linear maximization. A value `<= 1 + ε` certifies the relaxed core
/// condition at `z`.
pub fn core_violation(instance: &Instance, z: &[f64], epsilon: f64, delta: f64) -> Result<f64, MetricsError> {
    instance.check_len(z)?;
    let slack = if delta == 0.0 { 0.0 } else { delta / (1.0 + epsilon) };
    let n = instance.voters() as f64;
    let mut weights = vec![0.0; instance.projects()];
    for i in 0..instance.voters() {
        let set = instance.approvals(i)?;
        if set.is_empty() {
            continue;
        }
        let denom = instance.utility(i, z)? + slack;
        if !(denom > 0.0) {
            return Err(MetricsError::ZeroDenominator(i));
        }
        let share = 1.0 / (n * denom);
        for &j in set {
            weights[j] += share;
        }
    }
    Ok(max_linear_value(&weights, instance.feasible_region()))
}

/// `Σ ln(U_i(z) + υ)` over voters with positive attainable utility; `-∞` when a
/// term is `ln 0`.
pub fn nash_welfare(instance: &Instance, z: &[f64], upsilon: f64) -> f64 {
    instance
        .all_approvals()
        .iter()
        .filter(|set| !set.is_empty())
        .map(|set| (set.iter().map(|&j| z[j]).sum::<f64>() + upsilon).ln())
        .sum()
}
