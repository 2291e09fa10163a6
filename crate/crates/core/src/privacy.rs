//! Gaussian-mechanism calibration for the noised consensus average, and the
//! Rényi-DP ledger that converts the composed cost back to (ε, δ)-DP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::PrivacyBudgetError;

/// Constants of the automatic parameter rules:
/// `ε = C_EPSILON / ln n`, `δ = C_DELTA / √n`, `K = max(1, round(C_ITERATIONS · n))`.
pub const C_EPSILON: f64 = 1.5;
pub const C_DELTA: f64 = 0.3;
pub const C_ITERATIONS: f64 = 0.001;

/// Rényi order that spends half of ε on the RDP-to-DP conversion:
/// `α = 2 ln(1/δ)/ε + 1`.
pub fn default_alpha(epsilon: f64, delta: f64) -> Result<f64, PrivacyBudgetError> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    Ok(2.0 * (1.0 / delta).ln() / epsilon + 1.0)
}

fn check_epsilon(epsilon: f64) -> Result<(), PrivacyBudgetError> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(PrivacyBudgetError::Epsilon(epsilon))
    }
}

fn check_delta(delta: f64) -> Result<(), PrivacyBudgetError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(PrivacyBudgetError::Delta(delta))
    }
}

/// Validated privacy parameters with the derived per-iteration budget and
/// noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub voters: usize,
    /// `ε' = (ε - ln(1/δ)/(α-1)) / K`
    pub eps_prime: f64,
    /// `σ² = α / (n² ε')`
    pub sigma2: f64,
}

impl DpParams {
    pub fn derive(
        epsilon: f64,
        delta: f64,
        alpha: f64,
        iterations: usize,
        voters: usize,
    ) -> Result<Self, PrivacyBudgetError> {
        check_epsilon(epsilon)?;
        check_delta(delta)?;
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(PrivacyBudgetError::Alpha(alpha));
        }
        if iterations == 0 {
            return Err(PrivacyBudgetError::Iterations);
        }
        if voters == 0 {
            return Err(PrivacyBudgetError::Voters);
        }
        let conversion_cost = conversion_cost(delta, alpha);
        let eps_prime = (epsilon - conversion_cost) / iterations as f64;
        if !(eps_prime > 0.0) {
            return Err(PrivacyBudgetError::Exhausted {
                epsilon,
                delta,
                alpha,
                conversion_cost,
                eps_prime,
            });
        }
        let n = voters as f64;
        let sigma2 = alpha / (n * n * eps_prime);
        Ok(Self {
            epsilon,
            delta,
            alpha,
            iterations,
            voters,
            eps_prime,
            sigma2,
        })
    }

    /// Expected squared noise norm per iteration, `E‖q‖² = m σ²`.
    pub fn noise_magnitude(&self, m: usize) -> f64 {
        m as f64 * self.sigma2
    }

    /// True when `m σ² >= 1`, outside the regime where the noise vanishes.
    pub fn noise_warning(&self, m: usize) -> bool {
        self.noise_magnitude(m) >= 1.0
    }

    pub fn ledger(&self, m: usize) -> PrivacyLedger {
        privacy_ledger(self, m)
    }
}

/// `ln(1/δ)/(α-1)`: the ε surcharge of the RDP-to-DP conversion.
pub fn conversion_cost(delta: f64, alpha: f64) -> f64 {
    (1.0 / delta).ln() / (alpha - 1.0)
}

/// Either an explicit value or `auto` (resolved from the voter count).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DpRequest {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
}

impl DpRequest {
    /// Fills every `None` from the automatic rules at voter count `n`, then derives.
    pub fn resolve(&self, voters: usize) -> Result<DpParams, PrivacyBudgetError> {
        if voters == 0 {
            return Err(PrivacyBudgetError::Voters);
        }
        let n = voters as f64;
        let epsilon = self.epsilon.unwrap_or_else(|| auto_epsilon(voters));
        let delta = self.delta.unwrap_or_else(|| C_DELTA / n.sqrt());
        let iterations = self.iterations.unwrap_or_else(|| auto_iterations(voters));
        let alpha = match self.alpha {
            Some(a) => a,
            None => default_alpha(epsilon, delta)?,
        };
        DpParams::derive(epsilon, delta, alpha, iterations, voters)
    }
}

/// `1.5 / ln n`; infinite at `n = 1`, which the derivation rejects.
pub fn auto_epsilon(voters: usize) -> f64 {
    C_EPSILON / (voters as f64).ln()
}

pub fn auto_delta(voters: usize) -> f64 {
    C_DELTA / (voters as f64).sqrt()
}

pub fn auto_iterations(voters: usize) -> usize {
    ((C_ITERATIONS * voters as f64).round() as usize).max(1)
}

/// `N(0, σ² I_m)` draws keyed by `(seed, k)`.
///
/// Each iteration reads its own ChaCha stream, so a draw does not depend on
/// how many other draws were made or on which thread asked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSource {
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseSource {
    pub fn new(sigma2: f64, seed: u64) -> Self {
        Self { sigma2, seed }
    }

    pub fn silent() -> Self {
        Self { sigma2: 0.0, seed: 0 }
    }

    pub fn sample(&self, m: usize, k: usize) -> Vec<f64> {
        if self.sigma2 == 0.0 {
            return vec![0.0; m];
        }
        let sigma = self.sigma2.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        (0..m)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                sigma * g
            })
            .collect()
    }
}

/// Noise vector `q^(k)` for iteration `k` under `params`.
pub fn sample_noise(params: &DpParams, m: usize, k: usize, seed: u64) -> Vec<f64> {
    NoiseSource::new(params.sigma2, seed).sample(m, k)
}

/// Accounting summary for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    /// Converted DP guarantee.
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Per-iteration RDP cost at order α.
    pub eps_prime: f64,
    /// Composed RDP cost after K iterations, `K ε'`.
    pub composed_rdp: f64,
    pub iterations: usize,
    pub sigma2: f64,
    /// ℓ2 sensitivity of the consensus average, `√2 / n`.
    pub sensitivity: f64,
    /// `m σ²`
    pub noise_magnitude: f64,
    pub m_sigma2_warning: bool,
}

pub fn privacy_ledger(params: &DpParams, m: usize) -> PrivacyLedger {
    let composed_rdp = params.iterations as f64 * params.eps_prime;
    PrivacyLedger {
        epsilon: composed_rdp + conversion_cost(params.delta, params.alpha),
        delta: params.delta,
        alpha: params.alpha,
        eps_prime: params.eps_prime,
        composed_rdp,
        iterations: params.iterations,
        sigma2: params.sigma2,
        sensitivity: std::f64::consts::SQRT_2 / params.voters as f64,
        noise_magnitude: params.noise_magnitude(m),
        m_sigma2_warning: params.noise_warning(m),
    }
}
