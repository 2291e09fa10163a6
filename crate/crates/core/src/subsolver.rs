//! Per-agent x-update: maximize the partial augmented Lagrangian
//!
//! ```text
//! F(x) = ln(U(x) + υ) - γᵀ(x - z) - (ρ/2)‖x - z‖²   over the feasible region
//! ```
//!
//! to first-order accuracy `ξ`, certified exactly by a linear maximization:
//! `max_y (y - x)ᵀ∇F(x) <= ξ`.

use crate::error::SubsolverError;
use crate::geometry::{max_linear_value, project_into, RayProjection};
use crate::model::{linear_utility, FeasibleRegion};

/// Floor applied to the smoothing parameter so that `ln(U + υ)` stays finite at `U = 0`.
pub const UPSILON_FLOOR: f64 = 1e-9;

/// Hard ceiling on accelerated-gradient iterations per subproblem.
pub const MAX_INNER_ITERATIONS: usize = 20_000;

/// Concave, differentiable utility seen by one agent.
pub trait Utility: Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `∇U(x)` into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Smoothness constant of `U` (zero for linear utilities).
    fn smoothness(&self) -> f64 {
        0.0
    }
    /// Exact subproblem solution if the utility admits one cheaply. Used only
    /// as a starting point; the result is still certified.
    fn stationary_point(&self, _problem: &SubproblemSpec<'_, Self>, _region: &FeasibleRegion) -> Option<Vec<f64>>
    where
        Self: Sized,
    {
        None
    }
}

/// Approval utility `U(x) = Σ_{j∈P} x_j`.
#[derive(Debug, Clone, Copy)]
pub struct Approvals<'a>(pub &'a [usize]);

impl Utility for Approvals<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        linear_utility(self.0, x)
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for &j in self.0 {
            out[j] = 1.0;
        }
    }

    fn stationary_point(&self, problem: &SubproblemSpec<'_, Self>, region: &FeasibleRegion) -> Option<Vec<f64>> {
        Some(linear_stationary_point(self.0, problem, region))
    }
}

/// One agent's x-update.
#[derive(Debug, Clone)]
pub struct SubproblemSpec<'a, U> {
    pub voter: usize,
    pub utility: U,
    /// `z^(k-1)`
    pub z_prev: &'a [f64],
    /// `γ_i^(k-1)`
    pub gamma_prev: &'a [f64],
    pub rho: f64,
    pub upsilon: f64,
    pub xi: f64,
    /// Previous local iterate; the solver starts here when no closed form applies.
    pub warm_start: Option<&'a [f64]>,
    /// Skip the utility's closed-form starting point and run the iterative method only.
    pub iterative_only: bool,
}

impl<'a, U: Utility> SubproblemSpec<'a, U> {
    pub fn new(
        voter: usize,
        utility: U,
        z_prev: &'a [f64],
        gamma_prev: &'a [f64],
        rho: f64,
        upsilon: f64,
        xi: f64,
    ) -> Self {
        Self {
            voter,
            utility,
            z_prev,
            gamma_prev,
            rho,
            upsilon,
            xi,
            warm_start: None,
            iterative_only: false,
        }
    }

    pub fn upsilon_eff(&self) -> f64 {
        self.upsilon.max(UPSILON_FLOOR)
    }

    /// Gradient-Lipschitz bound of `ln(U + υ)`, `(1+β)²/(2υ²) + β/υ`.
    pub fn lipschitz(&self) -> f64 {
        let beta = self.utility.smoothness();
        let ups = self.upsilon_eff();
        (1.0 + beta).powi(2) / (2.0 * ups * ups) + beta / ups
    }

    /// Iteration cap `10·⌈√((L+ρ)/ξ)·ln(1/ξ)⌉`, clipped to [`MAX_INNER_ITERATIONS`].
    pub fn iteration_cap(&self) -> usize {
        let raw = ((self.lipschitz() + self.rho) / self.xi).sqrt() * (1.0 / self.xi).ln().max(1.0);
        let cap = 10.0 * raw.ceil();
        if cap.is_finite() && cap < MAX_INNER_ITERATIONS as f64 {
            (cap as usize).max(1)
        } else {
            MAX_INNER_ITERATIONS
        }
    }

    /// `F(x)`; `-∞` outside the domain of the logarithm.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let u = self.utility.value(x) + self.upsilon_eff();
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lin = 0.0;
        let mut quad = 0.0;
        for ((&xj, &zj), &gj) in x.iter().zip(self.z_prev).zip(self.gamma_prev) {
            let d = xj - zj;
            lin += gj * d;
            quad += d * d;
        }
        u.ln() - lin - 0.5 * self.rho * quad
    }

    /// `∇F(x)`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let u = self.utility.value(x) + self.upsilon_eff();
        self.utility.gradient(x, out);
        let inv = 1.0 / u;
        for (((g, &xj), &zj), &gj) in out.iter_mut().zip(x).zip(self.z_prev).zip(self.gamma_prev) {
            *g = *g * inv - gj - self.rho * (xj - zj);
        }
    }
}

/// Certified solution of one subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsolverOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    /// Accelerated-gradient iterations spent (0 when the starting point already certified).
    pub iterations: usize,
}

/// First-order residual `max_{y∈Z} (y - x)ᵀ∇F(x)`, computed exactly.
pub fn fo_residual<U: Utility>(x: &[f64], spec: &SubproblemSpec<'_, U>, region: &FeasibleRegion) -> f64 {
    let mut g = vec![0.0; x.len()];
    residual_with(x, spec, region, &mut g)
}

fn residual_with<U: Utility>(x: &[f64], spec: &SubproblemSpec<'_, U>, region: &FeasibleRegion, g: &mut [f64]) -> f64 {
    spec.gradient(x, g);
    let at_x: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
    (max_linear_value(g, region) - at_x).max(0.0)
}

/// Solves the x-update to first-order accuracy `spec.xi`.
///
/// Starts from the utility's closed-form point when available (otherwise the
/// warm start, otherwise the origin) and runs accelerated projected gradient
/// with backtracking and function-value restarts until the certificate passes.
pub fn solve_x_subproblem<U: Utility>(
    spec: &SubproblemSpec<'_, U>,
    region: &FeasibleRegion,
) -> Result<SubsolverOutcome, SubsolverError> {
    let m = region.dim();
    let mut g = vec![0.0; m];

    let mut x = if spec.iterative_only {
        None
    } else {
        spec.utility.stationary_point(spec, region)
    }
    .unwrap_or_else(|| {
        let start = spec.warm_start.map_or_else(|| vec![0.0; m], <[f64]>::to_vec);
        let mut x = vec![0.0; m];
        project_into(&start, region, &mut x);
        x
    });

    let mut residual = residual_with(&x, spec, region, &mut g);
    if residual <= spec.xi {
        return Ok(SubsolverOutcome {
            x,
            residual,
            iterations: 0,
        });
    }

    let cap = spec.iteration_cap();
    let mut y = x.clone();
    let mut x_next = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut f_x = spec.objective(&x);
    let mut momentum = 1.0_f64;
    // Curvature estimate; backtracking raises it as needed.
    let mut lip = spec.rho + {
        let u = spec.utility.value(&x) + spec.upsilon_eff();
        1.0 / (u * u)
    };
    let mut best = (residual, x.clone());

    for iteration in 1..=cap {
        let mut f_y = spec.objective(&y);
        if !f_y.is_finite() {
            y.copy_from_slice(&x);
            f_y = f_x;
            momentum = 1.0;
        }
        spec.gradient(&y, &mut g);
        // Backtracking on the quadratic lower model of the concave objective.
        let f_next = loop {
            for ((t, &yj), &gj) in trial.iter_mut().zip(&y).zip(&g) {
                *t = yj + gj / lip;
            }
            project_into(&trial, region, &mut x_next);
            let f_next = spec.objective(&x_next);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for ((&a, &b), &gj) in x_next.iter().zip(&y).zip(&g) {
                let d = a - b;
                lin += gj * d;
                quad += d * d;
            }
            let model = f_y + lin - 0.5 * lip * quad;
            if f_next >= model - 1e-12 * f_y.abs().max(1.0) || quad == 0.0 || !lip.is_finite() {
                break f_next;
            }
            lip *= 2.0;
        };

        // Restart from x when a momentum step lost ground. A plain step from x
        // is always kept; any loss there is rounding.
        if f_next < f_x && momentum > 1.0 {
            y.copy_from_slice(&x);
            momentum = 1.0;
        } else {
            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            for ((yj, &xn), &xo) in y.iter_mut().zip(&x_next).zip(&x) {
                *yj = xn + beta * (xn - xo);
            }
            x.copy_from_slice(&x_next);
            f_x = f_next;
            momentum = next_momentum;
            lip = (lip * 0.9).max(spec.rho);
        }

        residual = residual_with(&x, spec, region, &mut g);
        if residual < best.0 {
            best = (residual, x.clone());
        }
        if residual <= spec.xi {
            return Ok(SubsolverOutcome {
                x,
                residual,
                iterations: iteration,
            });
        }
    }

    Err(SubsolverError {
        voter: spec.voter,
        iterations: cap,
        residual: best.0,
        xi: spec.xi,
        best: best.1,
    })
}

/// Stationary point for approval utilities.
///
/// Optimality reads `x = Π(z - γ/ρ + s·a)` with `s = 1/(ρ(aᵀx + υ))`. Along that
/// ray `aᵀx` is piecewise linear and nondecreasing in `s`, so
/// `h(s) = ρ s (aᵀx(s) + υ) - 1` is strictly increasing and piecewise quadratic.
/// Each step jumps to the root of the current piece's quadratic, safeguarded
/// by a bracket, so the search ends once it lands on the right piece.
fn linear_stationary_point(
    approvals: &[usize],
    spec: &SubproblemSpec<'_, Approvals<'_>>,
    region: &FeasibleRegion,
) -> Vec<f64> {
    let m = region.dim();
    let rho = spec.rho;
    let ups = spec.upsilon_eff();
    let base: Vec<f64> = spec
        .z_prev
        .iter()
        .zip(spec.gamma_prev)
        .map(|(&z, &g)| z - g / rho)
        .collect();
    let mut point = vec![0.0; m];
    if approvals.is_empty() {
        project_into(&base, region, &mut point);
        return point;
    }
    let ray = RayProjection::new(&base, approvals, region);

    // (h(s), aᵀx(s), slope of aᵀx on the piece to the right of s).
    let eval = |s: f64, point: &mut [f64]| -> (f64, f64, f64) {
        let shift = ray.at(s, point);
        let u = linear_utility(approvals, point);
        let open = |j: usize| point[j] > 0.0 && point[j] < region.bounds[j];
        let moving = approvals.iter().filter(|&&j| open(j)).count() as f64;
        let slope = if shift > 0.0 {
            let free = (0..point.len()).filter(|&j| open(j)).count() as f64;
            if free > 0.0 {
                moving * (1.0 - moving / free)
            } else {
                0.0
            }
        } else {
            moving
        };
        (rho * s * (u + ups) - 1.0, u, slope)
    };

    let u_max: f64 = approvals
        .iter()
        .map(|&j| region.bounds[j])
        .sum::<f64>()
        .min(region.total_cap);
    // h <= 0 here since aᵀx <= u_max.
    let mut lo = 1.0 / (rho * (u_max + ups));
    let mut hi = f64::INFINITY;
    // The previous x-update usually sits on or near the right piece.
    let mut s = spec
        .warm_start
        .map_or(lo, |w| (1.0 / (rho * (linear_utility(approvals, w) + ups))).max(lo));
    let mut best = (f64::INFINITY, s);
    for _ in 0..200 {
        let (h, u, slope) = eval(s, &mut point);
        if h.abs() < best.0 {
            best = (h.abs(), s);
        }
        if h.abs() <= 4.0 * f64::EPSILON {
            return point;
        }
        if h < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        // Root of the quadratic that h follows on the current piece.
        let a2 = rho * slope;
        let a1 = rho * (u + ups - slope * s);
        let disc = (a1 * a1 + 4.0 * a2).sqrt();
        let next = if a2 == 0.0 {
            1.0 / a1
        } else if a1 >= 0.0 {
            2.0 / (a1 + disc)
        } else {
            (disc - a1) / (2.0 * a2)
        };
        s = if next > lo && next < hi && next.is_finite() {
            next
        } else if !hi.is_finite() {
            2.0 * lo
        } else if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    eval(best.1, &mut point);
    point
}
