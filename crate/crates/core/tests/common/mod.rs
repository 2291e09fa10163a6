//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the solver paths it checks.

#![allow(dead_code)]

use ppga_core::Instance;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURES}/{name}")).expect("fixture readable")
}

/// Euclidean projection onto `{0 <= z <= b, Σz <= 1}` by enumerating every
/// assignment of coordinates to {lower, free, upper} with the sum constraint
/// either slack or tight, keeping the first pattern that satisfies KKT.
pub fn project_by_active_sets(v: &[f64], b: &[f64]) -> Vec<f64> {
    let m = v.len();
    let tol = 1e-12;
    let patterns = 3usize.pow(m as u32);
    for tight in [false, true] {
        for code in 0..patterns {
            let mut state = vec![0u8; m];
            let mut c = code;
            for s in state.iter_mut() {
                *s = (c % 3) as u8;
                c /= 3;
            }
            let free: Vec<usize> = (0..m).filter(|&j| state[j] == 1).collect();
            let upper_total: f64 = (0..m).filter(|&j| state[j] == 2).map(|j| b[j]).sum();
            let tau = if !tight {
                0.0
            } else if free.is_empty() {
                // Any admissible multiplier works; take the smallest one the
                // lower and upper sets allow and check the rest against it.
                if (upper_total - 1.0).abs() > tol {
                    continue;
                }
                let lo = (0..m).filter(|&j| state[j] == 0).map(|j| v[j]).fold(0.0_f64, f64::max);
                let hi = (0..m)
                    .filter(|&j| state[j] == 2)
                    .map(|j| v[j] - b[j])
                    .fold(f64::INFINITY, f64::min);
                if lo > hi + tol {
                    continue;
                }
                lo
            } else {
                let t = (free.iter().map(|&j| v[j]).sum::<f64>() + upper_total - 1.0) / free.len() as f64;
                if t < -tol {
                    continue;
                }
                t
            };
            let z: Vec<f64> = (0..m)
                .map(|j| match state[j] {
                    0 => 0.0,
                    1 => v[j] - tau,
                    _ => b[j],
                })
                .collect();
            let ok = (0..m).all(|j| match state[j] {
                0 => v[j] - tau <= tol,
                1 => z[j] >= -tol && z[j] <= b[j] + tol,
                _ => v[j] - tau >= b[j] - tol,
            });
            let total: f64 = z.iter().sum();
            let sum_ok = if tight {
                (total - 1.0).abs() <= 1e-10
            } else {
                total <= 1.0 + tol
            };
            if ok && sum_ok {
                return z;
            }
        }
    }
    panic!("no KKT pattern found for {v:?}");
}

/// Maximum of `wᵀz` over the vertices of `{0 <= z <= b, Σz <= 1}`: a subset
/// at its caps plus at most one fractional coordinate filling the remaining mass.
pub fn max_linear_by_vertices(w: &[f64], b: &[f64]) -> f64 {
    let m = w.len();
    let mut best = 0.0_f64;
    for mask in 0u32..(1 << m) {
        let used: f64 = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| b[j]).sum();
        if used > 1.0 + 1e-12 {
            continue;
        }
        let base: f64 = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| w[j] * b[j]).sum();
        best = best.max(base);
        for j in (0..m).filter(|j| mask >> j & 1 == 0) {
            let room = (1.0 - used).min(b[j]).max(0.0);
            best = best.max(base + w[j] * room);
        }
    }
    best
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut c = lo + g * (hi - lo);
    let (mut fa, mut fc) = (f(a), f(c));
    for _ in 0..200 {
        if fa < fc {
            lo = a;
            a = c;
            fa = fc;
            c = lo + g * (hi - lo);
            fc = f(c);
        } else {
            hi = c;
            c = a;
            fc = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

/// Grid scan then golden-section refinement.
pub fn grid_refine_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> (f64, f64) {
    let h = (hi - lo) / cells as f64;
    let best = (0..=cells)
        .map(|i| lo + h * i as f64)
        .max_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap_or(std::cmp::Ordering::Less))
        .expect("non-empty grid");
    golden_max(&f, (best - h).max(lo), (best + h).min(hi))
}

/// Sum of `ln U_i(z)` over voters with a non-empty ballot, written out directly.
pub fn log_welfare(approvals: &[Vec<usize>], z: &[f64]) -> f64 {
    approvals
        .iter()
        .filter(|a| !a.is_empty())
        .map(|a| a.iter().map(|&j| z[j]).sum::<f64>().ln())
        .sum()
}

/// Projection used by [`central_mnw`]: bisection on the sum multiplier.
fn project_bisect(v: &[f64], b: &[f64]) -> Vec<f64> {
    let clip = |t: f64| -> Vec<f64> { v.iter().zip(b).map(|(&x, &c)| (x - t).clamp(0.0, c)).collect() };
    let z0 = clip(0.0);
    if z0.iter().sum::<f64>() <= 1.0 {
        return z0;
    }
    let (mut lo, mut hi) = (0.0, v.iter().cloned().fold(f64::MIN, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(hi)
}

/// Centralized maximizer of `Σ ln U_i(z)` by projected gradient ascent with
/// backtracking. Slow but simple; used to judge the distributed solvers.
pub fn central_mnw(instance: &Instance, iterations: usize) -> Vec<f64> {
    let mut ballots: Vec<Vec<usize>> = instance
        .all_approvals()
        .iter()
        .filter(|a| !a.is_empty())
        .cloned()
        .collect();
    ballots.sort();
    let mut grouped: Vec<(Vec<usize>, f64)> = Vec::new();
    for a in ballots {
        match grouped.last_mut() {
            Some((prev, w)) if *prev == a => *w += 1.0,
            _ => grouped.push((a, 1.0)),
        }
    }
    let b = instance.feasible_region().bounds.clone();
    let m = b.len();
    let value = |z: &[f64]| -> f64 {
        grouped
            .iter()
            .map(|(a, w)| w * a.iter().map(|&j| z[j]).sum::<f64>().ln())
            .sum()
    };
    let mut z = project_bisect(&vec![1.0 / m as f64; m], &b);
    let mut step = 1e-6;
    for _ in 0..iterations {
        let mut g = vec![0.0; m];
        for (a, w) in &grouped {
            let u: f64 = a.iter().map(|&j| z[j]).sum();
            for &j in a {
                g[j] += w / u;
            }
        }
        let fz = value(&z);
        loop {
            let trial: Vec<f64> = z.iter().zip(&g).map(|(a, d)| a + step * d).collect();
            let next = project_bisect(&trial, &b);
            let fnext = value(&next);
            let lin: f64 = next.iter().zip(&z).zip(&g).map(|((a, c), d)| (a - c) * d).sum();
            let quad: f64 = next.iter().zip(&z).map(|(a, c)| (a - c) * (a - c)).sum();
            if fnext.is_finite() && fnext >= fz + lin - quad / (2.0 * step) {
                z = next;
                step *= 1.2;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return z;
            }
        }
    }
    z
}

/// `(1/n) Σ_i U_i(z') / U_i(z)` maximized over `z'` by vertex enumeration.
/// Only for small `m`.
pub fn core_ratio_by_vertices(instance: &Instance, z: &[f64]) -> f64 {
    let n = instance.voters() as f64;
    let mut w = vec![0.0; z.len()];
    for a in instance.all_approvals() {
        let u: f64 = a.iter().map(|&j| z[j]).sum();
        for &j in a {
            w[j] += 1.0 / (n * u);
        }
    }
    max_linear_by_vertices(&w, &instance.feasible_region().bounds)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
