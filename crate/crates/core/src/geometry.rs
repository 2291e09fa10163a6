//! Euclidean projection onto the feasible region and exact linear maximization
//! over it.

use std::cmp::Ordering;

use crate::error::ModelError;
use crate::model::FeasibleRegion;

const TOL: f64 = 1e-12;

/// Outcome of [`project`], with the active sets of the KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Coordinates clamped at their cap `b_j`.
    pub active_upper: Vec<usize>,
    /// Coordinates clamped at zero.
    pub active_lower: Vec<usize>,
    /// Whether the total-cap constraint binds.
    pub simplex_active: bool,
    /// Optimal multiplier `tau >= 0` of the total-cap constraint;
    /// `point_j = clamp(v_j - tau, 0, b_j)`.
    pub shift: f64,
}

/// Projects `v` onto `{0 <= z <= b, sum z <= 1}`.
///
/// The solution is `clamp(v - tau, 0, b)` for the smallest `tau >= 0` that makes
/// the total feasible. `tau` is found by sweeping the sorted breakpoints
/// `{v_j - b_j, v_j}` of the piecewise-linear total.
pub fn project(v: &[f64], region: &FeasibleRegion) -> Result<ProjectionResult, ModelError> {
    if v.len() != region.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: region.dim(),
            got: v.len(),
        });
    }
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite(j));
    }
    let shift = projection_shift(v, region);
    let mut point = Vec::with_capacity(v.len());
    let mut active_upper = Vec::new();
    let mut active_lower = Vec::new();
    for (j, (&vj, &bj)) in v.iter().zip(&region.bounds).enumerate() {
        let t = vj - shift;
        if t >= bj {
            active_upper.push(j);
            point.push(bj);
        } else if t <= 0.0 {
            active_lower.push(j);
            point.push(0.0);
        } else {
            point.push(t);
        }
    }
    Ok(ProjectionResult {
        point,
        active_upper,
        active_lower,
        simplex_active: shift > 0.0,
        shift,
    })
}

/// Projection without the active-set bookkeeping; writes into `out`.
///
/// Inputs must be finite and of matching length (checked in debug builds only).
pub fn project_into(v: &[f64], region: &FeasibleRegion, out: &mut [f64]) {
    debug_assert_eq!(v.len(), region.dim());
    debug_assert_eq!(out.len(), region.dim());
    project_with_shift(v, region, out);
}

/// [`project_into`] that also returns the total-cap multiplier.
pub(crate) fn project_with_shift(v: &[f64], region: &FeasibleRegion, out: &mut [f64]) -> f64 {
    let shift = projection_shift(v, region);
    for ((o, &vj), &bj) in out.iter_mut().zip(v).zip(&region.bounds) {
        *o = (vj - shift).clamp(0.0, bj);
    }
    shift
}

/// Convenience wrapper returning a fresh vector.
pub fn project_point(v: &[f64], region: &FeasibleRegion) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    project_into(v, region, &mut out);
    out
}

fn projection_shift(v: &[f64], region: &FeasibleRegion) -> f64 {
    let bounds = &region.bounds;
    let cap = region.total_cap;
    let clamped: f64 = v.iter().zip(bounds).map(|(&x, &b)| x.clamp(0.0, b)).sum();
    if clamped <= cap {
        return 0.0;
    }

    // Total at shift tau: S(tau) = upper_sum + mid_sum - tau * mid_count.
    let mut upper_sum = 0.0;
    let mut mid_sum = 0.0;
    let mut mid_count = 0usize;
    // (tau, coordinate, leaves_upper)
    let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * v.len());
    for (j, (&x, &b)) in v.iter().zip(bounds).enumerate() {
        if x <= 0.0 {
            continue;
        }
        if x - b > 0.0 {
            upper_sum += b;
            events.push((x - b, j, true));
        } else {
            mid_sum += x;
            mid_count += 1;
        }
        events.push((x, j, false));
    }
    events.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(b.2.cmp(&a.2))
    });

    for &(tau, j, leaves_upper) in &events {
        let total = upper_sum + mid_sum - tau * mid_count as f64;
        if total <= cap && mid_count > 0 {
            return ((upper_sum + mid_sum - cap) / mid_count as f64).max(0.0);
        }
        if leaves_upper {
            upper_sum -= bounds[j];
            mid_sum += v[j];
            mid_count += 1;
        } else {
            mid_sum -= v[j];
            mid_count -= 1;
        }
    }
    // Unreachable for finite input: S reaches 0 < cap at the last breakpoint.
    if mid_count > 0 {
        ((upper_sum + mid_sum - cap) / mid_count as f64).max(0.0)
    } else {
        events.last().map_or(0.0, |e| e.0)
    }
}

/// Projections of the ray `base + s·1_D` for a fixed direction set `D`.
///
/// Breakpoints of coordinates outside `D` do not move with `s`, and those in
/// `D` all move by `s`, so both lists are sorted once and merged per query.
pub(crate) struct RayProjection<'a> {
    base: &'a [f64],
    region: &'a FeasibleRegion,
    in_dir: Vec<bool>,
    /// (breakpoint, coordinate, leaves_upper), sorted.
    fixed: Vec<(f64, usize, bool)>,
    moving: Vec<(f64, usize, bool)>,
}

fn sort_events(events: &mut [(f64, usize, bool)]) {
    events.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(b.2.cmp(&a.2))
    });
}

impl<'a> RayProjection<'a> {
    pub(crate) fn new(base: &'a [f64], dir: &[usize], region: &'a FeasibleRegion) -> Self {
        let mut in_dir = vec![false; base.len()];
        for &j in dir {
            in_dir[j] = true;
        }
        let mut fixed = Vec::with_capacity(2 * base.len());
        let mut moving = Vec::with_capacity(2 * dir.len());
        for (j, (&v, &b)) in base.iter().zip(&region.bounds).enumerate() {
            let list = if in_dir[j] { &mut moving } else { &mut fixed };
            list.push((v - b, j, true));
            list.push((v, j, false));
        }
        sort_events(&mut fixed);
        sort_events(&mut moving);
        Self {
            base,
            region,
            in_dir,
            fixed,
            moving,
        }
    }

    fn value(&self, j: usize, s: f64) -> f64 {
        if self.in_dir[j] {
            self.base[j] + s
        } else {
            self.base[j]
        }
    }

    /// Writes `Π(base + s·1_D)` into `out` and returns the total-cap multiplier.
    pub(crate) fn at(&self, s: f64, out: &mut [f64]) -> f64 {
        let bounds = &self.region.bounds;
        let cap = self.region.total_cap;
        let (mut upper_sum, mut mid_sum, mut mid_count) = (0.0, 0.0, 0usize);
        // Classify with the same arithmetic as the event keys so a coordinate
        // never leaves a set it was not counted in.
        for (j, &b) in bounds.iter().enumerate() {
            let (up, zero) = if self.in_dir[j] {
                ((self.base[j] - b) + s, self.base[j] + s)
            } else {
                (self.base[j] - b, self.base[j])
            };
            if up > 0.0 {
                upper_sum += b;
            } else if zero > 0.0 {
                mid_sum += zero;
                mid_count += 1;
            }
        }
        let mut shift = 0.0;
        if upper_sum + mid_sum > cap {
            // State at tau = 0 is already counted; walk the positive breakpoints.
            let fixed = self.fixed.iter().map(|&(t, j, up)| (t, j, up));
            let moving = self.moving.iter().map(|&(t, j, up)| (t + s, j, up));
            let mut fixed = fixed.filter(|e| e.0 > 0.0).peekable();
            let mut moving = moving.filter(|e| e.0 > 0.0).peekable();
            shift = loop {
                let next = match (fixed.peek(), moving.peek()) {
                    (Some(a), Some(b)) => {
                        if a.0 <= b.0 {
                            fixed.next()
                        } else {
                            moving.next()
                        }
                    }
                    (Some(_), None) => fixed.next(),
                    (None, Some(_)) => moving.next(),
                    (None, None) => None,
                };
                let Some((tau, j, leaves_upper)) = next else {
                    break if mid_count > 0 {
                        ((upper_sum + mid_sum - cap) / mid_count as f64).max(0.0)
                    } else {
                        0.0
                    };
                };
                let total = upper_sum + mid_sum - tau * mid_count as f64;
                if total <= cap && mid_count > 0 {
                    break ((upper_sum + mid_sum - cap) / mid_count as f64).max(0.0);
                }
                let v = self.value(j, s);
                if leaves_upper {
                    upper_sum -= bounds[j];
                    mid_sum += v;
                    mid_count += 1;
                } else {
                    mid_sum -= v;
                    mid_count -= 1;
                }
            };
        }
        for (j, (o, &b)) in out.iter_mut().zip(bounds).enumerate() {
            *o = (self.value(j, s) - shift).clamp(0.0, b);
        }
        shift
    }
}

/// Exact maximizer of `w^T z` over the region.
///
/// Greedy fill: coordinates in descending weight (ties to the lower index),
/// each raised to its cap until the total cap is used up. Non-positive weights
/// get zero.
pub fn max_linear(w: &[f64], region: &FeasibleRegion) -> (Vec<f64>, f64) {
    let mut z = vec![0.0; w.len()];
    let value = max_linear_into(w, region, &mut z);
    (z, value)
}

pub(crate) fn max_linear_into(w: &[f64], region: &FeasibleRegion, z: &mut [f64]) -> f64 {
    z.iter_mut().for_each(|x| *x = 0.0);
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut remaining = region.total_cap;
    let mut value = 0.0;
    for j in order {
        if remaining <= TOL {
            break;
        }
        let take = region.bounds[j].min(remaining);
        z[j] = take;
        value += w[j] * take;
        remaining -= take;
    }
    value
}

/// Value of the linear maximization only.
pub fn max_linear_value(w: &[f64], region: &FeasibleRegion) -> f64 {
    let mut order: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut remaining = region.total_cap;
    let mut value = 0.0;
    for j in order {
        if remaining <= TOL {
            break;
        }
        let take = region.bounds[j].min(remaining);
        value += w[j] * take;
        remaining -= take;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(b: &[f64]) -> FeasibleRegion {
        FeasibleRegion::with_bounds(b.to_vec())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn feasible_points_are_fixed() {
        let r = region(&[0.5, 1.0, 0.3]);
        let v = [0.2, 0.4, 0.1];
        let p = project(&v, &r).unwrap();
        assert_eq!(p.point, v.to_vec());
        assert_eq!(p.shift, 0.0);
        assert!(!p.simplex_active);
    }

    #[test]
    fn ray_projection_matches_direct() {
        let r = region(&[0.3, 0.8, 0.25, 0.6, 1.0]);
        let base = [0.4, -0.2, 0.1, 0.9, -1.0];
        let dir = [1, 2, 4];
        let ray = RayProjection::new(&base, &dir, &r);
        let mut got = vec![0.0; 5];
        for s in [-2.0, -0.3, 0.0, 0.05, 0.2, 0.7, 1.1, 3.0] {
            let mut v = base.to_vec();
            for &j in &dir {
                v[j] += s;
            }
            let want = project(&v, &r).unwrap();
            let shift = ray.at(s, &mut got);
            assert!(close(&got, &want.point, 1e-14), "s={s}: {got:?} vs {:?}", want.point);
            assert!((shift - want.shift).abs() < 1e-14);
        }
    }

    #[test]
    fn ray_projection_handles_ties_at_bounds() {
        // Coordinates sitting exactly on a bound or on zero, before and after the shift.
        let r = region(&[0.3, 0.5, 0.25, 0.6]);
        let base = [0.3, 0.0, 0.25, 0.1];
        let dir = [0, 1, 3];
        let ray = RayProjection::new(&base, &dir, &r);
        let mut got = vec![0.0; 4];
        for s in [0.0, 0.5, 0.2, -0.1, 0.1 + 0.2, 0.4] {
            let mut v = base.to_vec();
            for &j in &dir {
                v[j] += s;
            }
            let want = project(&v, &r).unwrap();
            ray.at(s, &mut got);
            assert!(close(&got, &want.point, 1e-14), "s={s}: {got:?} vs {:?}", want.point);
        }
    }

    #[test]
    fn symmetric_split() {
        let p = project(&[2.0, 2.0], &region(&[1.0, 1.0])).unwrap();
        assert!(close(&p.point, &[0.5, 0.5], 1e-15));
        assert!((p.shift - 1.5).abs() < 1e-15);
        assert!(p.simplex_active);
    }

    #[test]
    fn three_coordinate_example() {
        // Frozen from active-set enumeration: tau = 0.2, coordinate 2 at its lower bound.
        let p = project(&[0.9, 0.5, 0.1], &region(&[1.0, 1.0, 1.0])).unwrap();
        assert!(close(&p.point, &[0.7, 0.3, 0.0], 1e-15), "{:?}", p.point);
        assert_eq!(p.active_lower, vec![2]);
        assert!(p.active_upper.is_empty());
        assert!((p.shift - 0.2).abs() < 1e-15);
    }

    #[test]
    fn box_only_clamp() {
        let p = project(&[-1.0, 0.2, 5.0], &region(&[0.5, 0.5, 0.1])).unwrap();
        assert_eq!(p.point, vec![0.0, 0.2, 0.1]);
        assert_eq!(p.active_lower, vec![0]);
        assert_eq!(p.active_upper, vec![2]);
        assert_eq!(p.shift, 0.0);
    }

    #[test]
    fn caps_and_sum_bind_together() {
        // Coordinate 0 stays capped; the other two share 0.7 at tau = 0.55.
        let r = region(&[0.3, 1.0, 1.0]);
        let p = project(&[3.0, 1.0, 0.8], &r).unwrap();
        let s: f64 = p.point.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(p.active_upper, vec![0]);
        for j in 1..3 {
            let want = ([3.0, 1.0, 0.8][j] - p.shift).clamp(0.0, r.bounds[j]);
            assert!((p.point[j] - want).abs() < 1e-15);
        }
        assert!(close(&p.point, &[0.3, 0.45, 0.25], 1e-12), "{:?}", p.point);
    }

    #[test]
    fn rejects_non_finite() {
        let r = region(&[1.0, 1.0]);
        assert_eq!(project(&[0.0, f64::NAN], &r).unwrap_err(), ModelError::NonFinite(1));
        assert!(matches!(project(&[0.0], &r), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn max_linear_examples() {
        // Frozen from vertex enumeration at m = 3.
        let (z, v) = max_linear(&[3.0, 1.0, 2.0], &region(&[0.6, 1.0, 0.5]));
        assert!(close(&z, &[0.6, 0.0, 0.4], 1e-15));
        assert!((v - 2.6).abs() < 1e-12);

        let (z, v) = max_linear(&[-1.0, -2.0], &region(&[0.4, 0.9]));
        assert_eq!(z, vec![0.0, 0.0]);
        assert_eq!(v, 0.0);

        let (z, v) = max_linear(&[5.0], &region(&[0.3]));
        assert_eq!(z, vec![0.3]);
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn max_linear_ties_prefer_lower_index() {
        let (z, _) = max_linear(&[1.0, 1.0, 1.0], &region(&[0.6, 0.6, 0.6]));
        assert!(close(&z, &[0.6, 0.4, 0.0], 1e-15));
        assert_eq!(max_linear_value(&[1.0, 1.0, 1.0], &region(&[0.6, 0.6, 0.6])), 1.0);
    }
}
