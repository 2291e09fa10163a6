//! Elections with approval ballots, linear utilities, and the capped-simplex
//! feasible region.
//!
//! An allocation `z` assigns each project a fraction of the total capacity.
//! It is feasible when `0 <= z_j <= min(1, s_j / c)` for every project and
//! `sum_j z_j <= 1`. Voter `i` has utility `U_i(z) = sum_{j in P_i} z_j` where
//! `P_i` is the set of projects the voter approves.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Optional human-readable identifiers carried through from the input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub projects: Vec<String>,
    pub voters: Vec<String>,
}

/// A divisible public-goods instance with approval (0/1) utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    sizes: Vec<f64>,
    capacity: f64,
    approvals: Vec<Vec<usize>>,
    region: FeasibleRegion,
    labels: Option<Labels>,
}

impl Instance {
    /// Builds an instance. Approval lists are sorted and deduplicated.
    pub fn new(sizes: Vec<f64>, capacity: f64, approvals: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        let m = sizes.len();
        if approvals.is_empty() || m == 0 {
            return Err(ModelError::Empty {
                voters: approvals.len(),
                projects: m,
            });
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(ModelError::BadCapacity(capacity));
        }
        for (project, &size) in sizes.iter().enumerate() {
            if !(size.is_finite() && size > 0.0) {
                return Err(ModelError::BadSize { project, size });
            }
        }
        let mut approvals = approvals;
        for (voter, set) in approvals.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&project) = set.last() {
                if project >= m {
                    return Err(ModelError::ApprovalOutOfRange {
                        voter,
                        project,
                        projects: m,
                    });
                }
            }
        }
        let region = FeasibleRegion::from_sizes(&sizes, capacity);
        Ok(Self {
            sizes,
            capacity,
            approvals,
            region,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = Some(labels);
        self
    }

    /// Number of voters `n`.
    pub fn voters(&self) -> usize {
        self.approvals.len()
    }

    /// Number of projects `m`.
    pub fn projects(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn approvals(&self, voter: usize) -> Result<&[usize], ModelError> {
        self.approvals
            .get(voter)
            .map(Vec::as_slice)
            .ok_or(ModelError::VoterOutOfRange {
                voter,
                voters: self.voters(),
            })
    }

    pub fn all_approvals(&self) -> &[Vec<usize>] {
        &self.approvals
    }

    pub fn feasible_region(&self) -> &FeasibleRegion {
        &self.region
    }

    /// `U_i(z)`: sum of the approved coordinates of `z`.
    pub fn utility(&self, voter: usize, z: &[f64]) -> Result<f64, ModelError> {
        self.check_len(z)?;
        Ok(linear_utility(self.approvals(voter)?, z))
    }

    /// Exact maximum of `U_i` over the feasible region: approved caps summed,
    /// truncated at the total cap of 1.
    pub fn max_utility(&self, voter: usize) -> Result<f64, ModelError> {
        let set = self.approvals(voter)?;
        let caps: f64 = set.iter().map(|&j| self.region.bounds[j]).sum();
        Ok(caps.min(self.region.total_cap))
    }

    /// Voters whose approval set is empty and therefore have `U_i = 0` everywhere.
    pub fn excluded_voters(&self) -> usize {
        self.approvals.iter().filter(|a| a.is_empty()).count()
    }

    pub(crate) fn check_len(&self, z: &[f64]) -> Result<(), ModelError> {
        if z.len() != self.projects() {
            return Err(ModelError::DimensionMismatch {
                expected: self.projects(),
                got: z.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn linear_utility(approvals: &[usize], z: &[f64]) -> f64 {
    approvals.iter().map(|&j| z[j]).sum()
}

/// `{ z : 0 <= z_j <= b_j, sum_j z_j <= total_cap }` with `b_j = min(1, s_j / c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub bounds: Vec<f64>,
    pub total_cap: f64,
}

impl FeasibleRegion {
    pub fn from_sizes(sizes: &[f64], capacity: f64) -> Self {
        Self {
            bounds: sizes.iter().map(|&s| (s / capacity).min(1.0)).collect(),
            total_cap: 1.0,
        }
    }

    /// Region with explicit per-coordinate caps. Caps must lie in `(0, 1]`.
    pub fn with_bounds(bounds: Vec<f64>) -> Self {
        debug_assert!(bounds.iter().all(|&b| b > 0.0 && b <= 1.0));
        Self { bounds, total_cap: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Membership with absolute slack `tol` on every constraint.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim()
            && z.iter().zip(&self.bounds).all(|(&v, &b)| v >= -tol && v <= b + tol)
            && z.iter().sum::<f64>() <= self.total_cap + tol
    }
}
