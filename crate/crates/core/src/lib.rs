//! Differentially private allocation of a divisible public budget.
//!
//! Allocations maximize Nash welfare over the capped simplex by consensus
//! ADMM. The private variant perturbs each global iterate with Gaussian noise
//! calibrated to a Rényi-DP budget, so no single voter can shift the outcome
//! much by misreporting. The noiseless variant is the exact-core baseline.
//!
//! ```
//! use ppga_core::{ppga, privacy::DpRequest, synthetic};
//!
//! let instance = synthetic::two_bloc(200);
//! let dp = DpRequest { epsilon: Some(1.0), delta: Some(0.05), alpha: None, iterations: Some(20) }
//!     .resolve(instance.voters())
//!     .unwrap();
//! let report = ppga::run(&instance, &dp, &Default::default()).unwrap();
//! assert!(instance.feasible_region().contains(&report.allocation, 1e-9));
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod ppga;
pub mod privacy;
pub mod subsolver;
pub mod synthetic;

pub use error::{Error, MetricsError, ModelError, ParseError, ParseErrorKind, PrivacyBudgetError, SubsolverError};
pub use geometry::{max_linear, project, ProjectionResult};
pub use ingest::{cost_utility, parse_pabulib, write_pabulib, RawElection};
pub use metrics::MetricsReport;
pub use model::{FeasibleRegion, Instance};
pub use ppga::{run, run_noiseless, BaselineParams, FailurePolicy, SolverParams, SolverReport};
pub use privacy::{DpParams, DpRequest, PrivacyLedger};
