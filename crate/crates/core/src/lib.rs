//! Rank selection for multivariate response regression `Y = XA + E`.
//!
//! The core selector minimizes `‖Y − (PY)_k‖² / (nm − λk)` over `k`, where
//! `P` projects onto the column space of `X` and `(PY)_k` is the rank-k
//! truncated SVD of `PY`. The self-tuning procedures ([`selftune`]) shrink
//! `λ` iteratively from the selected rank itself, so no noise-variance
//! estimate or data splitting is needed.
//!
//! Module map:
//!
//! * [`matrix`]: SVD, projections, truncation.
//! * [`criterion`]: the fixed-`λ` criterion, its closed-form minimizer and diagnostics.
//! * [`moments`]: Monte-Carlo singular-value moments and their CSV cache.
//! * [`selftune`]: STRS, SSTRS and the deterministic-bounds variant.
//! * [`baselines`]: BSW and KF comparators.
//! * [`sim`]: synthetic data generation.
//! * [`harness`]: experiment grids, CSV records, SVG plots.
//! * [`io`]: matrix CSV files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod criterion;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod moments;
pub mod rng;
pub mod selftune;
pub mod sim;

pub use criterion::{select_rank, RankSelection, Spectrum};
pub use error::{Result, RrrError};
pub use matrix::{projection, DataMatrix, ProjectionOp, SvdFactors};
pub use moments::{estimate_moments, MomentsCache, SingularMoments};
pub use selftune::{sstrs, strs, strs_db, SelfTuneTrace, Variant};
pub use sim::{Instance, SimScenario};
