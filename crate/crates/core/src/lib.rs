//! Shrinkage estimation of mean matrices for the diagonal natural exponential
//! families with quadratic variance functions.
//!
//! Observations `Y` form an `n x p` matrix with `E(Y_ij) = theta_ij` and
//! `Var(Y_ij) = V(theta_ij) / tau_ij`, where `V(t) = nu0 + nu1 t + nu2 t^2`.
//! Two estimator classes are provided:
//!
//! * location shrinkage `(1 - b_i) Y_ij + b_i mu_j`, fitted by minimizing an
//!   unbiased risk estimate (URE) jointly over `b` and `mu`;
//! * grand-mean shrinkage `(1 - b_i) Y_ij + b_i Ybar_j`, fitted by minimizing
//!   the corresponding estimate (AURE) over `b`.
//!
//! In both cases `b` is confined to `[0, 1]` and must not increase the amount
//! of shrinkage for rows with larger total `tau`. The [`harness`] module runs
//! Monte Carlo experiments around these estimators.

pub mod error;
pub mod estimators;
pub mod families;
pub mod harness;
pub mod optimize;
pub mod risk;
pub mod rng;
mod sum;

pub use error::{Error, Result};
pub use estimators::{competitor, fit, shrink_to_grand_mean, shrink_to_location};
pub use estimators::{CompetitorKind, EstimateMatrix, FitMode, Provenance};
pub use families::{make_family, sample_matrix, theoretical_moments, variance_function};
pub use families::{DataMatrix, FamilyKind, FamilySpec, MeanMatrix, TauMatrix};
pub use optimize::{
    grid_oracle_ure, isotonic_box_projection, minimize_aure, minimize_ure, FitResult, OrderSpec,
    SolverOptions, Target,
};
pub use risk::{aure, grand_mean, loss, true_risk, ure, LocationVector, ShrinkageWeights};
