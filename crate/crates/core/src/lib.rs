//! Elastic-net penalized estimation for models whose per-observation
//! likelihood is an interval probability `R(b) - R(a)` with endpoints affine
//! in the parameter.

// `!(a < b)` is used on purpose: it rejects NaN along with out-of-order values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cv;
pub mod design;
pub mod error;
pub mod family;
pub mod fista;
pub mod inference;
pub mod objective;
pub mod prox_newton;
pub mod sim;
pub mod special;

pub use design::{
    build_cumulative, build_interval_regression, build_survival, Bound, CoordRole, ModelData, ModelKind,
    PenaltySpec, Scale, SurvivalBasis,
};
pub use error::{Error, Result};
pub use family::{ExtReal, IntervalEndpoints, LinkFamily};
pub use fista::fit_fista;
pub use objective::{neg_loglik, neg_loglik_grad, neg_loglik_hess, penalized_obj};
pub use prox_newton::{fit, fit_restricted, FitResult, FitStatus, SolverOptions};
