//! Maximum-likelihood multidimensional analysis of multivariate ordinal
//! responses under cumulative-logit (proportional odds) models.
//!
//! Four model families are supported, crossing the response process
//! (dominance: inner products, proximity: distances) with the presence of
//! predictor variables:
//!
//! | model  | structural part                 | predictors |
//! |--------|---------------------------------|------------|
//! | CLPCA  | `θ_ir = <u_i, v_r>`             | no         |
//! | CLRRR  | `θ_ir = <B'x_i, v_r>`           | yes        |
//! | CLMDU  | `θ_ir = -d(u_i, v_r)`           | no         |
//! | CLRMDU | `θ_ir = -d(B'x_i, v_r)`         | yes        |
//!
//! All four are estimated by the same expectation / majorization /
//! minimization loop ([`driver::fit`]): a closed-form E-step turns the
//! observed data into working responses ([`loglik`]), the majorizing least
//! squares problem is solved by an SVD ([`bilinear`]) or SMACOF
//! ([`unfolding`]), and thresholds are refit by Newton's method
//! ([`thresholds`]).

pub mod biplot;
pub mod bilinear;
pub mod data;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod loglik;
pub mod rng;
pub mod simulate;
pub mod thresholds;
pub mod unfolding;

pub use data::{
    encode_predictors, load_ordinal, load_predictors, read_ordinal, save_ordinal, validate, ColumnKind,
    ModelConfig, ModelKind, OrdinalDataset, PredictorMatrix, ValidationReport,
};
pub use driver::{fit, FitResult};
pub use error::{Error, Result};
pub use loglik::ThresholdVector;

/// Library version embedded into every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
