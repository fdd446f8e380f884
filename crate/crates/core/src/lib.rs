//! Variance lower bounds for estimation in the sparse linear model
//! `y = H x + n`, `||x||_0 <= S`, `n ~ N(0, sigma^2 I)`.
//!
//! Indices are 0-based throughout the library; user-facing output is 1-based.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod mean;
pub mod model;
pub mod montecarlo;
pub mod normal;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod sweep;

pub use bounds::{
    bound_l_k, bound_l_star, crb_lgm, crb_restricted, ssnm_s1_estimator_bound, ssnm_unbiased_bound, theorem_bound,
    BoundConfig, BoundResult, SupportSearch, TheoremBound,
};
pub use error::{Error, Result};
pub use estimators::Estimator;
pub use linalg::{Matrix, Vector};
pub use mean::{MeanFunction, MeanKind, MlMeanMethod, QuadratureConfig};
pub use model::{LinearGaussianModel, SparseLinearModel, SparseVector, SupportSet};
pub use oracle::{finite_point_bound, grid_points, OracleResult, TestPointSet};
pub use montecarlo::{estimate_mean_function, simulate, EstimatorStats, ObservationModel, SimulationSpec};
