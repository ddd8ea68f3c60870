//! Preferential latent space model for generalized multi-layer networks.
//!
//! A network on `n` nodes carries, for every unordered pair, a stack of
//! binary `K`-vectors (one per document, one coordinate per topic). Edge
//! log odds combine node baselines, sparse nonnegative node-topic
//! preferences and unit-sphere latent positions:
//!
//! ```text
//! Λ_ij^(k) = a_i + a_j + W_ik · W_jk · ⟨u_i, u_j⟩
//! ```
//!
//! The crate covers simulation ([`simulate`]), estimation by projected
//! gradient descent with hard thresholding ([`optim`], started from
//! [`init::initialize_svt`]), edge cross-validation ([`tuning`]),
//! evaluation ([`metrics`]), plain-text file formats ([`io`]) and the
//! replication and link-prediction drivers ([`experiment`]).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod init;
pub mod io;
pub mod likelihood;
pub mod math;
pub mod metrics;
pub mod model;
pub mod network;
pub mod optim;
pub mod simulate;
pub mod tuning;

pub use error::{PlsmError, Result};
pub use init::initialize_svt;
pub use likelihood::{gradients, neg_log_likelihood, Gradients, Observed};
pub use metrics::{
    error_metric_et, precision_recall, procrustes_distance, relative_errors, support_rates,
    ErrorSummary, PrCurve,
};
pub use model::{check_parameter_space, ModelParams, ParameterSpaceCheck};
pub use network::{Cell, MultiEdgeNetwork, NetworkBuilder, ObservationMask};
pub use optim::{
    fit, pgd_step, project_rows_to_sphere, theoretical_steps, truncate, FitConfig, FitReport,
    StepMode, StepSizes,
};
pub use simulate::{gen_network, gen_params, simulate, SimConfig};
pub use tuning::{binomial_deviance, cross_validate, make_folds, CvResult, FoldPlan};
