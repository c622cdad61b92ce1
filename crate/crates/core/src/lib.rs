//! Collaborative ranking from pairwise comparisons.
//!
//! Each user `k` holds a score vector over items, collected as the rows of a
//! preference matrix `theta`. A query asks user `k` to compare items `l` and
//! `j`; under the Bradley-Terry-Luce model the answer favours `l` with
//! probability `logistic(sqrt(d1 d2) (theta_kl - theta_kj))`. The matrix is
//! estimated by nuclear-norm regularized maximum likelihood over row-centered
//! matrices, solved by proximal gradient descent.
//!
//! Modules:
//!
//! * [`matrix`], [`data`], [`design`]: domain types and the implicit design operator.
//! * [`sampling`]: synthetic low-rank ground truths and comparison draws.
//! * [`loss`]: the averaged logistic loss, its gradient and curvature.
//! * [`optimizer`]: singular value thresholding, constraint projection, the solver.
//! * [`theory`], [`verify`]: the regularization rule, the error bound and
//!   Monte Carlo checks of the events the bound relies on.
//! * [`experiments`], [`metrics`]: the error-scaling simulation and ranking metrics.

pub mod data;
pub mod design;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod optimizer;
pub mod sampling;
pub mod seed;
pub mod theory;
pub mod verify;

pub use data::{ComparisonDataset, ComparisonRecord};
pub use design::{design_adjoint_accumulate, design_inner_product};
pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentResult, ExperimentSpec, LambdaRule, SampleGrid};
pub use loss::{loss_gradient, loss_value, psi, LossEvaluation};
pub use matrix::{row_center, PreferenceMatrix};
pub use metrics::{kendall_tau_per_user, pairwise_accuracy};
pub use optimizer::{fit, project_omega, svt, SolveResult, SolverConfig, StepRule};
pub use sampling::{generate_ground_truth, sample_comparisons, GroundTruthSpec};
pub use theory::{error_bound, error_bound_explicit, lambda_theory, TheoryInputs};
pub use verify::{verify_gradient_opnorm, verify_rsc, GradientCheck, RscCheck, VerificationReport};
