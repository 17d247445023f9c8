//! Locally induced Gaussian-process prediction for large simulation
//! datasets.
//!
//! The model conditions each prediction site on a nearest-neighbor subset of
//! the training data and compresses that neighborhood through a small set of
//! inducing points, so every per-site fit costs O(m²n) with m ≪ n ≪ N.
//! Inducing points are placed either by greedy minimization of a closed-form
//! weighted integrated variance criterion (with analytic gradients), or by
//! displaceable templates: a one-off greedy design, a rescaled Latin
//! hypercube, or a Gaussian-quantile-warped Latin hypercube.
//!
//! Module map:
//! - [`kernel`]: squared-exponential kernel, hyperparameter config, domains.
//! - [`induced`]: Nyström/Woodbury state, likelihood, prediction, O(m²n)
//!   sequential updates.
//! - [`mle`]: local lengthscale estimation.
//! - [`criteria`]: weighted/unweighted integrated variance criteria, their
//!   gradients, and discrete variance-reduction criteria.
//! - [`design`]: neighborhoods, space-filling generators, greedy designs and
//!   templates.
//! - [`fullgp`]: dense GP fits (local comparators, pre-scaling).
//! - [`predictor`]: batched prediction pipelines.
//! - [`bench`]: benchmark functions, metrics, experiment runner.
//! - [`validate`]: self-check suites pitting closed forms against quadrature,
//!   finite differences, and dense linear algebra.

pub mod bench;
pub mod cli;
pub mod criteria;
pub mod design;
mod error;
pub mod fullgp;
pub mod induced;
pub mod kdtree;
pub mod kernel;
mod linalg;
pub mod mle;
pub mod optim;
pub mod predictor;
pub mod quad;
pub mod validate;

pub use error::{LigpError, Result};
pub use induced::{
    build_state, neg_conc_loglik, nu_hat, predict, update_add_inducing, InducedState,
    PredictiveMoments, UpdateWorkspace,
};
pub use kernel::{cross_kernel_matrix, kernel, Domain, KernelConfig};
