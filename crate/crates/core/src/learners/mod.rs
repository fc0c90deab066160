//! Losses and solvers for rado-based linear classifiers.
//!
//! [`exponential`] holds the iterative learners (the exponential rado loss
//! and the logistic baseline). [`closed`] holds the square-loss family whose
//! minimizer has a closed form and therefore survives encryption: the M-loss,
//! the stacked-rado ridge solution, its per-peer decomposition, and the
//! encrypted solver built on the secure linear algebra.

mod closed;
mod exponential;
mod model;

pub use closed::{
    closed_form_objective, closed_form_theta, derisked_theta, m_loss, peer_stats, rado_center, secure_rado_solver,
    CenterMode, PeerStats,
};
pub use exponential::{
    exp_rado_loss, fit_gradient_descent, fit_logistic, grad_exp_rado_loss, logistic_gradient, logistic_loss,
    GradientConfig, LossReport,
};
pub use model::{predict, Classifier, ClassifierMeta, Regularizer};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::rado::RadoError;
use crate::secmath::SecError;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("at least one rado is required")]
    NoRados,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("loss increased after {depth} step halvings at iteration {iteration}")]
    Diverged { iteration: usize, depth: usize },
    #[error("regularization weight must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Rado(#[from] RadoError),
    #[error(transparent)]
    Secure(#[from] SecError),
    #[error("{0}")]
    Io(String),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), LearnError> {
    if expected != got {
        return Err(LearnError::Dimension { expected, got });
    }
    Ok(())
}
