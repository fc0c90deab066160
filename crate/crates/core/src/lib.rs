//! Privacy-preserving learning from Rademacher observations (rados).
//!
//! Peers hold vertically or horizontally partitioned examples. They turn them
//! into rados, encrypt them under a coordinator's Paillier key, and fit a
//! linear classifier with a square loss over the aggregate. All of this runs
//! over a simulated message bus whose transcript can be audited.
//!
//! The plaintext layers (rados, learners, linear algebra) are generic over
//! [`Scalar`]. The aliases below fix the common instantiations.

pub mod harness;
pub mod learners;
pub mod linalg;
pub mod netproto;
pub mod paillier;
pub mod rado;
pub mod scalar;
pub mod secmath;
pub mod textfeat;

pub use num_rational::BigRational;
pub use scalar::{Real, Scalar};

pub type Dataset32 = rado::Dataset<f32>;
pub type Dataset64 = rado::Dataset<f64>;
/// Exact arithmetic, for checking the floating-point paths.
pub type DatasetQ = rado::Dataset<BigRational>;

pub type Rado32 = rado::Rado<f32>;
pub type Rado64 = rado::Rado<f64>;
pub type RadoQ = rado::Rado<BigRational>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type MatrixQ = linalg::Matrix<BigRational>;

pub type Classifier32 = learners::Classifier<f32>;
pub type Classifier64 = learners::Classifier<f64>;
pub type ClassifierQ = learners::Classifier<BigRational>;
