//! Sentiment classification for Hindi-English code-mixed text.
//!
//! The crate covers the whole pipeline: CoNLL-style corpus I/O, tweet
//! normalization, tf-idf and embedding features, linear and MLP baselines,
//! and a dual-branch character-CNN / word-embedding LSTM classifier, all on
//! top of a small reverse-mode autodiff core written here.
//!
//! Numeric code is generic over [`scalar::Scalar`] (f32 or f64); the aliases
//! below fix f64, which is what the binary and the test suites use.

pub mod autodiff;
pub mod classical;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod neural;
pub mod synthetic;
pub mod preprocess;
pub mod scalar;

pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ParamStore64 = autodiff::ParamStore<f64>;
pub type Optimizer64 = autodiff::Optimizer<f64>;
