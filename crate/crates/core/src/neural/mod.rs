//! Dual-branch neural sentiment classifier.
//!
//! [`chars`] builds per-token columns from characters (embedding, multi-width
//! convolution, max-over-time pooling); [`lstm`] holds the recurrent layer;
//! [`model`] assembles both branches, the dense head and checkpointing;
//! [`train`] runs the Adam loop with gradient clipping and early stopping;
//! [`grid`] searches hyperparameter combinations in parallel.

pub mod chars;
pub mod grid;
pub mod lstm;
pub mod model;
pub mod train;

pub use chars::{filters_for, CharCnnConfig, CharVocab, DEFAULT_CHAR_EMB_DIM, DEFAULT_FILTER_WIDTHS};
pub use grid::{grid_search, GridCell, GridOutcome, GridSpace};
pub use lstm::{LstmLayer, PlacedLstm, LSTM_HIDDEN};
pub use model::{Branch, BranchConfig, NeuralError, SsLstmConfig, SsLstmModel};
pub use train::{train_neural, NeuralEpoch, NeuralTrainConfig, TrainedNeural};
