//! From-scratch reverse-mode automatic differentiation.
//!
//! The op set is exactly what the models in this crate need: elementwise
//! arithmetic and activations, matrix products, column gather/stack, 1-d
//! convolution with "same" padding, max-over-time pooling, softmax and
//! cross-entropy. Gradients for every op are covered by finite-difference
//! checks in [`gradcheck`] and in the acceptance suite.

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{
    load_into_store, parse_checkpoint, read_checkpoint, render_checkpoint, write_checkpoint,
    Checkpoint, CheckpointError, CHECKPOINT_MAGIC,
};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Init, ParamId, ParamStore};
pub use tape::{Tape, Var, CROSS_ENTROPY_FLOOR};
pub use tensor::Tensor;
