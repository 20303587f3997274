//! Minimal dense numerical core: tensors, a seeded generator, AdamW,
//! n-mode products, and the finite-difference oracle.

pub mod adamw;
pub mod gradcheck;
pub mod rng;
pub mod tensor;

pub use adamw::{AdamW, AdamWParams};
pub use gradcheck::{finite_diff_grad, rel_error, DEFAULT_REL_STEP};
pub use rng::RngState;
pub use tensor::{matmul, n_mode_product, transpose, NumError, Tensor};
