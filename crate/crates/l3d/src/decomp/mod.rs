//! The decomposition engine: Tucker-factored subnetwork bases, batch top-k
//! masking, the norm-ratio reconstruction loss, and the training loop.

pub mod basis;
pub mod loss;
pub mod topk;
pub mod trainer;
pub mod tucker;

use std::fmt;

use crate::models::ModelError;
use crate::numkit::NumError;

pub use basis::SubnetworkBasis;
pub use loss::{
    loss_gradients, masked_loss, masked_loss_gradients, recon_loss, recon_loss_per_sample,
    BasisGrads, RECON_EPS,
};
pub use topk::{batch_topk, TopKMask};
pub use trainer::{
    compute_pact, eval_recon_loss, pair_references, train_l3d, DecompositionConfig, TrainStats,
};
pub use tucker::TuckerTensor;

/// Errors from basis construction and decomposition training.
#[derive(Debug, Clone, PartialEq)]
pub enum DecompError {
    Config(String),
    Shape(String),
    NonFinite(String),
    EmptySelection { k: f64, n_s: usize, n_v: usize },
    ZeroNormSubnetwork(usize),
    Diverged { epoch: usize, loss: f64 },
    Model(ModelError),
    Num(NumError),
}

impl fmt::Display for DecompError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecompError::Config(msg) => write!(f, "invalid decomposition config: {msg}"),
            DecompError::Shape(msg) => write!(f, "shape error: {msg}"),
            DecompError::NonFinite(what) => write!(f, "non-finite values in {what}"),
            DecompError::EmptySelection { k, n_s, n_v } => write!(
                f,
                "top-k selection is empty: k={k} over {n_s}×{n_v} coefficients"
            ),
            DecompError::ZeroNormSubnetwork(k) => {
                write!(f, "subnetwork {k} has a zero-norm out direction")
            }
            DecompError::Diverged { epoch, loss } => {
                write!(f, "decomposition diverged at epoch {epoch} (loss {loss})")
            }
            DecompError::Model(e) => write!(f, "{e}"),
            DecompError::Num(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DecompError {}

impl From<NumError> for DecompError {
    fn from(e: NumError) -> Self {
        DecompError::Num(e)
    }
}

impl From<ModelError> for DecompError {
    fn from(e: ModelError) -> Self {
        DecompError::Model(e)
    }
}
