//! Local loss landscape decomposition for toy MLPs.
//!
//! Learns low-rank parameter-space directions ("subnetworks") such that a
//! small top-k subset reconstructs the gradient of divergence between any
//! sample's output and a reference output, plus the analysis tooling to
//! intervene on and attribute those directions.

pub mod analysis;
pub mod decomp;
pub mod io;
pub mod models;
pub mod numkit;
