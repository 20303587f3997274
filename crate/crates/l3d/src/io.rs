//! Versioned JSON containers for model checkpoints and learned bases.
//!
//! Both formats are plain JSON with a leading format-version integer;
//! loaders reject unknown versions. Floats use the shortest representation
//! that round-trips exactly, so save/load is bit-exact.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomp::SubnetworkBasis;
use crate::models::{MlpSpec, ParamSet};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const BASIS_VERSION: u32 = 1;

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    Format(String),
    Version { found: u32, expected: u32 },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "i/o error: {e}"),
            IoError::Format(msg) => write!(f, "bad file format: {msg}"),
            IoError::Version { found, expected } => {
                write!(f, "unsupported format version {found} (expected {expected})")
            }
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    spec: MlpSpec,
    params: ParamSet,
}

/// Write a trained model (architecture plus named tensors) to `path`.
pub fn save_checkpoint(path: &Path, spec: &MlpSpec, params: &ParamSet) -> Result<(), IoError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        spec: spec.clone(),
        params: params.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| IoError::Format(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(MlpSpec, ParamSet), IoError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| IoError::Format(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(IoError::Version {
            found: file.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if !file.params.tensors().iter().all(|t| t.is_consistent()) {
        return Err(IoError::Format("tensor shape/data mismatch".into()));
    }
    let shapes = file.spec.param_shapes();
    if shapes.len() != file.params.len()
        || !shapes
            .iter()
            .zip(file.params.tensors())
            .all(|((_, s), t)| s.as_slice() == t.shape())
    {
        return Err(IoError::Format(
            "checkpoint tensors do not match the architecture".into(),
        ));
    }
    Ok((file.spec, file.params))
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    version: u32,
    basis: SubnetworkBasis,
}

/// Write a learned basis (cores, factors, shapes, ranks) to `path`.
pub fn save_basis(path: &Path, basis: &SubnetworkBasis) -> Result<(), IoError> {
    let file = BasisFile {
        version: BASIS_VERSION,
        basis: basis.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| IoError::Format(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<SubnetworkBasis, IoError> {
    let text = fs::read_to_string(path)?;
    let file: BasisFile =
        serde_json::from_str(&text).map_err(|e| IoError::Format(e.to_string()))?;
    if file.version != BASIS_VERSION {
        return Err(IoError::Version {
            found: file.version,
            expected: BASIS_VERSION,
        });
    }
    for k in 0..file.basis.n_v() {
        for i in 0..file.basis.n_tensors() {
            for block in [file.basis.in_block(k, i), file.basis.out_block(k, i)] {
                if !block.core().is_consistent()
                    || !block.factors().iter().all(|f| f.is_consistent())
                {
                    return Err(IoError::Format(format!(
                        "inconsistent tucker block at subnetwork {k}, tensor {i}"
                    )));
                }
            }
        }
    }
    Ok(file.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Activation;
    use crate::numkit::RngState;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let dir = std::env::temp_dir().join("l3d-io-test-ckpt");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");

        let spec = MlpSpec::new(
            vec![5, 2, 5],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(404);
        let params = spec.init_params(&mut rng);
        save_checkpoint(&path, &spec, &params).unwrap();
        let (spec2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn basis_round_trips_bit_exactly() {
        let dir = std::env::temp_dir().join("l3d-io-test-basis");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("basis.json");

        let spec = MlpSpec::new(
            vec![5, 2, 5],
            vec![Activation::Identity, Activation::Relu],
            vec![false, true],
        )
        .unwrap();
        let mut rng = RngState::new(405);
        let params = spec.init_params(&mut rng);
        let basis = SubnetworkBasis::init_uniform(&params, 3, 2, &mut rng).unwrap();
        save_basis(&path, &basis).unwrap();
        let basis2 = load_basis(&path).unwrap();
        assert_eq!(basis, basis2);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = std::env::temp_dir().join("l3d-io-test-ver");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        fs::write(
            &path,
            r#"{"version":99,"spec":{"dims":[2,2],"activations":["identity"],"biases":[false]},"params":{"names":[],"tensors":[]}}"#,
        )
        .unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(IoError::Version { found: 99, .. })
        ));
        fs::remove_dir_all(&dir).ok();
    }
}
