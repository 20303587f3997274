//! Sparse toy-task input generators and target functions.

use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::numkit::{RngState, Tensor};

/// Which toy task a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Identity task X ↦ X.
    Tms,
    /// Linear-combination task X ↦ AX.
    Tmcs,
    /// X ↦ AX with jointly-gated feature groups.
    HighRank,
    /// Elementwise X ↦ X².
    Square,
}

/// Toy task description: dimensions, sparsity, input range, and the mixing
/// matrix / group size where the task needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTaskSpec {
    pub kind: TaskKind,
    pub n_i: usize,
    pub n_o: usize,
    pub sparsity: f64,
    pub lo: f64,
    pub hi: f64,
    pub a: Option<Tensor>,
    pub group_size: Option<usize>,
}

impl ToyTaskSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(ModelError::Task(format!(
                "sparsity {} outside (0, 1]",
                self.sparsity
            )));
        }
        match self.kind {
            TaskKind::Tms => {
                if self.n_i != self.n_o {
                    return Err(ModelError::Task("identity task needs n_i == n_o".into()));
                }
            }
            TaskKind::Tmcs | TaskKind::HighRank => {
                let a = self
                    .a
                    .as_ref()
                    .ok_or_else(|| ModelError::Task("linear task is missing A".into()))?;
                if a.shape() != [self.n_o, self.n_i] {
                    return Err(ModelError::Task(format!(
                        "A shape {:?} does not match n_o×n_i = {}×{}",
                        a.shape(),
                        self.n_o,
                        self.n_i
                    )));
                }
                if self.kind == TaskKind::HighRank {
                    let g = self
                        .group_size
                        .ok_or_else(|| ModelError::Task("grouped task is missing group_size".into()))?;
                    if g == 0 || self.n_i % g != 0 {
                        return Err(ModelError::Task(format!(
                            "group_size {g} must divide n_i {}",
                            self.n_i
                        )));
                    }
                }
            }
            TaskKind::Square => {
                if self.n_i != self.n_o {
                    return Err(ModelError::Task("square task needs n_i == n_o".into()));
                }
            }
        }
        Ok(())
    }

    /// Draw `n_s` input rows with this task's sparsity pattern.
    pub fn gen_inputs(&self, rng: &mut RngState, n_s: usize) -> Result<Tensor, ModelError> {
        self.validate()?;
        match self.kind {
            TaskKind::HighRank => gen_grouped(
                rng,
                n_s,
                self.n_i,
                self.group_size.unwrap(),
                self.sparsity,
                self.lo,
                self.hi,
            ),
            _ => gen_sparse(rng, n_s, self.n_i, self.sparsity, self.lo, self.hi),
        }
    }

    /// Task targets for a batch of inputs.
    pub fn make_targets(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        self.validate()?;
        if x.ndim() != 2 || x.shape()[1] != self.n_i {
            return Err(ModelError::Shape(format!(
                "input shape {:?} does not match n_i {}",
                x.shape(),
                self.n_i
            )));
        }
        match self.kind {
            TaskKind::Tms => Ok(x.clone()),
            TaskKind::Tmcs | TaskKind::HighRank => {
                // Y = X Aᵀ under the row convention.
                let a = self.a.as_ref().unwrap();
                let at = crate::numkit::transpose(a);
                crate::numkit::matmul(x, &at).map_err(ModelError::from)
            }
            TaskKind::Square => {
                let data = x.data().iter().map(|&v| v * v).collect();
                Ok(Tensor::from_vec(x.shape(), data))
            }
        }
    }
}

/// Inputs and targets with matching row counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub y: Tensor,
}

impl Dataset {
    pub fn new(x: Tensor, y: Tensor) -> Result<Self, ModelError> {
        if x.ndim() != 2 || y.ndim() != 2 || x.shape()[0] != y.shape()[0] {
            return Err(ModelError::Shape(format!(
                "dataset shapes {:?} / {:?} disagree on row count",
                x.shape(),
                y.shape()
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn n_samples(&self) -> usize {
        self.x.shape()[0]
    }
}

/// Each entry is independently nonzero with probability `sparsity`, with an
/// i.i.d. Uniform[lo, hi) value when active.
pub fn gen_sparse(
    rng: &mut RngState,
    n_s: usize,
    n_i: usize,
    sparsity: f64,
    lo: f64,
    hi: f64,
) -> Result<Tensor, ModelError> {
    check_sparsity(sparsity)?;
    let mut t = Tensor::zeros(&[n_s, n_i]);
    for v in t.data_mut() {
        if rng.next_f64() < sparsity {
            *v = rng.uniform_scalar(lo, hi);
        }
    }
    Ok(t)
}

/// Contiguous groups of `group_size` features are gated jointly: with
/// probability `sparsity` the whole group draws i.i.d. Uniform[lo, hi)
/// values, otherwise the whole group is zero.
pub fn gen_grouped(
    rng: &mut RngState,
    n_s: usize,
    n_i: usize,
    group_size: usize,
    sparsity: f64,
    lo: f64,
    hi: f64,
) -> Result<Tensor, ModelError> {
    check_sparsity(sparsity)?;
    if group_size == 0 || n_i % group_size != 0 {
        return Err(ModelError::Task(format!(
            "group_size {group_size} must divide n_i {n_i}"
        )));
    }
    let n_groups = n_i / group_size;
    let mut t = Tensor::zeros(&[n_s, n_i]);
    for s in 0..n_s {
        let row = t.row_mut(s);
        for g in 0..n_groups {
            if rng.next_f64() < sparsity {
                for v in &mut row[g * group_size..(g + 1) * group_size] {
                    *v = rng.uniform_scalar(lo, hi);
                }
            }
        }
    }
    Ok(t)
}

fn check_sparsity(sparsity: f64) -> Result<(), ModelError> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(ModelError::Task(format!(
            "sparsity {sparsity} outside (0, 1]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsity_one_is_dense_uniform() {
        let mut rng = RngState::new(1);
        let t = gen_sparse(&mut rng, 100, 10, 1.0, 0.0, 1.0).unwrap();
        assert!(t.data().iter().all(|&v| (0.0..1.0).contains(&v) && v != 0.0 || v >= 0.0));
        let nonzero = t.data().iter().filter(|&&v| v != 0.0).count();
        // an exact zero draw has probability ~0
        assert_eq!(nonzero, 1000);
    }

    #[test]
    fn sparse_fraction_matches_rate() {
        let mut rng = RngState::new(2);
        let t = gen_sparse(&mut rng, 1000, 100, 0.05, 0.0, 1.0).unwrap();
        let frac = t.data().iter().filter(|&&v| v != 0.0).count() as f64 / 100_000.0;
        assert!((0.045..=0.055).contains(&frac), "nonzero fraction {frac}");
    }

    #[test]
    fn sparse_respects_signed_range() {
        let mut rng = RngState::new(3);
        let t = gen_sparse(&mut rng, 200, 5, 0.5, -1.0, 1.0).unwrap();
        assert!(t.data().iter().all(|&v| (-1.0..1.0).contains(&v)));
        assert!(t.data().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn grouped_rows_are_all_or_nothing_per_group() {
        let mut rng = RngState::new(4);
        let t = gen_grouped(&mut rng, 500, 30, 5, 0.2, 0.0, 1.0).unwrap();
        for s in 0..500 {
            let row = t.row(s);
            for g in 0..6 {
                let grp = &row[g * 5..(g + 1) * 5];
                let nz = grp.iter().filter(|&&v| v != 0.0).count();
                assert!(nz == 0 || nz == 5, "row {s} group {g} partially active");
            }
        }
    }

    #[test]
    fn grouped_gate_frequency_matches_sparsity() {
        let mut rng = RngState::new(5);
        let n_rows = 100_000 / 6 + 1;
        let t = gen_grouped(&mut rng, n_rows, 30, 5, 0.05, 0.0, 1.0).unwrap();
        let mut active = 0usize;
        let mut total = 0usize;
        for s in 0..n_rows {
            let row = t.row(s);
            for g in 0..6 {
                total += 1;
                if row[g * 5] != 0.0 {
                    active += 1;
                }
            }
        }
        let frac = active as f64 / total as f64;
        assert!((0.045..=0.055).contains(&frac), "gate rate {frac}");
    }

    #[test]
    fn group_size_one_matches_sparse_structure() {
        // group_size = 1 gates single features independently, the same
        // distribution as gen_sparse.
        let mut rng = RngState::new(6);
        let t = gen_grouped(&mut rng, 2000, 10, 1, 0.3, 0.0, 1.0).unwrap();
        let frac = t.data().iter().filter(|&&v| v != 0.0).count() as f64 / 20_000.0;
        assert!((0.28..=0.32).contains(&frac), "rate {frac}");
    }

    #[test]
    fn grouped_rejects_bad_group_size() {
        let mut rng = RngState::new(7);
        assert!(gen_grouped(&mut rng, 2, 10, 3, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn targets_identity_and_square() {
        let task = ToyTaskSpec {
            kind: TaskKind::Tms,
            n_i: 3,
            n_o: 3,
            sparsity: 0.5,
            lo: 0.0,
            hi: 1.0,
            a: None,
            group_size: None,
        };
        let x = Tensor::from_rows(&[vec![0.5, 0.0, 0.25]]);
        assert_eq!(task.make_targets(&x).unwrap(), x);

        let sq = ToyTaskSpec {
            kind: TaskKind::Square,
            ..task.clone()
        };
        let x = Tensor::from_rows(&[vec![0.5, -0.5, 0.0]]);
        let y = sq.make_targets(&x).unwrap();
        assert_eq!(y.data(), &[0.25, 0.25, 0.0]);
    }

    #[test]
    fn targets_linear_with_identity_matrix() {
        let task = ToyTaskSpec {
            kind: TaskKind::Tmcs,
            n_i: 4,
            n_o: 4,
            sparsity: 0.5,
            lo: 0.0,
            hi: 1.0,
            a: Some(Tensor::eye(4)),
            group_size: None,
        };
        let mut rng = RngState::new(10);
        let x = rng.uniform(0.0, 1.0, &[7, 4]).unwrap();
        assert_eq!(task.make_targets(&x).unwrap(), x);
    }

    #[test]
    fn linear_task_requires_a() {
        let task = ToyTaskSpec {
            kind: TaskKind::Tmcs,
            n_i: 4,
            n_o: 4,
            sparsity: 0.5,
            lo: 0.0,
            hi: 1.0,
            a: None,
            group_size: None,
        };
        assert!(matches!(task.validate(), Err(ModelError::Task(_))));
    }
}
