//! Maximum-weight injective matching of subnetworks to features.

use crate::analysis::AnalysisError;
use crate::numkit::Tensor;

/// Result of matching subnetworks (rows) to features (columns): per
/// subnetwork either a feature index with its score, or none (dead or
/// unmatched). Live assignments are injective.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `assigned[k]` is the matched feature of subnetwork `k`.
    pub assigned: Vec<Option<usize>>,
    /// Score of the matched pair (0 where unassigned).
    pub scores: Vec<f64>,
    /// Subnetworks whose scores all sit below the dead floor.
    pub dead: Vec<bool>,
}

impl Assignment {
    pub fn total_score(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Features that received a live subnetwork.
    pub fn matched_features(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .assigned
            .iter()
            .zip(&self.dead)
            .filter_map(|(a, &d)| if d { None } else { *a })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Hungarian shortest-augmenting-path assignment on a square cost matrix;
/// returns the matched column per row.
fn hungarian_min_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // row matched to column j (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Maximum-weight injective assignment of subnetworks to features.
///
/// `scores` is `n_v×n_f` with non-negative entries (cosines, impacts).
/// Rectangular matrices are padded with zero-score dummies; a subnetwork
/// matched to a dummy column comes back unassigned. Subnetworks whose
/// scores all fall below `dead_floor` are marked dead.
pub fn match_subnetworks(scores: &Tensor, dead_floor: f64) -> Result<Assignment, AnalysisError> {
    if scores.ndim() != 2 || scores.is_empty() {
        return Err(AnalysisError::Shape(format!(
            "score matrix must be a non-empty n_v×n_f tensor, got {:?}",
            scores.shape()
        )));
    }
    let (n_v, n_f) = (scores.shape()[0], scores.shape()[1]);
    let n = n_v.max(n_f);
    // maximize score  ⇔  minimize negated score; dummies cost 0
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i < n_v && j < n_f {
                        -scores.at(&[i, j])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let row_to_col = hungarian_min_square(&cost);

    let mut assigned = Vec::with_capacity(n_v);
    let mut pair_scores = Vec::with_capacity(n_v);
    let mut dead = Vec::with_capacity(n_v);
    for k in 0..n_v {
        let col = row_to_col[k];
        let is_dead = (0..n_f).all(|j| scores.at(&[k, j]) < dead_floor);
        dead.push(is_dead);
        if col < n_f && !is_dead {
            assigned.push(Some(col));
            pair_scores.push(scores.at(&[k, col]));
        } else {
            assigned.push(None);
            pair_scores.push(0.0);
        }
    }
    Ok(Assignment {
        assigned,
        scores: pair_scores,
        dead,
    })
}
