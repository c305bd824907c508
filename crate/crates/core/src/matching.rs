//! Bipartite matching of candidate tracklets against `{neighbors, target}`
//! and the rules that turn the matching into a selected candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tracklet_avg_iou, Tracklet};
use crate::pools::{CandidatePool, NeighborPool};
use crate::select::CandidateSet;

/// Dense row-major weight matrix. Rows are candidate tracklets; columns are
/// neighbor tracklets followed by the target tracklet in the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter { name: "weights", reason: "ragged rows".into() });
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "weights", reason: "non-finite entry".into() });
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn target_col(&self) -> usize {
        self.cols - 1
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * k).collect() }
    }
}

/// A matching between rows and columns; `pairs` is sorted by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

impl Assignment {
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_of(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Average-IoU weights between every candidate tracklet and every neighbor
/// tracklet plus the target tracklet.
pub fn build_weights(pool: &CandidatePool, neighbors: &NeighborPool, target: &Tracklet) -> Result<WeightMatrix> {
    if pool.entries.is_empty() {
        return Err(Error::NoCandidates);
    }
    let cols: Vec<&Tracklet> = neighbors.entries.iter().chain(std::iter::once(target)).collect();
    let rows = pool
        .entries
        .iter()
        .map(|e| cols.iter().map(|c| tracklet_avg_iou(&e.tracklet, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    WeightMatrix::from_rows(&rows)
}

/// Minimum-cost perfect matching on a square matrix (shortest augmenting
/// paths with potentials). Returns the column assigned to each row.
fn min_cost_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    // 1-based arrays; column 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            col_of_row[owner[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Best total weight of a perfect matching on the square sub-matrix given by
/// `rows` x `cols`.
fn best_value(w: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let top = rows.iter().flat_map(|&r| cols.iter().map(move |&c| w[r][c])).fold(f64::NEG_INFINITY, f64::max);
    let cost: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| top - w[r][c]).collect()).collect();
    min_cost_square(&cost).iter().enumerate().map(|(i, &j)| w[rows[i]][cols[j]]).sum()
}

/// Maximum-weight matching of a rectangular matrix: every row of the smaller
/// side is matched. Among optimal matchings the one whose row-sorted pair
/// list is lexicographically smallest is returned.
pub fn hungarian_max(w: &WeightMatrix) -> Assignment {
    let (n, m) = (w.rows, w.cols);
    if n == 0 || m == 0 {
        return Assignment { pairs: vec![], total_weight: 0.0 };
    }
    let k = n.max(m);
    // zero-weight dummy rows/columns pad the matrix to k x k
    let padded: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..k).map(|c| if r < n && c < m { w.get(r, c) } else { 0.0 }).collect())
        .collect();

    let all: Vec<usize> = (0..k).collect();
    let optimum = best_value(&padded, &all, &all);
    let scale = padded.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let eps = 1e-9 * scale * k as f64;

    let mut free_rows: Vec<usize> = all.clone();
    let mut free_cols: Vec<usize> = all;
    let mut fixed = 0.0;
    let mut pairs = Vec::new();

    for r in 0..n {
        free_rows.retain(|&x| x != r);
        let mut placed = false;
        for &c in free_cols.clone().iter().filter(|&&c| c < m) {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let value = fixed + padded[r][c] + best_value(&padded, &free_rows, &rest_cols);
            if value >= optimum - eps {
                fixed += padded[r][c];
                free_cols = rest_cols;
                pairs.push((r, c));
                placed = true;
                break;
            }
        }
        if !placed {
            // dummy columns are interchangeable; consume the first one
            let d = *free_cols.iter().find(|&&c| c >= m).expect("a dummy column remains when a row is unmatched");
            free_cols.retain(|&x| x != d);
        }
    }

    let total_weight = pairs.iter().map(|&(r, c)| w.get(r, c)).sum();
    Assignment { pairs, total_weight }
}

/// How the target's candidate was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The target column was matched with positive weight.
    Matched,
    /// Target unmatched; best target weight among unmatched rows.
    BestUnmatched,
    /// Every unmatched row has zero overlap with the target.
    KalmanFallback,
}

/// Picks the candidate for the target. A pairing of zero weight carries no
/// evidence and counts as unmatched.
pub fn resolve_target(a: &Assignment, w: &WeightMatrix, cands: &CandidateSet) -> Result<(usize, Selection)> {
    let tc = w.target_col();
    if let Some(r) = a.row_of(tc) {
        if w.get(r, tc) > 0.0 {
            return Ok((r, Selection::Matched));
        }
    }
    let unmatched = (0..w.rows()).filter(|&r| a.col_of(r).is_none_or(|c| w.get(r, c) <= 0.0));
    let mut best: Option<(usize, f64)> = None;
    for r in unmatched {
        let v = w.get(r, tc);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((r, v));
        }
    }
    match best {
        Some((r, v)) if v > 0.0 => Ok((r, Selection::BestUnmatched)),
        _ => cands.kalman_index().map(|k| (k, Selection::KalmanFallback)).ok_or(Error::NoViableCandidate),
    }
}
