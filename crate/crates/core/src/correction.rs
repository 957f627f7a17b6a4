//! Repairing binary matrices that do not correspond to any out-tree.
//!
//! The search starts from the permutation matrix closest to the input
//! (a star: every link hangs from the root) and grows it by one-step
//! dilations, keeping the candidates nearest to the input in Hamming
//! distance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::completion::check_labels;
use crate::error::{Error, Result};
use crate::hetero_tree::{check_conditions, dilation_matrix, dilation_matrix_applies, enumerate_trees, tree_to_matrix, DependencyMatrix};

fn require_square(d: &DependencyMatrix) -> Result<()> {
    if d.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: d.nrows(), got: d.ncols() })
    }
}

/// Minimum-cost perfect matching on a square cost matrix, O(n³)
/// shortest-augmenting-path form with row and column potentials.
/// Returns `col_of_row`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based with column 0 as the virtual start.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

fn assignment_cost(cost: &[Vec<i64>], sigma: &[usize]) -> i64 {
    sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Optimal matching that is lexicographically smallest among all optima:
/// rows are fixed one at a time to the smallest column that still admits
/// an optimal completion.
fn lexicographic_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let best = assignment_cost(cost, &hungarian(cost));
    let mut sigma = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..n).collect();
    let mut spent = 0;
    for i in 0..n {
        let rest_rows = i + 1..n;
        let chosen = free
            .iter()
            .copied()
            .find(|&j| {
                let cols: Vec<usize> = free.iter().copied().filter(|&c| c != j).collect();
                let sub: Vec<Vec<i64>> = rest_rows.clone().map(|r| cols.iter().map(|&c| cost[r][c]).collect()).collect();
                let rest = assignment_cost(&sub, &hungarian(&sub));
                spent + cost[i][j] + rest == best
            })
            .expect("some column extends an optimal assignment");
        spent += cost[i][chosen];
        sigma.push(chosen);
        free.retain(|&c| c != chosen);
    }
    sigma
}

/// Permutation matrix closest to a square binary matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearestPermutation {
    /// Column assigned to each row.
    pub sigma: Vec<usize>,
    /// Number of 1s of the input kept by the permutation.
    pub overlap: usize,
}

impl NearestPermutation {
    /// The permutation as a matrix carrying the labels of `d`.
    pub fn matrix(&self, d: &DependencyMatrix) -> DependencyMatrix {
        let n = self.sigma.len();
        let rows = self.sigma.iter().map(|&j| (0..n).map(|c| c == j).collect()).collect();
        DependencyMatrix::new(d.row_labels().to_vec(), d.col_labels().to_vec(), rows).expect("labels of a valid matrix")
    }
}

/// Maximizes the number of 1s of `d` covered by a permutation. Since the
/// Hamming distance to a permutation is `|d| + N − 2·overlap`, this is also
/// the nearest permutation matrix.
pub fn nearest_permutation(d: &DependencyMatrix) -> Result<NearestPermutation> {
    require_square(d)?;
    let cost: Vec<Vec<i64>> = d.rows().iter().map(|r| r.iter().map(|&b| if b { -1 } else { 0 }).collect()).collect();
    let sigma = lexicographic_assignment(&cost);
    let overlap = sigma.iter().enumerate().filter(|&(i, &j)| d.get(i, j)).count();
    Ok(NearestPermutation { sigma, overlap })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best overlap by trying every permutation, scored with the mixed-integer
/// objective `Σ W_ij` where `W_ij = min(D_ij, I_ij)`. Limited to N ≤ 8.
pub fn max_overlap_exhaustive(d: &DependencyMatrix) -> Result<usize> {
    require_square(d)?;
    if d.nrows() > 8 {
        return Err(Error::InvalidArgument("exhaustive assignment limited to 8 rows".into()));
    }
    let n = d.nrows();
    Ok(permutations(n)
        .iter()
        .map(|p| {
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| d.get(i, j) && p[i] == j)
                .count()
        })
        .max()
        .unwrap_or(0))
}

/// Number of differing entries, matching rows and columns by label.
pub fn hamming(a: &DependencyMatrix, b: &DependencyMatrix) -> Result<usize> {
    let (a, b) = (a.canonical(), b.canonical());
    if a.row_labels() != b.row_labels() || a.col_labels() != b.col_labels() {
        return Err(Error::InvalidArgument("matrices carry different labels".into()));
    }
    Ok(a.rows().iter().zip(b.rows()).map(|(x, y)| x.iter().zip(y).filter(|(p, q)| p != q).count()).sum())
}

fn positional_distance(a: &DependencyMatrix, b: &DependencyMatrix) -> usize {
    a.rows().iter().zip(b.rows()).map(|(x, y)| x.iter().zip(y).filter(|(p, q)| p != q).count()).sum()
}

/// Beam width used when none is configured.
pub const DEFAULT_BEAM_CAP: usize = 64;

/// Up to this size the beam is never truncated.
pub const UNBOUNDED_BEAM_MAX_N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrellisConfig {
    /// Maximum number of matrices kept per round. `None`: unbounded for
    /// N ≤ 6, [`DEFAULT_BEAM_CAP`] above.
    pub beam_cap: Option<usize>,
}

impl TrellisConfig {
    pub fn effective_cap(&self, n: usize) -> Option<usize> {
        match self.beam_cap {
            Some(c) => Some(c.max(1)),
            None if n <= UNBOUNDED_BEAM_MAX_N => None,
            None => Some(DEFAULT_BEAM_CAP),
        }
    }
}

/// Outcome of the repair search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    /// Equally near valid matrices, in row-major bit order.
    pub candidates: Vec<DependencyMatrix>,
    pub distance: usize,
    /// Best distance after each round, starting with the permutation's.
    pub history: Vec<usize>,
    pub beam_cap: Option<usize>,
    /// Whether the beam was ever cut down to `beam_cap`.
    pub truncated: bool,
}

impl Correction {
    pub fn rounds(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Beam search over one-step dilations starting at the nearest permutation.
///
/// Each round expands every beam member by all applicable dilations, keeps
/// the valid ones and retains those nearest to `d`. The search stops as soon
/// as a round fails to lower the best distance, returning the beam from the
/// last improving round.
pub fn trellis_correct(d: &DependencyMatrix, cfg: &TrellisConfig) -> Result<Correction> {
    require_square(d)?;
    let n = d.nrows();
    let cap = cfg.effective_cap(n);
    if check_conditions(d).satisfies_p() {
        return Ok(Correction { candidates: vec![d.clone()], distance: 0, history: vec![0], beam_cap: cap, truncated: false });
    }
    let start = nearest_permutation(d)?.matrix(d);
    let mut g = positional_distance(&start, d);
    let mut beam = vec![start];
    let mut history = vec![g];
    let mut truncated = false;
    loop {
        let mut seen: BTreeSet<Vec<Vec<bool>>> = BTreeSet::new();
        let mut best: Vec<DependencyMatrix> = Vec::new();
        let mut g_new = usize::MAX;
        for m in &beam {
            for i in 0..n {
                for j in 0..n {
                    if !dilation_matrix_applies(m, i, j) {
                        continue;
                    }
                    let c = dilation_matrix(m, i, j);
                    if !seen.insert(c.rows().to_vec()) || !check_conditions(&c).satisfies_p() {
                        continue;
                    }
                    let dist = positional_distance(&c, d);
                    if dist < g_new {
                        g_new = dist;
                        best.clear();
                    }
                    if dist == g_new {
                        best.push(c);
                    }
                }
            }
        }
        if best.is_empty() || g_new >= g {
            break;
        }
        best.sort_by(|a, b| a.rows().cmp(b.rows()));
        if let Some(c) = cap {
            if best.len() > c {
                best.truncate(c);
                truncated = true;
            }
        }
        beam = best;
        g = g_new;
        history.push(g);
    }
    beam.sort_by(|a, b| a.rows().cmp(b.rows()));
    Ok(Correction { candidates: beam, distance: g, history, beam_cap: cap, truncated })
}

/// Pads `dminus` with all-zero rows labeled `fresh` and repairs the result.
pub fn correct_partial(dminus: &DependencyMatrix, fresh: &[String], cfg: &TrellisConfig) -> Result<Correction> {
    check_labels(dminus, fresh)?;
    let mut full = dminus.clone();
    for l in fresh {
        full.push_row(l.clone(), vec![false; dminus.ncols()])?;
    }
    trellis_correct(&full, cfg)
}

/// Smallest Hamming distance from `d` to any valid matrix, by enumerating
/// every tree of the same size. Rows and columns are matched by position.
pub fn exhaustive_min_distance(d: &DependencyMatrix) -> Result<usize> {
    require_square(d)?;
    Ok(enumerate_trees(d.nrows())?.map(|t| positional_distance(&tree_to_matrix(&t), d)).min().unwrap_or(0))
}
