//! Filling a dependency matrix with missing rows (links that carry no
//! sensor) up to a square matrix that corresponds to an out-tree.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hetero_tree::{check_conditions, column_index_sets, unique_index_sets, DependencyMatrix};

pub(crate) fn check_labels(d: &DependencyMatrix, fresh: &[String]) -> Result<()> {
    let n_missing = d.ncols().checked_sub(d.nrows()).ok_or_else(|| {
        Error::InvalidArgument(format!("{} rows exceed {} columns", d.nrows(), d.ncols()))
    })?;
    if fresh.len() != n_missing {
        return Err(Error::InvalidArgument(format!("need {n_missing} new row labels, got {}", fresh.len())));
    }
    let mut seen: BTreeSet<&str> = d.row_labels().iter().map(String::as_str).collect();
    for l in fresh {
        if !seen.insert(l) {
            return Err(Error::InvalidArgument(format!("row label `{l}` is not fresh")));
        }
    }
    Ok(())
}

/// Fills `dminus` (K×N, K ≤ N) with one new row per label in `fresh`.
///
/// One column is kept per distinct non-empty unique element set (chosen at
/// random from `seed` when several columns share it). Each leftover column
/// `c`, taken in decreasing |S_c| then label order, receives a new row with
/// 1s at `c` and at every column whose current set strictly contains S_c.
/// A leftover column with empty S_c gets a row with a single 1, i.e. a new
/// link directly under the root. Column sets are recomputed after each
/// insertion.
pub fn complete(dminus: &DependencyMatrix, fresh: &[String], seed: u64) -> Result<DependencyMatrix> {
    let report = check_conditions(dminus);
    if !report.satisfies_p_minus() {
        return Err(Error::NotCompletable(report));
    }
    check_labels(dminus, fresh)?;
    if fresh.is_empty() {
        return if report.satisfies_p() { Ok(dminus.clone()) } else { Err(Error::NotCompletable(report)) };
    }

    let sets = column_index_sets(dminus);
    let uniques = unique_index_sets(&sets);
    let mut groups: BTreeMap<&BTreeSet<usize>, Vec<usize>> = BTreeMap::new();
    for (c, j) in uniques.iter().enumerate() {
        if !j.is_empty() {
            groups.entry(j).or_default().push(c);
        }
    }
    if groups.len() != dminus.nrows() {
        return Err(Error::Internal(format!(
            "{} distinct unique element sets for {} rows",
            groups.len(),
            dminus.nrows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: BTreeSet<usize> = groups.values().map(|cols| cols[rng.random_range(0..cols.len())]).collect();
    let mut leftover: Vec<usize> = (0..dminus.ncols()).filter(|c| !kept.contains(c)).collect();
    let labels = dminus.col_labels();
    leftover.sort_by(|&a, &b| sets[b].len().cmp(&sets[a].len()).then(labels[a].cmp(&labels[b])));

    let mut out = dminus.clone();
    for (c, label) in leftover.into_iter().zip(fresh) {
        let cur = column_index_sets(&out);
        let sc = &cur[c];
        let row: Vec<bool> = (0..out.ncols())
            .map(|k| k == c || (!sc.is_empty() && sc.len() < cur[k].len() && sc.is_subset(&cur[k])))
            .collect();
        out.push_row(label.clone(), row)?;
    }
    let r = check_conditions(&out);
    if !r.satisfies_p() {
        return Err(Error::Internal(format!("completion produced an invalid matrix: {r}")));
    }
    Ok(out)
}

/// The simple uniqueness test: one missing row and exactly one column with
/// an empty unique element set. Necessary but not sufficient, see
/// [`is_unique_completion`].
pub fn naive_uniqueness_condition(dminus: &DependencyMatrix) -> Result<bool> {
    let report = check_conditions(dminus);
    if !report.satisfies_p_minus() {
        return Err(Error::NotCompletable(report));
    }
    if dminus.nrows() + 1 != dminus.ncols() {
        return Ok(false);
    }
    let empty = unique_index_sets(&column_index_sets(dminus)).iter().filter(|j| j.is_empty()).count();
    Ok(empty == 1)
}

/// Whether exactly one completion exists. On top of
/// [`naive_uniqueness_condition`] the column with the empty unique element
/// set must itself be non-empty: an all-zero column means the missing row
/// is a leaf that could hang under any node.
pub fn is_unique_completion(dminus: &DependencyMatrix) -> Result<bool> {
    if !naive_uniqueness_condition(dminus)? {
        return Ok(false);
    }
    let sets = column_index_sets(dminus);
    let uniques = unique_index_sets(&sets);
    Ok(uniques.iter().zip(&sets).all(|(j, s)| !j.is_empty() || !s.is_empty()))
}

/// Every row that, appended to `dminus` under `label`, gives a matrix
/// satisfying all five conditions. Exhaustive over 2^N rows.
pub fn single_row_completions(dminus: &DependencyMatrix, label: &str) -> Result<Vec<Vec<bool>>> {
    let n = dminus.ncols();
    if n > 20 {
        return Err(Error::InvalidArgument("exhaustive search limited to 20 columns".into()));
    }
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let row: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
        let mut m = dminus.clone();
        m.push_row(label.to_string(), row.clone())?;
        if check_conditions(&m).satisfies_p() {
            out.push(row);
        }
    }
    Ok(out)
}
