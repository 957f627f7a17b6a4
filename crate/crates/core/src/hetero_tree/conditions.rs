use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::matrix::DependencyMatrix;

/// Rows intersecting one column: S_c = {r : D[r, c] = 1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSet {
    pub column: String,
    pub rows: BTreeSet<String>,
}

/// Rows of S_c not covered by any column set that is a proper subset of S_c.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueElementSet {
    pub column: String,
    pub rows: BTreeSet<String>,
}

/// Column sets as row-index sets, in column order.
pub fn column_index_sets(d: &DependencyMatrix) -> Vec<BTreeSet<usize>> {
    (0..d.ncols())
        .map(|j| (0..d.nrows()).filter(|&i| d.get(i, j)).collect())
        .collect()
}

/// Unique element sets as row-index sets, in column order.
pub fn unique_index_sets(sets: &[BTreeSet<usize>]) -> Vec<BTreeSet<usize>> {
    sets.iter()
        .map(|s| {
            let mut j = s.clone();
            for t in sets {
                if t.len() < s.len() && t.is_subset(s) {
                    for r in t {
                        j.remove(r);
                    }
                }
            }
            j
        })
        .collect()
}

pub fn column_sets(d: &DependencyMatrix) -> Vec<ColumnSet> {
    column_index_sets(d)
        .into_iter()
        .enumerate()
        .map(|(j, s)| ColumnSet {
            column: d.col_labels()[j].clone(),
            rows: s.into_iter().map(|i| d.row_labels()[i].clone()).collect(),
        })
        .collect()
}

pub fn unique_element_sets(d: &DependencyMatrix) -> Vec<UniqueElementSet> {
    unique_index_sets(&column_index_sets(d))
        .into_iter()
        .enumerate()
        .map(|(j, s)| UniqueElementSet {
            column: d.col_labels()[j].clone(),
            rows: s.into_iter().map(|i| d.row_labels()[i].clone()).collect(),
        })
        .collect()
}

/// Outcome of the six structural conditions on a binary matrix.
///
/// 1. no all-zero rows, 2. no all-zero columns, 3. no duplicate rows,
/// 4. no duplicate columns, 5. column sets are pairwise nested or disjoint,
/// 6. every unique element set has exactly one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub rows: usize,
    pub cols: usize,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub c5: bool,
    pub c6: bool,
}

impl ConditionReport {
    /// Conditions 1–5.
    pub fn satisfies_p(&self) -> bool {
        self.c1 && self.c2 && self.c3 && self.c4 && self.c5
    }

    /// Conditions 1, 2, 5 and 6.
    pub fn satisfies_p0(&self) -> bool {
        self.c1 && self.c2 && self.c5 && self.c6
    }

    /// Conditions 1, 3 and 5: what survives deleting rows from a valid matrix.
    pub fn satisfies_p_minus(&self) -> bool {
        self.c1 && self.c3 && self.c5
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn flags(&self) -> [bool; 6] {
        [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6]
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 6] = [
            "no all-zero rows",
            "no all-zero columns",
            "no duplicate rows",
            "no duplicate columns",
            "column sets nested or disjoint",
            "singleton unique element sets",
        ];
        write!(f, "{}x{} matrix", self.rows, self.cols)?;
        let failed: Vec<String> = self
            .flags()
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| format!("{} ({})", i + 1, NAMES[i]))
            .collect();
        if failed.is_empty() {
            write!(f, ", all conditions hold")
        } else {
            write!(f, ", failed: {}", failed.join(", "))
        }
    }
}

pub fn check_conditions(d: &DependencyMatrix) -> ConditionReport {
    let sets = column_index_sets(d);
    let rows = d.rows();
    let c1 = rows.iter().all(|r| r.iter().any(|&b| b));
    let c2 = sets.iter().all(|s| !s.is_empty());
    let c3 = (0..rows.len()).all(|i| (i + 1..rows.len()).all(|k| rows[i] != rows[k]));
    let c4 = (0..sets.len()).all(|i| (i + 1..sets.len()).all(|k| sets[i] != sets[k]));
    let c5 = (0..sets.len()).all(|i| {
        (i + 1..sets.len()).all(|k| {
            let (a, b) = (&sets[i], &sets[k]);
            a.is_subset(b) || b.is_subset(a) || a.is_disjoint(b)
        })
    });
    let c6 = unique_index_sets(&sets).iter().all(|j| j.len() == 1);
    ConditionReport { rows: d.nrows(), cols: d.ncols(), c1, c2, c3, c4, c5, c6 }
}
