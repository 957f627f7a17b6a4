use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled binary matrix: rows are nodes (sensors or links), columns are
/// edges (joints). Equality between matrices is label-based, see
/// [`DependencyMatrix::same_as`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    rows: Vec<Vec<bool>>,
    merged_groups: BTreeMap<String, Vec<String>>,
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::InvalidArgument(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

impl DependencyMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if rows.len() != row_labels.len() {
            return Err(Error::DimensionMismatch { expected: row_labels.len(), got: rows.len() });
        }
        for r in &rows {
            if r.len() != col_labels.len() {
                return Err(Error::DimensionMismatch { expected: col_labels.len(), got: r.len() });
            }
        }
        check_unique(&row_labels, "row")?;
        check_unique(&col_labels, "column")?;
        Ok(Self { row_labels, col_labels, rows, merged_groups: BTreeMap::new() })
    }

    /// Convenience constructor from 0/1 integers.
    pub fn from_bits<R: AsRef<str>, C: AsRef<str>>(row_labels: &[R], col_labels: &[C], bits: &[&[u8]]) -> Result<Self> {
        Self::new(
            row_labels.iter().map(|s| s.as_ref().to_string()).collect(),
            col_labels.iter().map(|s| s.as_ref().to_string()).collect(),
            bits.iter().map(|r| r.iter().map(|&b| b != 0).collect()).collect(),
        )
    }

    /// Matrix with rows labeled `r0..` and columns `c0..`.
    pub fn unlabeled(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..n).map(|j| format!("c{j}")).collect(),
            rows,
        )
    }

    pub fn with_merged_groups(mut self, groups: BTreeMap<String, Vec<String>>) -> Self {
        self.merged_groups = groups;
        self
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.rows[i][j] = v;
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut Vec<bool> {
        &mut self.rows[i]
    }

    pub fn merged_groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.merged_groups
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.rows[i].iter().filter(|&&b| b).count()
    }

    /// Appends a row; the label must be fresh.
    pub fn push_row(&mut self, label: String, row: Vec<bool>) -> Result<()> {
        if row.len() != self.ncols() {
            return Err(Error::DimensionMismatch { expected: self.ncols(), got: row.len() });
        }
        if self.row_index(&label).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate row label `{label}`")));
        }
        self.row_labels.push(label);
        self.rows.push(row);
        Ok(())
    }

    /// Rows and columns sorted by label.
    pub fn canonical(&self) -> Self {
        let mut ri: Vec<usize> = (0..self.nrows()).collect();
        ri.sort_by(|&a, &b| self.row_labels[a].cmp(&self.row_labels[b]));
        let mut ci: Vec<usize> = (0..self.ncols()).collect();
        ci.sort_by(|&a, &b| self.col_labels[a].cmp(&self.col_labels[b]));
        Self {
            row_labels: ri.iter().map(|&i| self.row_labels[i].clone()).collect(),
            col_labels: ci.iter().map(|&j| self.col_labels[j].clone()).collect(),
            rows: ri.iter().map(|&i| ci.iter().map(|&j| self.rows[i][j]).collect()).collect(),
            merged_groups: self.merged_groups.clone(),
        }
    }

    /// Equality up to simultaneous, label-preserving row/column permutation.
    /// Merge bookkeeping is ignored.
    pub fn same_as(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.row_labels == b.row_labels && a.col_labels == b.col_labels && a.rows == b.rows
    }

    /// Keeps only the rows whose labels are listed, in the given order.
    pub fn select_rows(&self, labels: &[String]) -> Result<Self> {
        let mut rows = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self
                .row_index(l)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown row label `{l}`")))?;
            rows.push(self.rows[i].clone());
        }
        Self::new(labels.to_vec(), self.col_labels.clone(), rows)
    }

    /// Drops duplicate rows, keeping the first occurrence; the dropped labels
    /// are recorded in `merged_groups` under the surviving label.
    pub fn merge_duplicate_rows(&self) -> Self {
        let mut keep: Vec<usize> = Vec::new();
        let mut groups: BTreeMap<String, Vec<String>> = self.merged_groups.clone();
        for i in 0..self.nrows() {
            match keep.iter().find(|&&k| self.rows[k] == self.rows[i]) {
                Some(&k) => {
                    let dropped = groups.remove(&self.row_labels[i]).unwrap_or_else(|| vec![self.row_labels[i].clone()]);
                    let g = groups
                        .entry(self.row_labels[k].clone())
                        .or_insert_with(|| vec![self.row_labels[k].clone()]);
                    g.extend(dropped);
                    g.sort();
                    g.dedup();
                }
                None => keep.push(i),
            }
        }
        Self {
            row_labels: keep.iter().map(|&i| self.row_labels[i].clone()).collect(),
            col_labels: self.col_labels.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            merged_groups: groups,
        }
    }

    /// Every row has exactly one 1 and every column exactly one 1.
    pub fn is_permutation(&self) -> bool {
        self.is_square()
            && (0..self.nrows()).all(|i| self.row_sum(i) == 1)
            && (0..self.ncols()).all(|j| self.rows.iter().filter(|r| r[j]).count() == 1)
    }

    /// Row-label → column-label pairing of a permutation matrix.
    pub fn permutation_pairs(&self) -> Option<BTreeMap<String, String>> {
        if !self.is_permutation() {
            return None;
        }
        Some(
            self.rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let j = r.iter().position(|&b| b).expect("permutation row");
                    (self.row_labels[i].clone(), self.col_labels[j].clone())
                })
                .collect(),
        )
    }
}

impl fmt::Display for DependencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.row_labels.iter().map(String::len).max().unwrap_or(0);
        write!(f, "{:w$} ", "")?;
        writeln!(f, "{}", self.col_labels.join(" "))?;
        for (l, r) in self.row_labels.iter().zip(&self.rows) {
            write!(f, "{l:w$} ")?;
            let cells: Vec<String> = r
                .iter()
                .zip(&self.col_labels)
                .map(|(&b, c)| format!("{:>width$}", u8::from(b), width = c.len()))
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    rows: Vec<Vec<u8>>,
    #[serde(default)]
    merged_groups: BTreeMap<String, Vec<String>>,
}

impl Serialize for DependencyMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixDoc {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|&b| u8::from(b)).collect()).collect(),
            merged_groups: self.merged_groups.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DependencyMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = MatrixDoc::deserialize(d)?;
        let mut rows = Vec::with_capacity(doc.rows.len());
        for (i, r) in doc.rows.into_iter().enumerate() {
            let mut out = Vec::with_capacity(r.len());
            for (j, v) in r.into_iter().enumerate() {
                match v {
                    0 => out.push(false),
                    1 => out.push(true),
                    _ => return Err(D::Error::custom(format!("rows[{i}][{j}] = {v}, expected 0 or 1"))),
                }
            }
            rows.push(out);
        }
        DependencyMatrix::new(doc.row_labels, doc.col_labels, rows)
            .map(|m| m.with_merged_groups(doc.merged_groups))
            .map_err(D::Error::custom)
    }
}
