use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::DependencyMatrix;
use super::translate::matrix_to_tree;
use super::tree::HeteroOutTree;

/// Moves leaf `i`, currently hanging from the root, under node `j`.
///
/// Only leaves move: relocating a whole subtree would change rows other than
/// `i` and break the correspondence with the matrix operation. Any call whose
/// guard fails returns the tree unchanged.
pub fn dilation_tree(t: &HeteroOutTree, i: &str, j: &str) -> HeteroOutTree {
    if dilation_tree_applies(t, i, j) {
        t.with_parent(i, j)
    } else {
        t.clone()
    }
}

pub fn dilation_tree_applies(t: &HeteroOutTree, i: &str, j: &str) -> bool {
    i != j && t.contains(j) && t.is_leaf(i) && t.parent(i) == Some(t.root())
}

/// Moves leaf `i` from its non-root parent `j` up to the root, keeping its edge.
pub fn absorption_tree(t: &HeteroOutTree, j: &str, i: &str) -> HeteroOutTree {
    if absorption_tree_applies(t, j, i) {
        t.with_parent(i, t.root())
    } else {
        t.clone()
    }
}

pub fn absorption_tree_applies(t: &HeteroOutTree, j: &str, i: &str) -> bool {
    t.is_leaf(i) && t.contains(j) && t.parent(i) == Some(j)
}

fn sum(r: &[bool]) -> usize {
    r.iter().filter(|&&b| b).count()
}

pub fn dilation_matrix_applies(s: &DependencyMatrix, i: usize, j: usize) -> bool {
    let (ri, rj) = (s.row(i), s.row(j));
    i != j && sum(ri) == 1 && !ri.iter().zip(rj).any(|(&a, &b)| a && b)
}

pub fn absorption_matrix_applies(s: &DependencyMatrix, j: usize, i: usize) -> bool {
    let (ri, rj) = (s.row(i), s.row(j));
    let xor = ri.iter().zip(rj).filter(|(&a, &b)| a != b).count();
    i != j && xor == 1 && sum(ri) > sum(rj)
}

/// Row `i` takes on all 1s of row `j` (rows must be disjoint and row `i` a
/// single 1); otherwise the matrix is returned unchanged.
pub fn dilation_matrix(s: &DependencyMatrix, i: usize, j: usize) -> DependencyMatrix {
    let mut out = s.clone();
    apply_dilation(&mut out, i, j);
    out
}

/// In-place dilation; returns whether the guard passed.
pub fn apply_dilation(s: &mut DependencyMatrix, i: usize, j: usize) -> bool {
    if !dilation_matrix_applies(s, i, j) {
        return false;
    }
    let rj = s.row(j).to_vec();
    for (a, b) in s.row_mut(i).iter_mut().zip(rj) {
        *a ^= b;
    }
    true
}

/// Row `i` drops the 1s it shares with row `j` (row `i` must be row `j` plus
/// exactly one extra 1); otherwise the matrix is returned unchanged.
pub fn absorption_matrix(s: &DependencyMatrix, j: usize, i: usize) -> DependencyMatrix {
    let mut out = s.clone();
    apply_absorption(&mut out, j, i);
    out
}

pub fn apply_absorption(s: &mut DependencyMatrix, j: usize, i: usize) -> bool {
    if !absorption_matrix_applies(s, j, i) {
        return false;
    }
    let rj = s.row(j).to_vec();
    for (a, b) in s.row_mut(i).iter_mut().zip(rj) {
        *a ^= b;
    }
    true
}

/// One structural step, naming rows by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    /// `node` leaves `parent` and attaches to the root.
    Absorb { parent: String, node: String },
    /// `node` leaves the root and attaches under `target`.
    Dilate { node: String, target: String },
}

impl Operation {
    pub fn inverse(&self) -> Operation {
        match self {
            Operation::Absorb { parent, node } => Operation::Dilate { node: node.clone(), target: parent.clone() },
            Operation::Dilate { node, target } => Operation::Absorb { parent: target.clone(), node: node.clone() },
        }
    }

    fn rows(&self, m: &DependencyMatrix) -> Result<(usize, usize)> {
        let idx = |l: &str| m.row_index(l).ok_or_else(|| Error::InvalidArgument(format!("unknown row `{l}`")));
        Ok(match self {
            Operation::Absorb { parent, node } => (idx(parent)?, idx(node)?),
            Operation::Dilate { node, target } => (idx(node)?, idx(target)?),
        })
    }

    /// Applies the matrix form. A step whose guard fails is an error here,
    /// since a log is only meaningful if every step acts.
    pub fn apply_matrix(&self, m: &mut DependencyMatrix) -> Result<()> {
        let (a, b) = self.rows(m)?;
        let ok = match self {
            Operation::Absorb { .. } => apply_absorption(m, a, b),
            Operation::Dilate { .. } => apply_dilation(m, a, b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{self:?} does not apply")))
        }
    }

    pub fn apply_tree(&self, t: &HeteroOutTree) -> Result<HeteroOutTree> {
        let (applies, out) = match self {
            Operation::Absorb { parent, node } => {
                (absorption_tree_applies(t, parent, node), absorption_tree(t, parent, node))
            }
            Operation::Dilate { node, target } => {
                (dilation_tree_applies(t, node, target), dilation_tree(t, node, target))
            }
        };
        if applies {
            Ok(out)
        } else {
            Err(Error::InvalidArgument(format!("{self:?} does not apply")))
        }
    }
}

/// Ordered sequence of structural steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpLog {
    pub ops: Vec<Operation>,
}

impl OpLog {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The log that undoes this one: inverted steps in reverse order.
    pub fn inverse(&self) -> OpLog {
        OpLog { ops: self.ops.iter().rev().map(Operation::inverse).collect() }
    }

    pub fn replay_matrix(&self, m: &DependencyMatrix) -> Result<DependencyMatrix> {
        let mut out = m.clone();
        for op in &self.ops {
            op.apply_matrix(&mut out)?;
        }
        Ok(out)
    }

    pub fn replay_tree(&self, t: &HeteroOutTree) -> Result<HeteroOutTree> {
        self.ops.iter().try_fold(t.clone(), |acc, op| op.apply_tree(&acc))
    }
}

/// Flattens a tree-encoding matrix to a permutation matrix by absorbing the
/// deepest leaf (ties by label) until every node hangs from the root. The
/// node/edge pairing is preserved.
pub fn reduce_to_permutation(d: &DependencyMatrix) -> Result<(DependencyMatrix, OpLog)> {
    let mut tree = matrix_to_tree(d)?;
    let mut m = d.clone();
    let mut log = OpLog::default();
    loop {
        let deepest = tree
            .nodes()
            .map(|n| (tree.depth(n), n))
            .filter(|&(depth, _)| depth >= 2)
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)));
        let Some((_, node)) = deepest else { break };
        let node = node.to_string();
        let parent = tree.parent(&node).expect("non-root node").to_string();
        let op = Operation::Absorb { parent, node };
        op.apply_matrix(&mut m).map_err(|e| Error::Internal(format!("matrix absorption failed: {e}")))?;
        tree = op.apply_tree(&tree).map_err(|e| Error::Internal(format!("tree absorption failed: {e}")))?;
        log.ops.push(op);
    }
    debug_assert!(m.is_permutation());
    Ok((m, log))
}
