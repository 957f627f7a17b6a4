use crate::error::{Error, Result};

use super::tree::{HeteroOutTree, ROOT};

/// Largest size accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION: usize = 5;

/// Number of heterogeneous out-trees on `n` labeled nodes and `n` labeled
/// edges: (n+1)^(n-1) rooted shapes times n! edge assignments.
pub fn tree_count(n: usize) -> u64 {
    if n == 0 {
        return 1;
    }
    let shapes = (n as u64 + 1).pow(n as u32 - 1);
    shapes * (1..=n as u64).product::<u64>()
}

/// Node labels `v1..vn` used by the enumeration.
pub fn node_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("v{i}")).collect()
}

/// Edge labels `e1..en` used by the enumeration.
pub fn edge_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("e{i}")).collect()
}

/// Every tree on nodes `v1..vn` and edges `e1..en`, each exactly once.
pub fn enumerate_trees(n: usize) -> Result<TreeEnumeration> {
    if n == 0 || n > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!("enumeration size must be in 1..={MAX_ENUMERATION}, got {n}")));
    }
    Ok(TreeEnumeration::new(n))
}

/// Iterator over all parent functions (acyclic) crossed with all edge
/// permutations.
pub struct TreeEnumeration {
    nodes: Vec<String>,
    edges: Vec<String>,
    shapes: Vec<Vec<usize>>,
    shape: usize,
    perm: Option<Vec<usize>>,
}

impl TreeEnumeration {
    fn new(n: usize) -> Self {
        // parent[k] == n stands for the root.
        let mut shapes = Vec::new();
        let mut parent = vec![0usize; n];
        loop {
            if is_acyclic(&parent, n) {
                shapes.push(parent.clone());
            }
            let mut k = 0;
            loop {
                if k == n {
                    return Self { nodes: node_labels(n), edges: edge_labels(n), shapes, shape: 0, perm: Some((0..n).collect()) };
                }
                parent[k] += 1;
                if parent[k] <= n {
                    break;
                }
                parent[k] = 0;
                k += 1;
            }
        }
    }
}

fn is_acyclic(parent: &[usize], n: usize) -> bool {
    (0..n).all(|start| {
        let mut cur = start;
        for _ in 0..=n {
            if cur == n {
                return true;
            }
            cur = parent[cur];
        }
        false
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

impl Iterator for TreeEnumeration {
    type Item = HeteroOutTree;

    fn next(&mut self) -> Option<HeteroOutTree> {
        let parent = self.shapes.get(self.shape)?;
        let perm = self.perm.as_mut()?;
        let n = self.nodes.len();
        let tree = HeteroOutTree::new(
            ROOT,
            (0..n).map(|k| {
                let p = if parent[k] == n { ROOT.to_string() } else { self.nodes[parent[k]].clone() };
                (self.nodes[k].clone(), p, self.edges[perm[k]].clone())
            }),
        )
        .expect("enumerated parent functions are acyclic");
        if !next_permutation(perm) {
            self.shape += 1;
            *perm = (0..n).collect();
        }
        Some(tree)
    }
}
