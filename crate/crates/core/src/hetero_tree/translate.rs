use crate::error::{Error, Result};

use super::conditions::check_conditions;
use super::matrix::DependencyMatrix;
use super::tree::{HeteroOutTree, ROOT};

/// D[node, edge] = 1 iff the edge lies on the node's path to the root.
/// Rows and columns come out in label order.
pub fn tree_to_matrix(t: &HeteroOutTree) -> DependencyMatrix {
    let rows: Vec<String> = t.nodes().map(String::from).collect();
    let cols: Vec<String> = t.edges().into_iter().map(String::from).collect();
    let bits = rows
        .iter()
        .map(|n| {
            let path = t.path_edges(n);
            cols.iter().map(|c| path.contains(&c.as_str())).collect()
        })
        .collect();
    DependencyMatrix::new(rows, cols, bits).expect("tree labels are unique")
}

/// A root label that does not clash with any row label.
pub(crate) fn free_root_label(d: &DependencyMatrix) -> String {
    let mut root = ROOT.to_string();
    while d.row_index(&root).is_some() {
        root.push('_');
    }
    root
}

/// Grows the out-tree encoded by `d`.
///
/// Rows are visited by depth (row sum), ties by label. A depth-1 row hangs
/// from the root through its only 1; a deeper row hangs from the already
/// placed row it strictly contains with exactly one fewer 1, through the
/// column where they differ.
pub fn matrix_to_tree(d: &DependencyMatrix) -> Result<HeteroOutTree> {
    let report = check_conditions(d);
    if !report.satisfies_p() || !report.is_square() {
        return Err(Error::NotATree(report));
    }
    let root = free_root_label(d);
    let mut order: Vec<usize> = (0..d.nrows()).collect();
    order.sort_by(|&a, &b| d.row_sum(a).cmp(&d.row_sum(b)).then_with(|| d.row_labels()[a].cmp(&d.row_labels()[b])));

    let mut explored: Vec<usize> = Vec::with_capacity(d.nrows());
    let mut entries = Vec::with_capacity(d.nrows());
    for &i in &order {
        let row = d.row(i);
        let depth = d.row_sum(i);
        let (parent, edge) = if depth == 1 {
            let e = row.iter().position(|&b| b).expect("depth-1 row has a 1");
            (root.clone(), e)
        } else {
            let found = explored.iter().find_map(|&k| {
                let other = d.row(k);
                if d.row_sum(k) + 1 != depth || other.iter().zip(row).any(|(&o, &r)| o && !r) {
                    return None;
                }
                let e = row.iter().zip(other).position(|(&r, &o)| r && !o)?;
                Some((d.row_labels()[k].clone(), e))
            });
            found.ok_or_else(|| {
                Error::Internal(format!("row `{}` has no placed parent one level up", d.row_labels()[i]))
            })?
        };
        entries.push((d.row_labels()[i].clone(), parent, d.col_labels()[edge].clone()));
        explored.push(i);
    }
    let tree = HeteroOutTree::new(root, entries)?;
    if !tree_to_matrix(&tree).same_as(d) {
        return Err(Error::Internal("translated tree does not reproduce the matrix".into()));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_matrix() -> DependencyMatrix {
        DependencyMatrix::from_bits(
            &["a", "b", "c", "d", "f"],
            &["e1", "e2", "e3", "e4", "e5"],
            &[&[1, 0, 1, 1, 0], &[1, 0, 0, 0, 0], &[1, 0, 1, 0, 1], &[1, 0, 1, 0, 0], &[1, 1, 0, 0, 0]],
        )
        .unwrap()
    }

    fn sample_tree() -> HeteroOutTree {
        HeteroOutTree::new(
            ROOT,
            [("b", "root", "e1"), ("d", "b", "e3"), ("f", "b", "e2"), ("a", "d", "e4"), ("c", "d", "e5")],
        )
        .unwrap()
    }

    #[test]
    fn sample_tree_gives_sample_matrix() {
        let m = tree_to_matrix(&sample_tree());
        assert_eq!(m, sample_matrix());
        for (i, n) in m.row_labels().iter().enumerate() {
            assert_eq!(m.row_sum(i), sample_tree().depth(n));
        }
    }

    #[test]
    fn sample_matrix_gives_sample_tree() {
        let t = matrix_to_tree(&sample_matrix()).unwrap();
        assert_eq!(t, sample_tree());
        assert_eq!(t.attachment("b").unwrap().edge, "e1");
        assert_eq!(t.parent("d"), Some("b"));
        assert_eq!(t.parent("f"), Some("b"));
        assert_eq!(t.parent("a"), Some("d"));
        assert_eq!(t.parent("c"), Some("d"));
    }

    #[test]
    fn star_and_permutation() {
        let star = HeteroOutTree::new(ROOT, [("x", "root", "ex"), ("y", "root", "ey"), ("z", "root", "ez")]).unwrap();
        let m = tree_to_matrix(&star);
        assert!(m.is_permutation());
        let p = DependencyMatrix::from_bits(&["p", "q"], &["u", "v"], &[&[0, 1], &[1, 0]]).unwrap();
        let t = matrix_to_tree(&p).unwrap();
        assert_eq!(t.max_depth(), 1);
        assert_eq!(t.attachment("p").unwrap().edge, "v");
    }

    #[test]
    fn cyclic_counterexample_has_no_tree() {
        let d = DependencyMatrix::unlabeled(vec![
            vec![true, true, false],
            vec![false, true, true],
            vec![true, false, true],
        ])
        .unwrap();
        match matrix_to_tree(&d) {
            Err(Error::NotATree(r)) => assert!(!r.c5),
            other => panic!("expected NotATree, got {other:?}"),
        }
    }

    #[test]
    fn non_square_nested_matrix_is_rejected() {
        let d = DependencyMatrix::from_bits(&["a", "b"], &["x", "y", "z"], &[&[1, 0, 1], &[0, 1, 1]]).unwrap();
        let r = check_conditions(&d);
        assert!(r.satisfies_p());
        assert!(matches!(matrix_to_tree(&d), Err(Error::NotATree(_))));
    }

    #[test]
    fn root_label_avoids_row_names() {
        let d = DependencyMatrix::from_bits(&["root"], &["e"], &[&[1]]).unwrap();
        let t = matrix_to_tree(&d).unwrap();
        assert_ne!(t.root(), "root");
        assert!(t.contains("root"));
    }
}
