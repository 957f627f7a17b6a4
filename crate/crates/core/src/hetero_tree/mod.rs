//! Heterogeneous out-trees, their dependency matrices, and the structural
//! operations that move between them.

mod conditions;
mod enumerate;
mod matrix;
mod ops;
mod translate;
mod tree;

pub use conditions::{
    check_conditions, column_index_sets, column_sets, unique_element_sets, unique_index_sets, ColumnSet,
    ConditionReport, UniqueElementSet,
};
pub use enumerate::{edge_labels, enumerate_trees, node_labels, tree_count, TreeEnumeration, MAX_ENUMERATION};
pub use matrix::DependencyMatrix;
pub use ops::{
    absorption_matrix, absorption_matrix_applies, absorption_tree, absorption_tree_applies, apply_absorption,
    apply_dilation, dilation_matrix, dilation_matrix_applies, dilation_tree, dilation_tree_applies,
    reduce_to_permutation, OpLog, Operation,
};
pub use translate::{matrix_to_tree, tree_to_matrix};
pub use tree::{semi_equivalent, Attachment, HeteroOutTree, ROOT};
