use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default label of the (unlabeled) root.
pub const ROOT: &str = "root";

/// Where a node hangs: its parent node and the edge it inherits through.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Attachment {
    pub parent: String,
    pub edge: String,
}

/// Rooted out-tree with uniquely labeled nodes and uniquely labeled edges.
///
/// Every non-root node has exactly one incoming edge, so `N` nodes (root
/// excluded) come with exactly `N` edges. Two trees compare equal when every
/// node has the same parent through the same edge; the root's label is not
/// part of the identity.
#[derive(Debug, Clone)]
pub struct HeteroOutTree {
    root: String,
    parents: BTreeMap<String, Attachment>,
}

impl PartialEq for HeteroOutTree {
    fn eq(&self, other: &Self) -> bool {
        if self.parents.len() != other.parents.len() {
            return false;
        }
        self.parents.iter().all(|(node, a)| match other.parents.get(node) {
            Some(b) => {
                a.edge == b.edge
                    && (a.parent == b.parent || (a.parent == self.root && b.parent == other.root))
            }
            None => false,
        })
    }
}

impl Eq for HeteroOutTree {}

impl HeteroOutTree {
    /// Builds and validates a tree from `(node, parent, edge)` triples.
    pub fn new<I, S>(root: impl Into<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let root = root.into();
        let mut parents = BTreeMap::new();
        for (node, parent, edge) in entries {
            let node = node.into();
            let att = Attachment { parent: parent.into(), edge: edge.into() };
            if node == root {
                return Err(Error::InvalidTree(format!("root `{root}` cannot have a parent")));
            }
            if parents.insert(node.clone(), att).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node label `{node}`")));
            }
        }
        let tree = Self { root, parents };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let mut edges = BTreeSet::new();
        for (node, att) in &self.parents {
            if att.parent != self.root && !self.parents.contains_key(&att.parent) {
                return Err(Error::InvalidTree(format!("`{node}` has unknown parent `{}`", att.parent)));
            }
            if !edges.insert(att.edge.as_str()) {
                return Err(Error::InvalidTree(format!("duplicate edge label `{}`", att.edge)));
            }
        }
        for node in self.parents.keys() {
            // A walk longer than the node count means a cycle.
            let mut cur = node.as_str();
            let mut steps = 0;
            while cur != self.root {
                cur = &self.parents[cur].parent;
                steps += 1;
                if steps > self.parents.len() {
                    return Err(Error::InvalidTree(format!("cycle through `{node}`")));
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    /// Number of non-root nodes (equal to the number of edges).
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Non-root node labels in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    /// Edge labels in lexicographic order.
    pub fn edges(&self) -> Vec<&str> {
        let mut e: Vec<&str> = self.parents.values().map(|a| a.edge.as_str()).collect();
        e.sort_unstable();
        e
    }

    pub fn contains(&self, node: &str) -> bool {
        self.parents.contains_key(node)
    }

    pub fn attachment(&self, node: &str) -> Option<&Attachment> {
        self.parents.get(node)
    }

    pub fn attachments(&self) -> impl Iterator<Item = (&str, &Attachment)> {
        self.parents.iter().map(|(n, a)| (n.as_str(), a))
    }

    pub fn parent(&self, node: &str) -> Option<&str> {
        self.parents.get(node).map(|a| a.parent.as_str())
    }

    /// The node whose incoming edge is `edge`.
    pub fn child_of_edge(&self, edge: &str) -> Option<&str> {
        self.parents.iter().find(|(_, a)| a.edge == edge).map(|(n, _)| n.as_str())
    }

    /// Direct children of `node` (which may be the root), sorted.
    pub fn children(&self, node: &str) -> Vec<&str> {
        self.parents.iter().filter(|(_, a)| a.parent == node).map(|(n, _)| n.as_str()).collect()
    }

    pub fn is_leaf(&self, node: &str) -> bool {
        self.contains(node) && !self.parents.values().any(|a| a.parent == node)
    }

    /// Edges on the path from `node` up to the root, nearest first.
    pub fn path_edges(&self, node: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(a) = self.parents.get(cur) {
            out.push(a.edge.as_str());
            cur = &a.parent;
        }
        out
    }

    /// Nodes on the path from `node` to the root, excluding both ends.
    pub fn ancestors(&self, node: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = self.parent(node);
        while let Some(p) = cur {
            if p == self.root {
                break;
            }
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    pub fn depth(&self, node: &str) -> usize {
        self.path_edges(node).len()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes().map(|n| self.depth(n)).max().unwrap_or(0)
    }

    /// Returns a copy with `node` re-attached under `parent` through its
    /// current edge. Used by the structural operations; no validation.
    pub(crate) fn with_parent(&self, node: &str, parent: &str) -> Self {
        let mut t = self.clone();
        if let Some(a) = t.parents.get_mut(node) {
            a.parent = parent.to_string();
        }
        t
    }

    /// Same tree with a different root label.
    pub fn with_root_label(&self, root: &str) -> Result<Self> {
        let old = &self.root;
        Self::new(
            root,
            self.parents.iter().map(|(n, a)| {
                let p = if &a.parent == old { root.to_string() } else { a.parent.clone() };
                (n.clone(), p, a.edge.clone())
            }),
        )
    }

    /// Renames nodes through `map`; labels missing from the map are kept.
    pub fn relabel_nodes(&self, map: &BTreeMap<String, String>) -> Result<Self> {
        let f = |s: &String| map.get(s).cloned().unwrap_or_else(|| s.clone());
        Self::new(
            self.root.clone(),
            self.parents.iter().map(|(n, a)| {
                let p = if a.parent == self.root { a.parent.clone() } else { f(&a.parent) };
                (f(n), p, a.edge.clone())
            }),
        )
    }

    /// Graphviz rendering with edge labels, children in label order.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph hetero_out_tree {\n");
        let _ = writeln!(s, "  \"{}\" [shape=box];", escape(&self.root));
        let mut queue = std::collections::VecDeque::from([self.root.as_str()]);
        while let Some(p) = queue.pop_front() {
            for c in self.children(p) {
                let edge = &self.parents[c].edge;
                let _ = writeln!(s, "  \"{}\" -> \"{}\" [label=\"{}\"];", escape(p), escape(c), escape(edge));
                queue.push_back(c);
            }
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Trees are semi-equivalent when every node has the same parent node,
/// regardless of which edge it hangs from.
pub fn semi_equivalent(a: &HeteroOutTree, b: &HeteroOutTree) -> bool {
    a.len() == b.len()
        && a.parents.iter().all(|(n, att)| match b.parents.get(n) {
            Some(o) => att.parent == o.parent || (att.parent == a.root && o.parent == b.root),
            None => false,
        })
}

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    root: String,
    nodes: Vec<String>,
    edges: Vec<String>,
    parents: Vec<ParentDoc>,
}

#[derive(Serialize, Deserialize)]
struct ParentDoc {
    node: String,
    parent: String,
    edge: String,
}

impl Serialize for HeteroOutTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TopologyDoc {
            root: self.root.clone(),
            nodes: self.parents.keys().cloned().collect(),
            edges: self.edges().into_iter().map(String::from).collect(),
            parents: self
                .parents
                .iter()
                .map(|(n, a)| ParentDoc { node: n.clone(), parent: a.parent.clone(), edge: a.edge.clone() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeteroOutTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = TopologyDoc::deserialize(d)?;
        let tree = HeteroOutTree::new(doc.root, doc.parents.into_iter().map(|p| (p.node, p.parent, p.edge)))
            .map_err(D::Error::custom)?;
        let nodes: BTreeSet<&str> = doc.nodes.iter().map(String::as_str).collect();
        let edges: BTreeSet<&str> = doc.edges.iter().map(String::as_str).collect();
        if nodes != tree.nodes().collect() || nodes.len() != doc.nodes.len() {
            return Err(D::Error::custom("`nodes` does not match the nodes listed in `parents`"));
        }
        if edges != tree.edges().into_iter().collect() || edges.len() != doc.edges.len() {
            return Err(D::Error::custom("`edges` does not match the edges listed in `parents`"));
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_tree() -> HeteroOutTree {
        HeteroOutTree::new(
            ROOT,
            [
                ("b", "root", "e1"),
                ("d", "b", "e3"),
                ("f", "b", "e2"),
                ("a", "d", "e4"),
                ("c", "d", "e5"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn counts_and_depths() {
        let t = sample_tree();
        assert_eq!(t.len(), 5);
        assert_eq!(t.edges(), vec!["e1", "e2", "e3", "e4", "e5"]);
        assert_eq!(t.depth("a"), 3);
        assert_eq!(t.depth("b"), 1);
        assert_eq!(t.path_edges("c"), vec!["e5", "e3", "e1"]);
        assert_eq!(t.ancestors("c"), vec!["d", "b"]);
        assert!(t.is_leaf("f"));
        assert!(!t.is_leaf("d"));
        assert_eq!(t.children("d"), vec!["a", "c"]);
        assert_eq!(t.child_of_edge("e2"), Some("f"));
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(HeteroOutTree::new(ROOT, [("a", "root", "e1"), ("b", "root", "e1")]).is_err());
        assert!(HeteroOutTree::new(ROOT, [("a", "b", "e1"), ("b", "a", "e2")]).is_err());
        assert!(HeteroOutTree::new(ROOT, [("a", "zzz", "e1")]).is_err());
        assert!(HeteroOutTree::new(ROOT, [("a", "root", "e1"), ("a", "root", "e2")]).is_err());
    }

    #[test]
    fn equality_ignores_root_label() {
        let t = sample_tree();
        let u = t.with_root_label("base").unwrap();
        assert_eq!(t, u);
        let v = t.with_parent("f", "d");
        assert_ne!(t, v);
    }

    #[test]
    fn semi_equivalence() {
        let t1 = HeteroOutTree::new(ROOT, [("a", "root", "e1"), ("b", "a", "e2")]).unwrap();
        let t2 = HeteroOutTree::new(ROOT, [("a", "root", "e2"), ("b", "a", "e1")]).unwrap();
        let t3 = HeteroOutTree::new(ROOT, [("a", "root", "e1"), ("b", "root", "e2")]).unwrap();
        assert!(semi_equivalent(&t1, &t2));
        assert_ne!(t1, t2);
        assert!(!semi_equivalent(&t1, &t3));
    }

    #[test]
    fn json_round_trip() {
        let t = sample_tree();
        let s = serde_json::to_string(&t).unwrap();
        let back: HeteroOutTree = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
        let bad = s.replace("\"e5\"]", "\"e9\"]");
        assert!(serde_json::from_str::<HeteroOutTree>(&bad).is_err());
    }

    #[test]
    fn dot_lists_labeled_edges() {
        let dot = sample_tree().to_dot();
        for line in [
            "\"root\" -> \"b\" [label=\"e1\"]",
            "\"b\" -> \"d\" [label=\"e3\"]",
            "\"b\" -> \"f\" [label=\"e2\"]",
            "\"d\" -> \"a\" [label=\"e4\"]",
            "\"d\" -> \"c\" [label=\"e5\"]",
        ] {
            assert!(dot.contains(line), "missing {line} in\n{dot}");
        }
    }
}
