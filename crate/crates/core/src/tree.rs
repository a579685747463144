//! Sparse binary decision trees over 0/1 features.
//!
//! Nodes are reference counted so that enumerated trees can share subtrees;
//! a Rashomon set with a hundred thousand members mostly consists of a few
//! thousand distinct subtrees stitched together.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(usize),
    /// Rows with `feature == 0` go to `zero`, the rest to `one`.
    Split {
        feature: usize,
        zero: Arc<Node>,
        one: Arc<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseTree {
    root: Arc<Node>,
    depth: usize,
    n_leaves: usize,
}

impl SparseTree {
    pub fn leaf(label: usize) -> Self {
        Self {
            root: Arc::new(Node::Leaf(label)),
            depth: 0,
            n_leaves: 1,
        }
    }

    pub fn split(feature: usize, zero: SparseTree, one: SparseTree) -> Self {
        Self {
            depth: 1 + zero.depth.max(one.depth),
            n_leaves: zero.n_leaves + one.n_leaves,
            root: Arc::new(Node::Split {
                feature,
                zero: zero.root,
                one: one.root,
            }),
        }
    }

    /// Wraps an existing node; depth and leaf count are recomputed.
    pub fn from_node(root: Arc<Node>) -> Self {
        fn walk(n: &Node) -> (usize, usize) {
            match n {
                Node::Leaf(_) => (0, 1),
                Node::Split { zero, one, .. } => {
                    let (dz, lz) = walk(zero);
                    let (d1, l1) = walk(one);
                    (1 + dz.max(d1), lz + l1)
                }
            }
        }
        let (depth, n_leaves) = walk(&root);
        Self {
            root,
            depth,
            n_leaves,
        }
    }

    pub(crate) fn from_parts(root: Arc<Node>, depth: usize, n_leaves: usize) -> Self {
        Self {
            root,
            depth,
            n_leaves,
        }
    }

    pub fn root(&self) -> &Arc<Node> {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_internal(&self) -> usize {
        self.n_leaves - 1
    }

    /// Follows the 0/1 branches down to a leaf.
    ///
    /// Panics if the row is narrower than a feature index used by the tree;
    /// use [`try_predict`](Self::try_predict) when the width is not known to match.
    #[inline]
    pub fn predict(&self, row: &[u8]) -> usize {
        let mut node = &*self.root;
        loop {
            match node {
                Node::Leaf(label) => return *label,
                Node::Split { feature, zero, one } => {
                    node = if row[*feature] == 0 { zero } else { one };
                }
            }
        }
    }

    pub fn try_predict(&self, row: &[u8], n_features: usize) -> Result<usize> {
        if row.len() != n_features {
            return Err(Error::contract(format!(
                "row has {} features, expected {n_features}",
                row.len()
            )));
        }
        if let Some(f) = self.max_feature() {
            if f >= n_features {
                return Err(Error::contract(format!(
                    "tree splits on feature {f} but rows have {n_features}"
                )));
            }
        }
        Ok(self.predict(row))
    }

    pub fn max_feature(&self) -> Option<usize> {
        fn walk(n: &Node) -> Option<usize> {
            match n {
                Node::Leaf(_) => None,
                Node::Split { feature, zero, one } => {
                    Some(*feature).max(walk(zero)).max(walk(one))
                }
            }
        }
        walk(&self.root)
    }

    /// Checks the structural invariants: feature indices in range, no feature
    /// repeated on a root-to-leaf path, labels in range and depth within cap.
    pub fn validate(&self, n_features: usize, n_classes: usize, depth_cap: usize) -> Result<()> {
        fn walk(
            n: &Node,
            path: &mut Vec<usize>,
            n_features: usize,
            n_classes: usize,
        ) -> Result<()> {
            match n {
                Node::Leaf(label) if *label >= n_classes => Err(Error::contract(format!(
                    "leaf label {label} outside 0..{n_classes}"
                ))),
                Node::Leaf(_) => Ok(()),
                Node::Split { feature, zero, one } => {
                    if *feature >= n_features {
                        return Err(Error::contract(format!(
                            "feature {feature} outside 0..{n_features}"
                        )));
                    }
                    if path.contains(feature) {
                        return Err(Error::contract(format!(
                            "feature {feature} repeats on a root-to-leaf path"
                        )));
                    }
                    path.push(*feature);
                    walk(zero, path, n_features, n_classes)?;
                    walk(one, path, n_features, n_classes)?;
                    path.pop();
                    Ok(())
                }
            }
        }
        if self.depth > depth_cap {
            return Err(Error::contract(format!(
                "depth {} exceeds cap {depth_cap}",
                self.depth
            )));
        }
        walk(&self.root, &mut Vec::new(), n_features, n_classes)
    }

    pub fn key(&self) -> TreeKey {
        canonicalize(self)
    }
}

/// Regularized training objective of a tree: misclassification rate plus
/// `lambda` per leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub misclass_count: usize,
    pub misclass_rate: f64,
    pub n_leaves: usize,
    pub regularized: f64,
    pub lambda: f64,
}

impl Objective {
    /// The one place the objective is computed from counts. The enumerator,
    /// the brute-force oracle and [`objective`] all go through here, so equal
    /// counts give bit-identical values.
    #[inline]
    pub fn from_counts(misclass_count: usize, n_rows: usize, n_leaves: usize, lambda: f64) -> Self {
        let misclass_rate = misclass_count as f64 / n_rows as f64;
        Self {
            misclass_count,
            misclass_rate,
            n_leaves,
            regularized: misclass_rate + lambda * n_leaves as f64,
            lambda,
        }
    }
}

/// Evaluates the regularized objective of `tree` on `rows` of `data`.
pub fn objective(
    tree: &SparseTree,
    data: &BinaryDataset,
    rows: &[usize],
    lambda: f64,
) -> Result<Objective> {
    if rows.is_empty() {
        return Err(Error::contract("objective needs at least one row"));
    }
    let errors = rows
        .iter()
        .filter(|&&r| tree.predict(data.row(r)) != data.label(r))
        .count();
    Ok(Objective::from_counts(errors, rows.len(), tree.n_leaves(), lambda))
}

/// Pre-order token encoding of a tree: `2 * label` for a leaf and
/// `2 * feature + 1` for a split. Every node has a fixed arity, so the
/// sequence decodes uniquely and equal keys mean equal trees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeKey(pub Vec<u32>);

pub fn canonicalize(tree: &SparseTree) -> TreeKey {
    fn walk(n: &Node, out: &mut Vec<u32>) {
        match n {
            Node::Leaf(label) => out.push(2 * *label as u32),
            Node::Split { feature, zero, one } => {
                out.push(2 * *feature as u32 + 1);
                walk(zero, out);
                walk(one, out);
            }
        }
    }
    let mut out = Vec::with_capacity(2 * tree.n_leaves);
    walk(&tree.root, &mut out);
    TreeKey(out)
}

impl TreeKey {
    /// Rebuilds the tree a key was made from.
    pub fn decode(&self) -> Result<SparseTree> {
        fn walk(tokens: &[u32], pos: &mut usize) -> Result<SparseTree> {
            let t = *tokens
                .get(*pos)
                .ok_or_else(|| Error::contract("truncated tree key"))?;
            *pos += 1;
            if t % 2 == 0 {
                Ok(SparseTree::leaf((t / 2) as usize))
            } else {
                let zero = walk(tokens, pos)?;
                let one = walk(tokens, pos)?;
                Ok(SparseTree::split((t / 2) as usize, zero, one))
            }
        }
        let mut pos = 0;
        let tree = walk(&self.0, &mut pos)?;
        if pos != self.0.len() {
            return Err(Error::contract("trailing tokens in tree key"));
        }
        Ok(tree)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(label) => write!(f, "(leaf {label})"),
            Node::Split { feature, zero, one } => write!(f, "(f{feature} {zero} {one})"),
        }
    }
}

impl fmt::Display for SparseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for SparseTree {
    type Err = Error;

    /// Parses the `(f3 (leaf 0) (f1 (leaf 1) (leaf 0)))` form written by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let tree = parse_sexpr(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::contract(format!("trailing input after tree in {s:?}")));
        }
        Ok(tree)
    }
}

fn parse_sexpr(tokens: &[&str], pos: &mut usize) -> Result<SparseTree> {
    let mut next = |what: &str| -> Result<String> {
        let t = tokens
            .get(*pos)
            .ok_or_else(|| Error::contract(format!("unexpected end of tree text, wanted {what}")))?;
        *pos += 1;
        Ok(t.to_string())
    };
    if next("'('")? != "(" {
        return Err(Error::contract("tree text must start with '('"));
    }
    let head = next("node head")?;
    let tree = if head == "leaf" {
        let label = next("leaf label")?;
        SparseTree::leaf(
            label
                .parse()
                .map_err(|_| Error::contract(format!("bad leaf label {label:?}")))?,
        )
    } else if let Some(idx) = head.strip_prefix('f') {
        let feature = idx
            .parse()
            .map_err(|_| Error::contract(format!("bad feature {head:?}")))?;
        let zero = parse_sexpr(tokens, pos)?;
        let one = parse_sexpr(tokens, pos)?;
        SparseTree::split(feature, zero, one)
    } else {
        return Err(Error::contract(format!("unknown node head {head:?}")));
    };
    let close = tokens.get(*pos).copied();
    *pos += 1;
    if close != Some(")") {
        return Err(Error::contract("missing ')' in tree text"));
    }
    Ok(tree)
}
