//! Grouping Rashomon trees by how they classify a reference set.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::enumerator::RashomonSet;
use crate::error::{Error, Result};
use crate::tree::SparseTree;

/// Trees per parallel work unit when computing patterns.
const CHUNK: usize = 2048;

/// A set of trees with identical predictions on the reference rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationPattern {
    pub predictions: Vec<usize>,
    /// Indices into [`RashomonSet::members`].
    pub member_ids: Vec<usize>,
    /// The member with the fewest leaves, ties to the smallest canonical key.
    pub representative_id: usize,
}

impl ClassificationPattern {
    pub fn multiplicity(&self) -> usize {
        self.member_ids.len()
    }
}

fn check_widths(reference: &[&[u8]], n_features: Option<usize>) -> Result<()> {
    let Some(width) = n_features.or_else(|| reference.first().map(|r| r.len())) else {
        return Ok(());
    };
    if let Some(bad) = reference.iter().position(|r| r.len() != width) {
        return Err(Error::contract(format!(
            "reference row {bad} has {} features, expected {width}",
            reference[bad].len()
        )));
    }
    Ok(())
}

/// Predictions of `tree` on each reference row, in order.
pub fn compute_pattern(
    tree: &SparseTree,
    reference: &[&[u8]],
    n_features: usize,
) -> Result<Vec<usize>> {
    check_widths(reference, Some(n_features))?;
    reference
        .iter()
        .map(|row| tree.try_predict(row, n_features))
        .collect()
}

/// Partitions the set's trees by prediction vector on `reference`. Groups come
/// out ordered by their best member, i.e. by `(objective, key)`.
pub fn group_patterns(set: &RashomonSet, reference: &[&[u8]]) -> Result<Vec<ClassificationPattern>> {
    if set.is_empty() {
        return Err(Error::contract("cannot group an empty Rashomon set"));
    }
    check_widths(reference, None)?;
    if let (Some(row), Some(f)) = (reference.first(), set.trees().filter_map(|t| t.max_feature()).max()) {
        if f >= row.len() {
            return Err(Error::contract(format!(
                "trees split on feature {f} but reference rows have {}",
                row.len()
            )));
        }
    }

    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut groups: Vec<(Vec<u32>, Vec<usize>)> = Vec::new();
    for (chunk_no, chunk) in set.members.chunks(CHUNK).enumerate() {
        let vectors: Vec<Vec<u32>> = chunk
            .par_iter()
            .map(|m| reference.iter().map(|row| m.tree.predict(row) as u32).collect())
            .collect();
        for (offset, v) in vectors.into_iter().enumerate() {
            let id = chunk_no * CHUNK + offset;
            match index.get(&v) {
                Some(&g) => groups[g].1.push(id),
                None => {
                    index.insert(v.clone(), groups.len());
                    groups.push((v, vec![id]));
                }
            }
        }
    }

    let members = &set.members;
    let mut patterns: Vec<ClassificationPattern> = groups
        .into_iter()
        .map(|(v, ids)| {
            let representative_id = *ids
                .iter()
                .min_by(|&&a, &&b| {
                    let (ma, mb) = (&members[a], &members[b]);
                    ma.tree
                        .n_leaves()
                        .cmp(&mb.tree.n_leaves())
                        .then_with(|| ma.key.cmp(&mb.key))
                })
                .expect("groups are nonempty");
            ClassificationPattern {
                predictions: v.into_iter().map(|y| y as usize).collect(),
                member_ids: ids,
                representative_id,
            }
        })
        .collect();

    let best = |p: &ClassificationPattern| {
        p.member_ids
            .iter()
            .map(|&i| &members[i])
            .min_by(|a, b| {
                a.objective
                    .regularized
                    .total_cmp(&b.objective.regularized)
                    .then_with(|| a.key.cmp(&b.key))
            })
            .expect("groups are nonempty")
    };
    patterns.sort_by(|a, b| {
        let (ba, bb) = (best(a), best(b));
        ba.objective
            .regularized
            .total_cmp(&bb.objective.regularized)
            .then_with(|| ba.key.cmp(&bb.key))
    });
    Ok(patterns)
}

/// One tree per pattern, in group order.
pub fn unique_representatives(groups: &[ClassificationPattern], set: &RashomonSet) -> Vec<SparseTree> {
    groups
        .iter()
        .map(|g| set.members[g.representative_id].tree.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryDataset;
    use crate::enumerator::{enumerate_rashomon, EnumConfig, RashomonMember};
    use crate::tree::{canonicalize, Objective};

    fn leaf(y: usize) -> SparseTree {
        SparseTree::leaf(y)
    }

    fn xor_tree() -> SparseTree {
        SparseTree::split(
            0,
            SparseTree::split(1, leaf(0), leaf(1)),
            SparseTree::split(1, leaf(1), leaf(0)),
        )
    }

    fn set_of(trees: Vec<SparseTree>) -> RashomonSet {
        let members = trees
            .into_iter()
            .enumerate()
            .map(|(i, tree)| RashomonMember {
                key: canonicalize(&tree),
                objective: Objective::from_counts(i, 100, tree.n_leaves(), 0.01),
                tree,
            })
            .collect();
        RashomonSet::from_members(members, &EnumConfig::new(0.01, 1.0), false)
    }

    #[test]
    fn single_patterns() {
        let rows: Vec<&[u8]> = vec![&[0, 0], &[0, 1], &[1, 0]];
        assert_eq!(compute_pattern(&leaf(1), &rows, 2).unwrap(), vec![1, 1, 1]);
        let all: Vec<&[u8]> = vec![&[0, 0], &[0, 1], &[1, 0], &[1, 1]];
        assert_eq!(compute_pattern(&xor_tree(), &all, 2).unwrap(), vec![0, 1, 1, 0]);
        assert!(compute_pattern(&xor_tree(), &[], 2).unwrap().is_empty());
        let bad: Vec<&[u8]> = vec![&[0]];
        assert!(compute_pattern(&xor_tree(), &bad, 2).is_err());
    }

    #[test]
    fn four_groups_of_nine_trees() {
        // one reference row per feature pair; build 9 trees falling into groups of 4, 3, 1, 1
        let stump = |f, a, b| SparseTree::split(f, leaf(a), leaf(b));
        let trees = vec![
            stump(0, 0, 1),
            SparseTree::split(0, leaf(0), stump(1, 1, 1)),
            SparseTree::split(0, leaf(0), stump(2, 1, 1)),
            SparseTree::split(0, stump(1, 0, 0), leaf(1)),
            stump(1, 0, 1),
            SparseTree::split(1, leaf(0), stump(2, 1, 1)),
            SparseTree::split(1, stump(2, 0, 0), leaf(1)),
            leaf(0),
            leaf(1),
        ];
        let set = set_of(trees);
        let reference: Vec<&[u8]> = vec![&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]];
        let groups = group_patterns(&set, &reference).unwrap();
        let mut sizes: Vec<usize> = groups.iter().map(|g| g.multiplicity()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![4, 3, 1, 1]);
        let reps = unique_representatives(&groups, &set);
        assert_eq!(reps.len(), 4);
        // the sparsest tree represents each group
        assert!(reps.iter().all(|t| t.n_leaves() <= 2));
    }

    #[test]
    fn degenerate_groupings() {
        let set = set_of(vec![leaf(0), SparseTree::split(0, leaf(0), leaf(0))]);
        let reference: Vec<&[u8]> = vec![&[0], &[1]];
        let groups = group_patterns(&set, &reference).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].multiplicity(), 2);
        assert_eq!(set.members[groups[0].representative_id].tree, leaf(0));

        let set = set_of(vec![leaf(0), leaf(1), SparseTree::split(0, leaf(0), leaf(1))]);
        let groups = group_patterns(&set, &reference).unwrap();
        assert_eq!(groups.len(), 3);
        assert_eq!(unique_representatives(&groups, &set).len(), 3);
    }

    #[test]
    fn partition_law_on_enumerated_set() {
        let data = BinaryDataset::new(
            vec![vec![0, 0, 1], vec![0, 1, 1], vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1]],
            vec![0, 1, 1, 0, 1],
            vec!["a".into(), "b".into(), "c".into()],
            2,
        )
        .unwrap();
        let set = enumerate_rashomon(&data, &[0, 1, 2, 3, 4], &EnumConfig::new(0.01, 0.3).with_depth_cap(2))
            .unwrap();
        let reference: Vec<&[u8]> = (0..5).map(|i| data.row(i)).collect();
        let groups = group_patterns(&set, &reference).unwrap();
        let total: usize = groups.iter().map(|g| g.multiplicity()).sum();
        assert_eq!(total, set.len());
        let mut seen = std::collections::HashSet::new();
        for g in &groups {
            assert!(seen.insert(g.predictions.clone()));
            assert!(g.member_ids.contains(&g.representative_id));
            for &m in &g.member_ids {
                let p = compute_pattern(&set.members[m].tree, &reference, 3).unwrap();
                assert_eq!(p, g.predictions);
            }
        }
    }
}
