//! Exhaustive reference enumeration for small instances.
//!
//! Generates every tree skeleton up to the depth cap, routes the training rows
//! through it, labels each leaf by majority (one tree per tied label) and
//! evaluates the objective by predicting every row. Shares nothing with the
//! memoized search beyond the objective formula and the membership test.

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::tree::{canonicalize, objective, SparseTree};

use super::{
    within_threshold, EnumConfig, RashomonMember, RashomonSet, BRUTE_FORCE_MAX_DEPTH,
    BRUTE_FORCE_MAX_FEATURES,
};

#[derive(Debug, Clone)]
enum Skeleton {
    Leaf,
    Split(usize, Box<Skeleton>, Box<Skeleton>),
}

fn skeletons(depth: usize, n_features: usize, used: &mut Vec<usize>) -> Vec<Skeleton> {
    let mut out = vec![Skeleton::Leaf];
    if depth == 0 {
        return out;
    }
    for f in 0..n_features {
        if used.contains(&f) {
            continue;
        }
        used.push(f);
        let below = skeletons(depth - 1, n_features, used);
        used.pop();
        for z in &below {
            for o in &below {
                out.push(Skeleton::Split(f, Box::new(z.clone()), Box::new(o.clone())));
            }
        }
    }
    out
}

/// Labels every leaf of `skel` with each of its majority classes. Returns no
/// trees if some split sends zero rows to one side.
fn label(skel: &Skeleton, data: &BinaryDataset, rows: &[usize]) -> Vec<SparseTree> {
    match skel {
        Skeleton::Leaf => {
            let mut counts = vec![0usize; data.n_classes()];
            for &r in rows {
                counts[data.label(r)] += 1;
            }
            let max = *counts.iter().max().expect("at least two classes");
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == max)
                .map(|(y, _)| SparseTree::leaf(y))
                .collect()
        }
        Skeleton::Split(f, zero, one) => {
            let (ones, zeros): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| data.row(r)[*f] == 1);
            if ones.is_empty() || zeros.is_empty() {
                return Vec::new();
            }
            let zs = label(zero, data, &zeros);
            let os = label(one, data, &ones);
            let mut out = Vec::with_capacity(zs.len() * os.len());
            for z in &zs {
                for o in &os {
                    out.push(SparseTree::split(*f, z.clone(), o.clone()));
                }
            }
            out
        }
    }
}

/// Reference Rashomon set by exhaustive generation. Limited to
/// [`BRUTE_FORCE_MAX_FEATURES`] features and depth [`BRUTE_FORCE_MAX_DEPTH`].
pub fn brute_force_enumerate(
    data: &BinaryDataset,
    rows: &[usize],
    cfg: &EnumConfig,
) -> Result<RashomonSet> {
    cfg.validate()?;
    if data.n_features() > BRUTE_FORCE_MAX_FEATURES || cfg.depth_cap > BRUTE_FORCE_MAX_DEPTH {
        return Err(Error::contract(format!(
            "brute force needs at most {BRUTE_FORCE_MAX_FEATURES} features and depth \
             {BRUTE_FORCE_MAX_DEPTH}, got {} and {}",
            data.n_features(),
            cfg.depth_cap
        )));
    }
    if rows.is_empty() {
        return Err(Error::contract("cannot enumerate trees on an empty row set"));
    }

    let mut all = Vec::new();
    for skel in skeletons(cfg.depth_cap, data.n_features(), &mut Vec::new()) {
        for tree in label(&skel, data, rows) {
            let obj = objective(&tree, data, rows, cfg.lambda)?;
            all.push((tree, obj));
        }
    }
    let optimal = all
        .iter()
        .map(|(_, o)| o.regularized)
        .fold(f64::INFINITY, f64::min);
    let members = all
        .into_iter()
        .filter(|(_, o)| within_threshold(o.regularized, optimal, cfg.epsilon))
        .map(|(tree, objective)| RashomonMember {
            key: canonicalize(&tree),
            tree,
            objective,
        })
        .collect();
    Ok(RashomonSet::from_members(members, cfg, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeleton_counts() {
        // depth 1 over 3 features: leaf + 3 stumps
        assert_eq!(skeletons(1, 3, &mut Vec::new()).len(), 4);
        // depth 2 over 2 features: leaf + 2 * (1 + 1)^2
        assert_eq!(skeletons(2, 2, &mut Vec::new()).len(), 9);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let data = BinaryDataset::new(vec![vec![0; 9]], vec![0], (0..9).map(|i| format!("f{i}")).collect(), 2)
            .unwrap();
        assert!(brute_force_enumerate(&data, &[0], &EnumConfig::default().with_depth_cap(1)).is_err());
        assert!(brute_force_enumerate(&data.select(&[0]).unwrap(), &[0], &EnumConfig::default()).is_err());
    }

    #[test]
    fn xor_by_exhaustion() {
        let data = BinaryDataset::new(
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            vec![0, 1, 1, 0],
            vec!["x0".into(), "x1".into()],
            2,
        )
        .unwrap();
        let cfg = EnumConfig::new(0.01, 0.02).with_depth_cap(2);
        let set = brute_force_enumerate(&data, &[0, 1, 2, 3], &cfg).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.members.iter().all(|m| m.tree.n_leaves() == 4));
    }

    #[test]
    fn pure_rows_by_exhaustion() {
        let data = BinaryDataset::new(vec![vec![0], vec![1]], vec![0, 0], vec!["a".into()], 2).unwrap();
        let set = brute_force_enumerate(&data, &[0, 1], &EnumConfig::new(0.01, 0.005).with_depth_cap(2)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.members[0].tree, SparseTree::leaf(0));
    }
}
