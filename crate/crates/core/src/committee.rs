//! Vote accounting, vote entropy and majority voting over a tree committee.

use crate::error::{Error, Result};
use crate::tree::SparseTree;

#[derive(Debug, Clone)]
pub struct Committee {
    members: Vec<SparseTree>,
    weights: Option<Vec<f64>>,
}

impl Committee {
    /// An unweighted committee.
    pub fn new(members: Vec<SparseTree>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::contract("committee needs at least one member"));
        }
        Ok(Self {
            members,
            weights: None,
        })
    }

    pub fn weighted(members: Vec<SparseTree>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::contract("committee needs at least one member"));
        }
        if weights.len() != members.len() {
            return Err(Error::contract(format!(
                "{} weights for {} members",
                weights.len(),
                members.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::contract(format!("weight {w} is not a positive number")));
        }
        Ok(Self {
            members,
            weights: Some(weights),
        })
    }

    pub fn members(&self) -> &[SparseTree] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Per-class sum of member weights.
    pub fn vote_counts(&self, row: &[u8], n_classes: usize) -> Vec<f64> {
        let mut tally = vec![0.0; n_classes];
        for (i, m) in self.members.iter().enumerate() {
            tally[m.predict(row)] += self.weight(i);
        }
        tally
    }

    /// Vote entropy in nats.
    pub fn vote_entropy(&self, row: &[u8], n_classes: usize) -> f64 {
        entropy_of_tally(&self.vote_counts(row, n_classes))
    }

    /// Class with the largest tally, ties to the smallest class id.
    pub fn ensemble_predict(&self, row: &[u8], n_classes: usize) -> usize {
        argmax_tally(&self.vote_counts(row, n_classes))
    }
}

/// `-sum p ln p` over the normalized tally; empty classes contribute nothing.
pub fn entropy_of_tally(tally: &[f64]) -> f64 {
    let total: f64 = tally.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h = tally
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum::<f64>();
    // a unanimous vote gives -1 * ln 1 = -0.0
    h.max(0.0)
}

pub fn argmax_tally(tally: &[f64]) -> usize {
    let mut best = 0;
    for (y, &v) in tally.iter().enumerate().skip(1) {
        if v > tally[best] {
            best = y;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A member that predicts `y` everywhere.
    fn constant(y: usize) -> SparseTree {
        SparseTree::leaf(y)
    }

    fn committee(preds: &[usize]) -> Committee {
        Committee::new(preds.iter().map(|&y| constant(y)).collect()).unwrap()
    }

    #[test]
    fn tallies() {
        assert_eq!(committee(&[0, 0, 0]).vote_counts(&[], 2), vec![3.0, 0.0]);
        assert_eq!(committee(&[0, 0, 1]).vote_counts(&[], 2), vec![2.0, 1.0]);
        let w = Committee::weighted(
            [0, 0, 1, 2].iter().map(|&y| constant(y)).collect(),
            vec![4.0, 3.0, 1.0, 1.0],
        )
        .unwrap();
        let t = w.vote_counts(&[], 3);
        assert_eq!(t, vec![7.0, 1.0, 1.0]);
        assert_eq!(t.iter().sum::<f64>(), 9.0);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(committee(&[1, 1, 1]).vote_entropy(&[], 2), 0.0);
        let h = committee(&[0, 0, 1]).vote_entropy(&[], 2);
        let oracle = -(2.0f64 / 3.0) * (2.0f64 / 3.0).ln() - (1.0f64 / 3.0) * (1.0f64 / 3.0).ln();
        assert!((h - oracle).abs() < 1e-15);
        assert!((h - 0.636514).abs() < 1e-6);
        let h = committee(&[0, 0, 1, 2]).vote_entropy(&[], 3);
        assert!((h - 1.039721).abs() < 1e-6);
    }

    #[test]
    fn majority_with_ties() {
        assert_eq!(argmax_tally(&[2.0, 1.0]), 0);
        assert_eq!(argmax_tally(&[1.0, 1.0]), 0);
        assert_eq!(argmax_tally(&[1.0, 5.0]), 1);
        assert_eq!(committee(&[1, 0]).ensemble_predict(&[], 2), 0);
    }

    #[test]
    fn invalid_committees() {
        assert!(Committee::new(vec![]).is_err());
        assert!(Committee::weighted(vec![constant(0)], vec![]).is_err());
        assert!(Committee::weighted(vec![constant(0)], vec![0.0]).is_err());
        assert!(Committee::weighted(vec![constant(0)], vec![-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_unanimity(preds in prop::collection::vec(0usize..4, 1..20)) {
            let c = committee(&preds);
            let h = c.vote_entropy(&[], 4);
            prop_assert!(h >= 0.0 && h <= 4f64.ln() + 1e-12);
            let unanimous = preds.iter().all(|&y| y == preds[0]);
            prop_assert_eq!(h == 0.0, unanimous);
        }
    }
}
