use serde::{Deserialize, Serialize};

use super::cart::DecisionTree;
use super::stump::Stump;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::slack::PredictionMatrix;

/// One column-generating classifier of an aggregated ensemble.
///
/// Trees are owned by the [`Ensemble`] and referenced by index, so a tree and
/// all of its node specialists share one copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleMember {
    Stump(Stump),
    Tree { tree: usize },
    /// Awake only on examples routed through internal node `node`; when awake
    /// it predicts the tree's leaf label.
    Specialist { tree: usize, node: usize },
}

impl EnsembleMember {
    pub fn is_specialist(&self) -> bool {
        matches!(self, EnsembleMember::Specialist { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<DecisionTree>,
    pub members: Vec<EnsembleMember>,
}

/// A specialist reference produced by [`extract_specialists`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialistNode {
    pub node: usize,
}

/// One specialist per internal node (root included), in preorder. A tree
/// that is a single leaf yields none.
pub fn extract_specialists(tree: &DecisionTree) -> Vec<SpecialistNode> {
    tree.internal_nodes()
        .into_iter()
        .map(|node| SpecialistNode { node })
        .collect()
}

/// Specialist output on `x`: 0 when asleep, else the tree's prediction.
pub fn specialist_predict(tree: &DecisionTree, node: usize, x: &[f64]) -> Result<i8> {
    tree.check_width(x)?;
    let mut awake = false;
    let label = tree.walk(x, |id| awake |= id == node);
    Ok(if awake { label } else { 0 })
}

impl Ensemble {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn add_tree(&mut self, tree: DecisionTree) -> usize {
        self.trees.push(tree);
        self.trees.len() - 1
    }

    pub fn push(&mut self, member: EnsembleMember) {
        self.members.push(member);
    }

    /// Members for a tree already stored at `tree`: its node specialists, or
    /// the whole tree when it has no internal node.
    pub fn tree_candidates(&self, tree: usize) -> Vec<EnsembleMember> {
        let specs = extract_specialists(&self.trees[tree]);
        if specs.is_empty() {
            vec![EnsembleMember::Tree { tree }]
        } else {
            specs
                .into_iter()
                .map(|s| EnsembleMember::Specialist { tree, node: s.node })
                .collect()
        }
    }

    /// Widest feature row any member needs.
    pub fn n_features(&self) -> usize {
        let trees = self.trees.iter().map(DecisionTree::n_features).max().unwrap_or(0);
        let stumps = self
            .members
            .iter()
            .filter_map(|m| match m {
                EnsembleMember::Stump(s) => Some(s.feature + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        trees.max(stumps)
    }

    pub fn check_width(&self, x: &[f64]) -> Result<()> {
        let need = self.n_features();
        if x.len() < need {
            Err(Error::DimensionMismatch {
                what: "feature row",
                expected: need,
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn predict_member_unchecked(&self, member: &EnsembleMember, x: &[f64]) -> f64 {
        match *member {
            EnsembleMember::Stump(s) => f64::from(s.predict(x)),
            EnsembleMember::Tree { tree } => f64::from(self.trees[tree].predict_unchecked(x)),
            EnsembleMember::Specialist { tree, node } => {
                let mut awake = false;
                let label = self.trees[tree].walk(x, |id| awake |= id == node);
                if awake {
                    f64::from(label)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn predict_member(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_width(x)?;
        Ok(self.predict_member_unchecked(&self.members[i], x))
    }

    /// `⟨x, σ⟩` over all members.
    pub fn score(&self, sigma: &[f64], x: &[f64]) -> Result<f64> {
        crate::error::check_len("weight vector", self.len(), sigma.len())?;
        self.check_width(x)?;
        Ok(self
            .members
            .iter()
            .zip(sigma)
            .filter(|(_, &w)| w != 0.0)
            .map(|(m, &w)| w * self.predict_member_unchecked(m, x))
            .sum())
    }

    /// Prediction matrix of `members` (which may reference this ensemble's
    /// trees) over the rows of `u`.
    pub(crate) fn prediction_rows(
        &self,
        members: &[EnsembleMember],
        u: &FeatureMatrix,
    ) -> Result<PredictionMatrix> {
        let n = u.n_rows();
        if n == 0 {
            return Err(Error::Empty("unlabeled set"));
        }
        if let Some(row) = u.rows().next() {
            self.check_width(row)?;
        }
        // node -> members awake there, per tree
        let mut at_node: Vec<Vec<Vec<usize>>> = self
            .trees
            .iter()
            .map(|t| vec![Vec::new(); t.node_count()])
            .collect();
        let mut rows: Vec<(Vec<u32>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); members.len()];
        let mut stumps = Vec::new();
        for (i, m) in members.iter().enumerate() {
            match *m {
                EnsembleMember::Stump(s) => stumps.push((i, s)),
                EnsembleMember::Tree { tree } => at_node[tree][0].push(i),
                EnsembleMember::Specialist { tree, node } => {
                    if !self.trees[tree].is_internal(node) {
                        return Err(Error::invalid(format!(
                            "specialist node {node} of tree {tree} is not internal"
                        )));
                    }
                    at_node[tree][node].push(i)
                }
            }
        }
        let used: Vec<usize> = (0..self.trees.len())
            .filter(|&t| at_node[t].iter().any(|v| !v.is_empty()))
            .collect();
        let mut path = Vec::new();
        for j in 0..n {
            let x = u.row(j);
            for &(i, s) in &stumps {
                rows[i].0.push(j as u32);
                rows[i].1.push(f64::from(s.predict(x)));
            }
            for &t in &used {
                path.clear();
                let label = f64::from(self.trees[t].walk(x, |id| path.push(id)));
                for &node in &path {
                    for &i in &at_node[t][node] {
                        rows[i].0.push(j as u32);
                        rows[i].1.push(label);
                    }
                }
            }
        }
        Ok(PredictionMatrix::from_sorted_rows(n, rows))
    }
}

/// Members × examples predictions of the whole ensemble on `u`.
///
/// The awake count of member `i` (its `n_i`) is `F.awake_count(i)`.
pub fn build_prediction_matrix(ensemble: &Ensemble, u: &FeatureMatrix) -> Result<PredictionMatrix> {
    ensemble.prediction_rows(&ensemble.members, u)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::Label;
    use crate::trees::cart::{fit_tree, Node, TreeParams};

    fn line_tree() -> DecisionTree {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        fit_tree(&x, &[-1, -1, 1, 1], &[1.0; 4], &TreeParams::default()).unwrap()
    }

    /// Depth-2 complete tree on two features: root splits x0 at 0, children
    /// split x1 at 0.
    fn complete_tree() -> DecisionTree {
        let leaf = |label| Node::Leaf {
            label,
            neg_weight: 1.0,
            pos_weight: 1.0,
        };
        DecisionTree::from_nodes(
            2,
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 4 },
                Node::Split { feature: 1, threshold: 0.0, left: 2, right: 3 },
                leaf(-1),
                leaf(1),
                Node::Split { feature: 1, threshold: 0.0, left: 5, right: 6 },
                leaf(1),
                leaf(-1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn specialist_counts() {
        assert_eq!(extract_specialists(&line_tree()).len(), 1);
        assert_eq!(
            extract_specialists(&complete_tree()),
            vec![SpecialistNode { node: 0 }, SpecialistNode { node: 1 }, SpecialistNode { node: 4 }]
        );
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let leaf_only = fit_tree(&x, &[1, 1], &[1.0, 1.0], &TreeParams::default()).unwrap();
        assert!(extract_specialists(&leaf_only).is_empty());
    }

    #[test]
    fn specialist_wakefulness() {
        let t = complete_tree();
        // routed right at the root: left child asleep
        assert_eq!(specialist_predict(&t, 1, &[1.0, -1.0]).unwrap(), 0);
        // routed left, then right at node 1: leaf 3 predicts +1
        assert_eq!(specialist_predict(&t, 1, &[-1.0, 1.0]).unwrap(), 1);
        assert_eq!(specialist_predict(&t, 1, &[-1.0, -1.0]).unwrap(), -1);
        for x in [[-1.0, 1.0], [1.0, 1.0], [0.0, 0.0]] {
            assert_eq!(specialist_predict(&t, 0, &x).unwrap(), t.predict(&x).unwrap());
        }
        assert!(specialist_predict(&t, 0, &[1.0]).is_err());
    }

    #[test]
    fn prediction_matrix_shapes() {
        let mut e = Ensemble::new();
        let t = e.add_tree(line_tree());
        e.push(EnsembleMember::Tree { tree: t });
        e.push(EnsembleMember::Specialist { tree: t, node: 0 });
        let u = FeatureMatrix::from_rows(&[vec![0.5], vec![2.5], vec![-4.0]]).unwrap();
        let f = build_prediction_matrix(&e, &u).unwrap();
        assert_eq!((f.n_members(), f.n_cols()), (2, 3));
        assert_eq!(f.dense_row(0), vec![-1.0, 1.0, -1.0]);
        assert_eq!(f.dense_row(0), f.dense_row(1));
        assert!(build_prediction_matrix(&e, &FeatureMatrix::empty(1)).is_err());
    }

    fn grid_rows() -> impl Strategy<Value = Vec<(i8, i8, bool)>> {
        prop::collection::vec((-3i8..3, -3i8..3, any::<bool>()), 4..40)
    }

    proptest! {
        #[test]
        fn awake_specialists_follow_the_path(rows in grid_rows()) {
            let xs: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0 as f64, r.1 as f64]).collect();
            let y: Vec<Label> = rows.iter().map(|r| if r.2 { 1 } else { -1 }).collect();
            let x = FeatureMatrix::from_rows(&xs).unwrap();
            let tree = fit_tree(&x, &y, &vec![1.0; y.len()], &TreeParams::default()).unwrap();
            let mut e = Ensemble::new();
            let t = e.add_tree(tree.clone());
            e.push(EnsembleMember::Tree { tree: t });
            for s in extract_specialists(&tree) {
                e.push(EnsembleMember::Specialist { tree: t, node: s.node });
            }
            let f = build_prediction_matrix(&e, &x).unwrap();
            for j in 0..x.n_rows() {
                let path = tree.path(x.row(j)).unwrap();
                let full = f.get(0, j);
                for (k, m) in e.members.iter().enumerate().skip(1) {
                    let EnsembleMember::Specialist { node, .. } = *m else { unreachable!() };
                    let v = f.get(k, j);
                    prop_assert_eq!(v != 0.0, path.contains(&node));
                    if v != 0.0 {
                        prop_assert_eq!(v, full);
                    }
                }
                // siblings are never awake together
                for node in tree.internal_nodes() {
                    if let Node::Split { left, right, .. } = tree.nodes()[node] {
                        prop_assert!(!(path.contains(&left) && path.contains(&right)));
                    }
                }
            }
        }
    }
}
