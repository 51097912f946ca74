//! Weighted CART with Gini impurity.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Label};
use crate::error::{check_len, Error, Result};

/// Growth limits. The default is an unregularized tree: no depth limit and
/// leaves as small as one example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Examples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        neg_weight: f64,
        pos_weight: f64,
    },
}

/// Binary decision tree with nodes stored in preorder (root at index 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Builds a tree from an explicit node list, checking the structure.
    pub fn from_nodes(n_features: usize, nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Empty("tree nodes"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::invalid(format!("node {id}: bad split")));
                    }
                    for child in [left, right] {
                        if child <= id || child >= nodes.len() {
                            return Err(Error::invalid(format!("node {id}: bad child {child}")));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { label, .. } => {
                    if label != 1 && label != -1 {
                        return Err(Error::invalid(format!("node {id}: leaf label {label}")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err(Error::invalid("tree nodes do not form a binary tree"));
        }
        Ok(Self { n_features, nodes })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_internal(&self, node: usize) -> bool {
        matches!(self.nodes[node], Node::Split { .. })
    }

    /// Internal node ids in preorder.
    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.is_internal(i)).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, id: usize) -> usize {
            match t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Visits every node on `x`'s root-to-leaf path, then returns the leaf label.
    #[inline]
    pub(crate) fn walk(&self, x: &[f64], mut visit: impl FnMut(usize)) -> Label {
        let mut id = 0;
        loop {
            visit(id);
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
                Node::Leaf { label, .. } => return label,
            }
        }
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        self.walk(x, |_| {})
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.check_width(x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Node ids on `x`'s routing path, root first, ending at the leaf.
    pub fn path(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_width(x)?;
        let mut out = Vec::new();
        self.walk(x, |id| out.push(id));
        Ok(out)
    }

    pub(crate) fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() < self.n_features {
            Err(Error::DimensionMismatch {
                what: "feature row",
                expected: self.n_features,
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Tree prediction on one row.
pub fn tree_predict(tree: &DecisionTree, x: &[f64]) -> Result<Label> {
    tree.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// `Σ_children (P² + N²) / W`; larger means lower weighted Gini.
    pub purity: f64,
}

/// Exhaustive weighted-Gini split search over midpoints of sorted distinct
/// values. Ties go to the lowest feature, then the lowest threshold.
pub(crate) fn best_split(
    x: &FeatureMatrix,
    y: &[Label],
    w: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let (mut pos_total, mut neg_total) = (0.0, 0.0);
    for &i in idx {
        if y[i] > 0 {
            pos_total += w[i];
        } else {
            neg_total += w[i];
        }
    }
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for feature in 0..x.n_cols() {
        order.sort_unstable_by(|&a, &b| x.row(a)[feature].total_cmp(&x.row(b)[feature]));
        let (mut pl, mut nl) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let i = order[k];
            if y[i] > 0 {
                pl += w[i];
            } else {
                nl += w[i];
            }
            let lo = x.row(i)[feature];
            let hi = x.row(order[k + 1])[feature];
            if lo >= hi || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                continue;
            }
            let (pr, nr) = (pos_total - pl, neg_total - nl);
            let purity = (pl * pl + nl * nl) / (pl + nl) + (pr * pr + nr * nr) / (pr + nr);
            let better = match best {
                None => true,
                Some(b) => purity > b.purity + 1e-12 * b.purity.abs().max(1e-300),
            };
            if better {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    purity,
                });
            }
        }
    }
    best
}

/// Fits a weighted CART tree. Zero-weight rows are ignored entirely.
pub fn fit_tree(x: &FeatureMatrix, y: &[Label], w: &[f64], params: &TreeParams) -> Result<DecisionTree> {
    check_len("label count", x.n_rows(), y.len())?;
    check_len("weight count", x.n_rows(), w.len())?;
    if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::invalid("example weights must be finite and nonnegative"));
    }
    let root: Vec<usize> = (0..x.n_rows()).filter(|&i| w[i] > 0.0).collect();
    if root.is_empty() {
        return Err(Error::Empty("training examples with positive weight"));
    }
    let min_leaf = params.min_leaf.max(1);

    let mut nodes: Vec<Node> = Vec::new();
    // (examples, depth, slot in parent to patch)
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(root, 0, None)];
    while let Some((idx, depth, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for &i in &idx {
            if y[i] > 0 {
                pos += w[i];
            } else {
                neg += w[i];
            }
        }
        let leaf = Node::Leaf {
            label: if pos >= neg { 1 } else { -1 },
            neg_weight: neg,
            pos_weight: pos,
        };
        let can_split = pos > 0.0
            && neg > 0.0
            && params.max_depth.map_or(true, |d| depth < d)
            && idx.len() >= 2 * min_leaf;
        let split = if can_split {
            best_split(x, y, w, &idx, min_leaf)
        } else {
            None
        };
        match split {
            None => nodes.push(leaf),
            Some(s) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x.row(i)[s.feature] <= s.threshold);
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push((right, depth + 1, Some((id, false))));
                stack.push((left, depth + 1, Some((id, true))));
            }
        }
    }
    Ok(DecisionTree {
        n_features: x.n_cols(),
        nodes,
    })
}
