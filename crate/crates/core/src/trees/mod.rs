//! Decision trees, forests, stumps and the node specialists derived from
//! trees, plus construction of the prediction matrix.

mod cart;
mod ensemble;
mod forest;
mod stump;

pub use cart::{fit_tree, tree_predict, DecisionTree, Node, TreeParams};
pub use ensemble::{
    build_prediction_matrix, extract_specialists, specialist_predict, Ensemble, EnsembleMember,
    SpecialistNode,
};
pub use forest::{bootstrap_indices, fit_forest, Forest};
pub use stump::Stump;

