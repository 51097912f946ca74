//! MARVIN and its variants.

mod check;
mod marvin;
mod oracle;

pub use check::{coordinate_check, CoordinateCheck};
pub use marvin::{marvin, BoostState, LabeledUse, MarvinConfig, MarvinRun, StepOutcome, Variant};
pub use oracle::{best_stump, build_oracle_dataset, oracle_best, Hypothesis, OracleDataset, RowSource, WeakLearner};
