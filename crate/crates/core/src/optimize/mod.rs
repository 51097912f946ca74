//! Line search, slack minimization and a tiny exact game solver.

mod descent;
mod game;
mod golden;

pub use descent::{
    coordinate_derivatives, line_search, minimize_slack, minimize_slack_with, total_correct, DescentConfig,
    DescentOutcome, LineSearchResult, TrajectoryPoint,
};
pub(crate) use descent::coordinate_step;
pub use game::{solve_game_exact, GameInstance, GameSolution};
pub use golden::{golden_section, GoldenResult, LineSearchSpec};
