//! Drunk-spider navigation (continuous and tabular) and a random finite-MDP
//! generator for checking the masking guarantees.

mod grid;
mod layout;
mod random_mdp;
mod spider;
mod tabular;

pub use grid::{build_grid_mdp, DrunkSpiderGrid, GridAction, GridConfig};
pub use layout::{distance, Rect, SpiderLayout};
pub use random_mdp::{generate_assumption_mdp, RandomAssumptionMdp, RETREAT_ACTION};
pub use spider::{
    step_continuous, AroundPathPolicy, DrunkSpiderContinuous, ACT_DIM, DISTANCE_PENALTY, GOAL_BONUS, OBS_DIM,
};
pub use tabular::{check_assumptions, AssumptionReport, SmallUnsafeMass, TabularMdp, TabularMdpDoc};
