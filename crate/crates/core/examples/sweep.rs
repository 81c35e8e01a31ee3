//! Dropout sweep of the baseline policy, written as CSV to stdout.

use mindep::conic::Clarabel;
use mindep::executor::{default_q_grid, sweep_dropout, write_sweep_csv, DEFAULT_MAX_STEPS};
use mindep::gridworld::build_two_agent_navigation;
use mindep::occupancy::{policy_from_occupancy, solve_baseline_lp, BaselineOptions};

fn main() -> mindep::error::Result<()> {
    let game = build_two_agent_navigation(0.05)?.augment_with_end_state()?;
    let sol = solve_baseline_lp(&game, &BaselineOptions::default(), &Clarabel::default())?;
    let policy = policy_from_occupancy(&game, &sol.occupancy);
    let rows = sweep_dropout(&game, &policy, &default_q_grid(), 2_000, 0, DEFAULT_MAX_STEPS)?;
    write_sweep_csv(&rows, std::io::stdout().lock())
}
