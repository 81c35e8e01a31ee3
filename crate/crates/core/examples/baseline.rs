//! Reach-avoid optimal occupancy of the two-agent game.

use mindep::conic::Clarabel;
use mindep::gridworld::build_two_agent_navigation;
use mindep::occupancy::{solve_baseline_lp, BaselineOptions, TieBreak};

fn main() -> mindep::error::Result<()> {
    let game = build_two_agent_navigation(0.05)?.augment_with_end_state()?;
    for tie_break in [TieBreak::Interior, TieBreak::ShortestPath] {
        let options = BaselineOptions {
            tie_break,
            ..Default::default()
        };
        let sol = solve_baseline_lp(&game, &options, &Clarabel::default())?;
        println!(
            "{tie_break:?}: value {:.6}, expected length {:.3}, {} variables, {} rows",
            sol.value, sol.length, sol.census.solved_variables, sol.census.solved_rows
        );
    }
    Ok(())
}
