//! Per-agent occupancy of the baseline policy drawn as text.

use mindep::conic::Clarabel;
use mindep::gridworld::two_agent_spec;
use mindep::occupancy::{solve_baseline_lp, BaselineOptions};

fn main() -> mindep::error::Result<()> {
    let spec = two_agent_spec(0.05);
    let game = spec.build_game()?.augment_with_end_state()?;
    let sol = solve_baseline_lp(&game, &BaselineOptions::default(), &Clarabel::default())?;
    let rows = spec.heatmap(&game, &sol.occupancy)?;
    for agent in 0..spec.agents.len() {
        println!("agent {agent}");
        for y in (0..spec.height).rev() {
            let line: Vec<String> = (0..spec.width)
                .map(|x| {
                    let v = rows
                        .iter()
                        .find(|r| r.agent == agent && r.x == x && r.y == y)
                        .map_or(0.0, |r| r.occupancy);
                    format!("{v:6.2}")
                })
                .collect();
            println!("  {}", line.join(" "));
        }
    }
    Ok(())
}
