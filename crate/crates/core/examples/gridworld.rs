//! Builds both navigation games and prints their sizes.

use mindep::gridworld::{three_agent_spec, two_agent_spec};

fn main() -> mindep::error::Result<()> {
    for (name, spec) in [
        ("two-agent", two_agent_spec(0.05)),
        ("three-agent", three_agent_spec(0.05)),
    ] {
        let game = spec.build_game()?;
        let dead = game.compute_dead_set();
        let terminal = (0..game.num_product_states()).filter(|&s| game.is_terminal(s)).count();
        println!(
            "{name}: {} agents, {} joint states, {} joint actions, {} targets, {} avoid, {} dead, {} terminal",
            game.num_agents(),
            game.num_product_states(),
            game.num_joint_actions(),
            game.target_states().len(),
            game.avoid_states().len(),
            dead.len(),
            terminal,
        );
    }
    Ok(())
}
