//! Minimum-dependency synthesis for the two-agent game from a route anchor.

use mindep::gridworld::two_agent_spec;
use mindep::synthesis::{baseline_blend, synthesize_from, SynthesisConfig};

fn main() -> mindep::error::Result<()> {
    env_logger::init();
    let spec = two_agent_spec(0.05);
    let game = spec.build_game()?.augment_with_end_state()?;
    let config = SynthesisConfig {
        max_iters: 30,
        ..Default::default()
    };
    let routes = spec.prioritized_route_policy(0.1)?;
    let anchor = baseline_blend(&game, config.cap, &routes, 0.2)?;
    let result = synthesize_from(&game, &config, anchor)?;
    for r in result.trace.records.iter().step_by(5) {
        let m = &r.metrics;
        println!(
            "iter {:3}: objective {:.5}, value {:.4}, length {:.2}, C_bar {:.4}",
            r.iteration, m.objective, m.value, m.length, m.total_correlation_bound
        );
    }
    println!("status: {:?}", result.status);
    Ok(())
}
