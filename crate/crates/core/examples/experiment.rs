//! Preset configs, their hashes, and a short end-to-end run of a custom grid.

use mindep::experiment::{run_eval, run_synth, Environment, ExperimentConfig, PRESETS};
use mindep::gridworld::{AgentSpec, GridSpec, SlipModel};

fn main() -> mindep::error::Result<()> {
    for name in PRESETS {
        let config = ExperimentConfig::preset(name)?;
        println!("{name}: hash {}", config.hash());
    }
    let mut config = ExperimentConfig::preset("paper-2agent")?;
    config.name = "corridor-swap".into();
    config.environment = Environment::Custom(GridSpec {
        width: 4,
        height: 2,
        walls: Vec::new(),
        hazards: Vec::new(),
        slip: 0.05,
        agents: vec![
            AgentSpec {
                start: (0, 0),
                target: (3, 0),
            },
            AgentSpec {
                start: (3, 1),
                target: (0, 1),
            },
        ],
        collision_radius: 1,
        keep_walls_as_states: true,
        slip_model: SlipModel::default(),
    });
    config.synthesis.max_iters = 20;
    config.evaluation.n_rollouts = 2_000;
    let dir = std::env::temp_dir().join("mindep-example");
    let out = run_synth(&config, &dir)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    for p in run_eval(&config, &dir)?.policies {
        println!(
            "{}: no-comm {:.4} ± {:.4}",
            p.policy, p.no_comm.success_rate, p.no_comm.stderr
        );
    }
    Ok(())
}
