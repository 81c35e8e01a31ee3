use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mindep::experiment::{run_eval, run_heatmap, run_sweep, run_synth, run_verify, ExperimentConfig};

/// Minimum-dependency policy synthesis for multi-agent reach-avoid games.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named config: paper-2agent or paper-3agent.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the baseline program and synthesize the minimum-dependency policy.
    Synth,
    /// Monte Carlo evaluation of stored policies against the guarantees.
    Eval,
    /// Exact lemma and guarantee checks on built-in fixtures.
    Verify,
    /// Success rate across intermittent dropout rates.
    Sweep,
    /// Per-agent occupancy heatmaps from stored occupancies.
    Heatmap,
}

impl Cli {
    fn experiment(&self) -> mindep::error::Result<ExperimentConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::preset("paper-2agent")?,
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        Ok(config)
    }
}

fn verify(cli: &Cli) -> mindep::error::Result<bool> {
    let report = run_verify(cli.seed.unwrap_or(0))?;
    for f in &report.fixtures {
        let checks = f.lemmas.checks.len() + f.bounds.len();
        println!(
            "{}: C = {:.6}, v = {:.6}, {checks} checks",
            f.fixture, f.correlation, f.v_full
        );
    }
    let violations = report.violations();
    for (fixture, c) in &violations {
        println!("VIOLATION {fixture} {}: {:.9} < {:.9}", c.case, c.lhs, c.rhs);
    }
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("verify.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(violations.is_empty())
}

fn run(cli: &Cli) -> mindep::error::Result<bool> {
    let load = || cli.experiment().map(|c| (c.out_dir.clone(), c));
    match cli.command {
        Command::Verify => verify(cli),
        Command::Synth => {
            let (dir, config) = load()?;
            let out = run_synth(&config, &dir)?;
            for p in &out.summary.policies {
                println!(
                    "{}: v = {:.4}, l = {:.2}, C_bar = {:.4}, bounds = ({:.4}, {:.4}, {:.4})",
                    p.policy, p.v_full, p.l_full, p.c_bar, p.bounds.thm1, p.bounds.thm2, p.bounds.thm3
                );
            }
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Eval => {
            let (dir, config) = load()?;
            let report = run_eval(&config, &dir)?;
            for p in &report.policies {
                println!(
                    "{}: full {:.4} ± {:.4}, no-comm {:.4} ± {:.4}",
                    p.policy, p.full.success_rate, p.full.stderr, p.no_comm.success_rate, p.no_comm.stderr
                );
                for c in p.checks.iter().filter(|c| !c.satisfied) {
                    println!("  bound violated under {}: {:.4} > {:.4}", c.comm, c.bound, c.empirical);
                }
            }
            Ok(report.all_bounds_hold())
        }
        Command::Sweep => {
            let (dir, config) = load()?;
            for (name, rows) in run_sweep(&config, &dir)? {
                println!("{name}");
                for r in rows {
                    println!("  q = {:.2}: {:.4} ± {:.4}", r.q, r.success_rate, r.stderr);
                }
            }
            Ok(true)
        }
        Command::Heatmap => {
            let (dir, config) = load()?;
            for path in run_heatmap(&config, &dir)? {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
