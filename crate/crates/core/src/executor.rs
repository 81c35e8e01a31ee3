//! Monte Carlo execution of joint policies under full communication,
//! imaginary play and intermittent communication.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comm::{CommModel, NO_ACTION};
use crate::error::{Error, Result};
use crate::markov_game::JointGame;
use crate::policy::JointPolicy;

pub const DEFAULT_MAX_STEPS: usize = 200;

/// How a rollout ended, judged on the true joint path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure,
    Timeout,
}

/// One executed episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// True joint states visited, starting with the initial state.
    pub states: Vec<usize>,
    /// Whether communication was available at each executed step.
    pub comm: Vec<bool>,
    pub outcome: Outcome,
}

impl Rollout {
    pub fn length(&self) -> usize {
        self.states.len() - 1
    }
}

/// What one agent knows during execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRuntime {
    pub state: usize,
    /// Believed local state of every agent; the own entry mirrors `state`.
    pub beliefs: Vec<usize>,
    /// Last believed joint action.
    pub action: Option<usize>,
    /// Step at which the agent stopped.
    pub stopped_at: Option<usize>,
}

/// Random streams of a single rollout: one shared, one per agent.
pub struct RolloutRng {
    shared: ChaCha8Rng,
    agents: Vec<ChaCha8Rng>,
}

impl RolloutRng {
    /// Streams for rollout `index` under master `seed`.
    pub fn new(seed: u64, index: u64, num_agents: usize) -> Self {
        let stream = |role: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index << 8 | role);
            rng
        };
        Self {
            shared: stream(0),
            agents: (1..=num_agents as u64).map(stream).collect(),
        }
    }
}

fn draw(successors: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    for &(y, p) in successors {
        acc += p;
        if u < acc {
            return y;
        }
    }
    successors.last().map(|&(y, _)| y).expect("non-empty successor row")
}

fn check_inputs(game: &JointGame, policy: &JointPolicy, max_steps: usize) -> Result<()> {
    if max_steps < 1 {
        return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
    }
    if policy.num_states() != game.num_product_states() || policy.num_actions() != game.num_joint_actions() {
        return Err(Error::InvalidParameter(format!(
            "policy shape {}x{} does not match game {}x{}",
            policy.num_states(),
            policy.num_actions(),
            game.num_product_states(),
            game.num_joint_actions()
        )));
    }
    if game.agents().len() > 255 {
        return Err(Error::InvalidParameter("at most 255 agents".into()));
    }
    Ok(())
}

/// Executes `policy` once. Agents act on the true joint state while
/// communication is available and on their beliefs otherwise; an agent stops
/// once its believed joint state is terminal and then holds position.
pub fn rollout(
    game: &JointGame,
    policy: &JointPolicy,
    comm: &CommModel,
    rng: &mut RolloutRng,
    max_steps: usize,
) -> Result<Rollout> {
    check_inputs(game, policy, max_steps)?;
    comm.validate()?;
    Ok(run(game, policy, comm, rng, max_steps))
}

fn run(game: &JointGame, policy: &JointPolicy, comm: &CommModel, rng: &mut RolloutRng, max_steps: usize) -> Rollout {
    let k = game.num_agents();
    let radix = game.state_radix();
    let actions = game.action_radix();
    let initial: Vec<usize> = game.agents().iter().map(|a| a.initial()).collect();
    let mut agents: Vec<AgentRuntime> = initial
        .iter()
        .map(|&s| AgentRuntime {
            state: s,
            beliefs: initial.clone(),
            action: None,
            stopped_at: None,
        })
        .collect();
    let mut truth = initial.clone();
    let mut states = vec![radix.encode(&truth)];
    let mut executed: Vec<Option<usize>> = vec![None; k];
    let mut history: Vec<u32> = Vec::new();
    let mut availability = Vec::new();
    let mut lost = false;
    let mut believed = vec![0; k];

    for t in 0..max_steps {
        let s = *states.last().expect("initial state");
        if game.is_target(s) {
            return Rollout {
                states,
                comm: availability,
                outcome: Outcome::Success,
            };
        }
        if game.is_avoid(s) {
            return Rollout {
                states,
                comm: availability,
                outcome: Outcome::Failure,
            };
        }
        if agents.iter().all(|a| a.stopped_at.is_some()) {
            return Rollout {
                states,
                comm: availability,
                outcome: Outcome::Failure,
            };
        }
        let u: f64 = rng.shared.gen();
        let up = comm.sample(t, &mut lost, u, || history.clone());
        availability.push(up);
        executed.iter_mut().for_each(|a| *a = None);
        if up {
            if game.is_terminal(s) {
                for agent in agents.iter_mut().filter(|a| a.stopped_at.is_none()) {
                    agent.stopped_at = Some(t);
                }
            } else {
                let a = policy.sample(s, rng.shared.gen());
                for (i, agent) in agents.iter_mut().enumerate() {
                    agent.beliefs.clone_from(&truth);
                    if agent.stopped_at.is_none() {
                        agent.action = Some(a);
                        executed[i] = Some(actions.digit(a, i));
                    }
                }
            }
        } else {
            for (i, agent) in agents.iter_mut().enumerate() {
                if agent.stopped_at.is_some() {
                    continue;
                }
                let agent_rng = &mut rng.agents[i];
                for j in 0..k {
                    believed[j] = if j == i {
                        agent.state
                    } else if t == 0 {
                        initial[j]
                    } else {
                        match agent.action {
                            Some(a) => {
                                let row = game.agent(j).successors(agent.beliefs[j], actions.digit(a, j));
                                draw(row, agent_rng.gen())
                            }
                            None => agent.beliefs[j],
                        }
                    };
                }
                agent.beliefs.clone_from(&believed);
                let b = radix.encode(&believed);
                if game.is_terminal(b) {
                    agent.stopped_at = Some(t);
                    continue;
                }
                let a = policy.sample(b, agent_rng.gen());
                agent.action = Some(a);
                executed[i] = Some(actions.digit(a, i));
            }
        }
        history.push(s as u32);
        history.extend(executed.iter().map(|a| a.map_or(NO_ACTION, |a| a as u32)));
        for (i, agent) in agents.iter_mut().enumerate() {
            if let Some(ai) = executed[i] {
                agent.state = draw(game.agent(i).successors(agent.state, ai), rng.agents[i].gen());
                truth[i] = agent.state;
            }
        }
        states.push(radix.encode(&truth));
    }
    let s = *states.last().expect("initial state");
    let outcome = if game.is_target(s) {
        Outcome::Success
    } else if game.is_avoid(s) {
        Outcome::Failure
    } else {
        Outcome::Timeout
    };
    Rollout {
        states,
        comm: availability,
        outcome,
    }
}

/// Aggregate of independent rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub n_rollouts: usize,
    pub successes: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub stderr: f64,
    pub mean_length: f64,
    pub comm: String,
    pub seed: u64,
}

/// Success rate of `n_rollouts` seeded, independent rollouts; timeouts count
/// as failures.
pub fn estimate_success(
    game: &JointGame,
    policy: &JointPolicy,
    comm: &CommModel,
    n_rollouts: usize,
    seed: u64,
    max_steps: usize,
) -> Result<RolloutReport> {
    if n_rollouts < 1 {
        return Err(Error::InvalidParameter("n_rollouts must be at least 1".into()));
    }
    check_inputs(game, policy, max_steps)?;
    comm.validate()?;
    let k = game.num_agents();
    let (successes, timeouts, steps) = (0..n_rollouts as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = RolloutRng::new(seed, index, k);
            let r = run(game, policy, comm, &mut rng, max_steps);
            (
                usize::from(r.outcome == Outcome::Success),
                usize::from(r.outcome == Outcome::Timeout),
                r.length(),
            )
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = n_rollouts as f64;
    let rate = successes as f64 / n;
    Ok(RolloutReport {
        n_rollouts,
        successes,
        timeouts,
        success_rate: rate,
        stderr: (rate * (1.0 - rate) / n).sqrt(),
        mean_length: steps as f64 / n,
        comm: comm.label(),
        seed,
    })
}

/// One row of a dropout sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    #[serde(rename = "rate")]
    pub success_rate: f64,
    pub stderr: f64,
    #[serde(rename = "mean_len")]
    pub mean_length: f64,
}

/// Intermittent-communication success rate for each dropout rate in
/// `q_grid`, all with the same seed.
pub fn sweep_dropout(
    game: &JointGame,
    policy: &JointPolicy,
    q_grid: &[f64],
    n_rollouts: usize,
    seed: u64,
    max_steps: usize,
) -> Result<Vec<SweepRow>> {
    q_grid
        .iter()
        .map(|&q| {
            let r = estimate_success(
                game,
                policy,
                &CommModel::BernoulliIntermittent(q),
                n_rollouts,
                seed,
                max_steps,
            )?;
            Ok(SweepRow {
                q,
                success_rate: r.success_rate,
                stderr: r.stderr,
                mean_length: r.mean_length,
            })
        })
        .collect()
}

/// `0, 0.1, …, 1`.
pub fn default_q_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
