//! Entropy and divergence primitives, exact joint path distributions under
//! each communication model, total correlation, the divergence inequalities
//! behind the robustness guarantees and the guarantees themselves.
//!
//! Paths are recorded per agent as `s_0 a_0 s_1 a_1 … s_τ END`, where `τ` is
//! the step at which the agent believes the team reached a target or dead
//! state. Under full communication every agent stops at the same step, so the
//! tuple of agent paths is the joint path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::comm::{CommModel, HistoryFn, NO_ACTION};
use crate::error::{Error, Result};
use crate::markov_game::JointGame;
use crate::policy::JointPolicy;

pub use crate::comm::random_history_fn;

/// Path token closing an agent's path (its end action).
pub const END: u32 = u32::MAX;

/// Mass allowed to remain unabsorbed at the horizon.
pub const ABSORB_TOL: f64 = 1e-9;

/// Default cap on live enumeration nodes.
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 21;

/// Slack below which an inequality still counts as satisfied.
const INEQUALITY_TOL: f64 = 1e-9;

/// Shannon entropy in nats; `0·log 0 = 0`.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    Ok(probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum())
}

/// `KL(p ∥ q)` in nats; `+∞` when `p` puts mass where `q` has none.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidParameter(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total)
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "distribution has a negative or non-finite entry".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("distribution sums to {total}")));
    }
    Ok(())
}

/// One path token sequence per agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointPath {
    pub agents: Vec<Vec<u32>>,
}

impl JointPath {
    /// Local state of agent `i` at step `t` (held after it stops).
    pub fn state(&self, i: usize, t: usize) -> usize {
        let path = &self.agents[i];
        let last_state = path.len() - 2;
        path[(2 * t).min(last_state)] as usize
    }

    /// Executed local action of agent `i` at step `t`, if it was still
    /// moving.
    pub fn action(&self, i: usize, t: usize) -> Option<usize> {
        match self.agents[i].get(2 * t + 1) {
            Some(&a) if a != END => Some(a as usize),
            _ => None,
        }
    }

    /// Steps until the last agent stopped.
    pub fn duration(&self) -> usize {
        self.agents.iter().map(|p| p.len() / 2 - 1).max().unwrap_or(0)
    }
}

/// Exact distribution over absorbed joint paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    num_agents: usize,
    horizon: usize,
    support: BTreeMap<JointPath, f64>,
}

impl PathDistribution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JointPath, f64)> {
        self.support.iter().map(|(k, &v)| (k, v))
    }

    pub fn prob(&self, path: &JointPath) -> f64 {
        self.support.get(path).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum()
    }

    /// Expected number of steps until the last agent stopped.
    pub fn expected_duration(&self) -> f64 {
        self.support.iter().map(|(path, &p)| p * path.duration() as f64).sum()
    }

    /// `H(X)` of the joint path.
    pub fn entropy(&self) -> f64 {
        plogp(self.support.values().copied())
    }

    /// Distribution of agent `i`'s own path.
    pub fn agent_marginal(&self, i: usize) -> BTreeMap<Vec<u32>, f64> {
        let mut out = BTreeMap::new();
        for (path, &p) in &self.support {
            *out.entry(path.agents[i].clone()).or_insert(0.0) += p;
        }
        out
    }

    /// `H(X^i)`.
    pub fn agent_entropy(&self, i: usize) -> f64 {
        plogp(self.agent_marginal(i).into_values())
    }

    /// `Σ_i H(X^i) − H(X)`.
    pub fn total_correlation(&self) -> f64 {
        (0..self.num_agents).map(|i| self.agent_entropy(i)).sum::<f64>() - self.entropy()
    }

    /// `KL(self ∥ other)`, `+∞` on a support violation.
    pub fn kl_to(&self, other: &PathDistribution) -> f64 {
        let mut total = 0.0;
        for (path, &p) in &self.support {
            if p <= 0.0 {
                continue;
            }
            let q = other.prob(path);
            if q <= 0.0 {
                return f64::INFINITY;
            }
            total += p * (p / q).ln();
        }
        total
    }

    /// Probability that the true joint path enters a target state before
    /// any avoid state.
    pub fn reach_avoid_probability(&self, game: &JointGame) -> f64 {
        let k = self.num_agents;
        let mut digits = vec![0; k];
        let mut total = 0.0;
        for (path, &p) in &self.support {
            for t in 0..=path.duration() {
                for (i, d) in digits.iter_mut().enumerate() {
                    *d = path.state(i, t);
                }
                let s = game.state_radix().encode(&digits);
                if game.is_target(s) {
                    total += p;
                    break;
                }
                if game.is_avoid(s) {
                    break;
                }
            }
        }
        total
    }

    /// The same distribution over `[0, 1]`-indexed support, aligned with
    /// `other` for use with [`kl`].
    pub fn aligned_with(&self, other: &PathDistribution) -> (Vec<f64>, Vec<f64>) {
        let mut keys: Vec<&JointPath> = self.support.keys().chain(other.support.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.iter().map(|k| (self.prob(k), other.prob(k))).unzip()
    }
}

fn plogp(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct AgentNode {
    state: usize,
    stopped: bool,
    // believed local state of every agent; own entry unused
    beliefs: Vec<usize>,
    // last believed joint action
    action: Option<usize>,
    path: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Node {
    lost: bool,
    agents: Vec<AgentNode>,
}

impl Node {
    fn history(&self, game: &JointGame, t: usize) -> Vec<u32> {
        let k = self.agents.len();
        let mut out = Vec::with_capacity(t * (k + 1));
        let mut digits = vec![0; k];
        for step in 0..t {
            for (i, agent) in self.agents.iter().enumerate() {
                // stopped agents hold their last state
                digits[i] = agent.path.get(2 * step).map_or(agent.state, |&s| s as usize);
            }
            out.push(game.state_radix().encode(&digits) as u32);
            for agent in &self.agents {
                out.push(match agent.path.get(2 * step + 1) {
                    Some(&a) if a != END => a,
                    _ => NO_ACTION,
                });
            }
        }
        out
    }
}

/// Exact distribution over absorbed joint paths of `policy` executed under
/// `comm` (imaginary play whenever communication is unavailable).
pub fn enumerate_path_distribution(
    game: &JointGame,
    policy: &JointPolicy,
    comm: &CommModel,
    horizon: usize,
) -> Result<PathDistribution> {
    enumerate_with_cap(game, policy, comm, horizon, DEFAULT_SUPPORT_CAP)
}

/// As [`enumerate_path_distribution`] with an explicit cap on live nodes.
pub fn enumerate_with_cap(
    game: &JointGame,
    policy: &JointPolicy,
    comm: &CommModel,
    horizon: usize,
    cap: usize,
) -> Result<PathDistribution> {
    comm.validate()?;
    let n = game.num_product_states();
    let m = game.num_joint_actions();
    if policy.num_states() != n || policy.num_actions() != m {
        return Err(Error::InvalidParameter(format!(
            "policy shape {}x{} does not match game {n}x{m}",
            policy.num_states(),
            policy.num_actions()
        )));
    }
    let k = game.num_agents();
    let initial: Vec<usize> = game.agents().iter().map(|a| a.initial()).collect();
    let start = Node {
        lost: false,
        agents: (0..k)
            .map(|i| AgentNode {
                state: initial[i],
                stopped: false,
                beliefs: initial.clone(),
                action: None,
                path: Vec::new(),
            })
            .collect(),
    };
    let mut frontier: BTreeMap<Node, f64> = BTreeMap::new();
    frontier.insert(start, 1.0);
    let mut finished: BTreeMap<JointPath, f64> = BTreeMap::new();
    let stepper = Stepper { game, policy, initial };
    for t in 0..horizon {
        if frontier.is_empty() {
            break;
        }
        let mut next: BTreeMap<Node, f64> = BTreeMap::new();
        for (node, p) in frontier {
            let branches = comm.branches(t, node.lost, || node.history(game, t));
            for (up, lost, pc) in branches {
                let children = if up {
                    stepper.shared_step(&node)
                } else {
                    stepper.imaginary_step(&node, t)
                };
                for (mut child, pa) in children {
                    child.lost = lost;
                    let mass = p * pc * pa;
                    if child.agents.iter().all(|a| a.stopped) {
                        let path = JointPath {
                            agents: child.agents.into_iter().map(|a| a.path).collect(),
                        };
                        *finished.entry(path).or_insert(0.0) += mass;
                    } else {
                        *next.entry(child).or_insert(0.0) += mass;
                    }
                }
            }
            if next.len() > cap {
                return Err(Error::SupportCap(cap));
            }
        }
        frontier = next;
    }
    let remaining: f64 = frontier.values().sum();
    if remaining > ABSORB_TOL {
        return Err(Error::HorizonTooShort {
            horizon,
            mass: remaining,
        });
    }
    Ok(PathDistribution {
        num_agents: k,
        horizon,
        support: finished,
    })
}

struct Stepper<'a> {
    game: &'a JointGame,
    policy: &'a JointPolicy,
    initial: Vec<usize>,
}

impl Stepper<'_> {
    fn local_action(&self, joint: usize, i: usize) -> usize {
        self.game.action_radix().digit(joint, i)
    }

    /// Everyone observes the true joint state and follows one shared draw.
    fn shared_step(&self, node: &Node) -> Vec<(Node, f64)> {
        let truth: Vec<usize> = node.agents.iter().map(|a| a.state).collect();
        let s = self.game.state_radix().encode(&truth);
        if self.game.is_terminal(s) {
            let mut child = node.clone();
            for agent in child.agents.iter_mut().filter(|a| !a.stopped) {
                agent.path.push(agent.state as u32);
                agent.path.push(END);
                agent.stopped = true;
            }
            return vec![(child, 1.0)];
        }
        let mut out = Vec::new();
        for (a, pa) in self.policy.support(s) {
            let mut partial = vec![(node.clone(), pa)];
            for i in 0..node.agents.len() {
                let mut grown = Vec::new();
                for (base, pb) in partial {
                    let agent = &base.agents[i];
                    if agent.stopped {
                        grown.push((base, pb));
                        continue;
                    }
                    let ai = self.local_action(a, i);
                    for &(y, py) in self.game.agent(i).successors(agent.state, ai) {
                        let mut child = base.clone();
                        let ag = &mut child.agents[i];
                        ag.path.push(ag.state as u32);
                        ag.path.push(ai as u32);
                        ag.beliefs.clone_from(&truth);
                        ag.action = Some(a);
                        ag.state = y;
                        grown.push((child, pb * py));
                    }
                }
                partial = grown;
            }
            out.extend(partial);
        }
        out
    }

    /// Each moving agent advances its imagined teammates, draws its own joint
    /// action at its believed joint state and executes its component.
    fn imaginary_step(&self, node: &Node, t: usize) -> Vec<(Node, f64)> {
        let mut partial = vec![(node.clone(), 1.0)];
        for i in 0..node.agents.len() {
            if node.agents[i].stopped {
                continue;
            }
            let outcomes = self.agent_outcomes(&node.agents[i], i, t);
            let mut grown = Vec::with_capacity(partial.len() * outcomes.len());
            for (base, pb) in &partial {
                for (agent, po) in &outcomes {
                    let mut child = base.clone();
                    child.agents[i] = agent.clone();
                    grown.push((child, pb * po));
                }
            }
            partial = grown;
        }
        partial
    }

    fn agent_outcomes(&self, agent: &AgentNode, i: usize, t: usize) -> Vec<(AgentNode, f64)> {
        let k = agent.beliefs.len();
        // belief refresh
        let mut beliefs: Vec<(Vec<usize>, f64)> = vec![(Vec::with_capacity(k), 1.0)];
        for j in 0..k {
            let options: Vec<(usize, f64)> = if j == i {
                vec![(agent.state, 1.0)]
            } else if t == 0 {
                vec![(self.initial[j], 1.0)]
            } else {
                match agent.action {
                    Some(a) => self
                        .game
                        .agent(j)
                        .successors(agent.beliefs[j], self.local_action(a, j))
                        .to_vec(),
                    None => vec![(agent.beliefs[j], 1.0)],
                }
            };
            let mut grown = Vec::with_capacity(beliefs.len() * options.len());
            for (prefix, p) in &beliefs {
                for &(y, py) in &options {
                    let mut b = prefix.clone();
                    b.push(y);
                    grown.push((b, p * py));
                }
            }
            beliefs = grown;
        }
        let mut out = Vec::new();
        for (believed, pb) in beliefs {
            let s = self.game.state_radix().encode(&believed);
            if self.game.is_terminal(s) {
                let mut ag = agent.clone();
                ag.path.push(ag.state as u32);
                ag.path.push(END);
                ag.stopped = true;
                ag.beliefs = believed;
                out.push((ag, pb));
                continue;
            }
            for (a, pa) in self.policy.support(s) {
                let ai = self.local_action(a, i);
                for &(y, py) in self.game.agent(i).successors(agent.state, ai) {
                    let mut ag = agent.clone();
                    ag.path.push(ag.state as u32);
                    ag.path.push(ai as u32);
                    ag.beliefs.clone_from(&believed);
                    ag.action = Some(a);
                    ag.state = y;
                    out.push((ag, pb * pa * py));
                }
            }
        }
        out
    }
}

/// `C = Σ_i H(X^i) − H(X)` of the full-communication path distribution,
/// cross-checked against `KL(Γ^full ∥ Γ^img_0)`.
pub fn exact_total_correlation(game: &JointGame, policy: &JointPolicy, horizon: usize) -> Result<f64> {
    let full = enumerate_path_distribution(game, policy, &CommModel::Full, horizon)?;
    let none = enumerate_path_distribution(game, policy, &CommModel::none(), horizon)?;
    let c = full.total_correlation();
    let divergence = full.kl_to(&none);
    if (c - divergence).abs() > 1e-9 * c.abs().max(1.0) {
        return Err(Error::InvalidModel(format!(
            "total correlation {c} disagrees with divergence {divergence}"
        )));
    }
    Ok(c)
}

/// One checked inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl InequalityCheck {
    pub(crate) fn new(case: String, lhs: f64, rhs: f64) -> Self {
        let slack = if lhs == f64::INFINITY { f64::INFINITY } else { lhs - rhs };
        Self {
            case,
            lhs,
            rhs,
            slack,
            satisfied: slack >= -INEQUALITY_TOL,
        }
    }
}

/// Cases to check against `KL(Γ^full ∥ Γ^img_0)`.
#[derive(Clone, Default)]
pub struct LemmaCases {
    /// Persistent loss steps; `None` never loses.
    pub loss_steps: Vec<Option<usize>>,
    /// Availability schedules for intermittent execution.
    pub schedules: Vec<Vec<bool>>,
    /// Bernoulli dropout rates `q`, compared after division by `q`.
    pub dropout_rates: Vec<f64>,
    /// History-dependent availability functions with names.
    pub history_fns: Vec<(String, HistoryFn)>,
}

impl LemmaCases {
    /// Every loss step up to `horizon` plus never, every schedule of length
    /// `schedule_len`, `q ∈ {0.1, …, 0.9}` and `num_history_fns` random
    /// history labellings.
    pub fn exhaustive(horizon: usize, schedule_len: usize, num_history_fns: usize, seed: u64) -> Self {
        let loss_steps = (0..=horizon).map(Some).chain(std::iter::once(None)).collect();
        let schedules = (0..1usize << schedule_len)
            .map(|bits| (0..schedule_len).map(|t| bits >> t & 1 == 1).collect())
            .collect();
        let dropout_rates = (1..=9).map(|k| k as f64 / 10.0).collect();
        let history_fns = (0..num_history_fns as u64)
            .map(|k| (format!("f{k}"), random_history_fn(seed.wrapping_add(k), 0.5)))
            .collect();
        Self {
            loss_steps,
            schedules,
            dropout_rates,
            history_fns,
        }
    }
}

/// Outcome of every configured inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub reference: f64,
    pub checks: Vec<InequalityCheck>,
}

impl LemmaReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

/// Evaluates each case's divergence from full communication against the
/// no-communication divergence, all by exact enumeration.
pub fn check_lemma_inequalities(
    game: &JointGame,
    policy: &JointPolicy,
    horizon: usize,
    cases: &LemmaCases,
) -> Result<LemmaReport> {
    let full = enumerate_path_distribution(game, policy, &CommModel::Full, horizon)?;
    let divergence = |comm: &CommModel| -> Result<f64> {
        Ok(full.kl_to(&enumerate_path_distribution(game, policy, comm, horizon)?))
    };
    let reference = divergence(&CommModel::none())?;
    let mut checks = Vec::new();
    for step in &cases.loss_steps {
        let (name, comm) = match step {
            Some(t) => (format!("loss-at-{t}"), CommModel::LossAt(*t)),
            None => ("loss-never".to_string(), CommModel::Full),
        };
        checks.push(InequalityCheck::new(name, reference, divergence(&comm)?));
    }
    for schedule in &cases.schedules {
        let comm = CommModel::Schedule(schedule.clone());
        checks.push(InequalityCheck::new(comm.label(), reference, divergence(&comm)?));
    }
    for &q in &cases.dropout_rates {
        let comm = CommModel::BernoulliIntermittent(q);
        let rhs = if q > 0.0 { divergence(&comm)? / q } else { 0.0 };
        checks.push(InequalityCheck::new(format!("{}-scaled", comm.label()), reference, rhs));
    }
    for (name, f) in &cases.history_fns {
        let comm = CommModel::History(f.clone());
        checks.push(InequalityCheck::new(
            format!("history-{name}"),
            reference,
            divergence(&comm)?,
        ));
    }
    Ok(LemmaReport { reference, checks })
}

fn check_bound_inputs(v: f64, c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("value {v} outside [0, 1]")));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("correlation {c} is negative")));
    }
    Ok(())
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} {r} outside [0, 1]")))
    }
}

fn divergence_branch(v: f64, c: f64) -> f64 {
    v - (1.0 - (-c).exp()).sqrt()
}

fn length_branch(v: f64, l: f64, rate: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * (1.0 - rate).powf(l / v)
    }
}

/// Guarantee under history-dependent loss: `v − √(1 − e^{−C})`.
pub fn bound_theorem1(v_full: f64, correlation: f64) -> Result<f64> {
    check_bound_inputs(v_full, correlation)?;
    Ok(divergence_branch(v_full, correlation).max(-1.0))
}

/// Guarantee under geometric persistent loss with per-step probability `p`.
pub fn bound_theorem2(v_full: f64, correlation: f64, l_full: f64, p: f64) -> Result<f64> {
    check_bound_inputs(v_full, correlation)?;
    check_rate("loss probability", p)?;
    if !(l_full >= 0.0) {
        return Err(Error::InvalidParameter(format!("length {l_full} is negative")));
    }
    Ok(divergence_branch(v_full, correlation)
        .max(length_branch(v_full, l_full, p))
        .max(-1.0))
}

/// Guarantee under independent per-step dropout with probability `q`.
pub fn bound_theorem3(v_full: f64, correlation: f64, l_full: f64, q: f64) -> Result<f64> {
    check_bound_inputs(v_full, correlation)?;
    check_rate("dropout rate", q)?;
    if !(l_full >= 0.0) {
        return Err(Error::InvalidParameter(format!("length {l_full} is negative")));
    }
    Ok(divergence_branch(v_full, q * correlation)
        .max(length_branch(v_full, l_full, q))
        .max(-1.0))
}

/// The guarantee that applies to `comm`.
pub fn bound_for(comm: &CommModel, v_full: f64, correlation: f64, l_full: f64) -> Result<f64> {
    match *comm {
        CommModel::Full => {
            check_bound_inputs(v_full, correlation)?;
            Ok(v_full)
        }
        CommModel::BernoulliPersistent(p) => bound_theorem2(v_full, correlation, l_full, p),
        CommModel::BernoulliIntermittent(q) => bound_theorem3(v_full, correlation, l_full, q),
        CommModel::LossAt(_) | CommModel::Schedule(_) | CommModel::History(_) => bound_theorem1(v_full, correlation),
    }
}

/// A guarantee next to the empirical rate it should lower-bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub comm: String,
    pub v_full: f64,
    pub correlation: f64,
    pub l_full: f64,
    pub bound: f64,
    pub empirical: f64,
    pub stderr: f64,
    /// `bound ≤ empirical + sigmas·stderr`.
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(
        comm: &CommModel,
        v_full: f64,
        correlation: f64,
        l_full: f64,
        empirical: f64,
        stderr: f64,
        sigmas: f64,
    ) -> Result<Self> {
        let bound = bound_for(comm, v_full, correlation, l_full)?;
        Ok(Self {
            comm: comm.label(),
            v_full,
            correlation,
            l_full,
            bound,
            empirical,
            stderr,
            satisfied: bound <= empirical + sigmas * stderr + INEQUALITY_TOL,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn entropy_and_kl_basics() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let d = [0.2, 0.3, 0.5];
        assert_eq!(kl(&d, &d).unwrap(), 0.0);
        let want = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl(&[0.75, 0.25], &[0.5, 0.5]).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.130812).abs() < 1e-6);
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(kl(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn deterministic_line_has_one_path() {
        let game = fixtures::two_line();
        let policy = fixtures::two_line_go_policy(&game);
        let dist = enumerate_path_distribution(&game, &policy, &CommModel::Full, 5).unwrap();
        assert_eq!(dist.len(), 1);
        assert!((dist.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(dist.reach_avoid_probability(&game), 1.0);
    }

    #[test]
    fn coin_full_versus_imaginary() {
        let game = fixtures::coordinated_coin(1);
        let policy = fixtures::coordinated_coin_policy(&game);
        let full = enumerate_path_distribution(&game, &policy, &CommModel::Full, 4).unwrap();
        let none = enumerate_path_distribution(&game, &policy, &CommModel::none(), 4).unwrap();
        assert_eq!(full.len(), 2);
        assert_eq!(none.len(), 4);
        for (_, p) in full.iter() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        for (_, p) in none.iter() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((full.reach_avoid_probability(&game) - 1.0).abs() < 1e-15);
        assert!((none.reach_avoid_probability(&game) - 0.5).abs() < 1e-15);
        let c = exact_total_correlation(&game, &policy, 4).unwrap();
        assert!((c - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn stopping_time_couples_product_policies() {
        let game = fixtures::two_line();
        let policy = fixtures::product_policy(&game, &[vec![0.9, 0.1, 0.0, 1.0], vec![0.8, 0.2, 1.0, 0.0]]);
        let full = enumerate_path_distribution(&game, &policy, &CommModel::Full, 24).unwrap();
        let none = enumerate_path_distribution(&game, &policy, &CommModel::none(), 24).unwrap();
        for i in 0..2 {
            let a = full.agent_marginal(i);
            let b = none.agent_marginal(i);
            let gap: f64 = a
                .iter()
                .map(|(k, p)| (p - b.get(k).copied().unwrap_or(0.0)).abs())
                .sum();
            assert!(gap < 1e-9, "agent {i} marginal moved by {gap}");
        }
        let c = exact_total_correlation(&game, &policy, 24).unwrap();
        assert!(c > 1e-3);
        assert!((c - full.kl_to(&none)).abs() < 1e-9);
    }

    #[test]
    fn short_horizon_is_rejected() {
        let game = fixtures::slip_line();
        let policy = fixtures::two_line_go_policy(&game);
        assert!(matches!(
            enumerate_path_distribution(&game, &policy, &CommModel::Full, 3),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn support_cap_is_enforced() {
        let game = fixtures::coordinated_coin(3);
        let policy = fixtures::coordinated_coin_policy(&game);
        assert!(matches!(
            enumerate_with_cap(&game, &policy, &CommModel::none(), 6, 3),
            Err(Error::SupportCap(3))
        ));
    }

    #[test]
    fn lemma_boundaries() {
        let game = fixtures::coordinated_coin(2);
        let policy = fixtures::coordinated_coin_policy(&game);
        let cases = LemmaCases {
            loss_steps: vec![Some(0), Some(1), None],
            ..Default::default()
        };
        let report = check_lemma_inequalities(&game, &policy, 6, &cases).unwrap();
        assert!(report.all_satisfied());
        let at0 = &report.checks[0];
        assert!(at0.slack.abs() < 1e-12);
        let at1 = &report.checks[1];
        assert!(at1.slack > 1e-3, "losing after one shared step must help: {at1:?}");
        let never = &report.checks[2];
        assert_eq!(never.rhs, 0.0);
        assert!((report.reference - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bounds() {
        assert_eq!(bound_theorem1(0.9, 0.0).unwrap(), 0.9);
        assert_eq!(bound_theorem3(0.9, 5.0, 10.0, 0.0).unwrap(), 0.9);
        assert_eq!(bound_theorem2(0.0, 1.0, 3.0, 0.5).unwrap(), 0.0);
        let b = bound_theorem1(0.9638, 2.44).unwrap();
        assert!((b - (0.9638 - (1.0 - (-2.44f64).exp()).sqrt())).abs() < 1e-15);
        assert!((b - 0.0084).abs() < 1e-3);
        let t2 = bound_theorem2(0.9, 2.0, 5.0, 0.1).unwrap();
        assert!((t2 - 0.9 * 0.9f64.powf(5.0 / 0.9)).abs() < 1e-15);
        assert_eq!(
            bound_theorem1(0.0, 50.0).unwrap(),
            -1.0_f64.max(-(1.0 - (-50f64).exp()).sqrt())
        );
        assert!(bound_theorem1(1.2, 0.0).is_err());
        assert!(bound_theorem1(0.5, -1.0).is_err());
        assert!(bound_theorem3(0.5, 1.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn bound_report_flags_violations() {
        let ok = BoundReport::new(&CommModel::none(), 0.9, 0.1, 5.0, 0.8, 0.01, 4.0).unwrap();
        assert!(ok.satisfied);
        let bad = BoundReport::new(&CommModel::Full, 0.9, 0.1, 5.0, 0.5, 0.01, 4.0).unwrap();
        assert!(!bad.satisfied);
    }
}
