//! Minimum-dependency synthesis: entropy functionals of occupancy measures,
//! the total-correlation upper bound and a convex-concave procedure that
//! trades reach-avoid value against inter-agent dependency.
//!
//! The penalized objective is `v − δ·l − β·C̄` with
//! `C̄ = Σ_i H(X̄^i) − H(X)`. The concave part `v − δ·l + β·H(X)` is kept as
//! is; the convex part `−β·Σ_i H(X̄^i)` is linearized at the previous iterate.
//! Each linearized subproblem is an entropy-regularized absorbing MDP and is
//! solved exactly by soft policy iteration, with an exponential-cone program
//! as a fallback.

use std::io::Write;

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{Clarabel, ConicProgram, ConicSolver};
use crate::error::{Error, Result};
use crate::markov_game::JointGame;
use crate::occupancy::{
    occupancy_from_policy, occupancy_from_policy_with, policy_from_occupancy, solve_baseline_lp, BaselineOptions,
    FlowModel, OccupancyVector, PairColumns, DEFAULT_CAP,
};
use crate::policy::JointPolicy;

/// Largest admissible linearization clamp.
pub const MAX_CLAMP: f64 = 1e-6;

/// Precomputed decoding tables shared by every entropy computation.
#[derive(Debug, Clone)]
pub struct EntropyModel {
    pub flow: FlowModel,
    num_agents: usize,
    // local state of agent i in joint state s: state_digits[s * k + i]
    state_digits: Vec<u32>,
    action_digits: Vec<u32>,
    // per agent, marginal width |A^i| + 1 (last column is the end action)
    widths: Vec<usize>,
    // per agent, transition entropy h^i(s^i, a^i) laid out like marginals
    local_entropy: Vec<Vec<f64>>,
}

impl EntropyModel {
    pub fn new(game: &JointGame) -> Result<Self> {
        let flow = FlowModel::new(game)?;
        let k = game.num_agents();
        let n = game.num_product_states();
        let m = game.num_joint_actions();
        let mut state_digits = vec![0u32; n * k];
        let mut buf = vec![0; k];
        for s in 0..n {
            game.state_radix().decode_into(s, &mut buf);
            for i in 0..k {
                state_digits[s * k + i] = buf[i] as u32;
            }
        }
        let mut action_digits = vec![0u32; (m + 1) * k];
        for a in 0..m {
            game.action_radix().decode_into(a, &mut buf);
            for i in 0..k {
                action_digits[a * k + i] = buf[i] as u32;
            }
        }
        let widths: Vec<usize> = game.agents().iter().map(|ag| ag.num_actions() + 1).collect();
        for i in 0..k {
            // the joint end action maps to each agent's end action
            action_digits[m * k + i] = (widths[i] - 1) as u32;
        }
        let local_entropy = game
            .agents()
            .iter()
            .map(|ag| {
                let w = ag.num_actions() + 1;
                let mut h = vec![0.0; ag.num_states() * w];
                for s in 0..ag.num_states() {
                    for a in 0..ag.num_actions() {
                        h[s * w + a] = ag.transition_entropy(s, a);
                    }
                }
                h
            })
            .collect();
        Ok(Self {
            flow,
            num_agents: k,
            state_digits,
            action_digits,
            widths,
            local_entropy,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// Index of the marginal coordinate of agent `i` for joint pair `(s, a)`.
    #[inline]
    fn local_pair(&self, i: usize, s: usize, a: usize) -> usize {
        let k = self.num_agents;
        self.state_digits[s * k + i] as usize * self.widths[i] + self.action_digits[a * k + i] as usize
    }

    /// Joint transition entropy of a valid pair; zero for the end action.
    pub fn pair_entropy(&self, s: usize, a: usize) -> f64 {
        if a == self.flow.end_action() {
            return 0.0;
        }
        (0..self.num_agents)
            .map(|i| self.local_entropy[i][self.local_pair(i, s, a)])
            .sum()
    }

    pub fn marginals(&self, x: &OccupancyVector) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.local_entropy.iter().map(|h| vec![0.0; h.len()]).collect();
        for (s, a) in self.flow.pairs() {
            let v = x.get(s, a);
            if v == 0.0 {
                continue;
            }
            for (i, marg) in out.iter_mut().enumerate() {
                marg[self.local_pair(i, s, a)] += v;
            }
        }
        out
    }

    /// `H(X)`: policy part `Σ x log(X_s/x)` plus transition part `Σ x h(s,a)`.
    pub fn joint_entropy(&self, x: &OccupancyVector) -> f64 {
        let mut total = 0.0;
        for s in 0..self.flow.num_states {
            let row_total: f64 = self.flow.actions(s).map(|a| x.get(s, a).max(0.0)).sum();
            if row_total <= 0.0 {
                continue;
            }
            for a in self.flow.actions(s) {
                let v = x.get(s, a);
                if v > 0.0 {
                    total += v * (row_total / v).ln() + v * self.pair_entropy(s, a);
                }
            }
        }
        total
    }

    /// `H(X̄^i)` from the marginal occupancy of agent `i`.
    pub fn agent_entropy(&self, i: usize, marginal: &[f64]) -> f64 {
        let w = self.widths[i];
        let h = &self.local_entropy[i];
        let mut total = 0.0;
        for (row, hrow) in marginal.chunks(w).zip(h.chunks(w)) {
            let row_total: f64 = row.iter().map(|v| v.max(0.0)).sum();
            if row_total <= 0.0 {
                continue;
            }
            for (&v, &hv) in row.iter().zip(hrow) {
                if v > 0.0 {
                    total += v * (row_total / v).ln() + v * hv;
                }
            }
        }
        total
    }

    pub fn metrics(&self, x: &OccupancyVector, delta: f64, beta: f64) -> Metrics {
        let marginals = self.marginals(x);
        let joint_entropy = self.joint_entropy(x);
        let agent_entropy_sum: f64 = marginals
            .iter()
            .enumerate()
            .map(|(i, m)| self.agent_entropy(i, m))
            .sum();
        let value = self.flow.value(x);
        let length = self.flow.length(x);
        let total_correlation_bound = agent_entropy_sum - joint_entropy;
        Metrics {
            objective: value - delta * length - beta * total_correlation_bound,
            value,
            length,
            joint_entropy,
            agent_entropy_sum,
            total_correlation_bound,
        }
    }

    /// Clamped conditional `π̃^i(a^i | s^i)` per agent: ratios below `clamp`
    /// are raised to it and each row renormalized; unvisited local states
    /// get the uniform distribution.
    fn clamped_conditionals(&self, x: &OccupancyVector, clamp: f64) -> Vec<Vec<f64>> {
        let mut marginals = self.marginals(x);
        for (i, marg) in marginals.iter_mut().enumerate() {
            let w = self.widths[i];
            for row in marg.chunks_mut(w) {
                let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
                if total <= 0.0 {
                    row.fill(1.0 / w as f64);
                    continue;
                }
                let mut norm = 0.0;
                for v in row.iter_mut() {
                    *v = (v.max(0.0) / total).max(clamp);
                    norm += *v;
                }
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
        marginals
    }

    /// Coefficients of the linearization of `−Σ_i H(X̄^i)` at `x`, dense in
    /// the occupancy layout.
    pub fn linearize(&self, x: &OccupancyVector, clamp: f64) -> Vec<f64> {
        let cond = self.clamped_conditionals(x, clamp);
        let grads: Vec<Vec<f64>> = cond
            .iter()
            .zip(&self.local_entropy)
            .map(|(c, h)| c.iter().zip(h).map(|(p, hv)| p.ln() - hv).collect())
            .collect();
        let w = self.flow.width();
        let mut out = vec![0.0; (self.flow.num_states + 1) * w];
        for (s, a) in self.flow.pairs() {
            out[s * w + a] = (0..self.num_agents).map(|i| grads[i][self.local_pair(i, s, a)]).sum();
        }
        out
    }
}

/// Scalar summary of an occupancy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub objective: f64,
    pub value: f64,
    pub length: f64,
    pub joint_entropy: f64,
    pub agent_entropy_sum: f64,
    pub total_correlation_bound: f64,
}

pub fn joint_entropy_term(game: &JointGame, x: &OccupancyVector) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(EntropyModel::new(game)?.joint_entropy(x))
}

pub fn agent_entropy_bound(game: &JointGame, x: &OccupancyVector, agent: usize) -> Result<f64> {
    check_nonnegative(x)?;
    if agent >= game.num_agents() {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent,
            bound: game.num_agents(),
        });
    }
    let model = EntropyModel::new(game)?;
    let marginals = model.marginals(x);
    Ok(model.agent_entropy(agent, &marginals[agent]))
}

/// `C̄ = Σ_i H(X̄^i) − H(X)`.
pub fn total_correlation_bound(game: &JointGame, x: &OccupancyVector) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(EntropyModel::new(game)?.metrics(x, 0.0, 0.0).total_correlation_bound)
}

/// `v − δ·l − β·C̄`.
pub fn objective(game: &JointGame, x: &OccupancyVector, delta: f64, beta: f64) -> Result<f64> {
    check_nonnegative(x)?;
    Ok(EntropyModel::new(game)?.metrics(x, delta, beta).objective)
}

/// Gradient of `−Σ_i H(X̄^i)` at `x_prev`, as coefficients over joint pairs.
pub fn linearize_convex_part(game: &JointGame, x_prev: &OccupancyVector, clamp: f64) -> Result<Vec<f64>> {
    check_nonnegative(x_prev)?;
    check_clamp(clamp)?;
    Ok(EntropyModel::new(game)?.linearize(x_prev, clamp))
}

fn check_nonnegative(x: &OccupancyVector) -> Result<()> {
    match x.values().iter().position(|&v| !(v >= 0.0)) {
        Some(k) => Err(Error::InvalidParameter(format!(
            "occupancy entry {k} is {}",
            x.values()[k]
        ))),
        None => Ok(()),
    }
}

fn check_clamp(clamp: f64) -> Result<()> {
    if clamp > 0.0 && clamp <= MAX_CLAMP {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "clamp {clamp} outside (0, {MAX_CLAMP}]"
        )))
    }
}

/// How each linearized subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubproblemMethod {
    /// Soft policy iteration, falling back to the cone program if the cap
    /// binds or the iteration fails.
    #[default]
    Auto,
    SoftPolicyIteration,
    ExponentialCone,
}

/// Where the first linearization is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    /// Occupancy of the uniform joint policy.
    #[default]
    UniformPolicy,
    /// Occupancy of the maximum reach-avoid program.
    Baseline,
    /// First subproblem ignores the convex part entirely.
    ZeroGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub delta: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub cap: f64,
    pub linearization_clamp: f64,
    /// Stop early once the objective improves by less than this.
    pub convergence_tol: Option<f64>,
    pub initialization: Initialization,
    pub method: SubproblemMethod,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            beta: 0.4,
            max_iters: 100,
            cap: DEFAULT_CAP,
            linearization_clamp: 1e-12,
            convergence_tol: None,
            initialization: Initialization::default(),
            method: SubproblemMethod::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta {} and beta {} must be positive",
                self.delta, self.beta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.cap > 0.0) {
            return Err(Error::InvalidParameter(format!("cap {} must be positive", self.cap)));
        }
        check_clamp(self.linearization_clamp)
    }
}

/// Linearized subproblem data: maximize `Σ x·(R_T − δ + β·h + β·grad) + β·Σ x log(X_s/x)`.
pub struct Subproblem<'a> {
    model: &'a EntropyModel,
    /// Linear reward per pair, dense in the occupancy layout.
    reward: Vec<f64>,
    beta: f64,
    cap: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(model: &'a EntropyModel, coefficients: &[f64], delta: f64, beta: f64, cap: f64) -> Self {
        let flow = &model.flow;
        let w = flow.width();
        let mut reward = vec![0.0; (flow.num_states + 1) * w];
        for (s, a) in flow.pairs() {
            let k = s * w + a;
            let target = if flow.terminal[s] {
                if s == flow.initial && flow.target[s] {
                    1.0
                } else {
                    0.0
                }
            } else {
                flow.target_prob[k]
            };
            reward[k] = target - delta + beta * model.pair_entropy(s, a) + beta * coefficients[k];
        }
        Self {
            model,
            reward,
            beta,
            cap,
        }
    }

    /// Surrogate objective at `x`.
    pub fn surrogate(&self, x: &OccupancyVector) -> f64 {
        let flow = &self.model.flow;
        let w = flow.width();
        let mut total = 0.0;
        for s in 0..flow.num_states {
            let row_total: f64 = flow.actions(s).map(|a| x.get(s, a).max(0.0)).sum();
            for a in flow.actions(s) {
                let v = x.get(s, a);
                if v > 0.0 {
                    total += v * self.reward[s * w + a] + self.beta * v * (row_total / v).ln();
                }
            }
        }
        total
    }

    pub fn solve(&self, game: &JointGame, method: SubproblemMethod) -> Result<SubproblemSolution> {
        match method {
            SubproblemMethod::SoftPolicyIteration => self.solve_soft(game),
            SubproblemMethod::ExponentialCone => self.solve_cone(game, &Clarabel::default()),
            SubproblemMethod::Auto => match self.solve_soft(game) {
                Ok(sol) => Ok(sol),
                Err(e) => {
                    warn!("soft policy iteration failed ({e}); solving the cone program");
                    self.solve_cone(game, &Clarabel::default())
                }
            },
        }
    }

    /// Soft policy iteration from the uniform policy.
    pub fn solve_soft(&self, game: &JointGame) -> Result<SubproblemSolution> {
        const MAX_ROUNDS: usize = 500;
        let flow = &self.model.flow;
        let n = flow.num_states;
        let m = flow.num_actions;
        let w = flow.width();
        let beta = self.beta;
        let transient: Vec<usize> = (0..n).filter(|&s| flow.reachable[s] && !flow.terminal[s]).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &s) in transient.iter().enumerate() {
            local[s] = k;
        }
        let mut values = vec![0.0; n];
        for s in (0..n).filter(|&s| flow.terminal[s]) {
            values[s] = self.reward[s * w + m];
        }
        let t = transient.len();
        let mut policy = vec![1.0 / m as f64; t * m];
        let mut q = vec![0.0; m];
        let mut rounds = 0;
        let mut residual = f64::INFINITY;
        while rounds < MAX_ROUNDS {
            rounds += 1;
            // evaluation: (I − P_π) V = r_π + β H_π + terminal inflow
            let mut mat = DMatrix::<f64>::identity(t, t);
            let mut rhs = DVector::<f64>::zeros(t);
            for (k, &s) in transient.iter().enumerate() {
                let pol = &policy[k * m..(k + 1) * m];
                let mut b = 0.0;
                for (a, &p) in pol.iter().enumerate() {
                    if p <= 0.0 {
                        continue;
                    }
                    b += p * (self.reward[s * w + a] - beta * p.ln());
                    let (ys, ps) = flow.table.row(s, a);
                    for (&y, &pr) in ys.iter().zip(ps) {
                        let y = y as usize;
                        let j = local[y];
                        if j == usize::MAX {
                            b += p * pr * values[y];
                        } else {
                            mat[(k, j)] -= p * pr;
                        }
                    }
                }
                rhs[k] = b;
            }
            let v = mat.lu().solve(&rhs).ok_or_else(|| Error::ImproperPolicy {
                states: transient.clone(),
            })?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::solver("diverged", "non-finite soft values"));
            }
            for (k, &s) in transient.iter().enumerate() {
                values[s] = v[k];
            }
            // improvement
            let mut change: f64 = 0.0;
            residual = 0.0;
            for (k, &s) in transient.iter().enumerate() {
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = self.reward[s * w + a] + flow.table.expect(s, a, &values);
                }
                let qmax = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = q.iter().map(|&qa| ((qa - qmax) / beta).exp()).sum();
                let soft = qmax + beta * z.ln();
                residual = residual.max(soft - values[s]);
                let pol = &mut policy[k * m..(k + 1) * m];
                for (p, &qa) in pol.iter_mut().zip(&q) {
                    let np = ((qa - qmax) / beta).exp() / z;
                    change = change.max((np - *p).abs());
                    *p = np;
                }
            }
            debug!("soft policy iteration round {rounds}: residual {residual:e}, policy change {change:e}");
            let scale = 1.0 + values[flow.initial].abs();
            if residual <= 1e-13 * scale || change <= 1e-14 {
                break;
            }
        }
        if residual > 1e-9 * (1.0 + values[flow.initial].abs()) {
            return Err(Error::solver(
                "not converged",
                format!("soft Bellman residual {residual:e} after {rounds} rounds"),
            ));
        }
        let mut rows = vec![1.0 / m as f64; n * m];
        for (k, &s) in transient.iter().enumerate() {
            rows[s * m..(s + 1) * m].copy_from_slice(&policy[k * m..(k + 1) * m]);
        }
        let joint = JointPolicy::from_rows(n, m, rows)?;
        let occupancy = occupancy_from_policy_with(flow, game, &joint)?;
        if let Some(s) = (0..n).find(|&s| occupancy.state_total(s) > self.cap * (1.0 + 1e-9)) {
            return Err(Error::solver(
                "cap binds",
                format!("state {s} has occupancy {} above the cap", occupancy.state_total(s)),
            ));
        }
        Ok(SubproblemSolution {
            surrogate: self.surrogate(&occupancy),
            occupancy,
            method: SubproblemMethod::SoftPolicyIteration,
            certificate: residual,
        })
    }

    /// Exponential-cone program with hypograph variables `t ≤ x log(X_s/x)`.
    pub fn solve_cone(&self, game: &JointGame, solver: &dyn ConicSolver) -> Result<SubproblemSolution> {
        let flow = &self.model.flow;
        let w = flow.width();
        let columns = PairColumns::reachable(flow);
        let mut program = ConicProgram::new(columns.pairs.len());
        for (col, &(s, a)) in columns.pairs.iter().enumerate() {
            program.set_cost(col, -self.reward[s * w + a]);
        }
        columns.add_flow_rows(flow, &mut program, self.cap);
        columns.add_nonnegativity(&mut program);
        for s in (0..flow.num_states).filter(|&s| flow.reachable[s] && !flow.terminal[s]) {
            let cols: Vec<usize> = flow.actions(s).filter_map(|a| columns.column[s * w + a]).collect();
            if cols.len() < 2 {
                continue;
            }
            let state_total: Vec<(usize, f64)> = cols.iter().map(|&c| (c, 1.0)).collect();
            for &c in &cols {
                let t = program.add_var();
                program.set_cost(t, -self.beta);
                program.add_exp_cone((vec![(t, 1.0)], 0.0), (vec![(c, 1.0)], 0.0), (state_total.clone(), 0.0));
            }
        }
        let sol = solver.solve(&program)?;
        let occupancy = columns.scatter(game, &sol.x[..columns.pairs.len()]);
        Ok(SubproblemSolution {
            surrogate: self.surrogate(&occupancy),
            occupancy,
            method: SubproblemMethod::ExponentialCone,
            certificate: sol.primal_residual,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub occupancy: OccupancyVector,
    pub surrogate: f64,
    pub method: SubproblemMethod,
    /// Soft Bellman residual, or the cone solver's primal residual.
    pub certificate: f64,
}

/// Solves one linearized subproblem. `coefficients` is the gradient of
/// `−Σ_i H(X̄^i)` in the occupancy layout.
pub fn solve_ccp_subproblem(
    game: &JointGame,
    coefficients: &[f64],
    delta: f64,
    beta: f64,
    cap: f64,
    method: SubproblemMethod,
) -> Result<OccupancyVector> {
    let model = EntropyModel::new(game)?;
    if coefficients.len() != (model.flow.num_states + 1) * model.flow.width() {
        return Err(Error::InvalidParameter(
            "coefficient vector has the wrong length".into(),
        ));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("coefficients must be finite".into()));
    }
    Ok(Subproblem::new(&model, coefficients, delta, beta, cap)
        .solve(game, method)?
        .occupancy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisTrace {
    pub records: Vec<TraceRecord>,
}

impl SynthesisTrace {
    /// Largest decrease of the objective between consecutive iterations.
    pub fn worst_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].metrics.objective - w[1].metrics.objective)
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iter",
            "objective",
            "v_full",
            "l_full",
            "C_bar",
            "joint_entropy",
            "agent_entropy_sum",
        ])?;
        for r in &self.records {
            let m = &r.metrics;
            w.write_record([
                r.iteration.to_string(),
                format!("{:.12}", m.objective),
                format!("{:.12}", m.value),
                format!("{:.12}", m.length),
                format!("{:.12}", m.total_correlation_bound),
                format!("{:.12}", m.joint_entropy),
                format!("{:.12}", m.agent_entropy_sum),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "detail")]
pub enum SynthesisStatus {
    /// Ran the full iteration budget.
    Completed,
    /// Stopped early on the convergence tolerance.
    Converged,
    /// A subproblem failed; the best iterate so far is returned.
    SubproblemFailed(String),
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub policy: JointPolicy,
    pub occupancy: OccupancyVector,
    pub trace: SynthesisTrace,
    pub status: SynthesisStatus,
}

/// Convex-concave procedure for the minimum-dependency objective.
pub fn synthesize_min_dependency(game: &JointGame, config: &SynthesisConfig) -> Result<SynthesisResult> {
    config.validate()?;
    let model = EntropyModel::new(game)?;
    let flow = &model.flow;
    let m = flow.num_actions;
    let anchor = match config.initialization {
        Initialization::UniformPolicy | Initialization::ZeroGradient => {
            occupancy_from_policy_with(flow, game, &JointPolicy::uniform(flow.num_states, m))?
        }
        Initialization::Baseline => {
            let options = BaselineOptions {
                cap: config.cap,
                ..Default::default()
            };
            solve_baseline_lp(game, &options, &Clarabel::default())?.occupancy
        }
    };
    let zero_first = config.initialization == Initialization::ZeroGradient;
    run_ccp(game, &model, config, anchor, zero_first)
}

/// Runs the procedure linearizing first at `anchor`, which need not be
/// flow-feasible.
pub fn synthesize_from(game: &JointGame, config: &SynthesisConfig, anchor: OccupancyVector) -> Result<SynthesisResult> {
    config.validate()?;
    let model = EntropyModel::new(game)?;
    if anchor.values().len() != (model.flow.num_states + 1) * model.flow.width() {
        return Err(Error::InvalidParameter("anchor occupancy has the wrong layout".into()));
    }
    run_ccp(game, &model, config, anchor, false)
}

/// `(1 − weight)·baseline + weight·occupancy(policy)`. Flow-feasible, keeps
/// most of the baseline's reach-avoid mass and borrows the structure of
/// `policy`.
pub fn baseline_blend(game: &JointGame, cap: f64, policy: &JointPolicy, weight: f64) -> Result<OccupancyVector> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!("blend weight {weight} outside [0, 1]")));
    }
    let options = BaselineOptions {
        cap,
        ..Default::default()
    };
    let mut anchor = solve_baseline_lp(game, &options, &Clarabel::default())?.occupancy;
    let other = occupancy_from_policy(game, policy)?;
    for (v, w) in anchor.values_mut().iter_mut().zip(other.values()) {
        *v = (1.0 - weight) * *v + weight * w;
    }
    Ok(anchor)
}

fn run_ccp(
    game: &JointGame,
    model: &EntropyModel,
    config: &SynthesisConfig,
    mut anchor: OccupancyVector,
    zero_first: bool,
) -> Result<SynthesisResult> {
    let mut trace = SynthesisTrace::default();
    let mut status = SynthesisStatus::Completed;
    let mut best: Option<OccupancyVector> = None;
    for iteration in 0..config.max_iters {
        let coefficients = if iteration == 0 && zero_first {
            vec![0.0; anchor.values().len()]
        } else {
            model.linearize(&anchor, config.linearization_clamp)
        };
        let sub = Subproblem::new(model, &coefficients, config.delta, config.beta, config.cap);
        let solution = match sub.solve(game, config.method) {
            Ok(s) => s,
            Err(e) => {
                warn!("subproblem {iteration} failed: {e}");
                if best.is_none() {
                    return Err(e);
                }
                status = SynthesisStatus::SubproblemFailed(e.to_string());
                break;
            }
        };
        let metrics = model.metrics(&solution.occupancy, config.delta, config.beta);
        info!(
            "iteration {iteration}: objective {:.6} value {:.5} length {:.3} C̄ {:.4}",
            metrics.objective, metrics.value, metrics.length, metrics.total_correlation_bound
        );
        let improvement = trace.last().map(|r| metrics.objective - r.metrics.objective);
        trace.records.push(TraceRecord { iteration, metrics });
        anchor = solution.occupancy;
        best = Some(anchor.clone());
        if let (Some(tol), Some(step)) = (config.convergence_tol, improvement) {
            if step.abs() < tol {
                status = SynthesisStatus::Converged;
                break;
            }
        }
    }
    let occupancy = best.expect("at least one iteration succeeded");
    Ok(SynthesisResult {
        policy: policy_from_occupancy(game, &occupancy),
        occupancy,
        trace,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::occupancy::{flow_residual, occupancy_from_policy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn aug(game: JointGame) -> JointGame {
        game.augment_with_end_state().unwrap()
    }

    #[test]
    fn deterministic_chain_has_zero_entropy() {
        let game = aug(fixtures::two_line());
        let x = occupancy_from_policy(&game, &fixtures::two_line_go_policy(&game)).unwrap();
        assert_eq!(joint_entropy_term(&game, &x).unwrap(), 0.0);
        assert_eq!(total_correlation_bound(&game, &x).unwrap(), 0.0);
        assert!((objective(&game, &x, 0.01, 0.0).unwrap() - 0.98).abs() < 1e-15);
    }

    #[test]
    fn two_equiprobable_actions() {
        let game = aug(fixtures::two_line());
        let mut x = OccupancyVector::zeros(&game);
        // at (A, A): half (go, go), half (go, stay), deterministic dynamics
        x.set(0, 0, 0.5);
        x.set(0, 2, 0.5);
        assert!((joint_entropy_term(&game, &x).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn slip_line_transition_entropy() {
        let game = aug(fixtures::slip_line());
        let go = fixtures::two_line_go_policy(&game);
        let x = occupancy_from_policy(&game, &go).unwrap();
        let h = joint_entropy_term(&game, &x).unwrap();
        let h4: f64 = [0.81f64, 0.09, 0.09, 0.01].iter().map(|p| -p * p.ln()).sum();
        let h2: f64 = [0.9f64, 0.1].iter().map(|p| -p * p.ln()).sum();
        // visits: (A,A) 1/0.99; (A,B),(B,A) each 0.09/0.99 / 0.1... via flow
        let expected = x.get(0, 0) * h4 + (x.get(1, 0) + x.get(2, 0)) * h2;
        assert!((h - expected).abs() < 1e-12);
    }

    #[test]
    fn product_policy_has_zero_bound() {
        let game = aug(fixtures::slip_line());
        let local = vec![vec![0.7, 0.3, 0.5, 0.5], vec![0.4, 0.6, 0.5, 0.5]];
        let pi = fixtures::product_policy(&game, &local);
        let x = occupancy_from_policy(&game, &pi).unwrap();
        // terminal (B,B) only: agents' end actions coincide with the joint one
        let c = total_correlation_bound(&game, &x).unwrap();
        assert!(c >= -1e-12);
    }

    #[test]
    fn coordinated_policy_is_correlated() {
        let game = aug(fixtures::coordinated_coin(2));
        let x = occupancy_from_policy(&game, &fixtures::coordinated_coin_policy(&game)).unwrap();
        let c = total_correlation_bound(&game, &x).unwrap();
        // two perfectly correlated coin flips: ln 2 each
        assert!((c - 2.0 * 2f64.ln()).abs() < 1e-12, "{c}");
    }

    #[test]
    fn linearization_at_uniform_marginals() {
        // independent uniform choice on the two-line game; at the start both
        // agents pick go/stay uniformly
        let game = aug(fixtures::two_line());
        let mut x = OccupancyVector::zeros(&game);
        for a in 0..4 {
            x.set(0, a, 0.25);
        }
        let g = linearize_convex_part(&game, &x, 1e-12).unwrap();
        // agent marginal at A: go 1/2, stay 1/2, end 0 (clamped)
        for a in 0..4 {
            assert!((g[a] - 2.0 * (0.5f64 / (1.0 + 1e-12)).ln()).abs() < 1e-9);
        }
        assert!(g.iter().all(|v| v.is_finite()));
    }

    fn neg_agent_entropy(model: &EntropyModel, x: &OccupancyVector) -> f64 {
        let marg = model.marginals(x);
        -(0..model.num_agents())
            .map(|i| model.agent_entropy(i, &marg[i]))
            .sum::<f64>()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let game = aug(fixtures::slip_line());
        let model = EntropyModel::new(&game).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<(usize, usize)> = model.flow.pairs().collect();
        for _ in 0..20 {
            let mut x = OccupancyVector::zeros(&game);
            for &(s, a) in &pairs {
                x.set(s, a, rng.gen_range(0.1..2.0));
            }
            let g = model.linearize(&x, 1e-12);
            let &(s, a) = &pairs[rng.gen_range(0..pairs.len())];
            let h = 1e-6;
            let mut up = x.clone();
            up.set(s, a, x.get(s, a) + h);
            let mut down = x.clone();
            down.set(s, a, x.get(s, a) - h);
            let fd = (neg_agent_entropy(&model, &up) - neg_agent_entropy(&model, &down)) / (2.0 * h);
            let an = g[s * x.width() + a];
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn soft_solver_matches_cone_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for game in [aug(fixtures::slip_line()), aug(fixtures::coordinated_coin(2))] {
            let model = EntropyModel::new(&game).unwrap();
            let mut anchor = OccupancyVector::zeros(&game);
            for (s, a) in model.flow.pairs().collect::<Vec<_>>() {
                anchor.set(s, a, rng.gen_range(0.0..2.0));
            }
            let coeffs = model.linearize(&anchor, 1e-12);
            let sub = Subproblem::new(&model, &coeffs, 0.01, 0.4, DEFAULT_CAP);
            let soft = sub.solve_soft(&game).unwrap();
            let cone = sub.solve_cone(&game, &Clarabel::default()).unwrap();
            assert!(
                (soft.surrogate - cone.surrogate).abs() < 1e-6,
                "{} vs {}",
                soft.surrogate,
                cone.surrogate
            );
            assert!(soft.surrogate >= cone.surrogate - 1e-9);
            let r = flow_residual(&game, &soft.occupancy).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn entropy_bonus_does_not_stall_two_line() {
        let game = aug(fixtures::two_line());
        let zeros = vec![0.0; game.num_states() * (game.num_joint_actions() + 1)];
        let x = solve_ccp_subproblem(&game, &zeros, 0.01, 0.4, DEFAULT_CAP, SubproblemMethod::Auto).unwrap();
        let (v, _) = crate::occupancy::value_and_length_from_occupancy(&game, &x).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ccp_is_monotone_on_coin_game() {
        let game = aug(fixtures::coordinated_coin(2));
        let config = SynthesisConfig {
            max_iters: 15,
            ..Default::default()
        };
        let result = synthesize_min_dependency(&game, &config).unwrap();
        assert_eq!(result.trace.records.len(), 15);
        assert!(result.trace.worst_decrease() <= 1e-9);
    }

    #[test]
    fn config_validation() {
        let bad = SynthesisConfig {
            linearization_clamp: 1e-3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthesisConfig {
            delta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
