//! Occupancy measures of an augmented game: flow constraints, the maximum
//! reach-avoid linear program, policy extraction and path functionals.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{ConicProgram, ConicSolver};
use crate::error::{Error, Result};
use crate::markov_game::{JointGame, TransitionTable};
use crate::policy::JointPolicy;

/// Rows below this total mass are treated as unvisited.
pub const POSITIVE_MASS: f64 = 1e-12;

/// Default per-state occupancy cap.
pub const DEFAULT_CAP: f64 = 1e4;

/// Expected visit counts `x(s, a)` of an augmented game, dense over
/// `s * (m + 1) + a` with `a = m` the end action.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVector {
    num_states: usize,
    width: usize,
    values: Vec<f64>,
}

impl OccupancyVector {
    pub fn zeros(game: &JointGame) -> Self {
        let width = game.num_joint_actions() + 1;
        let num_states = game.num_product_states() + 1;
        Self {
            num_states,
            width,
            values: vec![0.0; num_states * width],
        }
    }

    pub fn from_values(game: &JointGame, values: Vec<f64>) -> Result<Self> {
        let mut x = Self::zeros(game);
        if values.len() != x.values.len() {
            return Err(Error::InvalidParameter(format!(
                "occupancy has {} entries, expected {}",
                values.len(),
                x.values.len()
            )));
        }
        x.values = values;
        Ok(x)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.width + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.width + a] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.width..(s + 1) * self.width]
    }

    /// `Σ_a x(s, a)`
    pub fn state_total(&self, s: usize) -> f64 {
        self.row(s).iter().sum()
    }

    /// Positive entries as `(state, action, x)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.width;
        self.values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(move |(k, &v)| (k / w, k % w, v))
    }

    /// CSV with columns `joint_state, joint_action, x`; the end action is
    /// written as index `m`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["joint_state", "joint_action", "x"])?;
        for (s, a, v) in self.nonzero() {
            w.write_record([s.to_string(), a.to_string(), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(game: &JointGame, input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            joint_state: usize,
            joint_action: usize,
            x: f64,
        }
        let mut x = Self::zeros(game);
        let mut reader = csv::Reader::from_reader(input);
        for entry in reader.deserialize() {
            let e: Entry = entry?;
            if e.joint_state >= x.num_states || e.joint_action >= x.width {
                return Err(Error::IndexOutOfRange {
                    what: "occupancy entry",
                    index: e.joint_state * x.width + e.joint_action,
                    bound: x.values.len(),
                });
            }
            x.set(e.joint_state, e.joint_action, e.x);
        }
        Ok(x)
    }
}

/// Precomputed flow data of an augmented game.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub num_states: usize,
    pub num_actions: usize,
    pub initial: usize,
    pub terminal: Vec<bool>,
    pub target: Vec<bool>,
    /// Reachable from the initial state through non-terminal states.
    pub reachable: Vec<bool>,
    pub table: TransitionTable,
    /// Probability of entering the target set, per pair `s * (m + 1) + a`.
    pub target_prob: Vec<f64>,
}

impl FlowModel {
    pub fn new(game: &JointGame) -> Result<Self> {
        game.require_augmented()?;
        let n = game.num_product_states();
        let m = game.num_joint_actions();
        let table = game.transition_table()?;
        let terminal: Vec<bool> = (0..n).map(|s| game.is_terminal(s)).collect();
        let target: Vec<bool> = (0..n).map(|s| game.is_target(s)).collect();
        let mut target_prob = vec![0.0; (n + 1) * (m + 1)];
        for s in (0..n).filter(|&s| !terminal[s]) {
            for a in 0..m {
                let (ys, ps) = table.row(s, a);
                target_prob[s * (m + 1) + a] = ys
                    .iter()
                    .zip(ps)
                    .filter(|(&y, _)| target[y as usize])
                    .map(|(_, p)| p)
                    .sum();
            }
        }
        Ok(Self {
            num_states: n,
            num_actions: m,
            initial: game.initial_state(),
            terminal,
            target,
            reachable: game.reachable_states(),
            table,
            target_prob,
        })
    }

    pub fn width(&self) -> usize {
        self.num_actions + 1
    }

    pub fn end_action(&self) -> usize {
        self.num_actions
    }

    /// Valid actions at product state `s`.
    pub fn actions(&self, s: usize) -> std::ops::Range<usize> {
        if self.terminal[s] {
            self.num_actions..self.num_actions + 1
        } else {
            0..self.num_actions
        }
    }

    /// Valid pairs over product states (end state excluded).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_states).flat_map(move |s| self.actions(s).map(move |a| (s, a)))
    }

    pub fn residual(&self, x: &OccupancyVector) -> Vec<f64> {
        let n = self.num_states;
        let mut r = vec![0.0; n];
        for s in 0..n {
            r[s] += x.row(s).iter().sum::<f64>();
        }
        for (s, a) in self.pairs() {
            let v = x.get(s, a);
            if v == 0.0 || self.terminal[s] {
                continue;
            }
            let (ys, ps) = self.table.row(s, a);
            for (&y, &p) in ys.iter().zip(ps) {
                r[y as usize] -= v * p;
            }
        }
        r[self.initial] -= 1.0;
        r
    }

    pub fn value(&self, x: &OccupancyVector) -> f64 {
        let w = self.width();
        let mut v: f64 = self
            .pairs()
            .filter(|&(s, _)| !self.terminal[s])
            .map(|(s, a)| x.get(s, a) * self.target_prob[s * w + a])
            .sum();
        if self.target[self.initial] {
            v += x.get(self.initial, self.end_action());
        }
        v
    }

    pub fn length(&self, x: &OccupancyVector) -> f64 {
        self.pairs().map(|(s, a)| x.get(s, a)).sum()
    }
}

/// `residual(s) = Σ_a x(s,a) − inflow(s) − 1{s = initial}` for every product
/// state.
pub fn flow_residual(game: &JointGame, x: &OccupancyVector) -> Result<Vec<f64>> {
    Ok(FlowModel::new(game)?.residual(x))
}

/// Reach-avoid probability and expected path length `(v, l)`.
pub fn value_and_length_from_occupancy(game: &JointGame, x: &OccupancyVector) -> Result<(f64, f64)> {
    let flow = FlowModel::new(game)?;
    Ok((flow.value(x), flow.length(x)))
}

/// Which optimal occupancy to return when the maximizer is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Whatever the interior-point solver converges to (a point in the
    /// relative interior of the optimal face).
    #[default]
    Interior,
    /// Re-solve for the shortest expected length among optimal occupancies.
    ShortestPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub cap: f64,
    pub tie_break: TieBreak,
    /// Value slack allowed by the shortest-path re-solve.
    pub value_slack: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            tie_break: TieBreak::default(),
            value_slack: 1e-7,
        }
    }
}

/// Problem size of the reach-avoid program before and after dropping
/// unreachable states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCensus {
    /// `|S| · |A|` over product states.
    pub full_variables: usize,
    /// Flow equalities over non-terminal product states.
    pub full_flow_constraints: usize,
    pub solved_variables: usize,
    pub solved_rows: usize,
}

#[derive(Debug, Clone)]
pub struct BaselineSolution {
    pub occupancy: OccupancyVector,
    pub value: f64,
    pub length: f64,
    pub census: ConstraintCensus,
}

/// Column layout of an occupancy program over reachable states.
pub(crate) struct PairColumns {
    pub pairs: Vec<(usize, usize)>,
    // dense pair index → column
    pub column: Vec<Option<usize>>,
}

impl PairColumns {
    pub fn reachable(flow: &FlowModel) -> Self {
        let w = flow.width();
        let mut column = vec![None; (flow.num_states + 1) * w];
        let mut pairs = Vec::new();
        for (s, a) in flow.pairs().filter(|&(s, _)| flow.reachable[s]) {
            column[s * w + a] = Some(pairs.len());
            pairs.push((s, a));
        }
        Self { pairs, column }
    }

    /// Flow equalities and the per-state cap.
    pub fn add_flow_rows(&self, flow: &FlowModel, program: &mut ConicProgram, cap: f64) {
        let w = flow.width();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); flow.num_states];
        for (col, &(s, a)) in self.pairs.iter().enumerate() {
            rows[s].push((col, 1.0));
            if flow.terminal[s] {
                continue;
            }
            let (ys, ps) = flow.table.row(s, a);
            for (&y, &p) in ys.iter().zip(ps) {
                rows[y as usize].push((col, -p));
            }
        }
        for s in (0..flow.num_states).filter(|&s| flow.reachable[s]) {
            let rhs = if s == flow.initial { 1.0 } else { 0.0 };
            program.add_equality(std::mem::take(&mut rows[s]), rhs);
        }
        for s in (0..flow.num_states).filter(|&s| flow.reachable[s]) {
            let row = flow
                .actions(s)
                .filter_map(|a| self.column[s * w + a])
                .map(|c| (c, 1.0))
                .collect();
            program.add_less_equal(row, cap);
        }
    }

    pub fn add_nonnegativity(&self, program: &mut ConicProgram) {
        for col in 0..self.pairs.len() {
            program.add_less_equal(vec![(col, -1.0)], 0.0);
        }
    }

    /// Value as a sparse row.
    pub fn value_row(&self, flow: &FlowModel) -> Vec<(usize, f64)> {
        let w = flow.width();
        self.pairs
            .iter()
            .enumerate()
            .filter_map(|(col, &(s, a))| {
                let coef = if flow.terminal[s] {
                    if s == flow.initial && flow.target[s] {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    flow.target_prob[s * w + a]
                };
                (coef != 0.0).then_some((col, coef))
            })
            .collect()
    }

    pub fn scatter(&self, game: &JointGame, solution: &[f64]) -> OccupancyVector {
        let mut x = OccupancyVector::zeros(game);
        for (&(s, a), &v) in self.pairs.iter().zip(solution) {
            x.set(s, a, v.max(0.0));
        }
        x
    }
}

/// Maximizes the reach-avoid probability over occupancy measures.
pub fn solve_baseline_lp(
    game: &JointGame,
    options: &BaselineOptions,
    solver: &dyn ConicSolver,
) -> Result<BaselineSolution> {
    if !(options.cap > 0.0) {
        return Err(Error::InvalidParameter(format!("cap {} must be positive", options.cap)));
    }
    let flow = FlowModel::new(game)?;
    let columns = PairColumns::reachable(&flow);
    let mut program = ConicProgram::new(columns.pairs.len());
    let value_row = columns.value_row(&flow);
    for &(c, v) in &value_row {
        program.set_cost(c, -v);
    }
    columns.add_flow_rows(&flow, &mut program, options.cap);
    columns.add_nonnegativity(&mut program);
    let census = ConstraintCensus {
        full_variables: flow.num_states * flow.num_actions,
        full_flow_constraints: flow.terminal.iter().filter(|&&t| !t).count(),
        solved_variables: program.num_vars(),
        solved_rows: program.num_rows(),
    };
    let mut solution = solver.solve(&program)?;
    if options.tie_break == TieBreak::ShortestPath {
        let best: f64 = value_row.iter().map(|&(c, v)| v * solution.x[c]).sum();
        for c in 0..program.num_vars() {
            program.set_cost(c, 1.0);
        }
        let row = value_row.iter().map(|&(c, v)| (c, -v)).collect();
        program.add_less_equal(row, -(best - options.value_slack));
        solution = solver.solve(&program)?;
    }
    let occupancy = columns.scatter(game, &solution.x);
    Ok(BaselineSolution {
        value: flow.value(&occupancy),
        length: flow.length(&occupancy),
        occupancy,
        census,
    })
}

/// Maximizes `v − Σ_s cost(s)·X_s` over the capped flow polytope, with
/// `X_s` the total occupancy of non-terminal state `s`.
pub(crate) fn solve_penalized_lp(
    game: &JointGame,
    cap: f64,
    state_cost: &[f64],
    solver: &dyn ConicSolver,
) -> Result<OccupancyVector> {
    let flow = FlowModel::new(game)?;
    let columns = PairColumns::reachable(&flow);
    let mut program = ConicProgram::new(columns.pairs.len());
    for (c, &(s, _)) in columns.pairs.iter().enumerate() {
        if !flow.terminal[s] {
            program.set_cost(c, state_cost[s]);
        }
    }
    for (c, v) in columns.value_row(&flow) {
        program.set_cost(c, program.objective()[c] - v);
    }
    columns.add_flow_rows(&flow, &mut program, cap);
    columns.add_nonnegativity(&mut program);
    let solution = solver.solve(&program)?;
    Ok(columns.scatter(game, &solution.x))
}

/// Normalizes occupancy rows into a joint policy; rows with no mass become
/// uniform. Terminal states take no ordinary action and are left uniform.
pub fn policy_from_occupancy(game: &JointGame, x: &OccupancyVector) -> JointPolicy {
    let n = game.num_product_states();
    let m = game.num_joint_actions();
    let mut probs = vec![1.0 / m as f64; n * m];
    for s in 0..n {
        let row = &x.row(s)[..m];
        let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
        if total > POSITIVE_MASS {
            for (dst, &v) in probs[s * m..(s + 1) * m].iter_mut().zip(row) {
                *dst = v.max(0.0) / total;
            }
        }
    }
    JointPolicy::from_rows(n, m, probs).expect("normalized rows")
}

/// Occupancy induced by a stationary joint policy, via the transient flow
/// system. Fails if some reachable state never absorbs.
pub fn occupancy_from_policy(game: &JointGame, policy: &JointPolicy) -> Result<OccupancyVector> {
    let flow = FlowModel::new(game)?;
    occupancy_from_policy_with(&flow, game, policy)
}

pub(crate) fn occupancy_from_policy_with(
    flow: &FlowModel,
    game: &JointGame,
    policy: &JointPolicy,
) -> Result<OccupancyVector> {
    let n = flow.num_states;
    let m = flow.num_actions;
    if policy.num_states() != n || policy.num_actions() != m {
        return Err(Error::InvalidParameter(format!(
            "policy shape {}x{} does not match game {}x{}",
            policy.num_states(),
            policy.num_actions(),
            n,
            m
        )));
    }
    // reachable set under the policy support
    let mut seen = vec![false; n];
    let mut order = vec![flow.initial];
    seen[flow.initial] = true;
    let mut head = 0;
    while head < order.len() {
        let s = order[head];
        head += 1;
        if flow.terminal[s] {
            continue;
        }
        for (a, _) in policy.support(s) {
            let (ys, _) = flow.table.row(s, a);
            for &y in ys {
                let y = y as usize;
                if !seen[y] {
                    seen[y] = true;
                    order.push(y);
                }
            }
        }
    }
    let transient: Vec<usize> = order.iter().copied().filter(|&s| !flow.terminal[s]).collect();
    check_absorbing(flow, policy, &order, &seen)?;

    let mut local = vec![usize::MAX; n];
    for (k, &s) in transient.iter().enumerate() {
        local[s] = k;
    }
    let t = transient.len();
    // (I - Pᵀ) X = e_initial over transient states
    let mut mat = DMatrix::<f64>::identity(t, t);
    for (k, &s) in transient.iter().enumerate() {
        for (a, p) in policy.support(s) {
            let (ys, ps) = flow.table.row(s, a);
            for (&y, &q) in ys.iter().zip(ps) {
                let j = local[y as usize];
                if j != usize::MAX {
                    mat[(j, k)] -= p * q;
                }
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(t);
    let mut x = OccupancyVector::zeros(game);
    if flow.terminal[flow.initial] {
        x.set(flow.initial, m, 1.0);
        return Ok(x);
    }
    rhs[local[flow.initial]] = 1.0;
    let visits = mat.lu().solve(&rhs).ok_or_else(|| Error::ImproperPolicy {
        states: transient.clone(),
    })?;
    let mut inflow_terminal = vec![0.0; n];
    for (k, &s) in transient.iter().enumerate() {
        let visits_s = visits[k].max(0.0);
        for (a, p) in policy.support(s) {
            x.set(s, a, visits_s * p);
            let (ys, ps) = flow.table.row(s, a);
            for (&y, &q) in ys.iter().zip(ps) {
                if flow.terminal[y as usize] {
                    inflow_terminal[y as usize] += visits_s * p * q;
                }
            }
        }
    }
    for s in (0..n).filter(|&s| flow.terminal[s] && seen[s]) {
        x.set(s, m, inflow_terminal[s]);
    }
    Ok(x)
}

fn check_absorbing(flow: &FlowModel, policy: &JointPolicy, order: &[usize], seen: &[bool]) -> Result<()> {
    // backward closure from terminal states over the support graph
    let n = flow.num_states;
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &s in order.iter().filter(|&&s| !flow.terminal[s]) {
        for (a, _) in policy.support(s) {
            let (ys, _) = flow.table.row(s, a);
            for &y in ys {
                preds[y as usize].push(s as u32);
            }
        }
    }
    let mut exits = vec![false; n];
    let mut stack: Vec<usize> = order.iter().copied().filter(|&s| flow.terminal[s]).collect();
    for &s in &stack {
        exits[s] = true;
    }
    while let Some(y) = stack.pop() {
        for &s in &preds[y] {
            let s = s as usize;
            if !exits[s] {
                exits[s] = true;
                stack.push(s);
            }
        }
    }
    let stuck: Vec<usize> = (0..n).filter(|&s| seen[s] && !exits[s]).collect();
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(Error::ImproperPolicy { states: stuck })
    }
}

/// Per-agent marginal occupancies `x(s^i, a^i)`, dense over
/// `s^i * (|A^i| + 1) + a^i`; the joint end action maps to every agent's end
/// action.
pub fn agent_marginals(game: &JointGame, x: &OccupancyVector) -> Vec<Vec<f64>> {
    let k = game.num_agents();
    let m = game.num_joint_actions();
    let mut out: Vec<Vec<f64>> = game
        .agents()
        .iter()
        .map(|ag| vec![0.0; ag.num_states() * (ag.num_actions() + 1)])
        .collect();
    let mut s_digits = vec![0; k];
    let mut a_digits = vec![0; k];
    for s in 0..game.num_product_states() {
        game.state_radix().decode_into(s, &mut s_digits);
        for a in 0..=m {
            let v = x.get(s, a);
            if v == 0.0 {
                continue;
            }
            if a < m {
                game.action_radix().decode_into(a, &mut a_digits);
            }
            for i in 0..k {
                let w = game.agent(i).num_actions() + 1;
                let ai = if a < m { a_digits[i] } else { w - 1 };
                out[i][s_digits[i] * w + ai] += v;
            }
        }
    }
    out
}

/// Local state occupancy `x(s^i)` of each agent summed over ordinary actions.
pub fn local_state_occupancy(game: &JointGame, x: &OccupancyVector) -> Vec<Vec<f64>> {
    agent_marginals(game, x)
        .into_iter()
        .enumerate()
        .map(|(i, marg)| {
            let w = game.agent(i).num_actions() + 1;
            marg.chunks(w).map(|row| row[..w - 1].iter().sum()).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Clarabel;
    use crate::fixtures;

    fn unit_flow(game: &JointGame) -> OccupancyVector {
        let mut x = OccupancyVector::zeros(game);
        x.set(0, 0, 1.0);
        x.set(3, game.end_action(), 1.0);
        x
    }

    #[test]
    fn unit_flow_two_line() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let x = unit_flow(&game);
        assert!(flow_residual(&game, &x).unwrap().iter().all(|r| r.abs() < 1e-15));
        assert_eq!(value_and_length_from_occupancy(&game, &x).unwrap(), (1.0, 2.0));
    }

    #[test]
    fn zero_occupancy() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let x = OccupancyVector::zeros(&game);
        let r = flow_residual(&game, &x).unwrap();
        assert_eq!(r, vec![-1.0, 0.0, 0.0, 0.0]);
        assert_eq!(value_and_length_from_occupancy(&game, &x).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn baseline_two_line() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        for tie_break in [TieBreak::Interior, TieBreak::ShortestPath] {
            let options = BaselineOptions {
                tie_break,
                ..Default::default()
            };
            let sol = solve_baseline_lp(&game, &options, &Clarabel::default()).unwrap();
            assert!((sol.value - 1.0).abs() < 1e-7);
            let r = flow_residual(&game, &sol.occupancy).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-7));
        }
    }

    #[test]
    fn shortest_path_tie_break() {
        let game = fixtures::slip_line().augment_with_end_state().unwrap();
        let options = BaselineOptions {
            tie_break: TieBreak::ShortestPath,
            ..Default::default()
        };
        let sol = solve_baseline_lp(&game, &options, &Clarabel::default()).unwrap();
        // both go: 1 / (1 - 0.1^2)... expected time in transient states plus the terminal step
        let go = fixtures::two_line_go_policy(&game);
        let x = occupancy_from_policy(&game, &go).unwrap();
        let (_, l) = value_and_length_from_occupancy(&game, &x).unwrap();
        assert!((sol.length - l).abs() < 1e-5, "{} vs {}", sol.length, l);
    }

    #[test]
    fn policy_normalization() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let mut x = OccupancyVector::zeros(&game);
        x.set(0, 0, 2.0);
        x.set(0, 1, 2.0);
        x.set(1, 0, 3.0);
        x.set(1, 2, 1.0);
        let pi = policy_from_occupancy(&game, &x);
        assert_eq!(&pi.row(0)[..2], &[0.5, 0.5]);
        assert_eq!(pi.row(1), &[0.75, 0.0, 0.25, 0.0]);
        assert_eq!(pi.row(2), &[0.25; 4]);
    }

    #[test]
    fn occupancy_of_go_policy() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let pi = fixtures::two_line_go_policy(&game);
        assert_eq!(occupancy_from_policy(&game, &pi).unwrap(), unit_flow(&game));
    }

    #[test]
    fn uniform_policy_matches_power_series() {
        let game = fixtures::slip_line().augment_with_end_state().unwrap();
        let pi = JointPolicy::uniform(4, 4);
        let x = occupancy_from_policy(&game, &pi).unwrap();
        // power series of state distributions
        let flow = FlowModel::new(&game).unwrap();
        let mut dist = vec![0.0; 4];
        dist[0] = 1.0;
        let mut visits = vec![0.0; 4];
        for _ in 0..2000 {
            let mut next = vec![0.0; 4];
            for s in 0..4 {
                visits[s] += dist[s];
                if flow.terminal[s] {
                    continue;
                }
                for a in 0..4 {
                    let (ys, ps) = flow.table.row(s, a);
                    for (&y, &p) in ys.iter().zip(ps) {
                        next[y as usize] += dist[s] * 0.25 * p;
                    }
                }
            }
            dist = next;
        }
        for s in 0..4 {
            assert!((x.state_total(s) - visits[s]).abs() < 1e-8);
        }
        let round = policy_from_occupancy(&game, &x);
        for s in 0..3 {
            for a in 0..4 {
                assert!((round.prob(s, a) - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn improper_policy_is_rejected() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let stay = game.action_radix().encode(&[fixtures::STAY, fixtures::STAY]);
        let pi = JointPolicy::deterministic(4, 4, |_| stay);
        assert!(matches!(
            occupancy_from_policy(&game, &pi),
            Err(Error::ImproperPolicy { states }) if states == vec![0]
        ));
    }

    #[test]
    fn csv_round_trip() {
        let game = fixtures::slip_line().augment_with_end_state().unwrap();
        let x = occupancy_from_policy(&game, &JointPolicy::uniform(4, 4)).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let back = OccupancyVector::read_csv(&game, buf.as_slice()).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn marginals_preserve_mass() {
        let game = fixtures::slip_line().augment_with_end_state().unwrap();
        let x = occupancy_from_policy(&game, &JointPolicy::uniform(4, 4)).unwrap();
        let total: f64 = x.values().iter().sum();
        for marg in agent_marginals(&game, &x) {
            assert!((marg.iter().sum::<f64>() - total).abs() < 1e-12);
        }
    }
}
