//! Finite agent MDPs and their transition-independent product game.
//!
//! Joint states and joint actions are mixed-radix integers over the
//! per-agent set sizes, agent 0 least significant. Once a game is augmented
//! with an end state, index `num_product_states()` is the end state and
//! index `num_joint_actions()` is the end action.

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Mixed-radix codec between digit tuples and flat indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        let mut strides = Vec::with_capacity(radices.len());
        let mut size = 1usize;
        for &r in &radices {
            strides.push(size);
            size = size.checked_mul(r).expect("mixed-radix size overflow");
        }
        Self { radices, strides, size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn stride(&self, position: usize) -> usize {
        self.strides[position]
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radices.len());
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    pub fn try_encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.radices.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} digits, got {}",
                self.radices.len(),
                digits.len()
            )));
        }
        for (&d, &r) in digits.iter().zip(&self.radices) {
            if d >= r {
                return Err(Error::IndexOutOfRange {
                    what: "digit",
                    index: d,
                    bound: r,
                });
            }
        }
        Ok(self.encode(digits))
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(index, &mut out);
        out
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for (slot, &r) in out.iter_mut().zip(&self.radices) {
            *slot = index % r;
            index /= r;
        }
    }

    pub fn digit(&self, index: usize, position: usize) -> usize {
        (index / self.strides[position]) % self.radices[position]
    }
}

/// One agent's finite MDP with a sparse transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMdp {
    num_states: usize,
    initial: usize,
    num_actions: usize,
    // row s * num_actions + a, sorted by successor, strictly positive entries
    kernel: Vec<Vec<(usize, f64)>>,
}

impl AgentMdp {
    /// Builds an agent from rows indexed `s * num_actions + a`.
    ///
    /// Zero-probability entries are dropped and duplicate successors merged.
    pub fn new(num_states: usize, initial: usize, num_actions: usize, kernel: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel(
                "agent needs at least one state and one action".into(),
            ));
        }
        if initial >= num_states {
            return Err(Error::IndexOutOfRange {
                what: "initial state",
                index: initial,
                bound: num_states,
            });
        }
        if kernel.len() != num_states * num_actions {
            return Err(Error::InvalidModel(format!(
                "kernel has {} rows, expected {}",
                kernel.len(),
                num_states * num_actions
            )));
        }
        let mut cleaned = Vec::with_capacity(kernel.len());
        for (row_index, row) in kernel.into_iter().enumerate() {
            let mut row: Vec<(usize, f64)> = row;
            row.sort_by_key(|&(y, _)| y);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (y, p) in row {
                if y >= num_states {
                    return Err(Error::IndexOutOfRange {
                        what: "successor state",
                        index: y,
                        bound: num_states,
                    });
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "row {row_index}: probability {p} is not a finite nonnegative number"
                    )));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == y => last.1 += p,
                    _ => merged.push((y, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let total: f64 = merged.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!(
                    "row {row_index} (state {}, action {}) sums to {total}",
                    row_index / num_actions,
                    row_index % num_actions
                )));
            }
            cleaned.push(merged);
        }
        Ok(Self {
            num_states,
            initial,
            num_actions,
            kernel: cleaned,
        })
    }

    /// Builds an agent from a deterministic successor table `next[s][a]`.
    pub fn deterministic(initial: usize, next: &[Vec<usize>]) -> Result<Self> {
        let num_states = next.len();
        let num_actions = next.first().map_or(0, Vec::len);
        let mut kernel = Vec::with_capacity(num_states * num_actions);
        for row in next {
            if row.len() != num_actions {
                return Err(Error::InvalidModel(
                    "every state needs the same number of actions".into(),
                ));
            }
            kernel.extend(row.iter().map(|&y| vec![(y, 1.0)]));
        }
        Self::new(num_states, initial, num_actions, kernel)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.kernel[s * self.num_actions + a]
    }

    pub fn prob(&self, s: usize, a: usize, y: usize) -> f64 {
        self.successors(s, a)
            .iter()
            .find(|&&(z, _)| z == y)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Entropy (nats) of the successor distribution of `(s, a)`.
    pub fn transition_entropy(&self, s: usize, a: usize) -> f64 {
        self.successors(s, a).iter().map(|&(_, p)| -p * p.ln()).sum()
    }
}

/// Factored cooperative Markov game with a reach-avoid objective.
#[derive(Debug, Clone)]
pub struct JointGame {
    agents: Vec<AgentMdp>,
    states: MixedRadix,
    actions: MixedRadix,
    target: Vec<bool>,
    avoid: Vec<bool>,
    dead: Option<Vec<bool>>,
    augmented: bool,
}

impl JointGame {
    pub fn new(
        agents: Vec<AgentMdp>,
        target: impl IntoIterator<Item = usize>,
        avoid: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidModel("a game needs at least one agent".into()));
        }
        let states = MixedRadix::new(agents.iter().map(AgentMdp::num_states).collect());
        let actions = MixedRadix::new(agents.iter().map(AgentMdp::num_actions).collect());
        let n = states.size();
        let mut target_mask = vec![false; n];
        let mut avoid_mask = vec![false; n];
        for s in target {
            check_index("target state", s, n)?;
            target_mask[s] = true;
        }
        for s in avoid {
            check_index("avoid state", s, n)?;
            avoid_mask[s] = true;
        }
        if let Some(s) = (0..n).find(|&s| target_mask[s] && avoid_mask[s]) {
            return Err(Error::InvalidModel(format!(
                "joint state {s} is both a target and an avoid state"
            )));
        }
        Ok(Self {
            agents,
            states,
            actions,
            target: target_mask,
            avoid: avoid_mask,
            dead: None,
            augmented: false,
        })
    }

    /// Builds target and avoid sets from predicates over local-state tuples.
    pub fn from_predicates(
        agents: Vec<AgentMdp>,
        is_target: impl Fn(&[usize]) -> bool,
        is_avoid: impl Fn(&[usize]) -> bool,
    ) -> Result<Self> {
        let states = MixedRadix::new(agents.iter().map(AgentMdp::num_states).collect());
        let mut digits = vec![0; agents.len()];
        let mut target = Vec::new();
        let mut avoid = Vec::new();
        for s in 0..states.size() {
            states.decode_into(s, &mut digits);
            if is_target(&digits) {
                target.push(s);
            } else if is_avoid(&digits) {
                avoid.push(s);
            }
        }
        Self::new(agents, target, avoid)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentMdp] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentMdp {
        &self.agents[i]
    }

    pub fn state_radix(&self) -> &MixedRadix {
        &self.states
    }

    pub fn action_radix(&self) -> &MixedRadix {
        &self.actions
    }

    /// Size of the product state space, excluding any end state.
    pub fn num_product_states(&self) -> usize {
        self.states.size()
    }

    /// Number of joint states including the end state when augmented.
    pub fn num_states(&self) -> usize {
        self.states.size() + usize::from(self.augmented)
    }

    /// Number of ordinary joint actions (the end action is not counted).
    pub fn num_joint_actions(&self) -> usize {
        self.actions.size()
    }

    pub fn end_state(&self) -> usize {
        self.states.size()
    }

    pub fn end_action(&self) -> usize {
        self.actions.size()
    }

    pub fn initial_state(&self) -> usize {
        let initials: Vec<usize> = self.agents.iter().map(AgentMdp::initial).collect();
        self.states.encode(&initials)
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.target.get(s).copied().unwrap_or(false)
    }

    pub fn is_avoid(&self, s: usize) -> bool {
        self.avoid.get(s).copied().unwrap_or(false)
    }

    pub fn is_dead(&self, s: usize) -> bool {
        match &self.dead {
            Some(dead) => dead.get(s).copied().unwrap_or(false),
            None => self.is_avoid(s),
        }
    }

    /// Membership in `S_T ∪ S_D` (or `S_T ∪ S_A` before the dead set is known).
    pub fn is_terminal(&self, s: usize) -> bool {
        self.is_target(s) || self.is_dead(s)
    }

    pub fn target_states(&self) -> Vec<usize> {
        mask_to_indices(&self.target)
    }

    pub fn avoid_states(&self) -> Vec<usize> {
        mask_to_indices(&self.avoid)
    }

    pub fn dead_states(&self) -> Option<Vec<usize>> {
        self.dead.as_deref().map(mask_to_indices)
    }

    /// Whether joint action `a` may be taken at joint state `s`.
    pub fn is_valid_pair(&self, s: usize, a: usize) -> bool {
        let n = self.states.size();
        let m = self.actions.size();
        if self.augmented {
            if s == n || self.is_terminal(s) {
                a == m
            } else {
                s < n && a < m
            }
        } else {
            s < n && a < m
        }
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        check_index("joint state", s, self.num_states())?;
        let action_bound = self.actions.size() + usize::from(self.augmented);
        check_index("joint action", a, action_bound)?;
        if self.is_valid_pair(s, a) {
            Ok(())
        } else if a == self.actions.size() {
            Err(Error::InvalidParameter(format!(
                "end action is not available at non-terminal joint state {s}"
            )))
        } else {
            Err(Error::NonEndActionAtTerminal { state: s })
        }
    }

    /// Probability of moving from `s` to `y` under joint action `a`.
    pub fn joint_transition_prob(&self, s: usize, a: usize, y: usize) -> Result<f64> {
        self.check_pair(s, a)?;
        check_index("joint state", y, self.num_states())?;
        if self.augmented && a == self.actions.size() {
            return Ok(if y == self.end_state() { 1.0 } else { 0.0 });
        }
        if y == self.end_state() && self.augmented {
            return Ok(0.0);
        }
        let mut p = 1.0;
        for (i, agent) in self.agents.iter().enumerate() {
            p *= agent.prob(
                self.states.digit(s, i),
                self.actions.digit(a, i),
                self.states.digit(y, i),
            );
            if p == 0.0 {
                break;
            }
        }
        Ok(p)
    }

    /// Sparse successor distribution of `(s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> Result<Vec<(usize, f64)>> {
        self.check_pair(s, a)?;
        let mut out = Vec::new();
        self.visit_successors(s, a, |y, p| out.push((y, p)));
        Ok(out)
    }

    /// Calls `visit` for every positive-probability successor of a valid pair.
    pub(crate) fn visit_successors(&self, s: usize, a: usize, mut visit: impl FnMut(usize, f64)) {
        if self.augmented && a == self.actions.size() {
            visit(self.end_state(), 1.0);
            return;
        }
        self.visit_product_successors(s, a, &mut visit);
    }

    /// Raw product dynamics, ignoring any augmentation.
    pub(crate) fn visit_product_successors(&self, s: usize, a: usize, visit: &mut impl FnMut(usize, f64)) {
        let k = self.agents.len();
        let mut rows: [&[(usize, f64)]; 8] = [&[]; 8];
        let mut heap_rows = Vec::new();
        let rows: &mut [&[(usize, f64)]] = if k <= 8 {
            &mut rows[..k]
        } else {
            heap_rows.resize(k, &[][..]);
            &mut heap_rows[..]
        };
        for (i, agent) in self.agents.iter().enumerate() {
            rows[i] = agent.successors(self.states.digit(s, i), self.actions.digit(a, i));
        }
        let mut cursor = vec![0usize; k];
        loop {
            let mut y = 0;
            let mut p = 1.0;
            for i in 0..k {
                let (yi, pi) = rows[i][cursor[i]];
                y += yi * self.states.stride(i);
                p *= pi;
            }
            visit(y, p);
            // odometer advance
            let mut i = 0;
            loop {
                if i == k {
                    return;
                }
                cursor[i] += 1;
                if cursor[i] < rows[i].len() {
                    break;
                }
                cursor[i] = 0;
                i += 1;
            }
        }
    }

    /// Joint states from which no policy reaches `S_T` while avoiding `S_A`.
    pub fn compute_dead_set(&self) -> Vec<usize> {
        mask_to_indices(&self.dead_mask())
    }

    fn dead_mask(&self) -> Vec<bool> {
        let n = self.states.size();
        let m = self.actions.size();
        let mut live = self.target.clone();
        loop {
            let mut changed = false;
            for s in 0..n {
                if live[s] || self.avoid[s] {
                    continue;
                }
                let mut reaches = false;
                for a in 0..m {
                    self.visit_product_successors(s, a, &mut |y, _| reaches |= live[y]);
                    if reaches {
                        break;
                    }
                }
                if reaches {
                    live[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        live.iter().map(|&l| !l).collect()
    }

    /// Adds the absorbing end state and end action; terminal states keep only
    /// the end action.
    pub fn augment_with_end_state(mut self) -> Result<Self> {
        if self.augmented {
            return Err(Error::AlreadyAugmented);
        }
        if self.dead.is_none() {
            self.dead = Some(self.dead_mask());
        }
        self.augmented = true;
        Ok(self)
    }

    pub(crate) fn require_augmented(&self) -> Result<()> {
        if self.augmented {
            Ok(())
        } else {
            Err(Error::NotAugmented)
        }
    }

    /// Joint states reachable from the initial state, expanding only
    /// non-terminal states. The end state is excluded.
    pub fn reachable_states(&self) -> Vec<bool> {
        let n = self.states.size();
        let m = self.actions.size();
        let mut seen = vec![false; n];
        let start = self.initial_state();
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            if self.is_terminal(s) {
                continue;
            }
            for a in 0..m {
                self.visit_product_successors(s, a, &mut |y, _| {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                });
            }
        }
        seen
    }

    /// Compressed successor table over all valid pairs of an augmented game.
    pub fn transition_table(&self) -> Result<TransitionTable> {
        self.require_augmented()?;
        let width = self.actions.size() + 1;
        let rows = self.num_states() * width;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for s in 0..self.num_states() {
            for a in 0..width {
                if self.is_valid_pair(s, a) {
                    self.visit_successors(s, a, |y, p| {
                        targets.push(y as u32);
                        probs.push(p);
                    });
                }
                offsets.push(targets.len());
            }
        }
        Ok(TransitionTable {
            width,
            offsets,
            targets,
            probs,
        })
    }
}

/// CSR successor lists of an augmented game, rows keyed by `s * width + a`.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    width: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl TransitionTable {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        let r = s * self.width + a;
        let range = self.offsets[r]..self.offsets[r + 1];
        (&self.targets[range.clone()], &self.probs[range])
    }

    pub fn expect(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        let (ys, ps) = self.row(s, a);
        ys.iter().zip(ps).map(|(&y, &p)| p * values[y as usize]).sum()
    }
}

fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, bound })
    }
}

fn mask_to_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn mixed_radix_little_endian() {
        let r = MixedRadix::new(vec![2, 3, 4]);
        assert_eq!(r.size(), 24);
        assert_eq!(r.encode(&[1, 0, 0]), 1);
        assert_eq!(r.encode(&[0, 1, 0]), 2);
        assert_eq!(r.encode(&[1, 2, 3]), 1 + 2 * 2 + 3 * 6);
        assert_eq!(r.decode(23), vec![1, 2, 3]);
        assert_eq!(r.digit(23, 1), 2);
        assert!(r.try_encode(&[2, 0, 0]).is_err());
    }

    #[test]
    fn two_line_transitions() {
        let game = fixtures::two_line();
        let (aa, bb) = (0, 3);
        let go_go = 0;
        assert_eq!(game.joint_transition_prob(aa, go_go, bb).unwrap(), 1.0);
        assert_eq!(game.successors(aa, go_go).unwrap(), vec![(bb, 1.0)]);
    }

    #[test]
    fn slip_line_product_expansion() {
        let game = fixtures::slip_line();
        let p = game.joint_transition_prob(0, 0, 3).unwrap();
        assert!((p - 0.81).abs() < 1e-15);
        let mut probs: Vec<f64> = game.successors(0, 0).unwrap().iter().map(|x| x.1).collect();
        probs.sort_by(f64::total_cmp);
        let expected = [0.01, 0.09, 0.09, 0.81];
        assert_eq!(probs.len(), 4);
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn index_errors() {
        let game = fixtures::two_line();
        assert!(matches!(
            game.joint_transition_prob(9, 0, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        let aug = game.augment_with_end_state().unwrap();
        // (B,B) is a target: only the end action is allowed there
        assert!(matches!(
            aug.joint_transition_prob(3, 0, 3),
            Err(Error::NonEndActionAtTerminal { state: 3 })
        ));
        assert_eq!(
            aug.joint_transition_prob(3, aug.end_action(), aug.end_state()).unwrap(),
            1.0
        );
        assert!(matches!(aug.augment_with_end_state(), Err(Error::AlreadyAugmented)));
    }

    #[test]
    fn dead_set_two_line() {
        assert!(fixtures::two_line().compute_dead_set().is_empty());
    }

    #[test]
    fn dead_set_isolated_absorbing_state() {
        // a third local state z that self-loops for agent 0
        let a0 = AgentMdp::deterministic(0, &[vec![1, 0], vec![1, 1], vec![2, 2]]).unwrap();
        let a1 = AgentMdp::deterministic(0, &[vec![1, 0], vec![1, 1]]).unwrap();
        let game = JointGame::from_predicates(vec![a0, a1], |s| s == [1, 1], |_| false).unwrap();
        let dead = game.compute_dead_set();
        let z = game.state_radix().encode(&[2, 0]);
        let z2 = game.state_radix().encode(&[2, 1]);
        assert_eq!(dead, vec![z, z2]);
    }

    #[test]
    fn augmentation_shapes() {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        assert_eq!(game.num_states(), 5);
        assert!(game.is_valid_pair(3, game.end_action()));
        assert!(!game.is_valid_pair(3, 0));
        assert!(game.is_valid_pair(0, 0));
        assert_eq!(
            game.successors(game.end_state(), game.end_action()).unwrap(),
            vec![(game.end_state(), 1.0)]
        );
    }

    #[test]
    fn agent_rejects_bad_rows() {
        assert!(AgentMdp::new(1, 0, 1, vec![vec![(0, 0.5)]]).is_err());
        assert!(AgentMdp::new(1, 1, 1, vec![vec![(0, 1.0)]]).is_err());
        assert!(AgentMdp::new(1, 0, 1, vec![vec![(0, -0.5), (0, 1.5)]]).is_err());
    }
}
