//! Small hand-checkable games used by tests, examples and the verify suite.

use rand::Rng;

use crate::markov_game::{AgentMdp, JointGame};
use crate::policy::JointPolicy;

/// Local state indices of the two-state line.
pub const A: usize = 0;
pub const B: usize = 1;
/// Local action indices of the two-state line.
pub const GO: usize = 0;
pub const STAY: usize = 1;

fn line_agent(success: f64) -> AgentMdp {
    AgentMdp::new(
        2,
        A,
        2,
        vec![
            // A, go
            vec![(B, success), (A, 1.0 - success)],
            // A, stay
            vec![(A, 1.0)],
            // B, go
            vec![(B, 1.0)],
            // B, stay
            vec![(B, 1.0)],
        ],
    )
    .expect("line agent is well formed")
}

/// Two agents on states {A, B}; `go` moves A to B, `stay` holds. Target (B, B).
pub fn two_line() -> JointGame {
    JointGame::from_predicates(vec![line_agent(1.0), line_agent(1.0)], |s| s == [B, B], |_| false)
        .expect("two-line game is well formed")
}

/// As [`two_line`] but `go` succeeds with probability 0.9 and otherwise stays.
pub fn slip_line() -> JointGame {
    JointGame::from_predicates(vec![line_agent(0.9), line_agent(0.9)], |s| s == [B, B], |_| false)
        .expect("slip-line game is well formed")
}

/// Policy taking `(go, go)` everywhere.
pub fn two_line_go_policy(game: &JointGame) -> JointPolicy {
    let go_go = game.action_radix().encode(&[GO, GO]);
    JointPolicy::deterministic(game.num_product_states(), game.num_joint_actions(), |_| go_go)
}

/// Correlated policy on [`two_line`]: `(go, go)` with probability `together`,
/// otherwise `(stay, stay)`, at every state.
pub fn correlated_line_policy(game: &JointGame, together: f64) -> JointPolicy {
    let m = game.num_joint_actions();
    let go_go = game.action_radix().encode(&[GO, GO]);
    let stay_stay = game.action_radix().encode(&[STAY, STAY]);
    let mut rows = vec![0.0; game.num_product_states() * m];
    for row in rows.chunks_mut(m) {
        row[go_go] = together;
        row[stay_stay] = 1.0 - together;
    }
    JointPolicy::from_rows(game.num_product_states(), m, rows).expect("valid rows")
}

/// Binary coin-flip agent of the given depth: each step picks `a` (0) or `b` (1)
/// and descends a binary tree; leaves absorb.
fn coin_agent(depth: usize) -> AgentMdp {
    let num_states = (1 << (depth + 1)) - 1;
    let next: Vec<Vec<usize>> = (0..num_states)
        .map(|s| {
            if s < (1 << depth) - 1 {
                vec![2 * s + 1, 2 * s + 2]
            } else {
                vec![s, s]
            }
        })
        .collect();
    AgentMdp::deterministic(0, &next).expect("coin agent is well formed")
}

/// Two agents that must make matching coin choices for `depth` steps.
///
/// Any mismatch is an avoid state; matching leaves form the target. With full
/// communication the shared draw always matches; without it each agent flips
/// on its own.
pub fn coordinated_coin(depth: usize) -> JointGame {
    let leaves_start = (1 << depth) - 1;
    JointGame::from_predicates(
        vec![coin_agent(depth), coin_agent(depth)],
        |s| s[0] == s[1] && s[0] >= leaves_start,
        |s| s[0] != s[1],
    )
    .expect("coin game is well formed")
}

/// Picks `(a, a)` or `(b, b)` with probability ½ each at every state.
pub fn coordinated_coin_policy(game: &JointGame) -> JointPolicy {
    let m = game.num_joint_actions();
    let aa = game.action_radix().encode(&[0, 0]);
    let bb = game.action_radix().encode(&[1, 1]);
    let mut rows = vec![0.0; game.num_product_states() * m];
    for s in 0..game.num_product_states() {
        rows[s * m + aa] = 0.5;
        rows[s * m + bb] = 0.5;
    }
    JointPolicy::from_rows(game.num_product_states(), m, rows).expect("valid rows")
}

/// Product of independent per-agent policies `local[i][s_i * |A_i| + a_i]`.
pub fn product_policy(game: &JointGame, local: &[Vec<f64>]) -> JointPolicy {
    let n = game.num_product_states();
    let m = game.num_joint_actions();
    let k = game.num_agents();
    let mut rows = vec![0.0; n * m];
    let mut s_digits = vec![0; k];
    let mut a_digits = vec![0; k];
    for s in 0..n {
        game.state_radix().decode_into(s, &mut s_digits);
        for a in 0..m {
            game.action_radix().decode_into(a, &mut a_digits);
            let mut p = 1.0;
            for i in 0..k {
                let na = game.agent(i).num_actions();
                p *= local[i][s_digits[i] * na + a_digits[i]];
            }
            rows[s * m + a] = p;
        }
    }
    JointPolicy::from_rows(n, m, rows).expect("product of distributions")
}

/// Random agent with `num_states` states, `num_actions` actions and up to
/// `max_support` successors per row.
pub fn random_agent(rng: &mut impl Rng, num_states: usize, num_actions: usize, max_support: usize) -> AgentMdp {
    let mut kernel = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let support = rng.gen_range(1..=max_support.min(num_states));
        let mut ys: Vec<usize> = (0..num_states).collect();
        for i in 0..support {
            let j = rng.gen_range(i..num_states);
            ys.swap(i, j);
        }
        let weights: Vec<f64> = (0..support).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        kernel.push(
            ys[..support]
                .iter()
                .zip(&weights)
                .map(|(&y, w)| (y, w / total))
                .collect(),
        );
    }
    let initial = rng.gen_range(0..num_states);
    AgentMdp::new(num_states, initial, num_actions, kernel).expect("random agent is stochastic")
}

/// Random factored game with at most `max_joint_states` joint states.
pub fn random_game(rng: &mut impl Rng, max_joint_states: usize) -> JointGame {
    loop {
        let agents_count = rng.gen_range(1..=2);
        let sizes: Vec<usize> = (0..agents_count).map(|_| rng.gen_range(2..=3)).collect();
        if sizes.iter().product::<usize>() > max_joint_states {
            continue;
        }
        let agents: Vec<AgentMdp> = sizes
            .iter()
            .map(|&n| {
                let na = rng.gen_range(1..=2);
                random_agent(rng, n, na, 2)
            })
            .collect();
        let n: usize = sizes.iter().product();
        let mut target = Vec::new();
        let mut avoid = Vec::new();
        for s in 0..n {
            match rng.gen_range(0..5) {
                0 => target.push(s),
                1 => avoid.push(s),
                _ => {}
            }
        }
        if target.is_empty() {
            target.push(rng.gen_range(0..n));
            avoid.retain(|s| !target.contains(s));
        }
        return JointGame::new(agents, target, avoid).expect("random game is well formed");
    }
}
