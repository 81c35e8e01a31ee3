//! Independent oracles for the integration suites. Nothing here reuses the
//! library's own flow, entropy or dead-set code.

#![allow(dead_code)]

use std::collections::HashMap;

use mindep::markov_game::JointGame;
use mindep::occupancy::OccupancyVector;
use mindep::policy::JointPolicy;

pub fn digits(radices: &[usize], mut index: usize) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = index % r;
            index /= r;
            d
        })
        .collect()
}

pub fn state_radices(game: &JointGame) -> Vec<usize> {
    game.agents().iter().map(|a| a.num_states()).collect()
}

pub fn action_radices(game: &JointGame) -> Vec<usize> {
    game.agents().iter().map(|a| a.num_actions()).collect()
}

/// `Π_i T^i(y_i | s_i, a_i)` from the agents alone.
pub fn product_prob(game: &JointGame, s: usize, a: usize, y: usize) -> f64 {
    let (sr, ar) = (state_radices(game), action_radices(game));
    let (sd, ad, yd) = (digits(&sr, s), digits(&ar, a), digits(&sr, y));
    (0..game.num_agents())
        .map(|i| game.agent(i).prob(sd[i], ad[i], yd[i]))
        .product()
}

/// Dense successor table over product states.
pub fn successor_table(game: &JointGame) -> Vec<Vec<Vec<(usize, f64)>>> {
    let n = game.num_product_states();
    let m = game.num_joint_actions();
    (0..n)
        .map(|s| {
            (0..m)
                .map(|a| {
                    (0..n)
                        .filter_map(|y| {
                            let p = product_prob(game, s, a, y);
                            (p > 0.0).then_some((y, p))
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Maximal reach-avoid probability per product state by value iteration.
pub fn value_iteration(game: &JointGame) -> Vec<f64> {
    let table = successor_table(game);
    let n = table.len();
    let mut v: Vec<f64> = (0..n).map(|s| if game.is_target(s) { 1.0 } else { 0.0 }).collect();
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for s in 0..n {
            if game.is_target(s) || game.is_avoid(s) {
                continue;
            }
            let best = table[s]
                .iter()
                .map(|row| row.iter().map(|&(y, p)| p * v[y]).sum::<f64>())
                .fold(0.0, f64::max);
            change = change.max((best - v[s]).abs());
            v[s] = best;
        }
        if change < 1e-15 {
            break;
        }
    }
    v
}

/// Zero-value set by trying every deterministic stationary policy.
pub fn brute_force_dead_set(game: &JointGame) -> Vec<usize> {
    let table = successor_table(game);
    let n = table.len();
    let m = game.num_joint_actions();
    let free: Vec<usize> = (0..n).filter(|&s| !game.is_target(s) && !game.is_avoid(s)).collect();
    let mut ever_live = vec![false; n];
    let count = m.pow(free.len() as u32);
    for code in 0..count {
        let choice = digits(&vec![m; free.len()], code);
        let mut act = vec![0; n];
        for (k, &s) in free.iter().enumerate() {
            act[s] = choice[k];
        }
        let mut live: Vec<bool> = (0..n).map(|s| game.is_target(s)).collect();
        loop {
            let mut changed = false;
            for &s in &free {
                if !live[s] && table[s][act[s]].iter().any(|&(y, _)| live[y]) {
                    live[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for s in 0..n {
            ever_live[s] |= live[s];
        }
    }
    (0..n).filter(|&s| !ever_live[s]).collect()
}

fn plogp_sum(leaves: impl Iterator<Item = f64>) -> f64 {
    leaves.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Leaf probabilities of a truncated path tree; branches lighter than
/// `prune` are cut and their mass returned as the second component.
fn path_leaves(
    root: usize,
    depth: usize,
    prune: f64,
    stop: &dyn Fn(usize) -> bool,
    branches: &dyn Fn(usize) -> Vec<(Option<usize>, f64)>,
) -> (Vec<f64>, f64) {
    let mut leaves = Vec::new();
    let mut lost = 0.0;
    let mut stack = vec![(root, 1.0, 0usize)];
    while let Some((s, p, t)) = stack.pop() {
        if stop(s) {
            leaves.push(p);
            continue;
        }
        if t == depth {
            lost += p;
            continue;
        }
        for (next, q) in branches(s) {
            let w = p * q;
            match next {
                None => leaves.push(w),
                Some(_) if w < prune => lost += w,
                Some(y) => stack.push((y, w, t + 1)),
            }
        }
    }
    (leaves, lost)
}

/// `H(X)` of the joint state-action path by leaf enumeration, together
/// with the truncated mass. Branches are `(action, successor)` pairs, so
/// every leaf is one path.
pub fn joint_path_entropy(game: &JointGame, policy: &JointPolicy, depth: usize) -> (f64, f64) {
    let table = successor_table(game);
    let m = game.num_joint_actions();
    let terminal = |s: usize| game.is_terminal(s);
    let branches = |s: usize| {
        let mut out = Vec::new();
        for a in 0..m {
            let pa = policy.prob(s, a);
            if pa > 0.0 {
                for &(y, p) in &table[s][a] {
                    out.push((Some(y), pa * p));
                }
            }
        }
        out
    };
    let (leaves, lost) = path_leaves(game.initial_state(), depth, 1e-20, &terminal, &branches);
    (plogp_sum(leaves.into_iter()), lost)
}

/// Marginal occupancy of every agent: `x^i[s_i][a_i]`, last column the
/// end action.
pub fn agent_marginals(game: &JointGame, x: &OccupancyVector) -> Vec<Vec<Vec<f64>>> {
    let n = game.num_product_states();
    let m = game.num_joint_actions();
    let (sr, ar) = (state_radices(game), action_radices(game));
    let mut out: Vec<Vec<Vec<f64>>> = game
        .agents()
        .iter()
        .map(|ag| vec![vec![0.0; ag.num_actions() + 1]; ag.num_states()])
        .collect();
    for (s, a, v) in x.nonzero() {
        if s >= n {
            continue;
        }
        let sd = digits(&sr, s);
        let ad = if a < m { Some(digits(&ar, a)) } else { None };
        for (i, marg) in out.iter_mut().enumerate() {
            let local_a = ad.as_ref().map_or(ar[i], |d| d[i]);
            marg[sd[i]][local_a] += v;
        }
    }
    out
}

/// `Σ_i H(X̄^i)` in closed form from the marginals.
pub fn agent_entropy_sum(game: &JointGame, x: &OccupancyVector) -> f64 {
    agent_marginals(game, x)
        .iter()
        .enumerate()
        .map(|(i, marg)| {
            let ag = game.agent(i);
            marg.iter()
                .enumerate()
                .map(|(s, row)| {
                    let total: f64 = row.iter().sum();
                    row.iter()
                        .enumerate()
                        .filter(|&(_, &v)| v > 0.0)
                        .map(|(a, &v)| {
                            let h = if a < ag.num_actions() {
                                ag.successors(s, a).iter().map(|&(_, p)| -p * p.ln()).sum()
                            } else {
                                0.0
                            };
                            v * ((total / v).ln() + h)
                        })
                        .sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Path entropy of agent `i`'s stationary marginal chain by leaf
/// enumeration, with the truncated mass.
pub fn agent_chain_entropy(game: &JointGame, x: &OccupancyVector, i: usize, depth: usize) -> (f64, f64) {
    let marg = &agent_marginals(game, x)[i];
    let ag = game.agent(i);
    let na = ag.num_actions();
    let branches = |s: usize| {
        let row = &marg[s];
        let total: f64 = row.iter().sum();
        let mut out = Vec::new();
        if total <= 0.0 {
            return out;
        }
        for (a, &v) in row.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let pa = v / total;
            if a == na {
                out.push((None, pa));
            } else {
                for &(y, p) in ag.successors(s, a) {
                    out.push((Some(y), pa * p));
                }
            }
        }
        out
    };
    let (leaves, lost) = path_leaves(ag.initial(), depth, 1e-20, &|_| false, &branches);
    (plogp_sum(leaves.into_iter()), lost)
}

/// `−Σ_i H(X̄^i)` as a plain function of the occupancy values.
pub fn neg_agent_entropy(game: &JointGame, x: &OccupancyVector) -> f64 {
    -agent_entropy_sum(game, x)
}

/// Byte contents of every CSV file in `dir`, keyed by file name.
pub fn csv_bytes(dir: &std::path::Path) -> HashMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let path = e.unwrap().path();
            (path.extension()? == "csv").then(|| {
                (
                    path.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&path).unwrap(),
                )
            })
        })
        .collect()
}
