mod common;

use mindep::comm::CommModel;
use mindep::conic::Clarabel;
use mindep::experiment::{run_synth, Environment, ExperimentConfig, MIN_DEPENDENCY};
use mindep::fixtures;
use mindep::gridworld::{AgentSpec, GridSpec, SlipModel};
use mindep::infometrics::{
    bound_theorem1, bound_theorem2, bound_theorem3, check_lemma_inequalities, enumerate_path_distribution, LemmaCases,
};
use mindep::markov_game::JointGame;
use mindep::occupancy::{occupancy_from_policy, solve_baseline_lp, BaselineOptions, OccupancyVector};
use mindep::policy::JointPolicy;
use mindep::synthesis::EntropyModel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64, max_states: usize) -> JointGame {
    fixtures::random_game(&mut ChaCha8Rng::seed_from_u64(seed), max_states)
}

/// Policy on the two-state line mixing `(go, go)`, `(go, stay)`,
/// `(stay, go)` and `(stay, stay)` with the given weights everywhere.
fn line_policy(game: &JointGame, weights: [f64; 4]) -> JointPolicy {
    let m = game.num_joint_actions();
    let total: f64 = weights.iter().sum();
    let enc = |a: usize, b: usize| game.action_radix().encode(&[a, b]);
    let cols = [
        enc(fixtures::GO, fixtures::GO),
        enc(fixtures::GO, fixtures::STAY),
        enc(fixtures::STAY, fixtures::GO),
        enc(fixtures::STAY, fixtures::STAY),
    ];
    let mut rows = vec![0.0; game.num_product_states() * m];
    for row in rows.chunks_mut(m) {
        for (&c, w) in cols.iter().zip(weights) {
            row[c] = w / total;
        }
    }
    JointPolicy::from_rows(game.num_product_states(), m, rows).unwrap()
}

/// Either `(go, go)`/`(stay, stay)` mixtures or products of per-agent go
/// probabilities; fully mixed weights make exact enumeration explode.
fn enumerable_line_policy(game: &JointGame, correlated: bool, p: f64, q: f64) -> JointPolicy {
    if correlated {
        line_policy(game, [p, 0.0, 0.0, 1.0 - p])
    } else {
        fixtures::product_policy(game, &[vec![p, 1.0 - p, 0.0, 1.0], vec![q, 1.0 - q, 1.0, 0.0]])
    }
}

fn line_weights() -> impl Strategy<Value = [f64; 4]> {
    // (go, go) keeps most of the mass so short horizons absorb.
    (0.75..1.0f64, 0.0..0.1f64, 0.0..0.1f64, 0.0..0.05f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_kernel_is_the_product_of_agents(seed in any::<u64>()) {
        let game = random_game(seed, 9);
        let n = game.num_product_states();
        for s in 0..n {
            for a in 0..game.num_joint_actions() {
                let mut total = 0.0;
                for y in 0..n {
                    let p = game.joint_transition_prob(s, a, y).unwrap();
                    prop_assert!((p - common::product_prob(&game, s, a, y)).abs() < 1e-14);
                    total += p;
                }
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dead_set_is_the_zero_value_set(seed in any::<u64>()) {
        let game = random_game(seed, 6);
        prop_assert_eq!(game.compute_dead_set(), common::brute_force_dead_set(&game));
        let vi = common::value_iteration(&game);
        for s in game.compute_dead_set() {
            prop_assert_eq!(vi[s], 0.0);
        }
    }

    #[test]
    fn baseline_value_matches_value_iteration(seed in any::<u64>()) {
        let game = random_game(seed, 6);
        let vi = common::value_iteration(&game)[game.initial_state()];
        let game = game.augment_with_end_state().unwrap();
        let lp = solve_baseline_lp(&game, &BaselineOptions::default(), &Clarabel::default()).unwrap();
        prop_assert!((lp.value - vi).abs() < 1e-7, "lp {} vi {}", lp.value, vi);
    }

    #[test]
    fn line_entropies_match_brute_force(w in line_weights()) {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let policy = line_policy(&game, w);
        let x = occupancy_from_policy(&game, &policy).unwrap();
        let m = EntropyModel::new(&game).unwrap().metrics(&x, 0.0, 0.0);
        let (h, lost) = common::joint_path_entropy(&game, &policy, 200);
        prop_assert!(lost < 1e-12);
        prop_assert!((h - m.joint_entropy).abs() < 1e-8);
        let mut sum = 0.0;
        for i in 0..2 {
            let (hi, lost) = common::agent_chain_entropy(&game, &x, i, 400);
            prop_assert!(lost < 1e-12);
            sum += hi;
        }
        prop_assert!((sum - m.agent_entropy_sum).abs() < 1e-8);
    }

    #[test]
    fn bounds_are_ordered(v in 0.0..1.0f64, c in 0.0..20.0f64, l in 0.0..50.0f64, p in 0.0..1.0f64) {
        let t1 = bound_theorem1(v, c).unwrap();
        let t2 = bound_theorem2(v, c, l, p).unwrap();
        let t3 = bound_theorem3(v, c, l, p).unwrap();
        prop_assert!(t1 <= v + 1e-15 && t2 <= v + 1e-15 && t3 <= v + 1e-15);
        prop_assert!(t2 >= t1 && t3 >= t1 - 1e-15);
        prop_assert!(t1 >= -1.0);
        prop_assert!(bound_theorem1(v, c + 1.0).unwrap() <= t1);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = fixtures::coordinated_coin(2).augment_with_end_state().unwrap();
        let model = EntropyModel::new(&game).unwrap();
        let pairs: Vec<(usize, usize)> = model.flow.pairs().collect();
        let mut x = OccupancyVector::zeros(&game);
        for &(s, a) in &pairs {
            x.set(s, a, rng.gen_range(0.1..2.0));
        }
        let grad = model.linearize(&x, 1e-12);
        let (s, a) = pairs[rng.gen_range(0..pairs.len())];
        let h = 1e-6;
        let (mut up, mut down) = (x.clone(), x.clone());
        up.set(s, a, x.get(s, a) + h);
        down.set(s, a, x.get(s, a) - h);
        let fd = (common::neg_agent_entropy(&game, &up) - common::neg_agent_entropy(&game, &down)) / (2.0 * h);
        let an = grad[s * x.width() + a];
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{} vs {}", fd, an);
    }

    #[test]
    fn policy_csv_is_byte_stable(seed in any::<u64>()) {
        let game = random_game(seed, 9).augment_with_end_state().unwrap();
        let lp = solve_baseline_lp(&game, &BaselineOptions::default(), &Clarabel::default()).unwrap();
        let policy = mindep::occupancy::policy_from_occupancy(&game, &lp.occupancy);
        let mut first = Vec::new();
        policy.write_csv(&mut first).unwrap();
        let back = JointPolicy::read_csv(policy.num_states(), policy.num_actions(), first.as_slice()).unwrap();
        let mut second = Vec::new();
        back.write_csv(&mut second).unwrap();
        prop_assert_eq!(first, second);
        let mut occ = Vec::new();
        lp.occupancy.write_csv(&mut occ).unwrap();
        let x = OccupancyVector::read_csv(&game, occ.as_slice()).unwrap();
        let mut occ2 = Vec::new();
        x.write_csv(&mut occ2).unwrap();
        prop_assert_eq!(occ, occ2);
    }
}

#[test]
fn single_agent_corridor_has_no_dependency() {
    let spec = GridSpec {
        width: 2,
        height: 1,
        walls: Vec::new(),
        hazards: Vec::new(),
        slip: 0.0,
        agents: vec![AgentSpec {
            start: (0, 0),
            target: (1, 0),
        }],
        collision_radius: 1,
        keep_walls_as_states: true,
        slip_model: SlipModel::default(),
    };
    let mut config = ExperimentConfig::preset("paper-2agent").unwrap();
    config.environment = Environment::Custom(spec);
    config.synthesis.max_iters = 5;
    let dir = tempfile::tempdir().unwrap();
    let out = run_synth(&config, dir.path()).unwrap();
    for p in &out.summary.policies {
        assert!((p.v_full - 1.0).abs() < 1e-7, "{}: v {}", p.policy, p.v_full);
        assert!(p.c_bar.abs() < 1e-9, "{}: C_bar {}", p.policy, p.c_bar);
    }
    assert!(out.summary.policy(MIN_DEPENDENCY).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn correlation_is_bounded_and_a_divergence(correlated in any::<bool>(), p in 0.85..1.0f64, q in 0.85..1.0f64) {
        let game = fixtures::two_line().augment_with_end_state().unwrap();
        let policy = enumerable_line_policy(&game, correlated, p, q);
        let x = occupancy_from_policy(&game, &policy).unwrap();
        let c_bar = EntropyModel::new(&game).unwrap().metrics(&x, 0.0, 0.0).total_correlation_bound;
        let full = enumerate_path_distribution(&game, &policy, &CommModel::Full, 16).unwrap();
        let img = enumerate_path_distribution(&game, &policy, &CommModel::none(), 16).unwrap();
        let c = full.total_correlation();
        prop_assert!(c >= -1e-9);
        prop_assert!(c_bar >= c - 1e-9, "C_bar {} < C {}", c_bar, c);
        prop_assert!((full.kl_to(&img) - c).abs() < 1e-9);
    }

    #[test]
    fn lemma_inequalities_hold(correlated in any::<bool>(), p in 0.85..1.0f64, q in 0.85..1.0f64, seed in any::<u64>()) {
        let game = fixtures::two_line();
        let policy = enumerable_line_policy(&game, correlated, p, q);
        let cases = LemmaCases::exhaustive(4, 4, 2, seed);
        let report = check_lemma_inequalities(&game, &policy, 16, &cases).unwrap();
        prop_assert!(report.all_satisfied(), "{:?}", report.violations().collect::<Vec<_>>());
    }
}
