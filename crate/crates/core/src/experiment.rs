//! Experiment configuration, presets and the synthesize / evaluate / verify
//! pipelines behind the command-line tool. Every artifact is plain CSV or
//! JSON.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::comm::{random_history_fn, CommModel};
use crate::conic::Clarabel;
use crate::error::{Error, Result};
use crate::executor::{default_q_grid, estimate_success, sweep_dropout, write_sweep_csv, RolloutReport, SweepRow};
use crate::fixtures;
use crate::gridworld::{three_agent_spec, two_agent_spec, write_heatmap_csv, GridSpec};
use crate::infometrics::{
    bound_for, bound_theorem1, bound_theorem2, bound_theorem3, check_lemma_inequalities, enumerate_path_distribution,
    BoundReport, InequalityCheck, LemmaCases, LemmaReport,
};
use crate::markov_game::JointGame;
use crate::occupancy::{policy_from_occupancy, solve_baseline_lp, BaselineOptions, OccupancyVector, TieBreak};
use crate::policy::JointPolicy;
use crate::synthesis::{
    baseline_blend, synthesize_from, synthesize_min_dependency, EntropyModel, Initialization, SynthesisConfig,
    SynthesisResult, SynthesisStatus,
};

pub const BASELINE: &str = "baseline";
pub const MIN_DEPENDENCY: &str = "md";
const POLICIES: [&str; 2] = [BASELINE, MIN_DEPENDENCY];

/// Which grid to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Environment {
    TwoAgent,
    ThreeAgent,
    /// Any grid; its own slip probability is used.
    Custom(GridSpec),
}

/// Where the first linearization of the synthesis is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorKind {
    /// Blend of the baseline occupancy with prioritized per-agent routes.
    RouteBlend,
    UniformPolicy,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub kind: AnchorKind,
    /// Weight of the route occupancy in the blend.
    pub route_weight: f64,
    /// Uniform mixing of each planned route.
    pub route_mix: f64,
    /// Start once per planning order and keep the best final objective;
    /// otherwise plan in agent order only.
    pub all_orders: bool,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            kind: AnchorKind::RouteBlend,
            route_weight: 0.2,
            route_mix: 0.1,
            all_orders: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub n_rollouts: usize,
    pub q_grid: Vec<f64>,
    pub max_steps: usize,
    /// Per-step loss probability used for the persistent and intermittent
    /// guarantees in the summary.
    pub loss_rate: f64,
    /// Bounds must sit below the estimate plus this many standard errors.
    pub sigmas: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            n_rollouts: 10_000,
            q_grid: default_q_grid(),
            max_steps: 200,
            loss_rate: 0.1,
            sigmas: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub environment: Environment,
    #[serde(default = "default_slip")]
    pub slip: f64,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub anchor: AnchorConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_slip() -> f64 {
    0.05
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 2] = ["paper-2agent", "paper-3agent"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (environment, iters) = match name {
            "paper-2agent" => (Environment::TwoAgent, 100),
            "paper-3agent" => (Environment::ThreeAgent, 50),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset {other:?}; expected one of {PRESETS:?}"
                )))
            }
        };
        Ok(Self {
            name: name.to_string(),
            environment,
            slip: default_slip(),
            synthesis: SynthesisConfig {
                max_iters: iters,
                ..Default::default()
            },
            anchor: AnchorConfig::default(),
            evaluation: EvaluationConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out").join(name),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.synthesis.validate()?;
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::InvalidParameter(format!("slip {} outside [0, 1]", self.slip)));
        }
        let a = &self.anchor;
        if !(0.0..=1.0).contains(&a.route_weight) || !(a.route_mix > 0.0 && a.route_mix <= 1.0) {
            return Err(Error::InvalidParameter(
                "route weight must be in [0, 1] and mix in (0, 1]".into(),
            ));
        }
        let e = &self.evaluation;
        if e.n_rollouts == 0 || e.max_steps == 0 {
            return Err(Error::InvalidParameter(
                "n_rollouts and max_steps must be positive".into(),
            ));
        }
        if e.q_grid.iter().chain([&e.loss_rate]).any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::InvalidParameter("probabilities must be in [0, 1]".into()));
        }
        let spec = self.grid_spec();
        spec.validate()?;
        if a.all_orders && spec.agents.len() > 5 {
            return Err(Error::InvalidParameter(
                "all_orders supports at most five agents".into(),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        match &self.environment {
            Environment::TwoAgent => two_agent_spec(self.slip),
            Environment::ThreeAgent => three_agent_spec(self.slip),
            Environment::Custom(spec) => spec.clone(),
        }
    }

    /// Augmented joint game of the configured grid.
    pub fn build_game(&self) -> Result<JointGame> {
        self.grid_spec().build_game()?.augment_with_end_state()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))[..16].to_string()
    }
}

/// Guarantees evaluated with the dependency bound in place of the exact
/// total correlation, which only makes them more conservative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub thm1: f64,
    pub thm2: f64,
    pub thm3: f64,
}

impl Bounds {
    pub fn new(v_full: f64, correlation: f64, l_full: f64, rate: f64) -> Result<Self> {
        let v = v_full.clamp(0.0, 1.0);
        let c = correlation.max(0.0);
        Ok(Self {
            thm1: bound_theorem1(v, c)?,
            thm2: bound_theorem2(v, c, l_full, rate)?,
            thm3: bound_theorem3(v, c, l_full, rate)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub v_full: f64,
    pub l_full: f64,
    #[serde(rename = "C_bar")]
    pub c_bar: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub name: String,
    pub loss_rate: f64,
    pub policies: Vec<PolicySummary>,
    pub synthesis_status: SynthesisStatus,
    pub planning_order: Option<Vec<usize>>,
    pub worst_objective_decrease: f64,
}

impl Summary {
    pub fn policy(&self, name: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == name)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(open_artifact(
            dir,
            "summary.json",
        )?))?)
    }
}

fn open_artifact(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::open(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn policy_summary(
    model: &EntropyModel,
    name: &str,
    x: &OccupancyVector,
    config: &ExperimentConfig,
) -> Result<PolicySummary> {
    let m = model.metrics(x, 0.0, 0.0);
    Ok(PolicySummary {
        policy: name.to_string(),
        v_full: m.value,
        l_full: m.length,
        c_bar: m.total_correlation_bound,
        bounds: Bounds::new(
            m.value,
            m.total_correlation_bound,
            m.length,
            config.evaluation.loss_rate,
        )?,
    })
}

/// All orderings of `0..k` in lexicographic order.
fn orderings(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..k {
        for rest in orderings(k - 1) {
            let mut order = vec![first];
            order.extend(rest.into_iter().map(|r| if r >= first { r + 1 } else { r }));
            out.push(order);
        }
    }
    out
}

/// Minimum-dependency synthesis from the configured anchor. With route
/// anchors over all planning orders, the run with the best final objective
/// is kept (earliest order on ties).
pub fn synthesize(config: &ExperimentConfig, game: &JointGame) -> Result<(SynthesisResult, Option<Vec<usize>>)> {
    let spec = config.grid_spec();
    let mut synthesis = config.synthesis;
    match config.anchor.kind {
        AnchorKind::UniformPolicy => {
            synthesis.initialization = Initialization::UniformPolicy;
            return Ok((synthesize_min_dependency(game, &synthesis)?, None));
        }
        AnchorKind::Baseline => {
            synthesis.initialization = Initialization::Baseline;
            return Ok((synthesize_min_dependency(game, &synthesis)?, None));
        }
        AnchorKind::RouteBlend => {}
    }
    let k = spec.agents.len();
    let orders = if config.anchor.all_orders {
        orderings(k)
    } else {
        vec![(0..k).collect()]
    };
    let mut best: Option<(f64, SynthesisResult, Vec<usize>)> = None;
    for order in orders {
        let routes = spec.prioritized_route_policy_in_order(config.anchor.route_mix, &order)?;
        let anchor = baseline_blend(game, synthesis.cap, &routes, config.anchor.route_weight)?;
        let result = synthesize_from(game, &synthesis, anchor)?;
        let objective = result.trace.last().map_or(f64::NEG_INFINITY, |r| r.metrics.objective);
        info!("planning order {order:?}: final objective {objective:.6}");
        if best.as_ref().map_or(true, |(b, _, _)| objective > *b) {
            best = Some((objective, result, order));
        }
    }
    let (_, result, order) = best.expect("at least one ordering");
    Ok((result, Some(order)))
}

/// Artifacts of [`run_synth`].
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub summary: Summary,
    pub baseline: JointPolicy,
    pub min_dependency: JointPolicy,
}

/// Solves the baseline program and the minimum-dependency synthesis and
/// writes policies, occupancies, the trace, heatmaps and a summary to
/// `out`. The baseline artifacts are written before synthesis starts.
pub fn run_synth(config: &ExperimentConfig, out: &Path) -> Result<SynthOutput> {
    config.validate()?;
    fs::create_dir_all(out)?;
    write_json(out, "config.json", config)?;
    let spec = config.grid_spec();
    let game = config.build_game()?;
    let model = EntropyModel::new(&game)?;

    let options = BaselineOptions {
        cap: config.synthesis.cap,
        tie_break: TieBreak::Interior,
        ..Default::default()
    };
    let base = solve_baseline_lp(&game, &options, &Clarabel::default())?;
    let base_policy = policy_from_occupancy(&game, &base.occupancy);
    write_policy_artifacts(out, BASELINE, &spec, &game, &base.occupancy, &base_policy)?;
    info!("baseline: value {:.6}, length {:.3}", base.value, base.length);

    let (result, order) = synthesize(config, &game)?;
    write_policy_artifacts(out, MIN_DEPENDENCY, &spec, &game, &result.occupancy, &result.policy)?;
    result.trace.write_csv(create(out, "trace.csv")?)?;

    let summary = Summary {
        config_hash: config.hash(),
        name: config.name.clone(),
        loss_rate: config.evaluation.loss_rate,
        policies: vec![
            policy_summary(&model, BASELINE, &base.occupancy, config)?,
            policy_summary(&model, MIN_DEPENDENCY, &result.occupancy, config)?,
        ],
        synthesis_status: result.status.clone(),
        planning_order: order,
        worst_objective_decrease: result.trace.worst_decrease(),
    };
    write_json(out, "summary.json", &summary)?;
    Ok(SynthOutput {
        summary,
        baseline: base_policy,
        min_dependency: result.policy,
    })
}

fn write_policy_artifacts(
    out: &Path,
    name: &str,
    spec: &GridSpec,
    game: &JointGame,
    x: &OccupancyVector,
    policy: &JointPolicy,
) -> Result<()> {
    x.write_csv(create(out, &format!("{name}_occupancy.csv"))?)?;
    policy.write_csv(create(out, &format!("{name}_policy.csv"))?)?;
    write_heatmap_csv(&spec.heatmap(game, x)?, create(out, &format!("heatmap_{name}.csv"))?)
}

pub fn load_policy(game: &JointGame, dir: &Path, name: &str) -> Result<JointPolicy> {
    JointPolicy::read_csv(
        game.num_product_states(),
        game.num_joint_actions(),
        BufReader::new(open_artifact(dir, &format!("{name}_policy.csv"))?),
    )
}

pub fn load_occupancy(game: &JointGame, dir: &Path, name: &str) -> Result<OccupancyVector> {
    OccupancyVector::read_csv(
        game,
        BufReader::new(open_artifact(dir, &format!("{name}_occupancy.csv"))?),
    )
}

/// Rebuilds the heatmap CSVs from the stored occupancies.
pub fn run_heatmap(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let spec = config.grid_spec();
    let game = config.build_game()?;
    POLICIES
        .iter()
        .map(|name| {
            let x = load_occupancy(&game, dir, name)?;
            let path = dir.join(format!("heatmap_{name}.csv"));
            write_heatmap_csv(&spec.heatmap(&game, &x)?, BufWriter::new(File::create(&path)?))?;
            Ok(path)
        })
        .collect()
}

/// Dropout sweep of one policy with the guarantee at each rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(flatten)]
    pub row: SweepRow,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub policy: String,
    pub full: RolloutReport,
    pub no_comm: RolloutReport,
    pub checks: Vec<BoundReport>,
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub policies: Vec<PolicyEvaluation>,
}

impl EvalReport {
    pub fn all_bounds_hold(&self) -> bool {
        self.policies.iter().all(|p| p.checks.iter().all(|c| c.satisfied))
    }
}

fn sweep_and_write(
    config: &ExperimentConfig,
    game: &JointGame,
    policy: &JointPolicy,
    dir: &Path,
    name: &str,
) -> Result<Vec<SweepRow>> {
    let e = &config.evaluation;
    let rows = sweep_dropout(game, policy, &e.q_grid, e.n_rollouts, config.seed, e.max_steps)?;
    write_sweep_csv(&rows, create(dir, &format!("sweep_{name}.csv"))?)?;
    Ok(rows)
}

/// Runs the dropout sweep for both stored policies.
pub fn run_sweep(config: &ExperimentConfig, dir: &Path) -> Result<Vec<(String, Vec<SweepRow>)>> {
    config.validate()?;
    let game = config.build_game()?;
    POLICIES
        .iter()
        .map(|&name| {
            let policy = load_policy(&game, dir, name)?;
            Ok((name.to_string(), sweep_and_write(config, &game, &policy, dir, name)?))
        })
        .collect()
}

/// Full-communication, no-communication, persistent-loss and dropout-sweep
/// estimates for both stored policies, each next to its guarantee.
pub fn run_eval(config: &ExperimentConfig, dir: &Path) -> Result<EvalReport> {
    config.validate()?;
    let summary = Summary::load(dir)?;
    let game = config.build_game()?;
    let e = &config.evaluation;
    let mut policies = Vec::new();
    for name in POLICIES {
        let policy = load_policy(&game, dir, name)?;
        let stats = summary
            .policy(name)
            .ok_or_else(|| Error::MissingArtifact(format!("summary entry for {name}")))?;
        let (v, c, l) = (stats.v_full.clamp(0.0, 1.0), stats.c_bar.max(0.0), stats.l_full);
        let estimate =
            |comm: &CommModel| estimate_success(&game, &policy, comm, e.n_rollouts, config.seed, e.max_steps);
        let check =
            |comm: &CommModel, r: &RolloutReport| BoundReport::new(comm, v, c, l, r.success_rate, r.stderr, e.sigmas);
        let full = estimate(&CommModel::Full)?;
        let none = CommModel::none();
        let no_comm = estimate(&none)?;
        let persistent = CommModel::BernoulliPersistent(e.loss_rate);
        let persistent_report = estimate(&persistent)?;
        let mut checks = vec![check(&none, &no_comm)?, check(&persistent, &persistent_report)?];
        let rows = sweep_and_write(config, &game, &policy, dir, name)?;
        let mut sweep = Vec::new();
        for row in rows {
            let comm = CommModel::BernoulliIntermittent(row.q);
            checks.push(check(
                &comm,
                &RolloutReport {
                    n_rollouts: e.n_rollouts,
                    successes: 0,
                    timeouts: 0,
                    success_rate: row.success_rate,
                    stderr: row.stderr,
                    mean_length: row.mean_length,
                    comm: comm.label(),
                    seed: config.seed,
                },
            )?);
            sweep.push(SweepPoint {
                bound: bound_for(&comm, v, c, l)?,
                row,
            });
        }
        policies.push(PolicyEvaluation {
            policy: name.to_string(),
            full,
            no_comm,
            checks,
            sweep,
        });
    }
    let report = EvalReport {
        config_hash: config.hash(),
        policies,
    };
    write_json(dir, "eval.json", &report)?;
    Ok(report)
}

/// Exact checks on one built-in fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub fixture: String,
    pub correlation: f64,
    pub v_full: f64,
    pub l_full: f64,
    pub lemmas: LemmaReport,
    /// `exact value under the comm model ≥ guarantee`.
    pub bounds: Vec<InequalityCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub fixtures: Vec<FixtureReport>,
}

impl VerifyReport {
    pub fn violations(&self) -> Vec<(String, InequalityCheck)> {
        self.fixtures
            .iter()
            .flat_map(|f| {
                f.lemmas
                    .checks
                    .iter()
                    .chain(&f.bounds)
                    .filter(|c| !c.satisfied)
                    .map(move |c| (f.fixture.clone(), c.clone()))
            })
            .collect()
    }

    pub fn all_satisfied(&self) -> bool {
        self.violations().is_empty()
    }
}

fn verify_fixture(
    name: &str,
    game: &JointGame,
    policy: &JointPolicy,
    horizon: usize,
    seed: u64,
) -> Result<FixtureReport> {
    let cases = LemmaCases::exhaustive(horizon.min(6), 4, 8, seed);
    let lemmas = check_lemma_inequalities(game, policy, horizon, &cases)?;
    let full = enumerate_path_distribution(game, policy, &CommModel::Full, horizon)?;
    let c = full.total_correlation().max(0.0);
    let v = full.reach_avoid_probability(game).clamp(0.0, 1.0);
    let l = full.expected_duration();
    let mut models = vec![
        CommModel::none(),
        CommModel::LossAt(1),
        CommModel::History(random_history_fn(seed, 0.5)),
        CommModel::BernoulliPersistent(0.3),
    ];
    models.extend([0.25, 0.5, 0.75].map(CommModel::BernoulliIntermittent));
    let bounds = models
        .iter()
        .map(|comm| {
            let exact = enumerate_path_distribution(game, policy, comm, horizon)?.reach_avoid_probability(game);
            let bound = bound_for(comm, v, c, l)?;
            Ok(InequalityCheck::new(comm.label(), exact, bound))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixtureReport {
        fixture: name.to_string(),
        correlation: c,
        v_full: v,
        l_full: l,
        lemmas,
        bounds,
    })
}

/// Lemma and guarantee suites on the built-in fixtures, all by exact
/// enumeration.
pub fn run_verify(seed: u64) -> Result<VerifyReport> {
    let coin = fixtures::coordinated_coin(2);
    let coin_policy = fixtures::coordinated_coin_policy(&coin);
    let line = fixtures::two_line();
    let go = fixtures::two_line_go_policy(&line);
    let correlated = fixtures::correlated_line_policy(&line, 0.9);
    Ok(VerifyReport {
        fixtures: vec![
            verify_fixture("coordinated-coin", &coin, &coin_policy, 6, seed)?,
            verify_fixture("two-line-go", &line, &go, 4, seed)?,
            verify_fixture("two-line-correlated", &line, &correlated, 12, seed)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let config = ExperimentConfig::preset(name).unwrap();
            config.validate().unwrap();
            let text = serde_json::to_string(&config).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, config);
            assert_eq!(back.hash(), config.hash());
        }
        assert!(ExperimentConfig::preset("nope").is_err());
        let a = ExperimentConfig::preset("paper-2agent").unwrap();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let config: ExperimentConfig = serde_json::from_str(r#"{"name": "x", "environment": "three-agent"}"#).unwrap();
        assert_eq!(config.slip, 0.05);
        assert_eq!(config.evaluation.n_rollouts, 10_000);
        assert_eq!(config.anchor.kind, AnchorKind::RouteBlend);
    }

    #[test]
    fn orderings_are_permutations() {
        assert_eq!(orderings(2), vec![vec![0, 1], vec![1, 0]]);
        let all = orderings(3);
        assert_eq!(all.len(), 6);
        assert_eq!(all[3], vec![1, 2, 0]);
    }

    #[test]
    fn bounds_with_no_dependency_keep_the_value() {
        let b = Bounds::new(0.9, 0.0, 4.0, 0.2).unwrap();
        assert_eq!(b.thm1, 0.9);
        assert_eq!(b.thm3, 0.9);
    }

    #[test]
    fn verify_suite_passes() {
        let report = run_verify(3).unwrap();
        assert!(report.all_satisfied(), "{:?}", report.violations());
        let go = &report.fixtures[1];
        assert_eq!(go.correlation, 0.0);
        let thm1 = go.bounds.iter().find(|c| c.case == "loss-at-0").unwrap();
        assert_eq!(thm1.rhs, go.v_full);
    }

    #[test]
    fn eval_without_artifacts_fails() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig::preset("paper-2agent").unwrap();
        assert!(matches!(run_eval(&config, dir.path()), Err(Error::MissingArtifact(_))));
    }
}
