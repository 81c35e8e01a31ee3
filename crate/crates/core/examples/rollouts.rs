//! Monte Carlo success of the baseline policy under each communication model.

use mindep::comm::CommModel;
use mindep::conic::Clarabel;
use mindep::executor::{estimate_success, DEFAULT_MAX_STEPS};
use mindep::gridworld::build_two_agent_navigation;
use mindep::occupancy::{policy_from_occupancy, solve_baseline_lp, BaselineOptions};

fn main() -> mindep::error::Result<()> {
    let game = build_two_agent_navigation(0.05)?.augment_with_end_state()?;
    let sol = solve_baseline_lp(&game, &BaselineOptions::default(), &Clarabel::default())?;
    let policy = policy_from_occupancy(&game, &sol.occupancy);
    for comm in [
        CommModel::Full,
        CommModel::none(),
        CommModel::LossAt(4),
        CommModel::BernoulliPersistent(0.1),
        CommModel::BernoulliIntermittent(0.5),
    ] {
        let r = estimate_success(&game, &policy, &comm, 5_000, 0, DEFAULT_MAX_STEPS)?;
        println!(
            "{:<20} {:.4} ± {:.4}, mean length {:.2}",
            r.comm, r.success_rate, r.stderr, r.mean_length
        );
    }
    Ok(())
}
