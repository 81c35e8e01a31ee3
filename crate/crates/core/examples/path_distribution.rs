//! Exact path distributions of the coordinated coin game with and without
//! communication.

use mindep::comm::CommModel;
use mindep::fixtures::{coordinated_coin, coordinated_coin_policy};
use mindep::infometrics::enumerate_path_distribution;

fn main() -> mindep::error::Result<()> {
    let game = coordinated_coin(2);
    let policy = coordinated_coin_policy(&game);
    let full = enumerate_path_distribution(&game, &policy, &CommModel::Full, 4)?;
    let none = enumerate_path_distribution(&game, &policy, &CommModel::none(), 4)?;
    println!(
        "full: {} paths, H = {:.4}, success {:.4}",
        full.len(),
        full.entropy(),
        full.reach_avoid_probability(&game)
    );
    println!(
        "no-comm: {} paths, success {:.4}",
        none.len(),
        none.reach_avoid_probability(&game)
    );
    println!(
        "total correlation {:.6}, KL(full || no-comm) {:.6}",
        full.total_correlation(),
        full.kl_to(&none)
    );
    Ok(())
}
