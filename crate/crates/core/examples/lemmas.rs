//! Divergence inequalities for every loss time, schedule and dropout rate.

use mindep::fixtures::{coordinated_coin, coordinated_coin_policy};
use mindep::infometrics::{check_lemma_inequalities, LemmaCases};

fn main() -> mindep::error::Result<()> {
    let game = coordinated_coin(2);
    let policy = coordinated_coin_policy(&game);
    let cases = LemmaCases::exhaustive(4, 4, 4, 1);
    let report = check_lemma_inequalities(&game, &policy, 6, &cases)?;
    println!("reference divergence {:.6}", report.reference);
    for c in &report.checks {
        println!(
            "{:<24} {:.6} <= {:.6} {}",
            c.case,
            c.rhs,
            c.lhs,
            if c.satisfied { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
