//! Success guarantees as the dependency grows.

use mindep::infometrics::{bound_theorem1, bound_theorem2, bound_theorem3};

fn main() -> mindep::error::Result<()> {
    let (v, l, rate) = (0.96, 11.0, 0.1);
    println!("{:>6} {:>8} {:>8} {:>8}", "C", "history", "persist", "dropout");
    for c in [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
        println!(
            "{c:>6.1} {:>8.4} {:>8.4} {:>8.4}",
            bound_theorem1(v, c)?,
            bound_theorem2(v, c, l, rate)?,
            bound_theorem3(v, c, l, rate)?
        );
    }
    Ok(())
}
