//! Paired t-test from a pair of series and from summary statistics.
//!
//!     cargo run --example ttest_summary

use personaflag::eval::stats::{critical_values, p_values};
use personaflag::eval::{paired_ttest, t_from_summary};

fn main() -> personaflag::Result<()> {
    let report = paired_ttest(&[2.0, 4.0, 7.0], &[1.0, 3.0, 5.0], 0.10)?;
    print!("{}", report.render_table("A", "B", 1.0));

    let t = t_from_summary(34.92, 33.64, 302.98, 279.46, 0.889, 864)?;
    let (p1, p2) = p_values(t, 863)?;
    println!("from summary: t = {t:.3}, p one-tail {p1:.3e}, two-tail {p2:.3e}");
    for alpha in [0.10, 0.05] {
        let (one, two) = critical_values(863, alpha)?;
        println!("alpha {alpha}: critical one-tail {one:.4}, two-tail {two:.4}");
    }
    Ok(())
}
