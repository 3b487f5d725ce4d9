//! Finite-difference certification of absolute monotonicity on a lattice,
//! before and after mollification.

use specpreserve::absmono::{certify_preserver, forward_difference, PipelineConfig};
use specpreserve::symfun::{MultiIndex, SymmetricFunction};
use specpreserve::Result;

pub fn run() -> Result<()> {
    let h = 0.0625;
    let g = SymmetricFunction::power_series(2, [(vec![1, 0], 1.0), (vec![1, 1], -3.0)], None)?;
    let d = forward_difference(&g, &[0.0, 0.0], h, &MultiIndex(vec![1, 1]))?;
    println!("mixed difference of x1 + x2 - 3 x1 x2: {d} (= -3 h^2 = {})", -3.0 * h * h);

    let cases = [
        ("exp(x1 + x2) to degree 6", SymmetricFunction::exp_sum_truncated(2, 6)),
        ("x1 + x2 - 3 x1 x2", g),
        ("1 + x1 x2 + x1^2 x2^2 / 2", SymmetricFunction::diagonal(2, vec![1.0, 1.0, 0.5])?),
    ];
    for (label, f) in cases {
        let report = certify_preserver(&f, &PipelineConfig::new(2, 6))?;
        println!("{label:>28}: {:?}, min difference {:e}", report.verdict, report.statistic);
        if let Some(w) = &report.witness {
            println!("{:>28}  witness {w:?}", "");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
