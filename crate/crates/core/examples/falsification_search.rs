//! Necessary-condition probes and the seeded randomized search.

use specpreserve::symfun::SymmetricFunction;
use specpreserve::witness::{lemma1_gram_witness, monotonicity_probe, random_falsify, Family, GramForm};
use specpreserve::Result;

pub fn run() -> Result<()> {
    let sum = SymmetricFunction::sum(2);
    let r = lemma1_gram_witness(&sum, &[1.0, 2.0], &[1.0, 1.0], 1e-9, GramForm::Squared)?;
    println!("Gram inequality for the sum at x = (1, 2), y = (1, 1): slack {}", r.statistic);

    let dip = SymmetricFunction::black_box(2, "1 - x1 x2", |x: &[f64]| 1.0 - x[0] * x[1]);
    let r = monotonicity_probe(&dip, 1000, 0, 1e-12)?;
    println!("monotonicity of 1 - x1 x2: {:?} {:?}", r.verdict, r.witness);

    let candidates = [
        ("1 + x1 x2 / 2", SymmetricFunction::diagonal(2, vec![1.0, 0.5])?),
        ("x1 + x2", sum),
    ];
    for (label, f) in candidates {
        let r = random_falsify(&f, &Family::ALL, 200, 7, 1e-8)?;
        println!("{label:>14}: {:?}, most negative eigenvalue {:e}", r.verdict, r.statistic);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
