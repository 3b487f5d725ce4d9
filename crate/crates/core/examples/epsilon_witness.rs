//! The two-block reversal construction: a negative determinant refutes every
//! function that is not a series in the product x1 ... xm.

use specpreserve::symfun::SymmetricFunction;
use specpreserve::witness::{falsify_diagonal_gap, theorem6_blocks, theorem6_determinant, GapSearch, Theorem6Config};
use specpreserve::Result;

pub fn run() -> Result<()> {
    let cfg = Theorem6Config::reference(2)?;
    let (a, _) = theorem6_blocks(&cfg)?;
    println!("assembled A spectrum: {:?}", a.assembled().spectrum()?);

    for (label, f) in [("x1 + x2", SymmetricFunction::sum(2)), ("x1 x2", SymmetricFunction::product(2))] {
        let w = theorem6_determinant(&f, &cfg)?;
        println!("{label:>8}: det = {:.16e}  {:?}", w.determinant, w.verdict);
    }

    let mixed = SymmetricFunction::power_series(3, [(vec![1, 1, 1], 1.0), (vec![1, 1, 0], 0.1)], None)?;
    let w = falsify_diagonal_gap(&mixed, GapSearch::default())?;
    println!(
        "x1 x2 x3 + 0.1 (x1 x2 + x1 x3 + x2 x3): r = {}, eps = {}, det = {:e} after {} shrinks",
        w.config.r, w.epsilon, w.determinant, w.steps
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
