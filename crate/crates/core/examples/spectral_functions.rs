//! Symmetric functions acting on Hermitian PSD matrices through their spectra.

use specpreserve::symfun::SymmetricFunction;
use specpreserve::{HermitianMatrix, Result};

pub fn run() -> Result<()> {
    let a = HermitianMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])?;
    println!("spectrum of A: {:?}", a.spectrum()?);

    let sum = SymmetricFunction::sum(2);
    let prod = SymmetricFunction::product(2);
    let diag = SymmetricFunction::diagonal(2, vec![1.0, 0.5])?;
    for (label, f) in [("trace", &sum), ("det", &prod), ("1 + 0.5 det", &diag)] {
        println!("{label:>12}(A) = {}", f.eval_spectral(&a, 1e-9)?);
    }

    // a series is stored by coefficient orbits; one representative suffices
    let g = SymmetricFunction::power_series(2, [(vec![1, 0], 1.0), (vec![1, 1], -3.0)], None)?;
    println!("x1 + x2 - 3 x1 x2 at (0.5, 0.25) = {}", g.eval_point(&[0.5, 0.25])?);
    println!("diagonal form: {:?}", g.is_diagonal_form(0.0)?);

    let asym = SymmetricFunction::black_box(2, "first", |x: &[f64]| x[0]);
    let report = asym.check_symmetry(64, 0, 1e-12);
    println!("symmetry of (x1, x2) -> x1: {:?} {:?}", report.verdict, report.witness);

    println!("JSON: {}", specpreserve::report::to_json(&g.to_json()?)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
