//! Vandermonde node families, independent moment vectors and the least-norm
//! functional that isolates one coefficient.

use specpreserve::construct::{moment_vector, solve_functional, verify_independence, Arithmetic, VandermondeFamily};
use specpreserve::symfun::MultiIndex;
use specpreserve::Result;

pub fn run() -> Result<()> {
    let fam = VandermondeFamily::build(1, 2, None, Arithmetic::Exact)?;
    println!("p = 1, m = 2: {} base nodes {:?}", fam.n(), fam.base_nodes());
    for idx in fam.indices() {
        let v = moment_vector(&fam, &idx)?;
        let entries: Vec<String> = v.exact.unwrap_or_default().iter().map(ToString::to_string).collect();
        println!("  v{idx} = base^{} = [{}]", fam.exponent(&idx), entries.join(", "));
    }
    println!("rank: {}", verify_independence(&fam)?.statistic);

    let line = VandermondeFamily::build(1, 1, None, Arithmetic::Exact)?;
    let z = solve_functional(&line, &MultiIndex(vec![1]))?;
    println!("functional picking the linear coefficient on nodes 1, 2, 3: {:?}", z.exact_weights);

    let wide = VandermondeFamily::build(3, 2, None, Arithmetic::Float)?;
    let report = verify_independence(&wide)?;
    println!("p = 3, m = 2 in floating point: smallest singular value {:.3e}", report.statistic);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
