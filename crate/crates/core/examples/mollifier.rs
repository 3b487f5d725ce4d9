//! Smoothing by convolution with a unit-mass bump, and Taylor coefficient
//! recovery from finite differences.

use specpreserve::absmono::{estimate_coefficients, mollify, MollifierConfig};
use specpreserve::symfun::{MultiIndex, SymmetricFunction};
use specpreserve::Result;

pub fn run() -> Result<()> {
    let f = SymmetricFunction::product(2);
    let probes: Vec<[f64; 2]> = (0..=8).flat_map(|i| (0..=8).map(move |j| [i as f64 / 4.0, j as f64 / 4.0])).collect();
    let mut previous: Option<f64> = None;
    for eps in [0.1, 0.05, 0.025] {
        let smooth = mollify(&f, &MollifierConfig::for_arity(2, eps)?)?;
        let err = probes
            .iter()
            .map(|x| Ok((smooth.eval_point(x)? - f.eval_point(x)?).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let ratio = previous.map(|p| p / err);
        println!("eps = {eps:<6} sup |f_eps - f| = {err:.3e}  ratio {ratio:?}");
        previous = Some(err);
    }

    let exp = SymmetricFunction::exp_sum(2);
    let series = estimate_coefficients(&exp, 3, 0.05, 4)?;
    let s = series.as_power_series().expect("estimate returns a series");
    for idx in [vec![1, 0], vec![1, 1], vec![2, 1]] {
        let idx = MultiIndex(idx);
        println!("coefficient {idx} of exp(x1 + x2): {:.8} (exact {:.8})", s.coefficient(&idx), 1.0 / idx.factorial_product());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
