//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specpreserve::absmono::{certify_preserver, mollify, MollifierConfig, PipelineConfig};
use specpreserve::blockpsd::{block_det_matrix, block_product, gen_admissible_pair, gen_random_gram, gen_random_psd_blocks};
use specpreserve::construct::{exponent_map_injective, solve_functional, verify_independence, Arithmetic, VandermondeFamily};
use specpreserve::linalg::{hadamard, is_psd, random_complex};
use specpreserve::symfun::{simplex, MultiIndex, SymmetricFunction};
use specpreserve::witness::{
    gram_slice_determinants, gram_witness_matrix, lemma1_gram_witness, theorem6_blocks, theorem6_determinant, GramForm,
    Theorem6Config,
};
use specpreserve::{HermitianMatrix, Verdict, Witness};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_psd(dim: usize, rng: &mut ChaCha8Rng) -> Result<HermitianMatrix, String> {
    let rank = rng.gen_range(1..=dim);
    let x = random_complex(rank, dim, rng);
    ok(HermitianMatrix::gram(rank, dim, &x))
}

fn schur_products() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..500 {
        let dim = rng.gen_range(1..=8);
        let a = random_psd(dim, &mut rng)?;
        let b = random_psd(dim, &mut rng)?;
        let min = ok(ok(hadamard(&a, &b))?.spectrum())?[0];
        worst = worst.min(min);
    }
    ensure!(worst >= -1e-8, "min eigenvalue {worst:e}");
    Ok(format!("500 pairs, min eigenvalue {worst:.3e}"))
}

fn block_determinants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for trial in 0..200u64 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=3);
        let mat = if trial % 2 == 0 {
            let rank = rng.gen_range(1..=n);
            ok(gen_random_gram(n, m, rank, 1000 + trial))?
        } else {
            ok(gen_random_psd_blocks(n, m, rng.gen_range(1..=3), &mut rng))?
        };
        let v = ok(is_psd(&ok(block_det_matrix(&mat))?, 1e-8))?;
        ensure!(v.is_psd, "trial {trial}: min eigenvalue {:e}", v.min_eigenvalue);
        worst = worst.min(v.min_eigenvalue);
    }
    Ok(format!("200 block matrices, min eigenvalue {worst:.3e}"))
}

fn diagonal_series_preserve() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_rel = 0.0f64;
    for _ in 0..100 {
        let m = rng.gen_range(1..=3);
        let degree = rng.gen_range(0..=4);
        let b: Vec<f64> = (0..=degree).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = ok(SymmetricFunction::diagonal(m, b.clone()))?;
        for _ in 0..50 {
            let n = rng.gen_range(2..=4);
            let (a, bm) = ok(gen_admissible_pair(n, m, &mut rng))?;
            let prod = ok(block_product(&a, &bm, 1e-9))?;
            ensure!(prod.is_admissible(), "inadmissible draw: {:?}", prod.issues);
            let out = ok(prod.apply_spectral(&f, 1e-9))?;
            for i in 0..n {
                for j in 0..n {
                    let t = a.block(i, j).determinant_lu().re * bm.block(i, j).determinant_lu().re;
                    let want: f64 = b.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum();
                    let got = out.get(i, j).re;
                    let rel = (got - want).abs() / want.abs().max(1.0);
                    max_rel = max_rel.max(rel);
                    ensure!(rel <= 1e-8, "entry ({i},{j}): {got} vs {want}");
                }
            }
            let v = ok(is_psd(&out, 1e-7))?;
            ensure!(v.is_psd, "min eigenvalue {:e}", v.min_eigenvalue);
        }
    }
    Ok(format!("5000 draws, max relative deviation {max_rel:.3e}"))
}

fn epsilon_witness_values() -> Outcome {
    let cfg = ok(Theorem6Config::reference(2))?;
    let sum = ok(theorem6_determinant(&SymmetricFunction::sum(2), &cfg))?;
    let want = [[0.2, 1.01], [1.01, 0.2]];
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            ensure!((sum.matrix.get(i, j).re - w).abs() <= 1e-12, "entry ({i},{j}) = {}", sum.matrix.get(i, j));
        }
    }
    ensure!((sum.determinant + 0.9801).abs() <= 1e-12, "det(sum) = {}", sum.determinant);
    let prod = ok(theorem6_determinant(&SymmetricFunction::product(2), &cfg))?;
    ensure!(prod.determinant.abs() <= 1e-12, "det(product) = {}", prod.determinant);
    Ok(format!("det(sum) = {:.16e}, det(product) = {:.1e}", sum.determinant, prod.determinant))
}

fn epsilon_blocks_valid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let m = rng.gen_range(2..=5);
        let r = rng.gen_range(1..m);
        let x: Vec<f64> = (0..r).map(|_| 2.0 - rng.gen_range(0.0..2.0)).collect();
        let eps = 1.0 - rng.gen_range(0.0..1.0);
        let (a, b) = ok(theorem6_blocks(&ok(Theorem6Config::new(m, r, x, eps))?))?;
        for (name, mat) in [("A", &a), ("B", &b)] {
            let v = ok(mat.is_block_psd(1e-9))?;
            ensure!(v.is_psd, "trial {trial}: {name} min eigenvalue {:e}", v.min_eigenvalue);
        }
    }
    let (a, _) = ok(theorem6_blocks(&ok(Theorem6Config::reference(2))?))?;
    let spec = ok(a.assembled().spectrum())?.to_vec();
    for (got, want) in spec.iter().zip([0.0, 0.0, 0.2, 2.0]) {
        ensure!((got - want).abs() <= 1e-10, "reference spectrum {spec:?}");
    }
    Ok(format!("200 configurations block-PSD, reference spectrum {spec:?}"))
}

const MOMENT_CASES: [(u32, usize); 7] = [(0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2), (1, 3)];

fn moment_independence() -> Outcome {
    for (p, m) in MOMENT_CASES {
        let fam = ok(VandermondeFamily::build(p, m, None, Arithmetic::Exact))?;
        let r = ok(verify_independence(&fam))?;
        let expected = simplex(m, p).len();
        ensure!(r.statistic == expected as f64, "(p, m) = ({p}, {m}): rank {} of {expected}", r.statistic);
        ensure!(ok(exponent_map_injective(p, m))?, "(p, m) = ({p}, {m}): exponent map not injective");
    }
    Ok("full rank and injective exponent map for 7 (p, m) pairs".into())
}

fn coefficient_functional() -> Outcome {
    let fam = ok(VandermondeFamily::build(1, 1, Some(vec![1.0, 2.0, 3.0]), Arithmetic::Exact))?;
    let z = ok(solve_functional(&fam, &MultiIndex(vec![1])))?;
    for (got, want) in z.weights.iter().zip([-0.5, 0.0, 0.5]) {
        ensure!((got - want).abs() <= 1e-12, "weights {:?}", z.weights);
    }
    let mut worst = 0.0f64;
    for (p, m) in MOMENT_CASES {
        for mode in [Arithmetic::Exact, Arithmetic::Float] {
            let fam = ok(VandermondeFamily::build(p, m, None, mode))?;
            for q in fam.indices() {
                let s = ok(solve_functional(&fam, &q))?;
                let r = s.residuals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                ensure!(r <= 1e-10, "(p, m) = ({p}, {m}), q = {q}, {mode:?}: residual {r:e}");
                worst = worst.max(r);
            }
        }
    }
    Ok(format!("z = {:?}, max residual {worst:.3e}", z.weights))
}

fn certification_pipeline() -> Outcome {
    let exp = SymmetricFunction::exp_sum_truncated(2, 6);
    let r = ok(certify_preserver(&exp, &PipelineConfig::new(2, 6)))?;
    ensure!(r.verdict == Verdict::Certified, "truncated exponential: {:?}", r.verdict);
    let g = ok(SymmetricFunction::power_series(2, [(vec![1, 0], 1.0), (vec![1, 1], -3.0)], None))?;
    let r = ok(certify_preserver(&g, &PipelineConfig::new(2, 6)))?;
    ensure!(r.verdict == Verdict::Falsified, "bilinear: {:?}", r.verdict);
    let h = 0.0625f64;
    match r.witness {
        Some(Witness::FiniteDifference { order, value, .. }) => {
            ensure!(order == vec![1, 1], "witness order {order:?}");
            let want = -3.0 * h * h;
            ensure!(((value - want) / want).abs() <= 1e-9, "witness value {value} vs {want}");
            Ok(format!("exp consistent to order 6; witness (1,1) = {value}"))
        }
        other => Err(format!("unexpected witness {other:?}")),
    }
}

fn mollifier_convergence() -> Outcome {
    let f = SymmetricFunction::product(2);
    let grid: Vec<[f64; 2]> = (0..=16).flat_map(|i| (0..=16).map(move |j| [i as f64 / 8.0, j as f64 / 8.0])).collect();
    let mut errors = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let smooth = ok(mollify(&f, &ok(MollifierConfig::for_arity(2, eps))?))?;
        let mut sup = 0.0f64;
        for x in &grid {
            sup = sup.max((ok(smooth.eval_point(x))? - ok(f.eval_point(x))?).abs());
        }
        errors.push(sup);
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        ensure!((1.5..=2.5).contains(&ratio), "error ratio {ratio} from {errors:?}");
    }
    for c in [1.0, 3.7] {
        let smooth = ok(mollify(&SymmetricFunction::constant(2, c), &ok(MollifierConfig::for_arity(2, 0.05))?))?;
        for x in grid.iter().step_by(7) {
            let v = ok(smooth.eval_point(x))?;
            ensure!((v - c).abs() <= 1e-6, "constant {c} reproduced as {v}");
        }
    }
    Ok(format!("sup errors {:.3e} {:.3e} {:.3e}", errors[0], errors[1], errors[2]))
}

fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.gen_range(0u32..=128)) / 64.0
}

fn gram_witness_probes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let candidates = [
        SymmetricFunction::sum(3),
        SymmetricFunction::product(3),
        ok(SymmetricFunction::diagonal(3, vec![0.5, 1.0, 0.25]))?,
    ];
    let mut worst = f64::INFINITY;
    for trial in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| dyadic(&mut rng)).collect();
        let y: Vec<f64> = (0..3).map(|_| dyadic(&mut rng)).collect();
        let mat = ok(gram_witness_matrix(&x, &y))?;
        ensure!(ok(mat.is_block_psd(1e-9))?.is_psd, "trial {trial}: witness not block-PSD");
        ensure!(gram_slice_determinants(&mat).iter().all(|d| *d == 0.0), "trial {trial}: nonzero slice determinant");
        for f in &candidates {
            let r = ok(lemma1_gram_witness(f, &x, &y, 1e-9, GramForm::Squared))?;
            ensure!(r.is_certified(), "trial {trial}: {:?}", r.witness);
            worst = worst.min(r.statistic);
        }
    }
    Ok(format!("1000 pairs x 3 functions, smallest slack {worst:.3e}"))
}

fn run_cli(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = specpreserve::cli::run(std::iter::once("specpreserve").chain(args.iter().copied()), &mut out, &mut err);
    ensure!(code != 1, "usage error: {}", String::from_utf8_lossy(&err));
    Ok((code, out))
}

fn determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let f = dir.path().join("sum2.json");
    ok(std::fs::write(&f, r#"{"arity":2,"kind":"series","coeffs":[{"index":[1,0],"value":1.0},{"index":[1,1],"value":-3.0}]}"#))?;
    let fp = f.to_str().expect("utf-8 temp path");
    let runs: [&[&str]; 2] = [
        &["certify", "--f", fp, "--max-order", "4", "--seed", "5"],
        &["falsify", "--f", fp, "--m", "2", "--trials", "60", "--seed", "5"],
    ];
    for args in runs {
        let first = run_cli(args)?;
        let second = run_cli(args)?;
        ensure!(first == second, "{} differs between runs", args[0]);
        let again = ok(specpreserve::cli::replay(&String::from_utf8_lossy(&first.1)))?;
        ensure!(again.json.trim() == String::from_utf8_lossy(&first.1).trim(), "{} replay differs", args[0]);
    }
    Ok("certify and falsify byte-identical across runs and replays".into())
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "Schur products stay PSD", limit: secs(5), check: schur_products },
        Criterion { id: 2, name: "block determinant matrix is PSD", limit: secs(10), check: block_determinants },
        Criterion { id: 3, name: "series in x1...xm preserve PSD", limit: secs(30), check: diagonal_series_preserve },
        Criterion { id: 4, name: "ε-construction exact values", limit: secs(1), check: epsilon_witness_values },
        Criterion { id: 5, name: "ε-construction blocks are block-PSD", limit: secs(5), check: epsilon_blocks_valid },
        Criterion { id: 6, name: "moment vectors independent", limit: secs(5), check: moment_independence },
        Criterion { id: 7, name: "coefficient functional", limit: None, check: coefficient_functional },
        Criterion { id: 8, name: "certification pipeline", limit: secs(10), check: certification_pipeline },
        Criterion { id: 9, name: "mollifier convergence", limit: secs(20), check: mollifier_convergence },
        Criterion { id: 10, name: "Gram witness probes", limit: secs(10), check: gram_witness_probes },
        Criterion { id: 11, name: "determinism", limit: None, check: determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  [{:>2}] {:<38} {:>9.2?}  {detail}", c.id, c.name, elapsed),
            Err(why) => {
                failures += 1;
                println!("FAIL  [{:>2}] {:<38} {:>9.2?}  {why}", c.id, c.name, elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
