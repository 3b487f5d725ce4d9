//! Counterexample machinery: the two-block ε-construction that separates
//! diagonal-form functions from the rest, the Gram witness inequality,
//! monotonicity probes and a seeded randomized search.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockpsd::{apply_spectral, block_product, gen_lemma4_family, gen_random_psd_blocks, BlockMatrix};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianMatrix, DEFAULT_PSD_TOL};
use crate::report::{CheckReport, Verdict, Witness};
use crate::symfun::{Body, SymmetricFunction};

/// A determinant or eigenvalue below `-DETECTION_TOL` counts as a witness.
pub const DETECTION_TOL: f64 = 1e-7;

/// Environment variable capping the worker threads of the parallel search.
pub const THREADS_ENV: &str = "SPECPRESERVE_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem6Config {
    pub m: usize,
    pub r: usize,
    pub x: Vec<f64>,
    pub epsilon: f64,
    pub shrink: f64,
    pub max_steps: usize,
}

impl Theorem6Config {
    /// Shrink factor 0.5 and at most 60 steps.
    pub fn new(m: usize, r: usize, x: Vec<f64>, epsilon: f64) -> Result<Self> {
        let cfg = Self { m, r, x, epsilon, shrink: 0.5, max_steps: 60 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `r = 1`, `x = (1)`, `ε = 0.1`.
    pub fn reference(m: usize) -> Result<Self> {
        Self::new(m, 1, vec![1.0], 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.m {
            return Err(Error::InvalidParameter(format!("r = {} must lie in 1..={}", self.r, self.m)));
        }
        if self.x.len() != self.r {
            return Err(Error::DimensionMismatch { expected: self.r, found: self.x.len() });
        }
        if self.x.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("x must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter("shrink factor must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// `(x_1, ..., x_r, ε, ..., ε)`.
    fn leading(&self) -> Vec<f64> {
        let mut d = self.x.clone();
        d.resize(self.m, self.epsilon);
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub config: Theorem6Config,
    pub a: BlockMatrix,
    pub b: BlockMatrix,
    /// `[f(A_ab B_ab)]`.
    pub matrix: HermitianMatrix,
    pub determinant: f64,
    pub min_eigenvalue: f64,
    pub epsilon: f64,
    /// Shrink steps taken before this configuration, 0 for a single evaluation.
    pub steps: usize,
    pub verdict: Verdict,
}

impl WitnessReport {
    pub fn is_falsified(&self) -> bool {
        self.verdict == Verdict::Falsified
    }
}

/// The pair of `2 x 2` block grids with `D1 = diag(x, ε, ..., ε)`,
/// `D2 = J D1 J`:
/// `A = [[D1, D1 J], [J D1, D2]]` and `B = [[D2, J D1], [D1 J, D1]]`.
///
/// Every block product `A_ab B_ab` is diagonal: `D1 D2` on the diagonal,
/// `D1^2` and `D2^2` off it.
pub fn theorem6_blocks(cfg: &Theorem6Config) -> Result<(BlockMatrix, BlockMatrix)> {
    cfg.validate()?;
    let m = cfg.m;
    let d1_values = cfg.leading();
    let d2_values: Vec<f64> = d1_values.iter().rev().copied().collect();
    let d1 = CMatrix::diag(&d1_values);
    let d2 = CMatrix::diag(&d2_values);
    let j = CMatrix::reversal(m);
    let d1j = d1.matmul(&j)?;
    let jd1 = j.matmul(&d1)?;
    let a = BlockMatrix::new(2, m, vec![d1.clone(), d1j.clone(), jd1.clone(), d2.clone()])?;
    let b = BlockMatrix::new(2, m, vec![d2, jd1, d1j, d1])?;
    Ok((a, b))
}

fn determinant_2x2(h: &HermitianMatrix) -> f64 {
    h.get(0, 0).re * h.get(1, 1).re - h.get(0, 1).norm_sqr()
}

/// `det [f(A_ab B_ab)]` for the grids of [`theorem6_blocks`].
pub fn theorem6_determinant(f: &SymmetricFunction, cfg: &Theorem6Config) -> Result<WitnessReport> {
    if f.arity() != cfg.m {
        return Err(Error::ArityMismatch { expected: cfg.m, found: f.arity() });
    }
    let (a, b) = theorem6_blocks(cfg)?;
    let product = block_product(&a, &b, DEFAULT_PSD_TOL)?;
    let matrix = product.apply_spectral(f, DEFAULT_PSD_TOL)?;
    let determinant = determinant_2x2(&matrix);
    let min_eigenvalue = matrix.spectrum()?[0];
    let verdict = if determinant < -DETECTION_TOL || min_eigenvalue < -DETECTION_TOL {
        Verdict::Falsified
    } else {
        Verdict::Inconclusive
    };
    Ok(WitnessReport {
        config: cfg.clone(),
        a,
        b,
        matrix,
        determinant,
        min_eigenvalue,
        epsilon: cfg.epsilon,
        steps: 0,
        verdict,
    })
}

/// Starting point of the ε search in [`falsify_diagonal_gap`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSearch {
    pub epsilon: f64,
    pub shrink: f64,
    pub max_steps: usize,
}

impl Default for GapSearch {
    fn default() -> Self {
        Self { epsilon: 0.5, shrink: 0.5, max_steps: 60 }
    }
}

/// Smallest `r < m` such that some coefficient is supported on exactly `r`
/// coordinates.
pub fn smallest_partial_support(f: &SymmetricFunction) -> Option<usize> {
    let series = f.as_power_series()?;
    series
        .orbits()
        .filter(|(_, v)| *v != 0.0)
        .map(|(k, _)| k.support_size())
        .filter(|&s| s >= 1 && s < f.arity())
        .min()
}

/// Shrinks ε geometrically until the ε-construction yields a negative
/// determinant.
///
/// Uses the smallest partial support size as `r` and `x = (1, ..., 1)`; falls
/// back to `r = 1` when every non-constant coefficient has full support, in
/// which case an exhausted search is reported as inconclusive.
pub fn falsify_diagonal_gap(f: &SymmetricFunction, search: GapSearch) -> Result<WitnessReport> {
    if !matches!(f.body(), Body::PowerSeries(_)) {
        return Err(Error::Unsupported("the ε search needs a power series".into()));
    }
    if f.is_diagonal_form(0.0)?.0 {
        return Err(Error::InvalidParameter("f has diagonal form; no ε-witness exists".into()));
    }
    let m = f.arity();
    let r = smallest_partial_support(f).unwrap_or(1);
    let base = Theorem6Config {
        m,
        r,
        x: vec![1.0; r],
        epsilon: search.epsilon,
        shrink: search.shrink,
        max_steps: search.max_steps,
    };
    base.validate()?;
    let mut epsilon = search.epsilon;
    let mut last = None;
    for step in 0..=search.max_steps {
        let mut report = theorem6_determinant(f, &base.with_epsilon(epsilon))?;
        report.steps = step;
        if report.is_falsified() {
            return Ok(report);
        }
        last = Some(report);
        epsilon *= search.shrink;
    }
    Ok(last.expect("at least one step runs"))
}

/// Which side of the Gram inequality is tested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramForm {
    /// `f(x∘y)^2 <= f(x∘x) f(y∘y)`, implied by the block-PSD Gram witness.
    #[default]
    Squared,
    /// `f(x∘y)^2 <= f(x) f(y)`; exploratory, fails for the product when `prod xy > 1`.
    Literal,
}

/// `[[diag(x∘x), diag(x∘y)], [diag(x∘y), diag(y∘y)]]`.
pub fn gram_witness_matrix(x: &[f64], y: &[f64]) -> Result<BlockMatrix> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if let Some((i, v)) = x.iter().chain(y).enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeCoordinate { index: i % x.len().max(1), value: *v });
    }
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let (dxx, dxy, dyy) = (CMatrix::diag(&xx), CMatrix::diag(&xy), CMatrix::diag(&yy));
    BlockMatrix::new(2, x.len(), vec![dxx, dxy.clone(), dxy, dyy])
}

/// Determinants of the `2 x 2` coordinate slices `[[x_k^2, x_k y_k], [x_k y_k, y_k^2]]`.
pub fn gram_slice_determinants(mat: &BlockMatrix) -> Vec<f64> {
    (0..mat.m())
        .map(|k| {
            let g = |a, b| mat.block(a, b).get(k, k);
            (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0)).re
        })
        .collect()
}

/// Evaluates the Gram inequality for one pair, failing if the witness matrix
/// is not block-PSD.
pub fn lemma1_gram_witness(f: &SymmetricFunction, x: &[f64], y: &[f64], tol: f64, form: GramForm) -> Result<CheckReport> {
    let mat = gram_witness_matrix(x, y)?;
    let psd = mat.is_block_psd(DEFAULT_PSD_TOL)?;
    if !psd.is_psd {
        return Err(Error::NotPsd { min_eigenvalue: psd.min_eigenvalue, tolerance: psd.tolerance_used });
    }
    let diag = |a: usize, b: usize| -> Vec<f64> { (0..x.len()).map(|k| mat.block(a, b).get(k, k).re).collect() };
    let lhs = f.eval_point(&diag(0, 1))?.powi(2);
    let rhs = match form {
        GramForm::Squared => f.eval_point(&diag(0, 0))? * f.eval_point(&diag(1, 1))?,
        GramForm::Literal => f.eval_point(x)? * f.eval_point(y)?,
    };
    let slack = rhs - lhs;
    let threshold = tol * rhs.abs().max(1.0);
    let (verdict, witness) = if slack < -threshold || slack.is_nan() {
        (Verdict::Falsified, Some(Witness::GramInequality { x: x.to_vec(), y: y.to_vec(), lhs, rhs }))
    } else {
        (Verdict::Certified, None)
    };
    let check = match form {
        GramForm::Squared => "gram_inequality",
        GramForm::Literal => "gram_inequality_literal",
    };
    Ok(CheckReport::new(check, verdict, slack, tol).with_witness(witness).with_samples(1))
}

/// Samples `x` in `[0, 2)^m`, a coordinate `i` and `δ` in `(0, 1]`, and looks
/// for `f(x) < -tol` or `f(x + δ e_i) < f(x) - tol`.
pub fn monotonicity_probe(f: &SymmetricFunction, samples: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let m = f.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for _ in 0..samples {
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..2.0)).collect();
        let i = rng.gen_range(0..m);
        let delta = 1.0 - rng.gen_range(0.0..1.0);
        let before = f.eval_point(&x)?;
        let mut moved = x.clone();
        moved[i] += delta;
        let after = f.eval_point(&moved)?;
        if before < worst {
            worst = before;
            if before < -tol {
                witness = Some(Witness::Negativity { point: x.clone(), value: before });
            }
        }
        let rise = after - before;
        if rise < worst {
            worst = rise;
            if rise < -tol {
                witness = Some(Witness::Monotonicity {
                    point: x,
                    coordinate: i,
                    increment: delta,
                    value_before: before,
                    value_after: after,
                });
            }
        }
    }
    let verdict = if witness.is_some() { Verdict::Falsified } else { Verdict::Certified };
    let statistic = if samples == 0 { 0.0 } else { worst };
    Ok(CheckReport::new("monotonicity", verdict, statistic, tol)
        .with_witness(witness)
        .with_seed(seed)
        .with_samples(samples))
}

/// Generator families drawn by [`random_falsify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Block-PSD grids with PSD blocks.
    #[serde(rename = "gram")]
    Gram,
    /// Diagonal rank-one perturbation grids `[diag(x_k + t_k a_kb a_kc)]`.
    #[serde(rename = "lemma4")]
    Lemma4,
    /// The ε-construction with random `r`, `x` and `ε`.
    #[serde(rename = "thm6")]
    Thm6,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gram, Family::Lemma4, Family::Thm6];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gram => "gram",
            Family::Lemma4 => "lemma4",
            Family::Thm6 => "thm6",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gram" => Ok(Family::Gram),
            "lemma4" => Ok(Family::Lemma4),
            "thm6" => Ok(Family::Thm6),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

struct Trial {
    index: usize,
    family: Family,
    matrix: HermitianMatrix,
    min_eigenvalue: f64,
    threshold: f64,
}

fn run_trial(f: &SymmetricFunction, family: Family, index: usize, family_round: usize, seed: u64, tol: f64) -> Result<Trial> {
    let m = f.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let matrix = match family {
        Family::Gram => {
            let n = rng.gen_range(2..=4);
            let terms = rng.gen_range(1..=3);
            let mat = gen_random_psd_blocks(n, m, terms, &mut rng)?;
            apply_spectral(f, &mat, DEFAULT_PSD_TOL)?
        }
        Family::Lemma4 => {
            let n = rng.gen_range(2..=4);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).collect();
            let mat = gen_lemma4_family(&x, &t, &a)?;
            apply_spectral(f, &mat, DEFAULT_PSD_TOL)?
        }
        Family::Thm6 => {
            let cfg = if family_round == 0 && m >= 2 {
                Theorem6Config::reference(m)?
            } else {
                let r = if m >= 2 { rng.gen_range(1..m) } else { 1 };
                let x: Vec<f64> = (0..r).map(|_| 2.0 - rng.gen_range(0.0..2.0)).collect();
                Theorem6Config::new(m, r, x, 1.0 - rng.gen_range(0.0..1.0))?
            };
            theorem6_determinant(f, &cfg)?.matrix
        }
    };
    let spectrum = matrix.spectrum()?;
    let min_eigenvalue = spectrum[0];
    let radius = spectrum.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(Trial { index, family, matrix, min_eigenvalue, threshold: -tol * radius.max(1.0) })
}

/// Builds a pool honouring [`THREADS_ENV`], or `None` to use the global pool.
pub fn capped_pool() -> Option<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&t| t > 0)?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
}

/// Runs `op` inside the pool capped by [`THREADS_ENV`] when it is set.
pub fn with_thread_cap<R: Send>(op: impl FnOnce() -> R + Send) -> R {
    match capped_pool() {
        Some(pool) => pool.install(op),
        None => op(),
    }
}

/// Draws `trials` grids cycling through `families`, applies `f` blockwise and
/// keeps the most negative eigenvalue seen.
///
/// Trial `t` uses ChaCha stream `t` of `seed`, so the merged result does not
/// depend on scheduling. The first `thm6` trial is the reference
/// configuration `r = 1`, `x = (1)`, `ε = 0.1`.
pub fn random_falsify(f: &SymmetricFunction, families: &[Family], trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    if families.is_empty() || trials == 0 {
        return Ok(CheckReport::new("random_search", Verdict::Inconclusive, 0.0, tol).with_seed(seed));
    }
    let k = families.len();
    let results: Vec<Result<Trial>> = with_thread_cap(|| {
        (0..trials).into_par_iter().map(|t| run_trial(f, families[t % k], t, t / k, seed, tol)).collect()
    });
    let mut worst: Option<Trial> = None;
    let mut falsified = false;
    for result in results {
        let trial = result?;
        falsified |= trial.min_eigenvalue < trial.threshold;
        if worst.as_ref().is_none_or(|w| trial.min_eigenvalue < w.min_eigenvalue) {
            worst = Some(trial);
        }
    }
    let worst = worst.expect("trials >= 1");
    let verdict = if falsified { Verdict::Falsified } else { Verdict::Certified };
    let witness = falsified.then(|| Witness::Spectral {
        family: worst.family.as_str().to_string(),
        trial: worst.index,
        matrix: worst.matrix.clone(),
        min_eigenvalue: worst.min_eigenvalue,
    });
    Ok(CheckReport::new("random_search", verdict, worst.min_eigenvalue, tol)
        .with_witness(witness)
        .with_seed(seed)
        .with_samples(trials))
}
