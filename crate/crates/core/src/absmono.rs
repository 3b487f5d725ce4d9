//! Absolute monotonicity: forward differences, mollification and the
//! certification pipeline for candidate preservers.
//!
//! A preserver must have nonnegative forward differences of every order at
//! every point of the orthant, and so must each of its mollifications
//! `f_eps(x) = int_{(-1,0)^m} f(x - eps t) phi(t) dt`. The pipeline checks
//! these signs on a finite lattice up to a finite order; a negative difference
//! refutes the candidate, while a clean sweep is only evidence.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{CheckReport, Verdict, Witness};
use crate::symfun::{simplex, MultiIndex, SymmetricFunction};

/// Per-difference tolerance multiplier: a difference fails below `-tol (1 + |f(x0)|)`.
pub const DEFAULT_FD_TOL: f64 = 1e-7;

/// Largest arity accepted by [`mollify`].
pub const MAX_MOLLIFY_ARITY: usize = 3;

/// Allowed deviation of the discrete bump mass from one.
pub const BUMP_MASS_TOL: f64 = 1e-6;

/// Evaluation lattice `origin + step * i`, `i in [0, extent)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub step: f64,
    pub extent: usize,
    pub max_order: u32,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, step: f64, extent: usize, max_order: u32) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
        }
        if extent < max_order as usize + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid extent {extent} cannot hold differences of order {max_order}"
            )));
        }
        if origin.is_empty() {
            return Err(Error::InvalidParameter("grid origin needs at least one coordinate".into()));
        }
        if let Some((index, &value)) = origin.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeCoordinate { index, value });
        }
        Ok(Self { origin, step, extent, max_order })
    }

    /// Smallest lattice at the origin with step `2^-4` that holds order `max_order`.
    pub fn at_origin(arity: usize, max_order: u32) -> Self {
        Self { origin: vec![0.0; arity], step: 0.0625, extent: max_order as usize + 1, max_order }
    }

    pub fn arity(&self) -> usize {
        self.origin.len()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Tensor forward difference `Delta_h^order f(x0)`.
pub fn forward_difference(f: &SymmetricFunction, x0: &[f64], h: f64, order: &MultiIndex) -> Result<f64> {
    if x0.len() != f.arity() {
        return Err(Error::ArityMismatch { expected: f.arity(), found: x0.len() });
    }
    if order.arity() != f.arity() {
        return Err(Error::ArityMismatch { expected: f.arity(), found: order.arity() });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be positive, got {h}")));
    }
    if let Some((index, &value)) = x0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("x0[{index}] = {value} is negative")));
    }
    let p = order.exponents();
    let mut k = vec![0u32; p.len()];
    let mut point = vec![0.0; p.len()];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (a, (&pa, &ka)) in p.iter().zip(&k).enumerate() {
            weight *= binomial(pa, ka);
            if (pa - ka) % 2 == 1 {
                weight = -weight;
            }
            point[a] = x0[a] + h * f64::from(ka);
        }
        total += weight * f.eval_unchecked(&point);

        // odometer over 0..=p
        let mut a = 0;
        loop {
            if a == k.len() {
                return Ok(total);
            }
            if k[a] < p[a] {
                k[a] += 1;
                break;
            }
            k[a] = 0;
            a += 1;
        }
    }
}

/// Values on an m-dimensional lattice, last axis fastest.
struct Table {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Table {
    fn strides(dims: &[usize]) -> Vec<usize> {
        let mut s = vec![1; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * dims[a + 1];
        }
        s
    }

    fn unravel(dims: &[usize], mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; dims.len()];
        for a in (0..dims.len()).rev() {
            idx[a] = flat % dims[a];
            flat /= dims[a];
        }
        idx
    }

    /// First difference along `axis`; that axis shrinks by one.
    fn diff(&self, axis: usize) -> Table {
        let old_strides = Self::strides(&self.dims);
        let mut dims = self.dims.clone();
        dims[axis] -= 1;
        let len: usize = dims.iter().product();
        let data = (0..len)
            .map(|flat| {
                let idx = Self::unravel(&dims, flat);
                let base: usize = idx.iter().zip(&old_strides).map(|(i, s)| i * s).sum();
                self.data[base + old_strides[axis]] - self.data[base]
            })
            .collect();
        Table { dims, data }
    }
}

/// Checks `Delta_h^q f(x0) >= -tol (1 + |f(x0)|)` for every `q` with
/// `|q| <= max_order` and every lattice origin `x0` whose stencil fits.
pub fn certify_all_fd_nonneg(f: &SymmetricFunction, grid: &GridSpec, tol: f64) -> Result<CheckReport> {
    let start = Instant::now();
    let m = f.arity();
    if grid.arity() != m {
        return Err(Error::ArityMismatch { expected: m, found: grid.arity() });
    }
    let dims = vec![grid.extent; m];
    let len: usize = dims.iter().product();
    let points: Vec<Vec<f64>> = (0..len)
        .map(|flat| {
            Table::unravel(&dims, flat)
                .iter()
                .zip(&grid.origin)
                .map(|(&i, &o)| o + grid.step * i as f64)
                .collect()
        })
        .collect();
    let values: Vec<f64> = points.par_iter().map(|x| f.eval_unchecked(x)).collect();
    let base = Table { dims: dims.clone(), data: values };
    let base_strides = Table::strides(&dims);

    let mut min_value = f64::INFINITY;
    let mut witness: Option<(f64, Witness)> = None;
    let mut checked = 0usize;
    for q in simplex(m, grid.max_order) {
        let mut table = Table { dims: base.dims.clone(), data: base.data.clone() };
        for (axis, &times) in q.exponents().iter().enumerate() {
            for _ in 0..times {
                table = table.diff(axis);
            }
        }
        for (flat, &value) in table.data.iter().enumerate() {
            checked += 1;
            let idx = Table::unravel(&table.dims, flat);
            let origin_flat: usize = idx.iter().zip(&base_strides).map(|(i, s)| i * s).sum();
            let f0 = base.data[origin_flat];
            let value = if value.is_nan() { f64::NEG_INFINITY } else { value };
            min_value = min_value.min(value);
            let threshold = -tol * (1.0 + f0.abs());
            if value < threshold && witness.as_ref().is_none_or(|(v, _)| value < *v) {
                let w = Witness::FiniteDifference {
                    order: q.0.clone(),
                    x0: points[origin_flat].clone(),
                    value,
                    epsilon: None,
                };
                witness = Some((value, w));
            }
        }
    }
    let verdict = if witness.is_some() { Verdict::Falsified } else { Verdict::Certified };
    Ok(CheckReport::new("finite_differences", verdict, min_value, tol)
        .with_witness(witness.map(|(_, w)| w))
        .with_samples(checked)
        .with_elapsed(start.elapsed()))
}

/// Unnormalized bump `exp(1 / (t (t + 1)))` on `(-1, 0)`.
pub fn bump_unnormalized(t: f64) -> f64 {
    if t <= -1.0 || t >= 0.0 {
        0.0
    } else {
        (1.0 / (t * (t + 1.0))).exp()
    }
}

fn midpoint_nodes(nodes: usize) -> impl Iterator<Item = f64> {
    (0..nodes).map(move |i| -1.0 + (i as f64 + 0.5) / nodes as f64)
}

/// Mollifier width and tensor midpoint quadrature on `(-1, 0)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierConfig {
    pub epsilon: f64,
    pub nodes: usize,
    /// `C` with `int C exp(1/(t(t+1))) dt = 1`.
    pub normalization: f64,
}

impl MollifierConfig {
    pub fn new(epsilon: f64, nodes: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if nodes < 8 {
            return Err(Error::InvalidParameter(format!("need at least 8 quadrature nodes, got {nodes}")));
        }
        // fine reference quadrature; the integrand is flat to all orders at both ends
        const REFERENCE_NODES: usize = 1 << 14;
        let mass: f64 = midpoint_nodes(REFERENCE_NODES).map(bump_unnormalized).sum::<f64>() / REFERENCE_NODES as f64;
        let cfg = Self { epsilon, nodes, normalization: 1.0 / mass };
        let discrete = cfg.raw_weights().iter().sum::<f64>();
        if (discrete - 1.0).abs() > BUMP_MASS_TOL {
            return Err(Error::Quadrature { mass: discrete, tolerance: BUMP_MASS_TOL });
        }
        Ok(cfg)
    }

    /// Default node count: 64 per axis up to two variables, 24 for three.
    pub fn for_arity(arity: usize, epsilon: f64) -> Result<Self> {
        match arity {
            1 | 2 => Self::new(epsilon, 64),
            3 => Self::new(epsilon, 24),
            _ => Err(Error::Unsupported(format!("mollification in {arity} variables"))),
        }
    }

    fn raw_weights(&self) -> Vec<f64> {
        let h = 1.0 / self.nodes as f64;
        midpoint_nodes(self.nodes).map(|t| self.normalization * bump_unnormalized(t) * h).collect()
    }

    /// Nodes and weights of the 1-D rule; the weights sum to one exactly.
    pub fn rule(&self) -> (Vec<f64>, Vec<f64>) {
        let raw = self.raw_weights();
        let total: f64 = raw.iter().sum();
        let nodes: Vec<f64> = midpoint_nodes(self.nodes).collect();
        let mut pairs: Vec<(f64, f64)> =
            nodes.into_iter().zip(raw.into_iter().map(|w| w / total)).filter(|(_, w)| *w > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    /// `-int t psi(t) dt` under the discrete rule.
    pub fn mean_shift(&self) -> f64 {
        let (t, w) = self.rule();
        -t.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>()
    }
}

/// `f_eps(x) = sum over the tensor rule of f(x - eps t) phi(t)`.
pub fn mollify(f: &SymmetricFunction, config: &MollifierConfig) -> Result<SymmetricFunction> {
    let m = f.arity();
    if m > MAX_MOLLIFY_ARITY {
        return Err(Error::Unsupported(format!("mollification in {m} variables")));
    }
    let (t, w) = config.rule();
    let shifts: Vec<f64> = t.iter().map(|t| -config.epsilon * t).collect();
    let k = shifts.len();
    let f = f.clone();
    let name = format!("mollified(eps={})", config.epsilon);
    Ok(SymmetricFunction::black_box(m, name, move |x: &[f64]| {
        let mut idx = vec![0usize; m];
        let mut point = vec![0.0; m];
        let mut total = 0.0;
        loop {
            let mut weight = 1.0;
            for a in 0..m {
                point[a] = x[a] + shifts[idx[a]];
                weight *= w[idx[a]];
            }
            total += weight * f.eval_unchecked(&point);
            let mut a = 0;
            loop {
                if a == m {
                    return total;
                }
                idx[a] += 1;
                if idx[a] < k {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }))
}

/// Recovers `a_p ~ Delta_h^p f(0) / (h^|p| p!)` for `|p| <= degree`, with
/// Richardson extrapolation over the steps `h, h/2, ..., h/2^(levels-1)`.
pub fn estimate_coefficients(f: &SymmetricFunction, degree: u32, h: f64, levels: usize) -> Result<SymmetricFunction> {
    if levels == 0 {
        return Err(Error::InvalidParameter("need at least one Richardson level".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let m = f.arity();
    let origin = vec![0.0; m];
    let mut coeffs = Vec::new();
    for p in simplex(m, degree).into_iter().filter(|p| *p == p.canonical()) {
        let order = p.degree() as i32;
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
        for level in 0..levels {
            let step = h / f64::powi(2.0, level as i32);
            let scaled = forward_difference(f, &origin, step, &p)? / step.powi(order);
            let mut row = vec![scaled];
            for j in 1..=level {
                let factor = f64::powi(2.0, j as i32) - 1.0;
                let prev = &table[level - 1];
                row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / factor);
            }
            table.push(row);
        }
        let derivative = table[levels - 1][levels - 1];
        coeffs.push((p.0.clone(), derivative / p.factorial_product()));
    }
    SymmetricFunction::power_series(m, coeffs, Some(degree))
}

/// Settings of [`certify_preserver`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon_schedule: Vec<f64>,
    pub grid: GridSpec,
    pub tol: f64,
    /// Quadrature nodes per axis; `None` picks the arity default.
    pub nodes: Option<usize>,
    pub symmetry_samples: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(arity: usize, max_order: u32) -> Self {
        Self {
            epsilon_schedule: vec![0.1, 0.05, 0.025],
            grid: GridSpec::at_origin(arity, max_order),
            tol: DEFAULT_FD_TOL,
            nodes: None,
            symmetry_samples: 256,
            seed: 0,
        }
    }
}

/// Runs the necessary-condition pipeline on `f`.
///
/// Stages run in order: a symmetry check (failure makes the result
/// inconclusive), finite differences of `f` itself, then of each mollified
/// `f_eps` from the schedule. The first stage with a negative difference
/// yields a falsified report with that witness. If every stage passes, the
/// verdict is certified, meaning only "consistent with a preserver up to
/// `max_order` on this lattice". When the arity is too large to mollify and
/// the raw stage passes, the verdict is inconclusive.
pub fn certify_preserver(f: &SymmetricFunction, config: &PipelineConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let symmetry = f.check_symmetry(config.symmetry_samples, config.seed, 1e-12);
    if !symmetry.is_certified() {
        return Ok(CheckReport::new("preserver", Verdict::Inconclusive, symmetry.statistic, config.tol)
            .with_witness(symmetry.witness)
            .with_seed(config.seed)
            .with_elapsed(start.elapsed()));
    }

    let mut samples = 0;
    let mut min_value = f64::INFINITY;
    let raw = certify_all_fd_nonneg(f, &config.grid, config.tol)?;
    samples += raw.samples;
    min_value = min_value.min(raw.statistic);
    if raw.is_falsified() {
        return Ok(CheckReport::new("preserver", Verdict::Falsified, min_value, config.tol)
            .with_witness(raw.witness)
            .with_seed(config.seed)
            .with_samples(samples)
            .with_elapsed(start.elapsed()));
    }

    if f.arity() > MAX_MOLLIFY_ARITY {
        return Ok(CheckReport::new("preserver", Verdict::Inconclusive, min_value, config.tol)
            .with_seed(config.seed)
            .with_samples(samples)
            .with_elapsed(start.elapsed()));
    }

    for &eps in &config.epsilon_schedule {
        let mcfg = match config.nodes {
            Some(nodes) => MollifierConfig::new(eps, nodes)?,
            None => MollifierConfig::for_arity(f.arity(), eps)?,
        };
        let smooth = mollify(f, &mcfg)?;
        let stage = certify_all_fd_nonneg(&smooth, &config.grid, config.tol)?;
        samples += stage.samples;
        min_value = min_value.min(stage.statistic);
        if stage.is_falsified() {
            let witness = stage.witness.map(|w| match w {
                Witness::FiniteDifference { order, x0, value, .. } => {
                    Witness::FiniteDifference { order, x0, value, epsilon: Some(eps) }
                }
                other => other,
            });
            return Ok(CheckReport::new("preserver", Verdict::Falsified, min_value, config.tol)
                .with_witness(witness)
                .with_seed(config.seed)
                .with_samples(samples)
                .with_elapsed(start.elapsed()));
        }
    }
    Ok(CheckReport::new("preserver", Verdict::Certified, min_value, config.tol)
        .with_seed(config.seed)
        .with_samples(samples)
        .with_elapsed(start.elapsed()))
}
