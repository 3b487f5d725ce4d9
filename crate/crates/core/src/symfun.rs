//! Symmetric functions on the nonnegative orthant and their spectral evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_psd, HermitianMatrix};
use crate::report::{CheckReport, Verdict, Witness};

/// Exponent tuple `(p_1, ..., p_m)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zeros(arity: usize) -> Self {
        Self(vec![0; arity])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Orbit representative: exponents sorted in descending order.
    pub fn canonical(&self) -> Self {
        let mut e = self.0.clone();
        e.sort_unstable_by(|a, b| b.cmp(a));
        Self(e)
    }

    /// Number of coordinates with a positive exponent.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&p| p > 0).count()
    }

    pub fn is_equal_exponent(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&p| (1..=p).map(f64::from).product::<f64>()).product()
    }

    /// All distinct rearrangements of the exponents, in lexicographic order.
    pub fn permutations(&self) -> Vec<MultiIndex> {
        let mut cur = self.0.clone();
        cur.sort_unstable();
        let mut out = vec![Self(cur.clone())];
        while next_permutation(&mut cur) {
            out.push(Self(cur.clone()));
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// The simplex `{p in Z_+^m : |p| <= degree}`, ordered by total degree and
/// then lexicographically descending.
pub fn simplex(arity: usize, degree: u32) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<u32>, remaining_slots: usize, exact: u32, out: &mut Vec<MultiIndex>) {
        if remaining_slots == 1 {
            prefix.push(exact);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=exact).rev() {
            prefix.push(first);
            fill(prefix, remaining_slots - 1, exact - first, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if arity == 0 {
        return out;
    }
    for d in 0..=degree {
        fill(&mut Vec::with_capacity(arity), arity, d, &mut out);
    }
    out
}

/// Black-box sampler declared symmetric by its author.
pub type Sampler = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct PowerSeries {
    /// One coefficient per permutation orbit, keyed by the canonical index.
    orbits: BTreeMap<MultiIndex, f64>,
    degree: u32,
    expanded: Vec<(Vec<u32>, f64)>,
}

impl PowerSeries {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn orbits(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.orbits.iter().map(|(k, &v)| (k, v))
    }

    pub fn coefficient(&self, index: &MultiIndex) -> f64 {
        self.orbits.get(&index.canonical()).copied().unwrap_or(0.0)
    }
}

#[derive(Clone)]
pub enum Body {
    PowerSeries(PowerSeries),
    /// `sum_j b_j (x_1 ... x_m)^j`.
    Diagonal(Vec<f64>),
    BlackBox(Sampler),
}

/// A symmetric function `R_+^m -> R`.
#[derive(Clone)]
pub struct SymmetricFunction {
    arity: usize,
    name: Option<String>,
    body: Body,
}

impl fmt::Debug for SymmetricFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("SymmetricFunction");
        d.field("arity", &self.arity).field("name", &self.name);
        match &self.body {
            Body::PowerSeries(s) => d.field("orbits", &s.orbits).field("degree", &s.degree),
            Body::Diagonal(b) => d.field("b", b),
            Body::BlackBox(_) => d.field("body", &"black box"),
        };
        d.finish()
    }
}

impl SymmetricFunction {
    /// Truncated power series from `(index, coefficient)` pairs.
    ///
    /// Each permutation orbit must be given either by a single member or by
    /// all of its members with one common value; anything else is rejected.
    pub fn power_series<I>(arity: usize, coeffs: I, degree: Option<u32>) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        if arity == 0 {
            return Err(Error::InvalidParameter("arity must be positive".into()));
        }
        let mut given: BTreeMap<MultiIndex, BTreeMap<MultiIndex, f64>> = BTreeMap::new();
        for (index, value) in coeffs {
            if index.len() != arity {
                return Err(Error::ArityMismatch { expected: arity, found: index.len() });
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("coefficient of {index:?} is not finite")));
            }
            let index = MultiIndex(index);
            let members = given.entry(index.canonical()).or_default();
            if members.insert(index.clone(), value).is_some() {
                return Err(Error::Asymmetric(format!("index {index} listed twice")));
            }
        }

        let mut orbits = BTreeMap::new();
        for (canonical, members) in given {
            let first = *members.values().next().expect("non-empty orbit");
            if let Some((idx, v)) = members.iter().find(|(_, &v)| v != first) {
                return Err(Error::Asymmetric(format!(
                    "index {idx} has coefficient {v} but its orbit {canonical} has {first}"
                )));
            }
            let orbit_size = canonical.permutations().len();
            if members.len() != 1 && members.len() != orbit_size {
                return Err(Error::Asymmetric(format!(
                    "orbit {canonical} given by {} of its {orbit_size} members",
                    members.len()
                )));
            }
            orbits.insert(canonical, first);
        }

        let max_degree = orbits.keys().map(MultiIndex::degree).max().unwrap_or(0);
        let degree = match degree {
            Some(d) if d < max_degree => {
                return Err(Error::InvalidParameter(format!(
                    "truncation degree {d} below the largest stored degree {max_degree}"
                )))
            }
            Some(d) => d,
            None => max_degree,
        };
        let expanded = orbits
            .iter()
            .flat_map(|(k, &v)| k.permutations().into_iter().map(move |p| (p.0, v)))
            .collect();
        Ok(Self { arity, name: None, body: Body::PowerSeries(PowerSeries { orbits, degree, expanded }) })
    }

    pub fn diagonal(arity: usize, b: Vec<f64>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidParameter("arity must be positive".into()));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("diagonal coefficients must be finite".into()));
        }
        Ok(Self { arity, name: None, body: Body::Diagonal(b) })
    }

    pub fn black_box<F>(arity: usize, name: impl Into<String>, sampler: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { arity, name: Some(name.into()), body: Body::BlackBox(Arc::new(sampler)) }
    }

    pub fn constant(arity: usize, c: f64) -> Self {
        Self::power_series(arity, [(vec![0; arity], c)], None).expect("constant is symmetric")
    }

    /// `x_1 + ... + x_m`.
    pub fn sum(arity: usize) -> Self {
        let mut e = vec![0; arity];
        e[0] = 1;
        let mut f = Self::power_series(arity, [(e, 1.0)], None).expect("sum is symmetric");
        f.name = Some("sum".into());
        f
    }

    /// `x_1 x_2 ... x_m`.
    pub fn product(arity: usize) -> Self {
        let mut f = Self::power_series(arity, [(vec![1; arity], 1.0)], None).expect("product is symmetric");
        f.name = Some("product".into());
        f
    }

    /// `exp(x_1 + ... + x_m)`, evaluated in closed form.
    pub fn exp_sum(arity: usize) -> Self {
        Self::black_box(arity, "exp_sum", |x: &[f64]| x.iter().sum::<f64>().exp())
    }

    /// Taylor polynomial of `exp(x_1 + ... + x_m)` of total degree `degree`.
    pub fn exp_sum_truncated(arity: usize, degree: u32) -> Self {
        let coeffs = simplex(arity, degree)
            .into_iter()
            .filter(|i| *i == i.canonical())
            .map(|i| {
                let c = 1.0 / i.factorial_product();
                (i.0, c)
            });
        Self::power_series(arity, coeffs, Some(degree)).expect("exp coefficients are symmetric")
    }

    pub fn builtin(arity: usize, name: &str) -> Result<Self> {
        match name {
            "sum" => Ok(Self::sum(arity)),
            "product" => Ok(Self::product(arity)),
            "exp_sum" => Ok(Self::exp_sum(arity)),
            other => Err(Error::InvalidParameter(format!("unknown builtin function {other:?}"))),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn as_power_series(&self) -> Option<&PowerSeries> {
        match &self.body {
            Body::PowerSeries(s) => Some(s),
            _ => None,
        }
    }

    /// `c * f`.
    pub fn scaled(&self, c: f64) -> Self {
        let body = match &self.body {
            Body::PowerSeries(s) => {
                let coeffs = s.orbits.iter().map(|(k, &v)| (k.0.clone(), c * v));
                return Self::power_series(self.arity, coeffs, Some(s.degree)).expect("scaling keeps symmetry");
            }
            Body::Diagonal(b) => Body::Diagonal(b.iter().map(|v| c * v).collect()),
            Body::BlackBox(g) => {
                let g = Arc::clone(g);
                Body::BlackBox(Arc::new(move |x: &[f64]| c * g(x)))
            }
        };
        Self { arity: self.arity, name: None, body }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: x.len() });
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeCoordinate { index, value });
        }
        Ok(())
    }

    /// Evaluates `f(x)` for `x` in the nonnegative orthant.
    pub fn eval_point(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without domain checks; callers guarantee `x >= 0` and the arity.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::BlackBox(g) => g(x),
            Body::PowerSeries(s) => {
                // sorting makes the value identical for every permutation of x
                let mut sorted = x.to_vec();
                sorted.sort_by(f64::total_cmp);
                s.expanded
                    .iter()
                    .map(|(e, a)| {
                        let mono: f64 = e.iter().zip(&sorted).map(|(&p, &xi)| xi.powi(p as i32)).product();
                        a * mono
                    })
                    .sum()
            }
            Body::Diagonal(b) => {
                let mut sorted = x.to_vec();
                sorted.sort_by(f64::total_cmp);
                let prod: f64 = sorted.iter().product();
                b.iter().rev().fold(0.0, |acc, &bj| acc * prod + bj)
            }
        }
    }

    /// `f(A) = f(lambda_1(A), ..., lambda_m(A))` for a PSD matrix `A`.
    ///
    /// Eigenvalues in `[-tol', 0)` are clamped to zero, where `tol'` is the
    /// scaled tolerance of the PSD verdict.
    pub fn eval_spectral(&self, a: &HermitianMatrix, tol: f64) -> Result<f64> {
        if a.dim() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: a.dim() });
        }
        let verdict = is_psd(a, tol)?;
        if !verdict.is_psd {
            return Err(Error::NotPsd { min_eigenvalue: verdict.min_eigenvalue, tolerance: verdict.tolerance_used });
        }
        let lambda: Vec<f64> = a.spectrum()?.iter().map(|&l| l.max(0.0)).collect();
        Ok(self.eval_unchecked(&lambda))
    }

    /// Samples `f(x)` against `f(pi x)`; series bodies are symmetric by construction.
    pub fn check_symmetry(&self, samples: usize, seed: u64, tol: f64) -> CheckReport {
        let g = match &self.body {
            Body::BlackBox(g) => g,
            _ => {
                return CheckReport::new("symmetry", Verdict::Certified, 0.0, tol).with_seed(seed).with_samples(0);
            }
        };
        let m = self.arity;
        let mut worst = 0.0f64;
        let mut witness = None;
        let mut count = 0;
        let mut probe = |x: Vec<f64>, perm: Vec<usize>| {
            let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let dev = (g(&x) - g(&px)).abs();
            let dev = if dev.is_nan() { f64::INFINITY } else { dev };
            if dev > worst {
                worst = dev;
                witness = Some(Witness::Symmetry { point: x, permutation: perm, deviation: dev });
            }
        };

        // unit vectors against transpositions of the first coordinate
        for i in 1..m {
            let mut x = vec![0.0; m];
            x[0] = 1.0;
            let mut perm: Vec<usize> = (0..m).collect();
            perm.swap(0, i);
            probe(x, perm);
            count += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut rng);
            probe(x, perm);
            count += 1;
        }
        let verdict = if worst <= tol { Verdict::Certified } else { Verdict::Falsified };
        let witness = if verdict == Verdict::Falsified { witness } else { None };
        CheckReport::new("symmetry", verdict, worst, tol)
            .with_witness(witness)
            .with_seed(seed)
            .with_samples(count)
    }

    /// Whether every coefficient above `tol` sits on an equal-exponent index.
    /// Returns the first offending orbit representative otherwise.
    pub fn is_diagonal_form(&self, tol: f64) -> Result<(bool, Option<MultiIndex>)> {
        match &self.body {
            Body::Diagonal(_) => Ok((true, None)),
            Body::BlackBox(_) => Err(Error::Unsupported("diagonal-form test needs series coefficients".into())),
            Body::PowerSeries(s) => {
                let offending =
                    s.orbits.iter().find(|(k, &v)| v.abs() > tol && !k.is_equal_exponent()).map(|(k, _)| k.clone());
                Ok((offending.is_none(), offending))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Series,
    Diagonal,
    Builtin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientJson {
    pub index: Vec<u32>,
    pub value: f64,
}

/// Wire format for functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionJson {
    pub arity: usize,
    pub kind: FunctionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<CoefficientJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
}

impl TryFrom<&FunctionJson> for SymmetricFunction {
    type Error = Error;

    fn try_from(json: &FunctionJson) -> Result<Self> {
        match json.kind {
            FunctionKind::Series => SymmetricFunction::power_series(
                json.arity,
                json.coeffs.iter().map(|c| (c.index.clone(), c.value)),
                json.degree,
            ),
            FunctionKind::Diagonal => SymmetricFunction::diagonal(json.arity, json.b.clone()),
            FunctionKind::Builtin => {
                let name = json
                    .name
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("builtin function needs a name".into()))?;
                SymmetricFunction::builtin(json.arity, name)
            }
        }
    }
}

impl TryFrom<&SymmetricFunction> for FunctionJson {
    type Error = Error;

    fn try_from(f: &SymmetricFunction) -> Result<Self> {
        let mut json = FunctionJson {
            arity: f.arity,
            kind: FunctionKind::Builtin,
            coeffs: Vec::new(),
            b: Vec::new(),
            name: None,
            degree: None,
        };
        if let Some(name) = f.name.as_deref().filter(|n| ["sum", "product", "exp_sum"].contains(n)) {
            json.name = Some(name.to_string());
            return Ok(json);
        }
        match &f.body {
            Body::PowerSeries(s) => {
                json.kind = FunctionKind::Series;
                json.coeffs = s.orbits.iter().map(|(k, &v)| CoefficientJson { index: k.0.clone(), value: v }).collect();
                json.degree = Some(s.degree);
            }
            Body::Diagonal(b) => {
                json.kind = FunctionKind::Diagonal;
                json.b = b.clone();
            }
            Body::BlackBox(_) => return Err(Error::Unsupported("black-box functions have no JSON form".into())),
        }
        Ok(json)
    }
}

impl SymmetricFunction {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: FunctionJson = serde_json::from_str(text)?;
        Self::try_from(&json)
    }

    pub fn to_json(&self) -> Result<FunctionJson> {
        FunctionJson::try_from(self)
    }
}
