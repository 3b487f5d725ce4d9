//! Vandermonde node families, moment vectors and the linear functional that
//! isolates a single Taylor coefficient.
//!
//! With `n = (p+2)^m` distinct positive base nodes `a_{1b}` and derived nodes
//! `a_{kb} = a_{1b}^{(p+2)^(k-1)}`, the moment vector of an index `q` has entry
//! `prod_k a_{kb}^{q_k} = a_{1b}^{e(q)}` where `e(q) = sum_k q_k (p+2)^(k-1)`.
//! Since every `q_k <= p < p + 2`, `e` is a base-`(p+2)` digit map and the
//! moment vectors are distinct Vandermonde columns, hence independent.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{CheckReport, Verdict, Witness};
use crate::symfun::{simplex, MultiIndex};

/// Largest accepted node count `(p+2)^m`.
pub const MAX_NODES: u64 = 4096;

/// Smallest singular value accepted as independent in floating mode.
pub const MIN_SINGULAR_VALUE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VandermondeFamily {
    p: u32,
    m: usize,
    n: usize,
    mode: Arithmetic,
    base: Vec<f64>,
    /// Base nodes as integers, present in exact mode.
    base_exact: Option<Vec<u64>>,
}

/// `(p+2)^m`, refusing anything above [`MAX_NODES`].
pub fn node_count(p: u32, m: usize) -> Result<usize> {
    let n = u32::try_from(m)
        .ok()
        .and_then(|m| u64::from(p).checked_add(2).and_then(|b| b.checked_pow(m)))
        .unwrap_or(u64::MAX);
    if n > MAX_NODES {
        return Err(Error::SizeGuard { n, limit: MAX_NODES });
    }
    Ok(n as usize)
}

impl VandermondeFamily {
    /// Builds the family; default base nodes are `1, 2, ..., n`.
    ///
    /// In exact mode the base nodes must be positive integers.
    pub fn build(p: u32, m: usize, base_nodes: Option<Vec<f64>>, mode: Arithmetic) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        let n = node_count(p, m)?;
        let base = base_nodes.unwrap_or_else(|| (1..=n).map(|b| b as f64).collect());
        if base.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: base.len() });
        }
        if let Some(v) = base.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("base node {v} is not a positive real")));
        }
        let mut sorted = base.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateNodes(w[0].to_string()));
        }
        let base_exact = match mode {
            Arithmetic::Float => None,
            Arithmetic::Exact => {
                let ints = base
                    .iter()
                    .map(|&v| {
                        if v.fract() == 0.0 && v <= 9.0e15 {
                            Ok(v as u64)
                        } else {
                            Err(Error::InvalidParameter(format!("exact mode needs integer nodes, got {v}")))
                        }
                    })
                    .collect::<Result<Vec<u64>>>()?;
                Some(ints)
            }
        };
        Ok(Self { p, m, n, mode, base, base_exact })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Arithmetic {
        self.mode
    }

    pub fn base_nodes(&self) -> &[f64] {
        &self.base
    }

    fn radix(&self) -> u64 {
        u64::from(self.p) + 2
    }

    /// `(p+2)^(k-1)` for the 1-based coordinate `k`, here 0-based `alpha`.
    pub fn node_exponent(&self, alpha: usize) -> u64 {
        self.radix().pow(alpha as u32)
    }

    /// `e(q) = sum_k q_k (p+2)^(k-1)`.
    pub fn exponent(&self, index: &MultiIndex) -> u64 {
        index.exponents().iter().enumerate().map(|(a, &q)| u64::from(q) * self.node_exponent(a)).sum()
    }

    /// The simplex of indices of total degree at most `p`.
    pub fn indices(&self) -> Vec<MultiIndex> {
        simplex(self.m, self.p)
    }

    /// `a_{alpha, beta}` as an integer (exact mode only).
    pub fn derived_exact(&self, alpha: usize, beta: usize) -> Option<BigUint> {
        let base = self.base_exact.as_ref()?;
        Some(BigUint::from(base[beta]).pow(self.node_exponent(alpha) as u32))
    }

    /// `log a_{alpha, beta} = (p+2)^(alpha) log a_{1, beta}`.
    pub fn derived_log(&self, alpha: usize, beta: usize) -> f64 {
        self.node_exponent(alpha) as f64 * self.base[beta].ln()
    }

    fn check_index(&self, index: &MultiIndex) -> Result<()> {
        if index.arity() != self.m {
            return Err(Error::ArityMismatch { expected: self.m, found: index.arity() });
        }
        if index.degree() > self.p {
            return Err(Error::IndexOutOfRange { index: index.0.clone(), degree: self.p });
        }
        Ok(())
    }
}

/// Entries `prod_k a_{k,b}^{q_k}` over the nodes `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub index: MultiIndex,
    pub log_entries: Vec<f64>,
    pub exact: Option<Vec<BigUint>>,
}

impl MomentVector {
    /// Floating values; may overflow to infinity for large exponents.
    pub fn entries_f64(&self) -> Vec<f64> {
        match &self.exact {
            Some(e) => e.iter().map(|v| v.to_f64().unwrap_or(f64::INFINITY)).collect(),
            None => self.log_entries.iter().map(|l| l.exp()).collect(),
        }
    }
}

pub fn moment_vector(fam: &VandermondeFamily, index: &MultiIndex) -> Result<MomentVector> {
    fam.check_index(index)?;
    let q = index.exponents();
    let log_entries = (0..fam.n)
        .map(|b| q.iter().enumerate().map(|(a, &qa)| f64::from(qa) * fam.derived_log(a, b)).sum())
        .collect();
    let exact = fam.base_exact.as_ref().map(|_| {
        (0..fam.n)
            .map(|b| {
                q.iter().enumerate().fold(BigUint::one(), |acc, (a, &qa)| {
                    acc * fam.derived_exact(a, b).expect("exact mode").pow(qa)
                })
            })
            .collect()
    });
    Ok(MomentVector { index: index.clone(), log_entries, exact })
}

/// Whether `e` takes pairwise distinct values on the simplex, by enumeration.
pub fn exponent_map_injective(p: u32, m: usize) -> Result<bool> {
    let fam = VandermondeFamily::build(p, m, None, Arithmetic::Float)?;
    let mut seen = HashSet::new();
    Ok(fam.indices().iter().all(|idx| seen.insert(fam.exponent(idx))))
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn exact_rank(rows: &[Vec<BigInt>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let nrows = a.len();
    let ncols = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(pivot) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for i in rank + 1..nrows {
            for j in col + 1..ncols {
                let num = &a[i][j] * &a[rank][col] - &a[i][col] * &a[rank][j];
                debug_assert!((&num % &prev).is_zero(), "Bareiss division must be exact");
                a[i][j] = num / &prev;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Smallest singular value of a dense `rows x cols` matrix (given as columns)
/// by one-sided Jacobi orthogonalization.
pub fn min_singular_value(columns: &[Vec<f64>]) -> f64 {
    let mut cols: Vec<Vec<f64>> = columns.to_vec();
    let k = cols.len();
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha: f64 = cols[i].iter().map(|x| x * x).sum();
                let beta: f64 = cols[j].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(f64::INFINITY, f64::min)
}

fn normalized_columns(vectors: &[MomentVector]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .map(|v| {
            let top = v.log_entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let col: Vec<f64> = v.log_entries.iter().map(|l| (l - top).exp()).collect();
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            col.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Checks that the moment vectors of the whole simplex are independent.
///
/// Exact mode reports the integer rank as the statistic; floating mode the
/// smallest singular value of the column-normalized stack.
pub fn verify_independence(fam: &VandermondeFamily) -> Result<CheckReport> {
    let vectors = fam.indices().iter().map(|i| moment_vector(fam, i)).collect::<Result<Vec<_>>>()?;
    let expected = vectors.len();
    match fam.mode {
        Arithmetic::Exact => {
            let rows: Vec<Vec<BigInt>> = vectors
                .iter()
                .map(|v| v.exact.as_ref().expect("exact mode").iter().map(|e| BigInt::from(e.clone())).collect())
                .collect();
            let rank = exact_rank(&rows);
            let verdict = if rank == expected { Verdict::Certified } else { Verdict::Falsified };
            let witness = (rank != expected).then_some(Witness::Rank { rank, expected });
            Ok(CheckReport::new("moment_independence", verdict, rank as f64, 0.0)
                .with_witness(witness)
                .with_samples(expected))
        }
        Arithmetic::Float => {
            let sigma = min_singular_value(&normalized_columns(&vectors));
            let ok = sigma > MIN_SINGULAR_VALUE;
            let verdict = if ok { Verdict::Certified } else { Verdict::Falsified };
            let witness = (!ok).then_some(Witness::Rank { rank: expected - 1, expected });
            Ok(CheckReport::new("moment_independence", verdict, sigma, MIN_SINGULAR_VALUE)
                .with_witness(witness)
                .with_samples(expected))
        }
    }
}

/// Least-norm weights `z` with `<v(p), z> = [p = q]` over the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSolution {
    pub target: MultiIndex,
    pub weights: Vec<f64>,
    /// `<v(p), z> - [p = q]` per simplex index; in floating mode each row is
    /// first divided by its largest entry.
    pub residuals: Vec<f64>,
    /// Exact weights as `numerator/denominator`, in exact mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_weights: Option<Vec<String>>,
}

fn ratio_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Solves `G y = rhs` exactly by Gauss-Jordan elimination.
fn solve_rational(mut g: Vec<Vec<BigRational>>, mut rhs: Vec<BigRational>) -> Result<Vec<BigRational>> {
    let k = rhs.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !g[r][col].is_zero()).ok_or(Error::RankDeficient { rank: col, expected: k })?;
        g.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = g[col][col].recip();
        for v in &mut g[col][col..] {
            *v = &*v * &inv;
        }
        rhs[col] = &rhs[col] * &inv;
        for r in 0..k {
            if r == col || g[r][col].is_zero() {
                continue;
            }
            let factor = g[r][col].clone();
            let pivot_row = g[col].clone();
            for (v, p) in g[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= &factor * p;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= delta;
        }
    }
    Ok(rhs)
}

pub fn solve_functional(fam: &VandermondeFamily, target: &MultiIndex) -> Result<FunctionalSolution> {
    fam.check_index(target)?;
    let indices = fam.indices();
    let vectors = indices.iter().map(|i| moment_vector(fam, i)).collect::<Result<Vec<_>>>()?;
    let k = vectors.len();
    let n = fam.n;
    let target_row = indices.iter().position(|i| i == target).expect("target lies in the simplex");

    match fam.mode {
        Arithmetic::Exact => {
            let v: Vec<Vec<BigRational>> = vectors
                .iter()
                .map(|mv| {
                    mv.exact
                        .as_ref()
                        .expect("exact mode")
                        .iter()
                        .map(|e| BigRational::from_integer(BigInt::from(e.clone())))
                        .collect()
                })
                .collect();
            let gram: Vec<Vec<BigRational>> = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| v[i].iter().zip(&v[j]).fold(BigRational::zero(), |acc, (x, y)| acc + x * y))
                        .collect()
                })
                .collect();
            let mut rhs = vec![BigRational::zero(); k];
            rhs[target_row] = BigRational::one();
            let y = solve_rational(gram, rhs)?;
            let z: Vec<BigRational> =
                (0..n).map(|b| (0..k).fold(BigRational::zero(), |acc, i| acc + &v[i][b] * &y[i])).collect();
            let residuals = (0..k)
                .map(|i| {
                    let dot = v[i].iter().zip(&z).fold(BigRational::zero(), |acc, (x, y)| acc + x * y);
                    let want = if i == target_row { BigRational::one() } else { BigRational::zero() };
                    (dot - want).to_f64().unwrap_or(f64::NAN)
                })
                .collect();
            Ok(FunctionalSolution {
                target: target.clone(),
                weights: z.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect(),
                residuals,
                exact_weights: Some(z.iter().map(ratio_string).collect()),
            })
        }
        Arithmetic::Float => {
            // rows scaled by their largest entry; the constraint set is unchanged
            let mut scale = Vec::with_capacity(k);
            let rows: Vec<Vec<f64>> = vectors
                .iter()
                .map(|mv| {
                    let top = mv.log_entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    scale.push(top);
                    mv.log_entries.iter().map(|l| (l - top).exp()).collect()
                })
                .collect();
            // rows = L Q with orthonormal rows of Q (modified Gram-Schmidt, two passes)
            let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
            let mut l = vec![vec![0.0; k]; k];
            for (i, row) in rows.iter().enumerate() {
                let mut w = row.clone();
                for _ in 0..2 {
                    for (j, qj) in q.iter().enumerate() {
                        let c: f64 = w.iter().zip(qj).map(|(a, b)| a * b).sum();
                        l[i][j] += c;
                        for (wa, qa) in w.iter_mut().zip(qj) {
                            *wa -= c * qa;
                        }
                    }
                }
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 1e-300) {
                    return Err(Error::RankDeficient { rank: i, expected: k });
                }
                l[i][i] = norm;
                q.push(w.into_iter().map(|x| x / norm).collect());
            }
            let mut c = vec![0.0; k];
            c[target_row] = (-scale[target_row]).exp();
            let mut w = vec![0.0; k];
            for i in 0..k {
                let s: f64 = (0..i).map(|j| l[i][j] * w[j]).sum();
                w[i] = (c[i] - s) / l[i][i];
            }
            let z: Vec<f64> = (0..n).map(|b| (0..k).map(|i| q[i][b] * w[i]).sum()).collect();
            let residuals = (0..k)
                .map(|i| rows[i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - c[i])
                .collect();
            Ok(FunctionalSolution { target: target.clone(), weights: z, residuals, exact_weights: None })
        }
    }
}
