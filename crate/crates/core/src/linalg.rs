//! Dense complex linear algebra for small Hermitian matrices.
//!
//! Everything here is self-contained: a cyclic Jacobi eigensolver for
//! Hermitian input, positive semidefiniteness verdicts, Hadamard products and
//! determinants. Dimensions are expected to stay below 64.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermitian defect tolerated (and repaired by averaging) on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default relative tolerance for PSD verdicts.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Default convergence tolerance of the eigensolver, relative to the Frobenius norm.
pub const DEFAULT_EIG_TOL: f64 = 1e-14;

/// Sweep cap for the Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;

/// A square complex matrix stored row-major, with no structural promise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::new(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a real matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut out = Self::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            out.data[i * dim + i] = Complex64::new(v, 0.0);
        }
        out
    }

    /// The anti-diagonal reversal permutation.
    pub fn reversal(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + (dim - 1 - i)] = Complex64::new(1.0, 0.0);
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * factor).collect() }
    }

    /// Largest `|a_ij - conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.get(i, j) == Complex64::new(0.0, 0.0)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant_lu(&self) -> Complex64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= factor * v;
                }
            }
        }
        det
    }
}

/// Wire format shared by every matrix: `{"dim": m, "re": [[..]], "im": [[..]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        let dim = json.dim;
        if json.re.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: json.re.len() });
        }
        if let Some(im) = &json.im {
            if im.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: im.len() });
            }
        }
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            if json.re[i].len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: json.re[i].len() });
            }
            for j in 0..dim {
                let im = match &json.im {
                    Some(im) => *im[i].get(j).ok_or(Error::DimensionMismatch {
                        expected: dim,
                        found: im[i].len(),
                    })?,
                    None => 0.0,
                };
                data.push(Complex64::new(json.re[i][j], im));
            }
        }
        CMatrix::new(dim, data)
    }
}

impl From<CMatrix> for MatrixJson {
    fn from(m: CMatrix) -> Self {
        let n = m.dim;
        let re = (0..n).map(|i| (0..n).map(|j| m.get(i, j).re).collect()).collect();
        let im = if m.data.iter().any(|z| z.im != 0.0) {
            Some((0..n).map(|i| (0..n).map(|j| m.get(i, j).im).collect()).collect())
        } else {
            None
        };
        MatrixJson { dim: n, re, im }
    }
}

/// A Hermitian matrix with a lazily cached spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianMatrix {
    inner: CMatrix,
    spectrum: OnceLock<Vec<f64>>,
}

impl PartialEq for HermitianMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        HermitianMatrix::from_matrix(CMatrix::try_from(json)?)
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(h: HermitianMatrix) -> Self {
        h.inner.into()
    }
}

impl HermitianMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        Self::from_matrix(CMatrix::new(dim, data)?)
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::from_matrix_with_tol(m, HERMITIAN_TOL)
    }

    /// Accepts `m` if its Hermitian defect is at most `tol`, then averages it
    /// with its conjugate transpose.
    pub fn from_matrix_with_tol(m: CMatrix, tol: f64) -> Result<Self> {
        let defect = m.hermitian_defect();
        if !(defect <= tol) {
            return Err(Error::NotHermitian { defect, tolerance: tol });
        }
        let n = m.dim;
        let mut data = m.data;
        for i in 0..n {
            data[i * n + i] = Complex64::new(data[i * n + i].re, 0.0);
            for j in i + 1..n {
                let avg = (data[i * n + j] + data[j * n + i].conj()) * 0.5;
                data[i * n + j] = avg;
                data[j * n + i] = avg.conj();
            }
        }
        Ok(Self { inner: CMatrix { dim: n, data }, spectrum: OnceLock::new() })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_matrix(CMatrix::from_real(dim, data)?)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_matrix(CMatrix::from_rows(rows)?)
    }

    pub fn diag(values: &[f64]) -> Self {
        Self { inner: CMatrix::diag(values), spectrum: OnceLock::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    /// `X^H X` for a `rows x cols` matrix `X` given row-major.
    pub fn gram(rows: usize, cols: usize, x: &[Complex64]) -> Result<Self> {
        if x.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: x.len() });
        }
        let mut data = vec![Complex64::new(0.0, 0.0); cols * cols];
        for i in 0..cols {
            for j in i..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..rows {
                    acc += x[k * cols + i].conj() * x[k * cols + j];
                }
                if i == j {
                    acc.im = 0.0;
                }
                data[i * cols + j] = acc;
                data[j * cols + i] = acc.conj();
            }
        }
        Self::new(cols, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// Ascending spectrum at [`DEFAULT_EIG_TOL`], computed once.
    pub fn spectrum(&self) -> Result<&[f64]> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = jacobi_eigenvalues(&self.inner, DEFAULT_EIG_TOL)?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    /// `self + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut m = self.inner.clone();
        for i in 0..m.dim {
            m.data[i * m.dim + i] += Complex64::new(s, 0.0);
        }
        Self { inner: m, spectrum: OnceLock::new() }
    }

    /// `U^H A U` for a square `U` of matching dimension.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        let m = u.adjoint().matmul(&self.inner)?.matmul(u)?;
        let scale = 1.0 + self.inner.frobenius_norm();
        Self::from_matrix_with_tol(m, 1e-10 * scale)
    }
}

/// Result of a PSD test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub tolerance_used: f64,
}

/// Eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi rotations.
///
/// Iteration stops once the off-diagonal Frobenius mass drops to
/// `tol * ||A||_F`; running out of sweeps is an error carrying the residual.
pub fn eigenvalues_hermitian(a: &HermitianMatrix, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("eigensolver tolerance must be positive, got {tol}")));
    }
    jacobi_eigenvalues(&a.inner, tol)
}

fn off_diagonal_norm(a: &[Complex64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi_eigenvalues(m: &CMatrix, tol: f64) -> Result<Vec<f64>> {
    let n = m.dim;
    let mut a = m.data.clone();
    let scale = m.frobenius_norm();
    let zero = Complex64::new(0.0, 0.0);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, n) <= tol * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = a[p * n + q];
                let g_abs = g.norm();
                if g_abs == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * g_abs);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 { -t } else { t }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // phase rotates a_pq onto the positive real axis
                let d = (g / g_abs).conj();
                let dc = d.conj();

                // A <- A V with V = [[c, s], [-s d, c d]]
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * c - akq * d * s;
                    a[k * n + q] = akp * s + akq * d * c;
                }
                // A <- V^H A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * c - aqk * dc * s;
                    a[q * n + k] = apk * s + aqk * dc * c;
                }
                a[p * n + q] = zero;
                a[q * n + p] = zero;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
            }
        }
    }
    if !converged {
        let residual = off_diagonal_norm(&a, n);
        if residual > tol * scale {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS, residual });
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// PSD test: `min eigenvalue >= -tol * max(1, spectral radius)`.
pub fn is_psd(a: &HermitianMatrix, tol: f64) -> Result<PsdVerdict> {
    let spectrum = a.spectrum()?;
    let min_eigenvalue = spectrum[0];
    let radius = spectrum.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tolerance_used = tol * radius.max(1.0);
    Ok(PsdVerdict { is_psd: min_eigenvalue >= -tolerance_used, min_eigenvalue, tolerance_used })
}

/// Entrywise (Schur) product.
pub fn hadamard(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let data = a.inner.data.iter().zip(&b.inner.data).map(|(x, y)| x * y).collect();
    HermitianMatrix::new(a.dim(), data)
}

/// Determinant as the product of the eigenvalues.
pub fn determinant(a: &HermitianMatrix) -> Result<f64> {
    Ok(a.spectrum()?.iter().product())
}

/// Random unitary built as a product of complex Givens rotations.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let mut u = CMatrix::identity(dim);
    for _ in 0..2 {
        for p in 0..dim {
            for q in p + 1..dim {
                let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                let (s, c) = angle.sin_cos();
                // right-multiply by the rotation acting on columns p, q
                for k in 0..dim {
                    let ukp = u.get(k, p);
                    let ukq = u.get(k, q);
                    u.set(k, p, ukp * c - ukq * phase.conj() * s);
                    u.set(k, q, ukp * phase * s + ukq * c);
                }
            }
        }
    }
    u
}

/// Random complex matrix with entries uniform on `[-1, 1]^2`, row-major.
pub fn random_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<Complex64> {
    (0..rows * cols)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_and_identity_spectra() {
        let d = HermitianMatrix::diag(&[3.0, 1.0]);
        assert_eq!(eigenvalues_hermitian(&d, 1e-12).unwrap(), vec![1.0, 3.0]);
        let i = HermitianMatrix::identity(4);
        assert_eq!(eigenvalues_hermitian(&i, 1e-12).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn two_by_two_spectrum() {
        // characteristic polynomial (2 - l)^2 - 1 has roots 1 and 3
        let a = HermitianMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigenvalues_hermitian(&a, 1e-12).unwrap();
        assert!(close(e[0], 1.0, 1e-14) && close(e[1], 3.0, 1e-14), "{e:?}");
        assert!(close(determinant(&a).unwrap(), 3.0, 1e-13));
    }

    #[test]
    fn complex_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2
        let a = HermitianMatrix::new(
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        let e = eigenvalues_hermitian(&a, 1e-12).unwrap();
        assert!(close(e[0], 0.0, 1e-14) && close(e[1], 2.0, 1e-14), "{e:?}");
    }

    #[test]
    fn psd_verdicts() {
        let ones = HermitianMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let v = is_psd(&ones, DEFAULT_PSD_TOL).unwrap();
        assert!(v.is_psd && v.min_eigenvalue.abs() < 1e-14);

        let bad = HermitianMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let v = is_psd(&bad, DEFAULT_PSD_TOL).unwrap();
        assert!(!v.is_psd);
        assert!(close(v.min_eigenvalue, -1.0, 1e-13));
        assert_eq!(v.is_psd, v.min_eigenvalue >= -v.tolerance_used);
    }

    #[test]
    fn hadamard_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_complex(3, 3, &mut rng);
        let a = HermitianMatrix::gram(3, 3, &x).unwrap();
        let ones = HermitianMatrix::from_real(3, &[1.0; 9]).unwrap();
        assert_eq!(hadamard(&a, &ones).unwrap(), a);

        let p = HermitianMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let q = HermitianMatrix::diag(&[2.0, 2.0]);
        assert_eq!(hadamard(&p, &q).unwrap(), HermitianMatrix::diag(&[2.0, 2.0]));

        assert!(matches!(hadamard(&a, &q), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn determinant_examples() {
        assert!(close(determinant(&HermitianMatrix::identity(3)).unwrap(), 1.0, 1e-15));
        assert!(close(determinant(&HermitianMatrix::diag(&[2.0, 5.0])).unwrap(), 10.0, 1e-14));
    }

    #[test]
    fn construction_rejects_large_defect_and_repairs_small() {
        let bad = CMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).unwrap();
        assert!(matches!(HermitianMatrix::from_matrix(bad), Err(Error::NotHermitian { .. })));

        let tiny = CMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 4e-13, 1.0]]).unwrap();
        let h = HermitianMatrix::from_matrix(tiny).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0).conj());
    }

    #[test]
    fn json_round_trip_and_default_imaginary() {
        let text = r#"{"dim":2,"re":[[2,1],[1,2]]}"#;
        let h: HermitianMatrix = serde_json::from_str(text).unwrap();
        assert_eq!(h.get(0, 1), Complex64::new(1.0, 0.0));
        let back = serde_json::to_string(&h).unwrap();
        assert_eq!(back, r#"{"dim":2,"re":[[2.0,1.0],[1.0,2.0]]}"#);

        let ragged = r#"{"dim":2,"re":[[2,1],[1]]}"#;
        assert!(serde_json::from_str::<HermitianMatrix>(ragged).is_err());
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let z = HermitianMatrix::from_matrix(CMatrix::zeros(3)).unwrap();
        assert_eq!(eigenvalues_hermitian(&z, 1e-12).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn lu_determinant_of_permutation() {
        assert!(close(CMatrix::reversal(2).determinant_lu().re, -1.0, 0.0));
        assert!(close(CMatrix::reversal(3).determinant_lu().re, -1.0, 0.0));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(5, &mut rng);
        let prod = u.adjoint().matmul(&u).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }
}
