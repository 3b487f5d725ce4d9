//! Block matrices `[A_ab]` with `m x m` complex blocks, their PSD tests,
//! spectral application of symmetric functions and structured generators.
//!
//! Block `(a, b)` occupies rows `a*m .. (a+1)*m` and columns `b*m .. (b+1)*m`
//! of the assembled `nm x nm` matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, is_psd, CMatrix, HermitianMatrix, MatrixJson, PsdVerdict};
use crate::symfun::SymmetricFunction;

/// Defect allowed before a block product counts as non-Hermitian.
pub const PRODUCT_HERMITIAN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockMatrixJson", into = "BlockMatrixJson")]
pub struct BlockMatrix {
    n: usize,
    m: usize,
    assembled: HermitianMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockMatrixJson {
    pub n: usize,
    pub m: usize,
    pub blocks: Vec<Vec<MatrixJson>>,
}

impl TryFrom<BlockMatrixJson> for BlockMatrix {
    type Error = Error;

    fn try_from(json: BlockMatrixJson) -> Result<Self> {
        if json.blocks.len() != json.n {
            return Err(Error::DimensionMismatch { expected: json.n, found: json.blocks.len() });
        }
        let mut blocks = Vec::with_capacity(json.n * json.n);
        for row in json.blocks {
            if row.len() != json.n {
                return Err(Error::DimensionMismatch { expected: json.n, found: row.len() });
            }
            for b in row {
                blocks.push(CMatrix::try_from(b)?);
            }
        }
        BlockMatrix::new(json.n, json.m, blocks)
    }
}

impl From<BlockMatrix> for BlockMatrixJson {
    fn from(b: BlockMatrix) -> Self {
        let blocks = (0..b.n).map(|i| (0..b.n).map(|j| b.block(i, j).into()).collect()).collect();
        BlockMatrixJson { n: b.n, m: b.m, blocks }
    }
}

impl BlockMatrix {
    /// Builds a block matrix from its `n x n` grid of blocks given row-major.
    ///
    /// The grid must be Hermitian (`A_ba = A_ab^H`) to within `1e-12`.
    pub fn new(n: usize, m: usize, blocks: Vec<CMatrix>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("block grid dimensions must be positive".into()));
        }
        if blocks.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: blocks.len() });
        }
        let size = n * m;
        let mut data = vec![Complex64::new(0.0, 0.0); size * size];
        for (k, block) in blocks.iter().enumerate() {
            if block.dim() != m {
                return Err(Error::DimensionMismatch { expected: m, found: block.dim() });
            }
            let (a, b) = (k / n, k % n);
            for i in 0..m {
                for j in 0..m {
                    data[(a * m + i) * size + b * m + j] = block.get(i, j);
                }
            }
        }
        let assembled = HermitianMatrix::new(size, data)?;
        Ok(Self { n, m, assembled })
    }

    pub fn from_assembled(n: usize, m: usize, assembled: HermitianMatrix) -> Result<Self> {
        if assembled.dim() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, found: assembled.dim() });
        }
        Ok(Self { n, m, assembled })
    }

    /// Grid with the same block everywhere.
    pub fn constant(n: usize, block: &CMatrix) -> Result<Self> {
        Self::new(n, block.dim(), vec![block.clone(); n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn assembled(&self) -> &HermitianMatrix {
        &self.assembled
    }

    pub fn block(&self, a: usize, b: usize) -> CMatrix {
        let m = self.m;
        let mut out = CMatrix::zeros(m);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.assembled.get(a * m + i, b * m + j));
            }
        }
        out
    }

    pub fn is_block_psd(&self, tol: f64) -> Result<PsdVerdict> {
        is_psd(&self.assembled, tol)
    }

    /// Every block plus `s I_m`; each block spectrum moves by exactly `s`.
    pub fn shift_blocks(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("shift must be nonnegative, got {s}")));
        }
        let blocks = (0..self.n * self.n)
            .map(|k| {
                let mut b = self.block(k / self.n, k % self.n);
                for i in 0..self.m {
                    b.set(i, i, b.get(i, i) + Complex64::new(s, 0.0));
                }
                b
            })
            .collect();
        Self::new(self.n, self.m, blocks)
    }
}

/// `[f(A_ab)]` for a grid whose blocks are all PSD.
pub fn apply_spectral(f: &SymmetricFunction, mat: &BlockMatrix, tol: f64) -> Result<HermitianMatrix> {
    let n = mat.n;
    let mut values = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let block = HermitianMatrix::from_matrix_with_tol(mat.block(a, b), PRODUCT_HERMITIAN_TOL)?;
            let v = f.eval_spectral(&block, tol)?;
            values[a * n + b] = v;
            values[b * n + a] = v;
        }
    }
    HermitianMatrix::from_real(n, &values)
}

/// `[det A_ab]`, Hermitian (and PSD whenever the grid is block-PSD).
pub fn block_det_matrix(mat: &BlockMatrix) -> Result<HermitianMatrix> {
    let n = mat.n;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for b in a..n {
            let d = mat.block(a, b).determinant_lu();
            if a == b {
                data[a * n + a] = Complex64::new(d.re, 0.0);
            } else {
                data[a * n + b] = d;
                data[b * n + a] = d.conj();
            }
        }
    }
    HermitianMatrix::new(n, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProductIssue {
    NotHermitian { row: usize, col: usize, defect: f64 },
    NotPsd { row: usize, col: usize, min_eigenvalue: f64 },
}

/// Entrywise block products `A_ab B_ab` and whether all of them are PSD.
#[derive(Clone, Debug)]
pub struct BlockProduct {
    pub n: usize,
    pub m: usize,
    pub products: Vec<CMatrix>,
    pub issues: Vec<ProductIssue>,
    hermitian: Vec<HermitianMatrix>,
}

impl BlockProduct {
    pub fn is_admissible(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn product(&self, a: usize, b: usize) -> &CMatrix {
        &self.products[a * self.n + b]
    }

    /// The Hermitian product grid; fails for inadmissible inputs.
    pub fn hermitian_grid(&self) -> Result<&[HermitianMatrix]> {
        match self.issues.first() {
            None => Ok(&self.hermitian),
            Some(ProductIssue::NotHermitian { defect, .. }) => {
                Err(Error::NotHermitian { defect: *defect, tolerance: PRODUCT_HERMITIAN_TOL })
            }
            Some(ProductIssue::NotPsd { min_eigenvalue, .. }) => {
                Err(Error::NotPsd { min_eigenvalue: *min_eigenvalue, tolerance: f64::NAN })
            }
        }
    }

    /// `[f(A_ab B_ab)]`.
    pub fn apply_spectral(&self, f: &SymmetricFunction, tol: f64) -> Result<HermitianMatrix> {
        let grid = self.hermitian_grid()?;
        let values = grid.iter().map(|p| f.eval_spectral(p, tol)).collect::<Result<Vec<f64>>>()?;
        let scale = values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let m = CMatrix::from_real(self.n, &values)?;
        HermitianMatrix::from_matrix_with_tol(m, 1e-9 * scale)
    }
}

pub fn block_product(ma: &BlockMatrix, mb: &BlockMatrix, tol: f64) -> Result<BlockProduct> {
    if ma.n != mb.n {
        return Err(Error::DimensionMismatch { expected: ma.n, found: mb.n });
    }
    if ma.m != mb.m {
        return Err(Error::DimensionMismatch { expected: ma.m, found: mb.m });
    }
    let n = ma.n;
    let mut products = Vec::with_capacity(n * n);
    let mut issues = Vec::new();
    let mut hermitian = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let p = ma.block(a, b).matmul(&mb.block(a, b))?;
            let scale = p.frobenius_norm().max(1.0);
            match HermitianMatrix::from_matrix_with_tol(p.clone(), PRODUCT_HERMITIAN_TOL * scale) {
                Ok(h) => {
                    let v = is_psd(&h, tol)?;
                    if !v.is_psd {
                        issues.push(ProductIssue::NotPsd { row: a, col: b, min_eigenvalue: v.min_eigenvalue });
                    }
                    hermitian.push(h);
                }
                Err(_) => {
                    issues.push(ProductIssue::NotHermitian { row: a, col: b, defect: p.hermitian_defect() })
                }
            }
            products.push(p);
        }
    }
    if !issues.is_empty() {
        hermitian.clear();
    }
    Ok(BlockProduct { n, m: ma.m, products, issues, hermitian })
}

/// `X^H X` for a random complex `X` of shape `(rank m) x (n m)`.
pub fn gen_random_gram(n: usize, m: usize, rank: usize, seed: u64) -> Result<BlockMatrix> {
    if rank == 0 {
        return Err(Error::InvalidParameter("rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = linalg::random_complex(rank * m, n * m, &mut rng);
    let g = HermitianMatrix::gram(rank * m, n * m, &x)?;
    BlockMatrix::from_assembled(n, m, g)
}

/// Random block-PSD matrix whose blocks are themselves PSD:
/// `sum_k (g_k g_k^T) (x) P_k` with `g_k >= 0` entrywise and `P_k` a random Gram matrix.
pub fn gen_random_psd_blocks<R: Rng + ?Sized>(n: usize, m: usize, terms: usize, rng: &mut R) -> Result<BlockMatrix> {
    let mut blocks = vec![CMatrix::zeros(m); n * n];
    for _ in 0..terms.max(1) {
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rank = rng.gen_range(1..=m);
        let y = linalg::random_complex(rank, m, rng);
        let p = HermitianMatrix::gram(rank, m, &y)?;
        for a in 0..n {
            for b in 0..n {
                let w = Complex64::new(g[a] * g[b], 0.0);
                let blk = &mut blocks[a * n + b];
                for i in 0..m {
                    for j in 0..m {
                        blk.set(i, j, blk.get(i, j) + w * p.get(i, j));
                    }
                }
            }
        }
    }
    BlockMatrix::new(n, m, blocks)
}

fn nonneg_gram<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let rank = rng.gen_range(1..=n);
    let v: Vec<Vec<f64>> = (0..rank).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.5)).collect()).collect();
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            g[a * n + b] = v.iter().map(|row| row[a] * row[b]).sum();
        }
    }
    g
}

/// Random pair `([A_ab], [B_ab])` of block-PSD matrices whose block products
/// are all PSD.
///
/// All blocks are diagonal in one random unitary basis `U`; coordinate `k`
/// of the diagonals forms an entrywise nonnegative PSD matrix in `(a, b)`.
/// With probability one third `B` is the all-identity grid.
pub fn gen_admissible_pair<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<(BlockMatrix, BlockMatrix)> {
    let u = linalg::random_unitary(m, rng);
    let uh = u.adjoint();
    let grid = |coords: &[Vec<f64>]| -> Result<BlockMatrix> {
        let mut blocks = Vec::with_capacity(n * n);
        for ab in 0..n * n {
            let d: Vec<f64> = coords.iter().map(|g| g[ab]).collect();
            blocks.push(u.matmul(&CMatrix::diag(&d))?.matmul(&uh)?);
        }
        // rounding in U D U^H leaves a tiny Hermitian defect on the grid
        BlockMatrix::new_lenient(n, m, blocks)
    };
    let a_coords: Vec<Vec<f64>> = (0..m).map(|_| nonneg_gram(n, rng)).collect();
    let identity_b = rng.gen_range(0..3) == 0;
    let b_coords: Vec<Vec<f64>> =
        if identity_b { vec![vec![1.0; n * n]; m] } else { (0..m).map(|_| nonneg_gram(n, rng)).collect() };
    let ma = grid(&a_coords)?;
    let mb = if identity_b { BlockMatrix::constant(n, &CMatrix::identity(m))? } else { grid(&b_coords)? };
    Ok((ma, mb))
}

impl BlockMatrix {
    fn new_lenient(n: usize, m: usize, blocks: Vec<CMatrix>) -> Result<Self> {
        let size = n * m;
        let mut data = vec![Complex64::new(0.0, 0.0); size * size];
        for (k, block) in blocks.iter().enumerate() {
            let (a, b) = (k / n, k % n);
            for i in 0..m {
                for j in 0..m {
                    data[(a * m + i) * size + b * m + j] = block.get(i, j);
                }
            }
        }
        let raw = CMatrix::new(size, data)?;
        let scale = raw.frobenius_norm().max(1.0);
        let assembled = HermitianMatrix::from_matrix_with_tol(raw, 1e-12 * scale)?;
        Ok(Self { n, m, assembled })
    }
}

/// The family `[diag(x_k + t_k a_{k,b} a_{k,c})_k]_{b,c}` with `a` given as
/// `m` rows of `n` positive entries.
pub fn gen_lemma4_family(x: &[f64], t: &[f64], a: &[Vec<f64>]) -> Result<BlockMatrix> {
    let m = x.len();
    if t.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: t.len() });
    }
    if a.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: a.len() });
    }
    let n = a.first().map_or(0, Vec::len);
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("node rows must have equal length".into()));
    }
    if x.iter().chain(t).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("x and t must be nonnegative".into()));
    }
    if a.iter().flatten().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("nodes a must be positive".into()));
    }
    let mut blocks = Vec::with_capacity(n * n);
    for b in 0..n {
        for c in 0..n {
            let d: Vec<f64> = (0..m).map(|k| x[k] + t[k] * a[k][b] * a[k][c]).collect();
            blocks.push(CMatrix::diag(&d));
        }
    }
    BlockMatrix::new(n, m, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues_hermitian, DEFAULT_PSD_TOL};

    #[test]
    fn identity_blocks_are_block_psd() {
        let m = BlockMatrix::constant(2, &CMatrix::identity(2)).unwrap();
        let e = eigenvalues_hermitian(m.assembled(), 1e-14).unwrap();
        let expect = [0.0, 0.0, 2.0, 2.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{e:?}");
        }
        assert!(m.is_block_psd(DEFAULT_PSD_TOL).unwrap().is_psd);
        assert_eq!(m.block(1, 0), CMatrix::identity(2));
    }

    #[test]
    fn indefinite_single_block() {
        let m = BlockMatrix::new(1, 2, vec![CMatrix::diag(&[1.0, -1.0])]).unwrap();
        assert!(!m.is_block_psd(DEFAULT_PSD_TOL).unwrap().is_psd);
    }

    #[test]
    fn non_hermitian_grid_is_rejected() {
        let a = CMatrix::from_rows(&[vec![0.0, 1.0], vec![0.1, 0.0]]).unwrap();
        let blocks = vec![CMatrix::identity(2), a.clone(), a, CMatrix::identity(2)];
        assert!(matches!(BlockMatrix::new(2, 2, blocks), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn spectral_application_examples() {
        let gram = gen_random_gram(3, 2, 2, 5).unwrap();
        let one = SymmetricFunction::constant(2, 1.0);
        // off-diagonal Gram blocks are not Hermitian, so f cannot see them
        assert!(apply_spectral(&one, &gram, 1e-9).is_err());

        let psd_blocks = gen_random_psd_blocks(3, 2, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let r = apply_spectral(&one, &psd_blocks, 1e-9).unwrap();
        assert_eq!(r, HermitianMatrix::from_real(3, &[1.0; 9]).unwrap());

        let d = BlockMatrix::constant(2, &CMatrix::diag(&[1.0, 2.0])).unwrap();
        let r = apply_spectral(&SymmetricFunction::product(2), &d, 1e-9).unwrap();
        assert_eq!(r, HermitianMatrix::from_real(2, &[2.0; 4]).unwrap());

        let fam = gen_lemma4_family(&[0.0, 0.0], &[1.0, 1.0], &[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = apply_spectral(&SymmetricFunction::sum(2), &fam, 1e-9).unwrap();
        assert_eq!(r, HermitianMatrix::from_real(2, &[2.0; 4]).unwrap());
    }

    #[test]
    fn determinant_grid_examples() {
        let ones = BlockMatrix::constant(3, &CMatrix::identity(2)).unwrap();
        assert_eq!(block_det_matrix(&ones).unwrap(), HermitianMatrix::from_real(3, &[1.0; 9]).unwrap());

        let single = BlockMatrix::new(1, 2, vec![CMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()]).unwrap();
        let d = block_det_matrix(&single).unwrap();
        assert!((d.get(0, 0).re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn block_product_examples() {
        let a = BlockMatrix::new(1, 2, vec![CMatrix::diag(&[1.0, 2.0])]).unwrap();
        let b = BlockMatrix::new(1, 2, vec![CMatrix::diag(&[3.0, 4.0])]).unwrap();
        let p = block_product(&a, &b, 1e-9).unwrap();
        assert!(p.is_admissible());
        assert_eq!(p.product(0, 0), &CMatrix::diag(&[3.0, 8.0]));

        let a = BlockMatrix::new(1, 2, vec![CMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap()]).unwrap();
        let b = BlockMatrix::new(1, 2, vec![CMatrix::diag(&[1.0, 0.0])]).unwrap();
        let p = block_product(&a, &b, 1e-9).unwrap();
        assert!(!p.is_admissible());
        assert_eq!(p.product(0, 0), &CMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 0.0]]).unwrap());
        assert!(matches!(p.issues[0], ProductIssue::NotHermitian { row: 0, col: 0, .. }));
        assert!(p.apply_spectral(&SymmetricFunction::sum(2), 1e-9).is_err());

        let c = BlockMatrix::constant(2, &CMatrix::identity(2)).unwrap();
        assert!(matches!(block_product(&a, &c, 1e-9), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gram_generator_is_deterministic() {
        let a = gen_random_gram(3, 2, 6, 42).unwrap();
        let b = gen_random_gram(3, 2, 6, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.is_block_psd(1e-9).unwrap().is_psd);
        let single = gen_random_gram(1, 3, 1, 9).unwrap();
        assert!(is_psd(single.assembled(), 1e-9).unwrap().is_psd);
        assert!(gen_random_gram(2, 2, 0, 1).is_err());
    }

    #[test]
    fn lemma4_family_examples() {
        let x = [0.5, 1.5];
        let fam = gen_lemma4_family(&x, &[0.0, 0.0], &[vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 1.0]]).unwrap();
        for b in 0..3 {
            for c in 0..3 {
                assert_eq!(fam.block(b, c), CMatrix::diag(&x));
            }
        }
        assert!(fam.is_block_psd(1e-9).unwrap().is_psd);

        let fam = gen_lemma4_family(&[0.0], &[1.0], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(fam.assembled(), &HermitianMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap());
        let v = fam.is_block_psd(1e-9).unwrap();
        assert!(v.is_psd && v.min_eigenvalue.abs() < 1e-14);

        let fam = gen_lemma4_family(&[1.0, 1.0], &[0.7, 2.0], &[vec![0.3, 1.2], vec![2.0, 0.5]]).unwrap();
        for b in 0..2 {
            let h = HermitianMatrix::from_matrix(fam.block(b, b)).unwrap();
            assert!(h.spectrum().unwrap()[0] >= 1.0);
        }

        assert!(gen_lemma4_family(&[-1.0], &[1.0], &[vec![1.0]]).is_err());
        assert!(gen_lemma4_family(&[1.0], &[1.0], &[vec![0.0]]).is_err());
    }

    #[test]
    fn shift_examples() {
        let m = gen_random_gram(2, 2, 2, 3).unwrap();
        assert_eq!(m.shift_blocks(0.0).unwrap(), m);

        let d = BlockMatrix::new(1, 2, vec![CMatrix::diag(&[1.0, 2.0])]).unwrap();
        assert_eq!(d.shift_blocks(0.5).unwrap().block(0, 0), CMatrix::diag(&[1.5, 2.5]));
        assert!(d.shift_blocks(-0.1).is_err());
    }

    #[test]
    fn admissible_pairs_have_psd_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=3);
            let (a, b) = gen_admissible_pair(n, m, &mut rng).unwrap();
            assert!(a.is_block_psd(1e-9).unwrap().is_psd);
            assert!(b.is_block_psd(1e-9).unwrap().is_psd);
            assert!(block_product(&a, &b, 1e-9).unwrap().is_admissible());
        }
    }

    #[test]
    fn json_round_trip() {
        let m = gen_lemma4_family(&[1.0, 0.0], &[1.0, 2.0], &[vec![1.0, 2.0], vec![0.5, 1.0]]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with(r#"{"n":2,"m":2,"blocks":[[{"dim":2"#));
        let back: BlockMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
