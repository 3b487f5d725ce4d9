//! Block-PSD matrices: Schur products, the matrix of block determinants and
//! blockwise spectral application.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specpreserve::blockpsd::{apply_spectral, block_det_matrix, block_product, gen_admissible_pair, gen_random_psd_blocks};
use specpreserve::linalg::{hadamard, is_psd};
use specpreserve::symfun::SymmetricFunction;
use specpreserve::Result;

pub fn run() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mat = gen_random_psd_blocks(3, 2, 2, &mut rng)?;
    println!("3x3 grid of 2x2 blocks, block-PSD: {:?}", mat.is_block_psd(1e-9)?);

    let dets = block_det_matrix(&mat)?;
    println!("[det A_ab] min eigenvalue: {:e}", dets.spectrum()?[0]);

    let schur = hadamard(mat.assembled(), mat.assembled())?;
    println!("A o A is PSD: {}", is_psd(&schur, 1e-9)?.is_psd);

    for (label, f) in [("sum", SymmetricFunction::sum(2)), ("product", SymmetricFunction::product(2))] {
        let out = apply_spectral(&f, &mat, 1e-9)?;
        println!("[{label}(A_ab)] min eigenvalue: {:e}", out.spectrum()?[0]);
    }

    let (a, b) = gen_admissible_pair(3, 2, &mut rng)?;
    let products = block_product(&a, &b, 1e-9)?;
    println!("admissible block products: {}", products.is_admissible());
    let diag = SymmetricFunction::diagonal(2, vec![0.0, 1.0, 0.25])?;
    let out = products.apply_spectral(&diag, 1e-9)?;
    println!("[f(A_ab B_ab)] for a series in x1 x2, min eigenvalue: {:e}", out.spectrum()?[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
