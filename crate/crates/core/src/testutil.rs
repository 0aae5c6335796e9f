use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::sync::Arc;

use crate::base::CStarBase;
use crate::kernel::{self, Tolerance};
use crate::module::CStarModule;
use crate::opspace::OperatorSpace;
use crate::scalar::CMat;

pub type M = CMat<f64>;

pub fn tol() -> Tolerance<f64> {
    Tolerance::default()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> M {
    DMatrix::from_fn(rows, cols, |_, _| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> M {
    random(rng, n, n).qr().q()
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn rank_oracle(vectors: &[M]) -> usize {
    let mut a: Vec<Vec<Complex<f64>>> = vectors.iter().map(|m| m.iter().copied().collect()).collect();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..a.len()).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm())) else {
            break;
        };
        if a[p][col].norm() < 1e-9 {
            continue;
        }
        a.swap(rank, p);
        for r in 0..a.len() {
            if r != rank {
                let f = a[r][col] / a[rank][col];
                for k in 0..cols {
                    let v = a[rank][k];
                    a[r][k] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Bundle module over a diagonal base: `H = ⊕_z ℂ^{n_z}`, `β` the block-column maps.
pub fn bundle_module(base: &Arc<CStarBase<f64>>, dims: &[usize]) -> CStarModule<f64> {
    let h: usize = dims.iter().sum();
    let mut basis = Vec::new();
    let mut off = 0;
    for (z, &n) in dims.iter().enumerate() {
        for i in 0..n {
            basis.push(kernel::unit(h, dims.len(), off + i, z));
        }
        off += n;
    }
    CStarModule::new(base.clone(), OperatorSpace::from_orthonormal(h, dims.len(), basis), &tol()).unwrap()
}
