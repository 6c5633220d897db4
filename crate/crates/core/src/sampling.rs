//! Seeded random matrices for the fuzz suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::HermitianMatrix;

/// Entry scales mixed uniformly so draws cover both the neighbourhood of the
/// singular set and the far field.
pub const SCALES: [f64; 3] = [0.1, 1.0, 10.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-seed for shard `k` of a run seeded with `seed`.
pub fn shard_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn pick_scale<R: Rng>(rng: &mut R) -> f64 {
    SCALES[rng.random_range(0..SCALES.len())]
}

fn unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// Hermitian matrix with entries uniform in `[-scale, scale]` (real and
/// imaginary parts independently off the diagonal).
pub fn hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> HermitianMatrix {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = Complex64::new(scale * unit(rng), 0.0);
        for k in j + 1..n {
            let z = Complex64::new(scale * unit(rng), scale * unit(rng));
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// Hermitian matrix drawn at a scale picked from [`SCALES`].
pub fn hermitian_mixed<R: Rng>(rng: &mut R, n: usize) -> HermitianMatrix {
    let s = pick_scale(rng);
    hermitian(rng, n, s)
}

/// `(n+1) x (n+1)` space-time matrix; with `singular` the first row and
/// column are zeroed so the draw lies in `S`.
pub fn space_time<R: Rng>(rng: &mut R, n: usize, singular: bool) -> HermitianMatrix {
    let a = hermitian_mixed(rng, n + 1);
    if !singular {
        return a;
    }
    let plus = a.trailing().expect("n >= 1");
    HermitianMatrix::bordered(0.0, &vec![Complex64::new(0.0, 0.0); n], &plus).expect("dimension checked")
}

/// Positive semidefinite `G G^*` with `G` of random rank in `1..=n`.
pub fn psd<R: Rng>(rng: &mut R, n: usize) -> HermitianMatrix {
    let rank = rng.random_range(1..=n);
    let s = pick_scale(rng);
    let g = DMatrix::from_fn(n, rank, |_, _| Complex64::new(s * unit(rng), s * unit(rng)));
    HermitianMatrix::symmetrized(&g * g.adjoint())
}

pub fn complex_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(scale * unit(rng), scale * unit(rng))).collect()
}
