//! Planted covariance matrices shared by the test targets.

use lrq_core::entanglement::ReducedCovariance;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Mat = Vec<Vec<f64>>;

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
}

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Random symplectic matrix in `(x₁..x_ℓ, p₁..p_ℓ)` ordering, built from
/// symmetric shears and a block-diagonal `U ⊕ U^{-T}` with `U` a product of
/// Givens rotations and positive scalings.
pub fn random_symplectic(ell: usize, rng: &mut ChaCha8Rng) -> Mat {
    let dim = 2 * ell;
    let shear = |rng: &mut ChaCha8Rng, lower: bool| {
        let mut s = identity(dim);
        for i in 0..ell {
            for j in i..ell {
                let v = rng.gen_range(-0.4..0.4);
                let (r, c) = if lower { (ell + i, j) } else { (i, ell + j) };
                let (r2, c2) = if lower { (ell + j, i) } else { (j, ell + i) };
                s[r][c] = v;
                s[r2][c2] = v;
            }
        }
        s
    };
    let mut u = identity(ell);
    for _ in 0..ell {
        let (i, j) = (rng.gen_range(0..ell), rng.gen_range(0..ell));
        if i == j {
            continue;
        }
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut g = identity(ell);
        g[i][i] = th.cos();
        g[j][j] = th.cos();
        g[i][j] = th.sin();
        g[j][i] = -th.sin();
        u = mat_mul(&g, &u);
    }
    let scale: Vec<f64> = (0..ell).map(|_| rng.gen_range(0.6..1.6)).collect();
    let mut block = vec![vec![0.0; dim]; dim];
    for i in 0..ell {
        for j in 0..ell {
            // U = diag(scale)·rotation, U^{-T} = diag(1/scale)·rotation
            block[i][j] = scale[i] * u[i][j];
            block[ell + i][ell + j] = u[i][j] / scale[i];
        }
    }
    let a = shear(rng, true);
    let b = shear(rng, false);
    mat_mul(&mat_mul(&a, &block), &b)
}

pub fn planted(ell: usize, sigmas: &[f64], rng: &mut ChaCha8Rng) -> ReducedCovariance<f64> {
    let dim = 2 * ell;
    let s = random_symplectic(ell, rng);
    let mut d = vec![vec![0.0; dim]; dim];
    for i in 0..ell {
        d[i][i] = sigmas[i];
        d[ell + i][ell + i] = sigmas[i];
    }
    let gamma = mat_mul(&mat_mul(&s, &d), &transpose(&s));
    ReducedCovariance::from_matrix(ell, gamma.into_iter().flatten().collect()).unwrap()
}
