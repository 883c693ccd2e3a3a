//! Von Neumann entropy of an interval of `ℓ` sites from the Gaussian
//! covariance matrix of the chain.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::dynamics::{Representation, SystemState};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetric_eigenvalues};
use crate::sum::pairwise_sum_by;
use crate::Real;

/// Real parts of the equal-time correlators at distances `d = 0..ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSet<T> {
    pub ell: usize,
    pub phi_phi: Vec<T>,
    pub pi_pi: Vec<T>,
    pub phi_pi: Vec<T>,
}

impl<T: Real> CorrelatorSet<T> {
    /// `⟨Φ²⟩⟨Π²⟩ − Re⟨ΦΠ⟩²` on a single site; at least 1/4 for a physical state.
    pub fn uncertainty(&self) -> T {
        self.phi_phi[0] * self.pi_pi[0] - self.phi_pi[0] * self.phi_pi[0]
    }

    /// Correlators of a state in which `m = 0` carries `(f0, ḟ0)` and every
    /// other mode the high-energy amplitude `(f_π, ḟ_π)`, keeping only the
    /// on-site part of the `f_π` contribution.
    pub fn from_resonant_pair(
        f0: Complex<T>,
        f0dot: Complex<T>,
        fpi: Complex<T>,
        fpidot: Complex<T>,
        n: usize,
        ell: usize,
    ) -> Self {
        let inv = T::one() / (T::c(2.0) * T::n(n));
        let half = T::c(0.5);
        let build = |uniform: T, local: T| -> Vec<T> {
            (0..ell)
                .map(|d| uniform * inv + if d == 0 { half * local } else { T::zero() })
                .collect()
        };
        Self {
            ell,
            phi_phi: build(f0.norm_sqr(), fpi.norm_sqr()),
            pi_pi: build(f0dot.norm_sqr(), fpidot.norm_sqr()),
            phi_pi: build((f0 * f0dot.conj()).re, (fpi * fpidot.conj()).re),
        }
    }
}

/// Correlators `(1/2N) Σ_m deg·𝒩·X_m cos(2πmd/N)` with `X = |f|²`, `|ḟ|²`
/// and `Re(f ḟ*)`.
///
/// The lumped entry of a bundled state stands for every untracked momentum,
/// so it enters with the exact complement weight
/// `Σ_{m untracked} deg·cos(2πmd/N) = N δ_{d0} − Σ_{m tracked} deg·cos(2πmd/N)`.
pub fn correlators<T: Real>(state: &SystemState<T>, ell: usize) -> Result<CorrelatorSet<T>> {
    if ell == 0 || ell > state.n {
        return Err(Error::InvalidParameter(format!(
            "interval length {ell} must be in 1..={}",
            state.n
        )));
    }
    let n = state.n;
    let cos = |j: usize| -> T {
        let j = j % n;
        (T::c(2.0) * T::PI() * T::n(j) / T::n(n)).cos()
    };
    let (tracked, bundle) = match state.representation {
        Representation::Full => (&state.modes[..], None),
        Representation::Bundled { .. } => {
            let (last, rest) = state.modes.split_last().expect("bundled state has modes");
            (rest, Some(last))
        }
    };
    let inv = T::one() / (T::c(2.0) * T::n(n));
    let mut out = CorrelatorSet {
        ell,
        phi_phi: Vec::with_capacity(ell),
        pi_pi: Vec::with_capacity(ell),
        phi_pi: Vec::with_capacity(ell),
    };
    for d in 0..ell {
        let weight = |i: usize| T::n(tracked[i].degeneracy) * cos(tracked[i].m * d);
        let term = |i: usize, x: T| weight(i) * tracked[i].occupation() * x;
        let mut pp = pairwise_sum_by(tracked.len(), |i| term(i, tracked[i].f.norm_sqr()));
        let mut qq = pairwise_sum_by(tracked.len(), |i| term(i, tracked[i].fdot.norm_sqr()));
        let mut pq = pairwise_sum_by(tracked.len(), |i| term(i, (tracked[i].f * tracked[i].fdot.conj()).re));
        if let Some(b) = bundle {
            let delta = if d % n == 0 { T::n(n) } else { T::zero() };
            let c = (delta - pairwise_sum_by(tracked.len(), weight)) * b.occupation();
            pp += c * b.f.norm_sqr();
            qq += c * b.fdot.norm_sqr();
            pq += c * (b.f * b.fdot.conj()).re;
        }
        out.phi_phi.push(pp * inv);
        out.pi_pi.push(qq * inv);
        out.phi_pi.push(pq * inv);
    }
    Ok(out)
}

/// `2ℓ × 2ℓ` covariance of the interval in `(Φ₁..Φ_ℓ, Π₁..Π_ℓ)` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCovariance<T> {
    pub ell: usize,
    /// Row-major `2ℓ × 2ℓ` matrix.
    pub gamma: Vec<T>,
}

impl<T: Real> ReducedCovariance<T> {
    pub fn dim(&self) -> usize {
        2 * self.ell
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.gamma[i * self.dim() + j]
    }

    /// Covariance from an explicit row-major `2ℓ × 2ℓ` matrix.
    pub fn from_matrix(ell: usize, gamma: Vec<T>) -> Result<Self> {
        if gamma.len() != 4 * ell * ell {
            return Err(Error::ShapeMismatch {
                expected: 4 * ell * ell,
                got: gamma.len(),
            });
        }
        Ok(Self { ell, gamma })
    }
}

/// Assembles the Toeplitz blocks `[[Q, R], [R, P]]`. Positive definiteness is
/// checked by [`symplectic_spectrum`], which needs the Cholesky factor anyway.
pub fn reduced_covariance<T: Real>(corr: &CorrelatorSet<T>) -> ReducedCovariance<T> {
    let ell = corr.ell;
    let dim = 2 * ell;
    let mut gamma = vec![T::zero(); dim * dim];
    for i in 0..ell {
        for j in 0..ell {
            let d = i.abs_diff(j);
            gamma[i * dim + j] = corr.phi_phi[d];
            gamma[(i + ell) * dim + (j + ell)] = corr.pi_pi[d];
            gamma[i * dim + (j + ell)] = corr.phi_pi[d];
            gamma[(i + ell) * dim + j] = corr.phi_pi[d];
        }
    }
    ReducedCovariance { ell, gamma }
}

/// Checks positive definiteness of γ.
pub fn check_positive_definite<T: Real>(gamma: &ReducedCovariance<T>) -> Result<()> {
    cholesky(&gamma.gamma, gamma.dim())
        .map(|_| ())
        .ok_or(Error::NotPositiveDefinite)
}

/// Symplectic eigenvalues: the square roots of the `2ℓ` eigenvalues of
/// `−(Jγ)²`, which come in equal pairs. All `2ℓ` values are kept, in
/// descending order, so that [`entropy`] is the sum of `s(σ)` over the full
/// spectrum of `−(Jγ)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum<T> {
    pub sigmas: Vec<T>,
}

impl<T: Real> SymplecticSpectrum<T> {
    /// One value per symplectic pair (`ℓ` values, descending).
    pub fn per_mode(&self) -> Vec<T> {
        self.sigmas.iter().step_by(2).copied().collect()
    }

    pub fn min_sigma(&self) -> T {
        self.sigmas.last().copied().unwrap_or(T::c(0.5))
    }
}

/// Tolerance below 1/2 within which symplectic eigenvalues are clamped.
pub const SIGMA_CLAMP: f64 = 1e-9;

fn finish_spectrum<T: Real>(squares: Vec<T>) -> Result<SymplecticSpectrum<T>> {
    let half = T::c(0.5);
    let mut sigmas = Vec::with_capacity(squares.len());
    for s2 in squares {
        let sigma = s2.max(T::zero()).sqrt();
        if sigma < half - T::c(SIGMA_CLAMP) {
            return Err(Error::UncertaintyViolation {
                min_sigma: sigma.as_f64(),
            });
        }
        sigmas.push(sigma.max(half));
    }
    sigmas.sort_by(|a, b| b.partial_cmp(a).expect("finite sigma"));
    Ok(SymplecticSpectrum { sigmas })
}

/// Symplectic spectrum via `γ = L Lᵀ` and the antisymmetric `K = Lᵀ J L`,
/// whose squared singular values (eigenvalues of `KᵀK = −K²`) are the `σ²`.
pub fn symplectic_spectrum<T: Real>(gamma: &ReducedCovariance<T>) -> Result<SymplecticSpectrum<T>> {
    let dim = gamma.dim();
    let ell = gamma.ell;
    let l = cholesky(&gamma.gamma, dim).ok_or(Error::NotPositiveDefinite)?;
    // J L: rows 0..ℓ take +L[ℓ+i], rows ℓ..2ℓ take −L[i]
    let mut jl = vec![T::zero(); dim * dim];
    for i in 0..ell {
        for j in 0..dim {
            jl[i * dim + j] = l[(i + ell) * dim + j];
            jl[(i + ell) * dim + j] = -l[i * dim + j];
        }
    }
    // K = Lᵀ (J L)
    let mut k = vec![T::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = T::zero();
            // L is lower triangular: L[p][i] vanishes for p < i
            for p in i..dim {
                acc += l[p * dim + i] * jl[p * dim + j];
            }
            k[i * dim + j] = acc;
        }
    }
    // KᵀK, symmetrized against rounding
    let mut ktk = vec![T::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = T::zero();
            for p in 0..dim {
                acc += k[p * dim + i] * k[p * dim + j];
            }
            ktk[i * dim + j] = acc;
            ktk[j * dim + i] = acc;
        }
    }
    finish_spectrum(symmetric_eigenvalues(&ktk, dim))
}

/// Independent route: `γ^{1/2} (iJ) γ^{1/2}` is Hermitian with eigenvalues
/// `±σ`, diagonalized in double precision by nalgebra. No Cholesky factor
/// and no squaring.
pub fn symplectic_spectrum_general<T: Real>(gamma: &ReducedCovariance<T>) -> Result<SymplecticSpectrum<f64>> {
    let dim = gamma.dim();
    let ell = gamma.ell;
    let g = DMatrix::from_fn(dim, dim, |i, j| gamma.get(i, j).as_f64());
    let eig = g.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let root_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let root = (&eig.eigenvectors * root_diag * eig.eigenvectors.transpose()).map(|x| Complex::new(x, 0.0));
    let mut ij = DMatrix::<Complex<f64>>::zeros(dim, dim);
    for i in 0..ell {
        ij[(i, i + ell)] = Complex::new(0.0, 1.0);
        ij[(i + ell, i)] = Complex::new(0.0, -1.0);
    }
    let h = &root * ij * &root;
    let values = h.symmetric_eigenvalues();
    finish_spectrum(values.iter().map(|v| v * v).collect())
}

/// `s(σ) = (σ + ½) ln(σ + ½) − (σ − ½) ln(σ − ½)`, with `s(½) = 0`.
pub fn entropy_term<T: Real>(sigma: T) -> T {
    let half = T::c(0.5);
    let plus = sigma + half;
    let minus = sigma - half;
    let upper = plus * plus.ln();
    if minus <= T::zero() {
        upper
    } else {
        upper - minus * minus.ln()
    }
}

/// Entropy in nats, `Σ s(σ)` over the spectrum.
pub fn entropy<T: Real>(spectrum: &SymplecticSpectrum<T>) -> T {
    pairwise_sum_by(spectrum.sigmas.len(), |i| entropy_term(spectrum.sigmas[i]))
}

/// `Δ` with `NΔ = |f_π ḟ₀|² + |f₀ ḟ_π|² − 2 Re(f₀ ḟ₀*) Re(f_π ḟ_π*)`.
pub fn closed_form_delta<T: Real>(
    f0: Complex<T>,
    f0dot: Complex<T>,
    fpi: Complex<T>,
    fpidot: Complex<T>,
    n: usize,
) -> T {
    let cross = (fpi * f0dot).norm_sqr() + (f0 * fpidot).norm_sqr();
    let mixed = T::c(2.0) * (f0 * f0dot.conj()).re * (fpi * fpidot.conj()).re;
    (cross - mixed) / T::n(n)
}

/// Single-resonance entropy
/// `(x + 1) ln((x + 1)/2) − (x − 1) ln((x − 1)/2)` with `x = √(1 + ℓΔ)`.
pub fn closed_form_entropy<T: Real>(delta: T, ell: usize) -> T {
    let x = (T::one() + T::n(ell) * delta).sqrt();
    let two = T::c(2.0);
    let upper = (x + T::one()) * ((x + T::one()) / two).ln();
    let lower = x - T::one();
    if lower <= T::zero() {
        upper
    } else {
        upper - lower * (lower / two).ln()
    }
}

/// Entropy and smallest symplectic eigenvalue of an interval of `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySample<T> {
    pub entropy: T,
    pub min_sigma: T,
}

pub fn interval_entropy<T: Real>(state: &SystemState<T>, ell: usize) -> Result<EntropySample<T>> {
    let corr = correlators(state, ell)?;
    let spectrum = symplectic_spectrum(&reduced_covariance(&corr))?;
    Ok(EntropySample {
        entropy: entropy(&spectrum),
        min_sigma: spectrum.min_sigma(),
    })
}
