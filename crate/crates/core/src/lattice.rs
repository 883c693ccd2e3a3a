//! Couplings and dispersion relations on a periodic chain.
//!
//! Modes are stored on the half spectrum `m = 0..=N/2`; mode `m` stands for
//! the pair `±k`, `k = 2πm/N`, so every entry carries a degeneracy of 2
//! except `m = 0` and `m = N/2`.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, QuadratureOptions};
use crate::sum::{pairwise_sum, pairwise_sum_by};
use crate::Real;

/// Above this size the coupling transform switches from a direct sum to an FFT.
const DIRECT_SUM_MAX_N: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingKind {
    /// `t_r ∝ r^{-α}` with `0 < α < 1`.
    StrongLongRange { alpha: f64 },
    /// All-to-all coupling, the `α = 0` limit.
    Flat,
    /// Nearest-neighbor hopping, the `α → ∞` limit.
    NearestNeighbor,
}

impl CouplingKind {
    pub fn strong_long_range(alpha: f64) -> Result<Self> {
        let kind = CouplingKind::StrongLongRange { alpha };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CouplingKind::StrongLongRange { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::AlphaOutOfRange(alpha))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable<T> {
    pub kind: CouplingKind,
    pub n: usize,
    /// `ω_m²` for `m = 0..=N/2`.
    pub omega_sq: Vec<T>,
    pub degeneracy: Vec<usize>,
    /// `T(0)`, the sum of the unnormalized couplings over one half of the ring.
    pub kac_norm: T,
}

pub(crate) fn half_spectrum_degeneracy(n: usize) -> Vec<usize> {
    (0..=n / 2)
        .map(|m| if m == 0 || 2 * m == n { 1 } else { 2 })
        .collect()
}

/// Builds the finite-`N` dispersion `ω_m² = 1 − T(m)/T(0)`.
pub fn build_dispersion<T: Real>(kind: CouplingKind, n: usize) -> Result<DispersionTable<T>> {
    kind.validate()?;
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidSize(n));
    }
    let half = n / 2;
    let degeneracy = half_spectrum_degeneracy(n);
    let (omega_sq, kac_norm) = match kind {
        CouplingKind::Flat => {
            let mut w = vec![T::one(); half + 1];
            w[0] = T::zero();
            (w, T::n(n - 1))
        }
        CouplingKind::NearestNeighbor => {
            let w = (0..=half)
                .map(|m| T::one() - cos_2pi_fraction::<T>(m, n))
                .collect();
            (w, T::one())
        }
        CouplingKind::StrongLongRange { alpha } => {
            let alpha = T::c(alpha);
            let coupling: Vec<T> = (1..=half).map(|r| T::n(r).powf(-alpha)).collect();
            let t0 = pairwise_sum(&coupling);
            let tm = if n <= DIRECT_SUM_MAX_N {
                coupling_transform_direct(&coupling, n)
            } else {
                coupling_transform_fft(&coupling, n)
            };
            let mut w: Vec<T> = tm.iter().map(|&t| T::one() - t / t0).collect();
            w[0] = T::zero();
            (w, t0)
        }
    };
    Ok(DispersionTable {
        kind,
        n,
        omega_sq,
        degeneracy,
        kac_norm,
    })
}

/// `cos(2π j / N)` with the argument reduced exactly in integers.
fn cos_2pi_fraction<T: Real>(j: usize, n: usize) -> T {
    let j = j % n;
    (T::c(2.0) * T::PI() * T::n(j) / T::n(n)).cos()
}

fn coupling_transform_direct<T: Real>(coupling: &[T], n: usize) -> Vec<T> {
    let cos_table: Vec<T> = (0..n).map(|j| cos_2pi_fraction(j, n)).collect();
    (0..=n / 2)
        .into_par_iter()
        .map(|m| pairwise_sum_by(coupling.len(), |i| coupling[i] * cos_table[(m * (i + 1)) % n]))
        .collect()
}

fn coupling_transform_fft<T: Real>(coupling: &[T], n: usize) -> Vec<T> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (i, &c) in coupling.iter().enumerate() {
        buf[i + 1] = Complex::new(c, T::zero());
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|z| z.re).collect()
}

impl<T: Real> DispersionTable<T> {
    /// Number of half-spectrum entries, `N/2 + 1`.
    pub fn len(&self) -> usize {
        self.omega_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_sq.is_empty()
    }

    /// Lattice momentum `k = 2πm/N`.
    pub fn momentum(&self, m: usize) -> T {
        T::c(2.0) * T::PI() * T::n(m) / T::n(self.n)
    }

    /// `(1/N) Σ_m deg(m) G(ω_m²)`.
    pub fn average<G: Fn(T) -> T>(&self, g: G) -> T {
        pairwise_sum_by(self.len(), |m| T::n(self.degeneracy[m]) * g(self.omega_sq[m])) / T::n(self.n)
    }
}

/// `(1/N) Σ_m deg(m) values[m]` for per-mode values `values[m] = G(ω_m²)`.
pub fn spectral_average<T: Real>(values: &[T], table: &DispersionTable<T>) -> Result<T> {
    if values.len() != table.len() {
        return Err(Error::ShapeMismatch {
            expected: table.len(),
            got: values.len(),
        });
    }
    Ok(pairwise_sum_by(values.len(), |m| T::n(table.degeneracy[m]) * values[m]) / T::n(table.n))
}

/// Thermodynamic-limit dispersion `ω²(m) = 1 − c_α ∫₀^{1/2} cos(2πsm) s^{-α} ds`
/// with `c_α = (1−α) 2^{1−α}`, evaluated to absolute accuracy `1e-10`
/// (or a hundred ulps for scalars coarser than that).
pub fn continuum_dispersion<T: Real>(alpha: T, m: usize) -> Result<T> {
    let tol = (100.0 * T::epsilon().as_f64()).max(1e-10);
    continuum_dispersion_with_tol(alpha, m, tol)
}

pub fn continuum_dispersion_with_tol<T: Real>(alpha: T, m: usize, abs_tol: f64) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::AlphaOutOfRange(alpha.as_f64()));
    }
    if m == 0 {
        return Ok(T::zero());
    }
    // s = u^{1/(1-α)} turns s^{-α} ds into du/(1-α) and removes the endpoint
    // singularity: c_α ∫ ... = 2^{1-α} ∫₀^{2^{α-1}} cos(2πm u^{1/(1-α)}) du.
    let one = T::one();
    let p = one / (one - alpha);
    let upper = T::c(2.0).powf(alpha - one);
    let prefactor = T::c(2.0).powf(one - alpha);
    let freq = T::c(2.0) * T::PI() * T::n(m);
    // one seed interval per half oscillation in s
    let pieces = m;
    let points: Vec<T> = (0..=pieces)
        .map(|j| {
            let s = T::c(0.5) * T::n(j) / T::n(pieces);
            s.powf(one - alpha)
        })
        .collect();
    debug_assert!((points[pieces] - upper).abs() <= T::c(1e-6) * upper);
    let opts = QuadratureOptions {
        abs_tol: abs_tol / prefactor.as_f64(),
        max_intervals: 64 * (pieces + 16),
    };
    let integral = integrate_pieces(|u: T| (freq * u.powf(p)).cos(), &points, opts)?;
    Ok(one - prefactor * integral.value)
}

/// Continuum frequencies for `m = 0..=m_max`.
pub fn continuum_table<T: Real>(alpha: T, m_max: usize) -> Result<Vec<T>> {
    (0..=m_max)
        .into_par_iter()
        .map(|m| continuum_dispersion(alpha, m))
        .collect()
}

/// Exponent `ζ = min(1, 2 − 2α)` of the leading finite-size correction to
/// spectral averages, `⟨G(ω²)⟩ − G(1) ∼ N^{-ζ}`.
pub fn correction_exponent<T: Real>(alpha: T) -> T {
    T::one().min(T::c(2.0) - T::c(2.0) * alpha)
}
