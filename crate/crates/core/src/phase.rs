//! Classification of the `(ε, μ(0))` plane by which modes resonate along the
//! classical orbit.

use rayon::prelude::*;

use crate::classical::{make_orbit, ClassicalParams};
use crate::error::{Error, Result};
use crate::floquet::{classify, passes_positivity, HillSchedule, StabilityClass, DEFAULT_ETA};
use crate::integrator::Scheme;
use crate::lattice::{build_dispersion, continuum_table, CouplingKind};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseClass {
    NonPhysical,
    Classical,
    ResonantZero,
    MultiResonant { count: usize },
    MarginalBoundary,
}

impl PhaseClass {
    pub fn code(&self) -> u8 {
        match self {
            PhaseClass::NonPhysical => 0,
            PhaseClass::Classical => 1,
            PhaseClass::ResonantZero => 2,
            PhaseClass::MultiResonant { .. } => 3,
            PhaseClass::MarginalBoundary => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PhaseClass::NonPhysical => "non-physical",
            PhaseClass::Classical => "classical",
            PhaseClass::ResonantZero => "resonant-zero",
            PhaseClass::MultiResonant { .. } => "multi-resonant",
            PhaseClass::MarginalBoundary => "marginal",
        }
    }

    pub fn is_physical(&self) -> bool {
        !matches!(self, PhaseClass::NonPhysical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T> {
    pub epsilon: T,
    pub mu0: T,
    pub class: PhaseClass,
    /// Resonant momenta `m ≤ m_max`, ascending.
    pub resonant: Vec<usize>,
    /// `m_max` itself resonates, so the count is only a lower bound.
    pub saturated: bool,
    /// Largest [`Monodromy::det_deviation`](crate::floquet::Monodromy::det_deviation)
    /// over the integrated monodromies.
    pub max_det_deviation: T,
}

impl<T> PhasePoint<T> {
    pub fn resonant_count(&self) -> usize {
        self.resonant.len()
    }
}

/// Which mode frequencies the scan uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequencies {
    Continuum,
    Finite { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions<T> {
    pub m_max: usize,
    pub dt: T,
    pub scheme: Scheme,
    pub eta: T,
    pub frequencies: Frequencies,
}

impl<T: Real> Default for PhaseOptions<T> {
    fn default() -> Self {
        Self {
            m_max: 64,
            dt: T::c(0.01),
            scheme: Scheme::Yoshida6,
            eta: T::c(DEFAULT_ETA),
            frequencies: Frequencies::Continuum,
        }
    }
}

/// `ω²_m` for `m = 0..=m_max` under the chosen frequency source.
pub fn mode_frequencies<T: Real>(alpha: T, opts: &PhaseOptions<T>) -> Result<Vec<T>> {
    match opts.frequencies {
        Frequencies::Continuum => continuum_table(alpha, opts.m_max),
        Frequencies::Finite { n } => {
            let table = build_dispersion::<T>(CouplingKind::strong_long_range(alpha.as_f64())?, n)?;
            if table.len() <= opts.m_max {
                return Err(Error::InvalidParameter(format!(
                    "m_max = {} exceeds the N/2 = {} momenta of the finite chain",
                    opts.m_max,
                    table.len() - 1
                )));
            }
            Ok(table.omega_sq[..=opts.m_max].to_vec())
        }
    }
}

fn non_physical<T: Real>(epsilon: T, mu0: T) -> PhasePoint<T> {
    PhasePoint {
        epsilon,
        mu0,
        class: PhaseClass::NonPhysical,
        resonant: Vec::new(),
        saturated: false,
        max_det_deviation: T::zero(),
    }
}

/// Classifies one point given precomputed frequencies `omega_sq[0..=m_max]`.
pub fn classify_with_frequencies<T: Real>(
    r: T,
    epsilon: T,
    mu0: T,
    mudot0: T,
    omega_sq: &[T],
    opts: &PhaseOptions<T>,
) -> Result<PhasePoint<T>> {
    let params = ClassicalParams::new(r, epsilon);
    let physical = mu0 > r
        && mu0 * mu0 < T::c(2.0) * epsilon
        && params.minimum().is_some_and(|min| mu0 <= min)
        && params.energy(mu0, mudot0) <= T::zero();
    if !physical {
        return Ok(non_physical(epsilon, mu0));
    }
    let orbit = match make_orbit(params, mu0, mudot0) {
        Ok(orbit) => orbit,
        Err(Error::NonPeriodic { .. }) | Err(Error::Precondition(_)) => return Ok(non_physical(epsilon, mu0)),
        Err(e) => return Err(e),
    };
    let schedule = HillSchedule::from_orbit(&orbit, opts.dt, opts.scheme)?;
    let m_max = opts.m_max.min(omega_sq.len().saturating_sub(1));
    let mut max_det_deviation = T::zero();
    let classes: Vec<Option<StabilityClass<T>>> = (0..=m_max)
        .map(|m| {
            if passes_positivity(&orbit, omega_sq[m]) {
                return Ok(None);
            }
            let mono = schedule.monodromy(omega_sq[m]);
            max_det_deviation = max_det_deviation.max(mono.det_deviation());
            classify(&mono, opts.eta).map(Some)
        })
        .collect::<Result<_>>()?;
    let resonant: Vec<usize> = classes
        .iter()
        .enumerate()
        .filter_map(|(m, c)| c.as_ref().filter(|c| c.is_resonant()).map(|_| m))
        .collect();
    let marginal = classes.iter().any(|c| matches!(c, Some(StabilityClass::Marginal)));
    let class = match resonant.as_slice() {
        [] if marginal => PhaseClass::MarginalBoundary,
        [] => PhaseClass::Classical,
        [0] => PhaseClass::ResonantZero,
        _ => PhaseClass::MultiResonant { count: resonant.len() },
    };
    Ok(PhasePoint {
        epsilon,
        mu0,
        class,
        saturated: resonant.last() == Some(&m_max) && m_max > 0,
        resonant,
        max_det_deviation,
    })
}

/// Classifies `(ε, μ(0))` with `μ̇(0) = 0`.
pub fn classify_point<T: Real>(r: T, alpha: T, epsilon: T, mu0: T, opts: &PhaseOptions<T>) -> Result<PhasePoint<T>> {
    let omega_sq = mode_frequencies(alpha, opts)?;
    classify_with_frequencies(r, epsilon, mu0, T::zero(), &omega_sq, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    pub r: T,
    pub alpha: T,
    pub epsilons: Vec<T>,
    pub mu0s: Vec<T>,
    /// Row-major in `(epsilon, mu0)`.
    pub points: Vec<PhasePoint<T>>,
    pub options: PhaseOptions<T>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn get(&self, i_eps: usize, i_mu: usize) -> &PhasePoint<T> {
        &self.points[i_eps * self.mu0s.len() + i_mu]
    }

    /// Number of cells in each class code `0..=4`.
    pub fn class_counts(&self) -> [usize; 5] {
        let mut counts = [0; 5];
        for p in &self.points {
            counts[p.class.code() as usize] += 1;
        }
        counts
    }

    pub fn saturated_cells(&self) -> usize {
        self.points.iter().filter(|p| p.saturated).count()
    }
}

fn axis<T: Real>(range: (T, T), count: usize) -> Vec<T> {
    if count == 1 {
        return vec![range.0];
    }
    let step = (range.1 - range.0) / T::n(count - 1);
    (0..count).map(|i| range.0 + step * T::n(i)).collect()
}

/// Classifies a `resolution.0 × resolution.1` grid. A resolution of 1 on an
/// axis uses the lower end of its range.
pub fn scan<T: Real>(
    r: T,
    alpha: T,
    eps_range: (T, T),
    mu0_range: (T, T),
    resolution: (usize, usize),
    opts: &PhaseOptions<T>,
) -> Result<PhaseGrid<T>> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let omega_sq = mode_frequencies(alpha, opts)?;
    let epsilons = axis(eps_range, resolution.0);
    let mu0s = axis(mu0_range, resolution.1);
    let points = (0..epsilons.len() * mu0s.len())
        .into_par_iter()
        .map(|idx| {
            let eps = epsilons[idx / mu0s.len()];
            let mu0 = mu0s[idx % mu0s.len()];
            classify_with_frequencies(r, eps, mu0, T::zero(), &omega_sq, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseGrid {
        r,
        alpha,
        epsilons,
        mu0s,
        points,
        options: *opts,
    })
}
