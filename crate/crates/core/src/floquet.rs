//! Floquet analysis of the Hill equations `f̈ + (μ(t) + ω²) f = 0` driven by
//! a periodic effective mass.

use rayon::prelude::*;

use crate::classical::ClassicalOrbit;
use crate::error::{Error, Result};
use crate::integrator::{Scheme, Splitting, Stepper};
use crate::Real;

/// One-period propagator; column `j` holds `(f, ḟ)(T)` for the initial
/// condition `e_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy<T> {
    pub c: [[T; 2]; 2],
    pub period: T,
}

impl<T: Real> Monodromy<T> {
    pub fn trace(&self) -> T {
        self.c[0][0] + self.c[1][1]
    }

    pub fn det(&self) -> T {
        self.c[0][0] * self.c[1][1] - self.c[0][1] * self.c[1][0]
    }

    /// `|det C − 1|` relative to `max(1, ‖C‖²_F)`, the size of the rounding
    /// error in `det` for a strongly growing mode.
    pub fn det_deviation(&self) -> T {
        let norm_sq = self.c.iter().flatten().fold(T::zero(), |acc, &x| acc + x * x);
        (self.det() - T::one()).abs() / norm_sq.max(T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityClass<T> {
    /// Multipliers `e^{±iνT}` on the unit circle.
    Stable { quasi_frequency: T },
    /// Real multipliers `±e^{±κT}`.
    Resonant { kappa: T },
    Marginal,
}

impl<T: Real> StabilityClass<T> {
    pub fn is_resonant(&self) -> bool {
        matches!(self, StabilityClass::Resonant { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            StabilityClass::Stable { .. } => "stable",
            StabilityClass::Resonant { .. } => "resonant",
            StabilityClass::Marginal => "marginal",
        }
    }

    /// κ for resonant modes, the quasi-frequency for stable ones, NaN otherwise.
    pub fn rate(&self) -> T {
        match *self {
            StabilityClass::Stable { quasi_frequency } => quasi_frequency,
            StabilityClass::Resonant { kappa } => kappa,
            StabilityClass::Marginal => T::nan(),
        }
    }
}

pub const DEFAULT_ETA: f64 = 1e-9;
/// Largest [`Monodromy::det_deviation`] accepted by [`classify`].
pub const DET_TOLERANCE: f64 = 1e-6;

/// Classifies by `|Tr C|` against 2 with a marginal band of half-width `eta`.
pub fn classify<T: Real>(mono: &Monodromy<T>, eta: T) -> Result<StabilityClass<T>> {
    if !(mono.det_deviation() <= T::c(DET_TOLERANCE)) {
        return Err(Error::InvalidMonodromy { det: mono.det().as_f64() });
    }
    let tr = mono.trace();
    let two = T::c(2.0);
    Ok(if tr.abs() > two + eta {
        StabilityClass::Resonant {
            kappa: (tr.abs() / two).acosh() / mono.period,
        }
    } else if tr.abs() < two - eta {
        StabilityClass::Stable {
            quasi_frequency: (tr / two).acos() / mono.period,
        }
    } else {
        StabilityClass::Marginal
    })
}

/// The kicks and drifts of a splitting integration of `ẍ = −a(t) x` over one
/// period, with `a` already evaluated at every kick. Kicks and drifts
/// alternate, starting and ending with a kick. Applying it to a shifted
/// coefficient `a + ω²` costs only a few multiplications per kick.
#[derive(Debug, Clone)]
pub struct HillSchedule<T> {
    period: T,
    kicks: Vec<T>,
    drive: Vec<T>,
    drifts: Vec<T>,
}

/// Records the drive at every kick while stepping an underlying system.
struct Recorder<'a, T, S> {
    inner: S,
    value: &'a dyn Fn(&S) -> T,
    schedule: HillSchedule<T>,
}

impl<T: Real, S: Splitting<T>> Splitting<T> for Recorder<'_, T, S> {
    fn kick(&mut self, h: T) {
        // back-to-back kicks act at the same position and merge into one
        if self.schedule.kicks.len() > self.schedule.drifts.len() {
            *self.schedule.kicks.last_mut().expect("pending kick") += h;
        } else {
            self.schedule.kicks.push(h);
            self.schedule.drive.push((self.value)(&self.inner));
        }
        self.inner.kick(h);
    }

    fn drift(&mut self, h: T) {
        self.schedule.drifts.push(h);
        self.inner.drift(h);
    }
}

struct Clock<T>(T);

impl<T: Real> Splitting<T> for Clock<T> {
    fn kick(&mut self, _h: T) {}
    fn drift(&mut self, h: T) {
        self.0 += h;
    }
}

struct Particle<T> {
    orbit_params: crate::classical::ClassicalParams<T>,
    mu: T,
    mudot: T,
}

impl<T: Real> Splitting<T> for Particle<T> {
    fn kick(&mut self, h: T) {
        self.mudot -= h * self.orbit_params.potential_derivative(self.mu);
    }
    fn drift(&mut self, h: T) {
        self.mu += h * self.mudot;
    }
}

fn steps_for<T: Real>(period: T, dt: T) -> Result<(usize, T)> {
    if !(period > T::zero() && dt > T::zero()) {
        return Err(Error::InvalidParameter("period and dt must be positive".into()));
    }
    let n = (period / dt * (T::one() - T::c(1e-12))).ceil().to_usize().unwrap_or(1).max(1);
    Ok((n, period / T::n(n)))
}

impl<T: Real> HillSchedule<T> {
    fn record<S: Splitting<T>>(inner: S, value: &dyn Fn(&S) -> T, period: T, dt: T, scheme: Scheme) -> Result<Self> {
        let (n, h) = steps_for(period, dt)?;
        let mut rec = Recorder {
            inner,
            value,
            schedule: HillSchedule {
                period,
                kicks: Vec::new(),
                drive: Vec::new(),
                drifts: Vec::new(),
            },
        };
        let stepper = Stepper::new(scheme, h);
        for _ in 0..n {
            stepper.step(&mut rec);
        }
        Ok(rec.schedule)
    }

    /// Schedule for an explicit coefficient `a(t)`.
    pub fn from_fn<F: Fn(T) -> T>(a: F, period: T, dt: T, scheme: Scheme) -> Result<Self> {
        Self::record(Clock(T::zero()), &|c: &Clock<T>| a(c.0), period, dt, scheme)
    }

    /// Schedule for `a(t) = μ(t)` along a classical orbit. The orbit is
    /// integrated jointly with the same scheme, so μ is exact at every kick
    /// up to the integrator's own error.
    pub fn from_orbit(orbit: &ClassicalOrbit<T>, dt: T, scheme: Scheme) -> Result<Self> {
        let particle = Particle {
            orbit_params: orbit.params,
            mu: orbit.mu0,
            mudot: orbit.mudot0,
        };
        Self::record(particle, &|p: &Particle<T>| p.mu, orbit.period, dt, scheme)
    }

    /// Störmer–Verlet schedule for `a` sampled at `t_k = k·T/n`, `k = 0..n`.
    pub fn from_samples(samples: &[T], period: T) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InvalidParameter("no samples".into()));
        }
        let h = period / T::n(n);
        let mut kicks = Vec::with_capacity(n + 1);
        let mut drive = Vec::with_capacity(n + 1);
        let mut drifts = Vec::with_capacity(n);
        for k in 0..n {
            kicks.push(if k == 0 { T::c(0.5) * h } else { h });
            drive.push(samples[k]);
            drifts.push(h);
        }
        kicks.push(T::c(0.5) * h);
        drive.push(samples[0]);
        Ok(Self {
            period,
            kicks,
            drive,
            drifts,
        })
    }

    pub fn period(&self) -> T {
        self.period
    }

    /// Smallest drive value seen at the kicks.
    pub fn min_drive(&self) -> T {
        self.drive.iter().copied().fold(T::infinity(), T::min)
    }

    /// Monodromy of `ẍ = −(a(t) + shift) x`.
    pub fn monodromy(&self, shift: T) -> Monodromy<T> {
        let (mut x1, mut v1, mut x2, mut v2) = (T::one(), T::zero(), T::zero(), T::one());
        let mut drifts = self.drifts.iter();
        for (&k, &a) in self.kicks.iter().zip(&self.drive) {
            let c = k * (a + shift);
            v1 -= c * x1;
            v2 -= c * x2;
            if let Some(&d) = drifts.next() {
                x1 += d * v1;
                x2 += d * v2;
            }
        }
        Monodromy {
            c: [[x1, x2], [v1, v2]],
            period: self.period,
        }
    }
}

/// Monodromy of `f̈ + a(t) f = 0` for a `period`-periodic `a`.
pub fn monodromy<T: Real, F: Fn(T) -> T>(a: F, period: T, dt: T, scheme: Scheme) -> Result<Monodromy<T>> {
    Ok(HillSchedule::from_fn(a, period, dt, scheme)?.monodromy(T::zero()))
}

/// Monodromy for `a` given on the periodic grid `t_k = k·T/n`, integrated
/// with Störmer–Verlet at the grid spacing.
pub fn monodromy_sampled<T: Real>(samples: &[T], period: T) -> Result<Monodromy<T>> {
    Ok(HillSchedule::from_samples(samples, period)?.monodromy(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetOptions<T> {
    pub dt: T,
    pub scheme: Scheme,
    pub eta: T,
}

impl<T: Real> Default for FloquetOptions<T> {
    fn default() -> Self {
        Self {
            dt: T::c(0.01),
            scheme: Scheme::Yoshida6,
            eta: T::c(DEFAULT_ETA),
        }
    }
}

/// Raw monodromy of mode `ω²` along `orbit`.
pub fn mode_monodromy<T: Real>(orbit: &ClassicalOrbit<T>, omega_sq: T, opts: &FloquetOptions<T>) -> Result<Monodromy<T>> {
    Ok(HillSchedule::from_orbit(orbit, opts.dt, opts.scheme)?.monodromy(omega_sq))
}

/// True when `μ(t) + ω² > 0` along the whole orbit, in which case the mode
/// cannot resonate.
pub fn passes_positivity<T: Real>(orbit: &ClassicalOrbit<T>, omega_sq: T) -> bool {
    orbit.min_mu() + omega_sq > T::zero()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeReport<T> {
    pub m: usize,
    pub omega_sq: T,
    pub trace: T,
    pub det: T,
    pub det_deviation: T,
    pub class: StabilityClass<T>,
    /// The mode passed the positivity filter and is Stable regardless of its trace.
    pub filtered: bool,
}

fn report<T: Real>(
    schedule: &HillSchedule<T>,
    orbit: &ClassicalOrbit<T>,
    m: usize,
    omega_sq: T,
    eta: T,
) -> Result<ModeReport<T>> {
    let mono = schedule.monodromy(omega_sq);
    let filtered = passes_positivity(orbit, omega_sq);
    let raw = classify(&mono, eta)?;
    let class = if filtered && !matches!(raw, StabilityClass::Stable { .. }) {
        let cos = (mono.trace() / T::c(2.0)).max(-T::one()).min(T::one());
        StabilityClass::Stable {
            quasi_frequency: cos.acos() / mono.period,
        }
    } else {
        raw
    };
    Ok(ModeReport {
        m,
        omega_sq,
        trace: mono.trace(),
        det: mono.det(),
        det_deviation: mono.det_deviation(),
        class,
        filtered,
    })
}

/// Stability of the mode with frequency `ω²` along `orbit`. Modes with
/// `μ(t) + ω² > 0` throughout are reported Stable.
pub fn mode_stability<T: Real>(
    orbit: &ClassicalOrbit<T>,
    omega_sq: T,
    opts: &FloquetOptions<T>,
) -> Result<StabilityClass<T>> {
    let schedule = HillSchedule::from_orbit(orbit, opts.dt, opts.scheme)?;
    Ok(report(&schedule, orbit, 0, omega_sq, opts.eta)?.class)
}

/// Per-mode reports for `omega_sq[m]`, `m = 0..omega_sq.len()`.
pub fn resonance_report<T: Real>(
    orbit: &ClassicalOrbit<T>,
    omega_sq: &[T],
    opts: &FloquetOptions<T>,
) -> Result<Vec<ModeReport<T>>> {
    let schedule = HillSchedule::from_orbit(orbit, opts.dt, opts.scheme)?;
    omega_sq
        .par_iter()
        .enumerate()
        .map(|(m, &w2)| report(&schedule, orbit, m, w2, opts.eta))
        .collect()
}

/// Sorted list of resonant `m ≤ m_max`. Frequencies come from `omega_sq`,
/// which must cover `0..=m_max` (continuum or finite-N values).
pub fn count_resonances<T: Real>(
    orbit: &ClassicalOrbit<T>,
    omega_sq: &[T],
    m_max: usize,
    opts: &FloquetOptions<T>,
) -> Result<Vec<usize>> {
    if omega_sq.len() <= m_max {
        return Err(Error::ShapeMismatch {
            expected: m_max + 1,
            got: omega_sq.len(),
        });
    }
    // positivity filter first: only modes dipping below zero are integrated
    let schedule = HillSchedule::from_orbit(orbit, opts.dt, opts.scheme)?;
    let hits: Vec<Option<usize>> = (0..=m_max)
        .into_par_iter()
        .map(|m| {
            if passes_positivity(orbit, omega_sq[m]) {
                return Ok(None);
            }
            let class = classify(&schedule.monodromy(omega_sq[m]), opts.eta)?;
            Ok(class.is_resonant().then_some(m))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().collect())
}
