//! Thermodynamic-limit picture: the effective mass as a particle in the
//! cubic potential `V(μ) = (μ − r)(μ² − 2ε) + 2(μ − r)²`, and reduced models
//! that add a few explicitly tracked modes back on top of it.

use num_complex::Complex;

use crate::dynamics::{ModeEntry, SystemState};
use crate::error::{Error, Result};
use crate::integrator::{Scheme, Splitting, Stepper};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::sum::pairwise_sum_by;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalParams<T> {
    pub r: T,
    pub epsilon: T,
}

impl<T: Real> ClassicalParams<T> {
    pub fn new(r: T, epsilon: T) -> Self {
        Self { r, epsilon }
    }

    pub fn potential(&self, mu: T) -> T {
        let d = mu - self.r;
        d * (mu * mu - T::c(2.0) * self.epsilon) + T::c(2.0) * d * d
    }

    pub fn potential_derivative(&self, mu: T) -> T {
        T::c(3.0) * mu * mu - T::c(2.0) * self.r * mu - T::c(2.0) * self.epsilon
            + T::c(4.0) * (mu - self.r)
    }

    pub fn potential_second(&self, mu: T) -> T {
        T::c(6.0) * mu - T::c(2.0) * self.r + T::c(4.0)
    }

    /// Local maximum and local minimum of V, if V is not monotone.
    pub fn critical_points(&self) -> Option<(T, T)> {
        // V'(μ) = 3μ² + (4 − 2r)μ − (2ε + 4r)
        let b = T::c(4.0) - T::c(2.0) * self.r;
        let c = -(T::c(2.0) * self.epsilon + T::c(4.0) * self.r);
        let disc = b * b - T::c(12.0) * c;
        if !(disc > T::zero()) {
            return None;
        }
        let s = disc.sqrt();
        Some(((-b - s) / T::c(6.0), (-b + s) / T::c(6.0)))
    }

    /// Position of the minimum of V.
    pub fn minimum(&self) -> Option<T> {
        self.critical_points().map(|(_, min)| min)
    }

    /// Classical energy `ℰ = μ̇²/2 + V(μ)`.
    pub fn energy(&self, mu: T, mudot: T) -> T {
        T::c(0.5) * mudot * mudot + self.potential(mu)
    }
}

pub fn potential<T: Real>(mu: T, params: &ClassicalParams<T>) -> T {
    params.potential(mu)
}

pub fn potential_derivative<T: Real>(mu: T, params: &ClassicalParams<T>) -> T {
    params.potential_derivative(mu)
}

/// One period of `μ(t)` on a uniform grid, `t_k = k·T/(len − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSamples<T> {
    pub dt: T,
    pub mu: Vec<T>,
    pub mudot: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalOrbit<T> {
    pub params: ClassicalParams<T>,
    pub mu0: T,
    pub mudot0: T,
    pub energy: T,
    pub mu_minus: T,
    pub mu_plus: T,
    pub period: T,
    pub samples: OrbitSamples<T>,
}

/// Grid points per period used to tabulate an orbit.
pub const ORBIT_SAMPLES: usize = 4096;

struct Particle<T> {
    params: ClassicalParams<T>,
    mu: T,
    mudot: T,
}

impl<T: Real> Splitting<T> for Particle<T> {
    fn kick(&mut self, h: T) {
        self.mudot -= h * self.params.potential_derivative(self.mu);
    }

    fn drift(&mut self, h: T) {
        self.mu += h * self.mudot;
    }
}

fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> T {
    let flo = f(lo);
    for _ in 0..300 {
        let mid = T::c(0.5) * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            break;
        }
        if (f(mid) > T::zero()) == (flo > T::zero()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    T::c(0.5) * (lo + hi)
}

/// Builds the periodic orbit through `(mu0, mudot0)`.
pub fn make_orbit<T: Real>(params: ClassicalParams<T>, mu0: T, mudot0: T) -> Result<ClassicalOrbit<T>> {
    if !(mu0 > params.r) {
        return Err(Error::Precondition(format!(
            "orbit needs mu0 > r, got mu0 = {mu0}, r = {}",
            params.r
        )));
    }
    let energy = params.energy(mu0, mudot0);
    if energy > T::zero() {
        return Err(Error::NonPeriodic {
            energy: energy.as_f64(),
        });
    }
    let (mu_max, mu_min) = params.critical_points().ok_or(Error::NonPeriodic {
        energy: energy.as_f64(),
    })?;
    if !(mu0 > mu_max) || params.potential(mu_max) < energy {
        return Err(Error::NonPeriodic {
            energy: energy.as_f64(),
        });
    }
    let excess = |mu: T| params.potential(mu) - energy;
    let depth = energy - params.potential(mu_min);
    let (mu_minus, mu_plus) = if depth <= T::c(8.0) * T::epsilon() * T::one().max(energy.abs()) {
        // at the bottom of the well the roots are lost in rounding
        (mu_min, mu_min)
    } else {
        let tol = T::c(1e-12).max(T::c(4.0) * T::epsilon());
        let mut top = mu_min + T::one();
        while excess(top) < T::zero() {
            top = mu_min + (top - mu_min) * T::c(2.0);
        }
        (bisect(excess, mu_max, mu_min, tol), bisect(excess, mu_min, top, tol))
    };
    let period = orbit_period(&params, mu_minus, mu_plus, mu_min)?;
    let samples = tabulate(&params, mu0, mudot0, period, ORBIT_SAMPLES);
    Ok(ClassicalOrbit {
        params,
        mu0,
        mudot0,
        energy,
        mu_minus,
        mu_plus,
        period,
        samples,
    })
}

/// `T = 2∫ dμ/√(2(ℰ − V))` between the turning points. With
/// `ℰ − V = (μ − μ₋)(μ₊ − μ)(μ − μ₃)` and `μ = c + h sin θ` the square-root
/// endpoint singularities cancel and the integrand is smooth.
fn orbit_period<T: Real>(params: &ClassicalParams<T>, mu_minus: T, mu_plus: T, mu_min: T) -> Result<T> {
    let width = mu_plus - mu_minus;
    if width < T::c(1e-8) {
        return Ok(T::c(2.0) * T::PI() / params.potential_second(mu_min).sqrt());
    }
    let center = T::c(0.5) * (mu_plus + mu_minus);
    let half = T::c(0.5) * width;
    let third = params.r - T::c(2.0) - mu_minus - mu_plus;
    let tol = (1e-13f64).max(100.0 * T::epsilon().as_f64());
    let result = integrate(
        |theta: T| (T::c(2.0) * (center + half * theta.sin() - third)).sqrt().recip(),
        -T::FRAC_PI_2(),
        T::FRAC_PI_2(),
        QuadratureOptions {
            abs_tol: tol,
            ..Default::default()
        },
    )?;
    Ok(T::c(2.0) * result.value)
}

fn tabulate<T: Real>(params: &ClassicalParams<T>, mu0: T, mudot0: T, period: T, intervals: usize) -> OrbitSamples<T> {
    let dt = period / T::n(intervals);
    let stepper = Stepper::new(Scheme::Yoshida6, dt);
    let mut p = Particle {
        params: *params,
        mu: mu0,
        mudot: mudot0,
    };
    let mut mu = Vec::with_capacity(intervals + 1);
    let mut mudot = Vec::with_capacity(intervals + 1);
    mu.push(p.mu);
    mudot.push(p.mudot);
    for _ in 0..intervals {
        stepper.step(&mut p);
        mu.push(p.mu);
        mudot.push(p.mudot);
    }
    OrbitSamples { dt, mu, mudot }
}

impl<T: Real> ClassicalOrbit<T> {
    fn locate(&self, t: T) -> (usize, T) {
        let phase = t - (t / self.period).floor() * self.period;
        let x = phase / self.samples.dt;
        let last = self.samples.mu.len() - 2;
        let k = x.floor().to_usize().unwrap_or(0).min(last);
        (k, x - T::n(k))
    }

    /// `μ(t)` by cubic Hermite interpolation of the tabulated period.
    pub fn mu_at(&self, t: T) -> T {
        let (k, s) = self.locate(t);
        let h = self.samples.dt;
        hermite(
            self.samples.mu[k],
            self.samples.mu[k + 1],
            h * self.samples.mudot[k],
            h * self.samples.mudot[k + 1],
            s,
        )
    }

    /// `μ̇(t)` by cubic Hermite interpolation, using `μ̈ = −V'(μ)`.
    pub fn mudot_at(&self, t: T) -> T {
        let (k, s) = self.locate(t);
        let h = self.samples.dt;
        let acc = |mu: T| -self.params.potential_derivative(mu);
        hermite(
            self.samples.mudot[k],
            self.samples.mudot[k + 1],
            h * acc(self.samples.mu[k]),
            h * acc(self.samples.mu[k + 1]),
            s,
        )
    }

    /// Minimum of μ along the orbit.
    pub fn min_mu(&self) -> T {
        self.mu_minus
    }

    /// Return time measured by direct integration: the time for the phase
    /// angle of `(μ − μ_min, μ̇)` to wind once around the minimum of V.
    pub fn return_time(&self, steps_per_period: usize) -> T {
        let mu_min = self.params.minimum().expect("orbit has a minimum");
        let dt = self.period / T::n(steps_per_period);
        let stepper = Stepper::new(Scheme::Yoshida6, dt);
        let mut p = Particle {
            params: self.params,
            mu: self.mu0,
            mudot: self.mudot0,
        };
        let angle = |p: &Particle<T>| p.mudot.atan2(p.mu - mu_min);
        let two_pi = T::c(2.0) * T::PI();
        let mut prev = angle(&p);
        let mut wound = T::zero();
        let mut t = T::zero();
        loop {
            stepper.step(&mut p);
            let next = angle(&p);
            let mut delta = next - prev;
            if delta > T::PI() {
                delta -= two_pi;
            } else if delta < -T::PI() {
                delta += two_pi;
            }
            // the motion is clockwise, so the winding only decreases
            if (wound - delta) >= two_pi {
                let frac = (two_pi - wound) / (-delta);
                return t + frac * dt;
            }
            wound -= delta;
            prev = next;
            t += dt;
            if t > T::c(4.0) * self.period {
                return T::nan();
            }
        }
    }
}

fn hermite<T: Real>(y0: T, y1: T, m0: T, m1: T, s: T) -> T {
    let s2 = s * s;
    let s3 = s2 * s;
    let two = T::c(2.0);
    let three = T::c(3.0);
    (two * s3 - three * s2 + T::one()) * y0
        + (s3 - two * s2 + s) * m0
        + (-two * s3 + three * s2) * y1
        + (s3 - s2) * m1
}

/// Classical particle coupled to a handful of explicitly tracked modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel<T> {
    pub params: ClassicalParams<T>,
    pub lambda: T,
    pub n: usize,
    pub mu: T,
    pub mudot: T,
    pub modes: Vec<ModeEntry<T>>,
}

impl<T: Real> ReducedModel<T> {
    /// Single-particle picture: no tracked modes.
    pub fn particle(params: ClassicalParams<T>, mu0: T, mudot0: T) -> Self {
        Self {
            params,
            lambda: T::zero(),
            n: 1,
            mu: mu0,
            mudot: mudot0,
            modes: Vec::new(),
        }
    }

    /// Seeds the particle from `state` (its μ, μ̇ and ε) and tracks the
    /// entries whose half-spectrum index is listed in `tracked`.
    pub fn from_state(state: &SystemState<T>, tracked: &[usize]) -> Result<Self> {
        let modes = tracked
            .iter()
            .map(|&m| {
                state
                    .modes
                    .iter()
                    .find(|e| e.m == m)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("mode {m} is not tracked by the state")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: ClassicalParams::new(state.r, crate::dynamics::energy_per_particle(state)),
            lambda: state.lambda,
            n: state.n,
            mu: crate::dynamics::effective_mass(state),
            mudot: crate::dynamics::mass_derivative(state),
            modes,
        })
    }

    /// `deg·m_k/2 = 2λ·deg·𝒩(1 − ω²)/N`, the coupling of mode `k` in the μ equation.
    fn coupling(&self, mode: &ModeEntry<T>) -> T {
        T::c(2.0) * self.lambda * T::n(mode.degeneracy) * mode.occupation() * (T::one() - mode.omega_sq)
            / T::n(self.n)
    }

    /// Conserved energy `μ̇²/2 + V(μ) − Σ c_k(|ḟ|² + (μ + ω²)|f|²)`.
    pub fn energy(&self) -> T {
        let modes = pairwise_sum_by(self.modes.len(), |i| {
            let m = &self.modes[i];
            self.coupling(m) * (m.fdot.norm_sqr() + (self.mu + m.omega_sq) * m.f.norm_sqr())
        });
        self.params.energy(self.mu, self.mudot) - modes
    }

    /// `g(t)` carried by the tracked modes.
    pub fn drive(&self) -> T {
        pairwise_sum_by(self.modes.len(), |i| {
            let m = &self.modes[i];
            self.coupling(m) * m.f.norm_sqr()
        })
    }
}

struct ReducedSystem<T> {
    model: ReducedModel<T>,
    couplings: Vec<T>,
}

impl<T: Real> Splitting<T> for ReducedSystem<T> {
    fn kick(&mut self, h: T) {
        let m = &mut self.model;
        let g = pairwise_sum_by(m.modes.len(), |i| self.couplings[i] * m.modes[i].f.norm_sqr());
        m.mudot += h * (g - m.params.potential_derivative(m.mu));
        let mu = m.mu;
        for mode in m.modes.iter_mut() {
            mode.fdot -= mode.f * (h * (mu + mode.omega_sq));
        }
    }

    fn drift(&mut self, h: T) {
        let m = &mut self.model;
        m.mu += h * m.mudot;
        for mode in m.modes.iter_mut() {
            mode.f += mode.fdot * h;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory<T> {
    pub times: Vec<T>,
    pub mu: Vec<T>,
    pub mu_dot: Vec<T>,
    /// `|f|²` of each tracked mode per sample.
    pub amplitudes: Vec<Vec<T>>,
    pub max_rel_energy_drift: T,
    pub final_model: ReducedModel<T>,
}

/// Integrates `μ̈ = −V'(μ) + ½Σ m_k|f_k|²` together with
/// `f̈_k = −(μ + ω_k²) f_k` for the tracked modes.
pub fn evolve_reduced<T: Real>(
    model: &ReducedModel<T>,
    t_end: T,
    dt: T,
    sample_every: usize,
    scheme: Scheme,
) -> Result<ReducedTrajectory<T>> {
    if !(dt > T::zero()) || sample_every == 0 {
        return Err(Error::InvalidParameter("dt and sample_every must be positive".into()));
    }
    let couplings = model.modes.iter().map(|m| model.coupling(m)).collect();
    let mut sys = ReducedSystem {
        model: model.clone(),
        couplings,
    };
    let e0 = sys.model.energy();
    let steps = crate::dynamics::step_count(T::zero(), t_end, dt);
    let stepper = Stepper::new(scheme, dt);
    let mut out = ReducedTrajectory {
        times: Vec::new(),
        mu: Vec::new(),
        mu_dot: Vec::new(),
        amplitudes: vec![Vec::new(); model.modes.len()],
        max_rel_energy_drift: T::zero(),
        final_model: model.clone(),
    };
    let record = |out: &mut ReducedTrajectory<T>, sys: &ReducedSystem<T>, t: T| {
        out.times.push(t);
        out.mu.push(sys.model.mu);
        out.mu_dot.push(sys.model.mudot);
        for (amp, mode) in out.amplitudes.iter_mut().zip(&sys.model.modes) {
            amp.push(mode.f.norm_sqr());
        }
        let drift = (sys.model.energy() - e0).abs() / e0.abs().max(T::min_positive_value());
        out.max_rel_energy_drift = out.max_rel_energy_drift.max(drift);
    };
    record(&mut out, &sys, T::zero());
    for k in 1..=steps {
        stepper.step(&mut sys);
        if !sys.model.mu.is_finite() {
            return Err(Error::NumericalBlowup {
                time: (T::n(k) * dt).as_f64(),
                detail: "reduced model diverged".into(),
            });
        }
        if k % sample_every == 0 || k == steps {
            record(&mut out, &sys, T::n(k) * dt);
        }
    }
    out.final_model = sys.model;
    Ok(out)
}

/// Complex amplitude helper for tests and callers building modes by hand.
pub fn mode_entry<T: Real>(m: usize, degeneracy: usize, omega_sq: T, occupation: T, f: Complex<T>, fdot: Complex<T>) -> ModeEntry<T> {
    let occ = T::c(0.5) * (occupation - T::one());
    ModeEntry {
        m,
        degeneracy,
        omega_sq,
        occ_plus: occ,
        occ_minus: occ,
        f,
        fdot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_basics() {
        let p = ClassicalParams::<f64>::new(-1.0, 2.25);
        assert_eq!(p.potential(-1.0), 0.0);
        for mu in [-0.9, -0.3, 0.2, 1.1] {
            let h = 1e-4;
            let fd = (p.potential(mu + h) - p.potential(mu - h)) / (2.0 * h);
            assert!((fd - p.potential_derivative(mu)).abs() < 1e-6);
        }
        let (max, min) = p.critical_points().unwrap();
        assert!(p.potential_derivative(max).abs() < 1e-12);
        assert!(p.potential_derivative(min).abs() < 1e-12);
        assert!((min - (-6.0 + (24.0f64 * 2.25 - 12.0).sqrt()) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn reference_orbit() {
        let p = ClassicalParams::<f64>::new(-1.0, 1.2);
        let o = make_orbit(p, -0.7, 0.0).unwrap();
        assert!(o.energy <= 0.0);
        assert!((o.mu_minus + 0.7).abs() < 1e-10);
        assert!((p.potential(o.mu_plus) - o.energy).abs() < 1e-10);
        let n = o.samples.mu.len() - 1;
        assert!((o.samples.mu[n] - o.mu0).abs() + (o.samples.mudot[n] - o.mudot0).abs() < 1e-8);
        let rt = o.return_time(1 << 15);
        assert!(((rt - o.period) / o.period).abs() < 1e-6, "{rt} vs {}", o.period);
    }

    #[test]
    fn harmonic_limit() {
        let p = ClassicalParams::<f64>::new(-1.0, 2.25);
        let min = p.minimum().unwrap();
        let o = make_orbit(p, min, 0.0).unwrap();
        let expected = 2.0 * std::f64::consts::PI / p.potential_second(min).sqrt();
        assert!((o.period - expected).abs() < 1e-9, "{} vs {expected}", o.period);
    }

    #[test]
    fn rejects_unphysical_inputs() {
        let p = ClassicalParams::<f64>::new(-1.0, 1.2);
        assert!(matches!(make_orbit(p, -1.2, 0.0), Err(Error::Precondition(_))));
        assert!(matches!(make_orbit(p, -0.7, 3.0), Err(Error::NonPeriodic { .. })));
    }

    #[test]
    fn empty_reduced_model_follows_orbit() {
        let p = ClassicalParams::<f64>::new(-1.0, 1.2);
        let o = make_orbit(p, -0.7, 0.0).unwrap();
        let tr = evolve_reduced(&ReducedModel::particle(p, -0.7, 0.0), 10.0, 0.01, 10, Scheme::Yoshida6).unwrap();
        for (t, mu) in tr.times.iter().zip(&tr.mu) {
            assert!((o.mu_at(*t) - mu).abs() < 1e-8);
        }
        assert!(tr.max_rel_energy_drift < 1e-10);
    }
}
