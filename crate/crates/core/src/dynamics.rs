//! Microscopic state of the large-n chain and its self-consistent evolution.
//!
//! Each half-spectrum entry obeys `f̈ = −(μ + ω²) f` with the effective mass
//! `μ = r + (λ/2N) Σ deg·𝒩·|f|²`. Since μ depends on positions only, the
//! system is separable and every splitting scheme in [`crate::integrator`]
//! is symplectic for it.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{Scheme, Splitting, Stepper};
use crate::lattice::DispersionTable;
use crate::sum::par_pairwise_sum_by;
use crate::Real;

/// Mode count above which per-mode updates are spread over threads.
const PAR_MODES: usize = 1 << 13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEntry<T> {
    pub m: usize,
    pub degeneracy: usize,
    pub omega_sq: T,
    pub occ_plus: T,
    pub occ_minus: T,
    pub f: Complex<T>,
    pub fdot: Complex<T>,
}

impl<T: Real> ModeEntry<T> {
    /// `𝒩 = 1 + n₊ + n₋`.
    pub fn occupation(&self) -> T {
        T::one() + self.occ_plus + self.occ_minus
    }

    /// `𝒮 = 1 + n₊ − n₋`.
    pub fn asymmetry(&self) -> T {
        T::one() + self.occ_plus - self.occ_minus
    }

    /// `Im(f* ḟ)`, equal to 1 for a valid mode function.
    pub fn wronskian(&self) -> T {
        (self.f.conj() * self.fdot).im
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Full,
    /// Modes `m ≤ tracked_max_m` kept, the rest lumped into a final entry.
    Bundled { tracked_max_m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    pub r: T,
    pub lambda: T,
    pub n: usize,
    pub time: T,
    pub modes: Vec<ModeEntry<T>>,
    pub representation: Representation,
}

impl<T: Real> SystemState<T> {
    /// `λ·deg·𝒩/(2N)`, the weight of a mode in μ and ε.
    pub fn weight(&self, mode: &ModeEntry<T>) -> T {
        self.lambda * T::n(mode.degeneracy) * mode.occupation() / (T::c(2.0) * T::n(self.n))
    }

    fn mode_sum<F: Fn(&ModeEntry<T>) -> T + Sync>(&self, term: F) -> T {
        par_pairwise_sum_by(self.modes.len(), |i| {
            let mode = &self.modes[i];
            self.weight(mode) * term(mode)
        })
    }

    /// Index of the lumped entry, if any.
    pub fn bundle_index(&self) -> Option<usize> {
        match self.representation {
            Representation::Full => None,
            Representation::Bundled { .. } => Some(self.modes.len() - 1),
        }
    }

    pub fn max_wronskian_deviation(&self) -> T {
        self.modes
            .iter()
            .map(|m| (m.wronskian() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// `μ = r + (λ/2N) Σ deg·𝒩·|f|²`.
pub fn effective_mass<T: Real>(state: &SystemState<T>) -> T {
    state.r + state.mode_sum(|m| m.f.norm_sqr())
}

/// Exact time derivative of [`effective_mass`], `(λ/2N) Σ deg·𝒩·2Re(f* ḟ)`.
pub fn mass_derivative<T: Real>(state: &SystemState<T>) -> T {
    state.mode_sum(|m| T::c(2.0) * (m.f.conj() * m.fdot).re)
}

/// Conserved energy per particle, `(λ/2N) Σ deg·𝒩·(|ḟ|² + ω²|f|²) + μ²/2`.
pub fn energy_per_particle<T: Real>(state: &SystemState<T>) -> T {
    let mu = effective_mass(state);
    state.mode_sum(|m| m.fdot.norm_sqr() + m.omega_sq * m.f.norm_sqr()) + T::c(0.5) * mu * mu
}

/// Back-reaction of the modes on μ: `g = ½ Σ deg·m_k·|f|²` with
/// `m_k = 4λ𝒩(1 − ω²)/N`.
pub fn drive_force<T: Real>(state: &SystemState<T>) -> T {
    state.mode_sum(|m| T::c(4.0) * (T::one() - m.omega_sq) * m.f.norm_sqr())
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )))
    }
}

fn full_modes<T: Real>(
    table: &DispersionTable<T>,
    occupation: T,
    amplitude: impl Fn(T) -> (Complex<T>, Complex<T>),
) -> Vec<ModeEntry<T>> {
    let occ = T::c(0.5) * (occupation - T::one());
    table
        .omega_sq
        .iter()
        .zip(&table.degeneracy)
        .enumerate()
        .map(|(m, (&w2, &deg))| {
            let (f, fdot) = amplitude(w2);
            ModeEntry {
                m,
                degeneracy: deg,
                omega_sq: w2,
                occ_plus: occ,
                occ_minus: occ,
                f,
                fdot,
            }
        })
        .collect()
}

/// Solves the finite-`N` gap equation `μ = r + (λ/2N) Σ deg/√(ω² + μ)` and
/// returns `μ_gs` with the corresponding ground state.
///
/// At finite `N` the equation always has a positive root, so the ordered
/// phase is detected from its asymptotic boundary `r ≤ −λ/2` instead (see
/// [`ordering_threshold`]).
pub fn ground_state<T: Real>(
    r: T,
    lambda: T,
    table: &DispersionTable<T>,
) -> Result<(T, SystemState<T>)> {
    check_lambda(lambda)?;
    let threshold = ordering_threshold(lambda, table);
    if !(r > threshold) {
        return Err(Error::OrderedPhase {
            r: r.as_f64(),
            lambda: lambda.as_f64(),
            threshold: threshold.as_f64(),
        });
    }
    let mu = solve_gap_equation(r, lambda, table)?;
    let modes = full_modes(table, T::one(), |w2| {
        let s = (w2 + mu).sqrt().sqrt();
        (Complex::new(s.recip(), T::zero()), Complex::new(T::zero(), s))
    });
    let state = SystemState {
        r,
        lambda,
        n: table.n,
        time: T::zero(),
        modes,
        representation: Representation::Full,
    };
    Ok((mu, state))
}

/// Bare mass below which the ground state orders in the thermodynamic limit:
/// `−λ/2` for long-range and flat couplings, where the spectrum accumulates
/// at `ω = 1`. Nearest-neighbor chains never order in one dimension.
pub fn ordering_threshold<T: Real>(lambda: T, table: &DispersionTable<T>) -> T {
    match table.kind {
        crate::lattice::CouplingKind::NearestNeighbor => T::neg_infinity(),
        _ => -T::c(0.5) * lambda,
    }
}

/// Gap-equation residual `F(μ) = μ − r − (λ/2N) Σ deg/√(ω² + μ)`.
pub fn gap_residual<T: Real>(mu: T, r: T, lambda: T, table: &DispersionTable<T>) -> T {
    mu - r - T::c(0.5) * lambda * table.average(|w2| (w2 + mu).sqrt().recip())
}

fn solve_gap_equation<T: Real>(r: T, lambda: T, table: &DispersionTable<T>) -> Result<T> {
    let f = |mu: T| gap_residual(mu, r, lambda, table);
    let df = |mu: T| T::one() + T::c(0.25) * lambda * table.average(|w2| (w2 + mu).powf(T::c(-1.5)));
    // F is increasing on μ > 0 with F(0⁺) = −∞; bound the root from above by
    // F(μ) ≥ μ − r − λ/(2√μ).
    let mut hi = T::one().max(r + lambda + T::one());
    while f(hi) <= T::zero() {
        hi = hi * T::c(2.0);
    }
    let mut lo = hi * T::c(0.5);
    while f(lo) >= T::zero() {
        lo = lo * T::c(0.5);
        if lo < T::min_positive_value() {
            return Err(Error::Precondition("gap equation root underflows".into()));
        }
    }
    let tol = T::c(1e-13).max(T::c(8.0) * T::epsilon());
    let mut mu = T::c(0.5) * (lo + hi);
    for _ in 0..200 {
        let value = f(mu);
        if value.abs() <= tol * T::one().max(mu.abs()) {
            return Ok(mu);
        }
        if value < T::zero() {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = mu - value / df(mu);
        mu = if newton > lo && newton < hi {
            newton
        } else {
            T::c(0.5) * (lo + hi)
        };
        if hi - lo <= T::c(4.0) * T::epsilon() * hi {
            return Ok(mu);
        }
    }
    Ok(mu)
}

/// How [`prepare_parametric`] treats targets that need `𝒩 < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccupationPolicy {
    /// Reject with [`Error::Unreachable`].
    #[default]
    Physical,
    /// Accept `𝒩 < 1`, i.e. negative occupations used as formal weights.
    AllowSubunit,
}

/// Builds a state with prescribed `μ(0)`, `μ̇(0)` and `ε`.
///
/// Mode functions are taken from the family `f = (ω² + ν)^{-1/4}`,
/// `ḟ = (β f² + i)/f` with a uniform occupation `𝒩`: `β` fixes `μ̇(0)`, and
/// `ν` and `𝒩` are solved so that μ and ε hit their targets. The family
/// contains the ground state (`ν = μ_gs`, `𝒩 = 1`) and approaches equal
/// amplitudes on every mode as `ν → ∞`.
pub fn prepare_parametric<T: Real>(
    r: T,
    lambda: T,
    table: &DispersionTable<T>,
    mu0: T,
    mudot0: T,
    epsilon: T,
    policy: OccupationPolicy,
) -> Result<SystemState<T>> {
    check_lambda(lambda)?;
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    if !(mu0 > r) {
        return Err(Error::Precondition(format!("need mu0 > r, got mu0 = {mu0}, r = {r}")));
    }
    if !(mu0 * mu0 < T::c(2.0) * epsilon) {
        return Err(Error::Precondition(format!(
            "need mu0^2 < 2 epsilon, got mu0 = {mu0}, epsilon = {epsilon}"
        )));
    }
    let gap = mu0 - r;
    let beta = mudot0 / (T::c(2.0) * gap);
    let reduced = epsilon - T::c(0.5) * mu0 * mu0 - beta * beta * gap;
    if !(reduced > T::zero()) {
        return Err(Error::Unreachable { occupation: 0.0 });
    }
    let target = reduced / gap;
    let s0 = |nu: T| table.average(|w2| (w2 + nu).sqrt().recip());
    let ratio = |nu: T| table.average(|w2| (T::c(2.0) * w2 + nu) / (w2 + nu).sqrt()) / s0(nu);
    // ratio(ν) increases from 0 to ∞; bisect in ln ν
    let (mut lo, mut hi) = (T::c(-60.0), T::c(60.0));
    if !(ratio(lo.exp()) < target && ratio(hi.exp()) > target) {
        return Err(Error::Unreachable { occupation: f64::NAN });
    }
    for _ in 0..200 {
        let mid = T::c(0.5) * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if ratio(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = (T::c(0.5) * (lo + hi)).exp();
    let mut occupation = T::c(2.0) * gap / (lambda * s0(nu));
    if occupation < T::one() {
        if occupation > T::one() - T::c(1e-10) {
            occupation = T::one();
        } else if policy == OccupationPolicy::Physical {
            return Err(Error::Unreachable {
                occupation: occupation.as_f64(),
            });
        }
    }
    let modes = full_modes(table, occupation, |w2| {
        let f = (w2 + nu).sqrt().sqrt().recip();
        (
            Complex::new(f, T::zero()),
            Complex::new(beta * f, f.recip()),
        )
    });
    Ok(SystemState {
        r,
        lambda,
        n: table.n,
        time: T::zero(),
        modes,
        representation: Representation::Full,
    })
}

/// Keeps modes `m ≤ tracked_max_m` and lumps the rest into one entry.
///
/// The lumped entry carries the total degeneracy of the removed modes, their
/// degeneracy-weighted mean `ω²` (so that `Σ deg·(1 − ω²)` is unchanged) and
/// an amplitude matched to their weighted second moments, which leaves μ, μ̇
/// and the Wronskian of the state unchanged at the time of bundling.
pub fn bundle<T: Real>(state: &SystemState<T>, tracked_max_m: usize) -> Result<SystemState<T>> {
    if state.representation != Representation::Full {
        return Err(Error::Precondition("state is already bundled".into()));
    }
    let half = state.n / 2;
    if tracked_max_m > half {
        return Err(Error::InvalidParameter(format!(
            "tracked_max_m = {tracked_max_m} exceeds N/2 = {half}"
        )));
    }
    if tracked_max_m == half {
        return Ok(state.clone());
    }
    let (kept, lumped) = state.modes.split_at(tracked_max_m + 1);
    let count = |f: &(dyn Fn(&ModeEntry<T>) -> T + Sync)| -> T {
        par_pairwise_sum_by(lumped.len(), |i| T::n(lumped[i].degeneracy) * f(&lumped[i]))
    };
    let degeneracy: usize = lumped.iter().map(|m| m.degeneracy).sum();
    let total = T::n(degeneracy);
    let omega_sq = count(&|m| m.omega_sq) / total;
    let occupation = count(&|m| m.occupation()) / total;
    let second = count(&|m| m.occupation() * m.f.norm_sqr()) / (total * occupation);
    let mixed = count(&|m| m.occupation() * (m.f.conj() * m.fdot).re) / (total * occupation);
    let amp = second.sqrt();
    let occ = T::c(0.5) * (occupation - T::one());
    let mut modes = kept.to_vec();
    modes.push(ModeEntry {
        m: half,
        degeneracy,
        omega_sq,
        occ_plus: occ,
        occ_minus: occ,
        f: Complex::new(amp, T::zero()),
        fdot: Complex::new(mixed / amp, amp.recip()),
    });
    Ok(SystemState {
        modes,
        representation: Representation::Bundled { tracked_max_m },
        ..state.clone()
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Slot<T> {
    f: Complex<T>,
    fdot: Complex<T>,
    f_err: Complex<T>,
    fdot_err: Complex<T>,
    omega_sq: T,
    weight: T,
}

// Kahan-compensated `x += inc`; keeps the Wronskian of modes with large
// amplitudes from drifting by accumulated rounding.
#[inline]
fn compensated_add<T: Real>(x: &mut T, err: &mut T, inc: T) {
    let y = inc - *err;
    let t = *x + y;
    *err = (t - *x) - y;
    *x = t;
}

impl<T: Real> Slot<T> {
    #[inline]
    fn kick(&mut self, c: T) {
        let inc = self.f * c;
        compensated_add(&mut self.fdot.re, &mut self.fdot_err.re, inc.re);
        compensated_add(&mut self.fdot.im, &mut self.fdot_err.im, inc.im);
    }

    #[inline]
    fn drift(&mut self, h: T) {
        let inc = self.fdot * h;
        compensated_add(&mut self.f.re, &mut self.f_err.re, inc.re);
        compensated_add(&mut self.f.im, &mut self.f_err.im, inc.im);
    }
}

/// A state being integrated, held in a layout suited to stepping.
#[derive(Debug, Clone)]
pub struct Evolution<T> {
    template: SystemState<T>,
    slots: Vec<Slot<T>>,
    start_time: T,
    steps_taken: u64,
    dt: T,
    mu: T,
}

impl<T: Real> Evolution<T> {
    pub fn new(state: &SystemState<T>) -> Self {
        let slots = state
            .modes
            .iter()
            .map(|m| Slot {
                f: m.f,
                fdot: m.fdot,
                omega_sq: m.omega_sq,
                weight: state.weight(m),
                ..Default::default()
            })
            .collect();
        let mut evo = Self {
            template: state.clone(),
            slots,
            start_time: state.time,
            steps_taken: 0,
            dt: T::zero(),
            mu: T::zero(),
        };
        evo.mu = evo.compute_mu();
        evo
    }

    fn slot_sum<F: Fn(&Slot<T>) -> T + Sync>(&self, term: F) -> T {
        par_pairwise_sum_by(self.slots.len(), |i| term(&self.slots[i]))
    }

    fn compute_mu(&self) -> T {
        self.template.r + self.slot_sum(|s| s.weight * s.f.norm_sqr())
    }

    fn for_each_slot<F: Fn(&mut Slot<T>) + Sync + Send>(&mut self, op: F) {
        if self.slots.len() >= PAR_MODES {
            self.slots.par_iter_mut().with_min_len(1024).for_each(op);
        } else {
            self.slots.iter_mut().for_each(op);
        }
    }

    pub fn time(&self) -> T {
        self.start_time + T::n(self.steps_taken as usize) * self.dt
    }

    pub fn r(&self) -> T {
        self.template.r
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn mu_dot(&self) -> T {
        self.slot_sum(|s| s.weight * T::c(2.0) * (s.f.conj() * s.fdot).re)
    }

    pub fn energy(&self) -> T {
        self.slot_sum(|s| s.weight * (s.fdot.norm_sqr() + s.omega_sq * s.f.norm_sqr()))
            + T::c(0.5) * self.mu * self.mu
    }

    pub fn drive(&self) -> T {
        self.slot_sum(|s| T::c(4.0) * s.weight * (T::one() - s.omega_sq) * s.f.norm_sqr())
    }

    pub fn max_wronskian_deviation(&self) -> T {
        self.slots
            .iter()
            .map(|s| ((s.f.conj() * s.fdot).im - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// `|f|²` of the entry at `index` (half-spectrum position).
    pub fn amplitude_sq(&self, index: usize) -> T {
        self.slots[index].f.norm_sqr()
    }

    /// Contribution `(λ/2N)·deg·𝒩·|f|²` of the entry at `index` to μ.
    pub fn contribution(&self, index: usize) -> T {
        let s = &self.slots[index];
        s.weight * s.f.norm_sqr()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Advances by `count` steps of size `dt` with `stepper`.
    pub fn advance(&mut self, stepper: &Stepper<T>, dt: T, count: usize) -> Result<()> {
        if self.steps_taken > 0 && dt != self.dt {
            // fold elapsed time into the origin so the step counter restarts
            self.start_time = self.time();
            self.steps_taken = 0;
        }
        self.dt = dt;
        for _ in 0..count {
            stepper.step(self);
            self.steps_taken += 1;
            if !self.mu.is_finite() {
                return Err(Error::NumericalBlowup {
                    time: self.time().as_f64(),
                    detail: "effective mass is not finite".into(),
                });
            }
        }
        Ok(())
    }

    /// Copies the current mode functions back into a [`SystemState`].
    pub fn snapshot(&self) -> SystemState<T> {
        let mut state = self.template.clone();
        state.time = self.time();
        for (mode, slot) in state.modes.iter_mut().zip(&self.slots) {
            mode.f = slot.f;
            mode.fdot = slot.fdot;
        }
        state
    }
}

impl<T: Real> Splitting<T> for Evolution<T> {
    fn kick(&mut self, h: T) {
        let mu = self.mu;
        self.for_each_slot(|s| {
            let c = -h * (mu + s.omega_sq);
            s.kick(c)
        });
    }

    fn drift(&mut self, h: T) {
        self.for_each_slot(|s| s.drift(h));
        self.mu = self.compute_mu();
    }
}

/// One kick-drift-kick Störmer–Verlet step.
pub fn step<T: Real>(state: &SystemState<T>, dt: T) -> Result<SystemState<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let mut evo = Evolution::new(state);
    evo.advance(&Stepper::new(Scheme::StormerVerlet, dt), dt, 1)?;
    Ok(evo.snapshot())
}

#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    pub sample_every: usize,
    pub scheme: Scheme,
    /// Burst time is the first step at which the `m = 0` contribution to μ
    /// exceeds this value.
    pub burst_threshold: T,
    /// A mode counts as active when its contribution to μ exceeds this
    /// fraction of `|μ − r|` at some sample.
    pub active_threshold: T,
    /// Half-spectrum indices whose `|f|²` is recorded at every sample.
    pub envelope_modes: Vec<usize>,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            sample_every: 1,
            scheme: Scheme::default(),
            burst_threshold: T::c(0.1),
            active_threshold: T::c(1e-3),
            envelope_modes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub mu: Vec<T>,
    pub mu_dot: Vec<T>,
    pub g: Vec<T>,
    /// `(ε(t) − ε(0))/|ε(0)|` per sample.
    pub eps_drift: Vec<T>,
    pub wronskian_dev: Vec<T>,
    pub epsilon: T,
    /// `(index, |f|² per sample)` for each requested envelope mode.
    pub envelopes: Vec<(usize, Vec<T>)>,
    pub max_wronskian_dev: T,
    pub max_rel_eps_drift: T,
    pub burst_time: Option<T>,
    /// Half-spectrum indices `m` flagged active at any sample.
    pub active_modes: Vec<usize>,
    pub steps: usize,
    pub final_state: SystemState<T>,
}

/// Number of steps of size `dt` that reach `t_end` from `t0`.
pub fn step_count<T: Real>(t0: T, t_end: T, dt: T) -> usize {
    let steps = ((t_end - t0) / dt * (T::one() + T::c(1e-12))).floor();
    steps.to_usize().unwrap_or(0)
}

/// Integrates to `t_end`, sampling every `opts.sample_every` steps and at
/// the final step.
pub fn evolve<T: Real>(
    state: &SystemState<T>,
    t_end: T,
    dt: T,
    opts: &EvolveOptions<T>,
) -> Result<TrajectoryRecord<T>> {
    let (record, outcome) = evolve_partial(state, t_end, dt, opts, |_| {});
    outcome.map(|_| record)
}

/// Like [`evolve`], but returns the record accumulated so far alongside the
/// outcome, and calls `observer` at every sample.
pub fn evolve_partial<T: Real, O: FnMut(&Evolution<T>)>(
    state: &SystemState<T>,
    t_end: T,
    dt: T,
    opts: &EvolveOptions<T>,
    mut observer: O,
) -> (TrajectoryRecord<T>, Result<()>) {
    let mut evo = Evolution::new(state);
    let epsilon = evo.energy();
    let mut record = TrajectoryRecord {
        times: Vec::new(),
        mu: Vec::new(),
        mu_dot: Vec::new(),
        g: Vec::new(),
        eps_drift: Vec::new(),
        wronskian_dev: Vec::new(),
        epsilon,
        envelopes: opts.envelope_modes.iter().map(|&i| (i, Vec::new())).collect(),
        max_wronskian_dev: T::zero(),
        max_rel_eps_drift: T::zero(),
        burst_time: None,
        active_modes: Vec::new(),
        steps: 0,
        final_state: state.clone(),
    };
    let validation = if !(dt > T::zero()) {
        Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")))
    } else if !(t_end >= state.time) {
        Err(Error::Precondition(format!(
            "t_end = {t_end} precedes the state time {}",
            state.time
        )))
    } else if opts.sample_every == 0 {
        Err(Error::InvalidParameter("sample_every must be positive".into()))
    } else if let Some(&bad) = opts.envelope_modes.iter().find(|&&i| i >= state.modes.len()) {
        Err(Error::InvalidParameter(format!("envelope mode index {bad} out of range")))
    } else {
        Ok(())
    };
    if let Err(e) = validation {
        return (record, Err(e));
    }
    let total = step_count(state.time, t_end, dt);
    let stepper = Stepper::new(opts.scheme, dt);
    let bundle = state.bundle_index();
    let mut active = vec![false; state.modes.len()];
    let mut sample = |evo: &Evolution<T>, record: &mut TrajectoryRecord<T>| {
        let mu = evo.mu();
        let eps = evo.energy();
        let drift = (eps - epsilon) / epsilon.abs();
        let wdev = evo.max_wronskian_deviation();
        record.times.push(evo.time());
        record.mu.push(mu);
        record.mu_dot.push(evo.mu_dot());
        record.g.push(evo.drive());
        record.eps_drift.push(drift);
        record.wronskian_dev.push(wdev);
        record.max_wronskian_dev = record.max_wronskian_dev.max(wdev);
        record.max_rel_eps_drift = record.max_rel_eps_drift.max(drift.abs());
        for (index, values) in record.envelopes.iter_mut() {
            values.push(evo.amplitude_sq(*index));
        }
        let cut = opts.active_threshold * (mu - evo.r()).abs();
        for (i, flag) in active.iter_mut().enumerate() {
            if Some(i) != bundle && evo.contribution(i) > cut {
                *flag = true;
            }
        }
        observer(evo);
    };
    let burst_check = |evo: &Evolution<T>, record: &mut TrajectoryRecord<T>| {
        if record.burst_time.is_none() && evo.contribution(0) > opts.burst_threshold {
            record.burst_time = Some(evo.time());
        }
    };
    sample(&evo, &mut record);
    burst_check(&evo, &mut record);
    let mut outcome = Ok(());
    for k in 1..=total {
        if let Err(e) = evo.advance(&stepper, dt, 1) {
            outcome = Err(e);
            break;
        }
        record.steps = k;
        burst_check(&evo, &mut record);
        if k % opts.sample_every == 0 || k == total {
            sample(&evo, &mut record);
        }
    }
    record.active_modes = active
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(i, _)| state.modes[i].m)
        .collect();
    record.final_state = evo.snapshot();
    (record, outcome)
}

/// Ground state at `r_pre` evolved under `r_post`.
pub fn quench<T: Real>(
    r_pre: T,
    r_post: T,
    lambda: T,
    table: &DispersionTable<T>,
    t_end: T,
    dt: T,
    opts: &EvolveOptions<T>,
) -> Result<TrajectoryRecord<T>> {
    let state = quench_state(r_pre, r_post, lambda, table)?;
    evolve(&state, t_end, dt, opts)
}

/// The `r_pre` ground state with the bare mass switched to `r_post`.
pub fn quench_state<T: Real>(
    r_pre: T,
    r_post: T,
    lambda: T,
    table: &DispersionTable<T>,
) -> Result<SystemState<T>> {
    let (_, mut state) = ground_state(r_pre, lambda, table)?;
    state.r = r_post;
    Ok(state)
}
