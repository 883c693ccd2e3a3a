//! Symmetric splitting integrators for separable second-order systems
//! `q̈ = F(q)`: Störmer–Verlet and its Yoshida compositions.

use std::fmt;
use std::str::FromStr;

use crate::Real;

/// A system that can be advanced by the two exactly solvable flows of a
/// splitting: `kick` moves velocities with positions frozen, `drift` moves
/// positions with velocities frozen.
pub trait Splitting<T> {
    fn kick(&mut self, h: T);
    fn drift(&mut self, h: T);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Scheme {
    /// Kick-drift-kick leapfrog, order 2.
    StormerVerlet,
    /// Triple-jump composition of Verlet, order 4.
    Yoshida4,
    /// Seven-stage composition of Verlet, order 6.
    #[default]
    Yoshida6,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::StormerVerlet => 2,
            Scheme::Yoshida4 => 4,
            Scheme::Yoshida6 => 6,
        }
    }

    /// Fractions of the step taken by each Verlet stage.
    pub fn stage_weights(self) -> Vec<f64> {
        match self {
            Scheme::StormerVerlet => vec![1.0],
            Scheme::Yoshida4 => {
                let cbrt2 = 2f64.cbrt();
                let x1 = 1.0 / (2.0 - cbrt2);
                let x0 = -cbrt2 / (2.0 - cbrt2);
                vec![x1, x0, x1]
            }
            Scheme::Yoshida6 => {
                let w1 = -1.177_679_984_178_87;
                let w2 = 0.235_573_213_359_357;
                let w3 = 0.784_513_610_477_560;
                let w0 = 1.0 - 2.0 * (w1 + w2 + w3);
                vec![w3, w2, w1, w0, w1, w2, w3]
            }
        }
    }

    /// Kick and drift fractions of one step, `K(c₀) D(d₀) K(c₁) … D(d_{s−1}) K(c_s)`,
    /// with adjacent half kicks of consecutive stages merged.
    pub fn coefficients<T: Real>(self) -> (Vec<T>, Vec<T>) {
        let w = self.stage_weights();
        let s = w.len();
        let mut kicks = Vec::with_capacity(s + 1);
        kicks.push(T::c(0.5 * w[0]));
        for i in 1..s {
            kicks.push(T::c(0.5 * (w[i - 1] + w[i])));
        }
        kicks.push(T::c(0.5 * w[s - 1]));
        (kicks, w.into_iter().map(T::c).collect())
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StormerVerlet => "verlet",
            Scheme::Yoshida4 => "yoshida4",
            Scheme::Yoshida6 => "yoshida6",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "verlet" | "stormer-verlet" | "leapfrog" => Ok(Scheme::StormerVerlet),
            "yoshida4" => Ok(Scheme::Yoshida4),
            "yoshida6" => Ok(Scheme::Yoshida6),
            other => Err(format!("unknown integration scheme '{other}'")),
        }
    }
}

/// Precomputed step coefficients for repeated stepping with a fixed `dt`.
#[derive(Debug, Clone)]
pub struct Stepper<T> {
    kicks: Vec<T>,
    drifts: Vec<T>,
}

impl<T: Real> Stepper<T> {
    pub fn new(scheme: Scheme, dt: T) -> Self {
        let (kicks, drifts) = scheme.coefficients::<T>();
        Self {
            kicks: kicks.into_iter().map(|c| c * dt).collect(),
            drifts: drifts.into_iter().map(|d| d * dt).collect(),
        }
    }

    pub fn step<S: Splitting<T>>(&self, system: &mut S) {
        for (k, &d) in self.kicks.iter().zip(&self.drifts) {
            system.kick(*k);
            system.drift(d);
        }
        system.kick(*self.kicks.last().expect("at least one kick"));
    }
}

/// Advances `system` by one step of size `dt`.
pub fn advance<T: Real, S: Splitting<T>>(system: &mut S, scheme: Scheme, dt: T) {
    Stepper::new(scheme, dt).step(system);
}
