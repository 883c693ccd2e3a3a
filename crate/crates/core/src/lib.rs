//! Quench dynamics of strong long-range quantum O(n→∞) rotor chains.
//!
//! The crate is generic over the floating point type through [`Real`]; the
//! `*64` aliases at the bottom name the double precision instantiations
//! used by the command-line driver and the tests.

pub mod classical;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod floquet;
pub mod integrator;
pub mod lattice;
pub mod linalg;
pub mod phase;
pub mod quadrature;
pub mod scalar;
pub mod sum;

pub use classical::{
    evolve_reduced, make_orbit, potential, potential_derivative, ClassicalOrbit, ClassicalParams,
    ReducedModel, ReducedTrajectory,
};
pub use dynamics::{
    bundle, drive_force, effective_mass, energy_per_particle, evolve, ground_state, prepare_parametric,
    quench, step, EvolveOptions, ModeEntry, OccupationPolicy, Representation, SystemState,
    TrajectoryRecord,
};
pub use entanglement::{
    closed_form_delta, closed_form_entropy, correlators, entropy, interval_entropy, reduced_covariance,
    symplectic_spectrum, CorrelatorSet, ReducedCovariance, SymplecticSpectrum,
};
pub use error::{Error, Result};
pub use floquet::{
    classify, count_resonances, mode_stability, monodromy, monodromy_sampled, FloquetOptions,
    HillSchedule, Monodromy, StabilityClass,
};
pub use integrator::Scheme;
pub use lattice::{
    build_dispersion, continuum_dispersion, continuum_table, correction_exponent, spectral_average,
    CouplingKind, DispersionTable,
};
pub use phase::{classify_point, scan, Frequencies, PhaseClass, PhaseGrid, PhaseOptions, PhasePoint};
pub use scalar::Real;

pub type DispersionTable64 = DispersionTable<f64>;
pub type SystemState64 = SystemState<f64>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;
pub type ClassicalOrbit64 = ClassicalOrbit<f64>;
pub type Monodromy64 = Monodromy<f64>;
pub type PhaseGrid64 = PhaseGrid<f64>;
pub type SymplecticSpectrum64 = SymplecticSpectrum<f64>;
