use lrq_core::classical::{make_orbit, ClassicalParams};
use lrq_core::lattice::continuum_table;
use lrq_core::phase::{classify_point, scan, Frequencies, PhaseClass, PhaseOptions};

fn opts(m_max: usize) -> PhaseOptions<f64> {
    PhaseOptions {
        m_max,
        dt: 0.05,
        ..Default::default()
    }
}

#[test]
fn positive_bare_mass_grid_is_resonance_free() {
    let grid = scan(0.5, 0.5, (0.2, 4.0), (0.5, 3.0), (10, 10), &opts(64)).unwrap();
    assert_eq!(grid.points.len(), 100);
    for p in &grid.points {
        assert!(matches!(p.class, PhaseClass::NonPhysical | PhaseClass::Classical), "{p:?}");
    }
}

#[test]
fn identical_across_thread_counts() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scan(-1.0, 0.5, (0.3, 2.5), (-1.0, 1.0), (9, 9), &opts(32)).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn larger_m_max_only_refines_multi_resonant_counts() {
    let small = scan(-1.0, 0.5, (0.3, 2.5), (-1.0, 1.0), (12, 12), &opts(64)).unwrap();
    let large = scan(-1.0, 0.5, (0.3, 2.5), (-1.0, 1.0), (12, 12), &opts(128)).unwrap();
    for (a, b) in small.points.iter().zip(&large.points) {
        match (a.class, b.class) {
            (PhaseClass::MultiResonant { count: x }, PhaseClass::MultiResonant { count: y }) => assert!(y >= x),
            (x, y) => assert_eq!(x, y, "eps {} mu0 {}", a.epsilon, a.mu0),
        }
    }
}

#[test]
fn resonant_cells_violate_positivity() {
    let grid = scan(-1.0, 0.5, (0.3, 2.5), (-1.0, 1.0), (12, 12), &opts(64)).unwrap();
    let omega_sq = continuum_table(0.5, 64).unwrap();
    let mut resonant_cells = 0;
    for p in grid.points.iter().filter(|p| !p.resonant.is_empty()) {
        resonant_cells += 1;
        let orbit = make_orbit(ClassicalParams::new(-1.0, p.epsilon), p.mu0, 0.0).unwrap();
        let lowest = p.resonant[0];
        assert!(orbit.min_mu() + omega_sq[lowest] <= 0.0);
    }
    assert!(resonant_cells > 0);
}

#[test]
fn point_examples() {
    let o = opts(64);
    // μ0² ≥ 2ε
    assert_eq!(classify_point(-1.0, 0.5, 0.3, 0.9, &o).unwrap().class, PhaseClass::NonPhysical);
    // μ0 ≤ r
    assert_eq!(classify_point(-1.0, 0.5, 2.0, -1.2, &o).unwrap().class, PhaseClass::NonPhysical);
    // the reference orbit sits in the k = 0 resonant region
    assert_eq!(classify_point(-1.0, 0.5, 1.2, -0.7, &o).unwrap().class, PhaseClass::ResonantZero);
    let p = classify_point(0.5, 0.5, 2.0, 1.0, &o).unwrap();
    assert_eq!(p.class, PhaseClass::Classical);
    assert!(!p.saturated);
}

#[test]
fn finite_frequencies_available() {
    let o = PhaseOptions {
        frequencies: Frequencies::Finite { n: 10_000 },
        ..opts(32)
    };
    let p = classify_point(-1.0, 0.5, 1.2, -0.7, &o).unwrap();
    assert_eq!(p.class, PhaseClass::ResonantZero);
    let tiny = PhaseOptions {
        frequencies: Frequencies::Finite { n: 16 },
        ..opts(32)
    };
    assert!(classify_point(-1.0, 0.5, 1.2, -0.7, &tiny).is_err());
}
