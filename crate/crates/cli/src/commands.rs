//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use lrq_core::classical::{make_orbit, ClassicalParams};
use lrq_core::dynamics::{
    bundle, effective_mass, energy_per_particle, evolve_partial, gap_residual, mass_derivative,
    prepare_parametric, quench_state, EvolveOptions, OccupationPolicy, SystemState,
};
use lrq_core::entanglement::{closed_form_delta, closed_form_entropy, interval_entropy};
use lrq_core::floquet::{resonance_report, FloquetOptions};
use lrq_core::lattice::{build_dispersion, continuum_table, CouplingKind, DispersionTable};
use lrq_core::phase::{scan, Frequencies, PhaseOptions};
use lrq_core::{ground_state, Scheme};
use serde_json::{json, Value};

use crate::config::{config_hash, ConfigError, Settings};
use crate::output::{fmt_f64, write_json, CsvWriter};
use crate::{Command, Failure, Outcome};

type CmdResult = Result<Outcome, Failure>;

pub fn dispatch(command: &Command, settings: &Settings, out: &Path) -> CmdResult {
    match command {
        Command::Dispersion(_) => dispersion(settings, out),
        Command::GroundState(_) => ground(settings, out),
        Command::Quench(_) => quench(settings, out),
        Command::PhaseDiagram(_) => phase_diagram(settings, out),
        Command::Floquet(_) => floquet(settings, out),
        Command::EntropySeries(_) => entropy_series(settings, out),
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn coupling(s: &Settings) -> Result<CouplingKind, Failure> {
    let name: String = s.get("coupling", "slr".to_string())?;
    let kind = match name.as_str() {
        "slr" => CouplingKind::strong_long_range(s.get("alpha", 0.5)?)?,
        "flat" => CouplingKind::Flat,
        "nn" => CouplingKind::NearestNeighbor,
        other => return Err(invalid("coupling", other, "expected slr, flat or nn").into()),
    };
    Ok(kind)
}

fn scheme(s: &Settings) -> Result<Scheme, Failure> {
    let name: String = s.get("scheme", Scheme::default().name().to_string())?;
    name.parse()
        .map_err(|_| invalid("scheme", &name, "expected verlet, yoshida4 or yoshida6").into())
}

fn positive(key: &str, value: f64) -> Result<f64, Failure> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(key, &value.to_string(), "must be positive").into())
    }
}

fn hash(name: &str, s: &Settings) -> String {
    config_hash(name, &s.echo())
}

fn floquet_options(s: &Settings) -> Result<(FloquetOptions<f64>, Frequencies, usize), Failure> {
    let dt = positive("dt", s.get("dt", 0.05)?)?;
    let eta = s.get("eta", lrq_core::floquet::DEFAULT_ETA)?;
    let scheme = scheme(s)?;
    let m_max: usize = s.get("m_max", 64)?;
    let kind: String = s.get("frequencies", "continuum".to_string())?;
    let frequencies = match kind.as_str() {
        "continuum" => Frequencies::Continuum,
        "finite" => Frequencies::Finite { n: s.get("n", 10_000)? },
        other => return Err(invalid("frequencies", other, "expected continuum or finite").into()),
    };
    Ok((FloquetOptions { dt, scheme, eta }, frequencies, m_max))
}

fn dispersion(s: &Settings, out: &Path) -> CmdResult {
    s.check_known("dispersion", &["coupling", "alpha", "n"])?;
    let kind = coupling(s)?;
    let n: usize = s.get("n", 1000)?;
    let h = hash("dispersion", s);
    let table = build_dispersion::<f64>(kind, n)?;
    let mut w = CsvWriter::create(&out.join("dispersion.csv"), &h, &["m", "degeneracy", "omega_sq"])?;
    for m in 0..table.len() {
        w.row(&[
            m.to_string(),
            table.degeneracy[m].to_string(),
            fmt_f64(table.omega_sq[m]),
        ])?;
    }
    let mut outcome = Outcome {
        outputs: vec![w.finish()?],
        ..Default::default()
    };
    outcome.diagnostics.insert("kac_norm".into(), json!(table.kac_norm));
    outcome
        .diagnostics
        .insert("mean_omega_sq".into(), json!(table.average(|w2| w2)));
    Ok(outcome)
}

fn ground(s: &Settings, out: &Path) -> CmdResult {
    s.check_known("ground-state", &["coupling", "alpha", "n", "r", "lambda"])?;
    let kind = coupling(s)?;
    let n: usize = s.get("n", 1000)?;
    let r: f64 = s.get("r", 1.0)?;
    let lambda: f64 = s.get("lambda", 1.24)?;
    let h = hash("ground-state", s);
    let table = build_dispersion::<f64>(kind, n)?;
    let (mu, state) = ground_state(r, lambda, &table)?;
    let mut w = CsvWriter::create(
        &out.join("ground_state.csv"),
        &h,
        &["m", "degeneracy", "omega_sq", "f_abs_sq", "fdot_abs_sq"],
    )?;
    for mode in &state.modes {
        w.row(&[
            mode.m.to_string(),
            mode.degeneracy.to_string(),
            fmt_f64(mode.omega_sq),
            fmt_f64(mode.f.norm_sqr()),
            fmt_f64(mode.fdot.norm_sqr()),
        ])?;
    }
    let mut outcome = Outcome {
        outputs: vec![w.finish()?],
        ..Default::default()
    };
    let d = &mut outcome.diagnostics;
    d.insert("mu_gs".into(), json!(mu));
    d.insert("gap_residual".into(), json!(gap_residual(mu, r, lambda, &table)));
    d.insert("energy_per_particle".into(), json!(energy_per_particle(&state)));
    Ok(outcome)
}

/// Evolution settings shared by `quench` and `entropy-series`.
struct EvolutionSetup {
    table: DispersionTable<f64>,
    state: SystemState<f64>,
    t_max: f64,
    dt: f64,
    opts: EvolveOptions<f64>,
    m_max: usize,
}

const EVOLUTION_KEYS: [&str; 17] = [
    "coupling",
    "alpha",
    "n",
    "lambda",
    "r_pre",
    "r_post",
    "mu0",
    "mudot0",
    "epsilon",
    "policy",
    "bundle_m",
    "dt",
    "t_max",
    "scheme",
    "sample_every",
    "burst_threshold",
    "m_max",
];

fn evolution_setup(s: &Settings) -> Result<(EvolutionSetup, impl FnOnce() -> Result<SystemState<f64>, Failure> + '_), Failure> {
    let kind = coupling(s)?;
    let n: usize = s.get("n", 10_000)?;
    let lambda: f64 = s.get("lambda", 1.24)?;
    let r_post: f64 = s.get("r_post", -1.0)?;
    let prepared = s.contains("mu0") || s.contains("epsilon");
    let (r_pre, mu0, mudot0, epsilon, policy) = if prepared {
        let mu0: f64 = s
            .get_opt("mu0")?
            .ok_or_else(|| invalid("mu0", "", "required together with epsilon"))?;
        let epsilon: f64 = s
            .get_opt("epsilon")?
            .ok_or_else(|| invalid("epsilon", "", "required together with mu0"))?;
        let mudot0: f64 = s.get("mudot0", 0.0)?;
        let policy: String = s.get("policy", "physical".to_string())?;
        let policy = match policy.as_str() {
            "physical" => OccupationPolicy::Physical,
            "subunit" => OccupationPolicy::AllowSubunit,
            other => return Err(invalid("policy", other, "expected physical or subunit").into()),
        };
        (None, mu0, mudot0, epsilon, policy)
    } else {
        (Some(s.get("r_pre", 1.0)?), 0.0, 0.0, 0.0, OccupationPolicy::Physical)
    };
    let bundle_m: Option<usize> = s.get_opt("bundle_m")?;
    let dt = positive("dt", s.get("dt", 0.05)?)?;
    let t_max: f64 = s.get("t_max", 100.0)?;
    let scheme = scheme(s)?;
    let sample_every: usize = s.get("sample_every", 1)?;
    let burst_threshold: f64 = s.get("burst_threshold", 0.1)?;
    let m_max: usize = s.get("m_max", 64)?;
    if sample_every == 0 {
        return Err(invalid("sample_every", "0", "must be positive").into());
    }
    let table = build_dispersion::<f64>(kind, n)?;
    let state = match r_pre {
        Some(r_pre) => quench_state(r_pre, r_post, lambda, &table)?,
        None => prepare_parametric(r_post, lambda, &table, mu0, mudot0, epsilon, policy)?,
    };
    let setup = EvolutionSetup {
        table,
        state,
        t_max,
        dt,
        opts: EvolveOptions {
            sample_every,
            scheme,
            burst_threshold,
            ..Default::default()
        },
        m_max,
    };
    // bundling is deferred so that the Floquet analysis sees the full state
    let full = setup.state.clone();
    let finalize = move || -> Result<SystemState<f64>, Failure> {
        Ok(match bundle_m {
            Some(m) => bundle(&full, m)?,
            None => full,
        })
    };
    Ok((setup, finalize))
}

/// Floquet prediction for the classical orbit through the initial state.
fn predicted_resonances(setup: &EvolutionSetup, d: &mut BTreeMap<String, Value>) -> Result<Vec<usize>, Failure> {
    let state = &setup.state;
    let mu0 = effective_mass(state);
    let mudot0 = mass_derivative(state);
    let eps = energy_per_particle(state);
    d.insert("mu0".into(), json!(mu0));
    d.insert("mudot0".into(), json!(mudot0));
    d.insert("epsilon".into(), json!(eps));
    let orbit = match make_orbit(ClassicalParams::new(state.r, eps), mu0, mudot0) {
        Ok(orbit) => orbit,
        Err(e) => {
            d.insert("orbit".into(), json!(e.to_string()));
            return Ok(Vec::new());
        }
    };
    d.insert("orbit_period".into(), json!(orbit.period));
    d.insert("orbit_min_mu".into(), json!(orbit.min_mu()));
    let m_max = setup.m_max.min(setup.table.len() - 1);
    let opts = FloquetOptions::default();
    let reports = resonance_report(&orbit, &setup.table.omega_sq[..=m_max], &opts)?;
    Ok(reports.iter().filter(|r| r.class.is_resonant()).map(|r| r.m).collect())
}

fn quench(s: &Settings, out: &Path) -> CmdResult {
    let mut keys = EVOLUTION_KEYS.to_vec();
    keys.push("ell");
    s.check_known("quench", &keys)?;
    let ell: usize = s.get("ell", 0)?;
    let (setup, finalize) = evolution_setup(s)?;
    let h = hash("quench", s);
    let mut outcome = Outcome::default();
    outcome.resonant_modes = predicted_resonances(&setup, &mut outcome.diagnostics)?;
    let state = finalize()?;
    if ell > state.n {
        return Err(invalid("ell", &ell.to_string(), "exceeds the chain length").into());
    }
    let mut entropy: Vec<(f64, f64)> = Vec::new();
    let mut entropy_error = None;
    let (record, result) = evolve_partial(&state, setup.t_max, setup.dt, &setup.opts, |evo| {
        if ell == 0 || entropy_error.is_some() {
            return;
        }
        match interval_entropy(&evo.snapshot(), ell) {
            Ok(sample) => entropy.push((sample.entropy, sample.min_sigma)),
            Err(e) => entropy_error = Some(e),
        }
    });
    let mut header = vec!["t", "mu", "mu_dot", "g", "eps_drift", "wronskian_dev"];
    if ell > 0 {
        header.extend(["entropy", "min_sigma"]);
    }
    let mut w = CsvWriter::create(&out.join("trajectory.csv"), &h, &header)?;
    for i in 0..record.times.len() {
        let mut row = vec![
            fmt_f64(record.times[i]),
            fmt_f64(record.mu[i]),
            fmt_f64(record.mu_dot[i]),
            fmt_f64(record.g[i]),
            fmt_f64(record.eps_drift[i]),
            fmt_f64(record.wronskian_dev[i]),
        ];
        if ell > 0 {
            let (sv, sigma) = entropy.get(i).copied().unwrap_or((f64::NAN, f64::NAN));
            row.extend([fmt_f64(sv), fmt_f64(sigma)]);
        }
        w.row(&row)?;
    }
    outcome.outputs.push(w.finish()?);
    outcome.t_q = record.burst_time;
    let d = &mut outcome.diagnostics;
    d.insert("max_rel_eps_drift".into(), json!(record.max_rel_eps_drift));
    d.insert("max_wronskian_dev".into(), json!(record.max_wronskian_dev));
    d.insert("steps".into(), json!(record.steps));
    d.insert("active_modes".into(), json!(record.active_modes));
    let error = result.err().or(entropy_error);
    match error {
        Some(e) => Err(Failure::with_partial(outcome, e)),
        None => Ok(outcome),
    }
}

fn entropy_series(s: &Settings, out: &Path) -> CmdResult {
    let mut keys = EVOLUTION_KEYS.to_vec();
    keys.push("ells");
    s.check_known("entropy-series", &keys)?;
    let ells: Vec<usize> = s.get_list("ells", &[5, 10, 20, 40])?;
    let (setup, finalize) = evolution_setup(s)?;
    let h = hash("entropy-series", s);
    let mut outcome = Outcome::default();
    outcome.resonant_modes = predicted_resonances(&setup, &mut outcome.diagnostics)?;
    let state = finalize()?;
    if let Some(&bad) = ells.iter().find(|&&l| l == 0 || l > state.n) {
        return Err(invalid("ells", &bad.to_string(), "interval lengths must be in 1..=N").into());
    }
    let n = state.n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut entropy_error = None;
    let (record, result) = evolve_partial(&state, setup.t_max, setup.dt, &setup.opts, |evo| {
        if entropy_error.is_some() {
            return;
        }
        let snap = evo.snapshot();
        let mut row = vec![snap.time];
        for &ell in &ells {
            match interval_entropy(&snap, ell) {
                Ok(sample) => row.push(sample.entropy),
                Err(e) => {
                    entropy_error = Some(e);
                    return;
                }
            }
        }
        let (zero, pi) = (&snap.modes[0], snap.modes.last().expect("state has modes"));
        let delta = closed_form_delta(zero.f, zero.fdot, pi.f, pi.fdot, n);
        row.push(delta);
        row.push(closed_form_entropy(delta, ells[0]));
        rows.push(row);
    });
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(ells.iter().map(|l| format!("entropy_ell{l}")));
    header.push("delta".into());
    header.push(format!("closed_form_ell{}", ells[0]));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&out.join("entropy.csv"), &h, &header)?;
    for row in &rows {
        w.row(&row.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>())?;
    }
    outcome.outputs.push(w.finish()?);
    outcome.t_q = record.burst_time;
    let d = &mut outcome.diagnostics;
    d.insert("max_rel_eps_drift".into(), json!(record.max_rel_eps_drift));
    d.insert("max_wronskian_dev".into(), json!(record.max_wronskian_dev));
    d.insert("steps".into(), json!(record.steps));
    match result.err().or(entropy_error) {
        Some(e) => Err(Failure::with_partial(outcome, e)),
        None => Ok(outcome),
    }
}

fn phase_diagram(s: &Settings, out: &Path) -> CmdResult {
    s.check_known(
        "phase-diagram",
        &[
            "r", "alpha", "eps_min", "eps_max", "mu0_min", "mu0_max", "resolution", "m_max", "dt", "eta",
            "scheme", "frequencies", "n",
        ],
    )?;
    let r: f64 = s.get("r", -1.0)?;
    let alpha: f64 = s.get("alpha", 0.5)?;
    let eps_range = (s.get("eps_min", 0.05)?, s.get("eps_max", 3.0)?);
    let mu0_range = (s.get("mu0_min", r)?, s.get("mu0_max", r + 3.0)?);
    let resolution: usize = s.get("resolution", 100)?;
    let (fl, frequencies, m_max) = floquet_options(s)?;
    let h = hash("phase-diagram", s);
    if resolution == 0 {
        return Err(invalid("resolution", "0", "must be positive").into());
    }
    let opts = PhaseOptions {
        m_max,
        dt: fl.dt,
        scheme: fl.scheme,
        eta: fl.eta,
        frequencies,
    };
    let grid = scan(r, alpha, eps_range, mu0_range, (resolution, resolution), &opts)?;
    let mut w = CsvWriter::create(
        &out.join("phase_diagram.csv"),
        &h,
        &["epsilon", "mu0", "class_code", "resonant_count"],
    )?;
    for p in &grid.points {
        w.row(&[
            fmt_f64(p.epsilon),
            fmt_f64(p.mu0),
            p.class.code().to_string(),
            p.resonant_count().to_string(),
        ])?;
    }
    let csv = w.finish()?;
    let counts = grid.class_counts();
    let meta = json!({
        "config_hash": h,
        "r": r,
        "alpha": alpha,
        "epsilon_range": [eps_range.0, eps_range.1],
        "mu0_range": [mu0_range.0, mu0_range.1],
        "resolution": resolution,
        "m_max": m_max,
        "dt": fl.dt,
        "eta": fl.eta,
        "scheme": fl.scheme.name(),
        "frequencies": match frequencies {
            Frequencies::Continuum => "continuum".to_string(),
            Frequencies::Finite { n } => format!("finite N = {n}"),
        },
        "mudot0": 0.0,
        "class_codes": {
            "0": "non-physical",
            "1": "classical",
            "2": "resonant-zero",
            "3": "multi-resonant",
            "4": "marginal",
        },
        "class_counts": counts,
        "saturated_cells": grid.saturated_cells(),
    });
    let meta_path = out.join("phase_diagram.meta.json");
    write_json(&meta_path, &meta)?;
    let mut outcome = Outcome {
        outputs: vec![csv, meta_path],
        ..Default::default()
    };
    outcome.diagnostics.insert("class_counts".into(), json!(counts));
    outcome
        .diagnostics
        .insert("saturated_cells".into(), json!(grid.saturated_cells()));
    Ok(outcome)
}

fn floquet(s: &Settings, out: &Path) -> CmdResult {
    s.check_known(
        "floquet",
        &[
            "r", "alpha", "epsilon", "mu0", "mudot0", "m_max", "dt", "eta", "scheme", "frequencies", "n",
        ],
    )?;
    let r: f64 = s.get("r", -1.0)?;
    let alpha: f64 = s.get("alpha", 0.5)?;
    let epsilon: f64 = s.get("epsilon", 1.2)?;
    let mu0: f64 = s.get("mu0", -0.7)?;
    let mudot0: f64 = s.get("mudot0", 0.0)?;
    let (opts, frequencies, m_max) = floquet_options(s)?;
    let h = hash("floquet", s);
    let omega_sq = match frequencies {
        Frequencies::Continuum => continuum_table(alpha, m_max)?,
        Frequencies::Finite { n } => {
            let table = build_dispersion::<f64>(CouplingKind::strong_long_range(alpha)?, n)?;
            let top = m_max.min(table.len() - 1);
            table.omega_sq[..=top].to_vec()
        }
    };
    let orbit = make_orbit(ClassicalParams::new(r, epsilon), mu0, mudot0)?;
    let reports = resonance_report(&orbit, &omega_sq, &opts)?;
    let mut w = CsvWriter::create(
        &out.join("floquet.csv"),
        &h,
        &["m", "omega_sq", "trace", "det", "class", "rate", "filtered"],
    )?;
    for rep in &reports {
        w.row(&[
            rep.m.to_string(),
            fmt_f64(rep.omega_sq),
            fmt_f64(rep.trace),
            fmt_f64(rep.det),
            rep.class.label().to_string(),
            fmt_f64(rep.class.rate()),
            rep.filtered.to_string(),
        ])?;
    }
    let mut outcome = Outcome {
        outputs: vec![w.finish()?],
        resonant_modes: reports.iter().filter(|r| r.class.is_resonant()).map(|r| r.m).collect(),
        ..Default::default()
    };
    let d = &mut outcome.diagnostics;
    d.insert("period".into(), json!(orbit.period));
    d.insert("mu_minus".into(), json!(orbit.mu_minus));
    d.insert("mu_plus".into(), json!(orbit.mu_plus));
    d.insert("min_mu".into(), json!(orbit.min_mu()));
    d.insert("classical_energy".into(), json!(orbit.energy));
    let max_det_dev = reports.iter().map(|r| r.det_deviation).fold(0.0, f64::max);
    d.insert("max_det_deviation".into(), json!(max_det_dev));
    Ok(outcome)
}
