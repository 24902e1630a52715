//! Scenario execution. Module errors become failed checks; the run goes on.

use std::time::Instant;

use rayon::prelude::*;

use crate::dynamics::{self, evolve, EvolvingState, StateKind, System, TimeSpan};
use crate::error::{Error, Result};
use crate::harness::config::{MatrixSpec, Mode, ObservableSpec, ScanParameter, ScenarioConfig, Tolerances};
use crate::harness::generate::{gen_hamiltonian, gen_q_hermitian_observable};
use crate::harness::report::{CheckEntry, MaximizationSummary, ObservableWeakValues, RunReport, ScanPoint, WallTime};
use crate::linalg::{self, c64, CMat, EigOptions};
use crate::maximizer::{self, AscentOptions, MaxFamilyParams, MaxMethod, MaximizationResult};
use crate::qmetric;
use crate::sampling;
use crate::weakvalue;

/// Finite-difference errors at or below this (relative to `1 + |⟨O⟩|`) count
/// as exact, so no convergence order is fitted.
const FD_EXACT: f64 = 1e-10;

/// RNG stream for the fixed initial state of Hermitian runs.
const STREAM_INITIAL_STATE: u64 = 7;

struct Recorder<'a> {
    checks: &'a mut Vec<CheckEntry>,
}

impl Recorder<'_> {
    fn record(&mut self, name: impl Into<String>, residual: Result<f64>, threshold: f64) -> bool {
        let name = name.into();
        let entry = match residual {
            Ok(r) => CheckEntry { passed: r <= threshold, residual: Some(r), threshold, detail: None, name },
            Err(e) => CheckEntry { passed: false, residual: None, threshold, detail: Some(e.to_string()), name },
        };
        let passed = entry.passed;
        self.checks.push(entry);
        passed
    }

    fn fail(&mut self, name: impl Into<String>, error: &Error, threshold: f64) {
        self.checks.push(CheckEntry {
            name: name.into(),
            passed: false,
            residual: None,
            threshold,
            detail: Some(error.to_string()),
        });
    }

    fn note(&mut self, name: impl Into<String>, residual: f64, threshold: f64, detail: String) {
        self.checks.push(CheckEntry {
            name: name.into(),
            passed: residual <= threshold,
            residual: Some(residual),
            threshold,
            detail: Some(detail),
        });
    }
}

fn eig_options(tol: &Tolerances) -> EigOptions {
    EigOptions { tol: tol.eig_residual, cond_max: tol.cond_p_max }
}

fn resolve_hamiltonian(cfg: &ScenarioConfig) -> Result<CMat> {
    match &cfg.hamiltonian {
        MatrixSpec::Matrix(rows) => linalg::from_rows(rows),
        MatrixSpec::Generate(g) => gen_hamiltonian(g.kind, g.n, cfg.seed, &g.options),
    }
}

fn resolve_observable(spec: &ObservableSpec, index: usize, cfg: &ScenarioConfig, sys: &System) -> Result<CMat> {
    let n = sys.dim();
    let o = match spec {
        ObservableSpec::Identity => linalg::identity(n),
        ObservableSpec::RandomQHermitian => {
            gen_q_hermitian_observable(&sys.metric, n, cfg.seed.wrapping_add(1 + index as u64))?
        }
        ObservableSpec::Matrix(rows) => linalg::from_rows(rows)?,
    };
    if o.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: o.nrows() });
    }
    Ok(o)
}

fn relative_gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// `‖P⁻¹ H_Qh P − Re D‖ + ‖P⁻¹ H_Qa P − i Im D‖`, relative to `max(1, max|λ|)`.
fn split_spectra_residual(sys: &System) -> f64 {
    let d = &sys.decomp;
    let re: Vec<c64> = d.eigenvalues.iter().map(|l| c64::new(l.re, 0.0)).collect();
    let im: Vec<c64> = d.eigenvalues.iter().map(|l| c64::new(0.0, l.im)).collect();
    let hh = &d.p_inv * &sys.split.hqh * &d.p;
    let ha = &d.p_inv * &sys.split.hqa * &d.p;
    let scale = d.eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
    (linalg::norm(&(hh - linalg::diag(&re))) + linalg::norm(&(ha - linalg::diag(&im)))) / scale
}

fn structural_checks(rec: &mut Recorder, sys: &System, tol: &Tolerances) {
    rec.record("q_orthonormality", qmetric::q_orthonormality_residual(&sys.decomp, &sys.metric), tol.q_orthonormality);
    rec.record("q_normality", qmetric::q_normality_residual(&sys.h, &sys.metric), tol.q_normality);
    rec.record("split_spectra", Ok(split_spectra_residual(sys)), tol.split_spectra);
}

/// Analytic, SVD and (small `n`) gradient maximizers plus the random-pair bound.
fn maximization_checks(
    rec: &mut Recorder,
    report: &mut RunReport,
    cfg: &ScenarioConfig,
    sys: &System,
) -> Option<MaximizationResult> {
    let tol = &cfg.tolerances;
    let span = &cfg.span;
    let subset = maximizer::imag_max_subset(&sys.decomp, tol.tol_band);
    let analytic = maximizer::analytic_max_pair(sys, span, &MaxFamilyParams::uniform(&subset), tol.tol_band);
    let analytic = match analytic {
        Ok(r) => {
            rec.record("analytic_amplitude", Ok(relative_gap(r.amplitude.norm(), r.predicted_amplitude)), tol.amplitude);
            rec.record(
                "family_conditions",
                Ok(maximizer::family_condition_residual(&r, sys, span, &subset)),
                tol.family_conditions,
            );
            report.maximizations.push(MaximizationSummary::from(&r));
            Some(r)
        }
        Err(e) => {
            rec.record("analytic_amplitude", Err(e), tol.amplitude);
            None
        }
    };
    let predicted = (subset.b * span.duration() / sys.hbar).exp();

    let oracle = match maximizer::svd_oracle_max(sys, span) {
        Ok(r) => {
            rec.record("svd_oracle_amplitude", Ok(relative_gap(r.achieved_amplitude, predicted)), tol.amplitude);
            report.maximizations.push(MaximizationSummary::from(&r));
            Some(r.achieved_amplitude)
        }
        Err(e) => {
            rec.record("svd_oracle_amplitude", Err(e), tol.amplitude);
            None
        }
    };

    let n = sys.dim();
    if n <= cfg.run.gradient_max_dim {
        let opts = AscentOptions {
            max_iters: cfg.run.max_iters,
            ..AscentOptions::new(cfg.run.restarts, cfg.seed)
        };
        match maximizer::gradient_ascent_max(sys, span, &opts) {
            Ok(r) => {
                let excess = (r.achieved_amplitude / predicted - 1.0).max(0.0);
                rec.record("gradient_upper_bound", Ok(excess), tol.amplitude);
                if n <= cfg.run.gradient_reach_dim {
                    let reference = oracle.unwrap_or(predicted);
                    rec.record("gradient_reaches_oracle", Ok(relative_gap(r.achieved_amplitude, reference)), tol.gradient);
                }
                report.maximizations.push(MaximizationSummary::from(&r));
            }
            Err(e) => {
                rec.fail("gradient_upper_bound", &e, tol.amplitude);
                if n <= cfg.run.gradient_reach_dim {
                    rec.fail("gradient_reaches_oracle", &e, tol.gradient);
                }
            }
        }
    }

    if cfg.run.random_pairs > 0 {
        let best = maximizer::max_random_pair_amplitude(sys, span, cfg.run.random_pairs, cfg.seed);
        rec.record("random_pair_bound", best.map(|b| (b / predicted - 1.0).max(0.0)), tol.amplitude);
    }
    analytic
}

fn ehrenfest_entry(rec: &mut Recorder, name: String, o: &CMat, result: &MaximizationResult, sys: &System, cfg: &ScenarioConfig) {
    let t = 0.5 * (cfg.span.t_a + cfg.span.t_b);
    let dts = &cfg.run.ehrenfest_dts;
    let tol = cfg.tolerances.slope;
    let value = weakvalue::normalized_matrix_element(o, &result.b_state, &result.a_state, sys, t);
    let outcome = value.and_then(|v| Ok((v, weakvalue::ehrenfest_convergence(o, result, sys, t, dts)?)));
    match outcome {
        Err(e) => {
            rec.record(name, Err(e), tol);
        }
        Ok((v, (slope, samples))) => {
            let worst = samples.iter().map(|s| s.fd_error).fold(0.0, f64::max);
            if worst <= FD_EXACT * (1.0 + v.norm()) {
                rec.note(name, 0.0, tol, format!("exact to roundoff (max error {worst:.3e})"));
            } else {
                rec.note(name, (slope - 2.0).abs(), tol, format!("slope {slope:.4}"));
            }
        }
    }
}

/// Reality, tilde equivalence and time development for one observable.
fn weak_value_checks(
    rec: &mut Recorder,
    report: &mut RunReport,
    cfg: &ScenarioConfig,
    sys: &System,
    result: &MaximizationResult,
    times: &[f64],
) {
    let tol = &cfg.tolerances;
    for (k, spec) in cfg.observables.iter().enumerate() {
        let o = match resolve_observable(spec, k, cfg, sys) {
            Ok(o) => o,
            Err(e) => {
                rec.fail(format!("observable[{k}].reality"), &e, tol.reality);
                rec.fail(format!("observable[{k}].tilde_equivalence"), &e, tol.tilde);
                rec.record(format!("observable[{k}].ehrenfest_slope"), Err(e), tol.slope);
                continue;
            }
        };
        match weakvalue::verify_reality(&o, result, sys, times) {
            Ok(reports) => {
                let worst_im = reports.iter().map(|r| r.imag_residual).fold(0.0, f64::max);
                let worst_tilde = reports.iter().map(|r| r.tilde_delta / (1.0 + r.value.norm())).fold(0.0, f64::max);
                rec.record(format!("observable[{k}].reality"), Ok(worst_im), tol.reality);
                rec.record(format!("observable[{k}].tilde_equivalence"), Ok(worst_tilde), tol.tilde);
                report.weak_values.push(ObservableWeakValues { observable: k, method: result.method, reports });
            }
            Err(e) => {
                rec.fail(format!("observable[{k}].reality"), &e, tol.reality);
                rec.record(format!("observable[{k}].tilde_equivalence"), Err(e), tol.tilde);
            }
        }
        ehrenfest_entry(rec, format!("observable[{k}].ehrenfest_slope"), &o, result, sys, cfg);
    }
}

/// Failed entries for every observable check when no maximizing pair exists.
fn missing_pair(rec: &mut Recorder, cfg: &ScenarioConfig) {
    let e = Error::BadParams("no analytic maximizing pair".into());
    let tol = &cfg.tolerances;
    for k in 0..cfg.observables.len() {
        rec.fail(format!("observable[{k}].reality"), &e, tol.reality);
        rec.fail(format!("observable[{k}].tilde_equivalence"), &e, tol.tilde);
        rec.fail(format!("observable[{k}].ehrenfest_slope"), &e, tol.slope);
    }
}

fn collinearity_residual(result: &MaximizationResult, sys: &System, t_a: f64) -> Result<f64> {
    let b = evolve(&result.b_state, sys, t_a)?.ket;
    let a = &result.a_state.ket;
    let overlap = linalg::inner(a, &b) / a.norm_squared();
    Ok((&b - a * overlap).norm() / b.norm())
}

fn hermitian_checks(rec: &mut Recorder, report: &mut RunReport, cfg: &ScenarioConfig, sys: &System, times: &[f64]) {
    let tol = &cfg.tolerances;
    let span = &cfg.span;
    let mut rng = sampling::rng(cfg.seed, STREAM_INITIAL_STATE);
    let ket = sampling::unit_vec(sys.dim(), &mut rng);
    let a_state = match EvolvingState::normalized(ket, span.t_a, StateKind::A, &sys.metric) {
        Ok(a) => a,
        Err(e) => {
            rec.record("rat_amplitude", Err(e), tol.rat);
            return;
        }
    };
    let main = match maximizer::rat_maximize_b(&a_state, sys, span, cfg.run.theta_c) {
        Ok(r) => r,
        Err(e) => {
            rec.record("rat_amplitude", Err(e), tol.rat);
            return;
        }
    };
    rec.record("rat_amplitude", Ok((main.amplitude.norm() - 1.0).abs()), tol.rat);
    rec.record("collinearity", collinearity_residual(&main, sys, span.t_a), tol.collinearity);
    report.maximizations.push(MaximizationSummary::from(&main));

    let variants: Vec<Result<MaximizationResult>> = cfg
        .run
        .theta_c_variants
        .iter()
        .map(|&tc| maximizer::rat_maximize_b(&a_state, sys, span, tc))
        .collect();

    for (k, spec) in cfg.observables.iter().enumerate() {
        let o = match resolve_observable(spec, k, cfg, sys) {
            Ok(o) => o,
            Err(e) => {
                rec.fail(format!("observable[{k}].aa_collapse"), &e, tol.rat);
                rec.fail(format!("observable[{k}].theta_c_invariance"), &e, tol.theta_invariance);
                rec.fail(format!("observable[{k}].heisenberg"), &e, tol.heisenberg);
                rec.record(format!("observable[{k}].reality"), Err(e), tol.reality);
                continue;
            }
        };
        let collapse = times
            .iter()
            .map(|&t| weakvalue::rat_collapse_check(&o, &a_state, &main, sys, t))
            .try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)));
        rec.record(format!("observable[{k}].aa_collapse"), collapse, tol.rat);

        let invariance = (|| -> Result<f64> {
            let mut worst = 0.0f64;
            for &t in times {
                let base = weakvalue::normalized_matrix_element(&o, &main.b_state, &a_state, sys, t)?;
                for v in &variants {
                    let v = v.as_ref().map_err(|e| Error::BadParams(e.to_string()))?;
                    let x = weakvalue::normalized_matrix_element(&o, &v.b_state, &a_state, sys, t)?;
                    worst = worst.max((x - base).norm());
                }
            }
            Ok(worst)
        })();
        rec.record(format!("observable[{k}].theta_c_invariance"), invariance, tol.theta_invariance);

        let heis = (|| -> Result<f64> {
            let mut worst = 0.0f64;
            for &t in times {
                let schrodinger = weakvalue::aa_expectation(&o, &a_state, sys, t)?;
                let oh = dynamics::heisenberg_operator(&o, &sys.h, t, span.t_a, sys.hbar)?;
                let a = &a_state.ket;
                let heisenberg = linalg::inner(a, &(oh * a)) / a.norm_squared();
                worst = worst.max((schrodinger - heisenberg).norm() / (1.0 + schrodinger.norm()));
            }
            Ok(worst)
        })();
        rec.record(format!("observable[{k}].heisenberg"), heis, tol.heisenberg);

        match weakvalue::verify_reality(&o, &main, sys, times) {
            Ok(reports) => {
                let worst_im = reports.iter().map(|r| r.imag_residual).fold(0.0, f64::max);
                rec.record(format!("observable[{k}].reality"), Ok(worst_im), tol.reality);
                report.weak_values.push(ObservableWeakValues { observable: k, method: MaxMethod::HermitianPhase, reports });
            }
            Err(e) => {
                rec.record(format!("observable[{k}].reality"), Err(e), tol.reality);
            }
        }
        ehrenfest_entry(rec, format!("observable[{k}].ehrenfest_slope"), &o, &main, sys, cfg);
    }
}

fn run_single(cfg: &ScenarioConfig, times: &[f64]) -> RunReport {
    let mut report = RunReport::new(cfg.clone());
    let mut checks = Vec::new();
    let mut rec = Recorder { checks: &mut checks };
    let tol = &cfg.tolerances;

    let h = match resolve_hamiltonian(cfg) {
        Ok(h) => h,
        Err(e) => {
            rec.record("eigendecomposition", Err(e), tol.eig_residual);
            report.checks = checks;
            return report;
        }
    };
    report.hamiltonian = linalg::to_rows(&h);
    report.classification = Some(dynamics::classify(&h));

    if cfg.mode == Mode::Theorem2 {
        let residual = linalg::hermiticity_residual(&h);
        if !rec.record("hermiticity", Ok(residual), dynamics::HERMITIAN_TOL) {
            report.checks = checks;
            return report;
        }
    }

    let sys = match System::new(h, cfg.hbar, &eig_options(tol)) {
        Ok(s) => s,
        Err(e) => {
            rec.record("eigendecomposition", Err(e), tol.eig_residual);
            report.checks = checks;
            return report;
        }
    };
    rec.record("eigendecomposition", Ok(sys.decomp.residual), tol.eig_residual);
    report.eigenvalues = sys.decomp.eigenvalues.iter().map(|l| [l.re, l.im]).collect();
    report.cond_p = Some(sys.decomp.cond_p);

    match cfg.mode {
        Mode::Theorem1 | Mode::Maximize => {
            structural_checks(&mut rec, &sys, tol);
            let analytic = maximization_checks(&mut rec, &mut report, cfg, &sys);
            if cfg.mode == Mode::Theorem1 {
                match analytic {
                    Some(r) => weak_value_checks(&mut rec, &mut report, cfg, &sys, &r, times),
                    None => missing_pair(&mut rec, cfg),
                }
            }
        }
        Mode::Weakvalue => {
            let subset = maximizer::imag_max_subset(&sys.decomp, tol.tol_band);
            match maximizer::analytic_max_pair(&sys, &cfg.span, &MaxFamilyParams::uniform(&subset), tol.tol_band) {
                Ok(r) => {
                    report.maximizations.push(MaximizationSummary::from(&r));
                    weak_value_checks(&mut rec, &mut report, cfg, &sys, &r, times);
                }
                Err(e) => {
                    rec.record("analytic_amplitude", Err(e), tol.amplitude);
                    missing_pair(&mut rec, cfg);
                }
            }
        }
        Mode::Theorem2 => hermitian_checks(&mut rec, &mut report, cfg, &sys, times),
        Mode::Scan => unreachable!("scan points never run in scan mode"),
    }
    report.checks = checks;
    report
}

fn scan_point(cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
    let scan = cfg.scan.as_ref().expect("validated scan");
    let mut point = cfg.clone();
    point.mode = scan.mode;
    point.scan = None;
    match scan.parameter {
        ScanParameter::Duration => point.span = TimeSpan { t_a: cfg.span.t_a, t_b: cfg.span.t_a + value },
        ScanParameter::Dimension => {
            if let MatrixSpec::Generate(g) = &mut point.hamiltonian {
                g.n = value as usize;
            }
        }
    }
    point
}

/// Runs a validated scenario. Only configuration errors are returned; all
/// numerical failures are recorded as failed checks.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = if cfg.mode == Mode::Scan {
        let values = &cfg.scan.as_ref().expect("validated scan").values;
        let points: Vec<ScanPoint> = values
            .par_iter()
            .map(|&v| {
                let point = scan_point(cfg, v);
                let times = point.span.sample(point.run.times);
                ScanPoint { value: v, report: run_single(&point, &times) }
            })
            .collect();
        let mut report = RunReport::new(cfg.clone());
        report.scan = points;
        report
    } else {
        run_single(cfg, &cfg.span.sample(cfg.run.times))
    };
    report.wall_time = WallTime(start.elapsed());
    Ok(report)
}
