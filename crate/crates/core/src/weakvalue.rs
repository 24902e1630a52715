//! Normalized matrix elements `⟨O⟩_Q^{BA}` and the checks built on them.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, evolve, EvolvingState, StateKind, System};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, I};
use crate::maximizer::MaximizationResult;
use crate::qmetric::{self, q_inner};
use crate::sampling;

/// Relative size of `⟨B|_Q A⟩` below which the weak value is undefined.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Relative tolerance of the Q-Hermiticity precondition.
pub const Q_HERMITIAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakValueReport {
    pub time: f64,
    #[serde(with = "crate::harness::report::complex")]
    pub value: c64,
    /// `|Im value| / (1 + |value|)`.
    pub imag_residual: f64,
    /// `|value − ⟨Ã(t)|_Q O|Ã(t)⟩|`.
    pub tilde_delta: f64,
    /// `|value − ⟨O⟩^{AA}|`, Hermitian `H` only.
    pub aa_delta: Option<f64>,
}

fn check_observable(o: &CMat, sys: &System) -> Result<()> {
    linalg::check_square(o)?;
    if o.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: o.nrows() });
    }
    Ok(())
}

/// `⟨B(t)|_Q O|A(t)⟩ / ⟨B(t)|_Q A(t)⟩`.
pub fn normalized_matrix_element(
    o: &CMat,
    b: &EvolvingState,
    a: &EvolvingState,
    sys: &System,
    t: f64,
) -> Result<c64> {
    check_observable(o, sys)?;
    if a.kind != StateKind::A {
        return Err(Error::KindMismatch { expected: StateKind::A, found: a.kind });
    }
    if b.kind != StateKind::B {
        return Err(Error::KindMismatch { expected: StateKind::B, found: b.kind });
    }
    let ca = dynamics::eigen_coordinates(a, sys, t)?;
    let cb = dynamics::eigen_coordinates(b, sys, t)?;
    let den = linalg::inner(&cb, &ca);
    let scale = ca.norm() * cb.norm();
    if !(den.norm() > DENOMINATOR_TOL * scale) {
        return Err(Error::VanishingDenominator { magnitude: den.norm() });
    }
    let num = linalg::inner(&cb, &(eigen_frame(o, sys) * &ca));
    Ok(num / den)
}

/// `P⁻¹ O P`, the observable acting on eigenbasis coordinates.
fn eigen_frame(o: &CMat, sys: &System) -> CMat {
    &sys.decomp.p_inv * o * &sys.decomp.p
}

/// `⟨Ã(t)|_Q O|Ã(t)⟩` for the tilde state grown from `a_max`.
pub fn tilde_expectation(o: &CMat, a_max: &EvolvingState, sys: &System, t: f64) -> Result<c64> {
    check_observable(o, sys)?;
    if a_max.kind != StateKind::A {
        return Err(Error::KindMismatch { expected: StateKind::A, found: a_max.kind });
    }
    let c = dynamics::eigen_coordinates(&a_max.with_kind(StateKind::Tilde), sys, t)?;
    Ok(linalg::inner(&c, &(eigen_frame(o, sys) * &c)))
}

/// `⟨A(t)|O|A(t)⟩ / ⟨A(t)|A(t)⟩` with the ordinary inner product.
pub fn aa_expectation(o: &CMat, a: &EvolvingState, sys: &System, t: f64) -> Result<c64> {
    check_observable(o, sys)?;
    let at = evolve(a, sys, t)?;
    let nrm = at.ket.norm_squared();
    Ok(linalg::inner(&at.ket, &(o * &at.ket)) / nrm)
}

fn report_at(o: &CMat, result: &MaximizationResult, sys: &System, t: f64, hermitian: bool) -> Result<WeakValueReport> {
    let value = normalized_matrix_element(o, &result.b_state, &result.a_state, sys, t)?;
    let tilde = tilde_expectation(o, &result.a_state, sys, t)?;
    let aa_delta = if hermitian {
        Some((value - aa_expectation(o, &result.a_state, sys, t)?).norm())
    } else {
        None
    };
    Ok(WeakValueReport {
        time: t,
        value,
        imag_residual: value.im.abs() / (1.0 + value.norm()),
        tilde_delta: (value - tilde).norm(),
        aa_delta,
    })
}

/// One report per time for a Q-Hermitian observable and a maximizing pair.
pub fn verify_reality(
    o: &CMat,
    result: &MaximizationResult,
    sys: &System,
    times: &[f64],
) -> Result<Vec<WeakValueReport>> {
    check_observable(o, sys)?;
    let residual = qmetric::q_hermiticity_residual(o, &sys.metric)?;
    if residual > Q_HERMITIAN_TOL {
        return Err(Error::NotQHermitian { residual });
    }
    let hermitian = linalg::hermiticity_residual(&sys.h) <= dynamics::HERMITIAN_TOL;
    times.iter().map(|&t| report_at(o, result, sys, t, hermitian)).collect()
}

/// Largest `|⟨O⟩_Q^{BA} − ⟨Ã(t)|_Q O|Ã(t)⟩|` over `times`.
pub fn tilde_equivalence(o: &CMat, result: &MaximizationResult, sys: &System, times: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &t in times {
        let value = normalized_matrix_element(o, &result.b_state, &result.a_state, sys, t)?;
        let tilde = tilde_expectation(o, &result.a_state, sys, t)?;
        worst = worst.max((value - tilde).norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestSample {
    pub dt: f64,
    /// Central difference of `⟨O⟩_Q^{BA}` (real part).
    pub lhs: f64,
    /// `(i/ħ)⟨[H_Qh, O]⟩_Q^{ÃÃ}` (real part).
    pub rhs: f64,
    /// `|lhs − rhs|` on the full complex values.
    pub fd_error: f64,
}

pub fn ehrenfest_check(o: &CMat, result: &MaximizationResult, sys: &System, t: f64, dt: f64) -> Result<EhrenfestSample> {
    if !(dt > 0.0) {
        return Err(Error::BadParams(format!("finite-difference step must be positive, got {dt}")));
    }
    let wv = |s: f64| normalized_matrix_element(o, &result.b_state, &result.a_state, sys, s);
    let lhs = (wv(t + dt)? - wv(t - dt)?) / (2.0 * dt);
    let comm = linalg::commutator(&sys.split.hqh, o)?;
    let rhs = I / sys.hbar * tilde_expectation(&comm, &result.a_state, sys, t)?;
    Ok(EhrenfestSample { dt, lhs: lhs.re, rhs: rhs.re, fd_error: (lhs - rhs).norm() })
}

/// Least-squares slope of `log(fd_error)` against `log(dt)`.
pub fn ehrenfest_convergence(
    o: &CMat,
    result: &MaximizationResult,
    sys: &System,
    t: f64,
    dts: &[f64],
) -> Result<(f64, Vec<EhrenfestSample>)> {
    let samples = dts
        .iter()
        .map(|&dt| ehrenfest_check(o, result, sys, t, dt))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.dt.ln(), s.fd_error.ln())).collect();
    Ok((log_log_slope(&pts), samples))
}

fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `|⟨O⟩^{B_max A} − ⟨A(t)|O|A(t)⟩|` for Hermitian `H`.
pub fn rat_collapse_check(
    o: &CMat,
    a_state: &EvolvingState,
    b_max: &MaximizationResult,
    sys: &System,
    t: f64,
) -> Result<f64> {
    dynamics::require_hermitian(&sys.h)?;
    let value = normalized_matrix_element(o, &b_max.b_state, a_state, sys, t)?;
    Ok((value - aa_expectation(o, a_state, sys, t)?).norm())
}

/// Median `|Im⟨O⟩_Q^{BA}|` at `t` over random Q-normalized final states that
/// are not collinear with `A(t)`.
pub fn random_b_imag_median(
    o: &CMat,
    a_state: &EvolvingState,
    sys: &System,
    t: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = sampling::rng(seed, 1);
    let at = evolve(a_state, sys, t)?;
    let mut values = Vec::with_capacity(draws);
    while values.len() < draws {
        let ket = sampling::gaussian_vec(sys.dim(), &mut rng);
        let b = EvolvingState::normalized(ket, t, StateKind::B, &sys.metric)?;
        let overlap = q_inner(&b.ket, &at.ket, &sys.metric)?.norm() / at.q_norm_at_ref.sqrt();
        if !(1e-6..=1.0 - 1e-6).contains(&overlap) {
            continue;
        }
        values.push(normalized_matrix_element(o, &b, &at, sys, t)?.im.abs());
    }
    values.sort_by(f64::total_cmp);
    Ok(if values.is_empty() { 0.0 } else { values[values.len() / 2] })
}
