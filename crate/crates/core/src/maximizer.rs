//! Maximizing past/future state pairs for `|⟨B(T_B)|_Q e^{−iHT/ħ} |A(T_A)⟩|`.
//!
//! Three independent routes: the analytic family supported on the
//! eigenvalues of maximal imaginary part, the top singular pair of the
//! transfer matrix in metric-whitened coordinates, and projected gradient
//! ascent over the product of unit spheres. For Hermitian `H` with a given
//! initial state, [`rat_maximize_b`] builds the collinear final state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, evolve, transition_amplitude, EvolvingState, StateKind, System, TimeSpan};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec, EigenDecomposition, I};
use crate::qmetric;
use crate::sampling;

pub const DEFAULT_TOL_BAND: f64 = 1e-9;

/// Eigenvalue indices whose imaginary part reaches the maximum `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagMaxSubset {
    pub b: f64,
    pub indices: Vec<usize>,
    pub tol_band: f64,
}

pub fn imag_max_subset(decomp: &EigenDecomposition, tol_band: f64) -> ImagMaxSubset {
    let b = decomp.eigenvalues.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
    let cut = b - tol_band * b.abs().max(1.0);
    let indices = decomp
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| l.im >= cut)
        .map(|(i, _)| i)
        .collect();
    ImagMaxSubset { b, indices, tol_band }
}

/// Free parameters of the analytic maximizing family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxFamilyParams {
    pub indices: Vec<usize>,
    /// `|a_i(T_A)| = |b_i(T_B)|`, with `Σ w_i² = 1`.
    pub weights: Vec<f64>,
    /// `θ_{a_i}`.
    pub phases: Vec<f64>,
    /// Common phase `Θ_c`.
    pub theta_c: f64,
}

impl MaxFamilyParams {
    /// Uniform weights, zero phases, `Θ_c = 0`.
    pub fn uniform(subset: &ImagMaxSubset) -> Self {
        let m = subset.indices.len();
        MaxFamilyParams {
            indices: subset.indices.clone(),
            weights: vec![1.0 / (m as f64).sqrt(); m],
            phases: vec![0.0; m],
            theta_c: 0.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(subset: &ImagMaxSubset, rng: &mut R) -> Self {
        let m = subset.indices.len();
        let raw = sampling::unit_vec(m, rng);
        MaxFamilyParams {
            indices: subset.indices.clone(),
            weights: raw.iter().map(|z| z.norm()).collect(),
            phases: (0..m).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
            theta_c: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.indices.len();
        if m == 0 || self.weights.len() != m || self.phases.len() != m {
            return Err(Error::BadParams(format!(
                "indices/weights/phases lengths {}/{}/{} must agree and be nonzero",
                m,
                self.weights.len(),
                self.phases.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::BadParams("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().map(|w| w * w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadParams(format!("sum of squared weights is {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxMethod {
    Analytic,
    SvdOracle,
    GradientAscent,
    /// Hermitian `H`, given `A`: `B = e^{−iΘ_c} A`.
    HermitianPhase,
}

#[derive(Clone, Debug)]
pub struct MaximizationResult {
    /// Q-normalized at `T_A`.
    pub a_state: EvolvingState,
    /// Q-normalized at `T_B`.
    pub b_state: EvolvingState,
    pub amplitude: c64,
    pub achieved_amplitude: f64,
    pub predicted_amplitude: f64,
    pub method: MaxMethod,
}

fn predicted(sys: &System, span: &TimeSpan, tol_band: f64) -> (ImagMaxSubset, f64) {
    let subset = imag_max_subset(&sys.decomp, tol_band);
    let value = (subset.b * span.duration() / sys.hbar).exp();
    (subset, value)
}

/// Builds the maximizing pair from explicit family parameters.
pub fn analytic_max_pair(
    sys: &System,
    span: &TimeSpan,
    params: &MaxFamilyParams,
    tol_band: f64,
) -> Result<MaximizationResult> {
    span.validate()?;
    params.validate()?;
    let (subset, predicted_amplitude) = predicted(sys, span, tol_band);
    let n = sys.dim();
    let mut a_coeffs = CVec::zeros(n);
    let mut b_coeffs = CVec::zeros(n);
    let t_over_hbar = span.duration() / sys.hbar;
    for (k, &i) in params.indices.iter().enumerate() {
        if !subset.indices.contains(&i) {
            return Err(Error::SubsetMismatch { index: i });
        }
        let w = params.weights[k];
        let theta_a = params.phases[k];
        let theta_b = theta_a - sys.decomp.eigenvalues[i].re * t_over_hbar - params.theta_c;
        a_coeffs[i] += c64::from_polar(w, theta_a);
        b_coeffs[i] += c64::from_polar(w, theta_b);
    }
    let a_state = EvolvingState::new(&sys.decomp.p * a_coeffs, span.t_a, StateKind::A, &sys.metric)?;
    let b_state = EvolvingState::new(&sys.decomp.p * b_coeffs, span.t_b, StateKind::B, &sys.metric)?;
    let amplitude = transition_amplitude(&b_state, &a_state, sys, span.t_a)?;
    Ok(MaximizationResult {
        a_state,
        b_state,
        amplitude,
        achieved_amplitude: amplitude.norm(),
        predicted_amplitude,
        method: MaxMethod::Analytic,
    })
}

/// `K = Q^{1/2} e^{−iHT/ħ} Q^{−1/2}`; the pair maximization becomes the
/// unit-sphere bilinear problem `max |y† K x|`.
///
/// Evaluated as `(Q^{1/2}P) e^{−iDT/ħ} (Q^{1/2}P)⁻¹`; the bracketed factor
/// is unitary for the metric built from `P`.
pub fn whitened_transfer(sys: &System, span: &TimeSpan) -> Result<CMat> {
    let sp = &sys.metric.q_sqrt * &sys.decomp.p;
    let sp_inv = linalg::inverse(&sp)?;
    let mut scaled = sp;
    let s = span.duration() / sys.hbar;
    for (j, lambda) in sys.decomp.eigenvalues.iter().enumerate() {
        let f = (-I * *lambda * s).exp();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= f;
        }
    }
    Ok(scaled * sp_inv)
}

fn unwhiten(sys: &System, x: &CVec, t: f64, kind: StateKind) -> Result<EvolvingState> {
    EvolvingState::new(&sys.metric.q_sqrt_inv * x, t, kind, &sys.metric)
}

/// Top singular pair of the whitened transfer matrix.
pub fn svd_oracle_max(sys: &System, span: &TimeSpan) -> Result<MaximizationResult> {
    span.validate()?;
    let k = whitened_transfer(sys, span)?;
    let top = linalg::svd_max(&k)?;
    let a_state = unwhiten(sys, &top.v, span.t_a, StateKind::A)?;
    let b_state = unwhiten(sys, &top.u, span.t_b, StateKind::B)?;
    let amplitude = transition_amplitude(&b_state, &a_state, sys, span.t_a)?;
    let (_, predicted_amplitude) = predicted(sys, span, DEFAULT_TOL_BAND);
    Ok(MaximizationResult {
        a_state,
        b_state,
        amplitude,
        achieved_amplitude: top.sigma,
        predicted_amplitude,
        method: MaxMethod::SvdOracle,
    })
}

#[derive(Clone, Debug)]
pub struct AscentOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the relative amplitude gain of an accepted step drops below this.
    pub gain_tol: f64,
    /// Optimize `B` only, with `A(T_A)` held at this ket.
    pub fixed_a: Option<CVec>,
}

impl AscentOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        AscentOptions { restarts, seed, max_iters: 10_000, gain_tol: 1e-12, fixed_a: None }
    }
}

struct AscentRun {
    x: CVec,
    y: CVec,
    value: f64,
    converged: bool,
}

fn normalized(v: CVec) -> CVec {
    let n = v.norm();
    v / c64::new(n, 0.0)
}

/// One backtracking step along `dir` on the unit sphere; `None` if no step
/// improves `|objective|` above `f`.
fn sphere_step(v: &CVec, dir: &CVec, f: f64, objective: impl Fn(&CVec) -> c64) -> Option<(CVec, c64)> {
    let mut step = 1.0;
    while step > 1e-30 {
        let vn = normalized(v + dir * c64::new(step, 0.0));
        let cn = objective(&vn);
        if cn.norm() > f {
            return Some((vn, cn));
        }
        step *= 0.5;
    }
    None
}

/// Block-coordinate projected gradient ascent of `|y† K x|`: a step in `x`
/// with `y` fixed, then a step in `y` with `x` fixed.
fn ascend(k: &CMat, mut x: CVec, mut y: CVec, fix_x: bool, opts: &AscentOptions) -> AscentRun {
    let kh = k.adjoint();
    let mut c = linalg::inner(&y, &(k * &x));
    for _ in 0..opts.max_iters {
        let start = c.norm();
        // Wirtinger gradients of |c|²; any phase works when c = 0
        let weight = |c: c64| if c.norm() == 0.0 { c64::new(1.0, 0.0) } else { c };
        if !fix_x {
            let ky = &kh * &y;
            let gx = &ky * weight(c);
            if let Some((xn, cn)) = sphere_step(&x, &gx, c.norm(), |v| linalg::inner(&ky, v)) {
                x = xn;
                c = cn;
            }
        }
        let kx = k * &x;
        let gy = &kx * weight(c).conj();
        if let Some((yn, cn)) = sphere_step(&y, &gy, c.norm(), |v| linalg::inner(v, &kx)) {
            y = yn;
            c = cn;
        }
        let f = c.norm();
        if f <= start || (f - start) / f < opts.gain_tol {
            return AscentRun { x, y, value: f, converged: true };
        }
    }
    AscentRun { value: c.norm(), x, y, converged: false }
}

/// Best-of-restarts projected gradient ascent in whitened coordinates.
pub fn gradient_ascent_max(sys: &System, span: &TimeSpan, opts: &AscentOptions) -> Result<MaximizationResult> {
    span.validate()?;
    if opts.restarts == 0 {
        return Err(Error::BadParams("restarts must be at least 1".into()));
    }
    let k = whitened_transfer(sys, span)?;
    let n = sys.dim();
    let fixed_x = opts.fixed_a.as_ref().map(|a| normalized(&sys.metric.q_sqrt * a));
    let runs: Vec<AscentRun> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = sampling::rng(opts.seed, r as u64);
            let x0 = sampling::unit_vec(n, &mut rng);
            let y0 = sampling::unit_vec(n, &mut rng);
            match &fixed_x {
                Some(x) => ascend(&k, x.clone(), y0, true, opts),
                None => ascend(&k, x0, y0, false, opts),
            }
        })
        .collect();
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .fold(None::<&AscentRun>, |best, r| match best {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::NoConvergence { iterations: opts.max_iters })?;
    let a_state = unwhiten(sys, &best.x, span.t_a, StateKind::A)?;
    let b_state = unwhiten(sys, &best.y, span.t_b, StateKind::B)?;
    let amplitude = transition_amplitude(&b_state, &a_state, sys, span.t_a)?;
    let (_, predicted_amplitude) = predicted(sys, span, DEFAULT_TOL_BAND);
    Ok(MaximizationResult {
        a_state,
        b_state,
        amplitude,
        achieved_amplitude: best.value,
        predicted_amplitude,
        method: MaxMethod::GradientAscent,
    })
}

/// Final state maximizing the amplitude for a given initial state when `H`
/// is Hermitian: `b_i(T_B) = |a_i(T_A)| e^{i(θ_{a_i} − λ_i T/ħ − Θ_c)}`.
pub fn rat_maximize_b(
    a_state: &EvolvingState,
    sys: &System,
    span: &TimeSpan,
    theta_c: f64,
) -> Result<MaximizationResult> {
    span.validate()?;
    dynamics::require_hermitian(&sys.h)?;
    if a_state.kind != StateKind::A {
        return Err(Error::KindMismatch { expected: StateKind::A, found: a_state.kind });
    }
    let a_state = if a_state.ref_time == span.t_a { a_state.clone() } else { evolve(a_state, sys, span.t_a)? };
    let coeffs = &sys.decomp.p_inv * &a_state.ket;
    let t_over_hbar = span.duration() / sys.hbar;
    let b_coeffs = CVec::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(&sys.decomp.eigenvalues).map(|(a, lambda)| {
            let theta_a = if a.norm() == 0.0 { 0.0 } else { a.arg() };
            c64::from_polar(a.norm(), theta_a - lambda.re * t_over_hbar - theta_c)
        }),
    );
    let b_state = EvolvingState::new(&sys.decomp.p * b_coeffs, span.t_b, StateKind::B, &sys.metric)?;
    let amplitude = transition_amplitude(&b_state, &a_state, sys, span.t_a)?;
    Ok(MaximizationResult {
        a_state,
        b_state,
        amplitude,
        achieved_amplitude: amplitude.norm(),
        predicted_amplitude: 1.0,
        method: MaxMethod::HermitianPhase,
    })
}

/// Largest `|⟨B|_Q e^{−iHT/ħ} A⟩|` over `draws` random Q-normalized pairs.
pub fn max_random_pair_amplitude(sys: &System, span: &TimeSpan, draws: usize, seed: u64) -> Result<f64> {
    let m = sys.transfer_matrix(span);
    let mut rng = sampling::rng(seed, 0);
    let mut best = 0.0f64;
    for _ in 0..draws {
        let a = sys.metric.normalize(&sampling::gaussian_vec(sys.dim(), &mut rng))?;
        let b = sys.metric.normalize(&sampling::gaussian_vec(sys.dim(), &mut rng))?;
        best = best.max(qmetric::q_inner(&b, &(&m * a), &sys.metric)?.norm());
    }
    Ok(best)
}

/// Componentwise check of the maximizing conditions in the eigenbasis.
///
/// Returns the largest violation among: spread of `Θ_i` over the subset,
/// `| Σ|a_i|² − 1 |`, `| Σ|b_i|² − 1 |`, `| |a_i| − |b_i| |` on the subset,
/// and `|a_i|`, `|b_i|` off the subset.
pub fn family_condition_residual(
    result: &MaximizationResult,
    sys: &System,
    span: &TimeSpan,
    subset: &ImagMaxSubset,
) -> f64 {
    let a = &sys.decomp.p_inv * &result.a_state.ket;
    let b = &sys.decomp.p_inv * &result.b_state.ket;
    let t_over_hbar = span.duration() / sys.hbar;
    let mut worst = 0.0f64;
    let mut sa = 0.0;
    let mut sb = 0.0;
    let mut reference: Option<c64> = None;
    for i in 0..a.len() {
        if subset.indices.contains(&i) {
            sa += a[i].norm_sqr();
            sb += b[i].norm_sqr();
            worst = worst.max((a[i].norm() - b[i].norm()).abs());
            // e^{iΘ_i} weighted by R_i, so vanishing components carry no phase
            let rot = a[i] * b[i].conj() * c64::from_polar(1.0, -sys.decomp.eigenvalues[i].re * t_over_hbar);
            match reference {
                None if rot.norm() > 0.0 => reference = Some(rot / rot.norm()),
                Some(r) => worst = worst.max((rot - r * rot.norm()).norm()),
                None => {}
            }
        } else {
            worst = worst.max(a[i].norm()).max(b[i].norm());
        }
    }
    worst.max((sa - 1.0).abs()).max((sb - 1.0).abs())
}
