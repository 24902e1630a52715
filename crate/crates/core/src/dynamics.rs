//! Time evolution of A-type, B-type and tilde states, transition amplitudes
//! and Heisenberg-picture operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, eigendecompose, CMat, CVec, EigOptions, EigenDecomposition, I};
use crate::qmetric::{self, build_q, split_h, HamiltonianSplit, QMetric};

/// Generator selector: A-type states evolve under `H`, B-type under
/// `H^{†Q}`, tilde states under `H_Qh`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    A,
    B,
    Tilde,
}

#[derive(Clone, Debug)]
pub struct EvolvingState {
    pub ket: CVec,
    pub ref_time: f64,
    pub kind: StateKind,
    /// `⟨ket|_Q ket⟩` at `ref_time`.
    pub q_norm_at_ref: f64,
}

impl EvolvingState {
    pub fn new(ket: CVec, ref_time: f64, kind: StateKind, q: &QMetric) -> Result<Self> {
        let q_norm_at_ref = q.norm_sqr(&ket)?;
        Ok(EvolvingState { ket, ref_time, kind, q_norm_at_ref })
    }

    /// Rescales `ket` to unit Q-norm at `ref_time`.
    pub fn normalized(ket: CVec, ref_time: f64, kind: StateKind, q: &QMetric) -> Result<Self> {
        let ket = q.normalize(&ket)?;
        Self::new(ket, ref_time, kind, q)
    }

    pub fn with_kind(&self, kind: StateKind) -> Self {
        EvolvingState { kind, ..self.clone() }
    }
}

/// Initial and final times; `T = t_b − t_a > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub t_a: f64,
    pub t_b: f64,
}

impl TimeSpan {
    pub fn new(t_a: f64, t_b: f64) -> Result<Self> {
        let span = TimeSpan { t_a, t_b };
        span.validate()?;
        Ok(span)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.t_b - self.t_a;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::BadTimeSpan(t));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_b - self.t_a
    }

    /// `count` equally spaced times in `[t_a, t_b]` (both ends included).
    pub fn sample(&self, count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![self.t_a],
            _ => (0..count)
                .map(|k| {
                    if k == count - 1 {
                        self.t_b
                    } else {
                        self.t_a + self.duration() * k as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Hermitian,
    NormalNonHermitian,
    NonNormal,
}

/// A diagonalizable Hamiltonian together with everything derived from it:
/// eigendecomposition, metric, Q-Hermitian split and `ħ`.
#[derive(Clone, Debug)]
pub struct System {
    pub h: CMat,
    pub hbar: f64,
    pub decomp: EigenDecomposition,
    pub metric: QMetric,
    pub split: HamiltonianSplit,
}

/// Relative residual below which `H` counts as Hermitian or normal.
pub const CLASSIFY_TOL: f64 = 1e-12;

impl System {
    pub fn new(h: CMat, hbar: f64, opts: &EigOptions) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::BadParams(format!("hbar must be positive, got {hbar}")));
        }
        let decomp = eigendecompose(&h, opts)?;
        let metric = build_q(&decomp)?;
        let split = split_h(&h, &metric)?;
        Ok(System { h, hbar, decomp, metric, split })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn classify(&self) -> Classification {
        classify(&self.h)
    }

    /// Eigenvalue-wise map applied by the propagator of `kind` over `tau`.
    fn propagator_factor(&self, kind: StateKind, tau: f64) -> impl Fn(c64) -> c64 {
        let s = tau / self.hbar;
        move |lambda: c64| {
            let generator = match kind {
                StateKind::A => lambda,
                StateKind::B => lambda.conj(),
                StateKind::Tilde => c64::new(lambda.re, 0.0),
            };
            (-I * generator * s).exp()
        }
    }

    /// `exp(−i G τ/ħ)` for the generator of `kind`.
    pub fn propagator(&self, kind: StateKind, tau: f64) -> CMat {
        self.decomp.apply_spectral(self.propagator_factor(kind, tau))
    }

    /// Generator matrix of `kind`: `H`, `H^{†Q}` or `H_Qh`.
    pub fn generator(&self, kind: StateKind) -> CMat {
        match kind {
            StateKind::A => self.h.clone(),
            StateKind::B => &self.split.hqh - &self.split.hqa,
            StateKind::Tilde => self.split.hqh.clone(),
        }
    }

    /// `exp(−i H T/ħ)` over the span.
    pub fn transfer_matrix(&self, span: &TimeSpan) -> CMat {
        self.propagator(StateKind::A, span.duration())
    }
}

pub fn classify(h: &CMat) -> Classification {
    if linalg::hermiticity_residual(h) <= CLASSIFY_TOL {
        return Classification::Hermitian;
    }
    let scale = linalg::norm(h).powi(2);
    let comm = linalg::norm(&(h * h.adjoint() - h.adjoint() * h));
    if scale == 0.0 || comm <= CLASSIFY_TOL * scale {
        Classification::NormalNonHermitian
    } else {
        Classification::NonNormal
    }
}

fn check_state(state: &EvolvingState, sys: &System) -> Result<()> {
    if state.ket.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: state.ket.len() });
    }
    Ok(())
}

/// Evolves `state` from its reference time to `t` under the generator of its kind.
pub fn evolve(state: &EvolvingState, sys: &System, t: f64) -> Result<EvolvingState> {
    check_state(state, sys)?;
    let tau = t - state.ref_time;
    let ket = if tau == 0.0 {
        state.ket.clone()
    } else {
        sys.decomp.apply_spectral_vec(sys.propagator_factor(state.kind, tau), &state.ket)
    };
    EvolvingState::new(ket, t, state.kind, &sys.metric)
}

/// Eigenbasis coordinates `P⁻¹|ψ(t)⟩` of `state` evolved to `t`. Since the
/// metric factor is `P⁻¹`, Q-inner products of states are plain inner
/// products of their coordinates.
pub fn eigen_coordinates(state: &EvolvingState, sys: &System, t: f64) -> Result<CVec> {
    check_state(state, sys)?;
    let f = sys.propagator_factor(state.kind, t - state.ref_time);
    let mut c = &sys.decomp.p_inv * &state.ket;
    for (ci, lambda) in c.iter_mut().zip(&sys.decomp.eigenvalues) {
        *ci *= f(*lambda);
    }
    Ok(c)
}

/// `⟨B(t)|_Q A(t)⟩`.
pub fn transition_amplitude(b: &EvolvingState, a: &EvolvingState, sys: &System, t: f64) -> Result<c64> {
    if a.kind != StateKind::A {
        return Err(Error::KindMismatch { expected: StateKind::A, found: a.kind });
    }
    if b.kind != StateKind::B {
        return Err(Error::KindMismatch { expected: StateKind::B, found: b.kind });
    }
    let at = evolve(a, sys, t)?;
    let bt = evolve(b, sys, t)?;
    qmetric::q_inner(&bt.ket, &at.ket, &sys.metric)
}

/// `|Ã(t)⟩ = exp(−i (t − T_A) H_Qh/ħ) |A(T_A)⟩_max`.
pub fn tilde_state(a_max: &EvolvingState, sys: &System, t: f64) -> Result<EvolvingState> {
    if a_max.kind != StateKind::A {
        return Err(Error::KindMismatch { expected: StateKind::A, found: a_max.kind });
    }
    evolve(&a_max.with_kind(StateKind::Tilde), sys, t)
}

/// Relative Hermiticity tolerance for operations that require a Hermitian `H`.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn require_hermitian(h: &CMat) -> Result<()> {
    let residual = linalg::hermiticity_residual(h);
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

/// Heisenberg operator `O_H(t, T_A) = U† O U` with `U = exp(−i H (t − T_A)/ħ)`.
pub fn heisenberg_operator(o: &CMat, h: &CMat, t: f64, t_a: f64, hbar: f64) -> Result<CMat> {
    linalg::check_square(h)?;
    linalg::check_same_dim(h, o)?;
    require_hermitian(h)?;
    let sym = (h + h.adjoint()) * c64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let tau = (t - t_a) / hbar;
    let mut vu = v.clone();
    for (j, e) in eig.eigenvalues.iter().enumerate() {
        let phase = (-I * *e * tau).exp();
        for i in 0..vu.nrows() {
            vu[(i, j)] *= phase;
        }
    }
    let u = vu * v.adjoint();
    Ok(u.adjoint() * o * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, norm};

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn diag_system() -> System {
        System::new(diag(&[c(1.0, 1.0), c(0.0, 0.0)]), 1.0, &EigOptions::default()).unwrap()
    }

    #[test]
    fn time_span_must_be_positive() {
        assert!(TimeSpan::new(0.0, 1.0).is_ok());
        assert!(matches!(TimeSpan::new(1.0, 1.0), Err(Error::BadTimeSpan(_))));
        assert!(matches!(TimeSpan::new(2.0, 1.0), Err(Error::BadTimeSpan(_))));
        let s = TimeSpan::new(0.0, 1.0).unwrap().sample(11);
        assert_eq!(s.len(), 11);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[10], 1.0);
        assert!((s[5] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_time_evolution_is_identity() {
        let sys = diag_system();
        let a = EvolvingState::normalized(CVec::from_vec(vec![c(0.3, 0.1), c(-1.0, 0.2)]), 0.5, StateKind::A, &sys.metric)
            .unwrap();
        let same = evolve(&a, &sys, 0.5).unwrap();
        assert_eq!(same.ket, a.ket);
    }

    #[test]
    fn diagonal_growth() {
        let sys = diag_system();
        let a = EvolvingState::new(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), 0.0, StateKind::A, &sys.metric)
            .unwrap();
        let a1 = evolve(&a, &sys, 1.0).unwrap();
        // exp(-i(1+i)) = e^{1 - i}
        assert!((a1.ket[0] - c(1.0, -1.0).exp()).norm() < 1e-14);
        assert!(a1.ket[1].norm() < 1e-15);
        assert!((a1.q_norm_at_ref.sqrt() - 1f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn diagonal_amplitude() {
        let sys = diag_system();
        let ket = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let a = EvolvingState::new(ket.clone(), 0.0, StateKind::A, &sys.metric).unwrap();
        let b = EvolvingState::new(ket, 2.0, StateKind::B, &sys.metric).unwrap();
        for t in [0.0, 0.7, 2.0] {
            let amp = transition_amplitude(&b, &a, &sys, t).unwrap();
            assert!((amp.norm() - 2f64.exp()).abs() < 1e-12);
            assert!((amp.arg() + 2.0).abs() < 1e-13);
        }
        assert!(matches!(transition_amplitude(&a, &a, &sys, 0.0), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn trivial_amplitudes() {
        let sys = System::new(diag(&[c(1.0, 0.0), c(-1.0, 0.0)]), 1.0, &EigOptions::default()).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let ket = CVec::from_vec(vec![c(s, 0.0), c(0.0, s)]);
        let a = EvolvingState::new(ket.clone(), 0.0, StateKind::A, &sys.metric).unwrap();
        let b = EvolvingState::new(ket, 0.0, StateKind::B, &sys.metric).unwrap();
        assert!((transition_amplitude(&b, &a, &sys, 0.0).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let orth = EvolvingState::new(CVec::from_vec(vec![c(s, 0.0), c(0.0, -s)]), 0.0, StateKind::B, &sys.metric)
            .unwrap();
        assert!(transition_amplitude(&orth, &a, &sys, 0.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn tilde_at_initial_time_and_hermitian_case() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, -0.2), c(0.5, 0.2), c(-0.3, 0.0)]);
        let sys = System::new(h, 1.0, &EigOptions::default()).unwrap();
        let a = EvolvingState::normalized(CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]), 0.0, StateKind::A, &sys.metric)
            .unwrap();
        let t0 = tilde_state(&a, &sys, 0.0).unwrap();
        assert_eq!(t0.kind, StateKind::Tilde);
        assert_eq!(t0.ket, a.ket);
        let t1 = tilde_state(&a, &sys, 1.3).unwrap();
        let a1 = evolve(&a, &sys, 1.3).unwrap();
        assert!(linalg::vec_norm(&(t1.ket - a1.ket)) < 1e-13);
    }

    #[test]
    fn heisenberg_pauli_rotation() {
        let z = diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let x = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let y = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert!(norm(&(heisenberg_operator(&x, &z, 0.4, 0.4, 1.0).unwrap() - &x)) < 1e-15);
        let id = linalg::identity(2);
        assert!(norm(&(heisenberg_operator(&id, &z, 3.0, 0.0, 1.0).unwrap() - &id)) < 1e-14);
        let tau = std::f64::consts::FRAC_PI_2;
        // brute force: U = diag(e^{-iτ}, e^{iτ})
        let u = diag(&[(-I * tau).exp(), (I * tau).exp()]);
        let brute = u.adjoint() * &x * &u;
        let rotated = &x * c((2.0 * tau).cos(), 0.0) - &y * c((2.0 * tau).sin(), 0.0);
        let oh = heisenberg_operator(&x, &z, tau, 0.0, 1.0).unwrap();
        assert!(norm(&(&oh - &brute)) < 1e-14);
        assert!(norm(&(&oh - &rotated)) < 1e-14);
        let nh = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(heisenberg_operator(&x, &nh, 1.0, 0.0, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&diag(&[c(1.0, 0.0), c(2.0, 0.0)])), Classification::Hermitian);
        assert_eq!(classify(&diag(&[c(1.0, 1.0), c(2.0, 0.0)])), Classification::NormalNonHermitian);
        let nn = CMat::from_row_slice(2, 2, &[c(1.0, 1.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(classify(&nn), Classification::NonNormal);
    }
}
