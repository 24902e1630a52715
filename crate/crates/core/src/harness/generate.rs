//! Seeded random Hamiltonians and Q-Hermitian observables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::qmetric::{q_adjoint, QMetric};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    Hermitian,
    NormalNonhermitian,
    Nonnormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    /// Largest imaginary part of the spectrum.
    pub imag_max: f64,
    /// Upper bound on the 2-norm condition number of the eigenvector matrix.
    pub cond_p_max: f64,
    /// Number of eigenvalues placed exactly at `imag_max`.
    pub degeneracy: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { imag_max: 1.0, cond_p_max: 100.0, degeneracy: 1 }
    }
}

/// Real parts are drawn from `[-RE_RANGE, RE_RANGE]`.
const RE_RANGE: f64 = 2.0;
/// Non-maximal imaginary parts lie in `[imag_max − IM_SPREAD, imag_max − IM_GAP]`.
const IM_SPREAD: f64 = 2.0;
const IM_GAP: f64 = 0.1;

fn spectrum<R: Rng + ?Sized>(n: usize, opts: &GenOptions, rng: &mut R) -> Vec<c64> {
    (0..n)
        .map(|i| {
            let re = rng.gen_range(-RE_RANGE..RE_RANGE);
            let im = if i < opts.degeneracy {
                opts.imag_max
            } else {
                opts.imag_max - rng.gen_range(IM_GAP..IM_SPREAD)
            };
            c64::new(re, im)
        })
        .collect()
}

/// Invertible `U diag(σ) V` with `σ_max / σ_min = cond`.
fn conditioned_matrix<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> CMat {
    let u = sampling::haar_unitary(n, rng);
    let v = sampling::haar_unitary(n, rng);
    let log_c = cond.ln();
    let sigmas: Vec<c64> = (0..n)
        .map(|i| {
            let x = match i {
                0 => 0.0,
                _ if i == n - 1 => log_c,
                _ => rng.gen_range(0.0..log_c),
            };
            c64::new((-x).exp(), 0.0)
        })
        .collect();
    u * linalg::diag(&sigmas) * v
}

pub fn gen_hamiltonian(kind: GenKind, n: usize, seed: u64, opts: &GenOptions) -> Result<CMat> {
    if n == 0 {
        return Err(Error::BadOptions("n must be at least 1".into()));
    }
    if !opts.imag_max.is_finite() {
        return Err(Error::BadOptions(format!("imag_max must be finite, got {}", opts.imag_max)));
    }
    if opts.degeneracy == 0 || opts.degeneracy > n {
        return Err(Error::BadOptions(format!("degeneracy must be in 1..={n}, got {}", opts.degeneracy)));
    }
    let mut rng = sampling::rng(seed, 0);
    match kind {
        GenKind::Hermitian => Ok(sampling::random_hermitian(n, &mut rng)),
        GenKind::NormalNonhermitian => {
            if n == 1 && opts.imag_max == 0.0 {
                return Err(Error::BadOptions("a 1x1 spectrum at imag_max = 0 is Hermitian".into()));
            }
            let u = sampling::haar_unitary(n, &mut rng);
            let d = linalg::diag(&spectrum(n, opts, &mut rng));
            let h = &u * d * u.adjoint();
            Ok(h)
        }
        GenKind::Nonnormal => {
            if n < 2 {
                return Err(Error::BadOptions("non-normal matrices need n >= 2".into()));
            }
            if !(opts.cond_p_max >= 2.0) {
                return Err(Error::BadOptions(format!("cond_p_max must be at least 2, got {}", opts.cond_p_max)));
            }
            let cond = rng.gen_range(2f64.ln()..=opts.cond_p_max.ln()).exp();
            let p = conditioned_matrix(n, cond, &mut rng);
            let d = linalg::diag(&spectrum(n, opts, &mut rng));
            let p_inv = linalg::inverse(&p)?;
            Ok(&p * d * p_inv)
        }
    }
}

/// `(M + M^{†Q})/2` with `M = W⁻¹ G W` for a seeded complex Gaussian `G`,
/// where `Q = W†W`. The result is `W⁻¹ (G + G†)/2 W`, of order one in the
/// Q-geometry whatever the conditioning of `Q`.
pub fn gen_q_hermitian_observable(q: &QMetric, n: usize, seed: u64) -> Result<CMat> {
    if n != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: n });
    }
    let mut rng = sampling::rng(seed, 0);
    let g = sampling::gaussian_mat(n, &mut rng);
    let m = &q.factor_inv * g * &q.factor;
    let md = q_adjoint(&m, q)?;
    Ok((m + md) * c64::new(0.5, 0.0))
}
