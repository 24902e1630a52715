//! The metric inner product `⟨u|_Q v⟩ = u† Q v` and the Q-algebra built on it.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, check_square, norm, CMat, CVec, EigenDecomposition};

/// Hermitian positive-definite metric `Q = W† W`.
///
/// `factor` is `W`; for a metric built from a diagonalization it is `P⁻¹`.
/// Inner products and adjoints are evaluated through `W` and `W⁻¹` rather
/// than through `Q` itself.
#[derive(Clone, Debug)]
pub struct QMetric {
    pub q: CMat,
    pub q_inv: CMat,
    pub q_sqrt: CMat,
    pub q_sqrt_inv: CMat,
    pub factor: CMat,
    pub factor_inv: CMat,
    pub source_cond_p: f64,
}

/// `H = H_Qh + H_Qa`.
#[derive(Clone, Debug)]
pub struct HamiltonianSplit {
    pub hqh: CMat,
    pub hqa: CMat,
}

impl QMetric {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// The trivial metric `Q = I`.
    pub fn identity(n: usize) -> QMetric {
        let id = linalg::identity(n);
        QMetric {
            q: id.clone(),
            q_inv: id.clone(),
            q_sqrt: id.clone(),
            q_sqrt_inv: id.clone(),
            factor: id.clone(),
            factor_inv: id,
            source_cond_p: 1.0,
        }
    }

    /// Metric from an arbitrary Hermitian positive-definite matrix.
    pub fn from_matrix(q: &CMat) -> Result<QMetric> {
        check_square(q)?;
        let q_sqrt = linalg::hermitian_sqrt(q)?;
        let q_sqrt_inv = linalg::inverse(&q_sqrt)?;
        let q_inv = linalg::inverse(q)?;
        Ok(QMetric {
            q: q.clone(),
            q_inv,
            factor: q_sqrt.clone(),
            factor_inv: q_sqrt_inv.clone(),
            q_sqrt,
            q_sqrt_inv,
            source_cond_p: f64::NAN,
        })
    }

    fn check_vec(&self, v: &CVec) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }

    fn check_mat(&self, m: &CMat) -> Result<()> {
        check_square(m)?;
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.nrows() });
        }
        Ok(())
    }

    /// `Q`-norm squared, `⟨v|_Q v⟩`.
    pub fn norm_sqr(&self, v: &CVec) -> Result<f64> {
        self.check_vec(v)?;
        Ok((&self.factor * v).norm_squared())
    }

    /// Rescales `v` to unit `Q`-norm.
    pub fn normalize(&self, v: &CVec) -> Result<CVec> {
        let n = self.norm_sqr(v)?.sqrt();
        if n == 0.0 {
            return Err(Error::BadParams("cannot normalize the zero vector".into()));
        }
        Ok(v / c64::new(n, 0.0))
    }
}

/// Builds `Q = (P†)⁻¹ P⁻¹` from a diagonalization.
pub fn build_q(decomp: &EigenDecomposition) -> Result<QMetric> {
    let x = &decomp.p_inv;
    let q = x.adjoint() * x;
    let q = (&q + q.adjoint()) * c64::new(0.5, 0.0);
    let q_inv = &decomp.p * decomp.p.adjoint();

    // Polar factor of X = U Σ V†: Q^{1/2} = V Σ V†.
    let svd = x.clone().svd(true, true);
    let v_t = svd.v_t.ok_or(Error::NoConvergence { iterations: 0 })?;
    let v = v_t.adjoint();
    let min_sigma = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_sigma > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min_sigma });
    }
    let scaled = |pow: i32| {
        let mut vs = v.clone();
        for (j, s) in svd.singular_values.iter().enumerate() {
            let f = c64::new(s.powi(pow), 0.0);
            for i in 0..vs.nrows() {
                vs[(i, j)] *= f;
            }
        }
        let m = vs * &v_t;
        (&m + m.adjoint()) * c64::new(0.5, 0.0)
    };
    Ok(QMetric {
        q,
        q_inv,
        q_sqrt: scaled(1),
        q_sqrt_inv: scaled(-1),
        factor: x.clone(),
        factor_inv: decomp.p.clone(),
        source_cond_p: decomp.cond_p,
    })
}

/// `I_Q(u, v) = u† Q v`.
pub fn q_inner(u: &CVec, v: &CVec, q: &QMetric) -> Result<c64> {
    q.check_vec(u)?;
    q.check_vec(v)?;
    Ok(linalg::inner(&(&q.factor * u), &(&q.factor * v)))
}

/// Q-Hermitian conjugate `A^{†Q} = Q⁻¹ A† Q`, evaluated as `W⁻¹ (W A W⁻¹)† W`.
pub fn q_adjoint(a: &CMat, q: &QMetric) -> Result<CMat> {
    q.check_mat(a)?;
    let similar = &q.factor * a * &q.factor_inv;
    Ok(&q.factor_inv * similar.adjoint() * &q.factor)
}

pub fn split_h(h: &CMat, q: &QMetric) -> Result<HamiltonianSplit> {
    let hd = q_adjoint(h, q)?;
    let half = c64::new(0.5, 0.0);
    Ok(HamiltonianSplit { hqh: (h + &hd) * half, hqa: (h - &hd) * half })
}

/// Relative Q-normality residual `‖[H, H^{†Q}]‖ / ‖H‖²`.
pub fn q_normality_residual(h: &CMat, q: &QMetric) -> Result<f64> {
    let hd = q_adjoint(h, q)?;
    let c = linalg::commutator(h, &hd)?;
    let scale = norm(h).powi(2);
    Ok(if scale == 0.0 { 0.0 } else { norm(&c) / scale })
}

pub fn is_q_normal(h: &CMat, q: &QMetric, tol: f64) -> Result<bool> {
    Ok(q_normality_residual(h, q)? <= tol)
}

/// Relative Q-Hermiticity residual `‖O − O^{†Q}‖ / ‖O‖`.
pub fn q_hermiticity_residual(o: &CMat, q: &QMetric) -> Result<f64> {
    let od = q_adjoint(o, q)?;
    let scale = norm(o);
    Ok(if scale == 0.0 { 0.0 } else { norm(&(o - od)) / scale })
}

pub fn is_q_hermitian(o: &CMat, q: &QMetric, tol: f64) -> Result<bool> {
    Ok(q_hermiticity_residual(o, q)? <= tol)
}

/// Largest `|⟨λ_i|_Q λ_j⟩ − δ_ij|` over the eigenvector columns.
pub fn q_orthonormality_residual(decomp: &EigenDecomposition, q: &QMetric) -> Result<f64> {
    let n = decomp.dim();
    let mut worst = 0.0f64;
    let cols: Vec<CVec> = (0..n).map(|i| &q.factor * decomp.eigenvector(i)).collect();
    for i in 0..n {
        for j in 0..n {
            let g = linalg::inner(&cols[i], &cols[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - c64::new(want, 0.0)).norm());
        }
    }
    Ok(worst)
}
