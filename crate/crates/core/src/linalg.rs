//! Dense complex linear algebra for small (n <= 64) square matrices.
//!
//! The general eigensolver is a Hessenberg reduction followed by shifted
//! complex QR sweeps; eigenvectors come from back substitution on the
//! triangular Schur factor. Hermitian eigenproblems, SVD and LU go through
//! nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex64;
pub type CMat = DMatrix<c64>;
pub type CVec = DVector<c64>;

pub const I: c64 = c64::new(0.0, 1.0);

/// Iteration budget per eigenvalue for the QR sweeps.
const QR_ITERS_PER_EIGENVALUE: usize = 60;

/// Frobenius norm.
pub fn norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Ordinary inner product `u† v`.
pub fn inner(u: &CVec, v: &CVec) -> c64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(values: &[c64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(values))
}

/// Builds a matrix from row-major `[re, im]` pairs.
pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = rows.len();
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare { rows: n, cols: row.len() });
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = c64::new(z[0], z[1]);
        }
    }
    check_finite(&m)?;
    Ok(m)
}

pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn check_finite(m: &CMat) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn check_same_dim(a: &CMat, b: &CMat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(())
}

/// Relative anti-Hermitian residual `‖M − M†‖ / ‖M‖` (0 for the zero matrix).
pub fn hermiticity_residual(m: &CMat) -> f64 {
    let scale = norm(m);
    if scale == 0.0 {
        return 0.0;
    }
    norm(&(m - m.adjoint())) / scale
}

/// Returns `AB − BA`.
pub fn commutator(a: &CMat, b: &CMat) -> Result<CMat> {
    check_square(a)?;
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

fn singular_pivot_threshold(m: &CMat) -> f64 {
    let amax = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    f64::EPSILON * m.nrows() as f64 * amax
}

fn checked_lu(m: &CMat) -> Result<nalgebra::LU<c64, nalgebra::Dyn, nalgebra::Dyn>> {
    check_square(m)?;
    check_finite(m)?;
    let lu = m.clone().lu();
    let threshold = singular_pivot_threshold(m);
    let min_pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > threshold) {
        return Err(Error::Singular { pivot: min_pivot });
    }
    Ok(lu)
}

/// Solves `M X = rhs` by LU with partial pivoting.
pub fn solve(m: &CMat, rhs: &CMat) -> Result<CMat> {
    if rhs.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: rhs.nrows() });
    }
    let lu = checked_lu(m)?;
    lu.solve(rhs).ok_or(Error::Singular { pivot: 0.0 })
}

pub fn solve_vec(m: &CMat, rhs: &CVec) -> Result<CVec> {
    if rhs.len() != m.nrows() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: rhs.len() });
    }
    let lu = checked_lu(m)?;
    lu.solve(rhs).ok_or(Error::Singular { pivot: 0.0 })
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    solve(m, &identity(m.nrows()))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number; infinite when the smallest singular value is zero.
pub fn cond2(m: &CMat) -> f64 {
    let s = singular_values(m);
    let smin = *s.last().unwrap_or(&0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

// ---------------------------------------------------------------------------
// Complex Schur decomposition

/// Rotation `G = [[c, s], [-s̄, c]]` with real `c` such that `G [x; y] = [r; 0]`.
#[derive(Clone, Copy, Debug)]
struct Givens {
    c: f64,
    s: c64,
}

impl Givens {
    fn zeroing(x: c64, y: c64) -> Givens {
        let ax = x.norm();
        let r = ax.hypot(y.norm());
        if r == 0.0 {
            return Givens { c: 1.0, s: c64::new(0.0, 0.0) };
        }
        if ax == 0.0 {
            return Givens { c: 0.0, s: c64::new(1.0, 0.0) };
        }
        Givens { c: ax / r, s: (x / ax) * y.conj() / r }
    }

    /// Rows `k`, `k+1` of `m`, columns `cols`.
    fn apply_rows(&self, m: &mut CMat, k: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let a = m[(k, j)];
            let b = m[(k + 1, j)];
            m[(k, j)] = a * self.c + self.s * b;
            m[(k + 1, j)] = -self.s.conj() * a + b * self.c;
        }
    }

    /// Multiplies columns `k`, `k+1` of `m` by `G†` from the right, rows `rows`.
    fn apply_cols_adjoint(&self, m: &mut CMat, k: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let a = m[(i, k)];
            let b = m[(i, k + 1)];
            m[(i, k)] = a * self.c + b * self.s.conj();
            m[(i, k + 1)] = -a * self.s + b * self.c;
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form; accumulates `z`.
fn hessenberg(t: &mut CMat, z: &mut CMat) {
    let n = t.nrows();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<c64> = (k + 1..n).map(|i| t[(i, k)]).collect();
        let xnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 { c64::new(1.0, 0.0) } else { v[0] / v[0].norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }
        // T <- H T with H = I - 2 v v†
        for j in 0..n {
            let dot: c64 = v.iter().enumerate().map(|(r, vr)| vr.conj() * t[(k + 1 + r, j)]).sum();
            for (r, vr) in v.iter().enumerate() {
                t[(k + 1 + r, j)] -= *vr * dot * 2.0;
            }
        }
        // T <- T H, Z <- Z H
        for m in [&mut *t, &mut *z] {
            for i in 0..n {
                let dot: c64 = v.iter().enumerate().map(|(r, vr)| m[(i, k + 1 + r)] * vr).sum();
                for (r, vr) in v.iter().enumerate() {
                    m[(i, k + 1 + r)] -= dot * vr.conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            t[(i, k)] = c64::new(0.0, 0.0);
        }
    }
}

fn wilkinson_shift(a: c64, b: c64, c: c64, d: c64) -> c64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mu1 = (a + d) * 0.5 + disc;
    let mu2 = (a + d) * 0.5 - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Complex Schur decomposition `A = Z T Z†` with `T` upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = check_square(a)?;
    check_finite(a)?;
    let mut t = a.clone();
    let mut z = identity(n);
    hessenberg(&mut t, &mut z);

    let scale = norm(&t);
    let small = f64::MIN_POSITIVE / f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let budget = QR_ITERS_PER_EIGENVALUE * n.max(1);

    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = t[(l, l - 1)].norm();
            let mut reference = t[(l - 1, l - 1)].norm() + t[(l, l)].norm();
            if reference == 0.0 {
                reference = scale;
            }
            if sub <= f64::EPSILON * reference || sub <= small {
                t[(l, l - 1)] = c64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > budget {
            return Err(Error::NoConvergence { iterations: total });
        }

        let mu = if iter.is_multiple_of(10) {
            // exceptional shift
            t[(hi, hi)] + c64::new(0.75 * t[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };

        for i in l..=hi {
            t[(i, i)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - l);
        for k in l..hi {
            let g = Givens::zeroing(t[(k, k)], t[(k + 1, k)]);
            g.apply_rows(&mut t, k, k..n);
            t[(k + 1, k)] = c64::new(0.0, 0.0);
            rotations.push((k, g));
        }
        for (k, g) in rotations {
            g.apply_cols_adjoint(&mut t, k, 0..(k + 2).min(hi + 1));
            g.apply_cols_adjoint(&mut z, k, 0..n);
        }
        for i in l..=hi {
            t[(i, i)] += mu;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = c64::new(0.0, 0.0);
        }
    }
    Ok((z, t))
}

/// Eigenvectors of an upper-triangular `t` by back substitution.
///
/// Exactly (or numerically) repeated diagonal entries with a vanishing
/// right-hand side are treated as a semisimple eigenvalue; a nonvanishing
/// one means a Jordan coupling and the denominator is perturbed to
/// `eps·‖T‖`, which produces nearly parallel columns that the conditioning
/// check then rejects.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let tnorm = norm(t).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;
    let cluster = 1e3 * f64::EPSILON * tnorm;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = c64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let rhs: c64 = (j + 1..=k).map(|m| t[(j, m)] * y[(m, k)]).sum();
            let ynorm: f64 = (j + 1..=k).map(|m| y[(m, k)].norm()).fold(0.0, f64::max);
            let mut den = t[(j, j)] - lambda;
            if den.norm() < cluster {
                if rhs.norm() <= cluster * ynorm {
                    y[(j, k)] = c64::new(0.0, 0.0);
                    continue;
                }
                if den.norm() < smin {
                    den = c64::new(smin, 0.0);
                }
            }
            y[(j, k)] = -rhs / den;
        }
    }
    y
}

// ---------------------------------------------------------------------------
// Eigendecomposition

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigOptions {
    /// Relative reconstruction tolerance `‖P D P⁻¹ − H‖ ≤ tol·‖H‖`.
    pub tol: f64,
    /// Largest accepted 2-norm condition number of `P`.
    pub cond_max: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { tol: 1e-9, cond_max: 1e8 }
    }
}

/// `H = P diag(λ) P⁻¹` with unit-norm, phase-fixed eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub p: CMat,
    pub p_inv: CMat,
    pub eigenvalues: Vec<c64>,
    pub cond_p: f64,
    pub residual: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `|λ_i⟩` (column `i` of `P`).
    pub fn eigenvector(&self, i: usize) -> CVec {
        self.p.column(i).into_owned()
    }

    /// `P f(D) P⁻¹` for a scalar function applied to the eigenvalues.
    pub fn apply_spectral(&self, f: impl Fn(c64) -> c64) -> CMat {
        let mut scaled = self.p.clone();
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(*lambda);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= s;
            }
        }
        scaled * &self.p_inv
    }

    /// `P f(D) P⁻¹ v` without forming the matrix.
    pub fn apply_spectral_vec(&self, f: impl Fn(c64) -> c64, v: &CVec) -> CVec {
        let mut coeffs = &self.p_inv * v;
        for (c, lambda) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= f(*lambda);
        }
        &self.p * coeffs
    }
}

fn normalize_column_phase(p: &mut CMat) {
    for j in 0..p.ncols() {
        let mut col = p.column(j).into_owned();
        let nrm = vec_norm(&col);
        if nrm == 0.0 {
            continue;
        }
        col /= c64::new(nrm, 0.0);
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-10).copied() {
            let phase = lead.conj() / lead.norm();
            col *= phase;
        }
        p.set_column(j, &col);
    }
}

fn eigen_order(values: &[c64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .im
            .total_cmp(&values[a].im)
            .then(values[b].re.total_cmp(&values[a].re))
            .then(a.cmp(&b))
    });
    order
}

/// Relative Hermiticity below which the Hermitian solver is used.
const HERMITIAN_PATH_TOL: f64 = 1e-14;

/// Diagonalizes a general complex square matrix.
///
/// Eigenvalues are sorted by descending imaginary part, then descending
/// real part. Rejects inputs whose eigenvector matrix is too ill-conditioned
/// or whose reconstruction misses `opts.tol`.
pub fn eigendecompose(h: &CMat, opts: &EigOptions) -> Result<EigenDecomposition> {
    let n = check_square(h)?;
    check_finite(h)?;

    let (raw_p, raw_values) = if hermiticity_residual(h) <= HERMITIAN_PATH_TOL {
        let sym = (h + h.adjoint()) * c64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let values: Vec<c64> = eig.eigenvalues.iter().map(|&x| c64::new(x, 0.0)).collect();
        (eig.eigenvectors, values)
    } else {
        let (z, t) = schur(h)?;
        let y = triangular_eigenvectors(&t);
        let values: Vec<c64> = (0..n).map(|i| t[(i, i)]).collect();
        (z * y, values)
    };

    let order = eigen_order(&raw_values);
    let mut p = CMat::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        p.set_column(dst, &raw_p.column(src));
        eigenvalues.push(raw_values[src]);
    }
    normalize_column_phase(&mut p);

    let cond_p = cond2(&p);
    if !cond_p.is_finite() || cond_p > opts.cond_max {
        return Err(Error::NotDiagonalizable { cond_p, residual: f64::NAN });
    }
    let p_inv = inverse(&p).map_err(|_| Error::NotDiagonalizable { cond_p, residual: f64::NAN })?;

    let mut decomp = EigenDecomposition { p, p_inv, eigenvalues, cond_p, residual: 0.0 };
    let recon = decomp.apply_spectral(|l| l);
    let hnorm = norm(h);
    let residual = if hnorm == 0.0 { norm(&recon) } else { norm(&(recon - h)) / hnorm };
    if !(residual <= opts.tol) {
        return Err(Error::NotDiagonalizable { cond_p, residual });
    }
    decomp.residual = residual;
    Ok(decomp)
}

// ---------------------------------------------------------------------------
// Matrix functions

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpMethod {
    Spectral,
    ScalingSquaring,
}

/// Matrix exponential `e^M`.
pub fn mat_exp(m: &CMat, method: ExpMethod) -> Result<CMat> {
    check_square(m)?;
    check_finite(m)?;
    let out = match method {
        ExpMethod::Spectral => {
            let decomp = eigendecompose(m, &EigOptions::default())?;
            decomp.apply_spectral(|l| l.exp())
        }
        ExpMethod::ScalingSquaring => expm_pade13(m)?,
    };
    check_finite(&out)?;
    Ok(out)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Scaling and squaring with the degree-13 diagonal Padé approximant.
fn expm_pade13(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let nrm = norm1(m);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = m * c64::new(2f64.powi(-s), 0.0);
    let id = identity(n);
    let b = |k: usize| c64::new(PADE13[k], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Hermitian positive-definite square root.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    check_square(m)?;
    check_finite(m)?;
    let res = hermiticity_residual(m);
    if res > 1e-12 {
        return Err(Error::NotHermitian { residual: res });
    }
    let sym = (m + m.adjoint()) * c64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let v = &eig.eigenvectors;
    let mut vs = v.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let r = c64::new(lam.sqrt(), 0.0);
        for i in 0..vs.nrows() {
            vs[(i, j)] *= r;
        }
    }
    let s = vs * v.adjoint();
    Ok((&s + s.adjoint()) * c64::new(0.5, 0.0))
}

/// Top singular triple `M v = σ u`.
#[derive(Clone, Debug)]
pub struct SvdMax {
    pub sigma: f64,
    pub u: CVec,
    pub v: CVec,
}

pub fn svd_max(m: &CMat) -> Result<SvdMax> {
    check_finite(m)?;
    let svd = m.clone().svd(true, true);
    let (k, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 { (i, s) } else { best });
    let u_mat = svd.u.ok_or(Error::NoConvergence { iterations: 0 })?;
    let v_t = svd.v_t.ok_or(Error::NoConvergence { iterations: 0 })?;
    let u = u_mat.column(k).into_owned();
    let v = v_t.row(k).adjoint();
    Ok(SvdMax { sigma, u, v })
}
