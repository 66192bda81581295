//! Dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `DMatrix<f64>`; eigen/singular decompositions are
//! re-sorted because nalgebra does not guarantee an ordering.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// `(X + Xᵀ)/2`.
pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Largest absolute entry (0 for empty matrices).
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues ascending.
pub fn sym_eig(x: &Mat) -> (DVector<f64>, Mat) {
    let n = x.nrows();
    if n == 0 {
        return (DVector::zeros(0), Mat::zeros(0, 0));
    }
    let eig = symmetrize(x).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn sym_eigvals(x: &Mat) -> DVector<f64> {
    if x.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut v: Vec<f64> = symmetrize(x)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

pub fn lambda_max(x: &Mat) -> f64 {
    sym_eigvals(x)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn lambda_min(x: &Mat) -> f64 {
    sym_eigvals(x).iter().copied().fold(f64::INFINITY, f64::min)
}

/// nalgebra's bidiagonal SVD occasionally returns a wrong factorization
/// when a 2x2 block deflates (seen on rank-one 2x2 projectors). The result
/// is checked and recomputed with one-sided Jacobi if it does not hold up.
fn svd_checked(m: &Mat) -> (Mat, DVector<f64>, Mat) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("Vt requested");
    let s = svd.singular_values;
    let k = s.len();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * (m.nrows() + m.ncols()) as f64;
    let recon = (&u * Mat::from_diagonal(&s) * &vt - m).norm() / scale;
    let orth_u = (u.transpose() * &u - Mat::identity(k, k)).norm();
    let orth_v = (&vt * vt.transpose() - Mat::identity(k, k)).norm();
    if recon.is_finite() && recon <= tol && orth_u <= tol && orth_v <= tol {
        return (u, s, vt);
    }
    log::debug!("svd: falling back to Jacobi (recon {recon:.1e})");
    jacobi_svd(m)
}

/// One-sided Jacobi SVD. Works on the tall orientation and returns the
/// thin factors `(U, s, Vᵀ)`.
fn jacobi_svd(m: &Mat) -> (Mat, DVector<f64>, Mat) {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Mat::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for x in [&mut a, &mut v] {
                    for i in 0..x.nrows() {
                        let xp = x[(i, p)];
                        let xq = x[(i, q)];
                        x[(i, p)] = c * xp - sn * xq;
                        x[(i, q)] = sn * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_iterator(n, (0..n).map(|j| a.column(j).norm()));
    let mut u = Mat::zeros(m.nrows(), n);
    for j in 0..n {
        if s[j] > 0.0 {
            u.set_column(j, &(a.column(j) / s[j]));
        }
    }
    // Columns for zero singular values still need to be orthonormal.
    let zero: Vec<usize> = (0..n).filter(|&j| s[j] == 0.0).collect();
    if !zero.is_empty() {
        let live: Vec<usize> = (0..n).filter(|&j| s[j] > 0.0).collect();
        let w = Mat::from_fn(m.nrows(), live.len(), |i, k| u[(i, live[k])]);
        let fill = complement_basis(&w, 1e-12);
        for (k, &j) in zero.iter().enumerate() {
            u.set_column(j, &fill.column(k));
        }
    }
    (u, s, v.transpose())
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values descending.
///
/// Sign convention: each column of `U` has its largest-magnitude entry
/// positive, and the matching column of `V` is flipped with it.
pub fn svd_sorted(m: &Mat) -> (Mat, DVector<f64>, Mat) {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return (Mat::zeros(r, 0), DVector::zeros(0), Mat::zeros(c, 0));
    }
    let (u, s, vt) = svd_checked(m);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut uo = Mat::zeros(r, k);
    let mut vo = Mat::zeros(c, k);
    let mut so = DVector::zeros(k);
    for (j, &i) in idx.iter().enumerate() {
        let mut ucol = u.column(i).into_owned();
        let mut vcol = vt.row(i).transpose();
        let pivot = ucol.iter().copied().fold(
            0.0_f64,
            |best, x| {
                if x.abs() > best.abs() {
                    x
                } else {
                    best
                }
            },
        );
        if pivot < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        uo.set_column(j, &ucol);
        vo.set_column(j, &vcol);
        so[j] = s[i];
    }
    (uo, so, vo)
}

pub fn singular_values(m: &Mat) -> DVector<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return DVector::zeros(0);
    }
    let mut v: Vec<f64> = svd_checked(m).1.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(v)
}

/// 2-norm condition number (infinite for rank-deficient matrices).
pub fn cond2(m: &Mat) -> f64 {
    let s = singular_values(m);
    if s.is_empty() {
        return 1.0;
    }
    let smin = s[s.len() - 1];
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Numerical rank with absolute tolerance.
pub fn rank(m: &Mat, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the column space of `w` (rank decided with `rel_tol`
/// relative to the largest singular value).
pub fn range_basis(w: &Mat, rel_tol: f64) -> Mat {
    if w.ncols() == 0 || w.nrows() == 0 {
        return Mat::zeros(w.nrows(), 0);
    }
    let (u, s, _) = svd_sorted(w);
    let cut = rel_tol * s[0].max(f64::MIN_POSITIVE);
    let r = s.iter().filter(|&&x| x > cut).count();
    u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of `range(w)`.
pub fn complement_basis(w: &Mat, rel_tol: f64) -> Mat {
    let n = w.nrows();
    let q1 = range_basis(w, rel_tol);
    let r = q1.ncols();
    if r == 0 {
        return Mat::identity(n, n);
    }
    // Eigenvectors of the complementary projector with eigenvalue one.
    let proj = Mat::identity(n, n) - &q1 * q1.transpose();
    let (vals, vecs) = sym_eig(&proj);
    let mut idx: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    idx.truncate(n - r);
    let mut out = Mat::zeros(n, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &vecs.column(i));
    }
    out
}

/// Orthonormal eigenvectors of a symmetric matrix whose eigenvalues lie
/// within `tol` of zero.
pub fn sym_null_space(x: &Mat, tol: f64) -> Mat {
    let (vals, vecs) = sym_eig(x);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= tol).collect();
    let mut out = Mat::zeros(x.nrows(), cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &vecs.column(i));
    }
    out
}

/// Upper-triangular `R` with `X = RᵀR`, after clamping the spectrum of `X`
/// from below at `rel_clamp · λ_max`. Returns the factor and whether the
/// clamp was active.
pub fn clamped_cholesky(x: &Mat, rel_clamp: f64, what: &'static str) -> Result<(Mat, bool)> {
    let xs = symmetrize(x);
    let (vals, vecs) = sym_eig(&xs);
    let n = xs.nrows();
    if n == 0 {
        return Ok((Mat::zeros(0, 0), false));
    }
    let lmax = vals[n - 1];
    let lmin = vals[0];
    if !(lmax > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what,
            lambda_min: lmin,
            lambda_max: lmax,
        });
    }
    let floor = rel_clamp * lmax;
    let clamped = lmin < floor;
    let xm = if clamped {
        let d = DVector::from_iterator(n, vals.iter().map(|&v| v.max(floor)));
        symmetrize(&(&vecs * Mat::from_diagonal(&d) * vecs.transpose()))
    } else {
        xs
    };
    let chol = xm.cholesky().ok_or(Error::NotPositiveDefinite {
        what,
        lambda_min: lmin,
        lambda_max: lmax,
    })?;
    Ok((chol.l().transpose(), clamped))
}

/// Eigenvalues of a general real matrix via the real Schur form.
pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(a[(0, 0)], 0.0)];
    }
    match Schur::try_new(a.clone(), f64::EPSILON, 10_000) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => a
            .clone()
            .map(|v| Complex64::new(v, 0.0))
            .eigenvalues()
            .map(|e| e.iter().copied().collect())
            .unwrap_or_default(),
    }
}

/// Eigenvalue with the largest real part.
pub fn rightmost_eigenvalue(a: &Mat) -> Option<Complex64> {
    eigenvalues(a)
        .into_iter()
        .max_by(|x, y| x.re.total_cmp(&y.re))
}

/// Solve `M X = B` for complex `M` via LU; `None` when singular.
pub fn complex_solve(m: CMat, b: &CMat) -> Option<CMat> {
    let lu = m.lu();
    lu.solve(b)
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Solve `M X = B` by LU, returning an error with a condition estimate when
/// the matrix is singular to working precision.
pub fn solve(m: &Mat, b: &Mat, what: &'static str) -> Result<Mat> {
    let c = cond2(m);
    if !c.is_finite() || c > 1e14 {
        return Err(Error::IllConditioned { what, condition: c });
    }
    m.clone()
        .lu()
        .solve(b)
        .ok_or(Error::IllConditioned { what, condition: c })
}

pub fn inverse(m: &Mat, what: &'static str) -> Result<Mat> {
    let n = m.nrows();
    solve(m, &Mat::identity(n, n), what)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat) -> Option<Mat> {
    symmetrize(m).cholesky().map(|c| symmetrize(&c.inverse()))
}

/// Symmetric positive definite square root.
pub fn spd_sqrt(m: &Mat) -> Mat {
    let (vals, vecs) = sym_eig(m);
    let d = vals.map(|v| v.max(0.0).sqrt());
    symmetrize(&(&vecs * Mat::from_diagonal(&d) * vecs.transpose()))
}

/// Trace of `A·B` without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(&b.transpose()).sum()
}
