//! Continuous Lyapunov equations `AX + XAᵀ + W = 0` (Bartels–Stewart) and the
//! controllability / observability Gramians built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lti::StateSpace;

/// Which Gramian a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GramianKind {
    /// `P`: `AP + PAᵀ + BBᵀ = 0`.
    Controllability,
    /// `Q`: `AᵀQ + QA + CᵀC = 0`.
    Observability,
    /// `Π`: minimal solution of the dual positive-real LMI.
    RequiredSupply,
    /// `Ξ`: minimal solution of the positive-real LMI.
    AvailableStorage,
}

impl GramianKind {
    pub fn is_input(self) -> bool {
        matches!(
            self,
            GramianKind::Controllability | GramianKind::RequiredSupply
        )
    }
}

/// A symmetric Gramian together with the residual of the equation or LMI that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    pub x: Mat,
    pub kind: GramianKind,
    pub residual: f64,
}

impl Gramian {
    /// Symmetrizes `x` on construction.
    pub fn new(x: Mat, kind: GramianKind, residual: f64) -> Self {
        Self {
            x: linalg::symmetrize(&x),
            kind,
            residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }
}

/// Solves `AX + XAᵀ + W = 0` for Hurwitz `A` and symmetric `W`.
pub fn solve_lyapunov(a: &Mat, w: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov: A is {:?}, W is {:?}",
            a.shape(),
            w.shape()
        )));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let w = linalg::symmetrize(w);
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("real Schur decomposition did not converge".into()))?;
    let eig: Vec<_> = schur.complex_eigenvalues().iter().copied().collect();
    let (u, t) = schur.unpack();

    let a_norm = a.norm();
    if let Some(e) = eig.iter().max_by(|x, y| x.re.total_cmp(&y.re)) {
        if e.re >= -1e-12 * a_norm {
            return Err(Error::NotHurwitz { re: e.re, im: e.im });
        }
    }
    // Separation of the Sylvester operator: min |λ_i + λ_j|.
    let sep = eig
        .iter()
        .flat_map(|x| eig.iter().map(move |y| (x + y).norm()))
        .fold(f64::INFINITY, f64::min);
    if sep < 1e-14 * a_norm.max(1.0) {
        return Err(Error::IllConditioned {
            what: "Lyapunov operator",
            condition: a_norm / sep,
        });
    }

    let c = -(u.transpose() * &w * &u);
    let y = solve_quasi_triangular(&t, &c)?;
    let mut x = linalg::symmetrize(&(&u * y * u.transpose()));

    // One step of iterative refinement when the residual is above target.
    let tol = 1e-12 * (a_norm * x.norm() + w.norm());
    let r = a * &x + &x * a.transpose() + &w;
    if r.norm() > tol {
        let c2 = -(u.transpose() * &r * &u);
        let dy = solve_quasi_triangular(&t, &c2)?;
        x += linalg::symmetrize(&(&u * dy * u.transpose()));
    }
    Ok(x)
}

/// `‖AX + XAᵀ + W‖_F`.
pub fn lyapunov_residual(a: &Mat, x: &Mat, w: &Mat) -> f64 {
    (a * x + x * a.transpose() + w).norm()
}

/// Solves `TY + YTᵀ = C` for quasi-upper-triangular `T`, sweeping column
/// blocks from the right.
fn solve_quasi_triangular(t: &Mat, c: &Mat) -> Result<Mat> {
    let n = t.nrows();
    let mut y = Mat::zeros(n, n);
    let mut j_end = n;
    while j_end > 0 {
        let last = j_end - 1;
        let bs = if last > 0 && t[(last, last - 1)] != 0.0 {
            2
        } else {
            1
        };
        let j0 = j_end - bs;

        let mut rhs = c.columns(j0, bs).into_owned();
        if j_end < n {
            let k = n - j_end;
            let known = y.columns(j_end, k);
            let coupling = t.view((j0, j_end), (bs, k));
            rhs -= known * coupling.transpose();
        }

        let cols = if bs == 1 {
            let mut m = t.clone();
            for i in 0..n {
                m[(i, i)] += t[(j0, j0)];
            }
            lu_solve(m, &rhs)?
        } else {
            let mut m = Mat::zeros(2 * n, 2 * n);
            for (bi, bj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let tij = t[(j0 + bi, j0 + bj)];
                let mut blk = m.view_mut((bi * n, bj * n), (n, n));
                if bi == bj {
                    blk.copy_from(t);
                }
                for i in 0..n {
                    blk[(i, i)] += tij;
                }
            }
            // Column-major storage: stacking the two columns is a reshape.
            let stacked = Mat::from_column_slice(2 * n, 1, rhs.as_slice());
            let sol = lu_solve(m, &stacked)?;
            Mat::from_column_slice(n, 2, sol.as_slice())
        };
        y.columns_mut(j0, bs).copy_from(&cols);
        j_end = j0;
    }
    Ok(y)
}

/// The shifted blocks can have large condition numbers on stiff models
/// even when the Sylvester separation is fine, so no threshold is applied.
fn lu_solve(m: Mat, b: &Mat) -> Result<Mat> {
    m.lu()
        .solve(b)
        .filter(linalg::is_finite)
        .ok_or_else(|| Error::Numerical("singular block in Schur back-substitution".into()))
}

/// `P` with `AP + PAᵀ + BBᵀ = 0`.
pub fn controllability_gramian(sys: &StateSpace) -> Result<Gramian> {
    sys.require_hurwitz()?;
    let w = sys.b() * sys.b().transpose();
    let p = solve_lyapunov(sys.a(), &w)?;
    let residual = lyapunov_residual(sys.a(), &p, &w);
    Ok(Gramian::new(p, GramianKind::Controllability, residual))
}

/// `Q` with `AᵀQ + QA + CᵀC = 0`.
pub fn observability_gramian(sys: &StateSpace) -> Result<Gramian> {
    sys.require_hurwitz()?;
    let at = sys.a().transpose();
    let w = sys.c().transpose() * sys.c();
    let q = solve_lyapunov(&at, &w)?;
    let residual = lyapunov_residual(&at, &q, &w);
    Ok(Gramian::new(q, GramianKind::Observability, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Kronecker-vectorization oracle: `(I⊗A + A⊗I) vec(X) = −vec(W)`.
    fn kronecker_lyapunov(a: &Mat, w: &Mat) -> Mat {
        let n = a.nrows();
        let mut k = Mat::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    // column-major vec: index (row r, col c) -> c*n + r
                    k[(j * n + i, j * n + l)] += a[(i, l)];
                    k[(j * n + i, l * n + i)] += a[(j, l)];
                }
            }
        }
        let rhs = nalgebra::DVector::from_iterator(n * n, w.iter().map(|v| -v));
        let x = k.lu().solve(&rhs).unwrap();
        Mat::from_column_slice(n, n, x.as_slice())
    }

    fn random_stable(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let m = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let shift = linalg::rightmost_eigenvalue(&m).unwrap().re + 0.5;
        m - Mat::identity(n, n) * shift.max(0.0) - Mat::identity(n, n) * 0.1
    }

    #[test]
    fn scalar_case() {
        let x = solve_lyapunov(
            &Mat::from_element(1, 1, -1.0),
            &Mat::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert_relative_eq!(x[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn msd_gramian_is_half_identity() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let x = solve_lyapunov(&a, &(&b * b.transpose())).unwrap();
        assert_relative_eq!(x, Mat::identity(2, 2) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 8, 12] {
            let a = random_stable(n, &mut rng);
            let w = Mat::identity(n, n);
            let x = solve_lyapunov(&a, &w).unwrap();
            let xk = kronecker_lyapunov(&a, &w);
            assert!((&x - &xk).norm() <= 1e-8 * xk.norm().max(1.0), "n={n}");
            let tol = 1e-10 * (a.norm() * x.norm() + w.norm());
            assert!(lyapunov_residual(&a, &x, &w) <= tol);
            assert_eq!(x, x.transpose());
        }
    }

    #[test]
    fn rejects_unstable() {
        let a = Mat::from_row_slice(2, 2, &[0.1, 1.0, 0.0, -1.0]);
        match solve_lyapunov(&a, &Mat::identity(2, 2)) {
            Err(Error::NotHurwitz { re, .. }) => assert_relative_eq!(re, 0.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let osc = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov(&osc, &Mat::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn gramians_of_small_systems() {
        let s = StateSpace::from_rows(1, 1, 1, &[-1.0], &[1.0], &[1.0], &[0.0]).unwrap();
        assert_relative_eq!(
            controllability_gramian(&s).unwrap().x[(0, 0)],
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            observability_gramian(&s).unwrap().x[(0, 0)],
            0.5,
            epsilon = 1e-15
        );

        let msd = StateSpace::from_rows(
            2,
            1,
            1,
            &[0.0, 1.0, -1.0, -1.0],
            &[0.0, 1.0],
            &[0.0, 1.0],
            &[0.0],
        )
        .unwrap();
        let p = controllability_gramian(&msd).unwrap();
        assert_relative_eq!(p.x, Mat::identity(2, 2) * 0.5, epsilon = 1e-14);
        let q = observability_gramian(&msd).unwrap();
        let qk = kronecker_lyapunov(&msd.a().transpose(), &(msd.c().transpose() * msd.c()));
        assert_relative_eq!(q.x, qk, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_system_has_equal_gramians() {
        let a = Mat::from_row_slice(3, 3, &[-3.0, 0.5, 0.2, 0.5, -2.0, 0.1, 0.2, 0.1, -1.0]);
        let b = Mat::from_row_slice(3, 1, &[1.0, -0.5, 2.0]);
        let s = StateSpace::new(a, b.clone(), b.transpose(), Mat::zeros(1, 1)).unwrap();
        let p = controllability_gramian(&s).unwrap();
        let q = observability_gramian(&s).unwrap();
        assert!((&p.x - &q.x).norm() < 1e-10);
    }
}
