//! Primal-dual interior-point method for single-block linear matrix
//! inequalities in dual form
//!
//! ```text
//!   max bᵀy   s.t.  Z = C − Σ yᵢ Fᵢ ⪰ 0
//!   min ⟨C,X⟩ s.t.  ⟨Fᵢ,X⟩ = bᵢ,  X ⪰ 0
//! ```
//!
//! HKM search direction with Mehrotra predictor-corrector and an infeasible
//! start. The constraint map is abstracted by [`LmiOperator`] so that
//! structured problems can supply a cheap Schur complement.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Linear map `y ↦ Σ yᵢ Fᵢ` onto symmetric `size × size` matrices.
pub trait LmiOperator {
    /// Number of scalar variables.
    fn dim(&self) -> usize;
    /// Side length of the matrix inequality.
    fn size(&self) -> usize;
    fn apply(&self, y: &DVector<f64>) -> Mat;
    /// `(⟨F₁,W⟩, …, ⟨F_m,W⟩)` for symmetric `W`.
    fn adjoint(&self, w: &Mat) -> DVector<f64>;

    /// `Hᵢⱼ = tr(Fᵢ X Fⱼ Z⁻¹)`.
    fn schur(&self, x: &Mat, z_inv: &Mat) -> Mat {
        let m = self.dim();
        let mut h = Mat::zeros(m, m);
        let mut e = DVector::zeros(m);
        for j in 0..m {
            e[j] = 1.0;
            let fj = self.apply(&e);
            e[j] = 0.0;
            let w = x * fj * z_inv;
            let col = self.adjoint(&linalg::symmetrize(&w));
            h.set_column(j, &col);
        }
        linalg::symmetrize(&h)
    }
}

/// Explicit list of constraint matrices. Mostly useful for testing.
#[derive(Debug, Clone)]
pub struct DenseLmi {
    pub mats: Vec<Mat>,
}

impl LmiOperator for DenseLmi {
    fn dim(&self) -> usize {
        self.mats.len()
    }

    fn size(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    fn apply(&self, y: &DVector<f64>) -> Mat {
        let s = self.size();
        self.mats
            .iter()
            .zip(y.iter())
            .fold(Mat::zeros(s, s), |acc, (f, &yi)| acc + f * yi)
    }

    fn adjoint(&self, w: &Mat) -> DVector<f64> {
        DVector::from_iterator(
            self.mats.len(),
            self.mats.iter().map(|f| linalg::trace_product(f, w)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative gap and infeasibility target.
    pub tol: f64,
    /// Fraction of the step to the boundary.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iter: 120,
            tol: 1e-10,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Stopped on the iteration limit or a stalled step; the last iterate is
    /// returned and may still be usable.
    Inaccurate,
    /// Primal iterates diverge along an improving ray: the matrix inequality
    /// has no feasible point.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub y: DVector<f64>,
    pub x: Mat,
    pub z: Mat,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `‖b − 𝒜*(X)‖ / (1 + ‖b‖)`.
    pub primal_infeasibility: f64,
    /// `‖C − Z − 𝒜(y)‖ / (1 + ‖C‖)`.
    pub dual_infeasibility: f64,
}

/// Largest `α ≤ 1` keeping `X + α·ΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(l: &Mat, dx: &Mat) -> f64 {
    let li = match l.clone().try_inverse() {
        Some(li) => li,
        None => return 0.0,
    };
    let m = linalg::symmetrize(&(&li * dx * li.transpose()));
    let lmin = linalg::lambda_min(&m);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn cholesky_lower(x: &Mat) -> Option<Mat> {
    linalg::symmetrize(x).cholesky().map(|c| c.l())
}

fn solve_spd(h: &Mat, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(c) = h.clone().cholesky() {
        return Ok(c.solve(rhs));
    }
    // Lose a little accuracy rather than fail on a marginally indefinite H.
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut reg = h.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-13 * scale;
    }
    if let Some(c) = reg.cholesky() {
        return Ok(c.solve(rhs));
    }
    h.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Numerical("singular Schur complement in interior-point step".into()))
}

/// Solves the dual-form problem for `(op, b, c)`.
pub fn solve<O: LmiOperator + ?Sized>(
    op: &O,
    b: &DVector<f64>,
    c: &Mat,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    let m = op.dim();
    let s = op.size();
    if b.len() != m || c.shape() != (s, s) {
        return Err(Error::Dimension(format!(
            "SDP: {m} variables, b has {}, C is {:?}, block {s}",
            b.len(),
            c.shape()
        )));
    }
    let c = linalg::symmetrize(c);
    let b_norm = b.norm();
    let c_norm = c.norm();

    // Starting point scaled to the data.
    let mut f_norm_max: f64 = 0.0;
    let mut xi0: f64 = 10.0f64.max((s as f64).sqrt());
    {
        let mut e = DVector::zeros(m);
        for i in 0..m {
            e[i] = 1.0;
            let fi = op.apply(&e).norm();
            e[i] = 0.0;
            f_norm_max = f_norm_max.max(fi);
            if fi > 0.0 {
                xi0 = xi0.max(s as f64 * (1.0 + b[i].abs()) / (1.0 + fi));
            }
        }
    }
    let eta0 = 10.0f64.max((s as f64).sqrt()).max(c_norm).max(f_norm_max);
    let mut x = Mat::identity(s, s) * xi0;
    let mut z = Mat::identity(s, s) * eta0;
    let mut y = DVector::zeros(m);
    let x_scale = xi0;

    let mut status = SdpStatus::Inaccurate;
    let mut iterations = 0;
    let mut rp = b - op.adjoint(&x);
    let mut rd = &c - &z - op.apply(&y);
    let mut last_good: Option<(Mat, DVector<f64>, Mat)> = None;

    for it in 0..opts.max_iter {
        iterations = it;
        let mu = linalg::trace_product(&x, &z) / s.max(1) as f64;
        let pobj = linalg::trace_product(&c, &x);
        let dobj = b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.norm() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        log::trace!("sdp it {it}: pobj {pobj:.6e} dobj {dobj:.6e} gap {gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e}");
        if gap < opts.tol && pinf < opts.tol && dinf < opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if x.norm() > 1e12 * x_scale && pobj < 0.0 && dinf < 1e-3 {
            status = SdpStatus::Infeasible;
            break;
        }
        if x.norm() > 1e14 * x_scale {
            status = SdpStatus::Infeasible;
            break;
        }

        // Near the optimum round-off can push an iterate off the cone; the
        // previous iterate is then the answer, reported as inaccurate.
        let (lx, lz) = match (cholesky_lower(&x), cholesky_lower(&z)) {
            (Some(lx), Some(lz)) => (lx, lz),
            _ => {
                match last_good.take() {
                    Some((x0, y0, z0)) => {
                        log::debug!("sdp: iterate left the cone at iteration {it}; keeping the previous one");
                        x = x0;
                        y = y0;
                        z = z0;
                        rp = b - op.adjoint(&x);
                        rd = &c - &z - op.apply(&y);
                        break;
                    }
                    None => {
                        return Err(Error::Numerical(
                            "interior-point iterate lost definiteness".into(),
                        ))
                    }
                }
            }
        };
        let z_inv = match linalg::spd_inverse(&z) {
            Some(zi) => zi,
            None => return Err(Error::Numerical("dual iterate not invertible".into())),
        };
        let h = op.schur(&x, &z_inv);
        let x_rd_zinv = &x * &rd * &z_inv;

        // Shared part of the right-hand side: rp + 𝒜*(X) + 𝒜*(X Rd Z⁻¹).
        let base = &rp + op.adjoint(&x) + op.adjoint(&linalg::symmetrize(&x_rd_zinv));

        let direction = |rc: &Mat| -> Result<(DVector<f64>, Mat, Mat)> {
            let rhs = &base - op.adjoint(&linalg::symmetrize(rc));
            let dy = solve_spd(&h, &rhs)?;
            let dz = &rd - op.apply(&dy);
            let dx = linalg::symmetrize(&(rc - &x - &x * &dz * &z_inv));
            Ok((dy, dx, dz))
        };

        // Predictor.
        let (_, dx_a, dz_a) = direction(&Mat::zeros(s, s))?;
        let ap = (opts.step_fraction * max_step(&lx, &dx_a)).min(1.0);
        let ad = (opts.step_fraction * max_step(&lz, &dz_a)).min(1.0);
        let mu_aff =
            linalg::trace_product(&(&x + &dx_a * ap), &(&z + &dz_a * ad)) / s.max(1) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc = (Mat::identity(s, s) * (sigma * mu) - &dx_a * &dz_a) * &z_inv;
        let (dy, dx, dz) = direction(&rc)?;
        let ap = (opts.step_fraction * max_step(&lx, &dx)).min(1.0);
        let ad = (opts.step_fraction * max_step(&lz, &dz)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        last_good = Some((x.clone(), y.clone(), z.clone()));
        x = linalg::symmetrize(&(&x + &dx * ap));
        y += &dy * ad;
        z = linalg::symmetrize(&(&z + &dz * ad));

        rp = b - op.adjoint(&x);
        rd = &c - &z - op.apply(&y);
        iterations = it + 1;
    }

    let pobj = linalg::trace_product(&c, &x);
    let dobj = b.dot(&y);
    Ok(SdpSolution {
        primal_infeasibility: rp.norm() / (1.0 + b_norm),
        dual_infeasibility: rd.norm() / (1.0 + c_norm),
        y,
        x,
        z,
        status,
        iterations,
        primal_objective: pobj,
        dual_objective: dobj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn scalar_interval() {
        // max y s.t. 2 − y ≥ 0  → y = 2.
        let op = DenseLmi {
            mats: vec![Mat::from_element(1, 1, 1.0)],
        };
        let sol = solve(
            &op,
            &DVector::from_element(1, 1.0),
            &Mat::from_element(1, 1, 2.0),
            &SdpOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.y[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn max_eigenvalue_bound() {
        // max t s.t. A − tI ⪰ 0  → t = λ_min(A).
        let a = Mat::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let op = DenseLmi {
            mats: vec![Mat::identity(3, 3)],
        };
        let sol = solve(
            &op,
            &DVector::from_element(1, 1.0),
            &a,
            &SdpOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.y[0], linalg::lambda_min(&a), epsilon = 1e-8);
    }

    #[test]
    fn two_by_two_with_coupling() {
        // Minimize y1 + y2 subject to [[y1, 1],[1, y2]] ⪰ 0 → y1 = y2 = 1.
        let op = DenseLmi {
            mats: vec![-diag(&[1.0, 0.0]), -diag(&[0.0, 1.0])],
        };
        let c = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let sol = solve(
            &op,
            &DVector::from_row_slice(&[-1.0, -1.0]),
            &c,
            &SdpOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.y[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.y[1], 1.0, epsilon = 1e-7);
        assert!(linalg::lambda_min(&sol.z) > -1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // −1 − y ⪰ 0 and y ⪰ 0 cannot hold together: block diag(−1 − y, y).
        let op = DenseLmi {
            mats: vec![diag(&[1.0, -1.0])],
        };
        let c = diag(&[-1.0, 0.0]);
        let sol = solve(
            &op,
            &DVector::from_element(1, 0.0),
            &c,
            &SdpOptions::default(),
        )
        .unwrap();
        assert_ne!(sol.status, SdpStatus::Optimal);
        assert!(linalg::lambda_min(&(&c - op.apply(&sol.y))) < 0.0);
    }
}
