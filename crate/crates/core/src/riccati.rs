//! Stabilizing solution of the positive-real Riccati equation
//!
//! ```text
//!   AᵀΞ + ΞA + (ΞB − Cᵀ) R⁻¹ (BᵀΞ − C) = 0,   R = D + Dᵀ + 2εI,
//! ```
//!
//! used as a second, independent route to `Ξ_min`. For singular `D + Dᵀ` the
//! feedthrough is regularized by `ε > 0`, which biases the answer by roughly
//! `O(√ε)`; [`epsilon_trend`] reports how the solution moves as `ε` shrinks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lti::StateSpace;
use crate::lyapunov::{solve_lyapunov, Gramian, GramianKind};
use crate::passivity::{self, lyapunov_balancing};

pub const DEFAULT_EPSILONS: [f64; 3] = [1e-4, 1e-6, 1e-8];

/// Matrix sign function by the scaled Newton iteration
/// `W ← (cW + (cW)⁻¹)/2`, `c = |det W|^{−1/N}`. The attainable accuracy
/// degrades with eigenvalues close to the imaginary axis; results with
/// `‖W² − I‖_F < 1e−4·N` are returned.
pub fn matrix_sign(h: &Mat) -> Result<Mat> {
    let n = h.nrows();
    let mut w = h.clone();
    let mut scaling = true;
    let mut last_change = f64::INFINITY;
    for _ in 0..100 {
        let lu = w.clone().lu();
        let inv = lu.try_inverse().ok_or_else(|| {
            Error::Numerical("matrix sign: eigenvalue on the imaginary axis".into())
        })?;
        let c = if scaling {
            let lu = w.clone().lu();
            let logdet: f64 = lu.u().diagonal().iter().map(|x| x.abs().ln()).sum();
            (-logdet / n as f64).exp()
        } else {
            1.0
        };
        let next = (&w * c + inv / c) * 0.5;
        let change = (&next - &w).norm() / next.norm();
        w = next;
        if !change.is_finite() {
            return Err(Error::Numerical("matrix sign iteration diverged".into()));
        }
        if change < 1e-2 {
            scaling = false;
        }
        // Quadratic convergence ends at the conditioning floor; stop once
        // the update no longer shrinks.
        if change < 1e-13 || (change < 1e-6 && change >= last_change) {
            break;
        }
        last_change = change;
    }
    let defect = (&w * &w - Mat::identity(n, n)).norm();
    if defect < 1e-4 * n as f64 {
        Ok(w)
    } else {
        Err(Error::Numerical(format!(
            "matrix sign iteration did not converge (‖W² − I‖ = {defect:.2e})"
        )))
    }
}

/// Stabilizing solution for `R = D + Dᵀ + 2εI`, in the coordinates of `sys`.
pub fn solve_pr_riccati(sys: &StateSpace, eps: f64) -> Result<Mat> {
    sys.require_square()?;
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let n = sys.order();
    let p = sys.inputs();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let r = d + d.transpose() + Mat::identity(p, p) * (2.0 * eps);
    let r_inv = linalg::spd_inverse(&r).ok_or_else(|| {
        let ev = linalg::sym_eigvals(&r);
        Error::NotPositiveDefinite {
            what: "D + Dᵀ + 2εI",
            lambda_min: ev[0],
            lambda_max: ev[p - 1],
        }
    })?;
    let f = a - b * &r_inv * c;
    let g = b * &r_inv * b.transpose();
    let q = c.transpose() * &r_inv * c;
    let ham = linalg::vstack(&[
        &linalg::hstack(&[&f, &g]),
        &linalg::hstack(&[&(-&q), &(-f.transpose())]),
    ]);
    let w = matrix_sign(&ham)?;

    // Stable invariant subspace [I; Ξ] satisfies (W + I)[I; Ξ] = 0.
    let w12 = w.view((0, n), (n, n));
    let w22 = w.view((n, n), (n, n)) + Mat::identity(n, n);
    let w11 = w.view((0, 0), (n, n)) + Mat::identity(n, n);
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let lhs = linalg::vstack(&[&w12.into_owned(), &w22]);
    let rhs = -linalg::vstack(&[&w11, &w21]);
    let svd = lhs.svd(true, true);
    let xi = svd
        .solve(&rhs, 1e-14 * svd.singular_values.max())
        .map_err(|e| Error::Numerical(format!("Riccati subspace solve: {e}")))?;
    let mut xi = linalg::symmetrize(&xi);

    let closed_loop = |xi: &Mat| a + b * &r_inv * (b.transpose() * xi - c);
    let residual = |xi: &Mat| {
        let k = xi * b - c.transpose();
        linalg::symmetrize(&(a.transpose() * xi + xi * a + &k * &r_inv * k.transpose()))
    };
    // Newton–Kleinman refinement: A_cᵀΔ + ΔA_c = −𝓡(Ξ).
    let mut res = residual(&xi);
    for _ in 0..30 {
        let ac = closed_loop(&xi);
        if !ac.iter().all(|v| v.is_finite())
            || linalg::rightmost_eigenvalue(&ac).is_some_and(|e| e.re >= 0.0)
        {
            break;
        }
        let Ok(delta) = solve_lyapunov(&ac.transpose(), &res) else {
            break;
        };
        let cand = linalg::symmetrize(&(&xi + &delta));
        let cand_res = residual(&cand);
        if !(cand_res.norm() < res.norm()) {
            break;
        }
        let done = delta.norm() <= 1e-14 * cand.norm();
        xi = cand;
        res = cand_res;
        if done {
            break;
        }
    }

    if let Some(e) = linalg::rightmost_eigenvalue(&closed_loop(&xi)) {
        if e.re >= 0.0 {
            return Err(Error::Numerical(format!(
                "Riccati solution is not stabilizing (closed-loop eigenvalue {:.3e}{:+.3e}i)",
                e.re, e.im
            )));
        }
    }
    Ok(xi)
}

/// Storage matrix from the `ε`-regularized Riccati equation, solved in
/// Lyapunov-balanced coordinates when available. `residual` is the largest
/// eigenvalue of the unregularized LMI block.
pub fn storage_riccati(sys: &StateSpace, eps: f64) -> Result<Gramian> {
    let xi = match lyapunov_balancing(sys) {
        Some((t, t_inv)) => {
            let xt = solve_pr_riccati(&sys.transform_with_inverse(&t, &t_inv), eps)?;
            linalg::symmetrize(&(t.transpose() * xt * &t))
        }
        None => solve_pr_riccati(sys, eps)?,
    };
    let (_, res) = passivity::lmi_residual(sys, &xi)?;
    Ok(Gramian::new(xi, GramianKind::AvailableStorage, res))
}

/// Regularized solutions over a sequence of `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonTrend {
    pub eps: Vec<f64>,
    #[serde(skip)]
    pub solutions: Vec<Mat>,
    /// `‖Ξ_{εᵢ} − Ξ_{εᵢ₋₁}‖_F / ‖Ξ_{εᵢ}‖_F` (first entry is NaN).
    pub successive_change: Vec<f64>,
    /// Largest eigenvalue of the unregularized LMI at each solution.
    pub lmi_residual: Vec<f64>,
}

impl EpsilonTrend {
    /// Relative distance of each regularized solution from `reference`.
    pub fn distance_to(&self, reference: &Mat) -> Vec<f64> {
        self.solutions
            .iter()
            .map(|x| (x - reference).norm() / reference.norm())
            .collect()
    }

    /// Extrapolation to `ε → 0` assuming `Ξ_ε ≈ Ξ₀ + a√ε + bε` over the last
    /// three solutions.
    pub fn extrapolate(&self) -> Option<Mat> {
        let k = self.solutions.len();
        if k < 3 {
            return None;
        }
        let s: Vec<f64> = self.eps[k - 3..].iter().map(|e| e.sqrt()).collect();
        let v = Mat::from_fn(3, 3, |i, j| s[i].powi(j as i32));
        let inv = v.try_inverse()?;
        let w = inv.row(0);
        let mut x = Mat::zeros(self.solutions[0].nrows(), self.solutions[0].ncols());
        for (i, sol) in self.solutions[k - 3..].iter().enumerate() {
            x += sol * w[i];
        }
        Some(linalg::symmetrize(&x))
    }
}

pub fn epsilon_trend(sys: &StateSpace, eps: &[f64]) -> Result<EpsilonTrend> {
    let mut solutions: Vec<Mat> = Vec::with_capacity(eps.len());
    let mut successive_change = Vec::with_capacity(eps.len());
    let mut lmi_residual = Vec::with_capacity(eps.len());
    for &e in eps {
        let g = storage_riccati(sys, e)?;
        successive_change.push(match solutions.last() {
            Some(prev) => (&g.x - prev).norm() / g.x.norm(),
            None => f64::NAN,
        });
        lmi_residual.push(g.residual);
        log::debug!("Riccati ε = {e:.1e}: LMI residual {:.3e}", g.residual);
        solutions.push(g.x);
    }
    Ok(EpsilonTrend {
        eps: eps.to_vec(),
        solutions,
        successive_change,
        lmi_residual,
    })
}
