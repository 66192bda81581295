//! Error systems and their H₂ / L∞ norms.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::StateSpace;
use crate::lyapunov::solve_lyapunov;
use crate::report::json_f64;

/// `E = G − Ĝ` with stacked states `[x; x̂]`.
pub fn error_system(g: &StateSpace, ghat: &StateSpace) -> Result<StateSpace> {
    if g.inputs() != ghat.inputs() || g.outputs() != ghat.outputs() {
        return Err(Error::Dimension(format!(
            "error system of a {}x{} and a {}x{} model",
            g.outputs(),
            g.inputs(),
            ghat.outputs(),
            ghat.inputs()
        )));
    }
    StateSpace::new(
        linalg::block_diag(&[g.a(), ghat.a()]),
        linalg::vstack(&[g.b(), ghat.b()]),
        linalg::hstack(&[g.c(), &(-ghat.c())]),
        g.d() - ghat.d(),
    )
}

/// `√tr(C P Cᵀ)`; `+∞` when `A` is not Hurwitz or `D ≠ 0`.
pub fn h2_norm(sys: &StateSpace) -> f64 {
    if linalg::max_abs(sys.d()) > 0.0 {
        return f64::INFINITY;
    }
    if sys.order() == 0 {
        return 0.0;
    }
    if !sys.is_stable() {
        return f64::INFINITY;
    }
    let w = sys.b() * sys.b().transpose();
    match solve_lyapunov(sys.a(), &w) {
        Ok(p) => (sys.c() * p * sys.c().transpose()).trace().max(0.0).sqrt(),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinfOptions {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Log-spaced grid size.
    pub points: usize,
    /// Relative bracket width at which golden-section refinement stops.
    pub refine_tol: f64,
}

impl Default for LinfOptions {
    fn default() -> Self {
        Self {
            f_min_hz: 1.0,
            f_max_hz: 1e5,
            points: 2000,
            refine_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GridStats {
    pub evaluations: usize,
    /// Golden-section steps summed over refined peaks.
    pub refinement_steps: usize,
    pub refined_peaks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfNorm {
    pub value: f64,
    /// Frequency (rad/s) of the maximum; `None` when the norm is infinite or
    /// attained as `ω → ∞`.
    pub omega: Option<f64>,
    pub stats: GridStats,
}

/// Largest singular value of `G(jω)`; `None` at a pole.
pub fn sigma_max(sys: &StateSpace, omega: f64) -> Option<f64> {
    let g = sys.eval(Complex64::new(0.0, omega))?;
    if g.nrows() == 0 || g.ncols() == 0 {
        return Some(0.0);
    }
    if g.nrows() == 1 && g.ncols() == 1 {
        return Some(g[(0, 0)].norm());
    }
    Some(g.singular_values().max())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `sup_ω σ̄(G(jω))` over an adaptive log grid with golden-section
/// refinement around local maxima; includes `ω = 0` and `σ̄(D)` for
/// `ω → ∞`. Infinite when `A` has an eigenvalue `λ` with
/// `|Re λ| ≤ 1e−9·max(|λ|, 1)`.
pub fn linf_norm(sys: &StateSpace, opts: &LinfOptions) -> LinfNorm {
    let mut stats = GridStats::default();
    let infinite = LinfNorm {
        value: f64::INFINITY,
        omega: None,
        stats,
    };
    let n = sys.order();
    if n > 0 {
        if linalg::eigenvalues(sys.a())
            .iter()
            .any(|e| e.re.abs() <= 1e-9 * e.norm().max(1.0))
        {
            return infinite;
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let grid = log_grid(
        two_pi * opts.f_min_hz,
        two_pi * opts.f_max_hz,
        opts.points.max(2),
    );
    let eval = |w: f64, stats: &mut GridStats| -> f64 {
        stats.evaluations += 1;
        sigma_max(sys, w).unwrap_or(f64::INFINITY)
    };

    let d_gain = if sys.d().is_empty() {
        0.0
    } else {
        sys.d().singular_values().max()
    };
    let mut best = (d_gain, None);
    let dc = eval(0.0, &mut stats);
    if dc > best.0 {
        best = (dc, Some(0.0));
    }
    let vals: Vec<f64> = grid.iter().map(|&w| eval(w, &mut stats)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return LinfNorm { stats, ..infinite };
    }

    // Local maxima on the grid, largest first.
    let mut peaks: Vec<usize> = (0..vals.len())
        .filter(|&i| {
            (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == vals.len() || vals[i] >= vals[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(16);
    for &i in &peaks {
        if vals[i] < 0.5 * vals[peaks[0]] && vals[i] < best.0 {
            continue;
        }
        let lo = grid[i.saturating_sub(1)].ln();
        let hi = grid[(i + 1).min(grid.len() - 1)].ln();
        let mut steps = 0;
        let (w, v) = golden_max(
            lo,
            hi,
            opts.refine_tol,
            |x| eval(x.exp(), &mut stats),
            &mut steps,
        );
        stats.refinement_steps += steps;
        stats.refined_peaks += 1;
        let (w, v) = if vals[i] >= v {
            (grid[i], vals[i])
        } else {
            (w.exp(), v)
        };
        if v > best.0 {
            best = (v, Some(w));
        }
    }
    LinfNorm {
        value: best.0,
        omega: best.1,
        stats,
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> f64,
    steps: &mut usize,
) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo) > tol * 1e-2 && *steps < 100_000 {
        *steps += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub h2: f64,
    pub linf: f64,
    pub linf_omega: Option<f64>,
    pub grid: GridStats,
}

impl NormReport {
    pub fn of(sys: &StateSpace, opts: &LinfOptions) -> Self {
        let l = linf_norm(sys, opts);
        Self {
            h2: h2_norm(sys),
            linf: l.value,
            linf_omega: l.omega,
            grid: l.stats,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "h2": json_f64(self.h2),
            "linf": json_f64(self.linf),
            "linf_omega": self.linf_omega.map_or(serde_json::Value::Null, json_f64),
            "grid": self.grid,
        })
    }
}

/// Norms of `G − Ĝ`.
pub fn error_norms(g: &StateSpace, ghat: &StateSpace, opts: &LinfOptions) -> Result<NormReport> {
    Ok(NormReport::of(&error_system(g, ghat)?, opts))
}

/// Trapezoidal `(1/2π)∫ tr(E*E) dω` over `ω ∈ [lo, hi]` on a log grid (both
/// half-lines, hence the factor 2). Used to cross-check [`h2_norm`].
pub fn h2_quadrature(sys: &StateSpace, lo: f64, hi: f64, points: usize) -> f64 {
    let w = log_grid(lo, hi, points);
    let f: Vec<f64> = w
        .iter()
        .map(|&x| {
            sys.eval(Complex64::new(0.0, x))
                .map_or(f64::INFINITY, |g| g.iter().map(|z| z.norm_sqr()).sum())
        })
        .collect();
    let mut acc = 0.0;
    for i in 1..w.len() {
        acc += 0.5 * (f[i] + f[i - 1]) * (w[i] - w[i - 1]);
    }
    (2.0 * acc / (2.0 * std::f64::consts::PI)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use approx::assert_relative_eq;

    fn first_order() -> StateSpace {
        StateSpace::from_rows(1, 1, 1, &[-1.0], &[1.0], &[1.0], &[0.0]).unwrap()
    }

    fn msd() -> StateSpace {
        StateSpace::from_rows(
            2,
            1,
            1,
            &[0.0, 1.0, -1.0, -1.0],
            &[0.0, 1.0],
            &[0.0, 1.0],
            &[0.0],
        )
        .unwrap()
    }

    /// Grid wide enough to contain ω = 1 rad/s.
    fn wide() -> LinfOptions {
        LinfOptions {
            f_min_hz: 1e-3,
            f_max_hz: 1e2,
            ..Default::default()
        }
    }

    #[test]
    fn error_system_structure() {
        let g = msd();
        let e = error_system(&g, &g).unwrap();
        assert_eq!(e.order(), 4);
        for s in e.frequency_response(&[0.1, 1.0, 10.0]) {
            assert!(s.unwrap().g.norm() < 1e-12);
        }
        let two = StateSpace::gain(Mat::from_element(1, 1, 2.0));
        let half = StateSpace::gain(Mat::from_element(1, 1, 0.5));
        let e = error_system(&two, &half).unwrap();
        assert_eq!(e.d()[(0, 0)], 1.5);
        assert_relative_eq!(linf_norm(&e, &wide()).value, 1.5);
        let rect = StateSpace::gain(Mat::zeros(2, 1));
        assert!(error_system(&two, &rect).is_err());
    }

    #[test]
    fn h2_examples() {
        assert_relative_eq!(h2_norm(&first_order()), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(h2_norm(&msd()), 0.5f64.sqrt(), epsilon = 1e-12);
        let unstable = StateSpace::from_rows(1, 1, 1, &[1.0], &[1.0], &[1.0], &[0.0]).unwrap();
        assert_eq!(h2_norm(&unstable), f64::INFINITY);
        let with_d = StateSpace::from_rows(1, 1, 1, &[-1.0], &[1.0], &[1.0], &[0.1]).unwrap();
        assert_eq!(h2_norm(&with_d), f64::INFINITY);
    }

    #[test]
    fn linf_examples() {
        let l = linf_norm(&first_order(), &wide());
        assert_relative_eq!(l.value, 1.0, epsilon = 1e-12);
        assert_eq!(l.omega, Some(0.0));

        let l = linf_norm(&msd(), &wide());
        assert_relative_eq!(l.value, 1.0, epsilon = 1e-10);
        assert_relative_eq!(l.omega.unwrap(), 1.0, max_relative = 1e-3);

        let unstable = StateSpace::from_rows(1, 1, 1, &[1.0], &[1.0], &[1.0], &[0.0]).unwrap();
        let l = linf_norm(&unstable, &wide());
        assert_relative_eq!(l.value, 1.0, epsilon = 1e-12);
        assert_eq!(l.omega, Some(0.0));

        let osc = StateSpace::from_rows(
            2,
            1,
            1,
            &[0.0, 1.0, -1.0, 0.0],
            &[0.0, 1.0],
            &[0.0, 1.0],
            &[0.0],
        )
        .unwrap();
        assert_eq!(linf_norm(&osc, &wide()).value, f64::INFINITY);
    }

    #[test]
    fn h2_matches_quadrature() {
        let s = StateSpace::from_rows(
            2,
            1,
            1,
            &[-0.5, 2.0, -2.0, -0.5],
            &[1.0, 0.5],
            &[1.0, -1.0],
            &[0.0],
        )
        .unwrap();
        let q = h2_quadrature(&s, 1e-3, 1e6, 10_000);
        assert_relative_eq!(h2_norm(&s), q, max_relative = 1e-2);
    }

    #[test]
    fn report_serializes_infinity() {
        let unstable = StateSpace::from_rows(1, 1, 1, &[1.0], &[1.0], &[1.0], &[0.0]).unwrap();
        let r = NormReport::of(&unstable, &wide());
        assert_eq!(r.to_json_value()["h2"], "inf");
    }
}
