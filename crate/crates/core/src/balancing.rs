//! Balancing transformation, truncation and the single-system balanced
//! truncation variants (Lyapunov, positive-real, mixed-Gramian).

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lti::{ModelJson, StateSpace};
use crate::lyapunov::{controllability_gramian, observability_gramian};
use crate::passivity::{min_available_storage, min_required_supply};

/// Spectrum floor, relative to `λ_max`, applied before Cholesky.
pub const CHOLESKY_CLAMP: f64 = 1e-12;
/// Smallest admissible `γₙ / γ₁`.
pub const MIN_GAMMA_RATIO: f64 = 1e-12;
/// Gap `γ_r − γ_{r+1}` (relative to `γ₁`) below which truncation warns.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    LyapBT,
    PRBT,
    MGBT,
    ISBT,
    PIBT,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LyapBT => "LyapBT",
            Method::PRBT => "PRBT",
            Method::MGBT => "MGBT",
            Method::ISBT => "ISBT",
            Method::PIBT => "PIBT",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which Gramian pair the mixed-Gramian method balances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MgVariant {
    /// Controllability Gramian `P` with available storage `Ξ_min`.
    PXi,
    /// Required supply `Π_min` with observability Gramian `Q`.
    PiQ,
}

/// Non-fatal conditions met while balancing or truncating.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BalancingWarning {
    /// `γ_r` and `γ_{r+1}` are numerically tied, so stability of the
    /// truncated model is not guaranteed.
    Tie {
        r: usize,
        gamma_r: f64,
        gamma_next: f64,
    },
    /// A Gramian was lifted to its spectrum floor before factorization.
    Clamped { which: &'static str },
}

/// Output of the balancing transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancingTransform {
    pub t: Mat,
    pub t_inv: Mat,
    /// Nonincreasing.
    pub gamma: Vec<f64>,
    pub warnings: Vec<BalancingWarning>,
}

/// System in balanced coordinates together with the transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedRealization {
    pub sys: StateSpace,
    pub t: Mat,
    pub t_inv: Mat,
    pub gamma: Vec<f64>,
    pub warnings: Vec<BalancingWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub reduced: StateSpace,
    pub kept_order: usize,
    pub gamma: Vec<f64>,
    /// `γ_{r+1}, …, γₙ`.
    pub discarded_gamma: Vec<f64>,
    pub method: Method,
    pub warnings: Vec<BalancingWarning>,
}

impl ReductionResult {
    /// Model JSON plus `"gamma"`, `"discarded_gamma"`, `"method"` and
    /// `"warnings"`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(ModelJson::from(&self.reduced)).expect("model serializes");
        let obj = v.as_object_mut().expect("model JSON is an object");
        obj.insert("gamma".into(), serde_json::json!(self.gamma));
        obj.insert(
            "discarded_gamma".into(),
            serde_json::json!(self.discarded_gamma),
        );
        obj.insert("method".into(), serde_json::json!(self.method.name()));
        obj.insert(
            "warnings".into(),
            serde_json::to_value(&self.warnings).expect("warnings serialize"),
        );
        v
    }
}

fn check_spd(x: &Mat, which: &'static str, warnings: &mut Vec<BalancingWarning>) -> Result<Mat> {
    let n = x.nrows();
    if x.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "{which} is {:?}, expected square",
            x.shape()
        )));
    }
    // Positive definiteness is judged on D X D with D = diag(X)^{-1/2}: the
    // balancing is invariant under diagonal state scaling, and Gramians of
    // models in physical units routinely span more than twelve decades.
    let xs = linalg::symmetrize(x);
    let d: Vec<f64> = if xs.diagonal().iter().all(|v| *v > 0.0) {
        xs.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect()
    } else {
        vec![1.0; n]
    };
    let eq = Mat::from_fn(n, n, |i, j| d[i] * xs[(i, j)] * d[j]);
    let vals = linalg::sym_eigvals(&eq);
    let (lmin, lmax) = (vals[0], vals[n - 1]);
    if !(lmax > 0.0) || lmin < -1e-10 * lmax {
        return Err(Error::NotPositiveDefinite {
            what: which,
            lambda_min: lmin,
            lambda_max: lmax,
        });
    }
    let (r_eq, clamped) = linalg::clamped_cholesky(&eq, CHOLESKY_CLAMP, which)?;
    if clamped {
        log::warn!("{which}: spectrum clamped at {CHOLESKY_CLAMP:e}·λ_max before Cholesky (λ_min {lmin:.3e})");
        warnings.push(BalancingWarning::Clamped { which });
    }
    let r = Mat::from_fn(n, n, |i, j| r_eq[(i, j)] / d[j]);
    Ok(r)
}

/// Transformation `T` with `T X_i Tᵀ = T⁻ᵀ X_o T⁻¹ = diag(γ)`.
///
/// Cholesky `X_i = R_iᵀR_i`, `X_o = R_oᵀR_o`; SVD `R_o R_iᵀ = UΓVᵀ`;
/// `T = Γ^{-1/2}UᵀR_o`, `T⁻¹ = R_iᵀVΓ^{-1/2}`.
pub fn balancing_transform(x_i: &Mat, x_o: &Mat) -> Result<BalancingTransform> {
    let n = x_i.nrows();
    if x_o.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "input Gramian is {:?}, output Gramian is {:?}",
            x_i.shape(),
            x_o.shape()
        )));
    }
    if n == 0 {
        return Ok(BalancingTransform {
            t: Mat::zeros(0, 0),
            t_inv: Mat::zeros(0, 0),
            gamma: Vec::new(),
            warnings: Vec::new(),
        });
    }
    // Diagonal pre-scaling x ↦ Sx giving S X_i S and S⁻¹ X_o S⁻¹ equal
    // diagonals; the SVD below then sees a well-scaled product.
    let s: Vec<f64> = (0..n)
        .map(|k| {
            let (p, q) = (x_i[(k, k)], x_o[(k, k)]);
            if p > 0.0 && q > 0.0 {
                (q / p).powf(0.25)
            } else {
                1.0
            }
        })
        .collect();
    let x_i = Mat::from_fn(n, n, |i, j| s[i] * x_i[(i, j)] * s[j]);
    let x_o = Mat::from_fn(n, n, |i, j| x_o[(i, j)] / (s[i] * s[j]));
    let mut warnings = Vec::new();
    let r_i = check_spd(&x_i, "input Gramian", &mut warnings)?;
    let r_o = check_spd(&x_o, "output Gramian", &mut warnings)?;
    let (u, g, v) = linalg::svd_sorted(&(&r_o * r_i.transpose()));
    if !(g[n - 1] > MIN_GAMMA_RATIO * g[0]) {
        return Err(Error::IllConditioned {
            what: "balancing (near non-minimal direction; truncate to a minimal realization first)",
            condition: g[0] / g[n - 1],
        });
    }
    let isq = DVector::from_iterator(n, g.iter().map(|x| 1.0 / x.sqrt()));
    let d = Mat::from_diagonal(&isq);
    let mut t = &d * u.transpose() * &r_o;
    let mut t_inv = r_i.transpose() * &v * &d;
    for k in 0..n {
        t.column_mut(k).scale_mut(s[k]);
        t_inv.row_mut(k).scale_mut(1.0 / s[k]);
    }
    Ok(BalancingTransform {
        t,
        t_inv,
        gamma: g.iter().copied().collect(),
        warnings,
    })
}

/// Balanced realization of `sys` for the Gramian pair `(X_i, X_o)`.
pub fn balance(sys: &StateSpace, x_i: &Mat, x_o: &Mat) -> Result<BalancedRealization> {
    if x_i.nrows() != sys.order() {
        return Err(Error::Dimension(format!(
            "Gramian of size {} for a system of order {}",
            x_i.nrows(),
            sys.order()
        )));
    }
    let bt = balancing_transform(x_i, x_o)?;
    Ok(BalancedRealization {
        sys: sys.transform_with_inverse(&bt.t, &bt.t_inv),
        t: bt.t,
        t_inv: bt.t_inv,
        gamma: bt.gamma,
        warnings: bt.warnings,
    })
}

/// Keeps the leading `r` balanced states.
pub fn truncate(bal: &BalancedRealization, r: usize, method: Method) -> Result<ReductionResult> {
    let n = bal.sys.order();
    if r < 1 || r > n {
        return Err(Error::InvalidArgument(format!(
            "truncation order {r} outside 1..={n}"
        )));
    }
    let mut warnings = bal.warnings.clone();
    if r < n {
        let (gr, gn) = (bal.gamma[r - 1], bal.gamma[r]);
        if gr - gn <= TIE_TOLERANCE * bal.gamma[0] {
            log::warn!("{method}: γ_{r} = {gr:.6e} and γ_{} = {gn:.6e} are tied; stability of the truncation is not guaranteed", r + 1);
            warnings.push(BalancingWarning::Tie {
                r,
                gamma_r: gr,
                gamma_next: gn,
            });
        }
    }
    Ok(ReductionResult {
        reduced: bal.sys.leading_states(r),
        kept_order: r,
        gamma: bal.gamma.clone(),
        discarded_gamma: bal.gamma[r..].to_vec(),
        method,
        warnings,
    })
}

fn require_minimal_stable(sys: &StateSpace) -> Result<()> {
    sys.require_hurwitz()?;
    sys.require_minimal()
}

/// Lyapunov balanced truncation with `(P, Q)`.
pub fn reduce_lyap_bt(sys: &StateSpace, r: usize) -> Result<ReductionResult> {
    require_minimal_stable(sys)?;
    let p = controllability_gramian(sys)?;
    let q = observability_gramian(sys)?;
    truncate(&balance(sys, &p.x, &q.x)?, r, Method::LyapBT)
}

/// Positive-real balanced truncation with `(Π_min, Ξ_min)`.
pub fn reduce_pr_bt(sys: &StateSpace, r: usize) -> Result<ReductionResult> {
    require_minimal_stable(sys)?;
    let pi = min_required_supply(sys)?;
    let xi = min_available_storage(sys)?;
    truncate(&balance(sys, &pi.x, &xi.x)?, r, Method::PRBT)
}

/// Mixed-Gramian balanced truncation with `(P, Ξ_min)` or `(Π_min, Q)`.
pub fn reduce_mg_bt(sys: &StateSpace, r: usize, variant: MgVariant) -> Result<ReductionResult> {
    require_minimal_stable(sys)?;
    let (x_i, x_o) = match variant {
        MgVariant::PXi => (
            controllability_gramian(sys)?.x,
            min_available_storage(sys)?.x,
        ),
        MgVariant::PiQ => (min_required_supply(sys)?.x, observability_gramian(sys)?.x),
    };
    truncate(&balance(sys, &x_i, &x_o)?, r, Method::MGBT)
}
