//! Positive-real lemma: the storage LMI
//!
//! ```text
//!   M(Ξ) = [ AᵀΞ + ΞA   ΞB − Cᵀ  ]
//!          [ BᵀΞ − C   −(D + Dᵀ) ]  ⪯ 0
//! ```
//!
//! passivity certificates, and the minimal solutions `Ξ_min`, `Π_min`.
//!
//! The trace-minimal `Ξ` is computed by a small interior-point method. Systems
//! with singular `D + Dᵀ` (the usual case for mechanical models with `D = 0`)
//! have no strictly feasible `Ξ`, which breaks interior-point methods. Two
//! exactly known faces of the feasible set are therefore factored out first:
//!
//! * for `u` in the null space of `D + Dᵀ`, `M(Ξ)[0; u] = 0` forces
//!   `ΞBu = Cᵀu`;
//! * for `u` in the null space of `G(0) + G(0)ᵀ`, with `x₀ = −A⁻¹Bu`,
//!   `M(Ξ)[x₀; u] = 0` forces `Ξx₀ = A⁻ᵀCᵀu`.
//!
//! Writing all of these as `ΞW = H`, the feasible set is parametrized as
//! `Ξ = Ξ_p + N Y Nᵀ` with `N` spanning `range(W)^⊥`, and the LMI is
//! compressed onto the orthogonal complement `V` of the face vectors.

use nalgebra::DVector;
use serde::Serialize;

use crate::balancing;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::lti::{ModelJson, StateSpace};
use crate::lyapunov::{controllability_gramian, observability_gramian, Gramian, GramianKind};
use crate::report::json_f64;
use crate::riccati;
use crate::sdp::{self, LmiOperator, SdpOptions, SdpStatus};

/// Relative tolerance for the null spaces that define the faces.
const FACE_TOL: f64 = 1e-9;

/// `1e−7·(1 + ‖Ξ‖_F)`.
pub fn feasibility_tolerance(xi: &Mat) -> f64 {
    1e-7 * (1.0 + xi.norm())
}

/// The assembled LMI matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub m: Mat,
    pub n: usize,
    pub p: usize,
}

impl LmiBlock {
    pub fn max_eigenvalue(&self) -> f64 {
        if self.m.nrows() == 0 {
            return f64::NEG_INFINITY;
        }
        linalg::lambda_max(&self.m)
    }
}

pub fn lmi_block(sys: &StateSpace, xi: &Mat) -> Result<LmiBlock> {
    sys.require_square()?;
    let n = sys.order();
    let p = sys.inputs();
    if xi.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Xi is {:?}, expected {n}x{n}",
            xi.shape()
        )));
    }
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let xi = linalg::symmetrize(xi);
    let tl = a.transpose() * &xi + &xi * a;
    let tr = &xi * b - c.transpose();
    let br = -(d + d.transpose());
    let m = linalg::vstack(&[
        &linalg::hstack(&[&tl, &tr]),
        &linalg::hstack(&[&tr.transpose(), &br]),
    ]);
    Ok(LmiBlock {
        m: linalg::symmetrize(&m),
        n,
        p,
    })
}

/// The LMI block and its largest eigenvalue (`≤ 0` means `Ξ` is a valid
/// storage matrix).
pub fn lmi_residual(sys: &StateSpace, xi: &Mat) -> Result<(LmiBlock, f64)> {
    let blk = lmi_block(sys, xi)?;
    let e = blk.max_eigenvalue();
    Ok((blk, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateMethod {
    SDP,
    RegularizedRiccati,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityCertificate {
    pub feasible: bool,
    pub xi: Option<Gramian>,
    /// Largest eigenvalue of the LMI block at the best candidate (`+∞` when
    /// no candidate exists).
    pub max_eig_residual: f64,
    pub method: CertificateMethod,
}

impl PassivityCertificate {
    fn infeasible(residual: f64, method: CertificateMethod) -> Self {
        Self {
            feasible: false,
            xi: None,
            max_eig_residual: residual,
            method,
        }
    }

    /// Model JSON extended with `"Xi"`, `"residual"`, `"feasible"` and
    /// `"method"`.
    pub fn to_json_value(&self, sys: &StateSpace) -> serde_json::Value {
        let mut v = serde_json::to_value(ModelJson::from(sys)).expect("model serializes");
        let obj = v.as_object_mut().expect("model JSON is an object");
        let xi = match &self.xi {
            Some(g) => serde_json::json!(crate::lti::mat_to_rows(&g.x)),
            None => serde_json::Value::Null,
        };
        obj.insert("Xi".into(), xi);
        obj.insert("residual".into(), json_f64(self.max_eig_residual));
        obj.insert("feasible".into(), serde_json::json!(self.feasible));
        obj.insert(
            "method".into(),
            serde_json::to_value(self.method).expect("method serializes"),
        );
        v
    }
}

/// Checks a candidate storage matrix against the soundness rule: LMI largest
/// eigenvalue `≤ 1e−7·(1+‖Ξ‖_F)` and `λ_min(Ξ) ≥ 1e−10·‖Ξ‖`.
pub fn certify(
    sys: &StateSpace,
    xi: &Mat,
    method: CertificateMethod,
) -> Result<PassivityCertificate> {
    let (_, res) = lmi_residual(sys, xi)?;
    let xs = linalg::symmetrize(xi);
    let n = xs.nrows();
    let pd = n == 0 || relatively_positive(&xs) || relatively_positive(&jacobi_scaled(&xs));
    let ok = res <= feasibility_tolerance(&xs) && pd;
    Ok(PassivityCertificate {
        feasible: ok,
        xi: ok.then(|| Gramian::new(xs, GramianKind::AvailableStorage, res)),
        max_eig_residual: res,
        method,
    })
}

fn relatively_positive(x: &Mat) -> bool {
    linalg::lambda_min(x) >= 1e-10 * linalg::lambda_max(x).abs().max(f64::MIN_POSITIVE)
}

/// `D Ξ D` with `D = diag(Ξ)^{-1/2}`. Storage matrices of models in physical
/// units (metres next to radians, kilograms next to N/m) easily span more than
/// ten decades, so the relative eigenvalue test is also applied after
/// equilibration. A non-positive diagonal entry leaves `Ξ` unscaled.
fn jacobi_scaled(x: &Mat) -> Mat {
    let d: Vec<f64> = x
        .diagonal()
        .iter()
        .map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { f64::NAN })
        .collect();
    if d.iter().any(|v| v.is_nan()) {
        return x.clone();
    }
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| d[i] * x[(i, j)] * d[j])
}

/// Engine used to compute storage matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Riccati when `D + Dᵀ` is comfortably positive definite, interior point
    /// otherwise.
    #[default]
    Auto,
    InteriorPoint,
    Riccati,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageOptions {
    /// Trace-minimal (`Ξ_min`) when true; otherwise any strictly interior
    /// feasible point (the analytic center of the reduced problem).
    pub minimal: bool,
    pub engine: Engine,
    /// Solve in Lyapunov-balanced coordinates when `A` is Hurwitz.
    pub precondition: bool,
    pub sdp: SdpOptions,
}

impl Default for StorageOptions {
    fn default() -> Self {
        Self {
            minimal: true,
            engine: Engine::Auto,
            precondition: true,
            sdp: SdpOptions::default(),
        }
    }
}

/// Coordinates in which `P = Q = diag(γ)`: returns `(T, T⁻¹)`.
pub(crate) fn lyapunov_balancing(sys: &StateSpace) -> Option<(Mat, Mat)> {
    if sys.order() == 0 || !sys.is_stable() {
        return None;
    }
    let p = controllability_gramian(sys).ok()?;
    let q = observability_gramian(sys).ok()?;
    let bt = balancing::balancing_transform(&p.x, &q.x).ok()?;
    if linalg::cond2(&bt.t) >= 1e10 {
        return None;
    }
    // A consistent inverse keeps the change of coordinates an exact
    // similarity; the product formula for T⁻¹ is only accurate to about
    // ε·‖R_o‖‖R_i‖/γₙ.
    let t_inv = linalg::inverse(&bt.t, "balancing transformation").ok()?;
    Some((bt.t, t_inv))
}

/// Face data `ΞW = H`, the free-variable basis `N` and the LMI compression `V`.
#[derive(Debug, Clone)]
struct FaceReduction {
    xi_p: Mat,
    basis: Mat,
    compress: Mat,
}

/// `Err(residual)` when the face equations admit no symmetric solution.
fn face_reduce(sys: &StateSpace) -> std::result::Result<FaceReduction, f64> {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let n = sys.order();
    let p = sys.inputs();
    let r = d + d.transpose();
    let scale = 1.0 + r.norm();
    let u_inf = linalg::sym_null_space(&r, FACE_TOL * scale);

    let mut w_cols: Vec<Mat> = Vec::new();
    let mut h_cols: Vec<Mat> = Vec::new();
    let mut face_vecs: Vec<Mat> = Vec::new();
    // Size of the maps that produce the columns of W; directions of W below
    // FACE_TOL times this are round-off and carry no constraint.
    let mut w_ref: f64 = 0.0;
    if u_inf.ncols() > 0 {
        w_ref = w_ref.max(b.norm());
        w_cols.push(b * &u_inf);
        h_cols.push(c.transpose() * &u_inf);
        face_vecs.push(linalg::vstack(&[&Mat::zeros(n, u_inf.ncols()), &u_inf]));
    }

    // The DC face needs A invertible.
    if n > 0 && sys.spectral_abscissa() < 0.0 {
        if let Ok(a_inv_b) = linalg::solve(a, b, "A") {
            let g0 = d - c * &a_inv_b;
            let r0 = &g0 + g0.transpose();
            let u0 = linalg::sym_null_space(&r0, FACE_TOL * (1.0 + g0.norm()));
            if u0.ncols() > 0 {
                let x0 = -(&a_inv_b * &u0);
                if let Ok(h0) = linalg::solve(&a.transpose(), &(c.transpose() * &u0), "Aᵀ") {
                    w_ref = w_ref.max(a_inv_b.norm());
                    w_cols.push(x0.clone());
                    h_cols.push(h0);
                    face_vecs.push(linalg::vstack(&[&x0, &u0]));
                }
            }
        }
    }

    let significant = if w_cols.is_empty() {
        None
    } else {
        let w = linalg::hstack(&w_cols.iter().collect::<Vec<_>>());
        let h = linalg::hstack(&h_cols.iter().collect::<Vec<_>>());
        let (_, sv, v) = linalg::svd_sorted(&w);
        let keep = sv.iter().filter(|&&x| x > FACE_TOL * w_ref).count();
        let dropped = v.columns(keep, v.ncols() - keep).into_owned();
        let h_dropped = (&h * &dropped).norm();
        if h_dropped > 1e-8 * (1.0 + h.norm()) {
            // ΞW = H with W ≈ 0 in these directions needs H ≈ 0 there too.
            return Err(h_dropped);
        }
        (keep > 0).then(|| {
            let vk = v.columns(0, keep).into_owned();
            (&w * &vk, &h * &vk)
        })
    };
    let (xi_p, basis) = match significant {
        None => (Mat::zeros(n, n), Mat::identity(n, n)),
        Some((w, h)) => {
            let wth = w.transpose() * &h;
            let asym = (&wth - wth.transpose()).norm();
            let h_scale = 1.0 + h.norm() * w.norm();
            if asym > 1e-8 * h_scale {
                return Err(asym);
            }
            let w_pinv = w
                .clone()
                .pseudo_inverse(
                    FACE_TOL * linalg::singular_values(&w).get(0).copied().unwrap_or(0.0),
                )
                .map_err(|_| f64::INFINITY)?;
            let hw = &h * &w_pinv;
            let xi_p = linalg::symmetrize(
                &(&hw + hw.transpose() - w_pinv.transpose() * linalg::symmetrize(&wth) * &w_pinv),
            );
            let miss = (&xi_p * &w - &h).norm();
            if miss > 1e-8 * h_scale {
                return Err(miss);
            }
            (xi_p, linalg::complement_basis(&w, FACE_TOL))
        }
    };
    let compress = if face_vecs.is_empty() {
        Mat::identity(n + p, n + p)
    } else {
        linalg::complement_basis(
            &linalg::hstack(&face_vecs.iter().collect::<Vec<_>>()),
            FACE_TOL,
        )
    };
    Ok(FaceReduction {
        xi_p,
        basis,
        compress,
    })
}

/// `Y ↦ Vᵀ 𝒜(N Y Nᵀ) V` in the orthonormal symmetric basis, where
/// `𝒜(Δ) = [AᵀΔ + ΔA, ΔB; BᵀΔ, 0] = FᵀΔG + GᵀΔF`, `F = [A, B]`, `G = [I, 0]`.
struct StorageOperator {
    /// `VᵀFᵀN`.
    fm: Mat,
    /// `VᵀGᵀN`.
    gm: Mat,
    k: usize,
    /// `(a, b)` with `a ≤ b` per variable.
    pairs: Vec<(usize, usize)>,
}

impl StorageOperator {
    fn new(sys: &StateSpace, red: &FaceReduction) -> Self {
        let n = sys.order();
        let p = sys.inputs();
        let f = linalg::hstack(&[sys.a(), sys.b()]);
        let g = linalg::hstack(&[&Mat::identity(n, n), &Mat::zeros(n, p)]);
        let v = &red.compress;
        let nb = &red.basis;
        let k = nb.ncols();
        let mut pairs = Vec::with_capacity(k * (k + 1) / 2);
        for bcol in 0..k {
            for arow in 0..=bcol {
                pairs.push((arow, bcol));
            }
        }
        Self {
            fm: v.transpose() * f.transpose() * nb,
            gm: v.transpose() * g.transpose() * nb,
            k,
            pairs,
        }
    }

    fn smat(&self, y: &DVector<f64>) -> Mat {
        let mut m = Mat::zeros(self.k, self.k);
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            if a == b {
                m[(a, a)] = y[i];
            } else {
                let v = y[i] / std::f64::consts::SQRT_2;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }
}

impl LmiOperator for StorageOperator {
    fn dim(&self) -> usize {
        self.pairs.len()
    }

    fn size(&self) -> usize {
        self.fm.nrows()
    }

    fn apply(&self, y: &DVector<f64>) -> Mat {
        let ym = self.smat(y);
        let t = &self.fm * ym * self.gm.transpose();
        &t + t.transpose()
    }

    fn adjoint(&self, w: &Mat) -> DVector<f64> {
        let ws = linalg::symmetrize(w);
        let s1 = self.fm.transpose() * ws * &self.gm;
        let s = &s1 + s1.transpose();
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(a, b)| {
                if a == b {
                    s[(a, a)]
                } else {
                    std::f64::consts::SQRT_2 * s[(a, b)]
                }
            }),
        )
    }

    /// Each basis matrix has rank at most four, so the Schur complement
    /// reduces to products of `UᵀXU` and `UᵀZ⁻¹U` with `U = [F_m, G_m]`.
    fn schur(&self, x: &Mat, z_inv: &Mat) -> Mat {
        let k = self.k;
        let u = linalg::hstack(&[&self.fm, &self.gm]);
        let xx = u.transpose() * x * &u;
        let zz = u.transpose() * z_inv * &u;
        // Rank-one terms u wᵀ as (u index, w index) into U's columns.
        let terms: Vec<([(usize, usize); 4], f64)> = self
            .pairs
            .iter()
            .map(|&(a, b)| {
                let c = if a == b {
                    0.5
                } else {
                    std::f64::consts::FRAC_1_SQRT_2
                };
                ([(a, k + b), (b, k + a), (k + a, b), (k + b, a)], c)
            })
            .collect();
        let m = terms.len();
        let mut h = Mat::zeros(m, m);
        for i in 0..m {
            let (ti, ci) = &terms[i];
            for j in 0..=i {
                let (tj, cj) = &terms[j];
                let mut acc = 0.0;
                for &(us, ws) in ti {
                    for &(ut, wt) in tj {
                        acc += xx[(ws, ut)] * zz[(wt, us)];
                    }
                }
                let v = ci * cj * acc;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

/// Interior-point storage computation on `sys` as given (no change of
/// coordinates).
fn storage_sdp(sys: &StateSpace, minimal: bool, opts: &SdpOptions) -> Result<Mat> {
    let red = face_reduce(sys).map_err(|residual| Error::NotPassive { residual })?;
    let k = red.basis.ncols();
    let lmi0 = lmi_block(sys, &red.xi_p)?;
    if k == 0 || red.compress.ncols() == 0 {
        return Ok(red.xi_p);
    }
    let op = StorageOperator::new(sys, &red);
    let c = -(red.compress.transpose() * &lmi0.m * &red.compress);
    let b = DVector::from_iterator(
        op.dim(),
        op.pairs
            .iter()
            .map(|&(a, bb)| if minimal && a == bb { -1.0 } else { 0.0 }),
    );
    let sol = sdp::solve(&op, &b, &c, opts)?;
    log::debug!(
        "storage SDP: {} vars, block {}, {:?} after {} iterations (pinf {:.2e}, dinf {:.2e})",
        op.dim(),
        op.size(),
        sol.status,
        sol.iterations,
        sol.primal_infeasibility,
        sol.dual_infeasibility
    );
    if sol.status == SdpStatus::Infeasible {
        let z = &c - op.apply(&sol.y);
        return Err(Error::NotPassive {
            residual: -linalg::lambda_min(&z),
        });
    }
    let y = op.smat(&sol.y);
    Ok(linalg::symmetrize(
        &(&red.xi_p + &red.basis * y * red.basis.transpose()),
    ))
}

fn riccati_preferred(sys: &StateSpace) -> bool {
    let r = sys.d() + sys.d().transpose();
    if r.nrows() == 0 || !sys.is_stable() {
        return false;
    }
    let ev = linalg::sym_eigvals(&r);
    ev[0] > 1e-6 * ev[ev.len() - 1].max(1e-300) && ev[0] > 1e-8
}

/// Storage matrix and the engine that produced it, before certification.
fn storage_candidate(sys: &StateSpace, opts: &StorageOptions) -> Result<(Mat, CertificateMethod)> {
    let use_riccati = match opts.engine {
        Engine::Riccati => true,
        Engine::InteriorPoint => false,
        Engine::Auto => opts.minimal && riccati_preferred(sys),
    };
    if use_riccati {
        let res = riccati::storage_riccati(sys, 0.0);
        match (res, opts.engine) {
            (Ok(g), _) => return Ok((g.x, CertificateMethod::RegularizedRiccati)),
            (Err(e), Engine::Riccati) => return Err(e),
            (Err(e), _) => log::debug!(
                "Riccati fast path failed ({e}); falling back to the interior-point engine"
            ),
        }
    }
    let pre = if opts.precondition {
        lyapunov_balancing(sys)
    } else {
        None
    };
    let xi = match &pre {
        Some((t, t_inv)) => {
            let xi_t = storage_sdp(
                &sys.transform_with_inverse(t, t_inv),
                opts.minimal,
                &opts.sdp,
            )?;
            linalg::symmetrize(&(t.transpose() * xi_t * t))
        }
        None => storage_sdp(sys, opts.minimal, &opts.sdp)?,
    };
    Ok((xi, CertificateMethod::SDP))
}

fn check_inputs(sys: &StateSpace) -> Result<()> {
    sys.require_square()?;
    sys.require_minimal()
}

/// Eigenvalues in the open right half-plane rule out passivity.
fn has_unstable_pole(sys: &StateSpace) -> bool {
    sys.spectral_abscissa() > 1e-9 * sys.a().norm().max(1.0)
}

/// Searches for a storage matrix `Ξ ≻ 0` and certifies it.
pub fn is_passive(sys: &StateSpace) -> Result<PassivityCertificate> {
    is_passive_with(sys, &StorageOptions::default())
}

pub fn is_passive_with(sys: &StateSpace, opts: &StorageOptions) -> Result<PassivityCertificate> {
    check_inputs(sys)?;
    if has_unstable_pole(sys) {
        return Ok(PassivityCertificate::infeasible(
            f64::INFINITY,
            CertificateMethod::SDP,
        ));
    }
    match storage_candidate(sys, opts) {
        Ok((xi, method)) => certify(sys, &xi, method),
        Err(Error::NotPassive { residual }) => Ok(PassivityCertificate::infeasible(
            residual,
            CertificateMethod::SDP,
        )),
        Err(Error::Numerical(msg)) => {
            log::debug!("no storage candidate: {msg}");
            Ok(PassivityCertificate::infeasible(
                f64::INFINITY,
                CertificateMethod::SDP,
            ))
        }
        Err(e) => Err(e),
    }
}

/// Loewner-minimal storage matrix `Ξ_min`.
pub fn min_available_storage(sys: &StateSpace) -> Result<Gramian> {
    available_storage_with(sys, &StorageOptions::default())
}

/// Storage matrix with explicit options; with `minimal = false` any
/// certified storage matrix is returned.
pub fn available_storage_with(sys: &StateSpace, opts: &StorageOptions) -> Result<Gramian> {
    check_inputs(sys)?;
    if has_unstable_pole(sys) {
        return Err(Error::NotPassive {
            residual: f64::INFINITY,
        });
    }
    let (xi, method) = storage_candidate(sys, opts)?;
    let cert = certify(sys, &xi, method)?;
    match cert.xi {
        Some(g) => Ok(g),
        None => Err(Error::NotPassive {
            residual: cert.max_eig_residual,
        }),
    }
}

/// `Π_min(sys) = Ξ_min(dual(sys))`.
pub fn min_required_supply(sys: &StateSpace) -> Result<Gramian> {
    required_supply_with(sys, &StorageOptions::default())
}

pub fn required_supply_with(sys: &StateSpace, opts: &StorageOptions) -> Result<Gramian> {
    let g = available_storage_with(&sys.dual()?, opts)?;
    Ok(Gramian::new(g.x, GramianKind::RequiredSupply, g.residual))
}
