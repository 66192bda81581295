//! Euler–Bernoulli beam finite elements and the two-beam damper benchmark.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interconnection::{InterconnectionTopology, SubsystemSet};
use crate::linalg::{self, Mat};
use crate::lti::StateSpace;

/// Geometry, material and boundary data of a planar beam. DOFs are ordered
/// `(w₀, θ₀, w₁, θ₁, …)` from the left node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamConfig {
    pub length: f64,
    pub youngs_modulus: f64,
    pub density: f64,
    pub cross_section_area: f64,
    pub second_moment_area: f64,
    pub n_elements: usize,
    pub fixed_dofs: Vec<usize>,
    /// Collocated force input / velocity output channels.
    pub io_dofs: Vec<usize>,
}

impl BeamConfig {
    pub fn total_dofs(&self) -> usize {
        2 * (self.n_elements + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
            ("cross_section_area", self.cross_section_area),
            ("second_moment_area", self.second_moment_area),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.n_elements == 0 {
            return Err(Error::InvalidArgument(
                "at least one element required".into(),
            ));
        }
        let nd = self.total_dofs();
        for &d in self.fixed_dofs.iter().chain(&self.io_dofs) {
            if d >= nd {
                return Err(Error::InvalidArgument(format!(
                    "DOF {d} out of range (beam has {nd})"
                )));
            }
        }
        if let Some(d) = self.io_dofs.iter().find(|d| self.fixed_dofs.contains(d)) {
            return Err(Error::InvalidArgument(format!(
                "DOF {d} is both fixed and an I/O channel"
            )));
        }
        Ok(())
    }

    /// Steel beam of the benchmark: 1 m, square 1 cm² section, five elements.
    pub fn steel(fixed_dofs: Vec<usize>, io_dofs: Vec<usize>) -> Self {
        let area: f64 = 1e-4;
        let side = area.sqrt();
        Self {
            length: 1.0,
            youngs_modulus: 2e11,
            density: 8e3,
            cross_section_area: area,
            second_moment_area: side.powi(4) / 12.0,
            n_elements: 5,
            fixed_dofs,
            io_dofs,
        }
    }
}

/// Mass, damping and stiffness with a force input map `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderModel {
    pub m: Mat,
    pub dd: Mat,
    pub k: Mat,
    pub f: Mat,
}

/// Bending element on DOFs `(w₁, θ₁, w₂, θ₂)`: stiffness and consistent mass.
pub fn beam_element(e: f64, i: f64, rho: f64, area: f64, ell: f64) -> (Mat, Mat) {
    let l = ell;
    let l2 = l * l;
    let k = Mat::from_row_slice(
        4,
        4,
        &[
            12.0,
            6.0 * l,
            -12.0,
            6.0 * l, //
            6.0 * l,
            4.0 * l2,
            -6.0 * l,
            2.0 * l2, //
            -12.0,
            -6.0 * l,
            12.0,
            -6.0 * l, //
            6.0 * l,
            2.0 * l2,
            -6.0 * l,
            4.0 * l2,
        ],
    ) * (e * i / (l * l2));
    let m = Mat::from_row_slice(
        4,
        4,
        &[
            156.0,
            22.0 * l,
            54.0,
            -13.0 * l, //
            22.0 * l,
            4.0 * l2,
            13.0 * l,
            -3.0 * l2, //
            54.0,
            13.0 * l,
            156.0,
            -22.0 * l, //
            -13.0 * l,
            -3.0 * l2,
            -22.0 * l,
            4.0 * l2,
        ],
    ) * (rho * area * l / 420.0);
    (k, m)
}

/// Assembles `M`, `K`, removes the fixed DOFs and builds unit force maps on
/// the I/O DOFs. Damping is left at zero (see [`rayleigh`]).
pub fn assemble_beam(cfg: &BeamConfig) -> Result<SecondOrderModel> {
    cfg.validate()?;
    let nd = cfg.total_dofs();
    let ell = cfg.length / cfg.n_elements as f64;
    let (ke, me) = beam_element(
        cfg.youngs_modulus,
        cfg.second_moment_area,
        cfg.density,
        cfg.cross_section_area,
        ell,
    );
    let mut k = Mat::zeros(nd, nd);
    let mut m = Mat::zeros(nd, nd);
    for e in 0..cfg.n_elements {
        let o = 2 * e;
        let mut kv = k.view_mut((o, o), (4, 4));
        kv += &ke;
        let mut mv = m.view_mut((o, o), (4, 4));
        mv += &me;
    }
    let free: Vec<usize> = (0..nd).filter(|d| !cfg.fixed_dofs.contains(d)).collect();
    if free.is_empty() {
        return Err(Error::InvalidArgument("all DOFs are fixed".into()));
    }
    let nf = free.len();
    let k = Mat::from_fn(nf, nf, |i, j| k[(free[i], free[j])]);
    let m = Mat::from_fn(nf, nf, |i, j| m[(free[i], free[j])]);
    let mut f = Mat::zeros(nf, cfg.io_dofs.len());
    for (c, d) in cfg.io_dofs.iter().enumerate() {
        let row = free.iter().position(|x| x == d).expect("I/O DOFs are free");
        f[(row, c)] = 1.0;
    }
    Ok(SecondOrderModel {
        dd: Mat::zeros(nf, nf),
        m,
        k,
        f,
    })
}

/// `αM + βK`.
pub fn rayleigh(m: &Mat, k: &Mat, alpha: f64, beta: f64) -> Mat {
    m * alpha + k * beta
}

/// Undamped eigenpairs `(ωₖ, φₖ)` of `Kφ = ω²Mφ`, ascending, with
/// `φᵀMφ = 1`.
pub fn undamped_modes(m: &Mat, k: &Mat) -> Result<(Vec<f64>, Mat)> {
    let l = linalg::symmetrize(m)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            what: "mass matrix",
            lambda_min: linalg::lambda_min(m),
            lambda_max: linalg::lambda_max(m),
        })?
        .l();
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("mass factor".into()))?;
    let (vals, vecs) = linalg::sym_eig(&linalg::symmetrize(&(&li * k * li.transpose())));
    let omegas = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok((omegas, li.transpose() * vecs))
}

/// First-order form with `x = [q; q̇]`:
/// `A = [0, I; −M⁻¹K, −M⁻¹D]`, `B = [0; M⁻¹F]`, `C = [0, Fᵀ]`, `D = 0`.
pub fn to_statespace(model: &SecondOrderModel) -> Result<StateSpace> {
    let nq = model.m.nrows();
    let q = model.f.ncols();
    let m_inv = linalg::spd_inverse(&model.m).ok_or(Error::NotPositiveDefinite {
        what: "mass matrix",
        lambda_min: linalg::lambda_min(&model.m),
        lambda_max: linalg::lambda_max(&model.m),
    })?;
    let z = Mat::zeros(nq, nq);
    let a = linalg::vstack(&[
        &linalg::hstack(&[&z, &Mat::identity(nq, nq)]),
        &linalg::hstack(&[&(-(&m_inv * &model.k)), &(-(&m_inv * &model.dd))]),
    ]);
    let b = linalg::vstack(&[&Mat::zeros(nq, q), &(&m_inv * &model.f)]);
    let c = linalg::hstack(&[&Mat::zeros(q, nq), &model.f.transpose()]);
    StateSpace::new(a, b, c, Mat::zeros(q, q))
}

/// Rayleigh coefficients giving `ξₖ = ½(1/ωₖ + 5·10⁻⁶ ωₖ)`.
pub const RAYLEIGH_ALPHA: f64 = 1.0;
pub const RAYLEIGH_BETA: f64 = 5e-6;
pub const TRANSLATIONAL_DAMPER: f64 = 50.0;
pub const ROTATIONAL_DAMPER: f64 = 3.0;

/// Cantilever clamped at the left node; channels `(w, θ)` at the free end.
pub fn benchmark_beam1() -> BeamConfig {
    BeamConfig::steel(vec![0, 1], vec![10, 11])
}

/// Transversal DOFs of nodes 2 and 4 (1-based from the left) fixed; channels
/// `(w, θ)` at the left end and `w` at the right end.
pub fn benchmark_beam2() -> BeamConfig {
    BeamConfig::steel(vec![2, 6], vec![0, 1, 10])
}

/// Damped first-order model of a beam configuration.
pub fn beam_statespace(cfg: &BeamConfig, alpha: f64, beta: f64) -> Result<StateSpace> {
    let mut model = assemble_beam(cfg)?;
    model.dd = rayleigh(&model.m, &model.k, alpha, beta);
    to_statespace(&model)
}

/// The two beams joined by a translational and a rotational damper between
/// the free end of beam 1 and the left end of beam 2, driven and observed at
/// the right end of beam 2.
///
/// Coupling channels: `(beam1 w, beam1 θ, beam2 w_left, beam2 θ_left,
/// beam2 w_right)`.
pub fn build_benchmark() -> Result<(SubsystemSet, InterconnectionTopology)> {
    let s1 = beam_statespace(&benchmark_beam1(), RAYLEIGH_ALPHA, RAYLEIGH_BETA)?;
    let s2 = beam_statespace(&benchmark_beam2(), RAYLEIGH_ALPHA, RAYLEIGH_BETA)?;
    let set = SubsystemSet::new(vec![s1, s2])?;
    let mut s = Mat::zeros(5, 5);
    for (i, j, d) in [(0, 2, TRANSLATIONAL_DAMPER), (1, 3, ROTATIONAL_DAMPER)] {
        s[(i, i)] = d;
        s[(j, j)] = d;
        s[(i, j)] = -d;
        s[(j, i)] = -d;
    }
    let mut bcal = Mat::zeros(5, 1);
    bcal[(4, 0)] = 1.0;
    Ok((set, InterconnectionTopology::new(s, bcal)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn element_properties() {
        let ell = 0.2;
        let (k, m) = beam_element(2e11, 1e-4f64.powi(2) / 12.0, 8e3, 1e-4, ell);
        assert_eq!(k, k.transpose());
        assert_eq!(m, m.transpose());
        assert!(linalg::lambda_min(&m) > 0.0);
        let translation = Mat::from_column_slice(4, 1, &[1.0, 0.0, 1.0, 0.0]);
        let rotation = Mat::from_column_slice(4, 1, &[-ell / 2.0, 1.0, ell / 2.0, 1.0]);
        assert!((&k * &translation).amax() < 1e-9 * k.amax());
        assert!((&k * &rotation).amax() < 1e-9 * k.amax());
        assert_eq!(linalg::rank(&k, 1e-9 * k.amax()), 2);
        let total = (translation.transpose() * &m * &translation)[(0, 0)];
        assert_relative_eq!(total, 8e3 * 1e-4 * ell, max_relative = 1e-14);
    }

    #[test]
    fn benchmark_beams_have_order_twenty() {
        for cfg in [benchmark_beam1(), benchmark_beam2()] {
            let model = assemble_beam(&cfg).unwrap();
            assert_eq!(model.m.nrows(), 10);
            assert!(linalg::lambda_min(&model.k) > 0.0);
            let sys = to_statespace(&model).unwrap();
            assert_eq!(sys.order(), 20);
        }
    }

    #[test]
    fn cantilever_first_frequency() {
        let cfg = benchmark_beam1();
        let model = assemble_beam(&cfg).unwrap();
        let (w, _) = undamped_modes(&model.m, &model.k).unwrap();
        let analytic = 1.875104f64.powi(2) / (2.0 * std::f64::consts::PI)
            * (cfg.youngs_modulus * cfg.second_moment_area
                / (cfg.density * cfg.cross_section_area * cfg.length.powi(4)))
            .sqrt();
        let f1 = w[0] / (2.0 * std::f64::consts::PI);
        assert!(
            (f1 - analytic).abs() / analytic < 2e-3,
            "f1 = {f1}, analytic = {analytic}"
        );
    }

    #[test]
    fn mesh_refinement_converges() {
        let coarse = benchmark_beam1();
        let mut fine = coarse.clone();
        fine.n_elements *= 2;
        fine.io_dofs = vec![2 * fine.n_elements, 2 * fine.n_elements + 1];
        let mc = assemble_beam(&coarse).unwrap();
        let wc = undamped_modes(&mc.m, &mc.k).unwrap().0;
        let mf = assemble_beam(&fine).unwrap();
        let wf = undamped_modes(&mf.m, &mf.k).unwrap().0;
        for k in 0..3 {
            assert!(
                (wc[k] - wf[k]).abs() / wf[k] < 1e-2,
                "mode {k}: {} vs {}",
                wc[k],
                wf[k]
            );
        }
    }

    #[test]
    fn rayleigh_modal_damping() {
        let model = assemble_beam(&benchmark_beam2()).unwrap();
        let dd = rayleigh(&model.m, &model.k, RAYLEIGH_ALPHA, RAYLEIGH_BETA);
        let (w, phi) = undamped_modes(&model.m, &model.k).unwrap();
        for (k, &wk) in w.iter().enumerate() {
            let p = phi.column(k);
            let ratio = (p.transpose() * &dd * p)[(0, 0)]
                / (2.0 * wk * (p.transpose() * &model.m * p)[(0, 0)]);
            assert_relative_eq!(ratio, 0.5 * (1.0 / wk + 5e-6 * wk), max_relative = 1e-10);
        }
        assert_eq!(rayleigh(&model.m, &model.k, 0.0, 0.0), Mat::zeros(10, 10));
    }

    #[test]
    fn unit_oscillator() {
        let one = Mat::from_element(1, 1, 1.0);
        let sys = to_statespace(&SecondOrderModel {
            m: one.clone(),
            dd: one.clone(),
            k: one.clone(),
            f: one,
        })
        .unwrap();
        assert_eq!(sys.a(), &Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]));
        assert_eq!(sys.b(), &Mat::from_row_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(sys.c(), &Mat::from_row_slice(1, 2, &[0.0, 1.0]));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = benchmark_beam1();
        cfg.io_dofs = vec![0];
        assert!(assemble_beam(&cfg).is_err());
        let mut cfg = benchmark_beam1();
        cfg.density = 0.0;
        assert!(assemble_beam(&cfg).is_err());
        let mut cfg = benchmark_beam1();
        cfg.fixed_dofs = (0..12).collect();
        cfg.io_dofs.clear();
        assert!(assemble_beam(&cfg).is_err());
    }

    #[test]
    fn benchmark_topology() {
        let (set, topo) = build_benchmark().unwrap();
        assert_eq!(set.total_order(), 40);
        assert_eq!(set.total_channels(), 5);
        let mut ev: Vec<f64> = linalg::sym_eigvals(topo.s()).iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(ev[0], 100.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 6.0, epsilon = 1e-12);
        assert!(ev[2..].iter().all(|e| e.abs() < 1e-12));
    }
}
