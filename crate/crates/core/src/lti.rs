//! Continuous-time LTI state-space models `ẋ = Ax + Bu, y = Cx + Du`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};

/// Dense real state-space quadruple `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

/// One point of a frequency response: `G(jω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferSample {
    pub omega: f64,
    pub g: CMat,
}

/// Sampled step response. `y` holds one row per time point and one column per
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub t: Vec<f64>,
    pub y: Mat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidationOptions {
    pub require_square: bool,
    pub require_minimal: bool,
    pub require_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub order: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub square: bool,
    pub stable: bool,
    /// Largest real part over the spectrum of `A` (−∞ for static systems).
    pub spectral_abscissa: f64,
    pub controllable_dim: usize,
    pub observable_dim: usize,
    pub minimal: bool,
}

impl ValidationReport {
    /// Requested properties that do not hold.
    pub fn violations(&self, opts: &ValidationOptions) -> Vec<&'static str> {
        let mut v = Vec::new();
        if opts.require_square && !self.square {
            v.push("square");
        }
        if opts.require_minimal && !self.minimal {
            v.push("minimal");
        }
        if opts.require_stable && !self.stable {
            v.push("stable");
        }
        v
    }
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {}x{}, must be square",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_rows(
        n: usize,
        p: usize,
        q: usize,
        a: &[f64],
        b: &[f64],
        c: &[f64],
        d: &[f64],
    ) -> Result<Self> {
        let chk = |len: usize, want: usize, name: &str| {
            if len == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!(
                    "{name} has {len} entries, expected {want}"
                )))
            }
        };
        chk(a.len(), n * n, "A")?;
        chk(b.len(), n * p, "B")?;
        chk(c.len(), q * n, "C")?;
        chk(d.len(), q * p, "D")?;
        Self::new(
            Mat::from_row_slice(n, n, a),
            Mat::from_row_slice(n, p, b),
            Mat::from_row_slice(q, n, c),
            Mat::from_row_slice(q, p, d),
        )
    }

    /// Static gain with no states.
    pub fn gain(d: Mat) -> Self {
        let (q, p) = d.shape();
        Self {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, p),
            c: Mat::zeros(q, 0),
            d,
        }
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn into_parts(self) -> (Mat, Mat, Mat, Mat) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn is_square(&self) -> bool {
        self.inputs() == self.outputs()
    }

    pub(crate) fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                inputs: self.inputs(),
                outputs: self.outputs(),
            })
        }
    }

    /// Largest real part of the eigenvalues of `A`.
    pub fn spectral_abscissa(&self) -> f64 {
        linalg::rightmost_eigenvalue(&self.a).map_or(f64::NEG_INFINITY, |e| e.re)
    }

    /// Asymptotic stability with the margin `Re λ < −1e−12·‖A‖`.
    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa() < -1e-12 * self.a.norm()
    }

    /// Errors with the offending eigenvalue when `A` is not Hurwitz.
    pub fn require_hurwitz(&self) -> Result<()> {
        match linalg::rightmost_eigenvalue(&self.a) {
            Some(e) if e.re >= -1e-12 * self.a.norm() => {
                Err(Error::NotHurwitz { re: e.re, im: e.im })
            }
            _ => Ok(()),
        }
    }

    pub fn validate(&self, opts: ValidationOptions) -> Result<ValidationReport> {
        if opts.require_square {
            self.require_square()?;
        }
        let n = self.order();
        let controllable_dim = controllable_dimension(&self.a, &self.b);
        let observable_dim = controllable_dimension(&self.a.transpose(), &self.c.transpose());
        Ok(ValidationReport {
            order: n,
            inputs: self.inputs(),
            outputs: self.outputs(),
            square: self.is_square(),
            stable: self.is_stable(),
            spectral_abscissa: self.spectral_abscissa(),
            controllable_dim,
            observable_dim,
            minimal: controllable_dim == n && observable_dim == n,
        })
    }

    pub(crate) fn require_minimal(&self) -> Result<()> {
        let r = self.validate(ValidationOptions::default())?;
        if r.minimal {
            Ok(())
        } else {
            Err(Error::NotMinimal {
                order: r.order,
                controllable: r.controllable_dim,
                observable: r.observable_dim,
            })
        }
    }

    /// `(TAT⁻¹, TB, CT⁻¹, D)`, rejecting `T` with condition number above 1e12.
    pub fn similarity_transform(&self, t: &Mat) -> Result<StateSpace> {
        self.similarity_transform_with_limit(t, 1e12)
    }

    pub fn similarity_transform_with_limit(
        &self,
        t: &Mat,
        max_condition: f64,
    ) -> Result<StateSpace> {
        let n = self.order();
        if t.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "transform is {:?}, expected {n}x{n}",
                t.shape()
            )));
        }
        let cond = linalg::cond2(t);
        if !(cond <= max_condition) {
            return Err(Error::IllConditioned {
                what: "similarity transform",
                condition: cond,
            });
        }
        let t_inv = linalg::inverse(t, "similarity transform")?;
        Ok(self.transform_with_inverse(t, &t_inv))
    }

    /// Applies a transform whose inverse is already known.
    pub fn transform_with_inverse(&self, t: &Mat, t_inv: &Mat) -> StateSpace {
        StateSpace {
            a: t * &self.a * t_inv,
            b: t * &self.b,
            c: &self.c * t_inv,
            d: self.d.clone(),
        }
    }

    /// `(Aᵀ, Cᵀ, Bᵀ, Dᵀ)`.
    pub fn dual(&self) -> Result<StateSpace> {
        self.require_square()?;
        Ok(self.transposed())
    }

    pub(crate) fn transposed(&self) -> StateSpace {
        StateSpace {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    /// Keeps the leading `r` states: `(A₁₁, B₁, C₁, D)`.
    pub fn leading_states(&self, r: usize) -> StateSpace {
        let p = self.inputs();
        let q = self.outputs();
        StateSpace {
            a: self.a.view((0, 0), (r, r)).into_owned(),
            b: self.b.view((0, 0), (r, p)).into_owned(),
            c: self.c.view((0, 0), (q, r)).into_owned(),
            d: self.d.clone(),
        }
    }

    /// `G(s) = C(sI − A)⁻¹B + D`; `None` when `sI − A` is singular.
    pub fn eval(&self, s: Complex64) -> Option<CMat> {
        let n = self.order();
        let d = linalg::to_complex(&self.d);
        if n == 0 {
            return Some(d);
        }
        let mut m = linalg::to_complex(&(-&self.a));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let x = linalg::complex_solve(m, &linalg::to_complex(&self.b))?;
        let g = linalg::to_complex(&self.c) * x + d;
        g.iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            .then_some(g)
    }

    /// Frequency response at the given angular frequencies. Each sample fails
    /// independently when `jω` is an eigenvalue of `A`.
    pub fn frequency_response(&self, omegas: &[f64]) -> Vec<Result<TransferSample>> {
        omegas
            .iter()
            .map(|&w| {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "frequency {w} must be finite and >= 0"
                    )));
                }
                self.eval(Complex64::new(0.0, w))
                    .map(|g| TransferSample { omega: w, g })
                    .ok_or(Error::IllConditioned {
                        what: "jωI − A",
                        condition: f64::INFINITY,
                    })
            })
            .collect()
    }

    /// Response to a unit step on `input_channel` from zero initial state,
    /// using the exact zero-order-hold discretisation.
    pub fn step_response(&self, dt: f64, t_end: f64, input_channel: usize) -> Result<StepResponse> {
        if !(dt > 0.0) || !(t_end > dt) {
            return Err(Error::InvalidArgument(format!(
                "need dt > 0 and t_end > dt (dt={dt}, t_end={t_end})"
            )));
        }
        if input_channel >= self.inputs() {
            return Err(Error::Dimension(format!(
                "input channel {input_channel} out of range ({} inputs)",
                self.inputs()
            )));
        }
        let n = self.order();
        let steps = (t_end / dt + 1e-9).floor() as usize;
        let mut aug = Mat::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.a);
        aug.view_mut((0, n), (n, 1))
            .copy_from(&self.b.column(input_channel));
        let phi_aug = (aug * dt).exp();
        let phi = phi_aug.view((0, 0), (n, n)).into_owned();
        let gamma = phi_aug.view((0, n), (n, 1)).into_owned();

        let q = self.outputs();
        let feed = self.d.column(input_channel).into_owned();
        let mut y = Mat::zeros(steps + 1, q);
        let mut t = Vec::with_capacity(steps + 1);
        let mut x = DVector::<f64>::zeros(n);
        for k in 0..=steps {
            t.push(k as f64 * dt);
            let yk = &self.c * &x + &feed;
            y.set_row(k, &yk.transpose());
            x = &phi * &x + &gamma.column(0);
        }
        Ok(StepResponse { t, y })
    }
}

/// Dimension of the controllable subspace of `(A, B)` from the orthogonal
/// staircase reduction, with SVD rank decisions at tolerance
/// `10·n·ε·max(‖A‖, ‖B‖)`.
pub fn controllable_dimension(a: &Mat, b: &Mat) -> usize {
    let n = a.nrows();
    if n == 0 {
        return 0;
    }
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return 0;
    }
    // Round-off from the orthogonal updates accumulates over the steps, so
    // the rank threshold carries a factor of ten over n·ε·scale.
    let tol = 10.0 * n as f64 * f64::EPSILON * scale;
    let mut ak = a.clone();
    let mut bk = b.clone();
    let mut reached = 0;
    loop {
        let remaining = ak.nrows();
        if remaining == 0 || bk.ncols() == 0 {
            break;
        }
        let (u, s, _) = linalg::svd_sorted(&bk);
        let rho = s.iter().filter(|&&x| x > tol).count();
        if rho == 0 {
            break;
        }
        reached += rho;
        if rho >= remaining {
            break;
        }
        let full = complete_basis(&u.columns(0, rho).into_owned());
        let u1 = full.columns(0, rho).into_owned();
        let u2 = full.columns(rho, remaining - rho).into_owned();
        bk = u2.transpose() * &ak * &u1;
        ak = u2.transpose() * &ak * &u2;
    }
    reached
}

/// Extends orthonormal columns to a full orthonormal basis.
fn complete_basis(q1: &Mat) -> Mat {
    let comp = linalg::complement_basis(q1, 1e-12);
    linalg::hstack(&[q1, &comp])
}

/// JSON model format: `{"A": [[..]], "B": [[..]], "C": [[..]], "D": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[allow(non_snake_case)]
pub struct ModelJson {
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub C: Vec<Vec<f64>>,
    pub D: Vec<Vec<f64>>,
}

pub(crate) fn rows_to_mat(
    rows: &[Vec<f64>],
    nrows: Option<usize>,
    ncols: Option<usize>,
    name: &str,
) -> Result<Mat> {
    let r = nrows.unwrap_or(rows.len());
    let width = rows.first().map(Vec::len);
    let c = match (ncols, width) {
        (Some(c), _) => c,
        (None, Some(w)) => w,
        (None, None) => 0,
    };
    if rows.is_empty() {
        if r * c != 0 {
            return Err(Error::Format(format!("{name} is empty, expected {r}x{c}")));
        }
        return Ok(Mat::zeros(r, c));
    }
    if rows.len() != r {
        return Err(Error::Format(format!(
            "{name} has {} rows, expected {r}",
            rows.len()
        )));
    }
    let mut m = Mat::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Format(format!(
                "{name} row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("model JSON"));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub(crate) fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl TryFrom<&ModelJson> for StateSpace {
    type Error = Error;

    fn try_from(j: &ModelJson) -> Result<Self> {
        let d = rows_to_mat(&j.D, None, None, "D")?;
        let (q, p) = d.shape();
        let a = rows_to_mat(&j.A, None, None, "A")?;
        let n = a.nrows();
        let b = rows_to_mat(&j.B, Some(n), Some(p), "B")?;
        // An empty C is ambiguous for static systems: accept [] or [[], ...].
        let c = if n == 0 && j.C.iter().all(Vec::is_empty) {
            Mat::zeros(q, 0)
        } else {
            rows_to_mat(&j.C, Some(q), Some(n), "C")?
        };
        StateSpace::new(a, b, c, d)
    }
}

impl From<&StateSpace> for ModelJson {
    fn from(s: &StateSpace) -> Self {
        ModelJson {
            A: mat_to_rows(&s.a),
            B: mat_to_rows(&s.b),
            C: mat_to_rows(&s.c),
            D: mat_to_rows(&s.d),
        }
    }
}

impl StateSpace {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: ModelJson = serde_json::from_str(s)?;
        StateSpace::try_from(&j)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ModelJson::from(self)).expect("model serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn rejects_inconsistent_dimensions() {
        let e = StateSpace::new(
            Mat::zeros(2, 2),
            Mat::zeros(3, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
        );
        assert!(matches!(e, Err(Error::Dimension(_))));
        let e = StateSpace::new(
            Mat::zeros(2, 2),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
            Mat::zeros(2, 1),
        );
        assert!(matches!(e, Err(Error::Dimension(_))));
        let mut a = Mat::zeros(1, 1);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(
            StateSpace::new(a, Mat::zeros(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1)),
            Err(Error::NonFinite("A"))
        ));
    }

    #[test]
    fn validate_canonical_cases() {
        let opts = ValidationOptions {
            require_square: true,
            ..Default::default()
        };
        let r = first_order().validate(opts).unwrap();
        assert!(r.square && r.minimal && r.stable);

        let r = msd().validate(opts).unwrap();
        assert!(r.stable && r.minimal);
        assert_relative_eq!(r.spectral_abscissa, -0.5, epsilon = 1e-12);

        let decoupled = StateSpace::from_rows(
            2,
            1,
            1,
            &[-1.0, 0.0, 0.0, -2.0],
            &[1.0, 0.0],
            &[1.0, 0.0],
            &[0.0],
        )
        .unwrap();
        let r = decoupled.validate(opts).unwrap();
        assert!(!r.minimal);
        assert_eq!(r.controllable_dim, 1);
        assert_eq!(r.observable_dim, 1);
        assert_eq!(
            r.violations(&ValidationOptions {
                require_minimal: true,
                ..opts
            }),
            vec!["minimal"]
        );
    }

    #[test]
    fn validate_rejects_non_square_when_required() {
        let s = StateSpace::new(
            Mat::from_element(1, 1, -1.0),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        assert!(matches!(
            s.validate(ValidationOptions {
                require_square: true,
                ..Default::default()
            }),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn scalar_similarity() {
        let s = StateSpace::from_rows(1, 1, 1, &[-1.0], &[2.0], &[3.0], &[0.0]).unwrap();
        let t = s
            .similarity_transform(&Mat::from_element(1, 1, 2.0))
            .unwrap();
        assert_relative_eq!(t.a()[(0, 0)], -1.0);
        assert_relative_eq!(t.b()[(0, 0)], 4.0);
        assert_relative_eq!(t.c()[(0, 0)], 1.5);
        let same = s.similarity_transform(&Mat::identity(1, 1)).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn singular_transform_is_rejected() {
        let t = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match msd().similarity_transform(&t) {
            Err(Error::IllConditioned { condition, .. }) => assert!(condition > 1e12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn msd_transform_preserves_frf() {
        let s = msd();
        let t = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let st = s.similarity_transform(&t).unwrap();
        let w = [0.1, 1.0, 10.0];
        for (a, b) in s
            .frequency_response(&w)
            .into_iter()
            .zip(st.frequency_response(&w))
        {
            assert!((a.unwrap().g - b.unwrap().g).norm() < 1e-10);
        }
    }

    #[test]
    fn dual_examples() {
        let s = StateSpace::from_rows(1, 1, 1, &[-1.0], &[1.0], &[2.0], &[0.0]).unwrap();
        let d = s.dual().unwrap();
        assert_eq!(d.b()[(0, 0)], 2.0);
        assert_eq!(d.c()[(0, 0)], 1.0);
        assert_eq!(d.dual().unwrap(), s);
        let sym = StateSpace::from_rows(
            2,
            1,
            1,
            &[-2.0, 0.5, 0.5, -1.0],
            &[1.0, 2.0],
            &[1.0, 2.0],
            &[0.3],
        )
        .unwrap();
        assert_eq!(sym.dual().unwrap(), sym);
        let nonsq = StateSpace::new(
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        assert!(nonsq.dual().is_err());
    }

    #[test]
    fn frf_examples() {
        let s = first_order();
        let r = s.frequency_response(&[0.0, 1.0]);
        let g0 = r[0].as_ref().unwrap().g[(0, 0)];
        assert_relative_eq!(g0.re, 1.0, epsilon = 1e-15);
        let g1 = r[1].as_ref().unwrap().g[(0, 0)];
        assert_relative_eq!(g1.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(g1.im, -0.5, epsilon = 1e-15);
        assert_relative_eq!(g1.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);

        let g = msd().frequency_response(&[1.0])[0].as_ref().unwrap().g[(0, 0)];
        assert_relative_eq!(g.re, 1.0, epsilon = 1e-14);
        assert!(g.im.abs() < 1e-14);
    }

    #[test]
    fn frf_marks_poles_on_axis() {
        let integ = StateSpace::from_rows(1, 1, 1, &[0.0], &[1.0], &[1.0], &[0.0]).unwrap();
        let r = integ.frequency_response(&[0.0, 1.0]);
        assert!(r[0].is_err());
        assert!(r[1].is_ok());
    }

    #[test]
    fn step_examples() {
        let r = first_order().step_response(0.01, 2.0, 0).unwrap();
        assert_eq!(r.t.len(), 201);
        assert!((r.y[(100, 0)] - (1.0 - (-1.0f64).exp())).abs() < 1e-9);

        let gain = StateSpace::from_rows(1, 1, 1, &[-3.0], &[0.0], &[1.0], &[1.0]).unwrap();
        let r = gain.step_response(0.1, 1.0, 0).unwrap();
        assert!(r.y.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        assert!(first_order().step_response(0.0, 1.0, 0).is_err());
        assert!(first_order().step_response(0.1, 0.05, 0).is_err());
        assert!(first_order().step_response(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn msd_velocity_step_decays() {
        // settling time 4/(ζ ω_n) = 8 s; check at 5x that.
        let r = msd().step_response(0.05, 40.0, 0).unwrap();
        let last = r.y[(r.y.nrows() - 1, 0)];
        assert!(last.abs() < 1e-3);
        // Independent check: fine RK4 integration of the same ODE.
        let (a, b, c) = (msd().a().clone(), msd().b().clone(), msd().c().clone());
        let h = 0.005;
        let mut x = DVector::zeros(2);
        let f = |x: &DVector<f64>| &a * x + b.column(0);
        for k in 0..200 {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (h / 2.0)));
            let k3 = f(&(&x + &k2 * (h / 2.0)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if (k + 1) % 10 == 0 {
                let y = (&c * &x)[0];
                assert!((y - r.y[((k + 1) / 10, 0)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trip_and_static_models() {
        let s = msd();
        let v = s.to_json_value();
        let back = StateSpace::from_json_str(&v.to_string()).unwrap();
        assert_eq!(back, s);
        let g = StateSpace::from_json_str(r#"{"A":[],"B":[],"C":[],"D":[[2.0]]}"#).unwrap();
        assert_eq!(g.order(), 0);
        assert_eq!(g.inputs(), 1);
        assert!(
            StateSpace::from_json_str(r#"{"A":[[1,2]],"B":[[1]],"C":[[1]],"D":[[0]]}"#).is_err()
        );
    }
}
