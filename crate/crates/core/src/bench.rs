//! The two-beam benchmark: reduce with MGBT, ISBT and PIBT, compare against
//! the full coupled model, and write the report files.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::balancing::Method;
use crate::beam;
use crate::error::{Error, Result};
use crate::interconnection::{self as ic, InterconnectionTopology, SubsystemSet};
use crate::lti::StateSpace;
use crate::metrics::{self, LinfOptions, NormReport};
use crate::passivity;
use crate::report::{full, json_f64};

/// Reference values reported for the benchmark at orders (12, 12):
/// `(method, H₂, L∞)`.
pub const REFERENCE_NORMS: [(Method, f64, f64); 3] = [
    (Method::MGBT, 1.13, 0.381),
    (Method::ISBT, f64::INFINITY, 1.48),
    (Method::PIBT, 0.463, 0.0950),
];

pub const REFERENCE_ORDERS: [usize; 2] = [12, 12];
pub const PIBT_LINF_BAND: (f64, f64) = (0.03, 0.3);
pub const PIBT_H2_BAND: (f64, f64) = (0.15, 1.5);
pub const MIN_MGBT_PIBT_LINF_RATIO: f64 = 2.0;

/// Modelling choices that the benchmark description leaves open.
pub const ASSUMPTIONS: [&str; 6] = [
    "square cross-section: I = A^2/12",
    "consistent mass matrices, pure bending elements (no axial DOFs)",
    "beam 2 supports on the transversal DOFs of nodes 2 and 4 (1-based from the left)",
    "coupling channels (beam1 w, beam1 theta, beam2 w_left, beam2 theta_left, beam2 w_right) with unit collocated force/velocity maps",
    "Rayleigh damping alpha = 1 1/s, beta = 5e-6 s on each beam",
    "error norms sampled on 1 Hz to 100 kHz with peak refinement",
];

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub orders: Vec<usize>,
    pub methods: Vec<Method>,
    pub linf: LinfOptions,
    pub frf_f_min_hz: f64,
    pub frf_f_max_hz: f64,
    pub frf_points: usize,
    pub step_dt: f64,
    pub step_t_end: f64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            orders: vec![12, 12],
            methods: vec![Method::MGBT, Method::ISBT, Method::PIBT],
            linf: LinfOptions::default(),
            frf_f_min_hz: 1.0,
            frf_f_max_hz: 1e4,
            frf_points: 500,
            step_dt: 5e-5,
            step_t_end: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrfPoint {
    pub hz: f64,
    pub mag: f64,
    /// Degrees.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl StepTrace {
    pub fn peak(&self) -> f64 {
        self.y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// First time at which `|y|` exceeds `level` (non-finite samples count).
    pub fn first_exceedance(&self, level: f64) -> Option<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .find(|(_, y)| !(y.abs() <= level))
            .map(|(t, _)| *t)
    }
}

/// Results for the full coupled model.
#[derive(Debug, Clone)]
pub struct FullOrderReport {
    pub order: usize,
    pub subsystem_orders: Vec<usize>,
    pub spectral_abscissa: f64,
    pub stable: bool,
    /// Subsystem certificates followed by the coupled one.
    pub passive: Vec<bool>,
    pub norms: NormReport,
    pub frf: Vec<FrfPoint>,
    pub step: StepTrace,
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: Method,
    pub rom: StateSpace,
    pub subsystem_orders: Vec<usize>,
    pub spectral_abscissa: f64,
    pub stable: bool,
    pub passive: bool,
    pub passivity_residual: f64,
    pub subsystems_passive: Vec<bool>,
    pub error: NormReport,
    /// FRF of the reduced coupled model.
    pub frf: Vec<FrfPoint>,
    pub step: StepTrace,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MethodFailure {
    pub method: Method,
    pub message: String,
}

/// Pass/fail of the comparisons against the reference findings.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkChecks {
    pub verdicts_match: Option<bool>,
    pub isbt_h2_infinite: Option<bool>,
    pub pibt_beats_mgbt: Option<bool>,
    pub isbt_step_diverges_early: Option<bool>,
    pub pibt_linf_in_band: Option<bool>,
    pub pibt_h2_in_band: Option<bool>,
    pub mgbt_pibt_linf_ratio: Option<f64>,
    pub ratio_in_band: Option<bool>,
    /// Explanations for every band check that failed.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub orders: Vec<usize>,
    pub fom: FullOrderReport,
    pub methods: Vec<MethodReport>,
    pub failures: Vec<MethodFailure>,
    pub checks: BenchmarkChecks,
}

impl BenchmarkReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// `(hz, mag, phase)` of the `(0, 0)` transfer entry on a log grid.
pub fn frf_samples(sys: &StateSpace, f_min_hz: f64, f_max_hz: f64, points: usize) -> Vec<FrfPoint> {
    let n = points.max(2);
    let (a, b) = (f_min_hz.ln(), f_max_hz.ln());
    (0..n)
        .map(|i| {
            let hz = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
            let g = sys
                .eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * hz))
                .map_or(Complex64::new(f64::INFINITY, 0.0), |g| g[(0, 0)]);
            FrfPoint {
                hz,
                mag: g.norm(),
                phase: g.arg().to_degrees(),
            }
        })
        .collect()
}

fn step_trace(sys: &StateSpace, opts: &BenchmarkOptions) -> Result<StepTrace> {
    let r = sys.step_response(opts.step_dt, opts.step_t_end, 0)?;
    Ok(StepTrace {
        t: r.t,
        y: r.y.column(0).iter().copied().collect(),
    })
}

fn passive_verdict(sys: &StateSpace) -> (bool, f64) {
    match passivity::is_passive(sys) {
        Ok(c) => (c.feasible, c.max_eig_residual),
        Err(e) => {
            log::warn!("passivity check failed: {e}");
            (false, f64::NAN)
        }
    }
}

fn run_method(
    method: Method,
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    sc: &StateSpace,
    opts: &BenchmarkOptions,
) -> Result<MethodReport> {
    let red = ic::reduce_interconnected(method, set, topo, &opts.orders)?;
    let rom = red.coupled.clone();
    let (subsystems_passive, passive, passivity_residual) =
        if red.certificates.len() == set.len() + 1 {
            let c = red.coupled_certificate().expect("non-empty");
            (
                red.certificates[..set.len()]
                    .iter()
                    .map(|c| c.feasible)
                    .collect(),
                c.feasible,
                c.max_eig_residual,
            )
        } else {
            let subs = red
                .reduced
                .iter()
                .map(|r| passive_verdict(&r.reduced).0)
                .collect();
            let (p, res) = passive_verdict(&rom);
            (subs, p, res)
        };
    let error = metrics::error_norms(sc, &rom, &opts.linf)?;
    Ok(MethodReport {
        method,
        subsystem_orders: red.reduced.iter().map(|r| r.kept_order).collect(),
        spectral_abscissa: rom.spectral_abscissa(),
        stable: rom.is_stable(),
        passive,
        passivity_residual,
        subsystems_passive,
        error,
        frf: frf_samples(&rom, opts.frf_f_min_hz, opts.frf_f_max_hz, opts.frf_points),
        step: step_trace(&rom, opts)?,
        warnings: red.warnings.iter().map(|w| format!("{w:?}")).collect(),
        rom,
    })
}

fn within(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

/// The reference bands only apply at the reference orders.
fn evaluate(fom: &FullOrderReport, methods: &[MethodReport], orders: &[usize]) -> BenchmarkChecks {
    let get = |m: Method| methods.iter().find(|r| r.method == m);
    let (mg, is, pi) = (get(Method::MGBT), get(Method::ISBT), get(Method::PIBT));
    let mut flags = Vec::new();

    let verdicts_match = match (mg, is, pi) {
        (Some(mg), Some(is), Some(pi)) => {
            Some(mg.stable && mg.passive && !is.stable && !is.passive && pi.stable && pi.passive)
        }
        _ => None,
    };
    let isbt_h2_infinite = is.map(|r| r.error.h2 == f64::INFINITY);
    let pibt_beats_mgbt = match (mg, pi) {
        (Some(mg), Some(pi)) => Some(pi.error.h2 < mg.error.h2 && pi.error.linf < mg.error.linf),
        _ => None,
    };
    let fom_peak = fom.step.peak();
    let isbt_step_diverges_early = is.map(|r| {
        r.step
            .first_exceedance(10.0 * fom_peak)
            .is_some_and(|t| t < 0.05)
    });

    let reference = orders == REFERENCE_ORDERS;
    let pibt_linf_in_band = pi
        .filter(|_| reference)
        .map(|r| within(r.error.linf, PIBT_LINF_BAND));
    let pibt_h2_in_band = pi
        .filter(|_| reference)
        .map(|r| within(r.error.h2, PIBT_H2_BAND));
    let mgbt_pibt_linf_ratio = match (mg, pi) {
        (Some(mg), Some(pi)) => Some(mg.error.linf / pi.error.linf),
        _ => None,
    };
    let ratio_in_band = mgbt_pibt_linf_ratio
        .filter(|_| reference)
        .map(|r| r >= MIN_MGBT_PIBT_LINF_RATIO);
    let varied = "see \"assumptions\" for the modelling choices in effect";
    if pibt_linf_in_band == Some(false) {
        flags.push(format!(
            "PIBT L-infinity error outside [{}, {}]; {varied}",
            PIBT_LINF_BAND.0, PIBT_LINF_BAND.1
        ));
    }
    if pibt_h2_in_band == Some(false) {
        flags.push(format!(
            "PIBT H2 error outside [{}, {}]; {varied}",
            PIBT_H2_BAND.0, PIBT_H2_BAND.1
        ));
    }
    if ratio_in_band == Some(false) {
        flags.push(format!(
            "MGBT/PIBT L-infinity ratio below {MIN_MGBT_PIBT_LINF_RATIO}; {varied}"
        ));
    }
    BenchmarkChecks {
        verdicts_match,
        isbt_h2_infinite,
        pibt_beats_mgbt,
        isbt_step_diverges_early,
        pibt_linf_in_band,
        pibt_h2_in_band,
        mgbt_pibt_linf_ratio,
        ratio_in_band,
        flags,
    }
}

/// Runs the benchmark on an arbitrary subsystem set and topology.
pub fn run_on(
    set: &SubsystemSet,
    topo: &InterconnectionTopology,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    let sc = ic::couple(&ic::parallel_compose(set), topo)?;
    let mut passive: Vec<bool> = set
        .subsystems()
        .iter()
        .map(|s| passive_verdict(s).0)
        .collect();
    passive.push(passive_verdict(&sc).0);
    let fom = FullOrderReport {
        order: sc.order(),
        subsystem_orders: set.orders(),
        spectral_abscissa: sc.spectral_abscissa(),
        stable: sc.is_stable(),
        passive,
        norms: NormReport::of(&sc, &opts.linf),
        frf: frf_samples(&sc, opts.frf_f_min_hz, opts.frf_f_max_hz, opts.frf_points),
        step: step_trace(&sc, opts)?,
    };

    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for &m in &opts.methods {
        match run_method(m, set, topo, &sc, opts) {
            Ok(r) => methods.push(r),
            Err(e) => {
                log::warn!("{m} failed: {e}");
                failures.push(MethodFailure {
                    method: m,
                    message: e.to_string(),
                });
            }
        }
    }
    let checks = evaluate(&fom, &methods, &opts.orders);
    Ok(BenchmarkReport {
        orders: opts.orders.clone(),
        fom,
        methods,
        failures,
        checks,
    })
}

/// Builds the two-beam benchmark and runs it.
pub fn run_benchmark(opts: &BenchmarkOptions) -> Result<BenchmarkReport> {
    let (set, topo) = beam::build_benchmark()?;
    run_on(&set, &topo, opts)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn bool_text(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_frf(path: &Path, frf: &[FrfPoint]) -> Result<()> {
    write_csv(
        path,
        &["hz", "mag", "phase"],
        frf.iter().map(|p| [full(p.hz), full(p.mag), full(p.phase)]),
    )
}

fn write_step(path: &Path, step: &StepTrace) -> Result<()> {
    write_csv(
        path,
        &["t", "y"],
        step.t
            .iter()
            .zip(&step.y)
            .map(|(t, y)| [full(*t), full(*y)]),
    )
}

fn method_json(r: &MethodReport) -> Value {
    json!({
        "method": r.method.name(),
        "subsystem_orders": r.subsystem_orders,
        "order": r.rom.order(),
        "spectral_abscissa": json_f64(r.spectral_abscissa),
        "stable": r.stable,
        "passive": r.passive,
        "passivity_residual": json_f64(r.passivity_residual),
        "subsystems_passive": r.subsystems_passive,
        "error": r.error.to_json_value(),
        "step_peak": json_f64(r.step.peak()),
        "warnings": r.warnings,
    })
}

impl BenchmarkReport {
    pub fn to_json_value(&self) -> Value {
        let reference: Vec<Value> = REFERENCE_NORMS
            .iter()
            .map(|(m, h2, linf)| json!({"method": m.name(), "h2": json_f64(*h2), "linf": json_f64(*linf)}))
            .collect();
        json!({
            "orders": self.orders,
            "fom": {
                "order": self.fom.order,
                "subsystem_orders": self.fom.subsystem_orders,
                "spectral_abscissa": json_f64(self.fom.spectral_abscissa),
                "stable": self.fom.stable,
                "passive": self.fom.passive,
                "norms": self.fom.norms.to_json_value(),
                "step_peak": json_f64(self.fom.step.peak()),
            },
            "methods": self.methods.iter().map(method_json).collect::<Vec<_>>(),
            "failures": self.failures.iter().map(|f| json!({"method": f.method.name(), "error": f.message})).collect::<Vec<_>>(),
            "checks": self.checks,
            "reference": reference,
            "assumptions": ASSUMPTIONS,
        })
    }

    /// Writes `norms.csv`, `frf_<method>.csv`, `step_<method>.csv` (including
    /// `fom`), `summary.json`, and `frf.svg`, `step.svg` when `plots` is set.
    /// Returns the written paths.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut written = Vec::new();

        let norms = dir.join("norms.csv");
        write_csv(
            &norms,
            &["method", "h2", "linf", "stable", "passive"],
            self.methods.iter().map(|r| {
                [
                    r.method.name().to_lowercase(),
                    full(r.error.h2),
                    full(r.error.linf),
                    bool_text(r.stable).to_string(),
                    bool_text(r.passive).to_string(),
                ]
            }),
        )?;
        written.push(norms);

        let fom_frf = dir.join("frf_fom.csv");
        write_frf(&fom_frf, &self.fom.frf)?;
        written.push(fom_frf);
        let fom_step = dir.join("step_fom.csv");
        write_step(&fom_step, &self.fom.step)?;
        written.push(fom_step);
        for r in &self.methods {
            let name = r.method.name().to_lowercase();
            let f = dir.join(format!("frf_{name}.csv"));
            write_frf(&f, &r.frf)?;
            written.push(f);
            let s = dir.join(format!("step_{name}.csv"));
            write_step(&s, &r.step)?;
            written.push(s);
        }

        let summary = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&self.to_json_value()).expect("summary serializes");
        fs::write(&summary, text + "\n").map_err(|e| io_err(&summary, e))?;
        written.push(summary);

        if plots {
            let frf = dir.join("frf.svg");
            crate::plot::frf_plot(&frf, self)?;
            written.push(frf);
            let step = dir.join("step.svg");
            crate::plot::step_plot(&step, self)?;
            written.push(step);
        }
        Ok(written)
    }
}
