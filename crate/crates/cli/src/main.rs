//! `structmor`: reduce, analyze and couple LTI models, and run the two-beam
//! benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use structmor::balancing::{self, Method, MgVariant};
use structmor::bench::{self, BenchmarkOptions, BenchmarkReport};
use structmor::interconnection::{self as ic, InterconnectionTopology, SubsystemSet, TopologyJson};
use structmor::metrics::{self, LinfOptions, NormReport};
use structmor::report::sig6;
use structmor::{beam, passivity, Error, StateSpace};

#[derive(Parser, Debug)]
#[command(
    name = "structmor",
    version,
    about = "Passivity-preserving balanced truncation for interconnected LTI systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reduce one model, or a set of subsystems coupled through a topology.
    Reduce(ReduceArgs),
    /// H2 and L-infinity norms of the error system G - Ghat.
    Analyze(AnalyzeArgs),
    /// Couple the subsystems listed in a topology file into one model.
    Couple(CoupleArgs),
    /// Run the two-beam benchmark (MGBT, ISBT, PIBT) and write the report.
    BenchBeam(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Lyapbt,
    Prbt,
    Mgbt,
    Isbt,
    Pibt,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lyapbt => Method::LyapBT,
            MethodArg::Prbt => Method::PRBT,
            MethodArg::Mgbt => Method::MGBT,
            MethodArg::Isbt => Method::ISBT,
            MethodArg::Pibt => Method::PIBT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MgArg {
    PXi,
    PiQ,
}

#[derive(Args, Debug, Clone)]
struct NormArgs {
    /// Lower end of the L-infinity frequency grid [Hz].
    #[arg(long, default_value_t = LinfOptions::default().f_min_hz)]
    f_min: f64,
    /// Upper end of the L-infinity frequency grid [Hz].
    #[arg(long, default_value_t = LinfOptions::default().f_max_hz)]
    f_max: f64,
    /// Number of log-spaced grid points.
    #[arg(long, default_value_t = LinfOptions::default().points)]
    grid_points: usize,
}

impl NormArgs {
    fn options(&self) -> Result<LinfOptions, Error> {
        if !(self.f_min > 0.0 && self.f_max > self.f_min) || self.grid_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "frequency grid [{}, {}] Hz with {} points",
                self.f_min, self.f_max, self.grid_points
            )));
        }
        Ok(LinfOptions {
            f_min_hz: self.f_min,
            f_max_hz: self.f_max,
            points: self.grid_points,
            ..LinfOptions::default()
        })
    }
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Reduced order of a single model.
    #[arg(long, conflicts_with = "orders")]
    order: Option<usize>,
    /// Reduced orders, one per subsystem (comma separated).
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Topology JSON; its subsystem list is used unless models are given.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Gramian pair for single-model MGBT.
    #[arg(long, value_enum, default_value = "p-xi")]
    mg_variant: MgArg,
    #[arg(short, long, default_value = "structmor-out")]
    out: PathBuf,
    /// Recorded in the output metadata; the reduction itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON files.
    models: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Full model.
    full: PathBuf,
    /// Reduced model.
    reduced: PathBuf,
    #[command(flatten)]
    norms: NormArgs,
    /// Also write `norms.json` here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoupleArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Output model JSON.
    #[arg(short, long, default_value = "coupled.json")]
    out: PathBuf,
    /// Subsystem model files overriding the topology's list.
    models: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "12,12")]
    orders: Vec<usize>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "mgbt,isbt,pibt"
    )]
    methods: Vec<MethodArg>,
    #[arg(short, long, default_value = "bench-out")]
    out: PathBuf,
    #[command(flatten)]
    norms: NormArgs,
    /// Skip the SVG figures.
    #[arg(long)]
    no_plots: bool,
    /// Also write the beam models and topology JSON to `<out>/models`.
    #[arg(long)]
    export_models: bool,
    /// Only logged: the benchmark has no random inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Failure {
    code: u8,
    err: Error,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err.root() {
            Error::Io(_) | Error::Format(_) => 1,
            _ => 2,
        };
        Failure { code, err }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e.root() {
        Error::Dimension(_) => "dimension",
        Error::NonFinite(_) => "non_finite",
        Error::NotSquare { .. } => "not_square",
        Error::NotMinimal { .. } => "not_minimal",
        Error::NotHurwitz { .. } => "not_hurwitz",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::NotPassive { .. } => "not_passive",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Numerical(_) => "numerical",
        Error::Subsystem { .. } => "subsystem",
        Error::Io(_) => "io",
        Error::Format(_) => "format",
    }
}

fn subsystem_index(e: &Error) -> Option<usize> {
    match e {
        Error::Subsystem { index, .. } => Some(*index),
        _ => None,
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<StateSpace, Error> {
    // A model file that does not describe a valid system is an input error.
    StateSpace::from_json_str(&read_text(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path) -> Result<(TopologyJson, InterconnectionTopology), Error> {
    let tj: TopologyJson = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let topo = tj.topology()?;
    Ok((tj, topo))
}

fn load_set(topology: &Path, tj: &TopologyJson, models: &[PathBuf]) -> Result<SubsystemSet, Error> {
    let paths = if models.is_empty() {
        tj.subsystem_paths(topology)
    } else {
        models.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no subsystem models given".into()));
    }
    SubsystemSet::new(
        paths
            .iter()
            .map(|p| load_model(p))
            .collect::<Result<_, _>>()?,
    )
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

/// Writes every file or none: outputs are staged in memory before the
/// directory is touched.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn gamma_line(label: &str, g: &[f64]) -> String {
    let parts: Vec<String> = g.iter().map(|x| sig6(*x)).collect();
    format!("{label} [{}]", parts.join(", "))
}

fn cmd_reduce(a: &ReduceArgs) -> Result<(), Failure> {
    let method = Method::from(a.method);
    let mut files = Vec::new();
    let mut lines = Vec::new();
    match &a.topology {
        None => {
            let [model] = a.models.as_slice() else {
                return Err(Error::InvalidArgument(
                    "reduce without --topology takes exactly one model".into(),
                )
                .into());
            };
            let r = match (a.order, &a.orders) {
                (Some(r), _) => r,
                (None, Some(v)) if v.len() == 1 => v[0],
                _ => {
                    return Err(Error::InvalidArgument(
                        "--order is required for a single model".into(),
                    )
                    .into())
                }
            };
            let sys = load_model(model)?;
            let res = match method {
                Method::LyapBT => balancing::reduce_lyap_bt(&sys, r)?,
                Method::PRBT => balancing::reduce_pr_bt(&sys, r)?,
                Method::MGBT => {
                    let v = match a.mg_variant {
                        MgArg::PXi => MgVariant::PXi,
                        MgArg::PiQ => MgVariant::PiQ,
                    };
                    balancing::reduce_mg_bt(&sys, r, v)?
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "{other} needs --topology and --orders"
                    ))
                    .into());
                }
            };
            let mut meta = res.to_json_value();
            meta["seed"] = json!(a.seed);
            files.push(("reduced.json".to_string(), pretty(&meta)));
            lines.push(format!("method {method}"));
            lines.push(format!("order {} -> {}", sys.order(), res.kept_order));
            lines.push(gamma_line("gamma", &res.gamma));
            lines.push(gamma_line("discarded", &res.discarded_gamma));
            let tail: f64 = res.discarded_gamma.iter().sum();
            lines.push(format!("gamma tail sum {}", sig6(tail)));
            if matches!(method, Method::PRBT | Method::MGBT) {
                let cert = passivity::is_passive(&res.reduced)?;
                lines.push(format!("passive {}", cert.feasible));
                files.push((
                    "certificate.json".to_string(),
                    pretty(&cert.to_json_value(&res.reduced)),
                ));
            }
        }
        Some(tpath) => {
            let (tj, topo) = load_topology(tpath)?;
            let set = load_set(tpath, &tj, &a.models)?;
            let orders = match (&a.orders, a.order) {
                (Some(v), _) => v.clone(),
                (None, Some(r)) if set.len() == 1 => vec![r],
                (None, _) if !tj.orders.is_empty() => tj.orders.clone(),
                _ => return Err(Error::InvalidArgument("--orders is required".into()).into()),
            };
            let red = ic::reduce_interconnected(method, &set, &topo, &orders)?;
            let mut names = Vec::new();
            for (j, r) in red.reduced.iter().enumerate() {
                let name = format!("subsystem_{}.json", j + 1);
                files.push((name.clone(), pretty(&r.to_json_value())));
                names.push(name);
                lines.push(gamma_line(&format!("gamma[{}]", j + 1), &r.gamma));
            }
            files.push((
                "coupled.json".to_string(),
                pretty(&red.coupled.to_json_value()),
            ));
            let reduced_topo = TopologyJson::from_topology(&topo, names, orders.clone());
            files.push((
                "topology.json".to_string(),
                pretty(&serde_json::to_value(reduced_topo).expect("topology serializes")),
            ));
            let certs = if red.certificates.is_empty() {
                let mut c = Vec::new();
                for r in &red.reduced {
                    c.push(passivity::is_passive(&r.reduced)?);
                }
                c.push(passivity::is_passive(&red.coupled)?);
                c
            } else {
                red.certificates.clone()
            };
            let systems: Vec<&StateSpace> = red
                .reduced
                .iter()
                .map(|r| &r.reduced)
                .chain([&red.coupled])
                .collect();
            let cert_json: Vec<Value> = certs
                .iter()
                .zip(&systems)
                .map(|(c, s)| c.to_json_value(s))
                .collect();
            files.push((
                "certificates.json".to_string(),
                pretty(
                    &json!({"method": method.name(), "seed": a.seed, "certificates": cert_json}),
                ),
            ));
            lines.insert(0, format!("method {method}"));
            lines.insert(1, format!("orders {:?} -> {:?}", set.orders(), orders));
            lines.push(format!("coupled order {}", red.coupled.order()));
            lines.push(format!("stable {}", red.coupled.is_stable()));
            for (j, c) in certs.iter().enumerate() {
                let label = if j + 1 == certs.len() {
                    "coupled".to_string()
                } else {
                    format!("subsystem {}", j + 1)
                };
                lines.push(format!(
                    "passive {label} {} (residual {})",
                    c.feasible,
                    sig6(c.max_eig_residual)
                ));
            }
        }
    }
    write_all(&a.out, &files)?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn print_norms(n: &NormReport) {
    println!("h2 {}", sig6(n.h2));
    println!("linf {}", sig6(n.linf));
    if let Some(w) = n.linf_omega {
        println!("linf_hz {}", sig6(w / (2.0 * std::f64::consts::PI)));
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let opts = a.norms.options()?;
    let g = load_model(&a.full)?;
    let ghat = load_model(&a.reduced)?;
    let n = metrics::error_norms(&g, &ghat, &opts)?;
    if let Some(dir) = &a.out {
        write_all(
            dir,
            &[("norms.json".to_string(), pretty(&n.to_json_value()))],
        )?;
    }
    print_norms(&n);
    Ok(())
}

fn cmd_couple(a: &CoupleArgs) -> Result<(), Failure> {
    let (tj, topo) = load_topology(&a.topology)?;
    let set = load_set(&a.topology, &tj, &a.models)?;
    let sc = ic::couple(&ic::parallel_compose(&set), &topo)?;
    let text = pretty(&sc.to_json_value());
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(&a.out, text).map_err(|e| Error::Io(format!("{}: {e}", a.out.display())))?;
    println!("coupled order {}", sc.order());
    println!("inputs {} outputs {}", sc.inputs(), sc.outputs());
    println!("stable {}", sc.is_stable());
    Ok(())
}

fn verdict(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn print_table(rep: &BenchmarkReport) {
    println!(
        "{:<6} {:>12} {:>12} {:>8} {:>8}",
        "method", "H2", "Linf", "stable", "passive"
    );
    for r in &rep.methods {
        println!(
            "{:<6} {:>12} {:>12} {:>8} {:>8}",
            r.method.name(),
            sig6(r.error.h2),
            sig6(r.error.linf),
            verdict(r.stable),
            verdict(r.passive)
        );
    }
    for f in &rep.failures {
        println!("{:<6} failed: {}", f.method.name(), f.message);
    }
    println!(
        "full model: order {}, H2 {}, Linf {}",
        rep.fom.order,
        sig6(rep.fom.norms.h2),
        sig6(rep.fom.norms.linf)
    );
    for flag in &rep.checks.flags {
        println!("note: {flag}");
    }
    if !rep.checks.flags.is_empty() {
        println!("assumptions:");
        for a in bench::ASSUMPTIONS {
            println!("  - {a}");
        }
    }
}

fn export_models(dir: &Path) -> Result<(), Error> {
    let (set, topo) = beam::build_benchmark()?;
    let names = vec!["beam1.json".to_string(), "beam2.json".to_string()];
    let mut files: Vec<(String, String)> = names
        .iter()
        .zip(set.subsystems())
        .map(|(n, s)| (n.clone(), pretty(&s.to_json_value())))
        .collect();
    let tj = TopologyJson::from_topology(&topo, names, set.orders());
    files.push((
        "topology.json".to_string(),
        pretty(&serde_json::to_value(tj).expect("topology serializes")),
    ));
    write_all(&dir.join("models"), &files)
}

fn cmd_bench(a: &BenchArgs) -> Result<(), Failure> {
    let opts = BenchmarkOptions {
        orders: a.orders.clone(),
        methods: a.methods.iter().map(|&m| Method::from(m)).collect(),
        linf: a.norms.options()?,
        ..BenchmarkOptions::default()
    };
    if opts.orders.iter().any(|&r| r == 0) {
        return Err(Error::InvalidArgument("orders must be positive".into()).into());
    }
    let rep = bench::run_benchmark(&opts)?;
    rep.write(&a.out, !a.no_plots)?;
    if a.export_models {
        export_models(&a.out)?;
    }
    log::info!(
        "seed {} (unused: the benchmark has no random inputs)",
        a.seed
    );
    print_table(&rep);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STRUCTMOR_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Couple(a) => cmd_couple(a),
        Command::BenchBeam(a) => cmd_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, err }) => {
            let mut v = json!({
                "error": error_kind(&err),
                "message": err.to_string(),
                "exit_code": code,
            });
            if let Some(j) = subsystem_index(&err) {
                v["subsystem"] = json!(j);
            }
            eprintln!("{v}");
            ExitCode::from(code)
        }
    }
}
