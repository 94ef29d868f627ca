//! `nqs`: synthesize, audit and simulate state-feedback controllers for
//! uncertain nonlinear quadratic systems.
//!
//! Exit codes: 0 success, 1 infeasible, 2 audit or verification failure,
//! 3 input (I/O, schema, argument) error.

mod parse;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use nqs_core::io::{load_certificate, load_model, load_polytope, write_json, CertificateFile};
use nqs_core::lmi::{build_gl2pc_lmis, build_qgcc_lmis};
use nqs_core::synthesis::{synthesize_gl2pc, synthesize_qgcc, GammaLogEntry};
use nqs_core::verify::{audit_gl2pc, audit_qgcc, compute_jinf, simulate};
use nqs_core::{
    AuditConfig, Certificate, CertificateKind, Controller, Direction, Error, GammaSearchOptions, Gl2Spec,
    InputBounds, NqsModel, QgccSpec, Refine, SolverSettings, SynthesisOutcome, UncertaintySample,
    UncertaintySchedule, Vector, VerificationReport,
};

#[derive(Debug, Parser)]
#[command(name = "nqs", version, about = "LMI controller synthesis for uncertain nonlinear quadratic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Check a model file (and optionally a polytope file) against the schema.
    Validate(ValidateArgs),
    /// Guaranteed-cost synthesis over a grid of decay rates gamma.
    SynthQgcc(QgccArgs),
    /// L2-gain synthesis with reachable-set containment.
    SynthL2(L2Args),
    /// Re-audit a stored certificate by sampling and simulation.
    Audit(AuditArgs),
    /// Simulate the closed loop and write the trajectory as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    polytope: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: u32,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            max_iter: self.max_iter,
            backoff: None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SamplingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integration step of the simulations.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Simulation horizon in seconds.
    #[arg(long, default_value_t = 50.0)]
    horizon: f64,
    #[arg(long, default_value_t = 500)]
    state_samples: usize,
    #[arg(long, default_value_t = 20)]
    h_samples: usize,
    #[arg(long, default_value_t = 100)]
    disturbances: usize,
    /// Energy of each sampled disturbance (L2 audits only).
    #[arg(long, default_value_t = 1.0)]
    disturbance_energy: f64,
    /// Switch the sampled uncertainty every PERIOD seconds instead of holding it.
    #[arg(long, value_name = "PERIOD")]
    piecewise: Option<f64>,
}

impl SamplingArgs {
    fn config(&self) -> AuditConfig {
        AuditConfig {
            seed: self.seed,
            state_samples: self.state_samples,
            h_samples: self.h_samples,
            disturbances: self.disturbances,
            dt: self.dt,
            horizon: self.horizon,
            piecewise_period: self.piecewise,
            disturbance_energy: self.disturbance_energy,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct QgccArgs {
    #[arg(long)]
    model: PathBuf,
    /// Polytope of admissible initial states.
    #[arg(long)]
    polytope: PathBuf,
    /// State weight: a scalar (times I), inline JSON rows, or a matrix file.
    #[arg(long, default_value = "1")]
    q: String,
    /// Input weight, same forms as --q.
    #[arg(long, default_value = "1")]
    r: String,
    /// Input bound: a scalar for every channel or a JSON list.
    #[arg(long)]
    umax: String,
    /// `uniform:COUNT:LO:HI` or a comma-separated list.
    #[arg(long, default_value = "uniform:20:0.05:0.95")]
    gamma_grid: String,
    /// Optimize tr X in this direction at every gamma.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Min)]
    objective: ObjectiveArg,
    /// Refine the best grid gamma by golden-section search to this tolerance.
    #[arg(long, value_name = "TOL")]
    refine: Option<f64>,
    /// Write the assembled LMI blocks at the selected (or first) gamma.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    dump_lmi: Option<PathBuf>,
    /// Output directory; not recorded in the artifacts.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ObjectiveArg {
    /// Minimize tr X.
    Min,
    /// Maximize tr X.
    Max,
}

impl ObjectiveArg {
    fn direction(self) -> Direction {
        match self {
            ObjectiveArg::Min => Direction::Minimize,
            ObjectiveArg::Max => Direction::Maximize,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct L2Args {
    #[arg(long)]
    model: PathBuf,
    /// Polytope that must contain the reachable set.
    #[arg(long)]
    polytope: PathBuf,
    #[arg(long)]
    umax: String,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Min)]
    objective: ObjectiveArg,
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    dump_lmi: Option<PathBuf>,
    /// Output directory; not recorded in the artifacts.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
}

#[derive(Debug, Args, Serialize)]
struct AuditArgs {
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Admissible initial states (guaranteed cost) or the containing polytope (L2).
    #[arg(long)]
    polytope: PathBuf,
    /// Weights used at synthesis; only read for guaranteed-cost certificates.
    #[arg(long, default_value = "1")]
    q: String,
    #[arg(long, default_value = "1")]
    r: String,
    #[arg(long)]
    umax: String,
    /// Output directory; not recorded in the artifacts.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    sampling: SamplingArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Take the gain from a certificate.
    #[arg(long, conflicts_with = "gain")]
    certificate: Option<PathBuf>,
    /// Inline gain rows, e.g. `[[-1, -2]]`.
    #[arg(long)]
    gain: Option<String>,
    /// Initial state: a scalar for every entry or a JSON list.
    #[arg(long, default_value = "0")]
    x0: String,
    /// `zero`, `pulse:T0:WIDTH:ENERGY` or `burst:FREQ:T0:WINDOW:ENERGY`.
    #[arg(long, default_value = "zero")]
    disturbance: String,
    /// Disturbance direction; defaults to all ones.
    #[arg(long)]
    w_dir: Option<String>,
    /// Constant uncertainty realization H as inline rows; zero by default.
    #[arg(long)]
    h: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    /// Output directory; not recorded in the artifacts.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

const EXIT_OK: u8 = 0;
const EXIT_INFEASIBLE: u8 = 1;
const EXIT_AUDIT: u8 = 2;
const EXIT_INPUT: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = serde_json::to_value(&cli.command).expect("arguments serialize");
    let result = match &cli.command {
        Command::Validate(a) => run_validate(a),
        Command::SynthQgcc(a) => run_qgcc(a, config),
        Command::SynthL2(a) => run_l2(a, config),
        Command::Audit(a) => run_audit(a, config),
        Command::Simulate(a) => run_simulate(a, config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } => EXIT_AUDIT,
        Error::Backend(_) => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

fn read_model(path: &Path) -> nqs_core::Result<NqsModel> {
    let model = load_model(path)?;
    model.validate().into_result()?;
    Ok(model)
}

fn run_validate(a: &ValidateArgs) -> nqs_core::Result<u8> {
    let model = read_model(&a.model)?;
    let d = model.dims;
    println!(
        "model ok: n={} m={} nz={} nw={} nh={} ({})",
        d.n,
        d.m,
        d.nz,
        d.nw,
        d.nh,
        if model.is_certain() { "certain" } else { "uncertain" }
    );
    if let Some(path) = &a.polytope {
        let poly = load_polytope(path)?;
        if poly.dim() != d.n {
            return Err(Error::Schema(format!("polytope has dimension {}, model has n = {}", poly.dim(), d.n)));
        }
        println!("polytope ok: {} vertices, {} halfspaces", poly.vertices.len(), poly.halfspaces.len());
    }
    Ok(EXIT_OK)
}

fn qgcc_spec(model_path: &Path, poly_path: &Path, q: &str, r: &str, umax: &str) -> nqs_core::Result<QgccSpec> {
    let model = read_model(model_path)?;
    let d = model.dims;
    let spec = QgccSpec {
        admissible: load_polytope(poly_path)?,
        q: parse::weight_matrix(q, d.n, "q")?,
        r: parse::weight_matrix(r, d.m, "r")?,
        bounds: InputBounds::new(parse::vector(umax, d.m, "umax")?)?,
        model,
    };
    spec.validate()?;
    Ok(spec)
}

fn gl2_spec(model_path: &Path, poly_path: &Path, umax: &str) -> nqs_core::Result<Gl2Spec> {
    let model = read_model(model_path)?;
    let m = model.dims.m;
    let spec = Gl2Spec {
        polytope_inf: load_polytope(poly_path)?,
        bounds: InputBounds::new(parse::vector(umax, m, "umax")?)?,
        model,
    };
    spec.validate()?;
    Ok(spec)
}

fn gamma_log_file(config: &Value, outcome: &str, selected: Option<f64>, entries: &[GammaLogEntry]) -> Value {
    json!({
        "format": "nqs-gamma-log/1",
        "outcome": outcome,
        "selected_gamma": selected,
        "entries": entries,
        "config": config,
    })
}

fn audit_file(config: &Value, report: &VerificationReport) -> Value {
    json!({
        "format": "nqs-audit/1",
        "passed": report.passed(),
        "report": report,
        "config": config,
    })
}

fn write_certificate(out: &Path, name: &str, cert: &Certificate, config: &Value) -> nqs_core::Result<()> {
    write_json(&out.join(name), &CertificateFile::from_certificate(cert, config.clone())?)
}

fn print_report(report: &VerificationReport) {
    for c in &report.checks {
        println!(
            "  {:<34} {}  margin {:+.3e}  ({} samples)",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.worst_margin,
            c.samples
        );
    }
    for name in &report.out_of_contract {
        println!("  {name}: out of contract, exempt");
    }
}

/// Shared tail of both synthesis commands: write the artifacts, run the
/// sampling audit on a certified result and pick the exit code.
fn finish_synthesis(
    out: &Path,
    config: &Value,
    outcome: &SynthesisOutcome,
    audit: impl FnOnce(&Certificate) -> nqs_core::Result<VerificationReport>,
) -> nqs_core::Result<u8> {
    fs::create_dir_all(out)?;
    match outcome {
        SynthesisOutcome::Infeasible(rep) => {
            let mut log = gamma_log_file(config, "infeasible", None, &rep.gamma_log);
            log["message"] = json!(rep.message);
            write_json(&out.join("gamma_log.json"), &log)?;
            println!("infeasible: {}", rep.message);
            Ok(EXIT_INFEASIBLE)
        }
        SynthesisOutcome::AuditFailed(cert) => {
            write_json(
                &out.join("gamma_log.json"),
                &gamma_log_file(config, "audit-failed", cert.gamma, &cert.gamma_log),
            )?;
            write_certificate(out, "rejected_certificate.json", cert, config)?;
            println!("audit failed: solver returned a candidate that does not meet the conditions");
            for c in cert.audit.iter().filter(|c| !c.passed) {
                println!("  {:<34} FAIL  margin {:+.3e}  {}", c.name, c.worst_margin, c.detail);
            }
            Ok(EXIT_AUDIT)
        }
        SynthesisOutcome::Certified(cert) => {
            write_json(
                &out.join("gamma_log.json"),
                &gamma_log_file(config, "certified", cert.gamma, &cert.gamma_log),
            )?;
            write_certificate(out, "certificate.json", cert, config)?;
            match cert.gamma {
                Some(g) => println!("certified: gamma = {g:.6}, objective = {:.6e}", cert.objective),
                None => println!("certified: objective = {:.6e}", cert.objective),
            }
            println!("K = {:?}", cert.k.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
            let report = audit(cert)?;
            write_json(&out.join("audit_report.json"), &audit_file(config, &report))?;
            print_report(&report);
            if report.passed() {
                Ok(EXIT_OK)
            } else {
                println!("verification audit found a counterexample");
                Ok(EXIT_AUDIT)
            }
        }
    }
}

fn run_qgcc(a: &QgccArgs, config: Value) -> nqs_core::Result<u8> {
    let spec = qgcc_spec(&a.model, &a.polytope, &a.q, &a.r, &a.umax)?;
    let opts = GammaSearchOptions {
        grid: parse::gamma_grid(&a.gamma_grid)?,
        refine: a.refine.map_or(Refine::None, |tol| Refine::GoldenSection { tol }),
        direction: a.objective.direction(),
        parallel: true,
    };
    let grid = opts.grid.values()?;
    let outcome = synthesize_qgcc(&spec, &opts, &a.solver.settings())?;
    if let Some(path) = &a.dump_lmi {
        let gamma = outcome.certificate().and_then(|c| c.gamma).unwrap_or(grid[0]);
        let mut lmi = build_qgcc_lmis(&spec.model, &spec.admissible, &spec.bounds, &spec.q, &spec.r, gamma)?;
        lmi.problem.objective.direction = opts.direction;
        write_json(path, &json!({"gamma": gamma, "problem": lmi.problem.debug_dump(), "config": config}))?;
    }
    let cfg = a.sampling.config();
    finish_synthesis(&a.out, &config, &outcome, |cert| audit_qgcc(&spec, cert, &cfg))
}

fn run_l2(a: &L2Args, config: Value) -> nqs_core::Result<u8> {
    let spec = gl2_spec(&a.model, &a.polytope, &a.umax)?;
    let direction = a.objective.direction();
    if let Some(path) = &a.dump_lmi {
        let mut lmi = build_gl2pc_lmis(&spec.model, &spec.polytope_inf, &spec.bounds)?;
        lmi.problem.objective.direction = direction;
        write_json(path, &json!({"problem": lmi.problem.debug_dump(), "config": config}))?;
    }
    let outcome = synthesize_gl2pc(&spec, direction, &a.solver.settings())?;
    let cfg = a.sampling.config();
    finish_synthesis(&a.out, &config, &outcome, |cert| audit_gl2pc(&spec, cert, &cfg))
}

fn run_audit(a: &AuditArgs, config: Value) -> nqs_core::Result<u8> {
    let cert = load_certificate(&a.certificate)?;
    let cfg = a.sampling.config();
    let report = match cert.kind {
        CertificateKind::Qgcc => audit_qgcc(&qgcc_spec(&a.model, &a.polytope, &a.q, &a.r, &a.umax)?, &cert, &cfg)?,
        CertificateKind::Gl2pc => audit_gl2pc(&gl2_spec(&a.model, &a.polytope, &a.umax)?, &cert, &cfg)?,
    };
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("audit_report.json"), &audit_file(&config, &report))?;
    print_report(&report);
    if report.passed() {
        println!("audit passed");
        Ok(EXIT_OK)
    } else {
        println!("audit FAILED");
        Ok(EXIT_AUDIT)
    }
}

fn run_simulate(a: &SimulateArgs, config: Value) -> nqs_core::Result<u8> {
    let model = read_model(&a.model)?;
    let d = model.dims;
    let k = match (&a.certificate, &a.gain) {
        (Some(path), _) => load_certificate(path)?.controller(),
        (None, Some(g)) => Controller::new(parse::inline_matrix(g, (d.m, d.n), "gain")?)?,
        (None, None) => Controller::zero(&d),
    };
    if k.k.shape() != (d.m, d.n) {
        return Err(Error::Schema(format!("gain must be {}x{}", d.m, d.n)));
    }
    let x0 = parse::vector(&a.x0, d.n, "x0")?;
    let dir = match &a.w_dir {
        Some(s) => parse::vector(s, d.nw, "w-dir")?,
        None => Vector::from_element(d.nw, 1.0),
    };
    let w = parse::disturbance(&a.disturbance, dir.as_slice())?;
    let h = match &a.h {
        Some(s) => UncertaintySample::new(parse::inline_matrix(s, (d.nd, d.nh), "h")?)?,
        None => UncertaintySample::zero(&d),
    };
    let traj = simulate(&model, &k, &x0, &w, &UncertaintySchedule::Constant(h), a.horizon, a.dt)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("trajectory.csv");
    let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
    writeln!(file, "# {}", serde_json::to_string(&json!({"format": "nqs-trajectory/1", "config": config}))?)?;
    traj.write_csv(&mut file)?;
    file.flush()?;
    let xf = traj.final_state();
    println!("simulated {} samples, |x(T)| = {:.3e}", traj.len(), xf.norm());
    if d.nw > 0 && w.energy > 0.0 && x0.iter().all(|v| *v == 0.0) {
        let est = compute_jinf(&traj)?;
        println!("output energy {:.6e}, disturbance energy {:.6e}", est.z_energy, est.w_energy);
    }
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
