//! Controller synthesis: the guaranteed-cost design with its `γ` line
//! search, and the ℒ₂-gain design. Every certificate passes a built-in
//! audit before it is returned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{max_support_level, max_vertex_level, Ellipsoid, Polytope};
use crate::linalg::{all_finite, spd_inverse, symmetrize, Mat};
use crate::lmi::{
    build_gl2pc_lmis_with, build_qgcc_lmis_with, evaluate, Direction, LmiOptions, SynthesisLmi,
};
use crate::model::{Controller, InputBounds, NqsModel};
use crate::sdp::{solve, to_standard_form, SolveResult, SolveStatus, SolverSettings};

const X_MAX_COND: f64 = 1e12;
const INPUT_TOL: f64 = 1e-9;
const INCLUSION_TOL: f64 = 1e-9;
const CONSISTENCY_TOL: f64 = 1e-8;
const TIE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct QgccSpec {
    pub model: NqsModel,
    /// Admissible initial states `𝒟 = 𝒫`.
    pub admissible: Polytope,
    pub q: Mat,
    pub r: Mat,
    pub bounds: InputBounds,
}

impl QgccSpec {
    pub fn validate(&self) -> Result<()> {
        build_qgcc_lmis_with(&self.model, &self.admissible, &self.bounds, &self.q, &self.r, 0.5, &LmiOptions::default())
            .map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct Gl2Spec {
    pub model: NqsModel,
    pub polytope_inf: Polytope,
    pub bounds: InputBounds,
}

impl Gl2Spec {
    pub fn validate(&self) -> Result<()> {
        if self.model.dims.nw == 0 {
            log::warn!("model has no disturbance input; the gain bound is vacuous");
        }
        build_gl2pc_lmis_with(&self.model, &self.polytope_inf, &self.bounds, &LmiOptions::default()).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Qgcc,
    Gl2pc,
}

/// Outcome of one named audit check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest slack seen; negative means violated.
    pub worst_margin: f64,
    pub samples: usize,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, worst_margin: f64, tol: f64, samples: usize, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: worst_margin >= -tol,
            worst_margin,
            samples,
            detail: detail.into(),
        }
    }

    /// Passes only for a strictly positive margin.
    pub fn strict(name: &str, worst_margin: f64, samples: usize, detail: impl Into<String>) -> Self {
        CheckResult {
            passed: worst_margin > 0.0,
            ..CheckResult::new(name, worst_margin, 0.0, samples, detail)
        }
    }

    /// A check that does not apply to the inputs at hand.
    pub fn exempt(name: &str, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: true,
            worst_margin: f64::INFINITY,
            samples: 0,
            detail: detail.into(),
        }
    }

    pub(crate) fn failed(name: &str, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: false,
            worst_margin: f64::NEG_INFINITY,
            samples: 0,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Grid,
    Refine,
}

/// One row of the `γ` search log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaLogEntry {
    pub gamma: f64,
    pub source: CandidateSource,
    /// Solver status, downgraded to numerical failure when the audit fails.
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub audit_passed: Option<bool>,
    pub iterations: u32,
    pub backend_status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub x: Mat,
    pub y: Mat,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma: Option<f64>,
    pub k: Mat,
    pub p: Mat,
    /// `trace(X)`.
    pub objective: f64,
    pub direction: Direction,
    pub solver: Option<SolveResult>,
    pub gamma_log: Vec<GammaLogEntry>,
    pub audit: Vec<CheckResult>,
}

impl Certificate {
    /// Assembles a certificate from a solved `(X, Y, ε₁, ε₂)`, computing
    /// `P = X⁻¹` and `K = YX⁻¹`.
    pub fn from_solution(
        kind: CertificateKind,
        x: &Mat,
        y: &Mat,
        eps1: f64,
        eps2: f64,
        gamma: Option<f64>,
        direction: Direction,
    ) -> Result<Self> {
        let x = symmetrize(x);
        let p = spd_inverse(&x, "X", X_MAX_COND)?;
        let k = y * &p;
        Ok(Certificate {
            kind,
            objective: x.trace(),
            x,
            y: y.clone(),
            eps1,
            eps2,
            gamma,
            k,
            p,
            direction,
            solver: None,
            gamma_log: Vec::new(),
            audit: Vec::new(),
        })
    }

    pub fn controller(&self) -> Controller {
        Controller { k: self.k.clone() }
    }

    pub fn ellipsoid(&self) -> Result<Ellipsoid> {
        Ellipsoid::new(self.p.clone())
    }

    pub fn rho(&self) -> Option<f64> {
        self.gamma.map(|g| 1.0 / g)
    }

    pub fn audit_passed(&self) -> bool {
        !self.audit.is_empty() && self.audit.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaGrid {
    Uniform { count: usize, lo: f64, hi: f64 },
    Explicit { values: Vec<f64> },
}

impl GammaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let vals = match self {
            GammaGrid::Uniform { count, lo, hi } => {
                if *count == 0 || !(0.0 < *lo && lo <= hi && *hi < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "gamma grid needs count >= 1 and 0 < lo <= hi < 1, got {count} points on [{lo}, {hi}]"
                    )));
                }
                if *count == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..*count)
                        .map(|i| lo + (hi - lo) * i as f64 / (*count - 1) as f64)
                        .collect()
                }
            }
            GammaGrid::Explicit { values } => {
                if values.is_empty() || values.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
                    return Err(Error::InvalidArgument("explicit gamma values must lie in (0, 1)".into()));
                }
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        };
        Ok(vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Refine {
    None,
    GoldenSection { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSearchOptions {
    pub grid: GammaGrid,
    pub refine: Refine,
    /// Direction in which `trace(X)` is optimized at every `γ`; the best
    /// candidate is chosen in the same direction.
    pub direction: Direction,
    /// Solve grid candidates concurrently; the result does not depend on it.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for GammaSearchOptions {
    fn default() -> Self {
        GammaSearchOptions {
            grid: GammaGrid::Uniform {
                count: 20,
                lo: 0.05,
                hi: 0.95,
            },
            refine: Refine::None,
            direction: Direction::Minimize,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InfeasibleReport {
    pub kind: CertificateKind,
    pub message: String,
    pub gamma_log: Vec<GammaLogEntry>,
    pub solver: Option<SolveResult>,
}

/// Result of a synthesis call.
#[derive(Debug, Clone)]
pub enum SynthesisOutcome {
    Certified(Box<Certificate>),
    /// No candidate was solved to optimality.
    Infeasible(InfeasibleReport),
    /// Some candidate was solved but none passed the audit. Carries the
    /// best rejected certificate for diagnostics.
    AuditFailed(Box<Certificate>),
}

impl SynthesisOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            SynthesisOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }
}

/// Built-in certificate audit shared by both designs. Rebuilds the LMIs
/// from the design problem and checks them at the certificate's `(X, Y, ε₁, ε₂)`,
/// the internal consistency of `K` and `P`, the input-bound invariant and
/// the set inclusions.
pub fn audit_certificate(lmi: &SynthesisLmi, bounds: &InputBounds, cert: &Certificate, inclusions: &[CheckResult]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let finite = all_finite(&cert.x) && all_finite(&cert.y) && all_finite(&cert.k) && all_finite(&cert.p);
    if !finite {
        out.push(CheckResult::failed("finite", "non-finite entry in X, Y, K or P"));
        return out;
    }
    match spd_inverse(&cert.x, "X", X_MAX_COND) {
        Ok(p) => {
            let n = cert.x.nrows();
            let rel = |a: &Mat, b: &Mat| (a - b).amax() / (1.0 + b.amax());
            let p_err = rel(&(&cert.p * &cert.x), &Mat::identity(n, n)).max(rel(&cert.p, &p));
            out.push(CheckResult::new("p_consistency", -p_err, CONSISTENCY_TOL, 1, "P·X = I"));
            let k_err = rel(&cert.k, &(&cert.y * &p));
            out.push(CheckResult::new("gain_consistency", -k_err, CONSISTENCY_TOL, 1, "K = Y·X⁻¹"));
        }
        Err(e) => out.push(CheckResult::failed("x_spd", e.to_string())),
    }
    if cert.eps1 <= 0.0 || cert.eps2 <= 0.0 {
        out.push(CheckResult::failed("eps_positive", "eps1 and eps2 must be positive"));
    }

    let asg = lmi.vars.assign(&lmi.problem, &cert.x, &cert.y, cert.eps1, cert.eps2);
    match evaluate(&lmi.problem, &asg) {
        Ok(checks) => {
            let worst = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
            let failing: Vec<String> = checks
                .iter()
                .filter(|c| !c.satisfied)
                .map(|c| match c.index {
                    Some(i) => format!("{}[{i}]", c.label),
                    None => c.label.clone(),
                })
                .collect();
            let mut check = CheckResult::new(
                "lmi_margins",
                worst,
                crate::lmi::EVAL_TOL,
                checks.len(),
                if failing.is_empty() {
                    "all blocks meet their margins".to_string()
                } else {
                    format!("violated: {}", failing.join(", "))
                },
            );
            check.passed = failing.is_empty();
            out.push(check);
        }
        Err(e) => out.push(CheckResult::failed("lmi_margins", e.to_string())),
    }

    // Input-bound invariant: diag(K X Kᵀ) ≤ u²_max.
    let kxk = &cert.k * &cert.x * cert.k.transpose();
    let worst = (0..kxk.nrows())
        .map(|i| bounds.u_max[i].powi(2) - kxk[(i, i)])
        .fold(f64::INFINITY, f64::min);
    out.push(CheckResult::new("input_bound", worst, INPUT_TOL, kxk.nrows(), "diag(K X Kᵀ) ≤ u_max²"));
    out.extend_from_slice(inclusions);
    out
}

pub(crate) fn inclusion_checks_qgcc(spec: &QgccSpec, cert: &Certificate) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let e = match cert.ellipsoid() {
        Ok(e) => e,
        Err(err) => return vec![CheckResult::failed("ellipsoid", err.to_string())],
    };
    match max_vertex_level(&e, &spec.admissible) {
        Ok(l) => out.push(CheckResult::new("polytope_in_ellipsoid", 1.0 - l, INCLUSION_TOL, spec.admissible.vertices.len(), "max vertex level of P")),
        Err(err) => out.push(CheckResult::failed("polytope_in_ellipsoid", err.to_string())),
    }
    let Some(rho) = cert.rho() else {
        out.push(CheckResult::failed("ellipsoid_in_scaled_polytope", "certificate has no gamma"));
        return out;
    };
    match spec.admissible.scale(rho).and_then(|rp| max_support_level(&rp, &e)) {
        Ok(l) => out.push(CheckResult::new(
            "ellipsoid_in_scaled_polytope",
            1.0 - l,
            INCLUSION_TOL,
            spec.admissible.halfspaces.len(),
            format!("rho = {rho}"),
        )),
        Err(err) => out.push(CheckResult::failed("ellipsoid_in_scaled_polytope", err.to_string())),
    }
    out
}

pub(crate) fn inclusion_checks_gl2(spec: &Gl2Spec, cert: &Certificate) -> Vec<CheckResult> {
    let res = cert
        .ellipsoid()
        .and_then(|e| max_support_level(&spec.polytope_inf, &e));
    match res {
        Ok(l) => vec![CheckResult::new(
            "ellipsoid_in_polytope_inf",
            1.0 - l,
            INCLUSION_TOL,
            spec.polytope_inf.halfspaces.len(),
            "max support level over P_inf",
        )],
        Err(err) => vec![CheckResult::failed("ellipsoid_in_polytope_inf", err.to_string())],
    }
}

/// Re-audits a guaranteed-cost certificate against freshly built LMIs.
pub fn audit_qgcc_certificate(spec: &QgccSpec, cert: &Certificate) -> Result<Vec<CheckResult>> {
    let gamma = cert
        .gamma
        .ok_or_else(|| Error::InvalidArgument("guaranteed-cost certificate without gamma".into()))?;
    check_shapes(&spec.model, cert)?;
    let lmi = build_qgcc_lmis_with(&spec.model, &spec.admissible, &spec.bounds, &spec.q, &spec.r, gamma, &LmiOptions::default())?;
    Ok(audit_certificate(&lmi, &spec.bounds, cert, &inclusion_checks_qgcc(spec, cert)))
}

/// Re-audits an ℒ₂-gain certificate against freshly built LMIs.
pub fn audit_gl2pc_certificate(spec: &Gl2Spec, cert: &Certificate) -> Result<Vec<CheckResult>> {
    check_shapes(&spec.model, cert)?;
    let lmi = build_gl2pc_lmis_with(&spec.model, &spec.polytope_inf, &spec.bounds, &LmiOptions::default())?;
    Ok(audit_certificate(&lmi, &spec.bounds, cert, &inclusion_checks_gl2(spec, cert)))
}

fn check_shapes(model: &NqsModel, cert: &Certificate) -> Result<()> {
    let (n, m) = (model.dims.n, model.dims.m);
    if cert.x.shape() != (n, n) || cert.p.shape() != (n, n) || cert.y.shape() != (m, n) || cert.k.shape() != (m, n) {
        return Err(Error::Shape("certificate matrices do not match the model dimensions".into()));
    }
    Ok(())
}

struct Candidate {
    gamma: f64,
    source: CandidateSource,
    result: SolveResult,
    cert: Option<Certificate>,
}

impl Candidate {
    fn passed(&self) -> bool {
        self.cert.as_ref().is_some_and(|c| c.audit_passed())
    }

    fn log(&self) -> GammaLogEntry {
        let audit_passed = self.cert.as_ref().map(|c| c.audit_passed());
        GammaLogEntry {
            gamma: self.gamma,
            source: self.source,
            status: if audit_passed == Some(false) {
                SolveStatus::NumericalFailure
            } else {
                self.result.status
            },
            objective: self.result.objective,
            audit_passed,
            iterations: self.result.iterations,
            backend_status: self.result.backend_status.clone(),
        }
    }

    /// Objective used for ranking; infeasible or rejected candidates rank last.
    fn score(&self, direction: Direction) -> f64 {
        match (&self.cert, self.passed()) {
            (Some(c), true) => match direction {
                Direction::Minimize => c.objective,
                Direction::Maximize => -c.objective,
            },
            _ => f64::INFINITY,
        }
    }
}

fn solve_qgcc_candidate(
    spec: &QgccSpec,
    gamma: f64,
    source: CandidateSource,
    direction: Direction,
    settings: &SolverSettings,
) -> Result<Candidate> {
    let mut lmi =
        build_qgcc_lmis_with(&spec.model, &spec.admissible, &spec.bounds, &spec.q, &spec.r, gamma, &LmiOptions::default())?;
    lmi.problem.objective.direction = direction;
    let (result, cert) = solve_lmi(&lmi, settings, CertificateKind::Qgcc, |cert| {
        audit_certificate(&lmi, &spec.bounds, cert, &inclusion_checks_qgcc(spec, cert))
    })?;
    Ok(Candidate {
        gamma,
        source,
        result,
        cert,
    })
}

/// Solves one LMI problem and, if optimal, builds and audits the certificate.
fn solve_lmi(
    lmi: &SynthesisLmi,
    settings: &SolverSettings,
    kind: CertificateKind,
    audit: impl Fn(&Certificate) -> Vec<CheckResult>,
) -> Result<(SolveResult, Option<Certificate>)> {
    let program = to_standard_form(&lmi.problem)?;
    let result = solve(&program, settings)?;
    log::debug!(
        "gamma {:?}: {:?} objective {:?} after {} iterations",
        lmi.gamma,
        result.status,
        result.objective,
        result.iterations
    );
    let Some(asg) = result.assignment(&program, &lmi.problem) else {
        return Ok((result, None));
    };
    let value = |v| asg.get(v).cloned();
    let x = value(lmi.vars.x).expect("solution holds X");
    let y = value(lmi.vars.y).expect("solution holds Y");
    let eps = |v: Option<_>| v.and_then(value).map_or(1.0, |m: Mat| m[(0, 0)]);
    let mut cert = match Certificate::from_solution(
        kind,
        &x,
        &y,
        eps(lmi.vars.eps1),
        eps(lmi.vars.eps2),
        lmi.gamma,
        lmi.problem.objective.direction,
    ) {
        Ok(c) => c,
        Err(e) => {
            // X came back singular: keep the raw values so the failure is inspectable.
            let mut c = Certificate {
                kind,
                objective: x.trace(),
                x: x.clone(),
                y: y.clone(),
                eps1: eps(lmi.vars.eps1),
                eps2: eps(lmi.vars.eps2),
                gamma: lmi.gamma,
                k: Mat::from_element(y.nrows(), y.ncols(), f64::NAN),
                p: Mat::from_element(x.nrows(), x.ncols(), f64::NAN),
                direction: lmi.problem.objective.direction,
                solver: None,
                gamma_log: Vec::new(),
                audit: Vec::new(),
            };
            c.audit.push(CheckResult::failed("x_spd", e.to_string()));
            c.solver = Some(result.clone());
            return Ok((result, Some(c)));
        }
    };
    cert.audit = audit(&cert);
    cert.solver = Some(result.clone());
    Ok((result, Some(cert)))
}

/// Index of the preferred candidate: best score, ties within a relative
/// `1e-7` resolved towards smaller `γ`.
fn select(cands: &[Candidate], direction: Direction) -> Option<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| cands[a].gamma.total_cmp(&cands[b].gamma));
    let mut best: Option<usize> = None;
    for i in order {
        let s = cands[i].score(direction);
        if !s.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let sb = cands[b].score(direction);
                if s < sb - TIE_TOL * sb.abs().max(1.0) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

/// For each `γ` on the grid, optimize `trace(X)` subject to the
/// guaranteed-cost LMIs; optionally refine around the best grid point.
pub fn synthesize_qgcc(spec: &QgccSpec, opts: &GammaSearchOptions, settings: &SolverSettings) -> Result<SynthesisOutcome> {
    spec.validate()?;
    let grid = opts.grid.values()?;
    let run = |g: &f64| solve_qgcc_candidate(spec, *g, CandidateSource::Grid, opts.direction, settings);
    let mut cands: Vec<Candidate> = if opts.parallel {
        grid.par_iter().map(run).collect::<Result<_>>()?
    } else {
        grid.iter().map(run).collect::<Result<_>>()?
    };

    if let (Refine::GoldenSection { tol }, Some(best)) = (opts.refine, select(&cands, opts.direction)) {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidArgument("golden-section tolerance must be positive".into()));
        }
        let g0 = cands[best].gamma;
        let pos = grid.iter().position(|g| *g == g0).expect("best candidate is on the grid");
        let lo = if pos > 0 { grid[pos - 1] } else { g0 * 0.5 };
        let hi = if pos + 1 < grid.len() { grid[pos + 1] } else { 0.5 * (g0 + 1.0) };
        cands.extend(golden_section(spec, settings, opts.direction, lo, hi, tol)?);
    }

    let log: Vec<GammaLogEntry> = {
        let mut l: Vec<_> = cands.iter().map(Candidate::log).collect();
        l.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        l
    };
    finish(cands, log, CertificateKind::Qgcc, opts.direction)
}

fn golden_section(
    spec: &QgccSpec,
    settings: &SolverSettings,
    direction: Direction,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<Vec<Candidate>> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |g: f64| solve_qgcc_candidate(spec, g, CandidateSource::Refine, direction, settings);
    let mut out = Vec::new();
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while (b - a).abs() > tol {
        if fc.score(direction) <= fd.score(direction) {
            b = d;
            d = c;
            out.push(std::mem::replace(&mut fd, fc));
            c = b - phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            out.push(std::mem::replace(&mut fc, fd));
            d = a + phi * (b - a);
            fd = eval(d)?;
        }
    }
    out.push(fc);
    out.push(fd);
    Ok(out)
}

fn finish(cands: Vec<Candidate>, log: Vec<GammaLogEntry>, kind: CertificateKind, direction: Direction) -> Result<SynthesisOutcome> {
    if let Some(i) = select(&cands, direction) {
        let mut cert = cands.into_iter().nth(i).and_then(|c| c.cert).expect("selected candidate has a certificate");
        cert.gamma_log = log;
        return Ok(SynthesisOutcome::Certified(Box::new(cert)));
    }
    // Nothing passed; prefer reporting a rejected solution over a plain infeasibility.
    let last_result = cands.last().map(|c| c.result.clone());
    let rejected = cands
        .into_iter()
        .filter_map(|c| c.cert)
        .min_by(|a, b| a.objective.total_cmp(&b.objective));
    if let Some(mut cert) = rejected {
        cert.gamma_log = log;
        return Ok(SynthesisOutcome::AuditFailed(Box::new(cert)));
    }
    let message = match kind {
        CertificateKind::Qgcc => format!("no feasible gamma among {} candidates", log.len()),
        CertificateKind::Gl2pc => "the gain conditions are infeasible".to_string(),
    };
    Ok(SynthesisOutcome::Infeasible(InfeasibleReport {
        kind,
        message,
        gamma_log: log,
        solver: last_result,
    }))
}

/// ℒ₂-gain design: optimize `trace(X)` in `direction` subject to the gain LMIs.
pub fn synthesize_gl2pc(spec: &Gl2Spec, direction: Direction, settings: &SolverSettings) -> Result<SynthesisOutcome> {
    spec.validate()?;
    let mut lmi = build_gl2pc_lmis_with(&spec.model, &spec.polytope_inf, &spec.bounds, &LmiOptions::default())?;
    lmi.problem.objective.direction = direction;
    let (result, cert) = solve_lmi(&lmi, settings, CertificateKind::Gl2pc, |cert| {
        audit_certificate(&lmi, &spec.bounds, cert, &inclusion_checks_gl2(spec, cert))
    })?;
    let cand = Candidate {
        gamma: f64::NAN,
        source: CandidateSource::Grid,
        result,
        cert,
    };
    finish(vec![cand], Vec::new(), CertificateKind::Gl2pc, direction)
}
