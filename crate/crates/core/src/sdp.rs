//! Standard conic form of an [`LmiProblem`] and the solver backends.
//!
//! Every decision variable is flattened into one scalar vector `z`:
//! symmetric matrices by [`svec`], rectangular ones column-major, scalars as
//! themselves. Each affine block becomes one cone `G₀ + Σ z_j G_j ⪰ margin·I`
//! with `≺` blocks negated, so the cones and the blocks correspond one to
//! one.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus, SupportedConeT,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, smat, svec, Mat, Vector};
use crate::lmi::{Assignment, Direction, LmiProblem, Sense, VarId, VarKind};

/// Position of one decision variable inside `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarSlot {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
    pub len: usize,
}

/// `constant + Σ z_j · coeffs_j ⪰ margin·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub label: String,
    pub index: Option<usize>,
    pub dim: usize,
    pub margin: f64,
    pub constant: Mat,
    /// Nonzero coefficient matrices keyed by scalar index.
    pub coeffs: Vec<(usize, Mat)>,
}

impl ConeBlock {
    pub fn matrix_at(&self, z: &[f64]) -> Mat {
        let mut m = self.constant.clone();
        for (j, g) in &self.coeffs {
            m += g * z[*j];
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub slots: Vec<VarSlot>,
    /// Objective in minimize form; a maximize problem is stored negated.
    pub cost: Vector,
    pub direction: Direction,
    pub cones: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn num_scalars(&self) -> usize {
        self.cost.len()
    }

    /// Objective value in the direction of the source problem.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let v = self.cost.as_slice().iter().zip(z).map(|(c, x)| c * x).sum::<f64>();
        match self.direction {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        }
    }

    pub fn scalarize(&self, asg: &Assignment) -> Result<Vec<f64>> {
        let mut z = vec![0.0; self.num_scalars()];
        for (i, slot) in self.slots.iter().enumerate() {
            let v = asg
                .get(VarId(i))
                .ok_or_else(|| Error::MissingVariable(slot.name.clone()))?;
            if v.shape() != slot.kind.shape() {
                return Err(Error::Shape(format!("value of `{}` has the wrong shape", slot.name)));
            }
            let flat = flatten(slot.kind, v);
            z[slot.offset..slot.offset + slot.len].copy_from_slice(&flat);
        }
        Ok(z)
    }

    /// Assignment for `problem` (the source of this program) from `z`.
    pub fn unscalarize(&self, problem: &LmiProblem, z: &[f64]) -> Assignment {
        let mut asg = problem.assignment();
        for (i, slot) in self.slots.iter().enumerate() {
            asg.set(VarId(i), unflatten(slot.kind, &z[slot.offset..slot.offset + slot.len]));
        }
        asg
    }

    /// Largest margin shortfall `max(0, margin − λ_min)` over all cones.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| (c.margin - min_eigenvalue(&c.matrix_at(z))).max(0.0))
            .fold(0.0, f64::max)
    }
}

fn flatten(kind: VarKind, v: &Mat) -> Vec<f64> {
    match kind {
        VarKind::Symmetric { .. } => svec(v).as_slice().to_vec(),
        VarKind::Rectangular { .. } | VarKind::Scalar => v.as_slice().to_vec(),
    }
}

fn unflatten(kind: VarKind, z: &[f64]) -> Mat {
    match kind {
        VarKind::Symmetric { n } => smat(z, n),
        VarKind::Rectangular { rows, cols } => Mat::from_column_slice(rows, cols, z),
        VarKind::Scalar => Mat::from_element(1, 1, z[0]),
    }
}

/// Lowers an LMI problem to conic form.
pub fn to_standard_form(problem: &LmiProblem) -> Result<ConicProgram> {
    problem.check()?;
    let mut slots = Vec::with_capacity(problem.variables.len());
    let mut offset = 0;
    for var in &problem.variables {
        let len = var.kind.dof();
        slots.push(VarSlot {
            name: var.name.clone(),
            kind: var.kind,
            offset,
            len,
        });
        offset += len;
    }
    let total = offset;

    // Basis matrix of each scalar, so that V = Σ z_j · basis_j.
    let basis = |slot: &VarSlot, k: usize| {
        let mut e = vec![0.0; slot.len];
        e[k] = 1.0;
        unflatten(slot.kind, &e)
    };

    let sign = match problem.objective.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let mut cost = Vector::zeros(total);
    for (var, c) in &problem.objective.terms {
        let slot = &slots[var.0];
        for k in 0..slot.len {
            cost[slot.offset + k] += sign * c.component_mul(&basis(slot, k)).sum();
        }
    }

    let mut cones = Vec::with_capacity(problem.constraints.len());
    for block in &problem.constraints {
        let s = match block.sense {
            Sense::PositiveSemidefinite => 1.0,
            Sense::NegativeDefinite => -1.0,
        };
        let mut coeffs = Vec::new();
        for var in block.variables() {
            let slot = &slots[var.0];
            for k in 0..slot.len {
                let g = block.var_matrix(var, &basis(slot, k)) * s;
                if g.amax() > 0.0 {
                    coeffs.push((slot.offset + k, g));
                }
            }
        }
        cones.push(ConeBlock {
            label: block.label.clone(),
            index: block.index,
            dim: block.dim(),
            margin: block.margin,
            constant: block.constant_matrix() * s,
            coeffs,
        });
    }
    Ok(ConicProgram {
        slots,
        cost,
        direction: problem.objective.direction,
        cones,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    /// Extra margin added to every cone when solving, so the returned point
    /// clears the nominal margins despite solver residuals. `None` uses
    /// `feas_tol`.
    pub backoff: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            backoff: None,
        }
    }
}

impl SolverSettings {
    pub fn backoff(&self) -> f64 {
        self.backoff.unwrap_or(self.feas_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// What a backend reports before the status is cross-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub status: BackendStatus,
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: Option<f64>,
    pub iterations: u32,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Solved,
    PrimalInfeasible,
    DualInfeasible,
    Failed,
}

/// A semidefinite solver bound behind one call over the conic form.
///
/// `margins` are the per-cone lower eigenvalue bounds to enforce, which may
/// exceed the program's nominal margins by the backoff.
pub trait SdpBackend: Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, program: &ConicProgram, margins: &[f64], settings: &SolverSettings) -> Result<BackendOutput>;
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub backend: String,
    pub backend_status: String,
    /// Scalarized solution, present when optimal.
    pub solution: Option<Vec<f64>>,
    /// Objective in the direction of the source problem.
    pub objective: Option<f64>,
    pub dual_objective: Option<f64>,
    /// Largest shortfall against the nominal margins.
    pub max_violation: Option<f64>,
    pub iterations: u32,
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveResult {
    pub fn assignment(&self, program: &ConicProgram, problem: &LmiProblem) -> Option<Assignment> {
        self.solution.as_ref().map(|z| program.unscalarize(problem, z))
    }
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
    solve_with(&ClarabelBackend, program, settings)
}

/// Runs `backend` and cross-checks its answer: a point reported as solved
/// is only returned as optimal if it meets every nominal margin to
/// `feas_tol` and the duality gap is within `gap_tol`.
pub fn solve_with(backend: &dyn SdpBackend, program: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
    if !(settings.feas_tol > 0.0 && settings.gap_tol > 0.0 && settings.max_iter > 0) {
        return Err(Error::InvalidArgument("solver tolerances and iteration cap must be positive".into()));
    }
    let beta = settings.backoff();
    let margins: Vec<f64> = program.cones.iter().map(|c| c.margin + beta).collect();
    let start = Instant::now();
    let out = backend.solve(program, &margins, settings)?;
    let wall_time = start.elapsed().as_secs_f64();

    let mut result = SolveResult {
        status: SolveStatus::NumericalFailure,
        backend: backend.name().to_string(),
        backend_status: out.message.clone(),
        solution: None,
        objective: None,
        dual_objective: out.dual_objective,
        max_violation: None,
        iterations: out.iterations,
        wall_time,
    };
    match out.status {
        BackendStatus::PrimalInfeasible => result.status = SolveStatus::Infeasible,
        BackendStatus::DualInfeasible => result.status = SolveStatus::Unbounded,
        BackendStatus::Failed => {}
        BackendStatus::Solved => {
            if out.z.len() != program.num_scalars() || out.z.iter().any(|v| !v.is_finite()) {
                result.backend_status = format!("{}; solution vector malformed", out.message);
                return Ok(result);
            }
            let violation = program.max_violation(&out.z);
            let gap_ok = out.dual_objective.is_none_or(|d| {
                let p = out.primal_objective;
                (p - d).abs() <= settings.gap_tol * (1.0 + p.abs().max(d.abs()))
            });
            result.max_violation = Some(violation);
            result.objective = Some(program.objective(&out.z));
            if violation <= settings.feas_tol && gap_ok {
                result.status = SolveStatus::Optimal;
                result.solution = Some(out.z);
            } else {
                result.backend_status = format!(
                    "{}; rejected: violation {violation:.3e}, gap ok {gap_ok}",
                    out.message
                );
            }
        }
    }
    Ok(result)
}

/// Interior-point backend built on the Clarabel conic solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram, margins: &[f64], settings: &SolverSettings) -> Result<BackendOutput> {
        let nvar = program.num_scalars();
        // Clarabel form: A z + s = b, s in the cone. With
        // s = svec(G₀ − μI + Σ z_j G_j) this gives A_j = −svec(G_j) and
        // b = svec(G₀ − μI).
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvar];
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(program.cones.len());
        for (cone, &mu) in program.cones.iter().zip(margins) {
            let row0 = b.len();
            let shifted = &cone.constant - Mat::identity(cone.dim, cone.dim) * mu;
            b.extend(svec(&shifted).iter());
            for (j, g) in &cone.coeffs {
                for (r, v) in svec(g).iter().enumerate() {
                    if *v != 0.0 {
                        columns[*j].push((row0 + r, -v));
                    }
                }
            }
            cones.push(if cone.dim == 1 {
                NonnegativeConeT(1)
            } else {
                PSDTriangleConeT(cone.dim)
            });
        }
        let nrows = b.len();
        let mut colptr = Vec::with_capacity(nvar + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &columns {
            for (r, v) in col {
                rowval.push(*r);
                nzval.push(*v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(nrows, nvar, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((nvar, nvar));
        let q: Vec<f64> = program.cost.iter().copied().collect();

        let solver_settings = DefaultSettings {
            verbose: false,
            max_iter: settings.max_iter,
            tol_feas: settings.feas_tol,
            tol_gap_abs: settings.gap_tol,
            tol_gap_rel: settings.gap_tol,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, solver_settings)
            .map_err(|e| Error::Backend(format!("{e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::PrimalInfeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => BackendStatus::DualInfeasible,
            _ => BackendStatus::Failed,
        };
        Ok(BackendOutput {
            status,
            z: sol.x.clone(),
            primal_objective: sol.obj_val,
            dual_objective: Some(sol.obj_val_dual),
            iterations: sol.iterations,
            message: format!("{:?}", sol.status),
        })
    }
}
