//! Affine matrix inequalities over the decision variables `(X, Y, ε₁, ε₂)`.
//!
//! An [`LmiProblem`] is a list of symmetric block matrices whose entries are
//! affine in the decision variables. Only the upper block triangle is
//! stored; the lower triangle is the transpose, so every assembled matrix is
//! symmetric by construction.
//!
//! Two builders produce the problems solved by the synthesis layer:
//! [`build_qgcc_lmis`] (guaranteed-cost design for a fixed line-search
//! parameter `γ`) and [`build_gl2pc_lmis`] (ℒ₂-gain design). The
//! `expand_*` functions evaluate the pointwise Lyapunov inequalities that
//! those matrix inequalities imply after Schur complements and the
//! congruence by `P = X⁻¹`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{shape_err, Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{
    is_symmetric, max_eigenvalue, min_eigenvalue, spd_condition, spd_inverse, spectral_norm, symmetrize,
    to_rows, vstack, Mat, Vector,
};
use crate::model::{Controller, InputBounds, NqsModel};

/// Default tolerance of [`evaluate`].
pub const EVAL_TOL: f64 = 1e-9;
/// Lower bound imposed on `ε₁`, `ε₂`.
pub const EPS_FLOOR: f64 = 1e-9;
const WEIGHT_MAX_COND: f64 = 1e10;
const P_MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKind {
    Symmetric { n: usize },
    Rectangular { rows: usize, cols: usize },
    Scalar,
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric { n } => (n, n),
            VarKind::Rectangular { rows, cols } => (rows, cols),
            VarKind::Scalar => (1, 1),
        }
    }

    /// Number of free scalars.
    pub fn dof(&self) -> usize {
        match *self {
            VarKind::Symmetric { n } => n * (n + 1) / 2,
            VarKind::Rectangular { rows, cols } => rows * cols,
            VarKind::Scalar => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionVar {
    pub name: String,
    pub kind: VarKind,
}

/// A linear map applied to one decision variable `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    /// `left · V · right`
    Sandwich { left: Mat, right: Mat },
    /// `left · Vᵀ · right`
    SandwichTransposed { left: Mat, right: Mat },
    /// `v · coeff` for a scalar variable `v`.
    Scale(Mat),
}

impl LinearMap {
    pub fn apply(&self, v: &Mat) -> Mat {
        match self {
            LinearMap::Sandwich { left, right } => left * v * right,
            LinearMap::SandwichTransposed { left, right } => left * v.transpose() * right,
            LinearMap::Scale(c) => c * v[(0, 0)],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            LinearMap::Sandwich { left, right } | LinearMap::SandwichTransposed { left, right } => {
                (left.nrows(), right.ncols())
            }
            LinearMap::Scale(c) => c.shape(),
        }
    }

    /// The map `V ↦ (self(V))ᵀ`.
    pub fn transpose(&self) -> LinearMap {
        match self {
            LinearMap::Sandwich { left, right } => LinearMap::SandwichTransposed {
                left: right.transpose(),
                right: left.transpose(),
            },
            LinearMap::SandwichTransposed { left, right } => LinearMap::Sandwich {
                left: right.transpose(),
                right: left.transpose(),
            },
            LinearMap::Scale(c) => LinearMap::Scale(c.transpose()),
        }
    }

    fn accepts(&self, kind: VarKind) -> bool {
        let (r, c) = kind.shape();
        match self {
            LinearMap::Sandwich { left, right } => left.ncols() == r && right.nrows() == c,
            LinearMap::SandwichTransposed { left, right } => left.ncols() == c && right.nrows() == r,
            LinearMap::Scale(_) => kind == VarKind::Scalar,
        }
    }
}

/// `constant + Σ map_t(V_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: Vec<(VarId, LinearMap)>,
}

impl AffineExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AffineExpr {
            rows,
            cols,
            constant: Mat::zeros(rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn constant(c: Mat) -> Self {
        AffineExpr {
            rows: c.nrows(),
            cols: c.ncols(),
            constant: c,
            terms: Vec::new(),
        }
    }

    /// Appends a linear term. Panics on a shape mismatch, which is a
    /// construction bug rather than a data error.
    pub fn with(mut self, var: VarId, map: LinearMap) -> Self {
        assert_eq!(map.shape(), (self.rows, self.cols), "term shape mismatch");
        self.terms.push((var, map));
        self
    }

    pub fn plus(mut self, other: AffineExpr) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sum shape mismatch");
        self.constant += other.constant;
        self.terms.extend(other.terms);
        self
    }

    pub fn transpose(&self) -> Self {
        AffineExpr {
            rows: self.cols,
            cols: self.rows,
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(v, m)| (*v, m.transpose())).collect(),
        }
    }

    /// `E + Eᵀ`.
    pub fn symm(&self) -> Self {
        self.clone().plus(self.transpose())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> &[(VarId, LinearMap)] {
        &self.terms
    }

    pub fn eval(&self, asg: &Assignment) -> Result<Mat> {
        let mut out = self.constant.clone();
        for (var, map) in &self.terms {
            let value = asg.get(*var).ok_or_else(|| Error::MissingVariable(asg.name(*var)))?;
            out += map.apply(value);
        }
        Ok(out)
    }

    /// Contribution of variable `var` set to `value`, without the constant.
    pub fn eval_var(&self, var: VarId, value: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for (v, map) in &self.terms {
            if *v == var {
                out += map.apply(value);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `M ⪰ margin·I`
    PositiveSemidefinite,
    /// `M ⪯ -margin·I`
    NegativeDefinite,
}

/// A symmetric block matrix with affine entries and a definiteness sense.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBlock {
    pub label: String,
    /// Vertex or halfspace index for families of constraints.
    pub index: Option<usize>,
    pub sense: Sense,
    pub margin: f64,
    sizes: Vec<usize>,
    /// Upper block triangle packed column by column; `None` is a zero block.
    entries: Vec<Option<AffineExpr>>,
}

fn packed(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

impl AffineBlock {
    pub fn new(label: impl Into<String>, index: Option<usize>, sizes: Vec<usize>, sense: Sense, margin: f64) -> Self {
        let nb = sizes.len();
        AffineBlock {
            label: label.into(),
            index,
            sense,
            margin,
            sizes,
            entries: vec![None; nb * (nb + 1) / 2],
        }
    }

    /// Sets block `(i, j)`; a lower-triangle entry is stored transposed.
    pub fn set(&mut self, i: usize, j: usize, expr: AffineExpr) {
        let (i, j, expr) = if i <= j { (i, j, expr) } else { (j, i, expr.transpose()) };
        assert_eq!(expr.shape(), (self.sizes[i], self.sizes[j]), "block ({i},{j}) shape mismatch");
        self.entries[packed(i, j)] = Some(expr);
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&AffineExpr> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries[packed(i, j)].as_ref()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.sizes.len());
        let mut acc = 0;
        for s in &self.sizes {
            off.push(acc);
            acc += s;
        }
        off
    }

    fn fill(&self, mut block_value: impl FnMut(&AffineExpr) -> Result<Mat>) -> Result<Mat> {
        let dim = self.dim();
        let off = self.offsets();
        let mut out = Mat::zeros(dim, dim);
        for j in 0..self.sizes.len() {
            for i in 0..=j {
                let Some(expr) = &self.entries[packed(i, j)] else { continue };
                let mut v = block_value(expr)?;
                if i == j {
                    v = symmetrize(&v);
                }
                out.view_mut((off[i], off[j]), (self.sizes[i], self.sizes[j])).copy_from(&v);
                if i != j {
                    out.view_mut((off[j], off[i]), (self.sizes[j], self.sizes[i]))
                        .copy_from(&v.transpose());
                }
            }
        }
        Ok(out)
    }

    /// The full symmetric matrix at an assignment.
    pub fn assemble(&self, asg: &Assignment) -> Result<Mat> {
        self.fill(|e| e.eval(asg))
    }

    /// The constant part of the assembled matrix.
    pub fn constant_matrix(&self) -> Mat {
        self.fill(|e| Ok(e.constant.clone())).expect("constant fill is infallible")
    }

    /// The linear contribution of `var` set to `value`.
    pub fn var_matrix(&self, var: VarId, value: &Mat) -> Mat {
        self.fill(|e| Ok(e.eval_var(var, value))).expect("linear fill is infallible")
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        self.entries
            .iter()
            .flatten()
            .flat_map(|e| e.terms.iter().map(|(v, _)| *v))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

/// `Σ ⟨C_v, V⟩` (Frobenius inner products) with an optimization direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub direction: Direction,
    pub terms: Vec<(VarId, Mat)>,
}

impl Objective {
    pub fn none() -> Self {
        Objective {
            direction: Direction::Minimize,
            terms: Vec::new(),
        }
    }

    /// `trace(V)` for a square variable.
    pub fn trace(var: VarId, n: usize, direction: Direction) -> Self {
        Objective {
            direction,
            terms: vec![(var, Mat::identity(n, n))],
        }
    }
}

/// Values for the variables of one problem, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    names: Vec<String>,
    values: Vec<Option<Mat>>,
}

impl Assignment {
    pub fn set(&mut self, var: VarId, value: Mat) {
        self.values[var.0] = Some(value);
    }

    pub fn get(&self, var: VarId) -> Option<&Mat> {
        self.values.get(var.0).and_then(|v| v.as_ref())
    }

    fn name(&self, var: VarId) -> String {
        self.names.get(var.0).cloned().unwrap_or_else(|| format!("#{}", var.0))
    }

    /// Entrywise `(self + other) / 2`.
    pub fn midpoint(&self, other: &Assignment) -> Assignment {
        Assignment {
            names: self.names.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some((a + b) * 0.5),
                    _ => None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub variables: Vec<DecisionVar>,
    pub constraints: Vec<AffineBlock>,
    pub objective: Objective,
}

impl Default for LmiProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LmiProblem {
    pub fn new() -> Self {
        LmiProblem {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective::none(),
        }
    }

    pub fn add_variable(&mut self, name: &str, kind: VarKind) -> Result<VarId> {
        if self.var_id(name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate variable `{name}`")));
        }
        self.variables.push(DecisionVar {
            name: name.to_string(),
            kind,
        });
        Ok(VarId(self.variables.len() - 1))
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn var(&self, id: VarId) -> &DecisionVar {
        &self.variables[id.0]
    }

    pub fn add_constraint(&mut self, block: AffineBlock) -> Result<()> {
        self.check_block(&block)?;
        self.constraints.push(block);
        Ok(())
    }

    fn check_block(&self, block: &AffineBlock) -> Result<()> {
        for expr in block.entries.iter().flatten() {
            for (var, map) in &expr.terms {
                let decl = self
                    .variables
                    .get(var.0)
                    .ok_or_else(|| Error::InvalidArgument(format!("undeclared variable #{}", var.0)))?;
                if !map.accepts(decl.kind) {
                    return shape_err(format!(
                        "constraint `{}` applies a map of the wrong shape to `{}`",
                        block.label, decl.name
                    ));
                }
            }
        }
        Ok(())
    }

    /// Every constraint references only declared variables with matching shapes.
    pub fn check(&self) -> Result<()> {
        self.constraints.iter().try_for_each(|b| self.check_block(b))
    }

    /// An empty assignment for this problem.
    pub fn assignment(&self) -> Assignment {
        Assignment {
            names: self.variables.iter().map(|v| v.name.clone()).collect(),
            values: vec![None; self.variables.len()],
        }
    }

    pub fn objective_value(&self, asg: &Assignment) -> Result<f64> {
        let mut total = 0.0;
        for (var, c) in &self.objective.terms {
            let v = asg.get(*var).ok_or_else(|| Error::MissingVariable(asg.name(*var)))?;
            total += c.component_mul(v).sum();
        }
        Ok(total)
    }

    /// Structured dump of the problem for diffing against hand calculations.
    pub fn debug_dump(&self) -> serde_json::Value {
        let map_json = |var: &VarId, map: &LinearMap| {
            let name = &self.variables[var.0].name;
            match map {
                LinearMap::Sandwich { left, right } => {
                    json!({"var": name, "map": "left*V*right", "left": to_rows(left), "right": to_rows(right)})
                }
                LinearMap::SandwichTransposed { left, right } => {
                    json!({"var": name, "map": "left*V^T*right", "left": to_rows(left), "right": to_rows(right)})
                }
                LinearMap::Scale(c) => json!({"var": name, "map": "v*coeff", "coeff": to_rows(c)}),
            }
        };
        let constraints: Vec<_> = self
            .constraints
            .iter()
            .map(|b| {
                let mut entries = Vec::new();
                for j in 0..b.sizes.len() {
                    for i in 0..=j {
                        if let Some(e) = b.entry(i, j) {
                            entries.push(json!({
                                "row": i,
                                "col": j,
                                "constant": to_rows(&e.constant),
                                "terms": e.terms.iter().map(|(v, m)| map_json(v, m)).collect::<Vec<_>>(),
                            }));
                        }
                    }
                }
                json!({
                    "label": b.label,
                    "index": b.index,
                    "sense": b.sense,
                    "margin": b.margin,
                    "block_sizes": b.sizes,
                    "entries": entries,
                })
            })
            .collect();
        json!({
            "variables": self.variables,
            "objective": {
                "direction": self.objective.direction,
                "terms": self.objective.terms.iter().map(|(v, c)| json!({"var": self.variables[v.0].name, "coeff": to_rows(c)})).collect::<Vec<_>>(),
            },
            "constraints": constraints,
        })
    }
}

/// Outcome of checking one constraint at an assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub constraint: usize,
    pub label: String,
    pub index: Option<usize>,
    pub sense: Sense,
    /// Minimum eigenvalue for `⪰` constraints, maximum for `≺`.
    pub eigenvalue: f64,
    /// Distance to the margin; negative when violated.
    pub slack: f64,
    pub satisfied: bool,
}

pub fn evaluate(problem: &LmiProblem, asg: &Assignment) -> Result<Vec<ConstraintCheck>> {
    evaluate_with_tol(problem, asg, EVAL_TOL)
}

/// Evaluates every constraint: `⪰` needs `λ_min ≥ margin − tol`, `≺` needs
/// `λ_max ≤ −margin + tol`.
pub fn evaluate_with_tol(problem: &LmiProblem, asg: &Assignment, tol: f64) -> Result<Vec<ConstraintCheck>> {
    for (i, var) in problem.variables.iter().enumerate() {
        match asg.get(VarId(i)) {
            None => return Err(Error::MissingVariable(var.name.clone())),
            Some(v) if v.shape() != var.kind.shape() => {
                return shape_err(format!("value of `{}` has the wrong shape", var.name))
            }
            Some(v) => {
                if matches!(var.kind, VarKind::Symmetric { .. }) && !is_symmetric(v, 1e-9 * (1.0 + v.amax())) {
                    return Err(Error::InvalidArgument(format!("`{}` must be symmetric", var.name)));
                }
            }
        }
    }
    problem
        .constraints
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let m = b.assemble(asg)?;
            let (eigenvalue, slack) = match b.sense {
                Sense::PositiveSemidefinite => {
                    let l = min_eigenvalue(&m);
                    (l, l - b.margin)
                }
                Sense::NegativeDefinite => {
                    let l = max_eigenvalue(&m);
                    (l, -b.margin - l)
                }
            };
            Ok(ConstraintCheck {
                constraint: i,
                label: b.label.clone(),
                index: b.index,
                sense: b.sense,
                eigenvalue,
                slack,
                satisfied: slack >= -tol,
            })
        })
        .collect()
}

/// The decision variables shared by both synthesis problems. `ε₁`, `ε₂` are
/// only declared when the plant carries uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisVars {
    pub x: VarId,
    pub y: VarId,
    pub eps1: Option<VarId>,
    pub eps2: Option<VarId>,
}

impl SynthesisVars {
    /// Assignment `(X, Y, ε₁, ε₂)` for `problem`.
    pub fn assign(&self, problem: &LmiProblem, x: &Mat, y: &Mat, eps1: f64, eps2: f64) -> Assignment {
        let mut asg = problem.assignment();
        asg.set(self.x, x.clone());
        asg.set(self.y, y.clone());
        if let Some(e) = self.eps1 {
            asg.set(e, Mat::from_element(1, 1, eps1));
        }
        if let Some(e) = self.eps2 {
            asg.set(e, Mat::from_element(1, 1, eps2));
        }
        asg
    }
}

/// An assembled synthesis problem together with its variable handles.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisLmi {
    pub problem: LmiProblem,
    pub vars: SynthesisVars,
    pub gamma: Option<f64>,
}

/// Tunables of the LMI builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiOptions {
    /// Margin `δ` of the strict inequalities; `None` selects `1e-7·(1 + ‖A‖)`.
    pub strict_margin: Option<f64>,
    /// Lower bound on `ε₁`, `ε₂`.
    pub eps_floor: f64,
    /// Margin of `X ≻ 0`.
    pub x_floor: f64,
}

impl Default for LmiOptions {
    fn default() -> Self {
        LmiOptions {
            strict_margin: None,
            eps_floor: EPS_FLOOR,
            x_floor: 1e-9,
        }
    }
}

impl LmiOptions {
    fn strict(&self, model: &NqsModel) -> f64 {
        self.strict_margin
            .unwrap_or_else(|| 1e-7 * (1.0 + spectral_norm(&model.a)))
    }
}

/// Constant pieces of the vertex-dependent Lyapunov block.
struct VertexTerms {
    /// `[F_1ᵀv … F_nᵀv]`, `n×n`.
    phi: Mat,
    /// `[G_1ᵀv … G_nᵀv]`, `m×n`.
    psi: Mat,
    /// `I_n ⊗ Dᵀv`, `n·nd × n`.
    gamma_dir: Mat,
}

fn vertex_terms(model: &NqsModel, v: &Vector) -> VertexTerms {
    let n = model.dims.n;
    let m = model.dims.m;
    let mut phi = Mat::zeros(n, n);
    let mut psi = Mat::zeros(m, n);
    for i in 0..n {
        phi.set_column(i, &(model.f[i].transpose() * v));
        psi.set_column(i, &(model.g[i].transpose() * v));
    }
    let dtv = model.d.transpose() * v;
    let gamma_dir = Mat::identity(n, n).kronecker(&dtv);
    VertexTerms { phi, psi, gamma_dir }
}

fn row(v: &Vector) -> Mat {
    Mat::from_row_slice(1, v.len(), v.as_slice())
}

fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

fn sandwich(left: Mat, right: Mat) -> LinearMap {
    LinearMap::Sandwich { left, right }
}

fn sandwich_t(left: Mat, right: Mat) -> LinearMap {
    LinearMap::SandwichTransposed { left, right }
}

/// `symm(scale·(AX + BY) + XΦ + YᵀΨ) + scale·ε₁DDᵀ`.
fn lyapunov_core(model: &NqsModel, vars: &SynthesisVars, scale: f64, vt: &VertexTerms) -> AffineExpr {
    let n = model.dims.n;
    let m = model.dims.m;
    let e = AffineExpr::zeros(n, n)
        .with(vars.x, sandwich(&model.a * scale, eye(n)))
        .with(vars.y, sandwich(&model.b * scale, eye(n)))
        .with(vars.x, sandwich(eye(n), vt.phi.clone()))
        .with(vars.y, sandwich_t(eye(n), vt.psi.clone()));
    debug_assert_eq!(vt.psi.nrows(), m);
    let mut l = e.symm();
    if let Some(eps1) = vars.eps1 {
        l = l.with(eps1, LinearMap::Scale(&model.d * model.d.transpose() * scale));
    }
    l
}

/// `scale·Wᵀ = scale·(E1X + E2Y)ᵀ`.
fn w_transposed(model: &NqsModel, vars: &SynthesisVars, scale: f64) -> AffineExpr {
    let n = model.dims.n;
    AffineExpr::zeros(n, model.dims.nh)
        .with(vars.x, sandwich_t(eye(n) * scale, model.e1.transpose()))
        .with(vars.y, sandwich_t(eye(n) * scale, model.e2.transpose()))
}

/// `scale·Mᵀ` with `M = [R_1X + S_1Y; …; R_nX + S_nY]`.
fn m_transposed(model: &NqsModel, vars: &SynthesisVars, scale: f64) -> AffineExpr {
    let n = model.dims.n;
    AffineExpr::zeros(n, n * model.dims.nh)
        .with(vars.x, sandwich_t(eye(n) * scale, model.r_stack().transpose()))
        .with(vars.y, sandwich_t(eye(n) * scale, model.s_stack().transpose()))
}

fn scalar_block(var: VarId, coeff: Mat) -> AffineExpr {
    AffineExpr::zeros(coeff.nrows(), coeff.ncols()).with(var, LinearMap::Scale(coeff))
}

fn x_expr(vars: &SynthesisVars, n: usize, scale: f64) -> AffineExpr {
    AffineExpr::zeros(n, n).with(vars.x, sandwich(eye(n) * scale, eye(n)))
}

fn check_inputs(model: &NqsModel, polytope: &Polytope, bounds: &InputBounds) -> Result<()> {
    model.validate().into_result()?;
    if polytope.dim() != model.dims.n {
        return shape_err(format!(
            "polytope lives in R^{}, model state dimension is {}",
            polytope.dim(),
            model.dims.n
        ));
    }
    if bounds.u_max.len() != model.dims.m {
        return shape_err(format!(
            "u_max has {} entries, model has {} inputs",
            bounds.u_max.len(),
            model.dims.m
        ));
    }
    Ok(())
}

fn declare_vars(problem: &mut LmiProblem, model: &NqsModel) -> Result<SynthesisVars> {
    let n = model.dims.n;
    let x = problem.add_variable("X", VarKind::Symmetric { n })?;
    let y = problem.add_variable("Y", VarKind::Rectangular { rows: model.dims.m, cols: n })?;
    let (eps1, eps2) = if model.is_certain() {
        (None, None)
    } else {
        (
            Some(problem.add_variable("eps1", VarKind::Scalar)?),
            Some(problem.add_variable("eps2", VarKind::Scalar)?),
        )
    };
    Ok(SynthesisVars { x, y, eps1, eps2 })
}

fn add_common_bounds(
    problem: &mut LmiProblem,
    model: &NqsModel,
    vars: &SynthesisVars,
    bounds: &InputBounds,
    opts: &LmiOptions,
    prefix: &str,
) -> Result<()> {
    let n = model.dims.n;
    let m = model.dims.m;
    // [[U²max, Y], [Yᵀ, X]] ⪰ 0
    let mut d = AffineBlock::new(format!("{prefix}.input"), None, vec![m, n], Sense::PositiveSemidefinite, 0.0);
    d.set(0, 0, AffineExpr::constant(bounds.u_max_sq()));
    d.set(0, 1, AffineExpr::zeros(m, n).with(vars.y, sandwich(eye(m), eye(n))));
    d.set(1, 1, x_expr(vars, n, 1.0));
    problem.add_constraint(d)?;

    let mut xpd = AffineBlock::new("x_pd", None, vec![n], Sense::PositiveSemidefinite, opts.x_floor);
    xpd.set(0, 0, x_expr(vars, n, 1.0));
    problem.add_constraint(xpd)?;

    for (name, var) in [("eps1_pos", vars.eps1), ("eps2_pos", vars.eps2)] {
        if let Some(var) = var {
            let mut b = AffineBlock::new(name, None, vec![1], Sense::PositiveSemidefinite, opts.eps_floor);
            b.set(0, 0, scalar_block(var, eye(1)));
            problem.add_constraint(b)?;
        }
    }
    Ok(())
}

/// Precomputed `Q⁻¹`, `R⁻¹` for [`qgcc_vertex_block`].
#[derive(Debug, Clone)]
pub struct CostWeights {
    pub q_inv: Mat,
    pub r_inv: Mat,
}

impl CostWeights {
    pub fn new(q: &Mat, r: &Mat) -> Result<Self> {
        Ok(CostWeights {
            q_inv: spd_inverse(q, "Q", WEIGHT_MAX_COND)?,
            r_inv: spd_inverse(r, "R", WEIGHT_MAX_COND)?,
        })
    }
}

/// The guaranteed-cost Lyapunov block at one vertex `v`:
///
/// ```text
/// [ L      γX    γYᵀ   γWᵀ    γMᵀ    Γᵀ   ]
/// [ γX   -γQ⁻¹                            ]
/// [ γY          -γR⁻¹                     ]  ≺ 0
/// [ γW                -γε₁I               ]
/// [ γM                       -γε₂I        ]
/// [ Γ                              -γε₂I  ]
/// ```
///
/// with `L = γ symm(AX+BY) + γε₁DDᵀ + symm((F_iX + G_iY)ᵀv)_i` and
/// `Γ = ε₂(I_n ⊗ Dᵀv)`. The uncertainty rows are absent for a certain plant.
pub fn qgcc_vertex_block(
    model: &NqsModel,
    weights: &CostWeights,
    vars: &SynthesisVars,
    gamma: f64,
    vertex: &Vector,
    index: Option<usize>,
    margin: f64,
) -> AffineBlock {
    let n = model.dims.n;
    let m = model.dims.m;
    let nh = model.dims.nh;
    let nd = model.dims.nd;
    let vt = vertex_terms(model, vertex);
    let mut sizes = vec![n, n, m];
    if !model.is_certain() {
        sizes.extend([nh, n * nh, n * nd]);
    }
    let mut b = AffineBlock::new("qgcc.lyapunov", index, sizes, Sense::NegativeDefinite, margin);
    b.set(0, 0, lyapunov_core(model, vars, gamma, &vt));
    b.set(0, 1, x_expr(vars, n, gamma));
    b.set(0, 2, AffineExpr::zeros(n, m).with(vars.y, sandwich_t(eye(n) * gamma, eye(m))));
    b.set(1, 1, AffineExpr::constant(&weights.q_inv * -gamma));
    b.set(2, 2, AffineExpr::constant(&weights.r_inv * -gamma));
    if let (Some(eps1), Some(eps2)) = (vars.eps1, vars.eps2) {
        b.set(0, 3, w_transposed(model, vars, gamma));
        b.set(0, 4, m_transposed(model, vars, gamma));
        b.set(0, 5, scalar_block(eps2, vt.gamma_dir.transpose()));
        b.set(3, 3, scalar_block(eps1, eye(nh) * -gamma));
        b.set(4, 4, scalar_block(eps2, eye(n * nh) * -gamma));
        b.set(5, 5, scalar_block(eps2, eye(n * nd) * -gamma));
    }
    b
}

/// The ℒ₂-gain Lyapunov block at one vertex `v`, rows ordered
/// `(L, W, CX, M, Γ, Bw)`:
///
/// ```text
/// [ L   Wᵀ    XCᵀ   Mᵀ    Γᵀ    Bw ]
/// [ W  -ε₁I                        ]
/// [ CX        -I                   ]  ≺ 0
/// [ M               -ε₂I           ]
/// [ Γ                     -ε₂I     ]
/// [ Bwᵀ                         -I ]
/// ```
///
/// Uncertainty rows vanish for a certain plant and the last row for `nw = 0`.
pub fn gl2pc_vertex_block(
    model: &NqsModel,
    vars: &SynthesisVars,
    vertex: &Vector,
    index: Option<usize>,
    margin: f64,
) -> AffineBlock {
    let n = model.dims.n;
    let nz = model.dims.nz;
    let nh = model.dims.nh;
    let nd = model.dims.nd;
    let nw = model.dims.nw;
    let vt = vertex_terms(model, vertex);
    let uncertain = !model.is_certain();

    let mut sizes = vec![n];
    if uncertain {
        sizes.push(nh);
    }
    let cx = sizes.len();
    sizes.push(nz);
    if uncertain {
        sizes.extend([n * nh, n * nd]);
    }
    let bw = (nw > 0).then(|| {
        sizes.push(nw);
        sizes.len() - 1
    });

    let mut b = AffineBlock::new("gl2.lyapunov", index, sizes, Sense::NegativeDefinite, margin);
    b.set(0, 0, lyapunov_core(model, vars, 1.0, &vt));
    b.set(0, cx, AffineExpr::zeros(n, nz).with(vars.x, sandwich_t(eye(n), model.c.transpose())));
    b.set(cx, cx, AffineExpr::constant(-eye(nz)));
    if let (Some(eps1), Some(eps2)) = (vars.eps1, vars.eps2) {
        b.set(0, 1, w_transposed(model, vars, 1.0));
        b.set(1, 1, scalar_block(eps1, -eye(nh)));
        b.set(0, cx + 1, m_transposed(model, vars, 1.0));
        b.set(0, cx + 2, scalar_block(eps2, vt.gamma_dir.transpose()));
        b.set(cx + 1, cx + 1, scalar_block(eps2, -eye(n * nh)));
        b.set(cx + 2, cx + 2, scalar_block(eps2, -eye(n * nd)));
    }
    if let Some(k) = bw {
        b.set(0, k, AffineExpr::constant(model.bw.clone()));
        b.set(k, k, AffineExpr::constant(-eye(nw)));
    }
    b
}

/// `[[1, s·aᵀX], [s·Xa, X]] ⪰ 0`, i.e. `s²·aᵀXa ≤ 1`.
fn halfspace_block(label: &str, vars: &SynthesisVars, a: &Vector, scale: f64, index: usize) -> AffineBlock {
    let n = a.len();
    let mut b = AffineBlock::new(label, Some(index), vec![1, n], Sense::PositiveSemidefinite, 0.0);
    b.set(0, 0, AffineExpr::constant(eye(1)));
    b.set(0, 1, AffineExpr::zeros(1, n).with(vars.x, sandwich(row(a) * scale, eye(n))));
    b.set(1, 1, x_expr(vars, n, 1.0));
    b
}

/// Guaranteed-cost conditions for a fixed `γ ∈ (0, 1)` with objective
/// `min trace(X)`.
pub fn build_qgcc_lmis(
    model: &NqsModel,
    polytope: &Polytope,
    bounds: &InputBounds,
    q: &Mat,
    r: &Mat,
    gamma: f64,
) -> Result<SynthesisLmi> {
    build_qgcc_lmis_with(model, polytope, bounds, q, r, gamma, &LmiOptions::default())
}

pub fn build_qgcc_lmis_with(
    model: &NqsModel,
    polytope: &Polytope,
    bounds: &InputBounds,
    q: &Mat,
    r: &Mat,
    gamma: f64,
    opts: &LmiOptions,
) -> Result<SynthesisLmi> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    check_inputs(model, polytope, bounds)?;
    let n = model.dims.n;
    if q.shape() != (n, n) || r.shape() != (model.dims.m, model.dims.m) {
        return shape_err("Q must be n×n and R must be m×m");
    }
    let weights = CostWeights::new(q, r)?;

    let mut problem = LmiProblem::new();
    let vars = declare_vars(&mut problem, model)?;

    for (k, a) in polytope.halfspaces.iter().enumerate() {
        problem.add_constraint(halfspace_block("qgcc.halfspace", &vars, a, gamma, k))?;
    }
    for (i, v) in polytope.vertices.iter().enumerate() {
        // [[1, vᵀ], [v, X]] ⪰ 0
        let mut c = AffineBlock::new("qgcc.vertex", Some(i), vec![1, n], Sense::PositiveSemidefinite, 0.0);
        c.set(0, 0, AffineExpr::constant(eye(1)));
        c.set(0, 1, AffineExpr::constant(row(v)));
        c.set(1, 1, x_expr(&vars, n, 1.0));
        problem.add_constraint(c)?;
    }
    add_common_bounds(&mut problem, model, &vars, bounds, opts, "qgcc")?;
    let margin = opts.strict(model);
    for (i, v) in polytope.vertices.iter().enumerate() {
        problem.add_constraint(qgcc_vertex_block(model, &weights, &vars, gamma, v, Some(i), margin))?;
    }
    problem.objective = Objective::trace(vars.x, n, Direction::Minimize);
    Ok(SynthesisLmi {
        problem,
        vars,
        gamma: Some(gamma),
    })
}

/// ℒ₂-gain conditions over `𝒫∞` with objective `min trace(X)`; the caller
/// may flip the direction.
pub fn build_gl2pc_lmis(model: &NqsModel, polytope_inf: &Polytope, bounds: &InputBounds) -> Result<SynthesisLmi> {
    build_gl2pc_lmis_with(model, polytope_inf, bounds, &LmiOptions::default())
}

pub fn build_gl2pc_lmis_with(
    model: &NqsModel,
    polytope_inf: &Polytope,
    bounds: &InputBounds,
    opts: &LmiOptions,
) -> Result<SynthesisLmi> {
    check_inputs(model, polytope_inf, bounds)?;
    let n = model.dims.n;
    let mut problem = LmiProblem::new();
    let vars = declare_vars(&mut problem, model)?;
    for (k, a) in polytope_inf.halfspaces.iter().enumerate() {
        problem.add_constraint(halfspace_block("gl2.halfspace", &vars, a, 1.0, k))?;
    }
    add_common_bounds(&mut problem, model, &vars, bounds, opts, "gl2")?;
    let margin = opts.strict(model);
    for (i, v) in polytope_inf.vertices.iter().enumerate() {
        problem.add_constraint(gl2pc_vertex_block(model, &vars, v, Some(i), margin))?;
    }
    problem.objective = Objective::trace(vars.x, n, Direction::Minimize);
    Ok(SynthesisLmi {
        problem,
        vars,
        gamma: None,
    })
}

/// Certificate data entering the pointwise Lyapunov expansions.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovData<'a> {
    pub p: &'a Mat,
    pub k: &'a Controller,
    pub eps1: f64,
    pub eps2: f64,
}

fn check_lyapunov_data(model: &NqsModel, data: &LyapunovData<'_>, x: &Vector) -> Result<()> {
    let n = model.dims.n;
    if data.p.shape() != (n, n) || data.k.k.shape() != (model.dims.m, n) || x.len() != n {
        return shape_err("P must be n×n, K m×n and x of length n");
    }
    match spd_condition(data.p) {
        Some(c) if c <= P_MAX_COND => {}
        Some(c) => {
            return Err(Error::IllConditioned {
                what: "P (singular)".into(),
                cond: c,
            })
        }
        None => return Err(Error::NotPositiveDefinite("P".into())),
    }
    if !(data.eps1 > 0.0 && data.eps2 > 0.0) {
        return Err(Error::InvalidArgument("eps1 and eps2 must be positive".into()));
    }
    Ok(())
}

/// Terms shared by both pointwise conditions: `2xᵀP ẋ_nominal` plus the
/// four uncertainty majorants.
fn lyapunov_derivative_bound(model: &NqsModel, data: &LyapunovData<'_>, x: &Vector) -> f64 {
    let n = model.dims.n;
    let kx = &data.k.k * x;
    let px = data.p * x;
    let mut f_cl = Vector::zeros(n);
    for i in 0..n {
        f_cl[i] = x.dot(&(&model.f[i] * x)) + x.dot(&(&model.g[i] * &kx));
    }
    let mut val = 2.0 * px.dot(&(&model.a * x + &model.b * &kx)) + 2.0 * px.dot(&f_cl);
    if !model.is_certain() {
        let dt_px = model.d.transpose() * &px;
        let wx = &model.e1 * x + &model.e2 * &kx;
        let dtx = model.d.transpose() * x;
        let mx: f64 = (0..n)
            .map(|i| (&model.r[i] * x + &model.s[i] * &kx).norm_squared())
            .sum();
        val += data.eps1 * dt_px.norm_squared()
            + wx.norm_squared() / data.eps1
            + data.eps2 * dtx.norm_squared() * px.norm_squared()
            + mx / data.eps2;
    }
    val
}

/// Left-hand side of the guaranteed-cost Lyapunov condition at `x`:
///
/// ```text
/// xᵀ{Q + KᵀRK + symm(P(A+BK) + N(x)P)}x + ε₁xᵀPDDᵀPx + ε₁⁻¹|(E1+E2K)x|²
///   + ε₂|Dᵀx|²|Px|² + ε₂⁻¹ Σ|(R_i+S_iK)x|²
/// ```
///
/// with `N(x) = [(F_1+G_1K)ᵀx … (F_n+G_nK)ᵀx]`. Negative means
/// `v̇ < −xᵀ(Q + KᵀRK)x` holds at `x` for every admissible `H`.
pub fn expand_qgcc_condition(
    model: &NqsModel,
    q: &Mat,
    r: &Mat,
    data: &LyapunovData<'_>,
    x: &Vector,
) -> Result<f64> {
    check_lyapunov_data(model, data, x)?;
    let kx = &data.k.k * x;
    Ok(x.dot(&(q * x)) + kx.dot(&(r * &kx)) + lyapunov_derivative_bound(model, data, x))
}

/// Left-hand side of the ℒ₂-gain condition at `(x, w)`: the guaranteed-cost
/// expansion with `CᵀC` in place of `Q + KᵀRK`, plus `2xᵀPBw w − wᵀw`.
pub fn expand_gl2pc_condition(model: &NqsModel, data: &LyapunovData<'_>, x: &Vector, w: &Vector) -> Result<f64> {
    check_lyapunov_data(model, data, x)?;
    if w.len() != model.dims.nw {
        return shape_err("w has the wrong length");
    }
    let cx = &model.c * x;
    let mut val = cx.norm_squared() + lyapunov_derivative_bound(model, data, x) - w.norm_squared();
    if model.dims.nw > 0 {
        val += 2.0 * (data.p * x).dot(&(&model.bw * w));
    }
    Ok(val)
}

/// The matrix whose quadratic form at `x` is [`expand_qgcc_condition`]:
///
/// ```text
/// Q + KᵀRK + symm(P(A+BK)) + symm(N(x)P) + ε₁PDDᵀP
///   + ε₁⁻¹(E1+E2K)ᵀ(E1+E2K) + ε₂|Dᵀx|²P² + ε₂⁻¹ M_Kᵀ M_K
/// ```
///
/// It is congruent (through `X = P⁻¹`) to the Schur complement of the
/// guaranteed-cost Lyapunov block evaluated at the point `x`.
pub fn qgcc_condition_matrix(
    model: &NqsModel,
    q: &Mat,
    r: &Mat,
    data: &LyapunovData<'_>,
    x: &Vector,
) -> Result<Mat> {
    check_lyapunov_data(model, data, x)?;
    let n = model.dims.n;
    let k = &data.k.k;
    let p = data.p;
    let mut nx = Mat::zeros(n, n);
    for i in 0..n {
        nx.set_column(i, &((&model.f[i] + &model.g[i] * k).transpose() * x));
    }
    let mut out = q + k.transpose() * r * k
        + crate::linalg::symm(&(p * (&model.a + &model.b * k)))
        + crate::linalg::symm(&(&nx * p));
    if !model.is_certain() {
        let pd = p * &model.d;
        let w = &model.e1 + &model.e2 * k;
        let mk = vstack(
            &(0..n).map(|i| &model.r[i] + &model.s[i] * k).collect::<Vec<_>>(),
            n,
        );
        let dtx = (model.d.transpose() * x).norm_squared();
        out += &pd * pd.transpose() * data.eps1
            + w.transpose() * &w / data.eps1
            + p * p * (data.eps2 * dtx)
            + mk.transpose() * &mk / data.eps2;
    }
    Ok(symmetrize(&out))
}
