//! Uncertain nonlinear quadratic plants, their validation and evaluation.
//!
//! The state equation is
//!
//! ```text
//! ẋ = (A + ΔA) x + f(x) + Δf(x) + (B + ΔB) u + g(x, u) + Δg(x, u) + Bw w
//! z = C x
//! ```
//!
//! where component `i` of `f(x)` is `xᵀ F_i x`, component `i` of `g(x, u)` is
//! `xᵀ G_i u`, and every perturbation is factored through a single matrix `H`
//! with `HᵀH ≤ I`:
//!
//! ```text
//! [ΔA ΔB ΔF_1 … ΔF_n ΔG_1 … ΔG_n] = D H [E1 E2 R_1 … R_n S_1 … S_n]
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{all_finite, spectral_norm, Mat, Vector};

/// Dimensions of an [`NqsModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// State dimension.
    pub n: usize,
    /// Input dimension.
    pub m: usize,
    /// Controlled-output dimension.
    pub nz: usize,
    /// Disturbance dimension (may be 0).
    pub nw: usize,
    /// Columns of `D`, i.e. rows of `H` (0 for a certain plant).
    pub nd: usize,
    /// Rows of `E1`, `E2`, `R_i`, `S_i`, i.e. columns of `H` (0 for a certain plant).
    pub nh: usize,
}

impl ModelDims {
    pub fn is_certain(&self) -> bool {
        self.nd == 0 || self.nh == 0
    }
}

/// An uncertain nonlinear quadratic system.
#[derive(Debug, Clone, PartialEq)]
pub struct NqsModel {
    pub dims: ModelDims,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub bw: Mat,
    /// `F_1 … F_n`, each `n×n`.
    pub f: Vec<Mat>,
    /// `G_1 … G_n`, each `n×m`.
    pub g: Vec<Mat>,
    pub d: Mat,
    pub e1: Mat,
    pub e2: Mat,
    /// `R_1 … R_n`, each `nh×n`.
    pub r: Vec<Mat>,
    /// `S_1 … S_n`, each `nh×m`.
    pub s: Vec<Mat>,
}

impl NqsModel {
    /// A plant without uncertainty. `bw` may have zero columns.
    pub fn certain(a: Mat, b: Mat, c: Mat, bw: Mat, f: Vec<Mat>, g: Vec<Mat>) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        let dims = ModelDims {
            n,
            m,
            nz: c.nrows(),
            nw: bw.ncols(),
            nd: 0,
            nh: 0,
        };
        NqsModel {
            dims,
            a,
            b,
            c,
            bw,
            f,
            g,
            d: Mat::zeros(n, 0),
            e1: Mat::zeros(0, n),
            e2: Mat::zeros(0, m),
            r: vec![Mat::zeros(0, n); n],
            s: vec![Mat::zeros(0, m); n],
        }
    }

    /// Attaches the norm-bounded uncertainty structure `D H [E1 E2 R_i S_i]`.
    pub fn with_uncertainty(mut self, d: Mat, e1: Mat, e2: Mat, r: Vec<Mat>, s: Vec<Mat>) -> Self {
        self.dims.nd = d.ncols();
        self.dims.nh = e1.nrows();
        if self.dims.is_certain() {
            let (n, m) = (self.dims.n, self.dims.m);
            self.dims.nd = 0;
            self.dims.nh = 0;
            self.d = Mat::zeros(n, 0);
            self.e1 = Mat::zeros(0, n);
            self.e2 = Mat::zeros(0, m);
            self.r = vec![Mat::zeros(0, n); n];
            self.s = vec![Mat::zeros(0, m); n];
            return self;
        }
        self.d = d;
        self.e1 = e1;
        self.e2 = e2;
        self.r = r;
        self.s = s;
        self
    }

    pub fn is_certain(&self) -> bool {
        self.dims.is_certain()
    }

    /// Checks every structural invariant and returns the list of violations.
    pub fn validate(&self) -> ValidationReport {
        validate_model(self)
    }

    /// The certain plant obtained by folding a fixed `H` into the nominal
    /// matrices (`A + DHE1`, `F_i + DHR_i`, ...).
    pub fn perturbed(&self, h: &UncertaintySample) -> Result<NqsModel> {
        if self.is_certain() {
            return Ok(self.clone());
        }
        self.check_h(h)?;
        let dh = &self.d * &h.h;
        let f = self
            .f
            .iter()
            .zip(&self.r)
            .map(|(fi, ri)| fi + &dh * ri)
            .collect();
        let g = self
            .g
            .iter()
            .zip(&self.s)
            .map(|(gi, si)| gi + &dh * si)
            .collect();
        Ok(NqsModel::certain(
            &self.a + &dh * &self.e1,
            &self.b + &dh * &self.e2,
            self.c.clone(),
            self.bw.clone(),
            f,
            g,
        ))
    }

    /// Stacked `[R_1; …; R_n]` (`n·nh × n`).
    pub fn r_stack(&self) -> Mat {
        crate::linalg::vstack(&self.r, self.dims.n)
    }

    /// Stacked `[S_1; …; S_n]` (`n·nh × m`).
    pub fn s_stack(&self) -> Mat {
        crate::linalg::vstack(&self.s, self.dims.m)
    }

    pub(crate) fn check_h(&self, h: &UncertaintySample) -> Result<()> {
        let ModelDims { nd, nh, .. } = self.dims;
        if h.h.nrows() != nd || h.h.ncols() != nh {
            return shape_err(format!(
                "H is {}x{}, model expects {nd}x{nh}",
                h.h.nrows(),
                h.h.ncols()
            ));
        }
        Ok(())
    }

    fn check_vec(&self, name: &str, v: &Vector, len: usize) -> Result<()> {
        if v.len() != len {
            return shape_err(format!("{name} has length {}, expected {len}", v.len()));
        }
        Ok(())
    }
}

/// One problem found by [`validate_model`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Result of [`validate_model`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }

    /// Converts a non-empty report into an [`Error::Schema`].
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Schema(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "model is valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

pub fn validate_model(model: &NqsModel) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let ModelDims {
        n,
        m,
        nz,
        nw,
        nd,
        nh,
    } = model.dims;

    if n == 0 {
        rep.push("n", "state dimension must be at least 1");
    }
    if m == 0 {
        rep.push("m", "input dimension must be at least 1");
    }
    if nz == 0 {
        rep.push("nz", "output dimension must be at least 1");
    }

    let shape = |rep: &mut ValidationReport, name: &str, mat: &Mat, r: usize, c: usize| {
        if mat.nrows() != r || mat.ncols() != c {
            rep.push(
                name,
                format!("{name} is {}x{}, expected {r}x{c}", mat.nrows(), mat.ncols()),
            );
        }
        if !all_finite(mat) {
            rep.push(name, format!("non-finite entry in {name}"));
        }
    };
    shape(&mut rep, "A", &model.a, n, n);
    shape(&mut rep, "B", &model.b, n, m);
    shape(&mut rep, "C", &model.c, nz, n);
    shape(&mut rep, "Bw", &model.bw, n, nw);
    shape(&mut rep, "D", &model.d, n, nd);
    shape(&mut rep, "E1", &model.e1, nh, n);
    shape(&mut rep, "E2", &model.e2, nh, m);

    let lists: [(&str, &Vec<Mat>, usize, usize); 4] = [
        ("F", &model.f, n, n),
        ("G", &model.g, n, m),
        ("R", &model.r, nh, n),
        ("S", &model.s, nh, m),
    ];
    for (name, list, r, c) in lists {
        if list.len() != n {
            rep.push(name, format!("{name} list length {} ≠ n = {n}", list.len()));
        }
        for (i, mat) in list.iter().enumerate() {
            shape(&mut rep, &format!("{name}[{}]", i + 1), mat, r, c);
        }
    }

    if (nd == 0) != (nh == 0) {
        rep.push(
            "D",
            format!("uncertainty channel must be fully present or absent (nd = {nd}, nh = {nh})"),
        );
    }
    rep
}

/// Peak bounds `|u_i| ≤ u_max[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub u_max: Vector,
}

impl InputBounds {
    pub fn new(u_max: Vector) -> Result<Self> {
        if u_max.is_empty() {
            return Err(Error::InvalidArgument("u_max must be non-empty".into()));
        }
        if u_max.iter().any(|&u| !(u.is_finite() && u > 0.0)) {
            return Err(Error::InvalidArgument(
                "every u_max entry must be finite and strictly positive".into(),
            ));
        }
        Ok(InputBounds { u_max })
    }

    /// `U_max² = diag(u_1,max², …, u_m,max²)`.
    pub fn u_max_sq(&self) -> Mat {
        Mat::from_diagonal(&self.u_max.map(|u| u * u))
    }
}

/// A realization of the uncertainty, `nd×nh` with `‖H‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySample {
    pub h: Mat,
}

impl UncertaintySample {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(h: Mat) -> Result<Self> {
        if !all_finite(&h) {
            return Err(Error::InvalidArgument("non-finite entry in H".into()));
        }
        let norm = spectral_norm(&h);
        if norm > 1.0 + Self::NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "uncertainty sample has ‖H‖ = {norm} > 1"
            )));
        }
        Ok(UncertaintySample { h })
    }

    pub fn zero(dims: &ModelDims) -> Self {
        UncertaintySample {
            h: Mat::zeros(dims.nd, dims.nh),
        }
    }
}

/// Linear state feedback `u = K x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub k: Mat,
}

impl Controller {
    pub fn new(k: Mat) -> Result<Self> {
        if !all_finite(&k) {
            return Err(Error::InvalidArgument("non-finite entry in K".into()));
        }
        Ok(Controller { k })
    }

    pub fn zero(dims: &ModelDims) -> Self {
        Controller {
            k: Mat::zeros(dims.m, dims.n),
        }
    }
}

/// Vector with component `i` equal to `xᵀ F_i v`.
pub fn eval_quadratic(f: &[Mat], x: &Vector, v: &Vector) -> Result<Vector> {
    let mut out = Vector::zeros(f.len());
    for (i, fi) in f.iter().enumerate() {
        if fi.nrows() != x.len() || fi.ncols() != v.len() {
            return shape_err(format!(
                "F[{}] is {}x{}, cannot pair with x ({}) and v ({})",
                i + 1,
                fi.nrows(),
                fi.ncols(),
                x.len(),
                v.len()
            ));
        }
        out[i] = x.dot(&(fi * v));
    }
    Ok(out)
}

/// Open-loop vector field for given input, disturbance and uncertainty.
pub fn eval_dynamics(
    model: &NqsModel,
    x: &Vector,
    u: &Vector,
    w: &Vector,
    h: &UncertaintySample,
) -> Result<Vector> {
    let ModelDims { n, m, nw, .. } = model.dims;
    model.check_vec("x", x, n)?;
    model.check_vec("u", u, m)?;
    model.check_vec("w", w, nw)?;
    model.check_h(h)?;

    let mut dx = &model.a * x + &model.b * u;
    dx += eval_quadratic(&model.f, x, x)?;
    dx += eval_quadratic(&model.g, x, u)?;
    if nw > 0 {
        dx += &model.bw * w;
    }
    if !model.is_certain() {
        // ΔA x + ΔB u = D H (E1 x + E2 u)
        let lin = &model.e1 * x + &model.e2 * u;
        dx += &model.d * (&h.h * lin);
        // (Δf + Δg)_i = (Dᵀx)ᵀ H (R_i x + S_i u)
        let dtx = model.d.transpose() * x;
        for i in 0..n {
            let ri = &model.r[i] * x + &model.s[i] * u;
            dx[i] += dtx.dot(&(&h.h * ri));
        }
    }
    Ok(dx)
}

/// Closed-loop vector field with `u = K x`.
pub fn closed_loop_dynamics(
    model: &NqsModel,
    k: &Controller,
    x: &Vector,
    w: &Vector,
    h: &UncertaintySample,
) -> Result<Vector> {
    if k.k.nrows() != model.dims.m || k.k.ncols() != model.dims.n {
        return shape_err(format!(
            "K is {}x{}, expected {}x{}",
            k.k.nrows(),
            k.k.ncols(),
            model.dims.m,
            model.dims.n
        ));
    }
    let u = &k.k * x;
    eval_dynamics(model, x, &u, w, h)
}

/// The closed loop for one fixed `(K, H)` flattened into
/// `ẋ = A_cl x + [xᵀT_i x]_i + Bw w` for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledClosedLoop {
    n: usize,
    nw: usize,
    /// Row-major `n×n`.
    a_cl: Vec<f64>,
    /// `n` row-major `n×n` blocks.
    quad: Vec<f64>,
    /// Row-major `n×nw`.
    bw: Vec<f64>,
}

impl CompiledClosedLoop {
    pub fn new(model: &NqsModel, k: &Controller, h: &UncertaintySample) -> Result<Self> {
        let ModelDims { n, m, nw, .. } = model.dims;
        if k.k.nrows() != m || k.k.ncols() != n {
            return shape_err("K has the wrong shape");
        }
        let plant = model.perturbed(h)?;
        let a_cl = &plant.a + &plant.b * &k.k;
        let mut quad = Vec::with_capacity(n * n * n);
        for i in 0..n {
            let t = &plant.f[i] + &plant.g[i] * &k.k;
            for r in 0..n {
                for c in 0..n {
                    quad.push(t[(r, c)]);
                }
            }
        }
        let flat = |m: &Mat| {
            let mut v = Vec::with_capacity(m.len());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    v.push(m[(r, c)]);
                }
            }
            v
        };
        Ok(CompiledClosedLoop {
            n,
            nw,
            a_cl: flat(&a_cl),
            quad,
            bw: flat(&plant.bw),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Writes `ẋ` into `out`.
    #[inline]
    pub fn eval(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, slot) in out.iter_mut().enumerate().take(n) {
            let row = &self.a_cl[i * n..(i + 1) * n];
            let mut acc: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let t = &self.quad[i * n * n..(i + 1) * n * n];
            for r in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += t[r * n + c] * x[c];
                }
                acc += x[r] * s;
            }
            let bw = &self.bw[i * self.nw..(i + 1) * self.nw];
            acc += bw.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            *slot = acc;
        }
    }
}
