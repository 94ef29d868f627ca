//! Polytopes in dual (vertex + halfspace) form and Lyapunov level-set
//! ellipsoids `{x : xᵀPx ≤ 1}`, with the inclusion tests used to certify
//! `𝒫 ⊂ 𝓔 ⊂ ρ𝒫` and `𝓔 ⊂ 𝒫∞`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{is_symmetric, spd_condition, spd_inverse, Mat, Vector};

/// Absolute tolerance of the inclusion tests.
pub const INCLUSION_TOL: f64 = 1e-9;
const VERTEX_TOL: f64 = 1e-9;
const TIGHT_TOL: f64 = 1e-6;
const MAX_BOX_DIM: usize = 20;
const MAX_ELLIPSOID_COND: f64 = 1e12;

/// `conv{x_(1), …, x_(r)} = {x : a_kᵀx ≤ 1, k = 1..q}`.
///
/// Both descriptions must be supplied; no hull or facet enumeration is
/// performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub vertices: Vec<Vector>,
    pub halfspaces: Vec<Vector>,
}

impl Polytope {
    pub fn new(vertices: Vec<Vector>, halfspaces: Vec<Vector>) -> Result<Self> {
        let p = Polytope {
            vertices,
            halfspaces,
        };
        p.check()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.vertices.first().map_or(0, |v| v.len())
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("polytope needs at least one vertex".into()));
        }
        if self.vertices.iter().chain(&self.halfspaces).any(|v| v.len() != n) {
            return shape_err("polytope vertices and halfspaces must share one dimension");
        }
        if self
            .vertices
            .iter()
            .chain(&self.halfspaces)
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite polytope data".into()));
        }
        let min_count = if n == 1 { 2 } else { n + 1 };
        if self.vertices.len() < min_count {
            return Err(Error::InvalidArgument(format!(
                "polytope in R^{n} needs at least {min_count} vertices, got {}",
                self.vertices.len()
            )));
        }
        if self.halfspaces.len() < min_count {
            return Err(Error::InvalidArgument(format!(
                "polytope in R^{n} needs at least {min_count} halfspaces, got {}",
                self.halfspaces.len()
            )));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            for (k, a) in self.halfspaces.iter().enumerate() {
                let val = a.dot(v);
                if val > 1.0 + VERTEX_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "vertex {i} violates halfspace {k}: a·x = {val}"
                    )));
                }
            }
        }
        for (k, a) in self.halfspaces.iter().enumerate() {
            let best = self
                .vertices
                .iter()
                .map(|v| a.dot(v))
                .fold(f64::NEG_INFINITY, f64::max);
            if (best - 1.0).abs() > TIGHT_TOL {
                log::warn!("halfspace {k} is not tight at any vertex (max a·x = {best})");
            }
        }
        Ok(())
    }

    /// Membership through the halfspace description.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.halfspaces.iter().all(|a| a.dot(x) <= 1.0 + tol)
    }

    /// `ρ𝒫`: vertices multiplied by `ρ`, halfspace normals divided by `ρ`.
    pub fn scale(&self, rho: f64) -> Result<Polytope> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {rho}")));
        }
        Ok(Polytope {
            vertices: self.vertices.iter().map(|v| v * rho).collect(),
            halfspaces: self.halfspaces.iter().map(|a| a / rho).collect(),
        })
    }
}

/// The box `∏[-b_i, b_i]` with `2ⁿ` vertices and `2n` halfspaces `±e_i/b_i`.
///
/// Vertex `j` has coordinate `i` equal to `+b_i` when bit `i` of `j` is set.
pub fn symmetric_box(bounds: &[f64]) -> Result<Polytope> {
    let n = bounds.len();
    if n == 0 {
        return Err(Error::InvalidArgument("box needs at least one bound".into()));
    }
    if n > MAX_BOX_DIM {
        return Err(Error::InvalidArgument(format!(
            "box dimension {n} exceeds {MAX_BOX_DIM} (2^n vertices)"
        )));
    }
    if bounds.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
        return Err(Error::InvalidArgument("box bounds must be positive".into()));
    }
    let vertices = (0..1usize << n)
        .map(|j| Vector::from_fn(n, |i, _| if j >> i & 1 == 1 { bounds[i] } else { -bounds[i] }))
        .collect();
    let mut halfspaces = Vec::with_capacity(2 * n);
    for (i, &b) in bounds.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut a = Vector::zeros(n);
            a[i] = sign / b;
            halfspaces.push(a);
        }
    }
    Polytope::new(vertices, halfspaces)
}

/// `{x : xᵀPx ≤ 1}` with `P` symmetric positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub p: Mat,
}

impl Ellipsoid {
    pub fn new(p: Mat) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return shape_err("ellipsoid matrix must be square and non-empty");
        }
        if !is_symmetric(&p, 1e-12 * (1.0 + p.amax())) {
            return Err(Error::InvalidArgument("ellipsoid matrix is not symmetric".into()));
        }
        if spd_condition(&p).is_none() {
            return Err(Error::NotPositiveDefinite("ellipsoid matrix".into()));
        }
        Ok(Ellipsoid { p })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn level(&self, x: &Vector) -> f64 {
        x.dot(&(&self.p * x))
    }
}

/// `max_i x_(i)ᵀ P x_(i)`; the polytope lies in the ellipsoid iff this is ≤ 1.
pub fn max_vertex_level(e: &Ellipsoid, p: &Polytope) -> Result<f64> {
    if e.dim() != p.dim() {
        return shape_err("ellipsoid and polytope dimensions differ");
    }
    Ok(p.vertices.iter().map(|v| e.level(v)).fold(f64::NEG_INFINITY, f64::max))
}

/// `max_k a_kᵀ P⁻¹ a_k`; the ellipsoid lies in the polytope iff this is ≤ 1.
pub fn max_support_level(p: &Polytope, e: &Ellipsoid) -> Result<f64> {
    if e.dim() != p.dim() {
        return shape_err("ellipsoid and polytope dimensions differ");
    }
    let p_inv = spd_inverse(&e.p, "ellipsoid", MAX_ELLIPSOID_COND)?;
    Ok(p.halfspaces
        .iter()
        .map(|a| a.dot(&(&p_inv * a)))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Vertex test `x_(i)ᵀ P x_(i) ≤ 1 + tol` for every vertex.
pub fn ellipsoid_contains_polytope(e: &Ellipsoid, p: &Polytope) -> bool {
    max_vertex_level(e, p).is_ok_and(|v| v <= 1.0 + INCLUSION_TOL)
}

/// Support test `a_kᵀ P⁻¹ a_k ≤ 1 + tol` for every halfspace.
pub fn polytope_contains_ellipsoid(p: &Polytope, e: &Ellipsoid) -> Result<bool> {
    Ok(max_support_level(p, e)? <= 1.0 + INCLUSION_TOL)
}
