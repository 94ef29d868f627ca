//! Robust state-feedback synthesis for nonlinear quadratic systems with
//! norm-bounded uncertainty.
//!
//! The crate is layered bottom-up:
//!
//! - [`model`]: plant description, validation and closed-loop evaluation;
//! - [`geometry`]: polytopes, ellipsoids and inclusion tests;
//! - [`lmi`]: affine block matrix inequalities and the two design problems;
//! - [`sdp`]: conic standard form and the solver backend;
//! - [`synthesis`]: `γ` line search, certificate extraction and audit;
//! - [`verify`]: simulation, quadrature and sampling audits;
//! - [`io`]: JSON file formats.

pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Ellipsoid, Polytope};
pub use linalg::{Mat, Vector};
pub use lmi::{Direction, LmiProblem};
pub use model::{Controller, InputBounds, ModelDims, NqsModel, UncertaintySample};
pub use sdp::{SolveResult, SolveStatus, SolverSettings};
pub use synthesis::{
    Certificate, CertificateKind, CheckResult, GammaGrid, GammaSearchOptions, Gl2Spec, QgccSpec, Refine,
    SynthesisOutcome,
};
pub use verify::{AuditConfig, DisturbanceSignal, Trajectory, UncertaintySchedule, VerificationReport};
