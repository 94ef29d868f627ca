//! JSON file formats for models, polytopes, matrices and certificates.
//!
//! Matrices are nested row lists. `docs/model_schema.md` describes each
//! format with examples.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{symmetric_box, Polytope};
use crate::linalg::{to_rows, Mat, Vector};
use crate::lmi::Direction;
use crate::model::NqsModel;
use crate::sdp::SolveResult;
use crate::synthesis::{Certificate, CertificateKind, CheckResult, GammaLogEntry};

pub type Rows = Vec<Vec<f64>>;

pub const CERTIFICATE_FORMAT: &str = "nqs-certificate/1";

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

/// Builds a matrix from rows. `cols_if_empty` fixes the column count of a
/// matrix given with no rows.
pub fn mat_from_rows(rows: &Rows, name: &str, cols_if_empty: usize) -> Result<Mat> {
    let cols = rows.first().map_or(cols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(schema(format!("`{name}` has rows of different lengths")));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyFile {
    #[serde(rename = "D")]
    pub d: Rows,
    #[serde(rename = "E1")]
    pub e1: Rows,
    #[serde(rename = "E2", default, skip_serializing_if = "Option::is_none")]
    pub e2: Option<Rows>,
    #[serde(rename = "R")]
    pub r: Vec<Rows>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Rows>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "Bw", default, skip_serializing_if = "Option::is_none")]
    pub bw: Option<Rows>,
    #[serde(rename = "F")]
    pub f: Vec<Rows>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Rows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyFile>,
}

impl ModelFile {
    /// Converts to a model. Ragged rows are schema errors; dimension
    /// mismatches between matrices are left to [`NqsModel::validate`].
    pub fn to_model(&self) -> Result<NqsModel> {
        let n = self.a.len();
        let a = mat_from_rows(&self.a, "A", n)?;
        let b = mat_from_rows(&self.b, "B", 0)?;
        let m = b.ncols();
        let c = mat_from_rows(&self.c, "C", n)?;
        let bw = match &self.bw {
            Some(rows) => mat_from_rows(rows, "Bw", 0)?,
            None => Mat::zeros(n, 0),
        };
        let list = |mats: &[Rows], name: &str, cols: usize| -> Result<Vec<Mat>> {
            mats.iter()
                .enumerate()
                .map(|(i, r)| mat_from_rows(r, &format!("{name}[{i}]"), cols))
                .collect()
        };
        let f = list(&self.f, "F", n)?;
        let g = match &self.g {
            Some(g) => list(g, "G", m)?,
            None => vec![Mat::zeros(n, m); n],
        };
        let model = NqsModel::certain(a, b, c, bw, f, g);
        let Some(u) = &self.uncertainty else { return Ok(model) };
        let d = mat_from_rows(&u.d, "D", 0)?;
        let e1 = mat_from_rows(&u.e1, "E1", n)?;
        let nh = e1.nrows();
        let e2 = match &u.e2 {
            Some(rows) => mat_from_rows(rows, "E2", m)?,
            None => Mat::zeros(nh, m),
        };
        let r = list(&u.r, "R", n)?;
        let s = match &u.s {
            Some(s) => list(s, "S", m)?,
            None => vec![Mat::zeros(nh, m); n],
        };
        Ok(model.with_uncertainty(d, e1, e2, r, s))
    }

    pub fn from_model(model: &NqsModel) -> Self {
        let list = |v: &[Mat]| v.iter().map(to_rows).collect::<Vec<_>>();
        ModelFile {
            description: None,
            a: to_rows(&model.a),
            b: to_rows(&model.b),
            c: to_rows(&model.c),
            bw: Some(to_rows(&model.bw)),
            f: list(&model.f),
            g: Some(list(&model.g)),
            uncertainty: (!model.is_certain()).then(|| UncertaintyFile {
                d: to_rows(&model.d),
                e1: to_rows(&model.e1),
                e2: Some(to_rows(&model.e2)),
                r: list(&model.r),
                s: Some(list(&model.s)),
            }),
        }
    }
}

/// A polytope given either as a symmetric box `{"box": [b1, …]}` or by its
/// vertices and halfspace normals `aᵀx ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PolytopeFile {
    Box {
        #[serde(rename = "box")]
        bounds: Vec<f64>,
    },
    Explicit { vertices: Rows, halfspaces: Rows },
}

impl PolytopeFile {
    pub fn to_polytope(&self) -> Result<Polytope> {
        match self {
            PolytopeFile::Box { bounds } => symmetric_box(bounds),
            PolytopeFile::Explicit { vertices, halfspaces } => Polytope::new(
                vertices.iter().map(|v| Vector::from_vec(v.clone())).collect(),
                halfspaces.iter().map(|v| Vector::from_vec(v.clone())).collect(),
            ),
        }
    }
}

/// A matrix given as `{"matrix": rows}` or as bare rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixFile {
    Wrapped { matrix: Rows },
    Bare(Rows),
}

impl MatrixFile {
    pub fn to_mat(&self, name: &str) -> Result<Mat> {
        match self {
            MatrixFile::Wrapped { matrix } | MatrixFile::Bare(matrix) => mat_from_rows(matrix, name, 0),
        }
    }
}

/// Serialized certificate. `config` records whatever produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub format: String,
    pub kind: CertificateKind,
    #[serde(rename = "X")]
    pub x: Rows,
    #[serde(rename = "Y")]
    pub y: Rows,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "P")]
    pub p: Rows,
    pub objective: f64,
    pub objective_direction: Direction,
    #[serde(default)]
    pub gamma_log: serde_json::Value,
    #[serde(default)]
    pub audit: serde_json::Value,
    #[serde(default)]
    pub solver: serde_json::Value,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl CertificateFile {
    pub fn from_certificate(cert: &Certificate, config: serde_json::Value) -> Result<Self> {
        Ok(CertificateFile {
            format: CERTIFICATE_FORMAT.to_string(),
            kind: cert.kind,
            x: to_rows(&cert.x),
            y: to_rows(&cert.y),
            eps1: cert.eps1,
            eps2: cert.eps2,
            gamma: cert.gamma,
            rho: cert.rho(),
            k: to_rows(&cert.k),
            p: to_rows(&cert.p),
            objective: cert.objective,
            objective_direction: cert.direction,
            gamma_log: serde_json::to_value(&cert.gamma_log)?,
            audit: serde_json::to_value(&cert.audit)?,
            solver: serde_json::to_value(&cert.solver)?,
            config,
        })
    }

    /// The certificate as stored; `K` and `P` are taken from the file, not
    /// recomputed, so an audit sees exactly what was written.
    pub fn to_certificate(&self) -> Result<Certificate> {
        if self.format != CERTIFICATE_FORMAT {
            return Err(schema(format!("unsupported certificate format `{}`", self.format)));
        }
        let n = self.x.len();
        let gamma_log: Vec<GammaLogEntry> = Vec::new();
        let audit: Vec<CheckResult> = Vec::new();
        let solver: Option<SolveResult> = None;
        Ok(Certificate {
            kind: self.kind,
            x: mat_from_rows(&self.x, "X", n)?,
            y: mat_from_rows(&self.y, "Y", n)?,
            eps1: self.eps1,
            eps2: self.eps2,
            gamma: self.gamma,
            k: mat_from_rows(&self.k, "K", n)?,
            p: mat_from_rows(&self.p, "P", n)?,
            objective: self.objective,
            direction: self.objective_direction,
            solver,
            gamma_log,
            audit,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NqsModel> {
    read_json::<ModelFile>(path)?.to_model()
}

pub fn load_polytope(path: &Path) -> Result<Polytope> {
    read_json::<PolytopeFile>(path)?.to_polytope()
}

pub fn load_certificate(path: &Path) -> Result<Certificate> {
    read_json::<CertificateFile>(path)?.to_certificate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    const SCALAR: &str = r#"{"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "F": [[[0.3]]]}"#;

    #[test]
    fn minimal_model_fills_defaults() {
        let file: ModelFile = serde_json::from_str(SCALAR).unwrap();
        let model = file.to_model().unwrap();
        assert!(model.validate().is_valid());
        assert_eq!(model.dims.nw, 0);
        assert!(model.is_certain());
        assert_eq!(model.g, vec![Mat::zeros(1, 1)]);
    }

    #[test]
    fn model_round_trip() {
        let text = r#"{
            "A": [[0, 1], [-1, 0]], "B": [[0], [1]], "C": [[1, 0]], "Bw": [[0], [1]],
            "F": [[[0, 0.1], [0, 0]], [[0.1, 0], [0, 0]]],
            "uncertainty": {"D": [[0.1], [0.1]], "E1": [[0.2, 0]], "R": [[[0.1, 0]], [[0, 0.1]]]}
        }"#;
        let model = serde_json::from_str::<ModelFile>(text).unwrap().to_model().unwrap();
        assert!(model.validate().is_valid());
        assert_eq!((model.dims.nd, model.dims.nh), (1, 1));
        let back = ModelFile::from_model(&model).to_model().unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn ragged_rows_and_unknown_fields_are_schema_errors() {
        let ragged = r#"{"A": [[1, 2], [3]], "B": [[1], [1]], "C": [[1, 0]], "F": []}"#;
        let file: ModelFile = serde_json::from_str(ragged).unwrap();
        assert!(matches!(file.to_model(), Err(Error::Schema(_))));
        assert!(serde_json::from_str::<ModelFile>(r#"{"A": [[1]], "B": [[1]], "C": [[1]], "F": [], "Q": 1}"#).is_err());
    }

    #[test]
    fn shape_mismatch_reaches_validation() {
        let text = r#"{"A": [[1, 0], [0, 1]], "B": [[1], [1]], "C": [[1, 0]], "F": [[[0, 0], [0, 0]]]}"#;
        let model = serde_json::from_str::<ModelFile>(text).unwrap().to_model().unwrap();
        let report = model.validate();
        assert!(!report.is_valid());
        assert!(report.to_string().contains('F'));
    }

    #[test]
    fn polytope_forms() {
        let b: PolytopeFile = serde_json::from_str(r#"{"box": [1, 2]}"#).unwrap();
        assert_eq!(b.to_polytope().unwrap().vertices.len(), 4);
        let e: PolytopeFile =
            serde_json::from_str(r#"{"vertices": [[-1], [1]], "halfspaces": [[1], [-1]]}"#).unwrap();
        assert_eq!(e.to_polytope().unwrap().dim(), 1);
    }

    #[test]
    fn matrix_forms() {
        let a: MatrixFile = serde_json::from_str("[[1, 0], [0, 2]]").unwrap();
        let b: MatrixFile = serde_json::from_str(r#"{"matrix": [[1, 0], [0, 2]]}"#).unwrap();
        assert_eq!(a.to_mat("Q").unwrap(), b.to_mat("Q").unwrap());
    }

    #[test]
    fn certificate_round_trip() {
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let y = Mat::from_row_slice(1, 2, &[-1.0, 0.5]);
        let cert = Certificate::from_solution(CertificateKind::Qgcc, &x, &y, 0.5, 0.25, Some(0.4), Direction::Minimize).unwrap();
        let file = CertificateFile::from_certificate(&cert, serde_json::json!({"seed": 1})).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back = serde_json::from_str::<CertificateFile>(&text).unwrap().to_certificate().unwrap();
        assert_eq!(back.x, cert.x);
        assert_eq!(back.k, cert.k);
        assert_eq!(back.p, cert.p);
        assert_eq!(back.gamma, Some(0.4));
        let mut bad = file.clone();
        bad.format = "other".into();
        assert!(bad.to_certificate().is_err());
    }
}
