//! Parsers for the small argument languages accepted on the command line.

use std::path::Path;

use nqs_core::io::{read_json, MatrixFile};
use nqs_core::{DisturbanceSignal, Error, GammaGrid, Mat, Result, Vector};

/// `0.1` means `0.1·I`, `[[..]]` or `{"matrix": ..}` is inline JSON, and
/// anything else is a path to a matrix file.
pub fn weight_matrix(arg: &str, dim: usize, name: &str) -> Result<Mat> {
    let arg = arg.trim();
    if let Ok(s) = arg.parse::<f64>() {
        return Ok(Mat::identity(dim, dim) * s);
    }
    let file: MatrixFile = if arg.starts_with('[') || arg.starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Error::Schema(format!("--{name}: {e}")))?
    } else {
        read_json(Path::new(arg))?
    };
    let mat = file.to_mat(name)?;
    if mat.shape() != (dim, dim) {
        return Err(Error::Schema(format!(
            "--{name} must be {dim}x{dim}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(mat)
}

/// A scalar broadcast to `dim` entries, or a JSON list of exactly `dim`.
pub fn vector(arg: &str, dim: usize, name: &str) -> Result<Vector> {
    let arg = arg.trim();
    if let Ok(s) = arg.parse::<f64>() {
        return Ok(Vector::from_element(dim, s));
    }
    let values: Vec<f64> = serde_json::from_str(arg).map_err(|e| Error::Schema(format!("--{name}: {e}")))?;
    if values.len() != dim {
        return Err(Error::Schema(format!("--{name} needs {dim} entries, got {}", values.len())));
    }
    Ok(Vector::from_vec(values))
}

/// `uniform:COUNT:LO:HI` or a comma-separated list of values.
pub fn gamma_grid(arg: &str) -> Result<GammaGrid> {
    let bad = || Error::Schema(format!("--gamma-grid: cannot parse `{arg}`"));
    if let Some(rest) = arg.strip_prefix("uniform:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let count = parts[0].trim().parse().map_err(|_| bad())?;
        let lo = parts[1].trim().parse().map_err(|_| bad())?;
        let hi = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(GammaGrid::Uniform { count, lo, hi });
    }
    let values = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    Ok(GammaGrid::Explicit { values })
}

/// `zero`, `pulse:T0:WIDTH:ENERGY` or `burst:FREQ:T0:WINDOW:ENERGY`.
pub fn disturbance(arg: &str, direction: &[f64]) -> Result<DisturbanceSignal> {
    let bad = || Error::Schema(format!("--disturbance: cannot parse `{arg}`"));
    let mut parts = arg.split(':');
    let kind = parts.next().unwrap_or_default();
    let nums = parts
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    match (kind, nums.as_slice()) {
        ("zero", []) => Ok(DisturbanceSignal::zero()),
        ("pulse", [t0, width, energy]) => DisturbanceSignal::pulse(*t0, *width, direction, *energy),
        ("burst", [freq, t0, window, energy]) => {
            DisturbanceSignal::sinusoid_burst(*freq, *t0, *window, direction, *energy)
        }
        _ => Err(bad()),
    }
}

/// A rectangular matrix given inline, e.g. a gain `[[-1, -2]]`.
pub fn inline_matrix(arg: &str, shape: (usize, usize), name: &str) -> Result<Mat> {
    let file: MatrixFile = serde_json::from_str(arg.trim()).map_err(|e| Error::Schema(format!("--{name}: {e}")))?;
    let mat = file.to_mat(name)?;
    if mat.shape() != shape {
        return Err(Error::Schema(format!(
            "--{name} must be {}x{}, got {}x{}",
            shape.0,
            shape.1,
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_weight_is_scaled_identity() {
        let q = weight_matrix("0.5", 2, "q").unwrap();
        assert_eq!(q, Mat::identity(2, 2) * 0.5);
    }

    #[test]
    fn inline_weight_checks_shape() {
        assert!(weight_matrix("[[1, 0], [0, 2]]", 2, "q").is_ok());
        assert!(weight_matrix("{\"matrix\": [[1]]}", 1, "q").is_ok());
        assert!(weight_matrix("[[1, 0], [0, 2]]", 3, "q").is_err());
    }

    #[test]
    fn vectors_broadcast_or_list() {
        assert_eq!(vector("3", 2, "umax").unwrap(), Vector::from_vec(vec![3.0, 3.0]));
        assert_eq!(vector("[1, 2]", 2, "umax").unwrap(), Vector::from_vec(vec![1.0, 2.0]));
        assert!(vector("[1]", 2, "umax").is_err());
    }

    #[test]
    fn gamma_grid_forms() {
        assert_eq!(
            gamma_grid("uniform:5:0.1:0.9").unwrap(),
            GammaGrid::Uniform { count: 5, lo: 0.1, hi: 0.9 }
        );
        assert_eq!(
            gamma_grid("0.3, 0.6").unwrap(),
            GammaGrid::Explicit { values: vec![0.3, 0.6] }
        );
        assert!(gamma_grid("uniform:5:0.1").is_err());
        assert!(gamma_grid("abc").is_err());
    }

    #[test]
    fn disturbance_forms() {
        assert!(disturbance("zero", &[1.0]).unwrap().in_contract());
        let p = disturbance("pulse:0:1:0.5", &[1.0]).unwrap();
        assert_eq!(p.energy, 0.5);
        assert!(disturbance("burst:2:0:3:1", &[1.0, 0.0]).is_ok());
        assert!(disturbance("pulse:0:1", &[1.0]).is_err());
        assert!(disturbance("square:1", &[1.0]).is_err());
    }
}
