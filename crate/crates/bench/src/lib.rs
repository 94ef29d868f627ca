//! Problem instances shared by the benchmarks.

use nqs_core::geometry::symmetric_box;
use nqs_core::{Gl2Spec, InputBounds, Mat, NqsModel, QgccSpec, Vector};

fn m(rows: usize, cols: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, v)
}

/// The two-state plant of `fixtures/two_state_uncertain.json`.
pub fn two_state_model() -> NqsModel {
    NqsModel::certain(
        m(2, 2, &[-1.0, 0.5, 1.0, 0.0]),
        m(2, 1, &[0.0, 1.0]),
        m(1, 2, &[1.0, 0.0]),
        m(2, 1, &[0.0, 1.0]),
        vec![m(2, 2, &[0.0, 0.1, 0.0, 0.0]), m(2, 2, &[0.1, 0.0, 0.0, 0.05])],
        vec![m(2, 1, &[0.0, 0.0]), m(2, 1, &[0.05, 0.0])],
    )
    .with_uncertainty(
        m(2, 1, &[0.1, 0.1]),
        m(1, 2, &[0.2, 0.0]),
        m(1, 1, &[0.0]),
        vec![m(1, 2, &[0.1, 0.0]), m(1, 2, &[0.0, 0.1])],
        vec![m(1, 1, &[0.0]), m(1, 1, &[0.0])],
    )
}

pub fn qgcc_spec() -> QgccSpec {
    QgccSpec {
        model: two_state_model(),
        admissible: symmetric_box(&[1.0, 1.0]).expect("box"),
        q: Mat::identity(2, 2) * 0.1,
        r: Mat::identity(1, 1) * 0.1,
        bounds: InputBounds::new(Vector::from_element(1, 5.0)).expect("bounds"),
    }
}

pub fn gl2_spec() -> Gl2Spec {
    Gl2Spec {
        model: two_state_model(),
        polytope_inf: symmetric_box(&[2.0, 2.0]).expect("box"),
        bounds: InputBounds::new(Vector::from_element(1, 5.0)).expect("bounds"),
    }
}
