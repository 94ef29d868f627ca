//! End-to-end behaviour on the fixture files shipped in `fixtures/`.

use std::path::{Path, PathBuf};

use nqs_core::io::{load_certificate, load_model, load_polytope, write_json, CertificateFile};
use nqs_core::synthesis::{synthesize_gl2pc, synthesize_qgcc};
use nqs_core::verify::{compute_jinf, simulate};
use nqs_core::{
    Certificate, Controller, Direction, DisturbanceSignal, GammaSearchOptions, Gl2Spec, InputBounds, Mat, NqsModel,
    QgccSpec, SolverSettings, SynthesisOutcome, UncertaintySample, UncertaintySchedule, Vector,
};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bounds(u: f64) -> InputBounds {
    InputBounds::new(Vector::from_element(1, u)).unwrap()
}

fn certified(outcome: SynthesisOutcome) -> Certificate {
    match outcome {
        SynthesisOutcome::Certified(c) => *c,
        SynthesisOutcome::Infeasible(r) => panic!("infeasible: {}", r.message),
        SynthesisOutcome::AuditFailed(c) => panic!("audit failed: {:?}", c.audit),
    }
}

fn hold(model: &NqsModel) -> UncertaintySchedule {
    UncertaintySchedule::Constant(UncertaintySample::zero(&model.dims))
}

#[test]
fn every_fixture_model_validates() {
    for name in ["scalar_qgcc.json", "scalar_gl2.json", "uncontrollable.json", "two_state_uncertain.json"] {
        let model = load_model(&fixture(name)).unwrap();
        assert!(model.validate().is_valid(), "{name}: {}", model.validate());
    }
    for (name, dim) in [("unit_interval.json", 1), ("interval_2.json", 1), ("unit_box.json", 2), ("box_2.json", 2)] {
        assert_eq!(load_polytope(&fixture(name)).unwrap().dim(), dim);
    }
}

#[test]
fn scalar_guaranteed_cost_gain_stabilizes() {
    let model = load_model(&fixture("scalar_qgcc.json")).unwrap();
    let spec = QgccSpec {
        admissible: load_polytope(&fixture("unit_interval.json")).unwrap(),
        q: Mat::identity(1, 1),
        r: Mat::identity(1, 1),
        bounds: bounds(5.0),
        model: model.clone(),
    };
    let cert = certified(synthesize_qgcc(&spec, &GammaSearchOptions::default(), &SolverSettings::default()).unwrap());
    let traj = simulate(
        &model,
        &cert.controller(),
        &Vector::from_element(1, 1.0),
        &DisturbanceSignal::zero(),
        &hold(&model),
        10.0,
        1e-3,
    )
    .unwrap();
    assert!(traj.final_state().norm() < 1e-4);
}

#[test]
fn scalar_l2_gain_below_one_for_unit_pulse() {
    let model = load_model(&fixture("scalar_gl2.json")).unwrap();
    let spec = Gl2Spec {
        polytope_inf: load_polytope(&fixture("interval_2.json")).unwrap(),
        bounds: bounds(5.0),
        model: model.clone(),
    };
    let cert = certified(synthesize_gl2pc(&spec, Direction::Minimize, &SolverSettings::default()).unwrap());
    let w = DisturbanceSignal::pulse(0.5, 2.0, &[1.0], 1.0).unwrap();
    let traj = simulate(&model, &cert.controller(), &Vector::zeros(1), &w, &hold(&model), 30.0, 1e-3).unwrap();
    let est = compute_jinf(&traj).unwrap();
    assert!((est.w_energy - 1.0).abs() < 1e-6, "w energy {}", est.w_energy);
    assert!(est.ratio.unwrap() < 1.0);
    assert!(est.j_inf < 0.0);
}

#[test]
fn zero_disturbance_input_leaves_origin_at_rest() {
    let mut file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("scalar_gl2.json")).unwrap()).unwrap();
    file["Bw"] = serde_json::json!([[0.0]]);
    let model: NqsModel = serde_json::from_value::<nqs_core::io::ModelFile>(file).unwrap().to_model().unwrap();
    let spec = Gl2Spec {
        polytope_inf: load_polytope(&fixture("interval_2.json")).unwrap(),
        bounds: bounds(5.0),
        model: model.clone(),
    };
    let cert = certified(synthesize_gl2pc(&spec, Direction::Minimize, &SolverSettings::default()).unwrap());
    let w = DisturbanceSignal::pulse(0.0, 1.0, &[1.0], 1.0).unwrap();
    let traj = simulate(&model, &cert.controller(), &Vector::zeros(1), &w, &hold(&model), 5.0, 1e-3).unwrap();
    assert!((0..traj.len()).all(|i| traj.output(i)[0] == 0.0));
}

#[test]
fn maximizing_the_reachable_set_gives_a_larger_trace() {
    let model = load_model(&fixture("scalar_gl2.json")).unwrap();
    let spec = Gl2Spec {
        polytope_inf: load_polytope(&fixture("interval_2.json")).unwrap(),
        bounds: bounds(5.0),
        model,
    };
    let settings = SolverSettings::default();
    let lo = certified(synthesize_gl2pc(&spec, Direction::Minimize, &settings).unwrap());
    let hi = certified(synthesize_gl2pc(&spec, Direction::Maximize, &settings).unwrap());
    assert!(hi.objective >= lo.objective - 1e-9);
}

#[test]
fn certificate_file_round_trip_keeps_gain_and_matrix() {
    let model = load_model(&fixture("scalar_qgcc.json")).unwrap();
    let spec = QgccSpec {
        admissible: load_polytope(&fixture("unit_interval.json")).unwrap(),
        q: Mat::identity(1, 1),
        r: Mat::identity(1, 1),
        bounds: bounds(5.0),
        model,
    };
    let cert = certified(synthesize_qgcc(&spec, &GammaSearchOptions::default(), &SolverSettings::default()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    write_json(&path, &CertificateFile::from_certificate(&cert, serde_json::json!({"seed": 0})).unwrap()).unwrap();
    let back = load_certificate(&path).unwrap();
    assert_eq!(back.k, cert.k);
    assert_eq!(back.p, cert.p);
    assert_eq!(back.gamma, cert.gamma);
    assert_eq!(Controller::new(back.k.clone()).unwrap(), cert.controller());
}

#[test]
fn uncontrollable_plant_has_no_certificate() {
    let spec = QgccSpec {
        model: load_model(&fixture("uncontrollable.json")).unwrap(),
        admissible: load_polytope(&fixture("unit_interval.json")).unwrap(),
        q: Mat::identity(1, 1),
        r: Mat::identity(1, 1),
        bounds: bounds(1.0),
    };
    let out = synthesize_qgcc(&spec, &GammaSearchOptions::default(), &SolverSettings::default()).unwrap();
    let SynthesisOutcome::Infeasible(report) = out else { panic!("expected infeasible") };
    assert_eq!(report.gamma_log.len(), 20);
}
