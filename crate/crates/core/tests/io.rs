// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

use resbath_core::measurement::{AssignmentMatrix, RotationErrorModel};
use resbath_core::observables::x_state;
use resbath_core::qlinalg::MatrixJson;
use resbath_core::shadows::{generate_dataset, CalibrationResult, ShadowDataset};

#[test]
fn shadow_dataset_round_trips_through_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let a = AssignmentMatrix::illustrative(2);
    let mut data = generate_dataset(&x_state(), 300, 2, 3, RotationErrorModel::illustrative(), &a, 5).unwrap();
    data.meta.calibration = Some(CalibrationResult::standard(2));
    let (csv, json) = (dir.path().join("s.csv"), dir.path().join("s.json"));
    data.write(&csv, &json).unwrap();
    let back = ShadowDataset::read(&csv, &json).unwrap();
    assert_eq!(back.records, data.records);
    assert_eq!(back.meta, data.meta);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("setting_id,"), "{header}");
}

#[test]
fn inconsistent_metadata_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = AssignmentMatrix::ideal(2);
    let data = generate_dataset(&x_state(), 10, 1, 1, RotationErrorModel::default(), &a, 1).unwrap();
    let (csv, json) = (dir.path().join("s.csv"), dir.path().join("s.json"));
    data.write(&csv, &json).unwrap();
    let text = std::fs::read_to_string(&json)
        .unwrap()
        .replace("\"n_u\": 10", "\"n_u\": 11");
    std::fs::write(&json, text).unwrap();
    assert!(ShadowDataset::read(&csv, &json).is_err());
}

#[test]
fn matrix_json_round_trips() {
    let rho = x_state();
    let m = MatrixJson::from(rho.as_operator());
    let text = serde_json::to_string(&m).unwrap();
    let back: MatrixJson = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_operator().unwrap(), *rho.as_operator());
}
