// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Property tests for structural invariants of the core library.

use proptest::prelude::*;

use resbath_core::lindblad::{evolve, lindblad_rhs, steady_state, EvolveOptions};
use resbath_core::measurement::{born_probabilities, AssignmentMatrix, CliffordSetting, ShotRecord};
use resbath_core::observables::{density_matrix_from_paulis, pauli_expectations, purity};
use resbath_core::qlinalg::{eig_hermitian, DensityMatrix, OperatorMatrix, SpaceLayout, C64};
use resbath_core::reservoir_model::{build_model, DeviceNoise, LatticeSpec, ReservoirKind, ReservoirSpec};
use resbath_core::shadows::{
    estimate_purity, median, median_of_means, snapshot, EstimatorOptions, ShadowDataset, ShadowMetadata,
};
use resbath_core::tomography::mle_project;

const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;
const KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

fn random_state(layout: &SpaceLayout, raw: &[f64]) -> DensityMatrix {
    let d = layout.total_dim();
    let a = OperatorMatrix::from_fn(layout, |i, j| {
        let k = 2 * (i * d + j);
        C64::new(raw[k], raw[k + 1])
    });
    let m = &a * &a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr)).unwrap()
}

fn state_strategy(n_qubits: usize) -> impl Strategy<Value = DensityMatrix> {
    let d = 1usize << n_qubits;
    prop::collection::vec(-1.0f64..1.0, 2 * d * d)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(move |raw| random_state(&SpaceLayout::qubits(n_qubits), &raw))
}

fn hermitian_unit_trace(layout: &SpaceLayout, raw: &[f64]) -> OperatorMatrix {
    let d = layout.total_dim();
    let a = OperatorMatrix::from_fn(layout, |i, j| {
        let k = 2 * (i * d + j);
        C64::new(raw[k], raw[k + 1])
    });
    let h = a.hermitian_part();
    let shift = (1.0 - h.trace().re) / d as f64;
    &h + &OperatorMatrix::identity(layout).scale_real(shift)
}

#[derive(Debug, Clone)]
struct ModelParams {
    g_pump: f64,
    g_loss: f64,
    d_pump: f64,
    d_loss: f64,
    kappa: f64,
    n_th: f64,
}

fn model_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.1f64..1.0,
        0.1f64..1.0,
        -12.0f64..12.0,
        -12.0f64..12.0,
        0.5f64..3.0,
        0.0f64..0.2,
    )
        .prop_map(|(g_pump, g_loss, d_pump, d_loss, kappa, n_th)| ModelParams {
            g_pump,
            g_loss,
            d_pump,
            d_loss,
            kappa,
            n_th,
        })
}

fn model(p: &ModelParams, cutoff: usize) -> resbath_core::lindblad::LiouvillianModel {
    let res = |kind, site: &str, g: f64, d: f64| ReservoirSpec {
        kind,
        site: site.into(),
        coupling: g * MHZ,
        detuning: d * MHZ,
        linewidth: p.kappa * MHZ,
        thermal_occupation: p.n_th,
    };
    let noise = DeviceNoise {
        gamma1: 4.0 * KHZ,
        gamma_plus: 8.4 * KHZ,
        gamma_minus: 3.2 * KHZ,
        qubit_thermal: 0.05,
        dephasing: 1.0 * KHZ,
    };
    build_model(
        &LatticeSpec::uniform(2, 6.0 * MHZ),
        &[
            res(ReservoirKind::Pump, "Q1", p.g_pump, p.d_pump),
            res(ReservoirKind::Loss, "Q2", p.g_loss, p.d_loss),
        ],
        &noise,
        cutoff,
    )
    .unwrap()
}

fn all_settings_average(rho: &DensityMatrix, n: usize) -> OperatorMatrix {
    let layout = SpaceLayout::qubits(n);
    let settings = CliffordSetting::all(n);
    let weight = 1.0 / settings.len() as f64;
    let mut acc = OperatorMatrix::zeros(&layout);
    for s in &settings {
        let rotations: Vec<_> = s.0.iter().map(|g| g.unitary(0.0)).collect();
        let probs = born_probabilities(rho, &rotations).unwrap();
        for (b, p) in probs.iter().enumerate() {
            let bits: Vec<u8> = (0..n).map(|q| ((b >> (n - 1 - q)) & 1) as u8).collect();
            let snap = snapshot(s, &bits, None).unwrap();
            acc = &acc + &snap.scale_real(weight * p);
        }
    }
    acc
}

fn dataset(records: Vec<ShotRecord>, n: usize) -> ShadowDataset {
    let len = records.len();
    ShadowDataset::new(
        records,
        ShadowMetadata {
            n_qubits: n,
            n_u: len,
            n_m: 1,
            seed: 0,
            runs: 1,
            calibration: None,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rhs_is_traceless_and_hermitian(p in model_strategy(), raw in prop::collection::vec(-1.0f64..1.0, 2 * 36 * 36)) {
        let m = model(&p, 2);
        let rho = random_state(m.layout(), &raw);
        let d = lindblad_rhs(&m, rho.as_operator(), 0.0).unwrap();
        let scale = d.max_abs().max(1.0);
        prop_assert!(d.trace().norm() < 1e-12 * scale * 36.0);
        prop_assert!(d.hermiticity_error() < 1e-12 * scale);
    }

    #[test]
    fn evolution_keeps_a_density_matrix(p in model_strategy(), raw in prop::collection::vec(-1.0f64..1.0, 2 * 36 * 36)) {
        let m = model(&p, 2);
        let rho0 = random_state(m.layout(), &raw);
        let opts = EvolveOptions { record_stride: usize::MAX, ..EvolveOptions::default() };
        let res = evolve(&m, &rho0, 0.2e-6, &opts).unwrap();
        let last = res.final_state;
        prop_assert!((last.as_operator().trace().re - 1.0).abs() < 1e-9);
        prop_assert!(last.as_operator().hermiticity_error() < 1e-12);
        prop_assert!(last.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn steady_state_is_annihilated(p in model_strategy()) {
        let m = model(&p, 2);
        let ss = steady_state(&m).unwrap();
        let d = lindblad_rhs(&m, ss.as_operator(), 0.0).unwrap();
        // Rates are up to ~1e8 /s; the residual is judged relative to them.
        prop_assert!(d.max_abs() < 1e-6 * p.kappa * MHZ);
        prop_assert!(ss.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn snapshots_are_unbiased_one_qubit(rho in state_strategy(1)) {
        prop_assert!(all_settings_average(&rho, 1).max_abs_diff(rho.as_operator()) < 1e-12);
    }

    #[test]
    fn snapshots_are_unbiased_two_qubits(rho in state_strategy(2)) {
        prop_assert!(all_settings_average(&rho, 2).max_abs_diff(rho.as_operator()) < 1e-12);
    }

    #[test]
    fn pauli_reconstruction_round_trips(rho in state_strategy(2)) {
        let back = density_matrix_from_paulis(&pauli_expectations(&rho).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(rho.as_operator()) < 1e-12);
    }

    #[test]
    fn mle_is_an_idempotent_projection(raw in prop::collection::vec(-1.0f64..1.0, 32)) {
        let layout = SpaceLayout::qubits(2);
        let h = hermitian_unit_trace(&layout, &raw);
        let p = mle_project(&h).unwrap();
        prop_assert!((p.as_operator().trace().re - 1.0).abs() < 1e-10);
        prop_assert!(p.min_eigenvalue() > -1e-10);
        let pp = mle_project(p.as_operator()).unwrap();
        prop_assert!(pp.as_operator().max_abs_diff(p.as_operator()) < 1e-10);
    }

    #[test]
    fn mle_is_closest_in_frobenius_norm(raw in prop::collection::vec(-1.0f64..1.0, 32), other in state_strategy(2)) {
        // The projection is the Frobenius-nearest density matrix, so no other
        // state, nor any mixture with it, may be closer.
        let layout = SpaceLayout::qubits(2);
        let h = hermitian_unit_trace(&layout, &raw);
        let p = mle_project(&h).unwrap();
        let best = (&h - p.as_operator()).frobenius_norm();
        for w in [1e-3, 0.1, 0.5, 1.0] {
            let mix = &p.as_operator().scale_real(1.0 - w) + &other.as_operator().scale_real(w);
            prop_assert!((&h - &mix).frobenius_norm() >= best - 1e-10);
        }
    }

    #[test]
    fn mle_keeps_eigenvectors(raw in prop::collection::vec(-1.0f64..1.0, 32)) {
        let layout = SpaceLayout::qubits(2);
        let h = hermitian_unit_trace(&layout, &raw);
        let p = mle_project(&h).unwrap();
        prop_assert!(p.as_operator().commutes_with(&h, 1e-9).unwrap());
        let e = eig_hermitian(p.as_operator()).unwrap();
        prop_assert!(e.values.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn partial_trace_of_product(a in state_strategy(1), b in state_strategy(1)) {
        let la = SpaceLayout::single(2, "A");
        let lb = SpaceLayout::single(2, "B");
        let a = DensityMatrix::new(a.as_operator().with_layout(&la).unwrap()).unwrap();
        let b = DensityMatrix::new(b.as_operator().with_layout(&lb).unwrap()).unwrap();
        let ab = a.tensor(&b).unwrap();
        prop_assert!(ab.partial_trace(&["A"]).unwrap().as_operator().max_abs_diff(a.as_operator()) < 1e-14);
        prop_assert!(ab.partial_trace(&["B"]).unwrap().as_operator().max_abs_diff(b.as_operator()) < 1e-14);
        prop_assert!((purity(&ab) - purity(&a) * purity(&b)).abs() < 1e-13);
    }

    #[test]
    fn trace_distance_is_a_metric(a in state_strategy(2), b in state_strategy(2), c in state_strategy(2)) {
        let ab = a.trace_distance(&b).unwrap();
        prop_assert!((ab - b.trace_distance(&a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(a.trace_distance(&a).unwrap() < 1e-12);
        prop_assert!(ab <= a.trace_distance(&c).unwrap() + c.trace_distance(&b).unwrap() + 1e-12);
    }

    #[test]
    fn assignment_inversion_round_trips(p0 in 0.0f64..0.3, p1 in 0.0f64..0.3, probs in prop::collection::vec(0.0f64..1.0, 4)) {
        let total: f64 = probs.iter().sum::<f64>().max(1e-9);
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let a = AssignmentMatrix::new(vec![[[1.0 - p0, p1], [p0, 1.0 - p1]], [[1.0 - p1, p0], [p1, 1.0 - p0]]]).unwrap();
        let back = a.invert(&a.corrupt(&probs).unwrap()).unwrap();
        for (x, y) in back.iter().zip(&probs) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn median_of_means_limits(values in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        prop_assert!((median_of_means(&values, 1).unwrap() - mean).abs() < 1e-12);
        let mut sorted = values.clone();
        prop_assert_eq!(median_of_means(&values, values.len()).unwrap(), median(&mut sorted));
    }

    #[test]
    fn purity_estimate_ignores_record_order(
        shots in prop::collection::vec((0usize..9, 0u8..2, 0u8..2), 4..80),
        rotate in 0usize..80,
    ) {
        let records: Vec<ShotRecord> = shots
            .iter()
            .map(|&(s, b0, b1)| ShotRecord { setting_id: s, bits: vec![b0, b1] })
            .collect();
        let mut shifted = records.clone();
        shifted.rotate_left(rotate % records.len());
        shifted.reverse();
        let opts = EstimatorOptions { k: 1, n_boot: 2, seed: 0 };
        let a = estimate_purity(&dataset(records, 2), None, &opts).unwrap().value;
        let b = estimate_purity(&dataset(shifted, 2), None, &opts).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}
