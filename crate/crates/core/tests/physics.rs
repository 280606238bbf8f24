// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Cross-checks between independent routes to the same physical quantity.

use resbath_core::lindblad::{evolve, steady_state_co_rotating, steady_state_periodic, EvolveOptions, PeriodicOptions};
use resbath_core::measurement::{AssignmentMatrix, RotationErrorModel};
use resbath_core::observables::{pauli_expectation, purity, x_state, y_product_mixture};
use resbath_core::qlinalg::{DensityMatrix, OperatorMatrix, SpaceLayout, C64};
use resbath_core::reservoir_model::{
    build_model, build_shared_mode_frame, build_shared_mode_model, lorentzian_rate, DeviceNoise, LatticeSpec,
    ReservoirKind, ReservoirSpec, SharedModeSpec,
};
use resbath_core::shadows::{calibrate, generate_dataset};

const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;
const KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

fn device_noise() -> DeviceNoise {
    DeviceNoise {
        gamma1: 4.0 * KHZ,
        gamma_plus: 8.4 * KHZ,
        gamma_minus: 3.2 * KHZ,
        qubit_thermal: 0.05,
        dephasing: 0.0,
    }
}

fn shared(pump_detuning_mhz: f64) -> SharedModeSpec {
    SharedModeSpec {
        site: "Q1".into(),
        pump_coupling: 0.75 * MHZ,
        loss_coupling: 0.58 * MHZ,
        pump_detuning: pump_detuning_mhz * MHZ,
        loss_detuning: 6.0 * MHZ,
        linewidth: 1.5 * MHZ,
        thermal_occupation: 0.025,
    }
}

fn rotate_to_lab(rho: &DensityMatrix, charges: &[f64], angle_per_charge: f64) -> OperatorMatrix {
    let op = rho.as_operator();
    OperatorMatrix::from_fn(op.layout(), |i, j| {
        op.get(i, j) * C64::from_polar(1.0, -angle_per_charge * (charges[i] - charges[j]))
    })
}

#[test]
fn co_rotating_frame_reproduces_lab_frame_dynamics() {
    let lattice = LatticeSpec::uniform(2, 6.0 * MHZ);
    let spec = shared(-7.5);
    let lab = build_shared_mode_model(&lattice, &spec, &device_noise(), 2).unwrap();
    let (frame, charges) = build_shared_mode_frame(&lattice, &spec, &device_noise(), 2).unwrap();
    assert!(!lab.is_static());
    let rho0 = DensityMatrix::basis_state(lab.layout(), 0).unwrap();
    let t = 0.5e-6;
    let opts = EvolveOptions {
        dt_max: 0.05e-9,
        record_stride: usize::MAX,
        ..EvolveOptions::default()
    };
    let a = evolve(&lab, &rho0, t, &opts).unwrap().final_state;
    let b = evolve(&frame, &rho0, t, &opts).unwrap().final_state;
    let omega = spec.micromotion_frequency();
    let b_lab = rotate_to_lab(&b, &charges, omega * t / 2.0);
    let dist = a.trace_distance(&DensityMatrix::new(b_lab).unwrap()).unwrap();
    assert!(dist < 1e-8, "lab and co-rotating evolutions differ by {dist:e}");
}

#[test]
fn period_average_matches_co_rotating_steady_state() {
    let lattice = LatticeSpec::uniform(2, 6.0 * MHZ);
    let spec = shared(-7.5);
    let lab = build_shared_mode_model(&lattice, &spec, &device_noise(), 2).unwrap();
    let (frame, charges) = build_shared_mode_frame(&lattice, &spec, &device_noise(), 2).unwrap();
    let period = 2.0 * std::f64::consts::PI / spec.micromotion_frequency().abs();
    let periodic = steady_state_periodic(&lab, period, &PeriodicOptions::default()).unwrap();
    let rotating = steady_state_co_rotating(&frame, &charges).unwrap();
    let keep = ["Q1", "Q2"];
    let a = periodic.state.partial_trace(&keep).unwrap();
    let b = rotating.partial_trace(&keep).unwrap();
    let dist = a.trace_distance(&b).unwrap();
    assert!(dist < 1e-4, "period average and frame solution differ by {dist:e}");
}

#[test]
fn matched_detunings_stabilise_the_x_state() {
    let lattice = LatticeSpec::uniform(2, 6.0 * MHZ);
    let spec = shared(-6.0);
    let m = build_shared_mode_model(&lattice, &spec, &device_noise(), 3).unwrap();
    assert!(m.is_static());
    let q = resbath_core::lindblad::steady_state(&m)
        .unwrap()
        .partial_trace(&["Q1", "Q2"])
        .unwrap();
    assert!(pauli_expectation(&q, "YY").unwrap() < -0.8);
    assert!(pauli_expectation(&q, "XX").unwrap().abs() < 0.1);
    assert!(pauli_expectation(&q, "ZZ").unwrap().abs() < 0.1);
}

#[test]
fn x_state_identities() {
    let x = x_state();
    assert!((purity(&x) - 0.5).abs() < 1e-12);
    assert!(x.as_operator().max_abs_diff(y_product_mixture().as_operator()) < 1e-12);
    assert!((pauli_expectation(&x, "YY").unwrap() + 1.0).abs() < 1e-12);
    assert!(pauli_expectation(&x, "XX").unwrap().abs() < 1e-12);
    assert!(pauli_expectation(&x, "ZZ").unwrap().abs() < 1e-12);
}

#[test]
fn adiabatic_elimination_rates() {
    let (g, kappa, j) = (0.75 * MHZ, 1.5 * MHZ, 6.0 * MHZ);
    let on_resonance = lorentzian_rate(g, kappa, 0.0);
    assert!((on_resonance / (4.0 * g * g / kappa) - 1.0).abs() < 1e-12);
    assert!((on_resonance / (1.5 * MHZ) - 1.0).abs() < 1e-9);
    let off = lorentzian_rate(g, kappa, 2.0 * j) / KHZ;
    assert!((off - 5.84).abs() < 0.01, "off-resonant rate {off} kHz");
}

/// Decay of one qubit through a weakly coupled loss resonator follows the
/// Lorentzian rate.
#[test]
fn weak_coupling_decay_is_lorentzian() {
    let kappa = 1.5 * MHZ;
    let g = kappa / 20.0;
    for k in [-6, -3, 0, 2, 5] {
        let delta = 0.5 * k as f64 * kappa;
        let spec = ReservoirSpec {
            kind: ReservoirKind::Loss,
            site: "Q1".into(),
            coupling: g,
            detuning: delta,
            linewidth: kappa,
            thermal_occupation: 0.0,
        };
        let m = build_model(&LatticeSpec::uniform(1, 0.0), &[spec], &DeviceNoise::default(), 2).unwrap();
        let excited = m.layout().index(&[1, 0]);
        let rho0 = DensityMatrix::basis_state(m.layout(), excited).unwrap();
        let rate = lorentzian_rate(g, kappa, delta);
        let (t1, t2) = (20.0 / kappa, 20.0 / kappa + (1.0 / rate).min(20e-6));
        let opts = EvolveOptions {
            record_stride: usize::MAX,
            ..EvolveOptions::default()
        };
        let pe = |t: f64| {
            let q = evolve(&m, &rho0, t, &opts)
                .unwrap()
                .final_state
                .partial_trace(&["Q1"])
                .unwrap();
            q.get(1, 1).re
        };
        let fitted = (pe(t1) / pe(t2)).ln() / (t2 - t1);
        assert!(
            (fitted / rate - 1.0).abs() < 0.1,
            "delta = {k}/2 kappa: fitted {fitted}, Lorentzian {rate}"
        );
    }
}

#[test]
fn flip_only_calibration_gives_one_minus_p() {
    // Under a symmetric flip p only the Z-basis shots lose overlap with |g⟩:
    // C = (2 - p)/3 and G = 3C - 1 = 1 - p.
    let p = 0.016;
    let ground = DensityMatrix::basis_state(&SpaceLayout::qubits(2), 0).unwrap();
    let a = AssignmentMatrix::symmetric(2, p).unwrap();
    let data = generate_dataset(&ground, 90_000, 1, 9, RotationErrorModel::default(), &a, 11).unwrap();
    let cal = calibrate(&data).unwrap();
    for q in &cal.qubits {
        assert!((q.g - (1.0 - p)).abs() < 0.003, "G = {}", q.g);
    }
}
