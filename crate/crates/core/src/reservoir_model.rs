// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Physical models: hard-core qubit chain, sideband-engineered resonator
//! reservoirs, device noise, and the shared dissipative mode.
//!
//! All frequencies and rates are angular (rad/s). Qubits use `|g⟩ = 0`,
//! `|e⟩ = 1`; resonators are truncated at `cutoff` photons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{JumpOperator, LiouvillianModel, OscillatingTerm};
use crate::qlinalg::{annihilation, embed, embed_multi, number, OperatorMatrix, SpaceLayout, C64, ONE, ZERO};

/// Bessel function of the first kind, order one.
///
/// Trapezoidal rule on the periodic integral
/// `J₁(x) = (1/2π)∫ cos(τ − x sin τ) dτ`, which converges geometrically once
/// the node count exceeds `|x|` by a margin.
pub fn bessel_j1(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    let n = 64 + 2 * x.ceil() as usize;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let tau = k as f64 * h;
            (tau - x * tau.sin()).cos()
        })
        .sum();
    sum / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    pub bare_coupling: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub qubit_frequency: f64,
    pub resonator_frequency: f64,
}

impl ModulationSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("bare_coupling", self.bare_coupling),
            ("frequency", self.frequency),
            ("qubit_frequency", self.qubit_frequency),
            ("resonator_frequency", self.resonator_frequency),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter("amplitude must be non-negative".into()));
        }
        Ok(())
    }

    /// `(ω_r − ω_q⁰) / g`; values below 10 leave the dispersive regime.
    pub fn dispersive_ratio(&self) -> f64 {
        (self.resonator_frequency - self.qubit_frequency) / self.bare_coupling
    }
}

/// `g · J₁(A_mod / ω_mod)`.
pub fn sideband_coupling(m: &ModulationSpec) -> Result<f64> {
    if !(m.frequency > 0.0) {
        return Err(Error::InvalidParameter("modulation frequency must be positive".into()));
    }
    if m.dispersive_ratio() < 10.0 {
        log::warn!(
            "dispersive ratio {:.2} below 10; sideband picture is approximate",
            m.dispersive_ratio()
        );
    }
    Ok(m.bare_coupling * bessel_j1(m.amplitude / m.frequency))
}

/// `Γ(δ) = g²κ / (δ² + (κ/2)²)`.
pub fn lorentzian_rate(coupling: f64, linewidth: f64, detuning: f64) -> f64 {
    let hw = 0.5 * linewidth;
    coupling * coupling * linewidth / (detuning * detuning + hw * hw)
}

fn default_qubit_levels() -> usize {
    2
}

/// 1-D nearest-neighbour hard-core chain in the qubit rotating frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub hopping: f64,
    pub site_energies: Vec<f64>,
    /// On-site interaction; inert once qubits are truncated to two levels.
    #[serde(default)]
    pub interaction: f64,
    #[serde(default = "default_qubit_levels")]
    pub qubit_levels: usize,
}

impl LatticeSpec {
    pub fn uniform(n_sites: usize, hopping: f64) -> Self {
        Self {
            n_sites,
            hopping,
            site_energies: vec![0.0; n_sites],
            interaction: 0.0,
            qubit_levels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidParameter("lattice needs at least one site".into()));
        }
        if self.site_energies.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: self.site_energies.len(),
            });
        }
        if self.qubit_levels != 2 {
            return Err(Error::InvalidParameter(format!(
                "qubits are two-level; {} levels requested",
                self.qubit_levels
            )));
        }
        Ok(())
    }

    pub fn qubit_labels(&self) -> Vec<String> {
        (1..=self.n_sites).map(|k| format!("Q{k}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservoirKind {
    Pump,
    Loss,
}

/// A sideband-coupled readout resonator acting as a pump or loss bath.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub kind: ReservoirKind,
    pub site: String,
    pub coupling: f64,
    pub detuning: f64,
    pub linewidth: f64,
    pub thermal_occupation: f64,
}

impl ReservoirSpec {
    pub fn validate(&self) -> Result<()> {
        validate_bath(self.coupling, self.linewidth, self.thermal_occupation)?;
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    pub fn is_weak_coupling(&self) -> bool {
        self.coupling < self.linewidth
    }

    pub fn rate(&self) -> f64 {
        lorentzian_rate(self.coupling, self.linewidth, self.detuning)
    }
}

fn validate_bath(coupling: f64, linewidth: f64, n_th: f64) -> Result<()> {
    if !(coupling >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coupling must be >= 0, got {coupling}"
        )));
    }
    if !(linewidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "linewidth must be > 0, got {linewidth}"
        )));
    }
    if !(0.0..1.0).contains(&n_th) {
        return Err(Error::InvalidParameter(format!(
            "resonator thermal occupation must lie in [0, 1), got {n_th}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceNoise {
    pub gamma1: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub qubit_thermal: f64,
    #[serde(default)]
    pub dephasing: f64,
}

impl DeviceNoise {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("gamma1", self.gamma1),
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
            ("qubit_thermal", self.qubit_thermal),
            ("dephasing", self.dephasing),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pump and loss sidebands driven on one qubit through one resonator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedModeSpec {
    pub site: String,
    pub pump_coupling: f64,
    pub loss_coupling: f64,
    pub pump_detuning: f64,
    pub loss_detuning: f64,
    pub linewidth: f64,
    pub thermal_occupation: f64,
}

impl SharedModeSpec {
    pub fn validate(&self) -> Result<()> {
        validate_bath(self.pump_coupling, self.linewidth, self.thermal_occupation)?;
        validate_bath(self.loss_coupling, self.linewidth, self.thermal_occupation)
    }

    /// `Ω = δ_S + δ_D`.
    pub fn micromotion_frequency(&self) -> f64 {
        self.pump_detuning + self.loss_detuning
    }
}

/// Below this |Ω| (rad/s) the shared-mode model is treated as static.
pub const STATIC_MICROMOTION: f64 = 1e-6;

fn resonator_label(site: &str) -> Result<String> {
    site.strip_prefix('Q')
        .filter(|rest| !rest.is_empty())
        .map(|rest| format!("R{rest}"))
        .ok_or_else(|| Error::UnknownLabel(site.to_string()))
}

fn qubit_index(site: &str, lattice: &LatticeSpec) -> Result<usize> {
    site.strip_prefix('Q')
        .and_then(|rest| rest.parse::<usize>().ok())
        .filter(|&k| (1..=lattice.n_sites).contains(&k))
        .ok_or_else(|| Error::UnknownLabel(site.to_string()))
}

/// Qubits `Q1..Qn` followed by one resonator per reservoir site in qubit order.
pub fn model_layout(lattice: &LatticeSpec, sites: &[&str], cutoff: usize) -> Result<SpaceLayout> {
    lattice.validate()?;
    if cutoff < 2 {
        return Err(Error::InvalidParameter(format!(
            "resonator cutoff must be >= 2, got {cutoff}"
        )));
    }
    let mut idx: Vec<usize> = sites.iter().map(|s| qubit_index(s, lattice)).collect::<Result<_>>()?;
    idx.sort_unstable();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("at most one reservoir per site".into()));
    }
    let mut dims = vec![2; lattice.n_sites];
    let mut labels = lattice.qubit_labels();
    for k in idx {
        dims.push(cutoff + 1);
        labels.push(format!("R{k}"));
    }
    SpaceLayout::new(dims, labels)
}

/// `Σ J(a_i†a_{i+1} + h.c.) + Σ ε_i n_i` on the chain.
pub fn build_lattice_hamiltonian(spec: &LatticeSpec, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    spec.validate()?;
    let labels = spec.qubit_labels();
    for l in &labels {
        if layout.dim_of(l)? != 2 {
            return Err(Error::InvalidLayout(format!("{l} must be two-level")));
        }
    }
    let qubit_count = layout
        .dims()
        .iter()
        .zip(layout.labels())
        .filter(|(_, l)| l.starts_with('Q'))
        .count();
    if qubit_count != spec.n_sites {
        return Err(Error::DimensionMismatch {
            expected: spec.n_sites,
            found: qubit_count,
        });
    }
    let a = annihilation(2);
    let mut h = OperatorMatrix::zeros(layout);
    let ops: Vec<OperatorMatrix> = labels.iter().map(|l| embed(&a, l, layout)).collect::<Result<_>>()?;
    for w in ops.windows(2) {
        let hop = &w[0].adjoint() * &w[1];
        h = &h + &(&hop + &hop.adjoint()).scale_real(spec.hopping);
    }
    for (op, &eps) in ops.iter().zip(&spec.site_energies) {
        if eps != 0.0 {
            h = &h + &(&op.adjoint() * op).scale_real(eps);
        }
    }
    Ok(h)
}

fn bath_jumps(jumps: &mut Vec<JumpOperator>, b: &OperatorMatrix, res: &str, kappa: f64, n_th: f64) {
    jumps.push(JumpOperator {
        label: format!("{res}:decay"),
        operator: b.scale_real((kappa * (1.0 + n_th)).sqrt()),
    });
    if n_th > 0.0 {
        jumps.push(JumpOperator {
            label: format!("{res}:thermal"),
            operator: b.adjoint().scale_real((kappa * n_th).sqrt()),
        });
    }
}

fn noise_jumps(
    jumps: &mut Vec<JumpOperator>,
    lattice: &LatticeSpec,
    noise: &DeviceNoise,
    layout: &SpaceLayout,
) -> Result<()> {
    noise.validate()?;
    let n_q = noise.qubit_thermal;
    for q in lattice.qubit_labels() {
        let a = embed(&annihilation(2), &q, layout)?;
        if noise.gamma1 > 0.0 {
            jumps.push(JumpOperator {
                label: format!("{q}:decay"),
                operator: a.scale_real((noise.gamma1 * (1.0 + n_q)).sqrt()),
            });
            if n_q > 0.0 {
                jumps.push(JumpOperator {
                    label: format!("{q}:thermal"),
                    operator: a.adjoint().scale_real((noise.gamma1 * n_q).sqrt()),
                });
            }
        }
        if noise.dephasing > 0.0 {
            jumps.push(JumpOperator {
                label: format!("{q}:dephasing"),
                operator: embed(&number(2), &q, layout)?.scale_real((2.0 * noise.dephasing).sqrt()),
            });
        }
    }
    if noise.gamma_plus == 0.0 && noise.gamma_minus == 0.0 {
        return Ok(());
    }
    if lattice.n_sites != 2 {
        return Err(Error::InvalidParameter(
            "collective decay is defined for two qubits only".into(),
        ));
    }
    let pair = SpaceLayout::qubits(2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (name, gamma, sign) in [("plus", noise.gamma_plus, 1.0), ("minus", noise.gamma_minus, -1.0)] {
        if gamma == 0.0 {
            continue;
        }
        let ground = [ONE, ZERO, ZERO, ZERO];
        let bell = [ZERO, C64::new(s, 0.0), C64::new(sign * s, 0.0), ZERO];
        let lower = embed_multi(&OperatorMatrix::outer(&pair, &ground, &bell)?, &["Q1", "Q2"], layout)?;
        jumps.push(JumpOperator {
            label: format!("collective_{name}:decay"),
            operator: lower.scale_real((gamma * (1.0 + n_q)).sqrt()),
        });
        if n_q > 0.0 {
            jumps.push(JumpOperator {
                label: format!("collective_{name}:thermal"),
                operator: lower.adjoint().scale_real((gamma * n_q).sqrt()),
            });
        }
    }
    Ok(())
}

/// Qubit chain with independent pump/loss resonators and device noise.
///
/// Loss: `δ_D b†b + g_D(a†b + ab†)`. Pump: `−δ_S b†b + g_S(a†b† + ab)`, so
/// that a pump with `δ_S = −J` is resonant with the `|−⟩` eigenstate at `−J`.
pub fn build_model(
    lattice: &LatticeSpec,
    reservoirs: &[ReservoirSpec],
    noise: &DeviceNoise,
    cutoff: usize,
) -> Result<LiouvillianModel> {
    for r in reservoirs {
        r.validate()?;
        if !r.is_weak_coupling() {
            log::warn!("reservoir on {} is outside the weak-coupling regime", r.site);
        }
    }
    let sites: Vec<&str> = reservoirs.iter().map(|r| r.site.as_str()).collect();
    let layout = model_layout(lattice, &sites, cutoff)?;
    let mut h = build_lattice_hamiltonian(lattice, &layout)?;
    let mut jumps = Vec::new();
    let mut sorted: Vec<&ReservoirSpec> = reservoirs.iter().collect();
    sorted.sort_by_key(|r| qubit_index(&r.site, lattice).unwrap_or(usize::MAX));
    for r in sorted {
        let res = resonator_label(&r.site)?;
        let a = embed(&annihilation(2), &r.site, &layout)?;
        let b = embed(&annihilation(cutoff + 1), &res, &layout)?;
        let nb = &b.adjoint() * &b;
        let (sign, pair) = match r.kind {
            ReservoirKind::Loss => (1.0, &a.adjoint() * &b),
            ReservoirKind::Pump => (-1.0, &a.adjoint() * &b.adjoint()),
        };
        h = &h + &nb.scale_real(sign * r.detuning);
        h = &h + &(&pair + &pair.adjoint()).scale_real(r.coupling);
        bath_jumps(&mut jumps, &b, &res, r.linewidth, r.thermal_occupation);
    }
    noise_jumps(&mut jumps, lattice, noise, &layout)?;
    LiouvillianModel::new(h, vec![], jumps)
}

struct SharedParts {
    layout: SpaceLayout,
    h_static: OperatorMatrix,
    pump: OperatorMatrix,
    jumps: Vec<JumpOperator>,
}

fn shared_parts(
    lattice: &LatticeSpec,
    shared: &SharedModeSpec,
    noise: &DeviceNoise,
    cutoff: usize,
) -> Result<SharedParts> {
    shared.validate()?;
    let layout = model_layout(lattice, &[shared.site.as_str()], cutoff)?;
    let res = resonator_label(&shared.site)?;
    let a = embed(&annihilation(2), &shared.site, &layout)?;
    let b = embed(&annihilation(cutoff + 1), &res, &layout)?;
    let mut h = build_lattice_hamiltonian(lattice, &layout)?;
    h = &h + &(&b.adjoint() * &b).scale_real(shared.loss_detuning);
    let exchange = &a.adjoint() * &b;
    h = &h + &(&exchange + &exchange.adjoint()).scale_real(shared.loss_coupling);
    let pump = (&a.adjoint() * &b.adjoint()).scale_real(shared.pump_coupling);
    let mut jumps = Vec::new();
    bath_jumps(&mut jumps, &b, &res, shared.linewidth, shared.thermal_occupation);
    noise_jumps(&mut jumps, lattice, noise, &layout)?;
    Ok(SharedParts {
        layout,
        h_static: h,
        pump,
        jumps,
    })
}

/// Both sidebands on one resonator, written in the frame where the loss
/// sideband is static: the pump term `g_S a†b†` oscillates as `e^{−iΩt}`.
pub fn build_shared_mode_model(
    lattice: &LatticeSpec,
    shared: &SharedModeSpec,
    noise: &DeviceNoise,
    cutoff: usize,
) -> Result<LiouvillianModel> {
    let p = shared_parts(lattice, shared, noise, cutoff)?;
    let omega = shared.micromotion_frequency();
    if omega.abs() < STATIC_MICROMOTION {
        let h = &(&p.h_static + &p.pump) + &p.pump.adjoint();
        return LiouvillianModel::new(h, vec![], p.jumps);
    }
    LiouvillianModel::new(
        p.h_static,
        vec![OscillatingTerm {
            operator: p.pump,
            frequency: omega,
        }],
        p.jumps,
    )
}

/// Static form of the shared-mode model in the frame rotating at `Ω/2` per
/// excitation, together with the diagonal of the total excitation number.
///
/// The lab-frame state is `e^{−iΩNt/2} ρ e^{iΩNt/2}`; every jump operator
/// changes `N` by a fixed amount, so the dissipators are frame invariant.
pub fn build_shared_mode_frame(
    lattice: &LatticeSpec,
    shared: &SharedModeSpec,
    noise: &DeviceNoise,
    cutoff: usize,
) -> Result<(LiouvillianModel, Vec<f64>)> {
    let p = shared_parts(lattice, shared, noise, cutoff)?;
    let layout = &p.layout;
    let charges: Vec<f64> = (0..layout.total_dim())
        .map(|k| layout.digits(k).iter().sum::<usize>() as f64)
        .collect();
    let shift = shared.micromotion_frequency() / 2.0;
    let n_total = OperatorMatrix::diagonal(layout, &charges.iter().map(|&c| C64::new(c, 0.0)).collect::<Vec<_>>())?;
    let h = &(&(&p.h_static + &p.pump) + &p.pump.adjoint()) - &n_total.scale_real(shift);
    Ok((LiouvillianModel::new(h, vec![], p.jumps)?, charges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;

    #[test]
    fn j1_small_values() {
        assert_eq!(bessel_j1(0.0), 0.0);
        assert_relative_eq!(bessel_j1(1.0), 0.440_050_585_744_933_5, max_relative = 1e-12);
        assert_relative_eq!(bessel_j1(-1.0), -0.440_050_585_744_933_5, max_relative = 1e-12);
    }

    #[test]
    fn rate_on_resonance() {
        let r = lorentzian_rate(0.75 * MHZ, 1.5 * MHZ, 0.0);
        assert_relative_eq!(r, 1.5 * MHZ, max_relative = 1e-12);
    }

    #[test]
    fn lattice_rejects_three_levels() {
        let mut l = LatticeSpec::uniform(2, 1.0);
        l.qubit_levels = 3;
        assert!(l.validate().is_err());
    }

    #[test]
    fn single_site_zero_energy_is_zero() {
        let l = LatticeSpec::uniform(1, 1.0);
        let layout = SpaceLayout::qubits(1);
        assert_eq!(build_lattice_hamiltonian(&l, &layout).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn layout_orders_resonators_by_site() {
        let l = LatticeSpec::uniform(2, 1.0);
        let layout = model_layout(&l, &["Q2", "Q1"], 3).unwrap();
        assert_eq!(layout.labels(), &["Q1", "Q2", "R1", "R2"]);
        assert_eq!(layout.dims(), &[2, 2, 4, 4]);
        assert!(model_layout(&l, &["Q3"], 3).is_err());
        assert!(model_layout(&l, &["Q1"], 1).is_err());
        assert!(model_layout(&l, &["Q1", "Q1"], 2).is_err());
    }

    #[test]
    fn bare_resonators_give_two_jumps() {
        let l = LatticeSpec::uniform(2, MHZ);
        let res = |kind, site: &str| ReservoirSpec {
            kind,
            site: site.into(),
            coupling: 0.5 * MHZ,
            detuning: 0.0,
            linewidth: MHZ,
            thermal_occupation: 0.0,
        };
        let m = build_model(
            &l,
            &[res(ReservoirKind::Pump, "Q1"), res(ReservoirKind::Loss, "Q2")],
            &DeviceNoise::default(),
            2,
        )
        .unwrap();
        assert_eq!(m.jumps().len(), 2);
    }
}
