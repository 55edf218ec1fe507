//! Decay and dephasing channels and systematic-error models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drive::{LabHamiltonian, Role};
use crate::effective::EffectiveTwoLevel;
use crate::error::{Error, Result};
use crate::hamiltonian::TermHamiltonian;
use crate::tensor::{chain_rr_projector_sum, embed_single, Level, Operator, SparseOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Decay `r → 0` [rad/s].
    pub kappa0: f64,
    /// Decay `r → 1` [rad/s].
    pub kappa1: f64,
    /// Dephasing [rad/s].
    pub kappa_z: f64,
}

impl NoiseParams {
    pub fn new(kappa0: f64, kappa1: f64, kappa_z: f64) -> Result<Self> {
        let n = Self { kappa0, kappa1, kappa_z };
        n.validate()?;
        Ok(n)
    }

    /// `κ₀ = κ₁ = κ`, `κ_z = 0.1κ`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        Self::new(kappa, kappa, 0.1 * kappa)
    }

    pub fn none() -> Self {
        Self { kappa0: 0.0, kappa1: 0.0, kappa_z: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("kappa0", self.kappa0), ("kappa1", self.kappa1), ("kappa_z", self.kappa_z)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be a non-negative rate, got {r}")));
            }
        }
        Ok(())
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::none()
    }
}

/// Systematic error applied on top of the ideal controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSpec {
    None,
    /// All drive amplitudes deviate by `ε`.
    Global { epsilon: f64 },
    /// Only the first atom's drives (primary and dressing) deviate by `ε`.
    Local { epsilon: f64 },
    /// Interaction shift `δV` [rad/s] on every neighbouring `|rr⟩`.
    Interaction { delta_v: f64 },
    /// Laser-phase offset `δφ` [rad] on the first atom's `g1 ↔ r` drive.
    Phase { delta_phi: f64 },
    /// `ε·H + δV Σ|rr⟩⟨rr|`.
    Combined { epsilon: f64, delta_v: f64 },
}

pub const EPSILON_BOUND: f64 = 0.5;

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        let check_eps = |e: f64| {
            if !(e.abs() <= EPSILON_BOUND) {
                return Err(Error::InvalidParameter(format!("|ε| must be at most {EPSILON_BOUND}, got {e}")));
            }
            Ok(())
        };
        let check_finite = |name: &str, x: f64| {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
            Ok(())
        };
        match *self {
            ErrorSpec::None => Ok(()),
            ErrorSpec::Global { epsilon } | ErrorSpec::Local { epsilon } => check_eps(epsilon),
            ErrorSpec::Interaction { delta_v } => check_finite("δV", delta_v),
            ErrorSpec::Phase { delta_phi } => check_finite("δφ", delta_phi),
            ErrorSpec::Combined { epsilon, delta_v } => {
                check_eps(epsilon)?;
                check_finite("δV", delta_v)
            }
        }
    }

    pub fn interaction_from_distance(geometry: &VdwGeometry, delta_d: f64) -> Result<Self> {
        Ok(ErrorSpec::Interaction { delta_v: interaction_fluctuation(geometry, delta_d)? })
    }

    pub fn delta_v(&self) -> f64 {
        match *self {
            ErrorSpec::Interaction { delta_v } | ErrorSpec::Combined { delta_v, .. } => delta_v,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdwGeometry {
    /// [rad/s·μm⁶]
    pub c6: f64,
    /// [μm]
    pub d: f64,
}

impl VdwGeometry {
    pub fn new(c6: f64, d: f64) -> Result<Self> {
        if !(c6 > 0.0 && d > 0.0) {
            return Err(Error::InvalidParameter("C6 and d must be positive".into()));
        }
        Ok(Self { c6, d })
    }

    /// Distance at which the interaction equals `v`.
    pub fn for_interaction(c6: f64, v: f64) -> Result<Self> {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter("V must be positive".into()));
        }
        Self::new(c6, (c6 / v).powf(1.0 / 6.0))
    }
}

pub fn vdw_interaction(g: &VdwGeometry) -> f64 {
    g.c6 / g.d.powi(6)
}

/// `C₆/(d+δd)⁶ − C₆/d⁶`.
pub fn interaction_fluctuation(g: &VdwGeometry, delta_d: f64) -> Result<f64> {
    if !(delta_d.abs() < g.d) {
        return Err(Error::InvalidParameter(format!("|δd| = {} must be below d = {}", delta_d.abs(), g.d)));
    }
    Ok(g.c6 / (g.d + delta_d).powi(6) - g.c6 / g.d.powi(6))
}

fn first_atom_drives(h: &LabHamiltonian) -> Vec<usize> {
    (0..h.drives.len()).filter(|&j| h.drives[j].frame_sign > 0.0).collect()
}

/// Error generator as time-dependent terms on the lab frame.
pub fn error_terms(spec: &ErrorSpec, h: &LabHamiltonian) -> Result<TermHamiltonian> {
    spec.validate()?;
    let n = h.n_atoms;
    let interaction = |dv: f64| {
        let mut t = TermHamiltonian::new(n);
        t.push_static(chain_rr_projector_sum(n).scale(C64::new(dv, 0.0))).expect("atom count");
        t
    };
    Ok(match *spec {
        ErrorSpec::None => TermHamiltonian::new(n),
        ErrorSpec::Global { epsilon } => h.drive_terms(0..h.drives.len()).scaled(epsilon),
        ErrorSpec::Local { epsilon } => h.drive_terms(first_atom_drives(h)).scaled(epsilon),
        ErrorSpec::Interaction { delta_v } => interaction(delta_v),
        ErrorSpec::Phase { delta_phi } => {
            let mut out = TermHamiltonian::new(n);
            let factor = C64::from_polar(1.0, delta_phi) - C64::new(1.0, 0.0);
            for j in first_atom_drives(h) {
                let d = h.drives[j].clone();
                if d.role != Role::Primary || d.transition != Level::G1 {
                    continue;
                }
                let op = embed_single(d.site, Level::Ryd, d.transition, n)?;
                out.push_with_adjoint(op, Arc::new(move |t| d.coefficient(t) * factor))?;
            }
            out
        }
        ErrorSpec::Combined { epsilon, delta_v } => {
            let mut out = h.drive_terms(0..h.drives.len()).scaled(epsilon);
            out.extend(interaction(delta_v))?;
            out
        }
    })
}

pub fn error_hamiltonian(spec: &ErrorSpec, h: &LabHamiltonian, t: f64) -> Result<Operator> {
    Ok(error_terms(spec, h)?.at(t))
}

/// `(shift scaling, coupling scaling, δV)` of a spec at the effective level.
pub fn effective_scalings(spec: &ErrorSpec) -> Result<(f64, f64, f64)> {
    Ok(match *spec {
        ErrorSpec::None => (1.0, 1.0, 0.0),
        ErrorSpec::Global { epsilon } => ((1.0 + epsilon).powi(2), (1.0 + epsilon).powi(2), 0.0),
        ErrorSpec::Local { epsilon } => ((1.0 + epsilon).powi(2), 1.0 + epsilon, 0.0),
        ErrorSpec::Interaction { delta_v } => (1.0, 1.0, delta_v),
        ErrorSpec::Combined { epsilon, delta_v } => (1.0 + epsilon, 1.0 + epsilon, delta_v),
        ErrorSpec::Phase { .. } => {
            return Err(Error::InvalidParameter("phase errors have no closed effective form".into()))
        }
    })
}

pub fn perturbed_effective(spec: &ErrorSpec, e: &EffectiveTwoLevel) -> Result<EffectiveTwoLevel> {
    let (s_shift, s_rabi, dv) = effective_scalings(spec)?;
    Ok(e.rescaled(s_shift, s_rabi, dv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// Prefactor of `2oρo† − o†oρ − ρo†o`.
    pub rate: f64,
    pub op: SparseOperator,
    pub label: String,
}

/// `σᶻ = |0⟩⟨0| + |1⟩⟨1| − |r⟩⟨r|` on one atom.
pub fn sigma_z(site: usize, n_atoms: usize) -> Result<SparseOperator> {
    let p0 = embed_single(site, Level::G0, Level::G0, n_atoms)?;
    let p1 = embed_single(site, Level::G1, Level::G1, n_atoms)?;
    let pr = embed_single(site, Level::Ryd, Level::Ryd, n_atoms)?;
    p0.add(&p1)?.add(&pr.scale(C64::new(-1.0, 0.0)))
}

pub fn collapse_operators(noise: &NoiseParams, n_atoms: usize) -> Result<Vec<Channel>> {
    noise.validate()?;
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("need at least one atom".into()));
    }
    let mut out = Vec::new();
    for j in 0..n_atoms {
        let entries = [
            (noise.kappa0, embed_single(j, Level::G0, Level::Ryd, n_atoms)?, format!("decay_r0_{j}")),
            (noise.kappa1, embed_single(j, Level::G1, Level::Ryd, n_atoms)?, format!("decay_r1_{j}")),
            (noise.kappa_z, sigma_z(j, n_atoms)?, format!("dephasing_{j}")),
        ];
        for (kappa, op, label) in entries {
            if kappa > 0.0 {
                out.push(Channel { rate: 0.5 * kappa, op, label });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{stage_hamiltonian, DriveParams, SignSchedule, StageId, StageSpec};
    use crate::units::{c6_from_ghz, mhz, to_mhz};

    fn bell(stage: u8) -> LabHamiltonian {
        let v = mhz(20.0);
        stage_hamiltonian(&StageSpec {
            id: StageId { step: 1, stage },
            n_atoms: 2,
            params: DriveParams::from_ratios(v, 5.0, 0.5).unwrap(),
            window: (0.0, 1e-6),
            primary: Arc::new(|t| C64::new(2e7 * (1.0 + 1e6 * t), 0.0)),
            dressing: Some((Arc::new(|_| C64::new(7e6, 0.0)), SignSchedule::constant(1.0))),
        })
        .unwrap()
    }

    #[test]
    fn vdw_examples() {
        let c6 = c6_from_ghz(5.36e3);
        assert!((to_mhz(vdw_interaction(&VdwGeometry::new(c6, 8.030).unwrap())) - 20.0).abs() < 0.2);
        assert!((to_mhz(vdw_interaction(&VdwGeometry::new(c6, 5.470).unwrap())) - 200.0).abs() < 2.0);
        let a = vdw_interaction(&VdwGeometry::new(c6, 4.0).unwrap());
        let b = vdw_interaction(&VdwGeometry::new(c6, 8.0).unwrap());
        assert!((a / b - 64.0).abs() < 1e-9);
    }

    #[test]
    fn fluctuation_examples() {
        let c6 = c6_from_ghz(5.36e3);
        let g20 = VdwGeometry::new(c6, 8.030).unwrap();
        let g200 = VdwGeometry::new(c6, 5.470).unwrap();
        assert!((to_mhz(interaction_fluctuation(&g20, 1e-3).unwrap().abs()) - 0.015).abs() < 0.001);
        assert!((to_mhz(interaction_fluctuation(&g200, 1e-3).unwrap().abs()) - 0.220).abs() < 0.005);
        assert_eq!(interaction_fluctuation(&g20, 0.0).unwrap(), 0.0);
        assert!(interaction_fluctuation(&g20, -9.0).is_err());
    }

    #[test]
    fn fluctuation_linearisation() {
        let g = VdwGeometry::new(c6_from_ghz(5.36e3), 8.030).unwrap();
        let v = vdw_interaction(&g);
        for x in [-1.5e-4, -5e-5, 2e-5, 1.5e-4] {
            let dd = x * g.d;
            let exact = interaction_fluctuation(&g, dd).unwrap();
            let lin = -6.0 * v * dd / g.d;
            assert!((exact - lin).abs() / exact.abs() <= 1e-3);
        }
    }

    #[test]
    fn zero_errors_vanish() {
        let h = bell(1);
        for spec in [ErrorSpec::Global { epsilon: 0.0 }, ErrorSpec::Interaction { delta_v: 0.0 }, ErrorSpec::None] {
            assert_eq!(error_hamiltonian(&spec, &h, 3e-7).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn global_is_local_plus_second_atom() {
        let h = bell(1);
        let eps = 0.07;
        let second: Vec<usize> = (0..h.drives.len()).filter(|&j| h.drives[j].frame_sign < 0.0).collect();
        let second_terms = h.drive_terms(second).scaled(eps);
        for k in 0..20 {
            let t = k as f64 * 4.3e-8;
            let g = error_hamiltonian(&ErrorSpec::Global { epsilon: eps }, &h, t).unwrap();
            let l = error_hamiltonian(&ErrorSpec::Local { epsilon: eps }, &h, t).unwrap();
            let diff = g.sub(&l.add(&second_terms.at(t)).unwrap()).unwrap();
            assert!(diff.max_abs() <= 1e-9 * g.max_abs());
        }
    }

    #[test]
    fn phase_error_is_first_order() {
        let h = bell(2);
        let t = 2.1e-7;
        let reference = error_hamiltonian(&ErrorSpec::Phase { delta_phi: 1e-6 }, &h, t).unwrap().scale(C64::new(1e6, 0.0));
        for dphi in [0.01, 0.02, 0.05] {
            let e = error_hamiltonian(&ErrorSpec::Phase { delta_phi: dphi }, &h, t).unwrap();
            let dev = e.sub(&reference.scale(C64::new(dphi, 0.0))).unwrap().max_abs();
            let amp = reference.max_abs();
            assert!(dev <= amp * dphi * dphi, "δφ={dphi}: {dev} vs {}", amp * dphi * dphi);
        }
        assert!(error_hamiltonian(&ErrorSpec::Phase { delta_phi: 0.05 }, &bell(1), t).unwrap().max_abs() == 0.0);
    }

    fn dummy_effective() -> EffectiveTwoLevel {
        use crate::tensor::BasisLabel;
        EffectiveTwoLevel {
            pair: (BasisLabel::parse("00").unwrap(), BasisLabel::parse("rr").unwrap()),
            delta_r: Arc::new(|_| 2.0),
            delta_g: Arc::new(|_| -3.0),
            omega_eff: Arc::new(|_| C64::new(-5.0, 0.0)),
            warnings: vec![],
        }
    }

    #[test]
    fn perturbed_effective_scalings() {
        let e = dummy_effective();
        let g = perturbed_effective(&ErrorSpec::Global { epsilon: -1.0 }, &e).unwrap();
        assert_eq!(((g.delta_r)(0.0), (g.delta_g)(0.0), (g.omega_eff)(0.0).norm()), (0.0, 0.0, 0.0));
        let l = perturbed_effective(&ErrorSpec::Local { epsilon: 0.05 }, &e).unwrap();
        assert!(((l.delta_r)(0.0) - 2.0 * 1.1025).abs() < 1e-12);
        assert!(((l.delta_g)(0.0) + 3.0 * 1.1025).abs() < 1e-12);
        assert!(((l.omega_eff)(0.0).re + 5.0 * 1.05).abs() < 1e-12);
        let gamma = crate::units::GAMMA;
        let i = perturbed_effective(&ErrorSpec::Interaction { delta_v: gamma }, &e).unwrap();
        assert_eq!((i.delta_r)(0.0), 2.0 + gamma);
        assert_eq!((i.delta_g)(0.0), -3.0);
        assert!(perturbed_effective(&ErrorSpec::Phase { delta_phi: 0.1 }, &e).is_err());
        assert!(ErrorSpec::Global { epsilon: -1.0 }.validate().is_err());
    }

    #[test]
    fn collapse_operator_lists() {
        let noise = NoiseParams::from_kappa(1e3).unwrap();
        let ch = collapse_operators(&noise, 2).unwrap();
        assert_eq!(ch.len(), 6);
        assert_eq!(ch[0].rate, 500.0);
        assert!((ch[2].rate - 50.0).abs() < 1e-12);
        assert!(collapse_operators(&NoiseParams::none(), 2).unwrap().is_empty());
        assert!(NoiseParams::new(-1.0, 0.0, 0.0).is_err());
        let sz = sigma_z(1, 2).unwrap();
        assert!(sz.is_hermitian(0.0));
        assert_eq!(sz.matmul(&sz).unwrap(), SparseOperator::identity(2));
    }
}
