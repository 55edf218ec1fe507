//! Large-detuning effective Hamiltonians and their Magnus-expansion check.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::drive::{DriveTerm, LabHamiltonian, StageSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::TermHamiltonian;
use crate::tensor::{commutator, embed_single, BasisLabel, Operator, SparseOperator, C64, ONE, ZERO};

pub type RealSignal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexSignal = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Two coupled basis states with AC-Stark shifts and a two-photon coupling.
#[derive(Clone)]
pub struct EffectiveTwoLevel {
    /// `(ground-like, doubly excited)`.
    pub pair: (BasisLabel, BasisLabel),
    pub delta_r: RealSignal,
    pub delta_g: RealSignal,
    pub omega_eff: ComplexSignal,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for EffectiveTwoLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EffectiveTwoLevel")
            .field("pair", &(self.pair.0.to_string(), self.pair.1.to_string()))
            .field("warnings", &self.warnings)
            .finish()
    }
}

/// Smallest detuning-to-Rabi ratio accepted without a warning.
pub const LARGE_DETUNING_RATIO: f64 = 5.0;

impl EffectiveTwoLevel {
    pub fn n_atoms(&self) -> usize {
        self.pair.0.n_atoms()
    }

    /// 2×2 block in the basis `[ground-like, doubly excited]`.
    pub fn pair_matrix(&self, t: f64) -> Array2<C64> {
        let om = (self.omega_eff)(t);
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = C64::new((self.delta_g)(t), 0.0);
        m[[1, 1]] = C64::new((self.delta_r)(t), 0.0);
        m[[1, 0]] = om;
        m[[0, 1]] = om.conj();
        m
    }

    pub fn terms(&self) -> TermHamiltonian {
        let n = self.n_atoms();
        let g = self.pair.0.index();
        let rr = self.pair.1.index();
        let mut h = TermHamiltonian::new(n);
        let dr = self.delta_r.clone();
        let dg = self.delta_g.clone();
        let om = self.omega_eff.clone();
        let we = |i: usize, j: usize| SparseOperator::from_triplets(n, vec![(i, j, ONE)]);
        h.push(we(rr, rr), Arc::new(move |t| C64::new(dr(t), 0.0))).expect("atom count");
        h.push(we(g, g), Arc::new(move |t| C64::new(dg(t), 0.0))).expect("atom count");
        h.push_with_adjoint(we(rr, g), Arc::new(move |t| om(t))).expect("atom count");
        h
    }

    /// Scales the shifts by `s_shift` and the coupling by `s_rabi`, then adds `extra_rr` to the `|rr⟩` shift.
    pub fn rescaled(&self, s_shift: f64, s_rabi: f64, extra_rr: f64) -> EffectiveTwoLevel {
        let dr = self.delta_r.clone();
        let dg = self.delta_g.clone();
        let om = self.omega_eff.clone();
        EffectiveTwoLevel {
            pair: self.pair.clone(),
            delta_r: Arc::new(move |t| s_shift * dr(t) + extra_rr),
            delta_g: Arc::new(move |t| s_shift * dg(t)),
            omega_eff: Arc::new(move |t| om(t) * s_rabi),
            warnings: self.warnings.clone(),
        }
    }
}

pub fn effective_hamiltonian_at(e: &EffectiveTwoLevel, t: f64) -> Operator {
    e.terms().at(t)
}

/// Closed-form elimination of the detuned intermediate states of one stage.
pub fn effective_from_stage(stage: &StageSpec) -> Result<EffectiveTwoLevel> {
    stage.id.validate(stage.n_atoms)?;
    let p = stage.params;
    if p.delta1 == 0.0 || p.delta2 == 0.0 || p.delta_d == 0.0 {
        return Err(Error::InvalidParameter("zero detuning in effective model".into()));
    }
    let (dress_env, signs) = stage
        .dressing
        .clone()
        .ok_or_else(|| Error::InvalidStage("stage has no dressing drive".into()))?;
    let (t0, t1) = stage.window;
    let inside = move |t: f64| t >= t0 && t < t1;
    let v = p.v;
    let dd = p.delta_d;
    let coupling = 1.0 / p.delta2 - 1.0 / p.delta1;

    let mut warnings = Vec::new();
    let mut min_primary = f64::INFINITY;
    let mut min_dressing = f64::INFINITY;
    for k in 0..=256 {
        let t = t0 + (t1 - t0) * k as f64 / 256.0;
        let t = t.min(t1 - (t1 - t0) * 1e-9);
        let om = (stage.primary)(t).norm();
        let od = dress_env(t).norm();
        if om > 0.0 {
            min_primary = min_primary.min(p.delta1 / om);
        }
        if od > 0.0 {
            min_dressing = min_dressing.min(dd / od);
        }
    }
    if min_primary < LARGE_DETUNING_RATIO {
        warnings.push(format!("primary detuning only {min_primary:.2} times the Rabi frequency"));
    }
    if min_dressing < LARGE_DETUNING_RATIO {
        warnings.push(format!("dressing detuning only {min_dressing:.2} times the Rabi frequency"));
    }

    let ds = dress_env.clone();
    let ss = signs.clone();
    let delta_r: RealSignal = Arc::new(move |t| {
        if !inside(t) {
            return 0.0;
        }
        let od2 = ds(t).norm_sqr();
        if od2 == 0.0 {
            0.0
        } else {
            od2 / (ss.sign(t) * dd + v)
        }
    });
    let ds = dress_env;
    let ss = signs;
    let delta_g: RealSignal = Arc::new(move |t| {
        if !inside(t) {
            return 0.0;
        }
        let od2 = ds(t).norm_sqr();
        if od2 == 0.0 {
            0.0
        } else {
            -od2 / (ss.sign(t) * dd)
        }
    });
    let prim = stage.primary.clone();
    let omega_eff: ComplexSignal = Arc::new(move |t| {
        if !inside(t) {
            return ZERO;
        }
        let om = prim(t);
        om * om * coupling
    });
    Ok(EffectiveTwoLevel { pair: stage.id.bright_pair(stage.n_atoms)?, delta_r, delta_g, omega_eff, warnings })
}

/// Composite Simpson rule with a fixed number of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub intervals: usize,
}

impl Quadrature {
    /// At least `samples_per_period` samples per period `2π/omega_max`.
    pub fn resolving(omega_max: f64, span: f64, samples_per_period: usize) -> Self {
        let periods = span * omega_max / (2.0 * std::f64::consts::PI);
        let n = (periods * samples_per_period as f64).ceil().max(2.0) as usize;
        Self { intervals: n + n % 2 }
    }
}

fn simpson_operator(f: &dyn Fn(f64) -> Operator, a: f64, b: f64, q: Quadrature) -> Result<Operator> {
    let n = q.intervals.max(2);
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a).add(&f(b))?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc.add(&f(a + k as f64 * h).scale(C64::new(w, 0.0)))?;
    }
    let out = acc.scale(C64::new(h / 3.0, 0.0));
    if out.array().iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite("quadrature of H_I".into()));
    }
    Ok(out)
}

/// Second-order Magnus generator `−(i/2)[H_I(t), ∫_0^t H_I]`.
pub fn magnus_effective(h_i: &dyn Fn(f64) -> Operator, t: f64, quadrature: Quadrature) -> Result<Operator> {
    let integral = simpson_operator(h_i, 0.0, t, quadrature)?;
    let c = commutator(&h_i(t), &integral)?;
    Ok(c.scale(C64::new(0.0, -0.5)))
}

/// Magnus generator averaged over `[t_start, t_start + window]`.
///
/// The running integral is accumulated with Simpson panels of width
/// `window / samples`, so the cost is linear in the horizon.
pub fn averaged_magnus(h_i: &dyn Fn(f64) -> Operator, t_start: f64, window: f64, samples: usize) -> Result<Operator> {
    let samples = samples.max(2);
    let h = window / samples as f64;
    let lead_panels = (t_start / h).ceil() as usize;
    let h_lead = if lead_panels > 0 { t_start / lead_panels as f64 } else { 0.0 };
    let n = h_i(0.0).n_atoms();
    let panel = |a: f64, b: f64| -> Result<Operator> {
        let m = 0.5 * (a + b);
        let s = h_i(a).add(&h_i(m).scale(C64::new(4.0, 0.0)))?.add(&h_i(b))?;
        Ok(s.scale(C64::new((b - a) / 6.0, 0.0)))
    };
    let mut integral = Operator::zeros(n);
    for k in 0..lead_panels {
        integral = integral.add(&panel(k as f64 * h_lead, (k + 1) as f64 * h_lead)?)?;
    }
    let generator = |t: f64, integral: &Operator| -> Result<Operator> {
        Ok(commutator(&h_i(t), integral)?.scale(C64::new(0.0, -0.5)))
    };
    let mut acc = generator(t_start, &integral)?.scale(C64::new(0.5, 0.0));
    for k in 0..samples {
        let a = t_start + k as f64 * h;
        integral = integral.add(&panel(a, a + h)?)?;
        let w = if k + 1 == samples { 0.5 } else { 1.0 };
        acc = acc.add(&generator(a + h, &integral)?.scale(C64::new(w, 0.0)))?;
    }
    let out = acc.scale(C64::new(1.0 / samples as f64, 0.0));
    if out.array().iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite("averaged Magnus generator".into()));
    }
    Ok(out)
}

/// Restriction of `op` to the span of `labels`.
pub fn project(op: &Operator, labels: &[BasisLabel]) -> Array2<C64> {
    let d = labels.len();
    Array2::from_shape_fn((d, d), |(i, j)| op.get(labels[i].index(), labels[j].index()))
}

/// Removes the multiple of the identity from a square block.
pub fn traceless(m: &Array2<C64>) -> Array2<C64> {
    let d = m.nrows();
    let shift = m.diag().sum() / d as f64;
    let mut out = m.clone();
    for i in 0..d {
        out[[i, i]] -= shift;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossResonance {
    pub drive_a: usize,
    pub drive_b: usize,
    /// `|ω_a − ω_b|` of the two signed phase frequencies [rad/s].
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeDetuningReport {
    /// `Σ_j |Ω_j(horizon) − Ω_j(0)| / Δ_j`.
    pub first_order_residual: f64,
    /// `max_t Σ_j |Ω_j(t)|² / Δ_j²`.
    pub neglected_scale: f64,
    /// `Σ_j ∫ |Ω_j|² / Δ_j dt`.
    pub retained_scale: f64,
    pub ratio: f64,
    pub flagged: bool,
    pub cross_resonances: Vec<CrossResonance>,
}

pub const LARGE_DETUNING_RATIO_FLAG: f64 = 0.1;

pub fn validate_large_detuning(drives: &[DriveTerm], horizon: f64) -> LargeDetuningReport {
    let samples = 2000;
    let dt = horizon / samples as f64;
    let mut first_order = 0.0;
    let mut neglected: f64 = 0.0;
    let mut retained = 0.0;
    let active: Vec<&DriveTerm> = drives.iter().filter(|d| d.detuning != 0.0).collect();
    for d in &active {
        let delta = d.detuning.abs();
        first_order += ((d.envelope)(horizon) - (d.envelope)(0.0)).norm() / delta;
    }
    for k in 0..=samples {
        let t = k as f64 * dt;
        let mut inst = 0.0;
        let mut dens = 0.0;
        for d in &active {
            let om2 = (d.envelope)(t).norm_sqr();
            inst += om2 / d.detuning.powi(2);
            dens += om2 / d.detuning.abs();
        }
        neglected = neglected.max(inst);
        let w = if k == 0 || k == samples { 0.5 } else { 1.0 };
        retained += w * dens * dt;
    }
    let ratio = if retained > 0.0 { neglected / retained } else { 0.0 };
    let mut cross_resonances = Vec::new();
    for a in 0..drives.len() {
        for b in a + 1..drives.len() {
            let wa = drives[a].frame_sign * drives[a].detuning;
            let wb = drives[b].frame_sign * drives[b].detuning;
            cross_resonances.push(CrossResonance { drive_a: a, drive_b: b, mismatch: (wa - wb).abs() });
        }
    }
    LargeDetuningReport {
        first_order_residual: first_order,
        neglected_scale: neglected,
        retained_scale: retained,
        ratio,
        flagged: ratio > LARGE_DETUNING_RATIO_FLAG,
        cross_resonances,
    }
}

/// Magnus check of one stage: the averaged second-order generator projected
/// on the bright pair against the closed form, compared modulo the pair identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnusComparison {
    pub relative_error: f64,
    pub tolerance: f64,
    /// Common shift of the pair in the Magnus generator beyond the closed form.
    pub common_shift: f64,
    pub passed: bool,
}

pub fn compare_magnus(lab: &LabHamiltonian, effective: &EffectiveTwoLevel, t: f64, window: f64) -> Result<MagnusComparison> {
    // The window spans whole periods of every detuning, so the lower limit of the
    // inner integral only shifts the result by a commutator with the window average.
    let h_i = |s: f64| lab.second_rotated_at(t + s);
    let omega_max = lab.fastest_frequency();
    let samples = Quadrature::resolving(omega_max, window, 80).intervals;
    let magnus = averaged_magnus(&h_i, 0.0, window, samples)?;
    let labels = [effective.pair.0.clone(), effective.pair.1.clone()];
    let m = project(&magnus, &labels);
    let tm = t + 0.5 * window;
    let c = effective.pair_matrix(tm);
    let diff = traceless(&m) - traceless(&c);
    let norm_c = crate::tensor::spectral_norm(&c).max(crate::tensor::spectral_norm(&traceless(&c)));
    let relative_error = crate::tensor::spectral_norm(&diff) / norm_c;
    let ratio = lab
        .drives
        .iter()
        .filter(|d| d.envelope_at(tm).norm() > 0.0)
        .map(|d| d.envelope_at(tm).norm() / d.detuning.abs())
        .fold(0.0, f64::max);
    let common_shift = ((m[[0, 0]] + m[[1, 1]]) - (c[[0, 0]] + c[[1, 1]])).re / 2.0;
    Ok(MagnusComparison { relative_error, tolerance: ratio, common_shift, passed: relative_error <= ratio })
}

/// Embeds a 2×2 pair block into the full space.
pub fn embed_pair_block(block: &Array2<C64>, pair: &(BasisLabel, BasisLabel)) -> Operator {
    let n = pair.0.n_atoms();
    let idx = [pair.0.index(), pair.1.index()];
    let mut op = Operator::zeros(n).into_array();
    for i in 0..2 {
        for j in 0..2 {
            op[[idx[i], idx[j]]] = block[[i, j]];
        }
    }
    Operator::from_array(op).expect("power-of-three dimension")
}

/// `σ₊ = |r⟩⟨0|` on one atom, exposed for the Magnus examples.
pub fn single_atom_raising() -> SparseOperator {
    embed_single(0, crate::tensor::Level::Ryd, crate::tensor::Level::G0, 1).expect("site 0 of 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{stage_hamiltonian, DriveParams, SignSchedule, StageId};

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn stage(omega: f64, omega_d: f64, delta_d_over_v: f64) -> StageSpec {
        let v = TWO_PI * 20e6;
        let mut params = DriveParams::from_ratios(v, 5.0, 0.5).unwrap();
        params.delta_d = delta_d_over_v * v;
        StageSpec {
            id: StageId { step: 1, stage: 1 },
            n_atoms: 2,
            params,
            window: (0.0, 1.0),
            primary: Arc::new(move |_| C64::new(omega, 0.0)),
            dressing: Some((Arc::new(move |_| C64::new(omega_d, 0.0)), SignSchedule::constant(1.0))),
        }
    }

    #[test]
    fn no_dressing_no_shifts() {
        let e = effective_from_stage(&stage(1e7, 0.0, 2.5)).unwrap();
        for t in [0.0, 0.2, 0.7] {
            assert_eq!((e.delta_r)(t), 0.0);
            assert_eq!((e.delta_g)(t), 0.0);
        }
    }

    #[test]
    fn coupling_formula() {
        let om = 1.3e7;
        let s = stage(om, 0.0, 2.5);
        let v = s.params.v;
        let e = effective_from_stage(&s).unwrap();
        let expected = -om * om / (30.0 * v);
        assert!(((e.omega_eff)(0.3).re - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn shift_ratio() {
        let e = effective_from_stage(&stage(1e7, 5e6, 2.5)).unwrap();
        let r = (e.delta_r)(0.5) / (e.delta_g)(0.5);
        assert!((r + 5.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn missing_dressing_and_zero_detuning() {
        let mut s = stage(1e7, 0.0, 2.5);
        s.dressing = None;
        assert!(matches!(effective_from_stage(&s), Err(Error::InvalidStage(_))));
        let mut s = stage(1e7, 0.0, 2.5);
        s.params.delta_d = 0.0;
        assert!(matches!(effective_from_stage(&s), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn warns_outside_large_detuning() {
        let s = stage(1e7, 0.0, 2.5);
        assert!(effective_from_stage(&s).unwrap().warnings.is_empty());
        let s = stage(s.params.delta1 / 2.0, 0.0, 2.5);
        assert_eq!(effective_from_stage(&s).unwrap().warnings.len(), 1);
    }

    #[test]
    fn effective_operator_shape() {
        let s = stage(1e7, 5e6, 2.5);
        let e = effective_from_stage(&s).unwrap();
        let h = effective_hamiltonian_at(&e, 0.1);
        assert!(h.is_hermitian(0.0));
        let ev = crate::tensor::hermitian_eigenvalues(h.array());
        assert!(ev.iter().filter(|x| x.abs() > 1e-9).count() <= 2);
        let tr = h.trace().re;
        assert!((tr - ((e.delta_r)(0.1) + (e.delta_g)(0.1))).abs() < 1e-6);
        let mut flat = e.clone();
        flat.omega_eff = Arc::new(|_| ZERO);
        flat.delta_r = Arc::new(|_| 2.0);
        flat.delta_g = Arc::new(|_| -2.0);
        let m = flat.pair_matrix(0.0);
        assert_eq!(m[[0, 0]], C64::new(-2.0, 0.0));
        assert_eq!(m[[1, 1]], C64::new(2.0, 0.0));
    }

    #[test]
    fn shift_sum_shrinks_with_dressing_detuning() {
        let sums: Vec<f64> = [5.0, 10.0, 50.0]
            .iter()
            .map(|&r| {
                let e = effective_from_stage(&stage(1e7, 5e6, r)).unwrap();
                ((e.delta_r)(0.1) + (e.delta_g)(0.1)).abs() / (e.delta_r)(0.1).abs()
            })
            .collect();
        assert!(sums[0] > sums[1] && sums[1] > sums[2]);
        let s = stage(1e7, 5e6, 2.5);
        let e = effective_from_stage(&s).unwrap();
        let dr = (e.delta_r)(0.1);
        assert!((dr + (e.delta_g)(0.1)).abs() <= dr.abs() * s.params.v / s.params.delta_d * (1.0 + 1e-12));
    }

    #[test]
    fn magnus_constant_is_zero() {
        let h = |_t: f64| {
            let mut m = Operator::zeros(1).into_array();
            m[[0, 1]] = C64::new(0.3, 0.1);
            m[[1, 0]] = C64::new(0.3, -0.1);
            m[[2, 2]] = C64::new(0.7, 0.0);
            Operator::from_array(m).unwrap()
        };
        let out = magnus_effective(&h, 2.0, Quadrature { intervals: 40 }).unwrap();
        assert!(out.max_abs() < 1e-14);
    }

    #[test]
    fn magnus_two_level_stark_shift() {
        let omega = 1.0;
        let delta = 40.0;
        let up = single_atom_raising();
        let h = move |t: f64| {
            let c = C64::from_polar(omega, delta * t);
            up.scale(c).add(&up.adjoint().scale(c.conj())).unwrap().to_dense()
        };
        let period = TWO_PI / delta;
        let avg = averaged_magnus(&h, 3.0 * period, period, 400).unwrap();
        assert!(avg.is_hermitian(1e-10));
        let shift = omega * omega / delta;
        assert!((avg.get(2, 2).re - shift).abs() <= 2.0 * (omega / delta) * shift);
        assert!((avg.get(0, 0).re + shift).abs() <= 2.0 * (omega / delta) * shift);
        let single = magnus_effective(&h, 3.3 * period, Quadrature::resolving(delta, 3.3 * period, 40)).unwrap();
        assert!(single.is_hermitian(1e-10));
    }

    #[test]
    fn magnus_matches_closed_form_on_bell_stage() {
        let v = TWO_PI * 20e6;
        let om = v / 6.5;
        let od = 0.35 * v;
        let s = stage(om, od, 2.5);
        let lab = stage_hamiltonian(&s).unwrap();
        let e = effective_from_stage(&s).unwrap();
        let window = 4.0 * std::f64::consts::PI / v;
        for t in [0.0, 3.0 * window, 11.0 * window] {
            let cmp = compare_magnus(&lab, &e, t, window).unwrap();
            assert!(cmp.passed, "{cmp:?}");
            let expected_common = (e.omega_eff)(0.0).re;
            assert!((cmp.common_shift - expected_common).abs() < 0.3 * expected_common.abs(), "{cmp:?}");
        }
    }

    #[test]
    fn large_detuning_report() {
        let omega = 2.0;
        let mk = |env: crate::drive::Envelope, detuning: f64| DriveTerm {
            site: 0,
            transition: crate::tensor::Level::G0,
            envelope: env,
            detuning,
            sign_schedule: None,
            role: crate::drive::Role::Primary,
            frame_sign: 1.0,
            window: None,
        };
        let constant = mk(Arc::new(move |_| C64::new(omega, 0.0)), 10.0 * omega);
        let r = validate_large_detuning(std::slice::from_ref(&constant), 1.0 / omega);
        assert!((r.ratio - 0.1).abs() < 1e-9, "{r:?}");
        assert_eq!(r.first_order_residual, 0.0);
        let periodic = mk(Arc::new(move |t: f64| C64::new(omega * (TWO_PI * t).sin().powi(2), 0.0)), 10.0);
        let r = validate_large_detuning(&[periodic], 1.0);
        assert!(r.first_order_residual < 1e-12);
        let zero = mk(Arc::new(|_| ZERO), 5.0);
        let r = validate_large_detuning(&[zero], 1.0);
        assert_eq!((r.first_order_residual, r.neglected_scale, r.retained_scale, r.ratio), (0.0, 0.0, 0.0, 0.0));
        assert!(!r.flagged);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("neglected_scale"));
    }
}
