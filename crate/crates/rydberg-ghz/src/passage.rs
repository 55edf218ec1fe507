//! Nonadiabatic passages on a bright pair: the θ schedule, the derived
//! α and global phase f, the effective and physical controls, and the
//! von Neumann and error-suppression diagnostics.
//!
//! Pair vectors are written in the basis `[ground-like, doubly excited]`.
//! The tracked passage is
//! `μ₁ = cos θ e^{iα/2}|g⟩ − sin θ e^{−iα/2}|rr⟩` and its partner
//! `μ₂ = sin θ e^{iα/2}|g⟩ + cos θ e^{−iα/2}|rr⟩`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::drive::{DriveParams, Envelope, SignSchedule, StageId, StageSpec};
use crate::effective::{effective_from_stage, EffectiveTwoLevel};
use crate::error::{Error, Result};
use crate::tensor::{spectral_norm, C64, I, ZERO};

pub trait AngleSchedule: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn rate(&self, t: f64) -> f64;
}

/// `θ(t) = θ₀ + rate·(t − t₀)` on `[t₀, t₁]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRamp {
    pub t0: f64,
    pub t1: f64,
    pub theta0: f64,
    pub rate: f64,
}

impl AngleSchedule for LinearRamp {
    fn value(&self, t: f64) -> f64 {
        if t < self.t0 || t > self.t1 {
            0.0
        } else {
            self.theta0 + self.rate * (t - self.t0)
        }
    }

    fn rate(&self, t: f64) -> f64 {
        if t < self.t0 || t > self.t1 {
            0.0
        } else {
            self.rate
        }
    }
}

/// Time window of stage `stage` of protocol step `step` (both 1-based).
pub fn stage_window(step: usize, stage: u8, t_stage: f64) -> (f64, f64) {
    let start = (2 * (step - 1) + (stage as usize - 1)) as f64 * t_stage;
    (start, start + t_stage)
}

pub fn theta_schedule(step: usize, stage: u8, t_stage: f64) -> Result<LinearRamp> {
    if !(t_stage > 0.0) {
        return Err(Error::InvalidParameter(format!("stage duration must be positive, got {t_stage}")));
    }
    if step == 0 || !(stage == 1 || stage == 2) {
        return Err(Error::InvalidStage(format!("step {step} stage {stage}")));
    }
    let (t0, t1) = stage_window(step, stage, t_stage);
    let (theta0, rate) = match (step, stage) {
        (1, 1) => (0.0, PI / (4.0 * t_stage)),
        (_, 1) => (0.0, PI / (2.0 * t_stage)),
        _ => (FRAC_PI_2, PI / (2.0 * t_stage)),
    };
    Ok(LinearRamp { t0, t1, theta0, rate })
}

/// θ schedule, correction gain, and the derived α and f of one stage.
#[derive(Clone)]
pub struct PassageParams {
    pub theta: Arc<dyn AngleSchedule>,
    pub lambda: f64,
    pub window: (f64, f64),
}

impl std::fmt::Debug for PassageParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PassageParams").field("lambda", &self.lambda).field("window", &self.window).finish()
    }
}

pub fn derive_alpha_f(theta: Arc<dyn AngleSchedule>, lambda: f64, window: (f64, f64)) -> Result<PassageParams> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter("correction gain must be finite".into()));
    }
    if !(window.1 > window.0) {
        return Err(Error::InvalidParameter("stage window must be increasing".into()));
    }
    Ok(PassageParams { theta, lambda, window })
}

impl PassageParams {
    pub fn linear(ramp: LinearRamp, lambda: f64) -> Result<Self> {
        derive_alpha_f(Arc::new(ramp), lambda, (ramp.t0, ramp.t1))
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.theta.value(t)
    }

    pub fn theta_dot(&self, t: f64) -> f64 {
        self.theta.rate(t)
    }

    /// `α = π/2 + atan(λ sin 2θ)`, the `(0, π)` branch of `cot α = −λ sin 2θ`.
    pub fn alpha(&self, t: f64) -> f64 {
        FRAC_PI_2 + (self.lambda * (2.0 * self.theta(t)).sin()).atan()
    }

    pub fn alpha_dot(&self, t: f64) -> f64 {
        let th = self.theta(t);
        let s = (2.0 * th).sin();
        2.0 * self.lambda * self.theta_dot(t) * (2.0 * th).cos() / (1.0 + self.lambda * self.lambda * s * s)
    }

    pub fn f(&self, t: f64) -> f64 {
        self.lambda * (self.theta(t) - self.theta(self.window.0))
    }

    pub fn f_dot(&self, t: f64) -> f64 {
        self.lambda * self.theta_dot(t)
    }

    fn inside(&self, t: f64) -> bool {
        t >= self.window.0 && t < self.window.1
    }

    /// `(μ₁, μ₂)` at `t`.
    pub fn basis(&self, t: f64) -> [[C64; 2]; 2] {
        let th = self.theta(t);
        let a = self.alpha(t);
        let p = C64::from_polar(1.0, 0.5 * a);
        let m = p.conj();
        let (s, c) = th.sin_cos();
        [[p * c, -m * s], [p * s, m * c]]
    }

    /// Time derivatives of `(μ₁, μ₂)`.
    pub fn basis_dot(&self, t: f64) -> [[C64; 2]; 2] {
        let th = self.theta(t);
        let a = self.alpha(t);
        let td = self.theta_dot(t);
        let ad = 0.5 * self.alpha_dot(t);
        let p = C64::from_polar(1.0, 0.5 * a);
        let m = p.conj();
        let (s, c) = th.sin_cos();
        [
            [p * (-td * s + I * ad * c), m * (-td * c + I * ad * s)],
            [p * (td * c + I * ad * s), m * (-td * s - I * ad * c)],
        ]
    }

    pub fn projector(&self, t: f64) -> Array2<C64> {
        let mu = self.basis(t)[0];
        Array2::from_shape_fn((2, 2), |(i, j)| mu[i] * mu[j].conj())
    }

    pub fn projector_dot(&self, t: f64) -> Array2<C64> {
        let mu = self.basis(t)[0];
        let md = self.basis_dot(t)[0];
        Array2::from_shape_fn((2, 2), |(i, j)| md[i] * mu[j].conj() + mu[i] * md[j].conj())
    }

    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.window;
        let n = n.max(2);
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }
}

/// Effective controls realising a passage on the pair.
#[derive(Clone, Debug)]
pub struct SynthesizedControls {
    pub passage: PassageParams,
}

impl SynthesizedControls {
    /// `Δ_r = α̇/2 + ḟ cos 2θ`; zero outside the stage.
    pub fn delta_r(&self, t: f64) -> f64 {
        let p = &self.passage;
        if !p.inside(t) {
            return 0.0;
        }
        0.5 * p.alpha_dot(t) + p.f_dot(t) * (2.0 * p.theta(t)).cos()
    }

    /// `Ω = −sqrt(θ̇² + ḟ² sin² 2θ)`; zero outside the stage.
    pub fn omega_eff(&self, t: f64) -> f64 {
        let p = &self.passage;
        if !p.inside(t) {
            return 0.0;
        }
        let s = (2.0 * p.theta(t)).sin();
        -(p.theta_dot(t).powi(2) + (p.f_dot(t) * s).powi(2)).sqrt()
    }

    /// The design Hamiltonian on the pair, with `Δ_g = −Δ_r`.
    pub fn pair_matrix(&self, t: f64) -> Array2<C64> {
        let dr = self.delta_r(t);
        let om = self.omega_eff(t);
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = C64::new(-dr, 0.0);
        m[[1, 1]] = C64::new(dr, 0.0);
        m[[0, 1]] = C64::new(om, 0.0);
        m[[1, 0]] = C64::new(om, 0.0);
        m
    }

    pub fn max_abs_omega(&self) -> f64 {
        self.passage.sample_times(2001).iter().map(|&t| self.omega_eff(t.min(self.passage.window.1 - 1e-15 * t.abs().max(1.0))).abs()).fold(0.0, f64::max)
    }

    /// Pole-free residuals of the two control conditions and the phase relation, relative to `max|Ω|`.
    pub fn condition_residuals(&self, t: f64) -> [f64; 3] {
        let p = &self.passage;
        let th = p.theta(t);
        let a = p.alpha(t);
        let s2 = (2.0 * th).sin();
        let c2 = (2.0 * th).cos();
        let om = self.omega_eff(t);
        let dr = self.delta_r(t);
        let scale = self.max_abs_omega().max(f64::MIN_POSITIVE);
        let r1 = 2.0 * dr * s2 - p.alpha_dot(t) * s2 - 2.0 * om * c2 * a.cos();
        let r2 = om * a.sin() + p.theta_dot(t);
        let r3 = p.f_dot(t) * s2 * a.sin() + p.theta_dot(t) * a.cos();
        [r1.abs() / scale, r2.abs() / scale, r3.abs() / scale]
    }
}

pub fn synthesize_effective(p: &PassageParams) -> Result<SynthesizedControls> {
    let s = SynthesizedControls { passage: p.clone() };
    for t in p.sample_times(1001) {
        if !(s.delta_r(t).is_finite() && s.omega_eff(t).is_finite()) {
            return Err(Error::NonFinite(format!("synthesized control at t = {t:e}")));
        }
    }
    Ok(s)
}

/// Physical drive envelopes for one stage.
#[derive(Clone)]
pub struct PhysicalControls {
    pub params: DriveParams,
    pub window: (f64, f64),
    pub primary: Envelope,
    pub dressing: Envelope,
    pub dressing_sign: SignSchedule,
}

impl std::fmt::Debug for PhysicalControls {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhysicalControls")
            .field("params", &self.params)
            .field("window", &self.window)
            .field("dressing_sign", &self.dressing_sign)
            .finish()
    }
}

impl PhysicalControls {
    pub fn stage_spec(&self, id: StageId, n_atoms: usize) -> StageSpec {
        StageSpec {
            id,
            n_atoms,
            params: self.params,
            window: self.window,
            primary: self.primary.clone(),
            dressing: Some((self.dressing.clone(), self.dressing_sign.clone())),
        }
    }

    /// Returns a copy with the primary envelope multiplied by `factor`.
    pub fn with_primary_scaled(&self, factor: f64) -> PhysicalControls {
        let prim = self.primary.clone();
        PhysicalControls { primary: Arc::new(move |t| prim(t) * factor), ..self.clone() }
    }
}

/// Dressing Rabi frequency squared whose bright-pair half-splitting equals `delta_r`.
fn dressing_intensity(delta_r: f64, sign: f64, params: &DriveParams) -> f64 {
    let ds = sign * params.delta_d;
    let per_unit = 0.5 * (1.0 / (ds + params.v) + 1.0 / ds);
    delta_r.abs() / per_unit.abs()
}

pub fn synthesize_physical(s: &SynthesizedControls, params: DriveParams) -> Result<PhysicalControls> {
    params.validate()?;
    let gap = params.delta2 - params.delta1;
    if !(gap > 0.0) {
        return Err(Error::Infeasible("Δ2 must exceed Δ1".into()));
    }
    let window = s.passage.window;
    let (t0, t1) = window;
    let probe = s.clone();
    let signs = SignSchedule::from_sign_of(move |t| probe.delta_r(t), t0, t1, 4096);
    let needs_negative = s.passage.sample_times(4097).into_iter().any(|t| s.delta_r(t) < 0.0);
    if needs_negative && params.delta_d <= params.v {
        return Err(Error::Infeasible(format!(
            "negative Δ_r needs |Δ_d| > V (Δ_d = {}, V = {})",
            params.delta_d, params.v
        )));
    }
    let scale = params.delta1 * params.delta2 / gap;
    let sp = s.clone();
    let primary: Envelope = Arc::new(move |t| C64::new((sp.omega_eff(t).abs() * scale).sqrt(), 0.0));
    let sd = s.clone();
    let sign_for_dressing = signs.clone();
    let dressing: Envelope = Arc::new(move |t| {
        let dr = sd.delta_r(t);
        if dr == 0.0 {
            return ZERO;
        }
        C64::new(dressing_intensity(dr, sign_for_dressing.sign(t), &params).sqrt(), 0.0)
    });
    Ok(PhysicalControls { params, window, primary, dressing, dressing_sign: signs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    /// Max deviation of the realised half-splitting from `Δ_r`, relative to `max|Δ_r|` (or `max|Ω|` when `Δ_r ≡ 0`).
    pub delta_r_error: f64,
    /// Max deviation of the realised coupling from `Ω`, relative to `max|Ω|`.
    pub omega_error: f64,
}

impl RoundTrip {
    pub fn max(&self) -> f64 {
        self.delta_r_error.max(self.omega_error)
    }
}

/// Re-derives the effective controls from the physical drives.
pub fn round_trip(s: &SynthesizedControls, e: &EffectiveTwoLevel) -> RoundTrip {
    let (t0, t1) = s.passage.window;
    let n = 4001;
    let times: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
    let om_max = times.iter().map(|&t| s.omega_eff(t).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let dr_max = times.iter().map(|&t| s.delta_r(t).abs()).fold(0.0, f64::max);
    let dr_scale = if dr_max > 0.0 { dr_max } else { om_max };
    let mut dr_err: f64 = 0.0;
    let mut om_err: f64 = 0.0;
    for &t in &times {
        let split = 0.5 * ((e.delta_r)(t) - (e.delta_g)(t));
        dr_err = dr_err.max((split - s.delta_r(t)).abs() / dr_scale);
        om_err = om_err.max(((e.omega_eff)(t) - C64::new(s.omega_eff(t), 0.0)).norm() / om_max);
    }
    RoundTrip { delta_r_error: dr_err, omega_error: om_err }
}

/// One synthesized stage: passage, effective and physical controls.
#[derive(Clone, Debug)]
pub struct SynthesizedStage {
    pub id: StageId,
    pub n_atoms: usize,
    pub controls: SynthesizedControls,
    pub physical: PhysicalControls,
}

impl SynthesizedStage {
    pub fn new(id: StageId, n_atoms: usize, t_stage: f64, lambda: f64, params: DriveParams) -> Result<Self> {
        id.validate(n_atoms)?;
        let ramp = theta_schedule(id.step, id.stage, t_stage)?;
        let passage = PassageParams::linear(ramp, lambda)?;
        let controls = synthesize_effective(&passage)?;
        let physical = synthesize_physical(&controls, params)?;
        Ok(Self { id, n_atoms, controls, physical })
    }

    pub fn stage_spec(&self) -> StageSpec {
        self.physical.stage_spec(self.id, self.n_atoms)
    }

    pub fn effective(&self) -> Result<EffectiveTwoLevel> {
        effective_from_stage(&self.stage_spec())
    }
}

pub const VON_NEUMANN_TOL: f64 = 1e-6;

/// `max_t ‖Π̇₁ + i[H, Π₁]‖₂` over the stage interior.
pub fn von_neumann_residual(h_eff: &dyn Fn(f64) -> Array2<C64>, p: &PassageParams) -> f64 {
    let (t0, t1) = p.window;
    let n = 2001;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let t = t0 + (t1 - t0) * (k as f64 + 0.5) / n as f64;
        let h = h_eff(t);
        let pi = p.projector(t);
        let comm = h.dot(&pi) - pi.dot(&h);
        let r = p.projector_dot(t) + comm.mapv(|x| x * I);
        worst = worst.max(spectral_norm(&r));
    }
    worst
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

fn simpson_c(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
    if b == a {
        return ZERO;
    }
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

fn inner(a: &[C64; 2], b: &[C64; 2]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn sandwich(a: &[C64; 2], m: &Array2<C64>, b: &[C64; 2]) -> C64 {
    let mb = [m[[0, 0]] * b[0] + m[[0, 1]] * b[1], m[[1, 0]] * b[0] + m[[1, 1]] * b[1]];
    inner(a, &mb)
}

/// Accumulated passage phases `f_k(t) = ∫ (𝒢_kk − 𝒟_kk)` from the stage start.
///
/// The integrand is evaluated strictly inside the half-open stage so the
/// endpoint value uses the stage's own controls.
pub fn accumulated_phases(p: &PassageParams, h_eff: &dyn Fn(f64) -> Array2<C64>, t: f64) -> [f64; 2] {
    let (t0, t1) = p.window;
    let end = t.clamp(t0, t1);
    let inner_end = if end >= t1 { t1 - (t1 - t0) * 1e-12 } else { end };
    let n = 4000;
    let phase = |k: usize| {
        simpson(
            |s| {
                let mu = p.basis(s)[k];
                let md = p.basis_dot(s)[k];
                let g = (I * inner(&mu, &md)).re;
                let d = sandwich(&mu, &h_eff(s), &mu).re;
                g - d
            },
            t0,
            inner_end,
            n,
        )
    };
    [phase(0), phase(1)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    /// 2×2 in the pair basis.
    pub matrix: Array2<C64>,
    pub phases: [f64; 2],
    pub residual: f64,
}

/// `U₀(t) = Σ_k e^{i f_k(t)} |μ_k(t)⟩⟨μ_k(t₀)|` on the pair.
pub fn transitionless_propagator(p: &PassageParams, h_eff: &dyn Fn(f64) -> Array2<C64>, t: f64) -> Result<Propagator> {
    let residual = von_neumann_residual(h_eff, p);
    let om_max = p
        .sample_times(2001)
        .iter()
        .map(|&s| spectral_norm(&h_eff(s.min(p.window.1 - (p.window.1 - p.window.0) * 1e-12))))
        .fold(0.0, f64::max);
    let threshold = VON_NEUMANN_TOL * om_max.max(p.theta_dot(p.window.0).abs());
    if residual > threshold && residual > 1e-300 {
        return Err(Error::ConditionViolated { residual, threshold });
    }
    let phases = accumulated_phases(p, h_eff, t);
    let t_eval = t.clamp(p.window.0, p.window.1);
    let now = p.basis(t_eval);
    let start = p.basis(p.window.0);
    let mut m = Array2::zeros((2, 2));
    for k in 0..2 {
        let ph = C64::from_polar(1.0, phases[k]);
        for i in 0..2 {
            for j in 0..2 {
                m[[i, j]] += ph * now[k][i] * start[k][j].conj();
            }
        }
    }
    Ok(Propagator { matrix: m, phases, residual })
}

/// `|∫ ⟨μ₁|H_e|μ₂⟩ e^{−i(f₁−f₂)} dt|²` over the stage with `f₁ = f`, `f₂ = −f`.
pub fn correction_diagnostic(p: &PassageParams, h_err: &dyn Fn(f64) -> Array2<C64>) -> f64 {
    let (t0, t1) = p.window;
    let end = t1 - (t1 - t0) * 1e-12;
    let amp = simpson_c(
        |s| {
            let b = p.basis(s);
            let f = p.f(s);
            sandwich(&b[0], &h_err(s), &b[1]) * C64::from_polar(1.0, -2.0 * f)
        },
        t0,
        end,
        8000,
    );
    amp.norm_sqr()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub t: f64,
    pub theta: f64,
    pub alpha: f64,
    pub f: f64,
    pub delta_r: f64,
    pub omega_eff: f64,
    pub omega_primary: f64,
    pub omega_dressing: f64,
    pub dressing_sign: f64,
}

pub fn sample_stage(stage: &SynthesizedStage, n: usize) -> Vec<ControlSample> {
    let (t0, t1) = stage.controls.passage.window;
    let p = &stage.controls.passage;
    (0..n.max(1))
        .map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / n.max(1) as f64;
            ControlSample {
                t,
                theta: p.theta(t),
                alpha: p.alpha(t),
                f: p.f(t),
                delta_r: stage.controls.delta_r(t),
                omega_eff: stage.controls.omega_eff(t),
                omega_primary: (stage.physical.primary)(t).re,
                omega_dressing: (stage.physical.dressing)(t).re,
                dressing_sign: stage.physical.dressing_sign.sign(t),
            }
        })
        .collect()
}

pub fn write_controls_csv<W: Write>(mut w: W, samples: &[ControlSample]) -> Result<()> {
    writeln!(w, "t,theta,alpha,f,delta_r,omega_eff,omega_primary,omega_dressing,dressing_sign")?;
    for s in samples {
        writeln!(
            w,
            "{:e},{},{},{},{:e},{:e},{:e},{:e},{}",
            s.t, s.theta, s.alpha, s.f, s.delta_r, s.omega_eff, s.omega_primary, s.omega_dressing, s.dressing_sign
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = 2.0 * PI;

    fn bell_passage(lambda: f64) -> PassageParams {
        PassageParams::linear(theta_schedule(1, 1, 1.0).unwrap(), lambda).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        let t = 2.5;
        assert!((theta_schedule(1, 1, t).unwrap().value(t) - PI / 4.0).abs() < 1e-15);
        assert!((theta_schedule(1, 2, t).unwrap().value(2.0 * t) - PI).abs() < 1e-15);
        let k2a = theta_schedule(2, 1, t).unwrap();
        let k2b = theta_schedule(2, 2, t).unwrap();
        assert!(k2a.value(2.0 * t * (1.0 + 1e-15)).abs() < 1e-12);
        assert!((k2b.value(4.0 * t) - PI).abs() < 1e-15);
        assert_eq!(k2b.value(4.0 * t * (1.0 + 1e-12)), 0.0);
        assert!(theta_schedule(1, 1, 0.0).is_err());
    }

    #[test]
    fn alpha_and_f_examples() {
        let p = bell_passage(0.0);
        for t in [0.0, 0.3, 0.9] {
            assert_eq!(p.alpha(t), FRAC_PI_2);
            assert_eq!(p.f(t), 0.0);
        }
        let ramp = LinearRamp { t0: 0.0, t1: 1.0, theta0: PI / 4.0, rate: 0.0 };
        let p = PassageParams::linear(ramp, 1.0).unwrap();
        assert!((p.alpha(0.5) - 3.0 * PI / 4.0).abs() < 1e-15);
        for th in [0.0, FRAC_PI_2, PI] {
            let ramp = LinearRamp { t0: 0.0, t1: 1.0, theta0: th, rate: 0.0 };
            let p = PassageParams::linear(ramp, 7.0).unwrap();
            assert!((p.alpha(0.2) - FRAC_PI_2).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_zero_controls() {
        let s = synthesize_effective(&bell_passage(0.0)).unwrap();
        for t in [0.0, 0.4, 0.99] {
            assert!((s.omega_eff(t) + PI / 4.0).abs() < 1e-15);
            assert_eq!(s.delta_r(t), 0.0);
        }
    }

    #[test]
    fn lambda_five_start_value() {
        let p = bell_passage(5.0);
        let s = synthesize_effective(&p).unwrap();
        let rate = PI / 4.0;
        assert!((s.delta_r(0.0) - 2.0 * 5.0 * rate).abs() < 1e-12);
        assert!(s.condition_residuals(0.0).iter().all(|&r| r < 1e-8));
    }

    #[test]
    fn static_epoch_has_no_controls() {
        let ramp = LinearRamp { t0: 0.0, t1: 1.0, theta0: 0.3, rate: 0.0 };
        let s = synthesize_effective(&PassageParams::linear(ramp, 3.0).unwrap()).unwrap();
        assert_eq!(s.omega_eff(0.5), 0.0);
        assert_eq!(s.delta_r(0.5), 0.0);
    }

    #[test]
    fn condition_residuals_all_stages() {
        for lambda in [0.0, 1.0, 5.0, 10.0] {
            for (step, stage) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                let p = PassageParams::linear(theta_schedule(step, stage, 1.0).unwrap(), lambda).unwrap();
                let s = synthesize_effective(&p).unwrap();
                for t in p.sample_times(501).into_iter().filter(|&t| t < p.window.1) {
                    let th = p.theta(t);
                    let near_pole = [0.0, FRAC_PI_2, PI].iter().any(|&x| (th - x).abs() < 1e-3);
                    let r = s.condition_residuals(t);
                    assert!(r[1] < 1e-8 && r[2] < 1e-8, "{r:?}");
                    if !near_pole {
                        assert!(r[0] < 1e-8, "{r:?} at θ={th}");
                    }
                }
            }
        }
    }

    #[test]
    fn omega_magnitude_identity() {
        let p = bell_passage(3.0);
        let s = synthesize_effective(&p).unwrap();
        for t in p.sample_times(50) {
            if t >= 1.0 {
                continue;
            }
            let lhs = s.omega_eff(t).abs();
            let rhs = (p.theta_dot(t).powi(2) + (p.f_dot(t) * (2.0 * p.theta(t)).sin()).powi(2)).sqrt();
            assert!((lhs - rhs).abs() < 1e-14);
            assert!(s.omega_eff(t) <= 0.0);
        }
    }

    #[test]
    fn von_neumann_self_consistency() {
        for lambda in [0.0, 1.0, 5.0, 10.0] {
            for (step, stage) in [(1, 1), (1, 2), (3, 1), (3, 2)] {
                let p = PassageParams::linear(theta_schedule(step, stage, 1.0).unwrap(), lambda).unwrap();
                let s = synthesize_effective(&p).unwrap();
                let r = von_neumann_residual(&|t| s.pair_matrix(t), &p);
                assert!(r < 1e-6 * s.max_abs_omega(), "λ={lambda} {step}/{stage}: {r}");
            }
        }
    }

    #[test]
    fn von_neumann_static_dark_state() {
        let ramp = LinearRamp { t0: 0.0, t1: 1.0, theta0: 0.0, rate: 0.0 };
        let p = PassageParams::linear(ramp, 0.0).unwrap();
        let h = |_t: f64| {
            let mut m = Array2::zeros((2, 2));
            m[[0, 0]] = C64::new(-1.0, 0.0);
            m[[1, 1]] = C64::new(2.0, 0.0);
            m
        };
        assert_eq!(von_neumann_residual(&h, &p), 0.0);
    }

    #[test]
    fn von_neumann_detects_perturbation() {
        let p = bell_passage(2.0);
        let s = synthesize_effective(&p).unwrap();
        let exact = von_neumann_residual(&|t| s.pair_matrix(t), &p);
        let mut previous = exact;
        for factor in [1.01, 1.05, 1.1] {
            let r = von_neumann_residual(&|t| s.pair_matrix(t) + offdiag(&s, t, factor - 1.0), &p);
            assert!(r > previous);
            previous = r;
        }
    }

    fn offdiag(s: &SynthesizedControls, t: f64, extra: f64) -> Array2<C64> {
        let mut m = Array2::zeros((2, 2));
        let om = s.omega_eff(t) * extra;
        m[[0, 1]] = C64::new(om, 0.0);
        m[[1, 0]] = C64::new(om, 0.0);
        m
    }

    fn propagate(h: &dyn Fn(f64) -> Array2<C64>, psi: [C64; 2], t0: f64, t1: f64, n: usize) -> [C64; 2] {
        let dt = (t1 - t0) / n as f64;
        let f = |t: f64, y: [C64; 2]| {
            let m = h(t);
            [-I * (m[[0, 0]] * y[0] + m[[0, 1]] * y[1]), -I * (m[[1, 0]] * y[0] + m[[1, 1]] * y[1])]
        };
        let mut y = psi;
        let add = |a: [C64; 2], b: [C64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        for k in 0..n {
            let t = t0 + k as f64 * dt;
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * dt, add(y, k1, 0.5 * dt));
            let k3 = f(t + 0.5 * dt, add(y, k2, 0.5 * dt));
            let k4 = f(t + dt, add(y, k3, dt));
            y = [
                y[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (dt / 6.0),
                y[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (dt / 6.0),
            ];
        }
        y
    }

    #[test]
    fn propagator_identity_and_unitarity() {
        let p = bell_passage(4.0);
        let s = synthesize_effective(&p).unwrap();
        let h = |t: f64| s.pair_matrix(t);
        let u0 = transitionless_propagator(&p, &h, 0.0).unwrap();
        assert!((u0.matrix.clone() - Array2::<C64>::eye(2)).iter().all(|x| x.norm() < 1e-12));
        for t in [0.3, 0.7, 1.0] {
            let u = transitionless_propagator(&p, &h, t).unwrap().matrix;
            let id = u.t().mapv(|x| x.conj()).dot(&u);
            assert!((id - Array2::<C64>::eye(2)).iter().all(|x| x.norm() < 1e-10));
        }
    }

    #[test]
    fn propagator_matches_numerical_propagation() {
        for lambda in [0.0, 2.0, 7.0] {
            for (step, stage) in [(1, 1), (1, 2)] {
                let p = PassageParams::linear(theta_schedule(step, stage, 1.0).unwrap(), lambda).unwrap();
                let s = synthesize_effective(&p).unwrap();
                let h = |t: f64| s.pair_matrix(t);
                let (t0, t1) = p.window;
                let u = transitionless_propagator(&p, &h, t1).unwrap().matrix;
                for psi in [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]] {
                    let numeric = propagate(&h, psi, t0, t1 - 1e-13, 20000);
                    let analytic = [u[[0, 0]] * psi[0] + u[[0, 1]] * psi[1], u[[1, 0]] * psi[0] + u[[1, 1]] * psi[1]];
                    let d = (numeric[0] - analytic[0]).norm() + (numeric[1] - analytic[1]).norm();
                    assert!(d < 1e-8, "λ={lambda} stage {step}/{stage}: {d}");
                }
            }
        }
    }

    #[test]
    fn bell_stage_one_gives_equal_superposition() {
        let p = bell_passage(0.0);
        let s = synthesize_effective(&p).unwrap();
        let u = transitionless_propagator(&p, &|t| s.pair_matrix(t), 1.0).unwrap().matrix;
        let out = [u[[0, 0]], u[[1, 0]]];
        assert!((out[0].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((out[1].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn effective_propagation_reaches_target_for_any_lambda() {
        for lambda in [0.0, 0.5, 2.0, 5.0, 10.0] {
            let p = bell_passage(lambda);
            let s = synthesize_effective(&p).unwrap();
            let h = |t: f64| s.pair_matrix(t);
            let target = transitionless_propagator(&p, &h, 1.0).unwrap().matrix;
            let psi = propagate(&h, [C64::new(1.0, 0.0), ZERO], 0.0, 1.0 - 1e-13, 20000);
            let ov = target[[0, 0]].conj() * psi[0] + target[[1, 0]].conj() * psi[1];
            assert!(ov.norm_sqr() >= 1.0 - 1e-6, "λ={lambda}: {}", ov.norm_sqr());
        }
    }

    #[test]
    fn propagator_rejects_wrong_hamiltonian() {
        let p = bell_passage(1.0);
        let s = synthesize_effective(&p).unwrap();
        let h = |t: f64| s.pair_matrix(t) * C64::new(1.1, 0.0);
        assert!(matches!(transitionless_propagator(&p, &h, 1.0), Err(Error::ConditionViolated { .. })));
    }

    fn local_error(s: &SynthesizedControls, eps: f64) -> impl Fn(f64) -> Array2<C64> + '_ {
        move |t| {
            let dr = s.delta_r(t) * ((1.0 + eps).powi(2) - 1.0);
            let om = s.omega_eff(t) * eps;
            let mut m = Array2::zeros((2, 2));
            m[[0, 0]] = C64::new(-dr, 0.0);
            m[[1, 1]] = C64::new(dr, 0.0);
            m[[0, 1]] = C64::new(om, 0.0);
            m[[1, 0]] = C64::new(om, 0.0);
            m
        }
    }

    #[test]
    fn diagnostic_trivial_cases() {
        let p = bell_passage(3.0);
        assert_eq!(correction_diagnostic(&p, &|_| Array2::zeros((2, 2))), 0.0);
        let diag_in_passage = |t: f64| {
            let b = p.basis(t);
            Array2::from_shape_fn((2, 2), |(i, j)| b[0][i] * b[0][j].conj() * 0.7 - b[1][i] * b[1][j].conj() * 0.2)
        };
        assert!(correction_diagnostic(&p, &diag_in_passage) < 1e-20);
    }

    #[test]
    fn diagnostic_decreases_with_lambda_for_local_error() {
        // The error Hamiltonian is the e=0.05 local deviation of the λ=0 drive, held fixed.
        let base = synthesize_effective(&bell_passage(0.0)).unwrap();
        let h_err = local_error(&base, 0.05);
        let values: Vec<f64> = [0.0, 2.0, 5.0, 8.0]
            .iter()
            .map(|&l| correction_diagnostic(&bell_passage(l), &h_err))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn physical_synthesis_round_trip() {
        let v = TWO_PI * 20e6;
        let params = DriveParams::from_ratios(v, 5.0, 0.5).unwrap();
        for lambda in [0.0, 1.0, 5.0, 10.0] {
            for (step, stage) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                let st = SynthesizedStage::new(StageId { step, stage }, 3, 50.0 / (TWO_PI * 1e6), lambda, params).unwrap();
                let e = st.effective().unwrap();
                let rt = round_trip(&st.controls, &e);
                assert!(rt.max() < 1e-6, "λ={lambda} {step}/{stage}: {rt:?}");
            }
        }
    }

    #[test]
    fn dressing_off_without_correction() {
        let v = TWO_PI * 20e6;
        let params = DriveParams::from_ratios(v, 5.0, 0.5).unwrap();
        let st = SynthesizedStage::new(StageId { step: 1, stage: 1 }, 2, 50e-9, 0.0, params).unwrap();
        for t in [0.0, 10e-9, 49e-9] {
            assert_eq!((st.physical.dressing)(t), ZERO);
        }
        let om = (st.physical.primary)(10e-9).re;
        assert!(((st.physical.primary)(40e-9).re - om).abs() < 1e-6 * om);
        // Literal 50 ns stages need a primary Rabi frequency above V.
        assert!(om / v > 1.0);
    }

    #[test]
    fn negative_splitting_needs_large_dressing_detuning() {
        let v = TWO_PI * 20e6;
        let params = DriveParams { v, delta1: 5.0 * v, delta2: 6.0 * v, delta_d: 0.8 * v };
        let p = PassageParams::linear(theta_schedule(1, 2, 1e-6).unwrap(), 3.0).unwrap();
        let s = synthesize_effective(&p).unwrap();
        assert!(matches!(synthesize_physical(&s, params), Err(Error::Infeasible(_))));
        let equal = DriveParams { delta2: 5.0 * v, ..params };
        assert!(synthesize_physical(&s, equal).is_err());
    }

    #[test]
    fn dressing_sign_flips_at_stage_two_midpoint() {
        let v = TWO_PI * 20e6;
        let params = DriveParams::from_ratios(v, 5.0, 0.5).unwrap();
        let t_stage = 1e-6;
        let st = SynthesizedStage::new(StageId { step: 1, stage: 2 }, 2, t_stage, 5.0, params).unwrap();
        let flips = st.physical.dressing_sign.flips();
        assert_eq!(flips.len(), 1);
        assert!((flips[0] - 1.5 * t_stage).abs() < 1e-12 * t_stage);
        assert_eq!(st.physical.dressing_sign.sign(1.2 * t_stage), -1.0);
        assert_eq!(st.physical.dressing_sign.sign(1.8 * t_stage), 1.0);
    }

    #[test]
    fn controls_csv_header() {
        let v = TWO_PI * 20e6;
        let params = DriveParams::from_ratios(v, 5.0, 0.5).unwrap();
        let st = SynthesizedStage::new(StageId { step: 1, stage: 1 }, 2, 1e-6, 2.0, params).unwrap();
        let mut out = Vec::new();
        write_controls_csv(&mut out, &sample_stage(&st, 5)).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,theta,alpha,f,delta_r,omega_eff,omega_primary,omega_dressing,dressing_sign\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
