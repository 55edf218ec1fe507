//! Lab-frame and second-rotated Hamiltonians of driven Rydberg chains.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::TermHamiltonian;
use crate::tensor::{adjacent_rydberg_pairs, chain_rr_projector_sum, dim_for, embed_single, BasisLabel, Level, Operator, C64, ZERO};

pub type Envelope = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

pub fn zero_envelope() -> Envelope {
    Arc::new(|_| ZERO)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Primary,
    Dressing,
}

/// Piecewise-constant ±1 multiplier on a detuning.
///
/// The drive phase is the running integral of the signed detuning, so a flip
/// keeps the phase continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSchedule {
    flips: Vec<f64>,
    signs: Vec<f64>,
}

impl SignSchedule {
    pub fn constant(sign: f64) -> Self {
        Self { flips: Vec::new(), signs: vec![sign.signum()] }
    }

    /// `signs[i]` applies before `flips[i]`; the last sign applies after all flips.
    pub fn new(flips: Vec<f64>, signs: Vec<f64>) -> Result<Self> {
        if signs.len() != flips.len() + 1 || flips.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("sign schedule needs sorted flips and one more sign".into()));
        }
        Ok(Self { flips, signs: signs.into_iter().map(f64::signum).collect() })
    }

    /// Locates the sign changes of `f` on `[t0, t1]` by sampling and bisection.
    pub fn from_sign_of(f: impl Fn(f64) -> f64, t0: f64, t1: f64, samples: usize) -> Self {
        let mut flips = Vec::new();
        let mut signs = Vec::new();
        let h = (t1 - t0) / samples.max(1) as f64;
        let sign_at = |t: f64| if f(t) < 0.0 { -1.0 } else { 1.0 };
        // The first interior sample fixes the leading sign so a zero at t0 does not count.
        let mut current = sign_at(t0 + 0.5 * h);
        signs.push(current);
        let mut prev_t = t0 + 0.5 * h;
        let mut k = 1;
        while prev_t < t1 - 0.5 * h {
            let t = (t0 + (k as f64 + 0.5) * h).min(t1);
            let s = sign_at(t);
            if s != current {
                let (mut a, mut b) = (prev_t, t);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if sign_at(m) == current {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                flips.push(0.5 * (a + b));
                signs.push(s);
                current = s;
            }
            prev_t = t;
            k += 1;
        }
        Self { flips, signs }
    }

    pub fn sign(&self, t: f64) -> f64 {
        let k = self.flips.partition_point(|&f| f <= t);
        self.signs[k]
    }

    pub fn flips(&self) -> &[f64] {
        &self.flips
    }

    /// `∫_0^t s(t') dt'`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut last = 0.0;
        for (i, &f) in self.flips.iter().enumerate() {
            if f >= t {
                return acc + self.signs[i] * (t - last);
            }
            acc += self.signs[i] * (f - last);
            last = f;
        }
        acc + self.signs[self.flips.len()] * (t - last)
    }
}

#[derive(Clone)]
pub struct DriveTerm {
    pub site: usize,
    /// Ground level coupled to `ryd`.
    pub transition: Level,
    pub envelope: Envelope,
    /// Magnitude of the detuning [rad/s].
    pub detuning: f64,
    pub sign_schedule: Option<SignSchedule>,
    pub role: Role,
    /// +1 for `e^{+iΔt}` (red-detuned), −1 for `e^{−iΔt}` (blue-detuned).
    pub frame_sign: f64,
    /// Half-open activity window; the envelope is zero outside.
    pub window: Option<(f64, f64)>,
}

impl std::fmt::Debug for DriveTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriveTerm")
            .field("site", &self.site)
            .field("transition", &self.transition)
            .field("detuning", &self.detuning)
            .field("role", &self.role)
            .field("frame_sign", &self.frame_sign)
            .field("window", &self.window)
            .finish()
    }
}

impl DriveTerm {
    pub fn active(&self, t: f64) -> bool {
        self.window.is_none_or(|(a, b)| t >= a && t < b)
    }

    pub fn envelope_at(&self, t: f64) -> C64 {
        if self.active(t) {
            (self.envelope)(t)
        } else {
            ZERO
        }
    }

    /// Signed detuning in effect at `t`.
    pub fn signed_detuning(&self, t: f64) -> f64 {
        self.detuning * self.sign_schedule.as_ref().map_or(1.0, |s| s.sign(t))
    }

    pub fn phase(&self, t: f64) -> f64 {
        let integral = self.sign_schedule.as_ref().map_or(t, |s| s.integral(t));
        self.frame_sign * self.detuning * integral
    }

    /// Coefficient of `|r⟩⟨n|` in the lab rotating frame.
    pub fn coefficient(&self, t: f64) -> C64 {
        let env = self.envelope_at(t);
        if env == ZERO {
            return ZERO;
        }
        env * C64::from_polar(1.0, self.phase(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    /// Nearest-neighbour `|rr⟩` shift [rad/s].
    pub v: f64,
}

impl InteractionSpec {
    pub fn new(v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("interaction V must be positive, got {v}")));
        }
        Ok(Self { v })
    }
}

#[derive(Clone, Debug)]
pub struct LabHamiltonian {
    pub drives: Vec<DriveTerm>,
    pub interaction: InteractionSpec,
    pub n_atoms: usize,
}

impl LabHamiltonian {
    pub fn new(drives: Vec<DriveTerm>, interaction: InteractionSpec, n_atoms: usize) -> Result<Self> {
        if let Some(d) = drives.iter().find(|d| d.site >= n_atoms) {
            return Err(Error::SiteOutOfRange { site: d.site, n_atoms });
        }
        if let Some(d) = drives.iter().find(|d| d.transition == Level::Ryd) {
            return Err(Error::InvalidParameter(format!("drive on site {} couples ryd to itself", d.site)));
        }
        Ok(Self { drives, interaction, n_atoms })
    }

    fn drive_operator(&self, d: &DriveTerm) -> crate::tensor::SparseOperator {
        embed_single(d.site, Level::Ryd, d.transition, self.n_atoms).expect("site validated on construction")
    }

    /// Drive terms only, in the lab rotating frame.
    pub fn drive_terms(&self, drives: impl IntoIterator<Item = usize>) -> TermHamiltonian {
        let mut h = TermHamiltonian::new(self.n_atoms);
        for j in drives {
            let d = self.drives[j].clone();
            let op = self.drive_operator(&d);
            h.push_with_adjoint(op, Arc::new(move |t| d.coefficient(t))).expect("matching atom count");
        }
        h
    }

    /// Full lab-frame generator including the interaction.
    pub fn terms(&self) -> TermHamiltonian {
        let mut h = self.drive_terms(0..self.drives.len());
        h.push_static(chain_rr_projector_sum(self.n_atoms).scale(C64::new(self.interaction.v, 0.0)))
            .expect("matching atom count");
        h
    }

    /// Drive terms in the frame rotating with `V Σ|rr⟩⟨rr|`.
    pub fn rotated_terms(&self) -> TermHamiltonian {
        let n = self.n_atoms;
        let v = self.interaction.v;
        let mut h = TermHamiltonian::new(n);
        for d in &self.drives {
            let op = self.drive_operator(d);
            let mut by_shift: BTreeMap<i64, Vec<(usize, usize, C64)>> = BTreeMap::new();
            for (r, c, val) in op.triplets() {
                let shift = adjacent_rydberg_pairs(r, n) as i64 - adjacent_rydberg_pairs(c, n) as i64;
                by_shift.entry(shift).or_default().push((r, c, val));
            }
            for (shift, triplets) in by_shift {
                let piece = crate::tensor::SparseOperator::from_triplets(n, triplets);
                let d = d.clone();
                let w = v * shift as f64;
                h.push_with_adjoint(piece, Arc::new(move |t| d.coefficient(t) * C64::from_polar(1.0, w * t)))
                    .expect("matching atom count");
            }
        }
        h
    }

    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        self.terms().at(t)
    }

    pub fn second_rotated_at(&self, t: f64) -> Operator {
        let n = self.n_atoms;
        let d = dim_for(n);
        let counts: Vec<f64> = (0..d).map(|i| adjacent_rydberg_pairs(i, n) as f64).collect();
        let mut data = self.drive_terms(0..self.drives.len()).at(t).into_array();
        let v = self.interaction.v;
        for a in 0..d {
            for b in 0..d {
                if data[[a, b]] != ZERO {
                    data[[a, b]] *= C64::from_polar(1.0, v * t * (counts[a] - counts[b]));
                }
            }
        }
        Operator::from_array(data).expect("square power-of-three matrix")
    }

    /// Largest phase frequency present, `max |Δ_j| + V`.
    pub fn fastest_frequency(&self) -> f64 {
        self.drives.iter().fold(0.0_f64, |m, d| m.max(d.detuning.abs())) + self.interaction.v
    }
}

/// Detunings of one protocol stage [rad/s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub v: f64,
    /// Red detuning of the first atom of the pair.
    pub delta1: f64,
    /// Blue detuning of the second atom, `Δ1 + V`.
    pub delta2: f64,
    /// Magnitude of the dressing detuning.
    pub delta_d: f64,
}

impl DriveParams {
    pub fn from_ratios(v: f64, delta1_over_v: f64, dressing_over_delta1: f64) -> Result<Self> {
        InteractionSpec::new(v)?;
        let delta1 = delta1_over_v * v;
        let p = Self { v, delta1, delta2: delta1 + v, delta_d: dressing_over_delta1 * delta1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        InteractionSpec::new(self.v)?;
        if !(self.delta1 > 0.0 && self.delta_d > 0.0) {
            return Err(Error::InvalidParameter("detunings must be positive magnitudes".into()));
        }
        if ((self.delta2 - self.delta1) - self.v).abs() > 1e-9 * self.v {
            return Err(Error::InvalidParameter(format!(
                "detunings must satisfy Δ2 = Δ1 + V (Δ1={}, Δ2={}, V={})",
                self.delta1, self.delta2, self.v
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageId {
    /// Protocol step, 1-based; step 1 is the Bell protocol.
    pub step: usize,
    /// 1 or 2.
    pub stage: u8,
}

impl StageId {
    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        if n_atoms < 2 || self.step == 0 || self.step >= n_atoms || !(self.stage == 1 || self.stage == 2) {
            return Err(Error::InvalidStage(format!(
                "step {} stage {} with {} atoms",
                self.step, self.stage, n_atoms
            )));
        }
        Ok(())
    }

    /// Sites `(first, second)` of the driven pair.
    pub fn sites(&self) -> (usize, usize) {
        (self.step - 1, self.step)
    }

    /// Ground-state transitions driven on `(first, second)`.
    pub fn transitions(&self) -> (Level, Level) {
        match (self.step, self.stage) {
            (1, 1) => (Level::G0, Level::G0),
            (_, 1) => (Level::G1, Level::G0),
            _ => (Level::G1, Level::G1),
        }
    }

    /// The coupled pair `(ground-like, doubly excited)`.
    pub fn bright_pair(&self, n_atoms: usize) -> Result<(BasisLabel, BasisLabel)> {
        self.validate(n_atoms)?;
        let (a, b) = self.sites();
        let mut ground = vec![Level::G0; n_atoms];
        for level in ground.iter_mut().take(a) {
            *level = Level::G1;
        }
        let (ta, tb) = self.transitions();
        ground[a] = ta;
        ground[b] = tb;
        let mut rr = ground.clone();
        rr[a] = Level::Ryd;
        rr[b] = Level::Ryd;
        Ok((BasisLabel::new(ground)?, BasisLabel::new(rr)?))
    }
}

/// Everything needed to lay out one stage's drives.
#[derive(Clone)]
pub struct StageSpec {
    pub id: StageId,
    pub n_atoms: usize,
    pub params: DriveParams,
    pub window: (f64, f64),
    /// Common envelope `Ω^{(1)} = Ω^{(2)}` of the two primaries.
    pub primary: Envelope,
    pub dressing: Option<(Envelope, SignSchedule)>,
}

pub fn stage_hamiltonian(stage: &StageSpec) -> Result<LabHamiltonian> {
    stage.id.validate(stage.n_atoms)?;
    stage.params.validate()?;
    let (a, b) = stage.id.sites();
    let (ta, tb) = stage.id.transitions();
    let window = Some(stage.window);
    let mut drives = vec![
        DriveTerm {
            site: a,
            transition: ta,
            envelope: stage.primary.clone(),
            detuning: stage.params.delta1,
            sign_schedule: None,
            role: Role::Primary,
            frame_sign: 1.0,
            window,
        },
        DriveTerm {
            site: b,
            transition: tb,
            envelope: stage.primary.clone(),
            detuning: stage.params.delta2,
            sign_schedule: None,
            role: Role::Primary,
            frame_sign: -1.0,
            window,
        },
    ];
    if let Some((env, signs)) = &stage.dressing {
        drives.push(DriveTerm {
            site: a,
            transition: ta,
            envelope: env.clone(),
            detuning: stage.params.delta_d,
            sign_schedule: Some(signs.clone()),
            role: Role::Dressing,
            frame_sign: 1.0,
            window,
        });
    }
    LabHamiltonian::new(drives, InteractionSpec::new(stage.params.v)?, stage.n_atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{expm, Operator};
    use ndarray::Array1;

    fn two_pi() -> f64 {
        2.0 * std::f64::consts::PI
    }

    fn bell_stage(omega: f64, omega_d: f64, stage: u8) -> StageSpec {
        let v = two_pi() * 20e6;
        StageSpec {
            id: StageId { step: 1, stage },
            n_atoms: 2,
            params: DriveParams::from_ratios(v, 5.0, 0.5).unwrap(),
            window: (0.0, 1.0),
            primary: Arc::new(move |t| C64::new(omega * (1.0 + 0.3 * (3e7 * t).sin()), 0.0)),
            dressing: Some((Arc::new(move |_| C64::new(omega_d, 0.0)), SignSchedule::constant(1.0))),
        }
    }

    #[test]
    fn fields_off_leaves_interaction() {
        let v = 3.0;
        let h = LabHamiltonian::new(vec![], InteractionSpec::new(v).unwrap(), 3).unwrap();
        let expected = chain_rr_projector_sum(3).scale(C64::new(v, 0.0)).to_dense();
        assert_eq!(h.hamiltonian_at(0.4), expected);
    }

    #[test]
    fn single_resonant_drive() {
        let omega = 1.7;
        let d = DriveTerm {
            site: 0,
            transition: Level::G0,
            envelope: Arc::new(move |_| C64::new(omega, 0.0)),
            detuning: 0.0,
            sign_schedule: None,
            role: Role::Primary,
            frame_sign: 1.0,
            window: None,
        };
        let h = LabHamiltonian::new(vec![d], InteractionSpec::new(1.0).unwrap(), 1).unwrap();
        let op = h.hamiltonian_at(0.77);
        let mut expected = Operator::zeros(1).into_array();
        expected[[0, 2]] = C64::new(omega, 0.0);
        expected[[2, 0]] = C64::new(omega, 0.0);
        assert_eq!(op.array(), &expected);
    }

    #[test]
    fn hermitian_on_time_grid() {
        let h = stage_hamiltonian(&bell_stage(2e7, 1e7, 1)).unwrap();
        for k in 0..50 {
            let t = k as f64 * 1.3e-9;
            assert!(h.hamiltonian_at(t).hermiticity_defect() < 1e-12 * 1e8);
            assert!(h.second_rotated_at(t).hermiticity_defect() < 1e-12 * 1e8);
        }
    }

    #[test]
    fn rotated_at_zero_drops_interaction() {
        let h = stage_hamiltonian(&bell_stage(2e7, 1e7, 1)).unwrap();
        let v = h.interaction.v;
        let lab = h.hamiltonian_at(0.0);
        let inter = chain_rr_projector_sum(2).scale(C64::new(v, 0.0)).to_dense();
        assert!(h.second_rotated_at(0.0).max_abs_diff(&lab.sub(&inter).unwrap()).unwrap() < 1e-6);
    }

    #[test]
    fn rotated_terms_match_dense_rotation() {
        let h = stage_hamiltonian(&bell_stage(2e7, 1e7, 2)).unwrap();
        let terms = h.rotated_terms();
        for k in 0..20 {
            let t = k as f64 * 3.1e-9;
            assert!(terms.at(t).max_abs_diff(&h.second_rotated_at(t)).unwrap() < 1e-6);
        }
    }

    #[test]
    fn rotation_oracle_from_matrix_exponential() {
        let h = stage_hamiltonian(&bell_stage(2e7, 1e7, 1)).unwrap();
        let v = h.interaction.v;
        let p = chain_rr_projector_sum(2).to_dense();
        for k in 1..10 {
            let t = k as f64 * 7.3e-9;
            let u = expm(&p.scale(C64::new(0.0, -v * t)).into_array());
            let u = Operator::from_array(u).unwrap();
            let lab = h.hamiltonian_at(t).sub(&p.scale(C64::new(v, 0.0))).unwrap();
            let oracle = u.adjoint().matmul(&lab).unwrap().matmul(&u).unwrap();
            let scale = oracle.max_abs();
            assert!(oracle.max_abs_diff(&h.second_rotated_at(t)).unwrap() < 1e-12 * scale);
        }
    }

    #[test]
    fn rr_element_carries_interaction_phase() {
        let omega = 2e7;
        let spec = StageSpec { primary: Arc::new(move |_| C64::new(omega, 0.0)), dressing: None, ..bell_stage(0.0, 0.0, 1) };
        let h = stage_hamiltonian(&spec).unwrap();
        let v = h.interaction.v;
        let d1 = spec.params.delta1;
        let rr = BasisLabel::parse("rr").unwrap().index();
        let zr = BasisLabel::parse("0r").unwrap().index();
        for t in [1e-9, 5.5e-9, 2.2e-8] {
            let el = h.second_rotated_at(t).get(rr, zr);
            let expected = C64::from_polar(omega, (d1 + v) * t);
            assert!((el - expected).norm() < 1e-9 * omega);
        }
    }

    #[test]
    fn bell_support_is_single_level_changes() {
        let h = stage_hamiltonian(&bell_stage(2e7, 1e7, 1)).unwrap();
        let op = h.second_rotated_at(3e-9);
        for a in 0..9 {
            for b in 0..9 {
                if a != b && op.get(a, b).norm() > 0.0 {
                    let la = BasisLabel::from_index(a, 2).unwrap();
                    let lb = BasisLabel::from_index(b, 2).unwrap();
                    let diffs: Vec<usize> = (0..2).filter(|&s| la.atoms()[s] != lb.atoms()[s]).collect();
                    assert_eq!(diffs.len(), 1);
                    let s = diffs[0];
                    assert!(la.atoms()[s] == Level::Ryd || lb.atoms()[s] == Level::Ryd);
                }
            }
        }
    }

    #[test]
    fn stage_patterns() {
        let bell1 = stage_hamiltonian(&bell_stage(1.0, 1.0, 1)).unwrap();
        assert_eq!(bell1.drives.len(), 3);
        assert!(bell1.drives.iter().all(|d| d.transition == Level::G0));
        let bell2 = stage_hamiltonian(&bell_stage(1.0, 1.0, 2)).unwrap();
        assert!(bell2.drives.iter().all(|d| d.transition == Level::G1));
        let mut s = bell_stage(1.0, 1.0, 1);
        s.id = StageId { step: 2, stage: 1 };
        s.n_atoms = 3;
        let k2 = stage_hamiltonian(&s).unwrap();
        let on = |site: usize| k2.drives.iter().filter(|d| d.site == site).map(|d| d.transition).collect::<Vec<_>>();
        assert_eq!(on(1), vec![Level::G1, Level::G1]);
        assert_eq!(on(2), vec![Level::G0]);
        assert!(on(0).is_empty());
        let p = s.params;
        assert!((p.delta2 - p.delta1 - p.v).abs() < 1e-12 * p.v);
        s.id = StageId { step: 3, stage: 1 };
        assert!(matches!(stage_hamiltonian(&s), Err(Error::InvalidStage(_))));
        s.id = StageId { step: 1, stage: 3 };
        assert!(stage_hamiltonian(&s).is_err());
    }

    #[test]
    fn bright_pairs() {
        let pair = |step, stage, n| {
            let (g, rr) = StageId { step, stage }.bright_pair(n).unwrap();
            (g.to_string(), rr.to_string())
        };
        assert_eq!(pair(1, 1, 2), ("00".into(), "rr".into()));
        assert_eq!(pair(1, 2, 2), ("11".into(), "rr".into()));
        assert_eq!(pair(2, 1, 4), ("1100".into(), "1rr0".into()));
        assert_eq!(pair(3, 2, 4), ("1111".into(), "11rr".into()));
    }

    #[test]
    fn sign_schedule_integral_is_continuous() {
        let s = SignSchedule::from_sign_of(|t| (t - 0.3).cos(), 0.0, 6.0, 100);
        let pi = std::f64::consts::PI;
        assert_eq!(s.flips().len(), 2);
        assert!((s.flips()[0] - (0.3 + pi / 2.0)).abs() < 1e-12);
        let f = s.flips()[0];
        assert!((s.integral(f - 1e-12) - s.integral(f + 1e-12)).abs() < 1e-11);
        assert_eq!(s.sign(0.1), 1.0);
        assert_eq!(s.sign(2.0), -1.0);
        assert!((s.integral(2.0) - (f - (2.0 - f))).abs() < 1e-12);
    }

    #[test]
    fn frame_equivalence_closed_evolution() {
        // RK4 on both frames; the lab state equals U(t) times the rotated state.
        let spec = bell_stage(2.0 * two_pi() * 1e6, 1.5 * two_pi() * 1e6, 1);
        let h = stage_hamiltonian(&spec).unwrap();
        let lab = h.terms();
        let rot = h.rotated_terms();
        let v = h.interaction.v;
        let n_steps = 40_000;
        let t_end = 50e-9;
        let dt = t_end / n_steps as f64;
        let rk4 = |gen: &crate::hamiltonian::TermHamiltonian, psi0: Array1<C64>| {
            let f = |t: f64, y: &Array1<C64>| gen.at(t).apply(y).unwrap().mapv(|x| x * C64::new(0.0, -1.0));
            let mut y = psi0;
            for k in 0..n_steps {
                let t = k as f64 * dt;
                let k1 = f(t, &y);
                let k2 = f(t + 0.5 * dt, &(&y + &k1.mapv(|x| x * 0.5 * dt)));
                let k3 = f(t + 0.5 * dt, &(&y + &k2.mapv(|x| x * 0.5 * dt)));
                let k4 = f(t + dt, &(&y + &k3.mapv(|x| x * dt)));
                y = &y + &((&k1 + &k2.mapv(|x| x * 2.0) + &k3.mapv(|x| x * 2.0) + &k4).mapv(|x| x * dt / 6.0));
            }
            y
        };
        let mut psi = Array1::from_shape_fn(9, |i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()));
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        psi.mapv_inplace(|x| x / norm);
        let a = rk4(&lab, psi.clone());
        let mut b = rk4(&rot, psi);
        for i in 0..9 {
            b[i] *= C64::from_polar(1.0, -v * t_end * adjacent_rydberg_pairs(i, 2) as f64);
        }
        let overlap: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!(overlap.norm_sqr() > 1.0 - 1e-8, "overlap {}", overlap.norm_sqr());
    }
}
