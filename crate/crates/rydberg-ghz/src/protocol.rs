//! The N−1-step GHZ sequencer: stage assembly, target states and fidelities.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drive::{stage_hamiltonian, DriveParams, InteractionSpec, LabHamiltonian, StageId};
use crate::effective::EffectiveTwoLevel;
use crate::error::{Error, Result};
use crate::hamiltonian::TermHamiltonian;
use crate::lindblad::{evolve, Diagnostics, EvolutionProblem, InitialState, IntegratorConfig, NamedObservable};
use crate::noise::{collapse_operators, effective_scalings, error_terms, ErrorSpec, NoiseParams, VdwGeometry};
use crate::passage::{sample_stage, stage_window, transitionless_propagator, SynthesizedStage};
use crate::tensor::{chain_rr_projector_sum, dim_for, BasisLabel, Level, ReducedDensity, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Full,
    Effective,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Model::Full),
            "effective" => Ok(Model::Effective),
            other => Err(Error::Config(format!("unknown model {other:?}, expected full or effective"))),
        }
    }
}

/// Largest chain simulated with the full lab-frame Hamiltonian.
pub const FULL_MODEL_MAX_ATOMS: usize = 3;

/// Resolution of a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// RK4 steps per fastest lab-frame period `2π/(max|Δ| + V)` in full-model runs.
    pub full_steps_per_period: f64,
    /// RK4 steps per stage in effective-model runs.
    pub effective_steps_per_stage: f64,
    /// Switches to the adaptive integrator with this tolerance.
    pub adaptive_tol: Option<f64>,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { full_steps_per_period: 80.0, effective_steps_per_stage: 2000.0, adaptive_tol: None }
    }
}

impl StepPolicy {
    /// Same integrator with every step halved.
    pub fn refined(&self) -> Self {
        Self {
            full_steps_per_period: 2.0 * self.full_steps_per_period,
            effective_steps_per_stage: 2.0 * self.effective_steps_per_stage,
            adaptive_tol: self.adaptive_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub n_atoms: usize,
    /// Stage duration `T` [s].
    pub t_stage: f64,
    pub lambda: f64,
    pub model: Model,
    pub params: DriveParams,
    /// Geometry behind `V`, when the interaction comes from an atom spacing.
    pub geometry: Option<VdwGeometry>,
    /// Field-off epoch after the last stage [s].
    pub hold_time: f64,
    pub steps: StepPolicy,
    pub outputs_per_stage: usize,
}

impl ProtocolPlan {
    pub fn new(n_atoms: usize, t_stage: f64, lambda: f64, model: Model, params: DriveParams) -> Result<Self> {
        let plan = Self {
            n_atoms,
            t_stage,
            lambda,
            model,
            params,
            geometry: None,
            hold_time: 0.0,
            steps: StepPolicy::default(),
            outputs_per_stage: 100,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_hold(mut self, hold_time: f64) -> Self {
        self.hold_time = hold_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 2 {
            return Err(Error::InvalidParameter(format!("need at least two atoms, got {}", self.n_atoms)));
        }
        if self.model == Model::Full && self.n_atoms > FULL_MODEL_MAX_ATOMS {
            return Err(Error::InvalidParameter(format!(
                "full-model runs support at most {FULL_MODEL_MAX_ATOMS} atoms, got {}",
                self.n_atoms
            )));
        }
        if !(self.t_stage > 0.0 && self.t_stage.is_finite()) {
            return Err(Error::InvalidParameter(format!("stage duration must be positive, got {}", self.t_stage)));
        }
        if !(self.hold_time >= 0.0 && self.hold_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("hold time must be non-negative, got {}", self.hold_time)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("λ must be finite".into()));
        }
        if self.outputs_per_stage == 0 {
            return Err(Error::InvalidParameter("need at least one output per stage".into()));
        }
        self.params.validate()?;
        if !(self.steps.full_steps_per_period >= 1.0 && self.steps.effective_steps_per_stage >= 1.0) {
            return Err(Error::InvalidParameter("need at least one step per period and per stage".into()));
        }
        if let Some(tol) = self.steps.adaptive_tol {
            IntegratorConfig::adaptive(tol, 2).validate()?;
        }
        Ok(())
    }

    pub fn protocol_duration(&self) -> f64 {
        2.0 * (self.n_atoms - 1) as f64 * self.t_stage
    }

    pub fn total_duration(&self) -> f64 {
        self.protocol_duration() + self.hold_time
    }

    pub fn stage_ids(&self) -> Vec<StageId> {
        (1..self.n_atoms).flat_map(|step| [1u8, 2].map(|stage| StageId { step, stage })).collect()
    }

    /// Stage boundaries inside the run, including the end of the protocol when a hold follows.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> =
            self.stage_ids().iter().map(|id| stage_window(id.step, id.stage, self.t_stage).1).collect();
        if self.hold_time == 0.0 {
            b.pop();
        }
        b
    }

    fn output_points(&self) -> usize {
        let stages = 2 * (self.n_atoms - 1);
        let hold = (self.hold_time / self.t_stage * self.outputs_per_stage as f64).round() as usize;
        stages * self.outputs_per_stage + hold + 1
    }

    pub fn integrator_config(&self, fragments: &[StepFragment]) -> IntegratorConfig {
        if let Some(tol) = self.steps.adaptive_tol {
            return IntegratorConfig::adaptive(tol, self.output_points());
        }
        let step = match self.model {
            Model::Full => {
                let fastest = fragments.iter().map(|f| f.lab.fastest_frequency()).fold(0.0, f64::max);
                2.0 * PI / fastest / self.steps.full_steps_per_period
            }
            Model::Effective => self.t_stage / self.steps.effective_steps_per_stage,
        };
        IntegratorConfig::rk4(step, self.output_points())
    }
}

/// One synthesized stage with its lab-frame and effective generators.
#[derive(Debug, Clone)]
pub struct StepFragment {
    pub synthesized: SynthesizedStage,
    pub lab: LabHamiltonian,
    pub effective: EffectiveTwoLevel,
    pub window: (f64, f64),
}

impl StepFragment {
    pub fn id(&self) -> StageId {
        self.synthesized.id
    }
}

pub fn build_step(plan: &ProtocolPlan, k: usize, stage: u8) -> Result<StepFragment> {
    plan.validate()?;
    let id = StageId { step: k, stage };
    id.validate(plan.n_atoms)?;
    let synthesized = SynthesizedStage::new(id, plan.n_atoms, plan.t_stage, plan.lambda, plan.params)?;
    let spec = synthesized.stage_spec();
    let lab = stage_hamiltonian(&spec)?;
    let effective = synthesized.effective()?;
    Ok(StepFragment { window: spec.window, synthesized, lab, effective })
}

pub fn build_protocol(plan: &ProtocolPlan) -> Result<Vec<StepFragment>> {
    plan.stage_ids().into_iter().map(|id| build_step(plan, id.step, id.stage)).collect()
}

/// `(|0…0⟩ + e^{iφ}|1…1⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub n_atoms: usize,
    pub phase: f64,
}

impl TargetState {
    pub fn zeros_index(&self) -> usize {
        0
    }

    pub fn ones_index(&self) -> usize {
        BasisLabel::uniform(Level::G1, self.n_atoms).index()
    }

    pub fn amplitudes(&self) -> (C64, C64) {
        (C64::new(FRAC_1_SQRT_2, 0.0), C64::from_polar(FRAC_1_SQRT_2, self.phase))
    }

    pub fn vector(&self) -> Array1<C64> {
        let mut v = Array1::zeros(dim_for(self.n_atoms));
        let (a, b) = self.amplitudes();
        v[self.zeros_index()] = a;
        v[self.ones_index()] = b;
        v
    }
}

/// Propagates `|0…0⟩` through the ideal transitionless propagator of every stage.
pub fn target_from_fragments(n_atoms: usize, fragments: &[StepFragment]) -> Result<TargetState> {
    let mut amps: HashMap<usize, C64> = HashMap::from([(0, ONE)]);
    for frag in fragments {
        let pair = frag.id().bright_pair(n_atoms)?;
        let (g, rr) = (pair.0.index(), pair.1.index());
        let eff = frag.effective.clone();
        let h = move |t: f64| eff.pair_matrix(t);
        let prop = transitionless_propagator(&frag.synthesized.controls.passage, &h, frag.window.1)?;
        let a = amps.get(&g).copied().unwrap_or(ZERO);
        let b = amps.get(&rr).copied().unwrap_or(ZERO);
        let m = &prop.matrix;
        amps.insert(g, m[[0, 0]] * a + m[[0, 1]] * b);
        amps.insert(rr, m[[1, 0]] * a + m[[1, 1]] * b);
    }
    let ones = BasisLabel::uniform(Level::G1, n_atoms).index();
    let a0 = amps.get(&0).copied().unwrap_or(ZERO);
    let a1 = amps.get(&ones).copied().unwrap_or(ZERO);
    if (a0.norm() - FRAC_1_SQRT_2).abs() > 1e-4 || (a1.norm() - FRAC_1_SQRT_2).abs() > 1e-4 {
        return Err(Error::InvalidStage(format!(
            "ideal passages end with |0…0⟩ weight {:.6} and |1…1⟩ weight {:.6}",
            a0.norm_sqr(),
            a1.norm_sqr()
        )));
    }
    Ok(TargetState { n_atoms, phase: (a1 / a0).arg() })
}

pub fn target_state(plan: &ProtocolPlan) -> Result<TargetState> {
    target_from_fragments(plan.n_atoms, &build_protocol(plan)?)
}

/// `Tr[(ΠρΠ)²]` with `Π` onto span{|0…0⟩, |1…1⟩}.
pub fn fidelity(rho: &ReducedDensity, target: &TargetState) -> f64 {
    let (a, b) = (target.zeros_index(), target.ones_index());
    let raa = rho.element(a, a).re;
    let rbb = rho.element(b, b).re;
    let rab = rho.element(a, b);
    raa * raa + rbb * rbb + 2.0 * rab.norm_sqr()
}

/// `⟨ψ|ρ|ψ⟩` against the phase-carrying target.
pub fn overlap_fidelity(rho: &ReducedDensity, target: &TargetState) -> f64 {
    let (a, b) = (target.zeros_index(), target.ones_index());
    let raa = rho.element(a, a).re;
    let rbb = rho.element(b, b).re;
    let rab = rho.element(a, b);
    0.5 * (raa + rbb) + (C64::from_polar(1.0, target.phase) * rab).re
}

/// `max_φ ⟨ψ_φ|ρ|ψ_φ⟩` over the relative phase of the two GHZ components.
pub fn best_phase_fidelity(rho: &ReducedDensity, target: &TargetState) -> f64 {
    let (a, b) = (target.zeros_index(), target.ones_index());
    0.5 * (rho.element(a, a).re + rho.element(b, b).re) + rho.element(a, b).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelities {
    pub purity: f64,
    pub overlap: f64,
    pub best_phase: f64,
}

impl Fidelities {
    pub fn of(rho: &ReducedDensity, target: &TargetState) -> Self {
        Self {
            purity: fidelity(rho, target),
            overlap: overlap_fidelity(rho, target),
            best_phase: best_phase_fidelity(rho, target),
        }
    }
}

pub fn populations(rho: &ReducedDensity, labels: &[BasisLabel]) -> Vec<(String, f64)> {
    labels.iter().map(|l| (l.to_string(), rho.element(l.index(), l.index()).norm())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageChecksum {
    pub step: usize,
    pub stage: u8,
    pub sha256: String,
}

/// SHA-256 over the bit patterns of the sampled controls.
pub fn control_checksum(stage: &SynthesizedStage) -> String {
    let mut hasher = Sha256::new();
    for s in sample_stage(stage, 257) {
        for x in [s.t, s.theta, s.alpha, s.f, s.delta_r, s.omega_eff, s.omega_primary, s.omega_dressing, s.dressing_sign]
        {
            hasher.update(x.to_le_bytes());
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Column names of [`RunResult::series`]. `P_00` and `P_11` are the
/// all-zero and all-one labels and `P_rr` sums the doubly excited bright states.
pub const SERIES_NAMES: [&str; 6] = ["P_00", "P_rr", "P_11", "F_purity", "F_overlap", "F_best"];

#[derive(Debug, Clone)]
pub struct RunResult {
    pub plan: ProtocolPlan,
    pub noise: NoiseParams,
    pub errors: ErrorSpec,
    pub integrator: IntegratorConfig,
    pub target: TargetState,
    pub times: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub final_state: ReducedDensity,
    pub fidelity: Fidelities,
    pub stage_checksums: Vec<StageChecksum>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Value of `name` at the output time closest to `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let s = self.series(name)?;
        let k = self.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?.0;
        Some(s[k])
    }

    /// Value at the end of the protocol, before any hold.
    pub fn protocol_end(&self, name: &str) -> Option<f64> {
        self.value_at(name, self.plan.protocol_duration())
    }

    pub fn element(&self, a: &BasisLabel, b: &BasisLabel) -> C64 {
        self.final_state.element(a.index(), b.index())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let sub = &self.final_state.subspace;
        let rho: Vec<[f64; 2]> = self.final_state.rho.iter().map(|z| [z.re, z.im]).collect();
        let series: serde_json::Map<String, serde_json::Value> =
            self.series.iter().map(|(n, v)| (n.clone(), serde_json::json!(v))).collect();
        serde_json::json!({
            "plan": self.plan,
            "noise": self.noise,
            "errors": self.errors,
            "integrator": self.integrator,
            "target": self.target,
            "fidelity": self.fidelity,
            "stage_checksums": self.stage_checksums,
            "diagnostics": self.diagnostics,
            "warnings": self.warnings,
            "times": self.times,
            "series": series,
            "final_state": {
                "full_dim": dim_for(sub.n_atoms()),
                "support": sub.states(),
                "support_labels": sub.states().iter()
                    .map(|&s| BasisLabel::from_index(s, sub.n_atoms()).map(|l| l.to_string()).unwrap_or_default())
                    .collect::<Vec<_>>(),
                "dim": sub.len(),
                "rho_row_major": rho,
            },
        })
    }

    /// `t` in seconds followed by [`SERIES_NAMES`].
    pub fn write_series_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let names: Vec<&str> = self.series.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "t,{}", names.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let row: Vec<String> = self.series.iter().map(|(_, v)| format!("{:.10e}", v[k])).collect();
            writeln!(w, "{t:.10e},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Lab-frame generator of all stages with a single interaction term.
pub fn combined_lab(plan: &ProtocolPlan, fragments: &[StepFragment]) -> Result<LabHamiltonian> {
    let drives = fragments.iter().flat_map(|f| f.lab.drives.iter().cloned()).collect();
    LabHamiltonian::new(drives, InteractionSpec::new(plan.params.v)?, plan.n_atoms)
}

/// Hamiltonian of the whole run including the systematic error.
pub fn protocol_hamiltonian(
    plan: &ProtocolPlan,
    fragments: &[StepFragment],
    errors: &ErrorSpec,
) -> Result<TermHamiltonian> {
    errors.validate()?;
    let n = plan.n_atoms;
    match plan.model {
        Model::Full => {
            let lab = combined_lab(plan, fragments)?;
            let mut h = lab.terms();
            h.extend(error_terms(errors, &lab)?)?;
            Ok(h)
        }
        Model::Effective => {
            // δV enters once, as a chain operator, rather than per stage pair.
            let (s_shift, s_rabi, dv) = effective_scalings(errors)?;
            let mut h = TermHamiltonian::new(n);
            for f in fragments {
                h.extend(f.effective.rescaled(s_shift, s_rabi, 0.0).terms())?;
            }
            if dv != 0.0 {
                h.push_static(chain_rr_projector_sum(n).scale(C64::new(dv, 0.0)))?;
            }
            Ok(h)
        }
    }
}

pub fn run_protocol(plan: &ProtocolPlan, noise: &NoiseParams, errors: &ErrorSpec) -> Result<RunResult> {
    plan.validate()?;
    noise.validate()?;
    errors.validate()?;
    let n = plan.n_atoms;
    let fragments = build_protocol(plan)?;
    let target = target_from_fragments(n, &fragments)?;
    let hamiltonian = protocol_hamiltonian(plan, &fragments, errors)?;
    let channels = collapse_operators(noise, n)?;
    let config = plan.integrator_config(&fragments);

    let rr_states: Vec<usize> =
        fragments.iter().map(|f| f.id().bright_pair(n).map(|p| p.1.index())).collect::<Result<Vec<_>>>()?;
    let mut rr_states = rr_states;
    rr_states.sort_unstable();
    rr_states.dedup();
    let ones = target.ones_index();
    let observables = vec![
        NamedObservable::metric(SERIES_NAMES[0], |r: &ReducedDensity| r.population(0)),
        NamedObservable::metric(SERIES_NAMES[1], move |r: &ReducedDensity| {
            rr_states.iter().map(|&s| r.population(s)).sum()
        }),
        NamedObservable::metric(SERIES_NAMES[2], move |r: &ReducedDensity| r.population(ones)),
        NamedObservable::metric(SERIES_NAMES[3], move |r: &ReducedDensity| fidelity(r, &target)),
        NamedObservable::metric(SERIES_NAMES[4], move |r: &ReducedDensity| overlap_fidelity(r, &target)),
        NamedObservable::metric(SERIES_NAMES[5], move |r: &ReducedDensity| best_phase_fidelity(r, &target)),
    ];
    let mut psi0 = Array1::zeros(dim_for(n));
    psi0[0] = ONE;
    let problem = EvolutionProblem {
        hamiltonian,
        channels,
        initial: InitialState::Pure(psi0),
        t_span: (0.0, plan.total_duration()),
        breakpoints: plan.breakpoints(),
        observables,
    };
    let ev = evolve(&problem, &config)?;
    let rho_end = ev.final_state.clone();
    let warnings = fragments.iter().flat_map(|f| f.effective.warnings.iter().cloned()).collect();
    let stage_checksums = fragments
        .iter()
        .map(|f| StageChecksum { step: f.id().step, stage: f.id().stage, sha256: control_checksum(&f.synthesized) })
        .collect();
    Ok(RunResult {
        plan: plan.clone(),
        noise: *noise,
        errors: *errors,
        integrator: config,
        target,
        fidelity: Fidelities::of(&rho_end, &target),
        times: ev.times,
        series: ev.series,
        final_state: ev.final_state,
        stage_checksums,
        diagnostics: ev.diagnostics,
        warnings,
    })
}
