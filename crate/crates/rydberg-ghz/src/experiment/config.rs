//! Declarative experiment configuration in TOML with unit-carrying keys.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drive::DriveParams;
use crate::error::{Error, Result};
use crate::noise::{interaction_fluctuation, ErrorSpec, NoiseParams, VdwGeometry};
use crate::protocol::{Model, ProtocolPlan, StepPolicy};
use crate::units::{c6_from_ghz, mhz, ns, GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Fig3Populations,
    Fig3FidelityVsKappa,
    Fig4GlobalError,
    Fig4LocalError,
    Fig5DensityMatrix,
    Fig6DistanceFluctuation,
    Table1GhzScaling,
    Custom,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 8] = [
        ExperimentName::Fig3Populations,
        ExperimentName::Fig3FidelityVsKappa,
        ExperimentName::Fig4GlobalError,
        ExperimentName::Fig4LocalError,
        ExperimentName::Fig5DensityMatrix,
        ExperimentName::Fig6DistanceFluctuation,
        ExperimentName::Table1GhzScaling,
        ExperimentName::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig3Populations => "fig3-populations",
            ExperimentName::Fig3FidelityVsKappa => "fig3-fidelity-vs-kappa",
            ExperimentName::Fig4GlobalError => "fig4-global-error",
            ExperimentName::Fig4LocalError => "fig4-local-error",
            ExperimentName::Fig5DensityMatrix => "fig5-density-matrix",
            ExperimentName::Fig6DistanceFluctuation => "fig6-distance-fluctuation",
            ExperimentName::Table1GhzScaling => "table1-ghz-scaling",
            ExperimentName::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    None,
    Global,
    Local,
    Interaction,
    Phase,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Rk4,
    Adaptive,
}

/// Every key is optional; unset keys fall back to the experiment preset, then to the built-in default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(rename = "T_ns", skip_serializing_if = "Option::is_none")]
    pub t_ns: Option<f64>,
    /// Stage duration in units of `1/γ`, `γ = 2π·1 MHz`.
    #[serde(rename = "T_inv_gamma", skip_serializing_if = "Option::is_none")]
    pub t_inv_gamma: Option<f64>,
    #[serde(rename = "V_over_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub v_over_2pi_mhz: Option<f64>,
    #[serde(rename = "delta1_over_V", skip_serializing_if = "Option::is_none")]
    pub delta1_over_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dressing_over_delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(rename = "hold_over_T", skip_serializing_if = "Option::is_none")]
    pub hold_over_t: Option<f64>,
    #[serde(rename = "kappa_over_V", skip_serializing_if = "Option::is_none")]
    pub kappa_over_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_over_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_z_over_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ErrorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_d_over_d: Option<f64>,
    #[serde(rename = "delta_V_over_gamma", skip_serializing_if = "Option::is_none")]
    pub delta_v_over_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_phi_rad: Option<f64>,
    #[serde(rename = "C6_over_2pi_GHz_um6", skip_serializing_if = "Option::is_none")]
    pub c6_over_2pi_ghz_um6: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_stage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs_per_stage: Option<usize>,
    /// Scales the synthesized primary amplitude in `verify` only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt_omega_factor: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Parameters { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Parameters {
    /// `top` wins wherever it sets a key; setting one key of a mutually
    /// exclusive pair (`T_ns`/`T_inv_gamma`, the two κ units, `delta_V_over_gamma`/`delta_d_over_d`)
    /// clears the other from `self`.
    pub fn overlay(&self, top: &Parameters) -> Parameters {
        let mut base = self.clone();
        if top.t_ns.is_some() || top.t_inv_gamma.is_some() {
            base.t_ns = None;
            base.t_inv_gamma = None;
        }
        if top.kappa_over_v.is_some() || top.kappa_over_gamma.is_some() {
            base.kappa_over_v = None;
            base.kappa_over_gamma = None;
        }
        if top.delta_v_over_gamma.is_some() || top.delta_d_over_d.is_some() {
            base.delta_v_over_gamma = None;
            base.delta_d_over_d = None;
        }
        overlay!(
            base, top, t_ns, t_inv_gamma, v_over_2pi_mhz, delta1_over_v, dressing_over_delta1, lambda, n, model,
            hold_over_t, kappa_over_v, kappa_over_gamma, kappa_z_over_kappa, error_kind, epsilon, delta_d_over_d,
            delta_v_over_gamma, delta_phi_rad, c6_over_2pi_ghz_um6, integrator, steps_per_period, steps_per_stage,
            tolerance, outputs_per_stage, corrupt_omega_factor
        )
    }
}

/// Lists of values; each axis replaces the matching parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(rename = "kappa_over_V", skip_serializing_if = "Option::is_none")]
    pub kappa_over_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_over_gamma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_d_over_d: Option<Vec<f64>>,
}

impl Sweep {
    /// Axis-wise replacement; either κ axis in `top` replaces both κ axes of `self`.
    pub fn overlay(&self, top: &Sweep) -> Sweep {
        let kappa_set = top.kappa_over_v.is_some() || top.kappa_over_gamma.is_some();
        Sweep {
            n: top.n.clone().or_else(|| self.n.clone()),
            lambda: top.lambda.clone().or_else(|| self.lambda.clone()),
            kappa_over_v: if kappa_set { top.kappa_over_v.clone() } else { self.kappa_over_v.clone() },
            kappa_over_gamma: if kappa_set { top.kappa_over_gamma.clone() } else { self.kappa_over_gamma.clone() },
            epsilon: top.epsilon.clone().or_else(|| self.epsilon.clone()),
            delta_d_over_d: top.delta_d_over_d.clone().or_else(|| self.delta_d_over_d.clone()),
        }
    }

    fn axes_f64(&self) -> [(&'static str, Option<&Vec<f64>>); 5] {
        [
            ("lambda", self.lambda.as_ref()),
            ("kappa_over_V", self.kappa_over_v.as_ref()),
            ("kappa_over_gamma", self.kappa_over_gamma.as_ref()),
            ("epsilon", self.epsilon.as_ref()),
            ("delta_d_over_d", self.delta_d_over_d.as_ref()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.as_ref().is_some_and(|v| v.is_empty()) {
            return Err(Error::Config("sweep axis N is empty".into()));
        }
        for (name, axis) in self.axes_f64() {
            if axis.is_some_and(|v| v.is_empty()) {
                return Err(Error::Config(format!("sweep axis {name} is empty")));
            }
        }
        if self.kappa_over_v.is_some() && self.kappa_over_gamma.is_some() {
            return Err(Error::Config("sweep either kappa_over_V or kappa_over_gamma, not both".into()));
        }
        Ok(())
    }

    /// Axis names in grid order: `N` first, then the real-valued axes.
    pub fn axis_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.n.is_some() {
            out.push("N");
        }
        out.extend(self.axes_f64().into_iter().filter(|(_, a)| a.is_some()).map(|(n, _)| n));
        out
    }

    /// Lexicographic grid over the axes in [`Sweep::axis_names`] order, last axis fastest.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut axes: Vec<(&'static str, Vec<f64>)> = Vec::new();
        if let Some(n) = &self.n {
            axes.push(("N", n.iter().map(|&x| x as f64).collect()));
        }
        for (name, a) in self.axes_f64() {
            if let Some(a) = a {
                axes.push((name, a.clone()));
            }
        }
        let mut points = vec![GridPoint::default()];
        for (name, values) in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.values.push((name, v));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridPoint {
    pub values: Vec<(&'static str, f64)>,
}

impl GridPoint {
    pub fn apply(&self, base: &Parameters) -> Parameters {
        let mut p = base.clone();
        for &(name, v) in &self.values {
            match name {
                "N" => p.n = Some(v as usize),
                "lambda" => p.lambda = Some(v),
                "kappa_over_V" => {
                    p.kappa_over_v = Some(v);
                    p.kappa_over_gamma = None;
                }
                "kappa_over_gamma" => {
                    p.kappa_over_gamma = Some(v);
                    p.kappa_over_v = None;
                }
                "epsilon" => p.epsilon = Some(v),
                "delta_d_over_d" => p.delta_d_over_d = Some(v),
                _ => unreachable!("axis names come from Sweep"),
            }
        }
        p
    }

    pub fn label(&self) -> String {
        if self.values.is_empty() {
            return "single".into();
        }
        self.values.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.sweep.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything one grid cell needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub plan: ProtocolPlan,
    pub noise: NoiseParams,
    pub errors: ErrorSpec,
    pub corrupt_omega_factor: f64,
    /// Reconstruction choices echoed into metadata.
    pub notes: Vec<String>,
}

pub const DEFAULT_C6_OVER_2PI_GHZ_UM6: f64 = 5.36e3;

fn exclusive<T>(a: Option<T>, b: Option<T>, what: &str) -> Result<()> {
    if a.is_some() && b.is_some() {
        return Err(Error::Config(format!("set only one of {what}")));
    }
    Ok(())
}

fn require(x: Option<f64>, what: &str, kind: &str) -> Result<f64> {
    x.ok_or_else(|| Error::Config(format!("error_kind = {kind:?} needs {what}")))
}

pub fn resolve(p: &Parameters) -> Result<ResolvedRun> {
    let mut notes = Vec::new();
    exclusive(p.t_ns, p.t_inv_gamma, "T_ns and T_inv_gamma")?;
    exclusive(p.kappa_over_v, p.kappa_over_gamma, "kappa_over_V and kappa_over_gamma")?;
    let t_stage = match (p.t_ns, p.t_inv_gamma) {
        (Some(t), _) => ns(t),
        (_, Some(t)) => {
            notes.push(format!("stage duration T = {t}/γ with γ = 2π·1 MHz"));
            t / GAMMA
        }
        _ => 50.0 / GAMMA,
    };
    let v = mhz(p.v_over_2pi_mhz.unwrap_or(20.0));
    let params = DriveParams::from_ratios(v, p.delta1_over_v.unwrap_or(5.0), p.dressing_over_delta1.unwrap_or(0.5))
        .map_err(|e| Error::Config(e.to_string()))?;
    let n = p.n.unwrap_or(2);
    let model = p.model.unwrap_or(if n <= crate::protocol::FULL_MODEL_MAX_ATOMS { Model::Full } else { Model::Effective });
    let lambda = p.lambda.unwrap_or(0.0);
    let mut plan = ProtocolPlan::new(n, t_stage, lambda, model, params).map_err(|e| Error::Config(e.to_string()))?;
    plan.hold_time = p.hold_over_t.unwrap_or(0.0) * t_stage;

    let mut steps = StepPolicy::default();
    if let Some(s) = p.steps_per_period {
        steps.full_steps_per_period = s;
    }
    if let Some(s) = p.steps_per_stage {
        steps.effective_steps_per_stage = s;
    }
    match p.integrator.unwrap_or(IntegratorKind::Rk4) {
        IntegratorKind::Rk4 => {
            if p.tolerance.is_some() {
                return Err(Error::Config("tolerance needs integrator = \"adaptive\"".into()));
            }
        }
        IntegratorKind::Adaptive => steps.adaptive_tol = Some(p.tolerance.unwrap_or(1e-9)),
    }
    plan.steps = steps;
    if let Some(o) = p.outputs_per_stage {
        plan.outputs_per_stage = o;
    }

    let kappa = match (p.kappa_over_v, p.kappa_over_gamma) {
        (Some(k), _) => k * v,
        (_, Some(k)) => k * GAMMA,
        _ => 0.0,
    };
    let noise = NoiseParams::new(kappa, kappa, p.kappa_z_over_kappa.unwrap_or(0.1) * kappa)
        .map_err(|e| Error::Config(e.to_string()))?;

    let kind = p.error_kind.unwrap_or(ErrorKind::None);
    let interaction = |plan: &mut ProtocolPlan, notes: &mut Vec<String>| -> Result<f64> {
        match (p.delta_v_over_gamma, p.delta_d_over_d) {
            (Some(_), Some(_)) => Err(Error::Config("set only one of delta_V_over_gamma and delta_d_over_d".into())),
            (Some(dv), None) => Ok(dv * GAMMA),
            (None, Some(rel)) => {
                let c6 = c6_from_ghz(p.c6_over_2pi_ghz_um6.unwrap_or(DEFAULT_C6_OVER_2PI_GHZ_UM6));
                let g = VdwGeometry::for_interaction(c6, v)?;
                notes.push(format!("atom spacing d = {:.4} μm from C6 and V", g.d));
                plan.geometry = Some(g);
                interaction_fluctuation(&g, rel * g.d)
            }
            (None, None) => Ok(0.0),
        }
    };
    let errors = match kind {
        ErrorKind::None => ErrorSpec::None,
        ErrorKind::Global => ErrorSpec::Global { epsilon: require(p.epsilon, "epsilon", "global")? },
        ErrorKind::Local => ErrorSpec::Local { epsilon: require(p.epsilon, "epsilon", "local")? },
        ErrorKind::Phase => ErrorSpec::Phase { delta_phi: require(p.delta_phi_rad, "delta_phi_rad", "phase")? },
        ErrorKind::Interaction => ErrorSpec::Interaction { delta_v: interaction(&mut plan, &mut notes)? },
        ErrorKind::Combined => ErrorSpec::Combined {
            epsilon: require(p.epsilon, "epsilon", "combined")?,
            delta_v: interaction(&mut plan, &mut notes)?,
        },
    };
    errors.validate().map_err(|e| Error::Config(e.to_string()))?;
    plan.validate().map_err(|e| Error::Config(e.to_string()))?;
    let corrupt_omega_factor = p.corrupt_omega_factor.unwrap_or(1.0);
    if !(corrupt_omega_factor > 0.0 && corrupt_omega_factor.is_finite()) {
        return Err(Error::Config("corrupt_omega_factor must be positive".into()));
    }
    Ok(ResolvedRun { plan, noise, errors, corrupt_omega_factor, notes })
}
