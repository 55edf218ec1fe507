//! Named experiments and their default configurations.

use super::config::{ExperimentConfig, ExperimentName};
use crate::error::Result;

pub struct ExperimentInfo {
    pub name: ExperimentName,
    pub description: &'static str,
    pub default_toml: &'static str,
}

const FIG3_POPULATIONS: &str = r#"experiment = "fig3-populations"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
delta1_over_V = 5.0
dressing_over_delta1 = 0.5
lambda = 0.0
N = 2
model = "full"
hold_over_T = 0.5
"#;

const FIG3_FIDELITY_VS_KAPPA: &str = r#"experiment = "fig3-fidelity-vs-kappa"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
delta1_over_V = 5.0
dressing_over_delta1 = 0.5
lambda = 0.0
N = 2
model = "full"
hold_over_T = 0.5
kappa_z_over_kappa = 0.1

[sweep]
kappa_over_V = [0.0, 1e-5, 4e-5]
"#;

const FIG4_GLOBAL: &str = r#"experiment = "fig4-global-error"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
N = 2
model = "effective"
error_kind = "global"
epsilon = 0.0

[sweep]
lambda = [0.0, 2.0, 3.0, 5.0]
epsilon = [-0.1, -0.05, 0.0, 0.05, 0.1]
"#;

const FIG4_LOCAL: &str = r#"experiment = "fig4-local-error"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
N = 2
model = "effective"
error_kind = "local"
epsilon = 0.0

[sweep]
lambda = [0.0, 8.0]
epsilon = [-0.05, -0.025, 0.0, 0.025, 0.05]
"#;

const FIG5_DENSITY: &str = r#"experiment = "fig5-density-matrix"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
N = 2
model = "effective"
lambda = 5.0
error_kind = "global"
epsilon = -0.1
kappa_z_over_kappa = 0.1

[sweep]
kappa_over_V = [1e-5, 4e-5]
"#;

const FIG6_DISTANCE: &str = r#"experiment = "fig6-distance-fluctuation"

[parameters]
T_inv_gamma = 50.0
V_over_2pi_MHz = 20.0
N = 2
model = "effective"
error_kind = "interaction"
delta_d_over_d = 0.0
C6_over_2pi_GHz_um6 = 5360.0

[sweep]
lambda = [0.0, 5.0, 10.0]
delta_d_over_d = [-1.5e-4, -7.5e-5, 0.0, 7.5e-5, 1.5e-4]
"#;

const TABLE1: &str = r#"experiment = "table1-ghz-scaling"

[parameters]
T_inv_gamma = 0.5
V_over_2pi_MHz = 20.0
model = "effective"
lambda = 0.0
error_kind = "combined"
epsilon = -0.1
delta_V_over_gamma = 1.0
kappa_z_over_kappa = 0.1

[sweep]
N = [2, 3, 4, 5, 6, 7]
kappa_over_gamma = [1e-3, 5e-3, 1e-2]
"#;

const CUSTOM: &str = r#"experiment = "custom"

[parameters]
N = 2
"#;

pub const EXPERIMENTS: [ExperimentInfo; 8] = [
    ExperimentInfo {
        name: ExperimentName::Fig3Populations,
        description: "Bell populations and fidelity versus time, full model, 2T passage plus 0.5T hold (Fig. 3a)",
        default_toml: FIG3_POPULATIONS,
    },
    ExperimentInfo {
        name: ExperimentName::Fig3FidelityVsKappa,
        description: "Bell fidelity under Rydberg decay κ/V in {0, 1e-5, 4e-5} (Fig. 3b)",
        default_toml: FIG3_FIDELITY_VS_KAPPA,
    },
    ExperimentInfo {
        name: ExperimentName::Fig4GlobalError,
        description: "Global Rabi error ε against correction gain λ (Fig. 4a)",
        default_toml: FIG4_GLOBAL,
    },
    ExperimentInfo {
        name: ExperimentName::Fig4LocalError,
        description: "Local Rabi error on one atom against correction gain λ (Fig. 4b)",
        default_toml: FIG4_LOCAL,
    },
    ExperimentInfo {
        name: ExperimentName::Fig5DensityMatrix,
        description: "Final Bell density matrix with decay and global error at λ = 5 (Fig. 5)",
        default_toml: FIG5_DENSITY,
    },
    ExperimentInfo {
        name: ExperimentName::Fig6DistanceFluctuation,
        description: "Interatomic distance fluctuation δd/d mapped through C6/d^6 (Fig. 6a)",
        default_toml: FIG6_DISTANCE,
    },
    ExperimentInfo {
        name: ExperimentName::Table1GhzScaling,
        description: "GHZ fidelity versus N and κ/γ with combined errors (Table I)",
        default_toml: TABLE1,
    },
    ExperimentInfo {
        name: ExperimentName::Custom,
        description: "User-defined run; every parameter from the config file",
        default_toml: CUSTOM,
    },
];

pub fn info(name: ExperimentName) -> &'static ExperimentInfo {
    EXPERIMENTS.iter().find(|e| e.name == name).expect("every name is registered")
}

pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    EXPERIMENTS.iter().map(|e| (e.name.as_str(), e.description)).collect()
}

pub fn default_config(name: ExperimentName) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(info(name).default_toml)
}

/// The preset with `user` laid over it; user sweep axes replace preset axes of the same name.
pub fn merged_config(user: &ExperimentConfig) -> Result<ExperimentConfig> {
    let base = default_config(user.experiment)?;
    let merged = ExperimentConfig {
        experiment: user.experiment,
        parameters: base.parameters.overlay(&user.parameters),
        sweep: base.sweep.overlay(&user.sweep),
        output: user.output.clone(),
    };
    merged.sweep.validate()?;
    Ok(merged)
}
