//! Grid execution and CSV/JSON/manifest emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{resolve, ExperimentConfig, Format, GridPoint, Parameters, ResolvedRun};
use super::registry::merged_config;
use crate::error::{Error, Result};
use crate::protocol::{run_protocol, Model, RunResult, SERIES_NAMES};
use crate::tensor::BasisLabel;
use crate::units::{to_ns, GAMMA};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub model: Option<Model>,
    /// Replaces `[output].formats` when set.
    pub formats: Option<Vec<Format>>,
}

/// Scalars reported per grid point, read at the end of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    #[serde(rename = "F_purity")]
    pub f_purity: f64,
    #[serde(rename = "F_overlap")]
    pub f_overlap: f64,
    #[serde(rename = "F_best")]
    pub f_best: f64,
    #[serde(rename = "P_00")]
    pub p_zeros: f64,
    #[serde(rename = "P_11")]
    pub p_ones: f64,
    /// `|ρ_{0…0,1…1}|`.
    pub coherence: f64,
}

impl Metrics {
    pub fn of(run: &RunResult) -> Self {
        let n = run.plan.n_atoms;
        let zeros = BasisLabel::from_index(run.target.zeros_index(), n).expect("valid index");
        let ones = BasisLabel::from_index(run.target.ones_index(), n).expect("valid index");
        Self {
            f_purity: run.fidelity.purity,
            f_overlap: run.fidelity.overlap,
            f_best: run.fidelity.best_phase,
            p_zeros: run.element(&zeros, &zeros).re,
            p_ones: run.element(&ones, &ones).re,
            coherence: run.element(&zeros, &ones).norm(),
        }
    }

    pub const COLUMNS: [&'static str; 6] = ["F_purity", "F_overlap", "F_best", "P_00", "P_11", "abs_rho_00_11"];

    fn values(&self) -> [f64; 6] {
        [self.f_purity, self.f_overlap, self.f_best, self.p_zeros, self.p_ones, self.coherence]
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub point: GridPoint,
    pub resolved: ResolvedRun,
    pub metrics: Metrics,
    pub run: RunResult,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub axes: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Row whose axis values match `values` (in any order) within 1e-12.
    pub fn find(&self, values: &[(&str, f64)]) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            values.iter().all(|(n, v)| r.point.values.iter().any(|(m, w)| m == n && (w - v).abs() <= 1e-12 * v.abs().max(1.0)))
        })
    }

    /// One row per grid point: axis values, then [`Metrics::COLUMNS`].
    pub fn summary_csv(&self) -> String {
        let mut s = String::new();
        let mut header: Vec<&str> = self.axes.clone();
        header.extend(Metrics::COLUMNS);
        writeln!(s, "{}", header.join(",")).unwrap();
        for r in &self.rows {
            let mut cells: Vec<String> = r.point.values.iter().map(|(_, v)| format!("{v}")).collect();
            cells.extend(r.metrics.values().iter().map(|v| format!("{v:.10e}")));
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let axes: serde_json::Map<String, serde_json::Value> =
                    r.point.values.iter().map(|(n, v)| (n.to_string(), serde_json::json!(v))).collect();
                serde_json::json!({ "index": r.index, "axes": axes, "metrics": r.metrics })
            })
            .collect();
        serde_json::json!({ "experiment": self.config.experiment, "axes": self.axes, "rows": rows })
    }
}

/// Time in ns, then the series of [`SERIES_NAMES`].
pub fn series_csv(run: &RunResult) -> String {
    let mut s = String::new();
    writeln!(s, "t_ns,{}", SERIES_NAMES.join(",")).unwrap();
    for (k, &t) in run.times.iter().enumerate() {
        let row: Vec<String> = SERIES_NAMES
            .iter()
            .map(|n| format!("{:.10e}", run.series(n).expect("series present")[k]))
            .collect();
        writeln!(s, "{:.6},{}", to_ns(t), row.join(",")).unwrap();
    }
    s
}

fn cell_parameters(merged: &Parameters, point: &GridPoint, opts: &RunOptions) -> Parameters {
    let mut p = point.apply(merged);
    if let Some(m) = opts.model {
        p.model = Some(m);
    }
    p
}

/// The merged config with every grid point resolved; parse-level failures surface here.
pub fn plan_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<(ExperimentConfig, Vec<(GridPoint, ResolvedRun)>)> {
    let merged = merged_config(config)?;
    let cells = merged
        .sweep
        .grid()
        .into_iter()
        .map(|point| {
            let r = resolve(&cell_parameters(&merged.parameters, &point, opts))
                .map_err(|e| Error::Config(format!("grid point {}: {e}", point.label())))?;
            Ok((point, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((merged, cells))
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepResult> {
    let (merged, cells) = plan_experiment(config, opts)?;
    let job = |(index, (point, resolved)): (usize, &(GridPoint, ResolvedRun))| -> Result<SweepRow> {
        let run = run_protocol(&resolved.plan, &resolved.noise, &resolved.errors)
            .map_err(|e| Error::GridPoint { point: point.label(), source: Box::new(e) })?;
        Ok(SweepRow { index, point: point.clone(), resolved: resolved.clone(), metrics: Metrics::of(&run), run })
    };
    let rows = match opts.threads {
        Some(1) => cells.iter().enumerate().map(job).collect::<Result<Vec<_>>>()?,
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| cells.par_iter().enumerate().map(job).collect::<Result<Vec<_>>>())?,
        None => cells.par_iter().enumerate().map(job).collect::<Result<Vec<_>>>()?,
    };
    Ok(SweepResult { axes: merged.sweep.axis_names(), config: merged, rows })
}

#[derive(Debug, Clone, Serialize)]
struct ManifestRun<'a> {
    index: usize,
    point: serde_json::Map<String, serde_json::Value>,
    files: Vec<String>,
    t_stage_ns: f64,
    v_over_2pi_mhz: f64,
    n_atoms: usize,
    lambda: f64,
    model: Model,
    kappa_over_gamma: f64,
    errors: &'a crate::noise::ErrorSpec,
    target_phase: f64,
    integrator: &'a crate::lindblad::IntegratorConfig,
    diagnostics: &'a crate::lindblad::Diagnostics,
    stage_checksums: &'a [crate::protocol::StageChecksum],
    notes: &'a [String],
    warnings: &'a [String],
}

/// Writes the summary, per-run series and `manifest.json` under `dir`; returns the written paths.
pub fn write_outputs(result: &SweepResult, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let name = result.config.experiment.as_str();
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: &str| -> Result<()> {
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&Format::Csv) {
        put(dir.join(format!("{name}.csv")), &result.summary_csv())?;
    }
    if formats.contains(&Format::Json) {
        put(dir.join(format!("{name}.json")), &serde_json::to_string_pretty(&result.summary_json())?)?;
    }
    let mut manifest_runs = Vec::new();
    for r in &result.rows {
        let stem = format!("run_{:03}", r.index);
        let mut files = Vec::new();
        if formats.contains(&Format::Csv) {
            let f = format!("runs/{stem}.csv");
            put(dir.join(&f), &series_csv(&r.run))?;
            files.push(f);
        }
        if formats.contains(&Format::Json) {
            let f = format!("runs/{stem}.json");
            put(dir.join(&f), &serde_json::to_string_pretty(&r.run.to_json())?)?;
            files.push(f);
        }
        let plan = &r.run.plan;
        manifest_runs.push(ManifestRun {
            index: r.index,
            point: r.point.values.iter().map(|(n, v)| (n.to_string(), serde_json::json!(v))).collect(),
            files,
            t_stage_ns: to_ns(plan.t_stage),
            v_over_2pi_mhz: crate::units::to_mhz(plan.params.v),
            n_atoms: plan.n_atoms,
            lambda: plan.lambda,
            model: plan.model,
            kappa_over_gamma: r.run.noise.kappa0 / GAMMA,
            errors: &r.run.errors,
            target_phase: r.run.target.phase,
            integrator: &r.run.integrator,
            diagnostics: &r.run.diagnostics,
            stage_checksums: &r.run.stage_checksums,
            notes: &r.resolved.notes,
            warnings: &r.run.warnings,
        });
    }
    let manifest = serde_json::json!({
        "software": "rydberg-ghz",
        "version": VERSION,
        "experiment": name,
        "config_sha256": result.config.hash(),
        "config": result.config.to_toml(),
        "axes": result.axes,
        "summary": formats.iter().map(|f| match f { Format::Csv => format!("{name}.csv"), Format::Json => format!("{name}.json") }).collect::<Vec<_>>(),
        "runs": manifest_runs,
    });
    put(dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(written)
}

/// Output directory and formats after CLI overrides.
pub fn output_target(config: &ExperimentConfig, out: Option<&Path>, opts: &RunOptions) -> (PathBuf, Vec<Format>) {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(config.experiment.as_str()));
    let mut formats = opts.formats.clone().or_else(|| config.output.formats.clone()).unwrap_or_else(|| vec![Format::Csv]);
    formats.sort();
    formats.dedup();
    (dir, formats)
}
