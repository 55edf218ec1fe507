use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydberg_ghz::experiment::run::output_target;
use rydberg_ghz::experiment::{
    default_config, list_experiments, run_experiment, verify, write_outputs, ExperimentConfig, ExperimentName, Format,
    RunOptions,
};
use rydberg_ghz::protocol::Model;
use rydberg_ghz::Error;

#[derive(Parser)]
#[command(name = "rydberg-ghz", version, about = "Bell and GHZ preparation by off-resonant Rydberg passages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write CSV/JSON outputs plus a manifest.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
        /// Output formats; repeat or comma-separate.
        #[arg(long, value_delimiter = ',')]
        format: Vec<Format>,
    },
    /// List the named experiments.
    List {
        /// Print the default config of this experiment instead.
        #[arg(long)]
        show: Option<ExperimentName>,
    },
    /// Run the synthesis oracles on every grid point and print a JSON report.
    Verify {
        #[command(flatten)]
        source: Source,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named experiment with its default config.
    #[arg(long)]
    experiment: Option<ExperimentName>,
}

#[derive(Args)]
struct Overrides {
    /// Overrides the model of every grid point.
    #[arg(long)]
    model: Option<Model>,
}

enum Failure {
    Parse(String),
    Numerical(String),
    Verify,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify => 1,
            Failure::Parse(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Parse(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn load(source: &Source) -> Result<ExperimentConfig, Failure> {
    match (&source.config, source.experiment) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text).map_err(Failure::from)
        }
        (None, Some(name)) => default_config(name).map_err(Failure::from),
        (None, None) => unreachable!("clap enforces one source"),
    }
}

fn write_report(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::List { show: Some(name) } => {
            print!("{}", default_config(name)?.to_toml());
        }
        Command::List { show: None } => {
            for (name, description) in list_experiments() {
                println!("{name:<28}{description}");
            }
        }
        Command::Run { source, out, threads, overrides, format } => {
            let config = load(&source)?;
            let opts = RunOptions {
                threads,
                model: overrides.model,
                formats: if format.is_empty() { None } else { Some(format) },
            };
            let result = run_experiment(&config, &opts)?;
            let (dir, formats) = output_target(&config, out.as_deref(), &opts);
            let written = write_outputs(&result, &dir, &formats)?;
            print!("{}", result.summary_csv());
            eprintln!("wrote {} files to {}", written.len(), dir.display());
        }
        Command::Verify { source, out, overrides } => {
            let config = load(&source)?;
            let opts = RunOptions { model: overrides.model, ..Default::default() };
            let report = verify(&config, &opts)?;
            let json = report.to_json();
            println!("{json}");
            if let Some(path) = out {
                write_report(&path, &json)?;
            }
            if !report.passed {
                for c in report.failures() {
                    eprintln!("FAIL {} stage {} {}: {:e} > {:e}", c.point, c.stage, c.name, c.value, c.threshold);
                }
                return Err(Failure::Verify);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Parse(m) | Failure::Numerical(m) => eprintln!("error: {m}"),
                Failure::Verify => eprintln!("verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
