//! `capreg`: runs regulation scenarios and compares their outputs.

mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use capreg::scenario::run_scenario;
use capreg::ScenarioTag;
use clap::Parser;
use rayon::prelude::*;

use config::{load_jobs, ConfigError, Overrides};
use output::{write_scenario, Summary};
use report::{ordering, Ordering, ReportError};

const THREADS_ENV: &str = "CAPREG_THREADS";

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ORDERING: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "capreg",
    version,
    about = "Capacity regulation scenario runner"
)]
struct Args {
    /// Scenario config or batch manifest (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; one subdirectory per scenario.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo paths per scenario [default: 1000].
    #[arg(long)]
    paths: Option<usize>,
    /// Base seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario name such as M-SB-DVC, overriding the config.
    #[arg(long)]
    scenario: Option<ScenarioTag>,
    /// Print the comparison table of the outputs already in --out.
    #[arg(long)]
    report: bool,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Solver(String, capreg::Error),
    Io(String),
    Report(ReportError),
    Ordering,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_, capreg::Error::Domain(_)) => EXIT_CONFIG,
            Failure::Solver(..) => EXIT_SOLVER,
            Failure::Io(_) | Failure::Report(_) => 1,
            Failure::Ordering => EXIT_ORDERING,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("invalid config: {e}"),
            Failure::Solver(name, e) => format!("{name}: {e}"),
            Failure::Io(e) => e.clone(),
            Failure::Report(e) => e.to_string(),
            Failure::Ordering => "contract value ordering does not hold".into(),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| {
        Failure::Config(ConfigError::Field {
            file: "environment".into(),
            field: THREADS_ENV.into(),
            message: format!("expected a thread count, found '{value}'"),
        })
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Io(e.to_string()))
}

fn run(args: &Args) -> Result<(), Failure> {
    let overrides = Overrides {
        scenario: args.scenario,
        n_paths: args.paths,
        seed: args.seed,
    };
    let jobs = load_jobs(args.config.as_deref(), &overrides).map_err(Failure::Config)?;
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|job| run_scenario(&job.spec, &job.grid, job.tag, &job.settings))
        .collect();
    let mut summaries = Vec::with_capacity(jobs.len());
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome.map_err(|e| Failure::Solver(job.name.clone(), e))?;
        let summary = Summary::new(job, &outcome);
        let dir = args.out.join(&job.name);
        write_scenario(&dir, &summary, &outcome)
            .map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        println!("{}: wrote {}", job.name, dir.display());
        summaries.push(summary);
    }
    if summaries.len() >= 2 {
        let table = report::render(&summaries);
        let path = args.out.join("report.txt");
        std::fs::write(&path, &table)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        print!("\n{table}");
    }
    Ok(())
}

fn compare(args: &Args) -> Result<(), Failure> {
    let expected: Option<Vec<String>> = if args.config.is_some() || args.scenario.is_some() {
        let overrides = Overrides {
            scenario: args.scenario,
            ..Overrides::default()
        };
        let jobs = load_jobs(args.config.as_deref(), &overrides).map_err(Failure::Config)?;
        Some(jobs.into_iter().map(|j| j.name).collect())
    } else {
        None
    };
    let summaries = report::load(&args.out, expected.as_deref()).map_err(Failure::Report)?;
    print!("{}", report::render(&summaries));
    if ordering(&summaries) == Ordering::Violated {
        return Err(Failure::Ordering);
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure_threads().and_then(|()| {
        if args.report {
            compare(&args)
        } else {
            run(&args)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("capreg: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
