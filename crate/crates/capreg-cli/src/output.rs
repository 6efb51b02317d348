//! CSV and JSON files written for each scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use capreg::metrics::Estimate;
use capreg::scenario::{ContractSummary, ScenarioOutcome};
use capreg::{MarketSpec, ScenarioTag};
use serde::{Deserialize, Serialize};

use crate::config::Job;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub scenario: ScenarioTag,
    pub solver: String,
    pub energy_scale: f64,
    pub horizon: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub agent_certainty_equivalents: Vec<f64>,
    pub principal_certainty_equivalent: Option<f64>,
    pub contract: Option<ContractSummary>,
    pub terminal_total_capacity: Estimate,
    pub terminal_capacity: [f64; 2],
    pub terminal_share: Estimate,
    pub terminal_share_of_means: f64,
    pub negative_capacity_paths: usize,
    pub max_payment_residual: Option<f64>,
    pub parameters: MarketSpec,
}

impl Summary {
    pub fn new(job: &Job, out: &ScenarioOutcome) -> Self {
        let m = &out.metrics;
        Summary {
            name: job.name.clone(),
            scenario: out.tag,
            solver: out.solver.label().to_string(),
            energy_scale: out.energy_scale,
            horizon: out.grid.horizon,
            steps: out.grid.steps,
            n_paths: out.settings.n_paths,
            seed: out.settings.seed,
            agent_certainty_equivalents: out.certainty_equivalents.agents.clone(),
            principal_certainty_equivalent: out.certainty_equivalents.principal,
            contract: out.contract.clone(),
            terminal_total_capacity: m.terminal_total,
            terminal_capacity: *m.mean.last().unwrap(),
            terminal_share: m.terminal_share,
            terminal_share_of_means: m.terminal_share_of_means,
            negative_capacity_paths: m.negative_capacity_paths,
            max_payment_residual: out.payments.as_ref().map(|p| p.max_residual),
            parameters: job.spec,
        }
    }
}

struct Csv {
    body: String,
}

impl Csv {
    fn new(header: &[String]) -> Self {
        let mut body = String::new();
        body.push_str(&header.join(","));
        body.push('\n');
        Csv { body }
    }

    fn comment(lines: &[String], header: &[String]) -> Self {
        let mut body = String::new();
        for l in lines {
            let _ = writeln!(body, "# {l}");
        }
        body.push_str(&header.join(","));
        body.push('\n');
        Csv { body }
    }

    fn row(&mut self, values: impl IntoIterator<Item = f64>) {
        let mut first = true;
        for v in values {
            if !first {
                self.body.push(',');
            }
            first = false;
            let _ = write!(self.body, "{}", v + 0.0);
        }
        self.body.push('\n');
    }
}

fn names(prefix: &str, agents: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=agents {
        for j in 1..=2 {
            out.push(format!("{prefix}{n}_{j}"));
        }
    }
    out
}

fn header(columns: Vec<Vec<String>>) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(columns.into_iter().flatten())
        .collect()
}

fn payments_csv(out: &ScenarioOutcome) -> String {
    let times = out.grid.times();
    match &out.payments {
        Some(p) => {
            let mut csv = Csv::new(&header(vec![
                names("z", p.agents),
                vec!["gamma_1".into(), "gamma_2".into()],
            ]));
            for (k, t) in times.iter().enumerate() {
                csv.row(
                    std::iter::once(*t)
                        .chain(p.drift[k].iter().copied())
                        .chain(p.vol[k].iter().copied()),
                );
            }
            csv.body
        }
        None => {
            let mut csv = Csv::new(&header(vec![vec!["wA_1".into(), "wA_2".into()]]));
            for (t, w) in times.iter().zip(&out.agent_revenue) {
                csv.row([*t, w[0], w[1]]);
            }
            csv.body
        }
    }
}

fn controls_csv(out: &ScenarioOutcome) -> String {
    let c = &out.controls;
    let mut csv = Csv::new(&header(vec![vec![
        "a_1".into(),
        "a_2".into(),
        "b_1".into(),
        "b_2".into(),
    ]]));
    for k in 0..c.len() {
        csv.row([
            c.times[k],
            c.drift[k][0],
            c.drift[k][1],
            c.vol[k][0],
            c.vol[k][1],
        ]);
    }
    csv.body
}

fn prices_csv(out: &ScenarioOutcome) -> String {
    let times = out.grid.times();
    let Some(p) = &out.prices else {
        let mut csv = Csv::comment(
            &[
                "contract = none".to_string(),
                format!("energy_scale = {}", out.energy_scale),
            ],
            &header(vec![]),
        );
        for t in &times {
            csv.row([*t]);
        }
        return csv.body;
    };
    let agents = p.agents.len();
    let mut meta = vec![format!("energy_scale = {}", p.energy_scale)];
    for (n, a) in p.agents.iter().enumerate() {
        meta.push(format!("fixed_{} = {}", n + 1, a.fixed));
        for j in 0..2 {
            meta.push(format!(
                "terminal_{}_{} = {}",
                n + 1,
                j + 1,
                a.terminal[j] + 0.0
            ));
        }
    }
    let mut csv = Csv::comment(
        &meta,
        &header(vec![names("piD_", agents), names("piV_", agents)]),
    );
    for (k, t) in times.iter().enumerate() {
        let drift = p.agents.iter().flat_map(|a| a.drift[k]);
        let vol = p.agents.iter().flat_map(|a| a.vol[k]);
        csv.row(std::iter::once(*t).chain(drift).chain(vol));
    }
    csv.body
}

fn paths_csv(out: &ScenarioOutcome) -> String {
    let m = &out.metrics;
    let mut csv = Csv::new(&header(vec![
        ["mean_1", "q05_1", "q95_1", "mean_2", "q05_2", "q95_2"]
            .map(String::from)
            .to_vec(),
        vec![
            "total_mean".into(),
            "share_mean".into(),
            "share_of_means".into(),
        ],
    ]));
    for k in 0..m.times.len() {
        csv.row([
            m.times[k],
            m.mean[k][0],
            m.q05[k][0],
            m.q95[k][0],
            m.mean[k][1],
            m.q05[k][1],
            m.q95[k][1],
            m.total_mean[k],
            m.share_mean[k],
            m.share_of_means[k],
        ]);
    }
    csv.body
}

/// Writes the five output files of one scenario into `dir`.
pub fn write_scenario(dir: &Path, summary: &Summary, out: &ScenarioOutcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("payments.csv"), payments_csv(out))?;
    fs::write(dir.join("controls.csv"), controls_csv(out))?;
    fs::write(dir.join("prices.csv"), prices_csv(out))?;
    fs::write(dir.join("paths.csv"), paths_csv(out))?;
    let json = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), json + "\n")
}

pub fn read_summary(path: &Path) -> anyhow::Result<Summary> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
