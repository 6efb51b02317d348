//! Flat TOML scenario configs and batch manifests.
//!
//! A config file holds `key = value` pairs. Parameters that are omitted take
//! the reference calibration. A file that lists `scenarios` or `include` is a
//! batch manifest: every listed scenario runs with the manifest's parameters
//! and every included file is read as its own config on top of them.

use std::path::{Path, PathBuf};

use capreg::monopoly::DerivativeMode;
use capreg::scenario::SimSettings;
use capreg::simulator::QvMode;
use capreg::{Market, MarketSpec, Regime, ScenarioTag, TimeGrid, VolMode};
use serde::de::DeserializeOwned;
use toml::{Table, Value};

pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DT: f64 = 1.0 / 52.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{file}: {message}")]
    Syntax { file: String, message: String },
    #[error("{file}: field `{field}`: {message}")]
    Field {
        file: String,
        field: String,
        message: String,
    },
    #[error("{file}: cannot read: {message}")]
    Io { file: String, message: String },
}

/// One fully resolved scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub name: String,
    pub tag: ScenarioTag,
    pub spec: MarketSpec,
    pub grid: TimeGrid,
    pub settings: SimSettings,
}

#[derive(Debug, Clone, Default)]
struct PartialTag {
    scenario: Option<ScenarioTag>,
    market: Option<Market>,
    regime: Option<Regime>,
    vol: Option<VolMode>,
}

impl PartialTag {
    fn resolve(&self) -> Option<ScenarioTag> {
        if let Some(tag) = self.scenario {
            return Some(tag);
        }
        Some(ScenarioTag::new(self.market?, self.regime?, self.vol?))
    }
}

/// Parameters accumulated from one or more files.
#[derive(Debug, Clone)]
struct Layer {
    spec: MarketSpec,
    dt: f64,
    n_paths: Option<usize>,
    seed: Option<u64>,
    qv: QvMode,
    derivative: DerivativeMode,
    name: Option<String>,
    tag: PartialTag,
    scenarios: Vec<ScenarioTag>,
    includes: Vec<PathBuf>,
}

impl Default for Layer {
    fn default() -> Self {
        Layer {
            spec: MarketSpec::reference(),
            dt: DEFAULT_DT,
            n_paths: None,
            seed: None,
            qv: QvMode::Predictable,
            derivative: DerivativeMode::CentralDifference,
            name: None,
            tag: PartialTag::default(),
            scenarios: Vec::new(),
            includes: Vec::new(),
        }
    }
}

struct Reader<'a> {
    file: &'a str,
}

impl Reader<'_> {
    fn field_error(&self, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            file: self.file.to_string(),
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn value<T: DeserializeOwned>(&self, field: &str, value: &Value) -> Result<T, ConfigError> {
        value
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| self.field_error(field, e.message().to_string()))
    }

    fn number(&self, field: &str, value: &Value) -> Result<f64, ConfigError> {
        let x = match value {
            Value::Integer(i) => *i as f64,
            Value::Float(f) => *f,
            other => {
                return Err(self.field_error(
                    field,
                    format!("expected a number, found {}", other.type_str()),
                ))
            }
        };
        if !x.is_finite() {
            return Err(self.field_error(field, "must be finite"));
        }
        Ok(x)
    }

    fn pair(&self, field: &str, value: &Value) -> Result<[f64; 2], ConfigError> {
        let Value::Array(items) = value else {
            return Err(self.field_error(
                field,
                format!(
                    "expected an array of two numbers, found {}",
                    value.type_str()
                ),
            ));
        };
        if items.len() != 2 {
            return Err(self.field_error(
                field,
                format!(
                    "expected two values (one per technology), found {}",
                    items.len()
                ),
            ));
        }
        Ok([
            self.number(field, &items[0])?,
            self.number(field, &items[1])?,
        ])
    }

    fn count(&self, field: &str, value: &Value) -> Result<u64, ConfigError> {
        match value {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.field_error(field, "expected a non-negative integer")),
        }
    }

    fn text(&self, field: &str, value: &Value) -> Result<String, ConfigError> {
        self.value(field, value)
    }

    fn parse_with<T>(
        &self,
        field: &str,
        value: &Value,
        parse: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) -> Result<T, ConfigError> {
        let s = self.text(field, value)?;
        parse(&s.to_ascii_uppercase())
            .ok_or_else(|| self.field_error(field, format!("expected {expected}, found '{s}'")))
    }
}

fn set_pair(target: [&mut f64; 2], values: [f64; 2]) {
    let [a, b] = target;
    *a = values[0];
    *b = values[1];
}

fn apply(layer: &mut Layer, table: &Table, file: &str, dir: &Path) -> Result<(), ConfigError> {
    let r = Reader { file };
    for (key, value) in table {
        let k = key.as_str();
        let s = &mut layer.spec;
        let [t0, t1] = &mut s.tech;
        match k {
            "scenario" => {
                let name = r.text(k, value)?;
                layer.tag.scenario = Some(
                    name.parse()
                        .map_err(|e: capreg::Error| r.field_error(k, e.to_string()))?,
                );
            }
            "market" => {
                layer.tag.market = Some(r.parse_with(
                    k,
                    value,
                    |v| match v {
                        "M" | "MONOPOLY" => Some(Market::Monopoly),
                        "C" | "COMPETITIVE" | "DUOPOLY" => Some(Market::Competitive),
                        _ => None,
                    },
                    "M or C",
                )?)
            }
            "regime" => {
                layer.tag.regime = Some(r.parse_with(
                    k,
                    value,
                    |v| match v {
                        "BU" => Some(Regime::BusinessAsUsual),
                        "SB" => Some(Regime::SecondBest),
                        "FB" => Some(Regime::FirstBest),
                        _ => None,
                    },
                    "BU, SB or FB",
                )?)
            }
            "vol_control" => {
                layer.tag.vol = Some(r.parse_with(
                    k,
                    value,
                    |v| match v {
                        "DC" => Some(VolMode::Uncontrolled),
                        "DVC" => Some(VolMode::Controlled),
                        _ => None,
                    },
                    "DC or DVC",
                )?)
            }
            "name" => {
                let name = r.text(k, value)?;
                if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                    return Err(r.field_error(k, "must be a plain directory name"));
                }
                layer.name = Some(name);
            }
            "scenarios" => {
                let names: Vec<String> = r.value(k, value)?;
                layer.scenarios = names
                    .iter()
                    .map(|n| n.parse())
                    .collect::<Result<_, capreg::Error>>()
                    .map_err(|e| r.field_error(k, e.to_string()))?;
            }
            "include" => {
                let files: Vec<String> = r.value(k, value)?;
                layer.includes = files.iter().map(|f| dir.join(f)).collect();
            }
            "power_price" => s.power_price = r.number(k, value)?,
            "congestion" => s.congestion = r.number(k, value)?,
            "linear_cost" => set_pair(
                [&mut t0.linear_cost, &mut t1.linear_cost],
                r.pair(k, value)?,
            ),
            "quadratic_cost" => set_pair(
                [&mut t0.quadratic_cost, &mut t1.quadratic_cost],
                r.pair(k, value)?,
            ),
            "vol_cost_scale" => set_pair(
                [&mut t0.vol_cost_scale, &mut t1.vol_cost_scale],
                r.pair(k, value)?,
            ),
            "uncontrolled_vol" => set_pair(
                [&mut t0.uncontrolled_vol, &mut t1.uncontrolled_vol],
                r.pair(k, value)?,
            ),
            "depreciation" => set_pair(
                [&mut t0.depreciation, &mut t1.depreciation],
                r.pair(k, value)?,
            ),
            "initial_capacity" => set_pair(
                [&mut t0.initial_capacity, &mut t1.initial_capacity],
                r.pair(k, value)?,
            ),
            "agent_risk_aversion" => s.monopolist.risk_aversion = r.number(k, value)?,
            "agent_reservation_ce" => s.monopolist.reservation_ce = r.number(k, value)?,
            "firm_risk_aversion" => {
                let [f0, f1] = &mut s.firms;
                set_pair(
                    [&mut f0.risk_aversion, &mut f1.risk_aversion],
                    r.pair(k, value)?,
                )
            }
            "firm_reservation_ce" => {
                let [f0, f1] = &mut s.firms;
                set_pair(
                    [&mut f0.reservation_ce, &mut f1.reservation_ce],
                    r.pair(k, value)?,
                )
            }
            "externality" => s.principal.externality = r.pair(k, value)?,
            "vol_penalty" => s.principal.vol_penalty = r.number(k, value)?,
            "principal_risk_aversion" => s.principal.risk_aversion = r.number(k, value)?,
            "horizon" => s.principal.horizon = r.number(k, value)?,
            "energy_scale" => s.energy_scale = r.number(k, value)?,
            "dt" => layer.dt = r.number(k, value)?,
            "n_paths" => layer.n_paths = Some(r.count(k, value)? as usize),
            "seed" => layer.seed = Some(r.count(k, value)?),
            "qv_mode" => {
                layer.qv = r.parse_with(
                    k,
                    value,
                    |v| match v {
                        "PREDICTABLE" => Some(QvMode::Predictable),
                        "REALIZED" => Some(QvMode::Realized),
                        _ => None,
                    },
                    "predictable or realized",
                )?
            }
            "derivative" => {
                layer.derivative = r.parse_with(
                    k,
                    value,
                    |v| match v {
                        "CENTRAL" => Some(DerivativeMode::CentralDifference),
                        "FROZEN" => Some(DerivativeMode::FrozenVolatility),
                        _ => None,
                    },
                    "central or frozen",
                )?
            }
            _ => return Err(r.field_error(k, "unknown field")),
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        file: file.clone(),
        message: e.to_string(),
    })?;
    parse_table(&text, &file)
}

fn parse_table(text: &str, file: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Syntax {
        file: file.to_string(),
        message: e.to_string().trim_end().to_string(),
    })
}

/// Command-line overrides applied after every file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioTag>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
}

fn finish(layer: &Layer, tag: ScenarioTag, file: &str, o: &Overrides) -> Result<Job, ConfigError> {
    let field = |field: &str, e: capreg::Error| ConfigError::Field {
        file: file.to_string(),
        field: field.to_string(),
        message: e.to_string(),
    };
    layer.spec.validate().map_err(|e| field("parameters", e))?;
    let grid = TimeGrid::new(layer.spec.principal.horizon, layer.dt).map_err(|e| field("dt", e))?;
    let n_paths = o.n_paths.or(layer.n_paths).unwrap_or(DEFAULT_PATHS);
    if n_paths == 0 {
        return Err(ConfigError::Field {
            file: file.to_string(),
            field: "n_paths".into(),
            message: "must be positive".into(),
        });
    }
    Ok(Job {
        name: layer.name.clone().unwrap_or_else(|| tag.to_string()),
        tag,
        spec: layer.spec,
        grid,
        settings: SimSettings {
            n_paths,
            seed: o.seed.or(layer.seed).unwrap_or(DEFAULT_SEED),
            qv: layer.qv,
            derivative: layer.derivative,
        },
    })
}

fn expand(
    base: &Layer,
    table: &Table,
    file: &str,
    dir: &Path,
    o: &Overrides,
    depth: usize,
    jobs: &mut Vec<Job>,
) -> Result<(), ConfigError> {
    if depth > 8 {
        return Err(ConfigError::Field {
            file: file.to_string(),
            field: "include".into(),
            message: "includes nest too deeply".into(),
        });
    }
    let mut layer = base.clone();
    layer.scenarios.clear();
    layer.includes.clear();
    apply(&mut layer, table, file, dir)?;
    let is_batch = !layer.scenarios.is_empty() || !layer.includes.is_empty();
    if let Some(tag) = o.scenario {
        jobs.push(finish(&layer, tag, file, o)?);
        return Ok(());
    }
    if !is_batch {
        match layer.tag.resolve() {
            Some(tag) => jobs.push(finish(&layer, tag, file, o)?),
            None if depth == 0 => {
                for tag in ScenarioTag::all() {
                    let mut l = layer.clone();
                    l.name = None;
                    jobs.push(finish(&l, tag, file, o)?);
                }
            }
            None => {
                return Err(ConfigError::Field {
                    file: file.to_string(),
                    field: "scenario".into(),
                    message: "missing (give `scenario` or `market`, `regime` and `vol_control`)"
                        .into(),
                })
            }
        }
        return Ok(());
    }
    for tag in &layer.scenarios {
        let mut l = layer.clone();
        l.name = None;
        jobs.push(finish(&l, *tag, file, o)?);
    }
    for path in &layer.includes {
        let sub = read_table(path)?;
        let sub_dir = path.parent().unwrap_or(Path::new("."));
        let mut inherited = layer.clone();
        inherited.name = None;
        inherited.tag = PartialTag::default();
        expand(
            &inherited,
            &sub,
            &path.display().to_string(),
            sub_dir,
            o,
            depth + 1,
            jobs,
        )?;
    }
    Ok(())
}

/// Resolves the jobs described by an optional config file and the overrides.
/// Without a file or scenario every named scenario runs on the reference
/// parameters.
pub fn load_jobs(path: Option<&Path>, overrides: &Overrides) -> Result<Vec<Job>, ConfigError> {
    let (table, file, dir) = match path {
        Some(p) => (
            read_table(p)?,
            p.display().to_string(),
            p.parent().unwrap_or(Path::new(".")).to_path_buf(),
        ),
        None => (Table::new(), "<defaults>".to_string(), PathBuf::from(".")),
    };
    let mut jobs = Vec::new();
    expand(
        &Layer::default(),
        &table,
        &file,
        &dir,
        overrides,
        0,
        &mut jobs,
    )?;
    unique_names(jobs, &file)
}

fn unique_names(jobs: Vec<Job>, file: &str) -> Result<Vec<Job>, ConfigError> {
    let mut seen = std::collections::HashSet::new();
    for job in &jobs {
        if !seen.insert(job.name.clone()) {
            return Err(ConfigError::Field {
                file: file.to_string(),
                field: "name".into(),
                message: format!("two runs would write to the same directory '{}'", job.name),
            });
        }
    }
    Ok(jobs)
}

#[cfg(test)]
pub(crate) fn jobs_from_str(text: &str) -> Result<Vec<Job>, ConfigError> {
    let table = parse_table(text, "test.toml")?;
    let mut jobs = Vec::new();
    expand(
        &Layer::default(),
        &table,
        "test.toml",
        Path::new("."),
        &Overrides::default(),
        0,
        &mut jobs,
    )?;
    unique_names(jobs, "test.toml")
}
