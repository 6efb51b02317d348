//! End-to-end runs of the twelve named scenarios.

use serde::{Deserialize, Serialize};

use crate::duopoly::{
    bu_control_schedule_competitive, bu_value_competitive, contract_prices_competitive,
    fb_payments_competitive, sb_control_schedule_competitive, sb_payments_competitive,
    sb_principal_value_competitive,
};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::metrics::{path_metrics, Estimate, PathMetrics};
use crate::monopoly::{
    bu_control_schedule_monopoly, bu_value_monopoly, contract_prices_monopoly,
    sb_control_schedule_monopoly, sb_payments_monopoly, sb_principal_value_monopoly,
    DerivativeMode,
};
use crate::params::{Market, MarketSpec, Regime, ScenarioTag};
use crate::revenue::agent_revenue;
use crate::schedule::{ContractPrices, ControlSchedule, PaymentSchedule};
use crate::simulator::{
    evaluate_contract, simulate_paths_with, ContractValue, PathBundle, QvMode, SimOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub qv: QvMode,
    pub derivative: DerivativeMode,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            n_paths: 1000,
            seed: 42,
            qv: QvMode::Predictable,
            derivative: DerivativeMode::CentralDifference,
        }
    }
}

/// Which computation produced a scenario's payments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverPath {
    /// No contract; agents respond to the power price only.
    NoContract,
    /// Damped fixed point of the risk-averse payment system.
    FixedPoint,
    /// Fixed point with agent risk aversion set to zero.
    RiskNeutralFixedPoint,
    /// Constant-coefficient first-best formulas.
    ConstantCoefficients,
}

impl SolverPath {
    pub fn label(self) -> &'static str {
        match self {
            SolverPath::NoContract => "no-contract",
            SolverPath::FixedPoint => "fixed-point",
            SolverPath::RiskNeutralFixedPoint => "risk-neutral-fixed-point",
            SolverPath::ConstantCoefficients => "constant-coefficients",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentContract {
    pub fixed: f64,
    pub variable: Estimate,
    pub total: Estimate,
}

/// Monte Carlo summary of the contract values paid by the regulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSummary {
    pub agents: Vec<AgentContract>,
    /// Sum over agents, per path.
    pub total: Estimate,
}

fn summarize(values: &[Vec<ContractValue>]) -> Result<ContractSummary> {
    let agents = values[0].len();
    let per_agent = (0..agents)
        .map(|n| {
            let variable: Vec<f64> = values.iter().map(|v| v[n].variable).collect();
            let total: Vec<f64> = values.iter().map(|v| v[n].total()).collect();
            Ok(AgentContract {
                fixed: values[0][n].fixed,
                variable: Estimate::from_samples(&variable)?,
                total: Estimate::from_samples(&total)?,
            })
        })
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = values
        .iter()
        .map(|v| v.iter().map(ContractValue::total).sum())
        .collect();
    Ok(ContractSummary {
        agents: per_agent,
        total: Estimate::from_samples(&totals)?,
    })
}

/// Certainty equivalents in money at time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyEquivalents {
    pub agents: Vec<f64>,
    pub principal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub tag: ScenarioTag,
    pub solver: SolverPath,
    pub grid: TimeGrid,
    pub energy_scale: f64,
    pub settings: SimSettings,
    /// Drift and volatility payments; absent without a contract.
    pub payments: Option<PaymentSchedule>,
    /// Agents' own marginal revenue, per grid point.
    pub agent_revenue: Vec<[f64; 2]>,
    pub controls: ControlSchedule,
    pub prices: Option<ContractPrices>,
    pub contract: Option<ContractSummary>,
    pub certainty_equivalents: CertaintyEquivalents,
    pub metrics: PathMetrics,
    #[serde(skip)]
    pub contract_values: Vec<Vec<ContractValue>>,
}

struct Solved {
    solver: SolverPath,
    payments: Option<PaymentSchedule>,
    controls: ControlSchedule,
    prices: Option<ContractPrices>,
    ces: CertaintyEquivalents,
}

fn solve(
    spec: &MarketSpec,
    grid: &TimeGrid,
    tag: ScenarioTag,
    derivative: DerivativeMode,
) -> Result<Solved> {
    let mode = tag.vol;
    match (tag.market, tag.regime) {
        (Market::Monopoly, Regime::BusinessAsUsual) => Ok(Solved {
            solver: SolverPath::NoContract,
            payments: None,
            controls: bu_control_schedule_monopoly(grid, spec, mode)?,
            prices: None,
            ces: CertaintyEquivalents {
                agents: vec![bu_value_monopoly(grid, spec, mode)?.value],
                principal: None,
            },
        }),
        (Market::Competitive, Regime::BusinessAsUsual) => {
            let [v1, v2] = bu_value_competitive(grid, spec, mode)?;
            Ok(Solved {
                solver: SolverPath::NoContract,
                payments: None,
                controls: bu_control_schedule_competitive(grid, spec, mode)?,
                prices: None,
                ces: CertaintyEquivalents {
                    agents: vec![v1.value, v2.value],
                    principal: None,
                },
            })
        }
        (Market::Monopoly, regime) => {
            let (spec, solver) = if regime == Regime::FirstBest {
                (
                    spec.risk_neutral_agents(),
                    SolverPath::RiskNeutralFixedPoint,
                )
            } else {
                (spec.clone(), SolverPath::FixedPoint)
            };
            let payments = sb_payments_monopoly(grid, &spec, mode)?;
            Ok(Solved {
                solver,
                controls: sb_control_schedule_monopoly(&payments, &spec, mode)?,
                prices: Some(contract_prices_monopoly(
                    &payments, &spec, mode, derivative,
                )?),
                ces: CertaintyEquivalents {
                    agents: vec![spec.monopolist.reservation_ce],
                    principal: Some(sb_principal_value_monopoly(&payments, &spec, mode)?.value),
                },
                payments: Some(payments),
            })
        }
        (Market::Competitive, regime) => {
            let (spec, payments, solver) = if regime == Regime::FirstBest {
                let neutral = spec.risk_neutral_agents();
                let p = fb_payments_competitive(grid, &neutral)?;
                (neutral, p, SolverPath::ConstantCoefficients)
            } else {
                let p = sb_payments_competitive(grid, spec, mode)?;
                (spec.clone(), p, SolverPath::FixedPoint)
            };
            Ok(Solved {
                solver,
                controls: sb_control_schedule_competitive(&payments, &spec, mode)?,
                prices: Some(contract_prices_competitive(
                    &payments, &spec, mode, derivative,
                )?),
                ces: CertaintyEquivalents {
                    agents: spec.firms.iter().map(|f| f.reservation_ce).collect(),
                    principal: Some(sb_principal_value_competitive(&payments, &spec, mode)?.value),
                },
                payments: Some(payments),
            })
        }
    }
}

/// Controls of a scenario without simulating it.
pub fn scenario_controls(
    spec: &MarketSpec,
    grid: &TimeGrid,
    tag: ScenarioTag,
) -> Result<ControlSchedule> {
    let mut controls = solve(spec, grid, tag, DerivativeMode::default())?.controls;
    controls.tag = Some(tag);
    Ok(controls)
}

pub fn simulate_scenario(
    spec: &MarketSpec,
    grid: &TimeGrid,
    controls: &ControlSchedule,
    settings: &SimSettings,
) -> Result<PathBundle> {
    simulate_paths_with(
        controls,
        spec.x0(),
        spec.depreciation(),
        grid,
        settings.n_paths,
        settings.seed,
        SimOptions { qv: settings.qv },
    )
}

/// Solves, prices and simulates one scenario.
pub fn run_scenario(
    spec: &MarketSpec,
    grid: &TimeGrid,
    tag: ScenarioTag,
    settings: &SimSettings,
) -> Result<ScenarioOutcome> {
    spec.validate()?;
    let solved = solve(spec, grid, tag, settings.derivative)?;
    let mut controls = solved.controls;
    controls.tag = Some(tag);
    let bundle = simulate_scenario(spec, grid, &controls, settings)?;
    let metrics = path_metrics(&bundle)?;
    let (contract, contract_values) = match &solved.prices {
        Some(prices) => {
            let values = evaluate_contract(&bundle, prices, grid)?;
            (Some(summarize(&values)?), values)
        }
        None => (None, Vec::new()),
    };
    let agent_revenue = grid
        .times()
        .iter()
        .map(|t| agent_revenue(spec, *t))
        .collect::<Result<_>>()?;
    Ok(ScenarioOutcome {
        tag,
        solver: solved.solver,
        grid: *grid,
        energy_scale: spec.energy_scale,
        settings: *settings,
        payments: solved.payments,
        agent_revenue,
        controls,
        prices: solved.prices,
        contract,
        certainty_equivalents: solved.ces,
        metrics,
        contract_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimSettings {
        SimSettings {
            n_paths: 20,
            ..SimSettings::default()
        }
    }

    #[test]
    fn every_scenario_runs() {
        let spec = MarketSpec::reference();
        let grid = TimeGrid::weekly(spec.principal.horizon).unwrap();
        for tag in ScenarioTag::all() {
            let out = run_scenario(&spec, &grid, tag, &small()).unwrap();
            assert_eq!(out.controls.len(), 521);
            let contracted = tag.regime != Regime::BusinessAsUsual;
            assert_eq!(out.contract.is_some(), contracted, "{tag}");
            assert_eq!(
                out.certainty_equivalents.agents.len(),
                if tag.market == Market::Monopoly { 1 } else { 2 }
            );
        }
    }

    #[test]
    fn contract_value_splits_into_fixed_and_variable() {
        let spec = MarketSpec::reference();
        let grid = TimeGrid::weekly(spec.principal.horizon).unwrap();
        let tag: ScenarioTag = "C-SB-DVC".parse().unwrap();
        let out = run_scenario(&spec, &grid, tag, &small()).unwrap();
        let prices = out.prices.as_ref().unwrap();
        for v in &out.contract_values {
            for (n, a) in v.iter().enumerate() {
                assert_eq!(a.fixed, prices.agents[n].fixed);
                assert_eq!(a.total(), a.fixed + a.variable);
            }
        }
    }
}
