//! Optimal regulation of conventional and renewable capacity investment.
//!
//! A regulator contracts with a monopolist or two competing firms that invest
//! in two technologies. The crate computes business-as-usual behaviour,
//! second-best and first-best payments and controls, simulates the capacity
//! processes and prices the resulting rebate contracts.

pub mod duopoly;
pub mod error;
pub mod fixed_point;
pub mod general;
pub mod grid;
pub mod hamiltonian;
pub mod metrics;
pub mod monopoly;
pub mod params;
pub mod revenue;
pub mod scenario;
pub mod schedule;
pub mod simulator;
pub mod volatility;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use params::{
    AgentSpec, Market, MarketSpec, PrincipalSpec, Regime, ScenarioTag, TechnologySpec, VolMode,
};
