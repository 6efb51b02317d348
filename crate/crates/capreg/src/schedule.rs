//! Time-gridded payments, controls and contract prices.

use serde::{Deserialize, Serialize};

use crate::params::ScenarioTag;

/// Drift payments `z^n_j` and volatility payments per state channel.
///
/// `drift[k]` is stacked agent-major: entry `n·dim + j` pays agent `n` for
/// increments of state `j`. `vol[k][j]` is paid to the agent steering the
/// volatility of channel `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentSchedule {
    pub times: Vec<f64>,
    pub agents: usize,
    pub dim: usize,
    pub drift: Vec<Vec<f64>>,
    pub vol: Vec<Vec<f64>>,
    /// Principal's marginal revenue `w^P` on the grid.
    pub revenue: Vec<Vec<f64>>,
    /// Largest fixed-point residual over the grid.
    pub max_residual: f64,
    pub max_iterations: usize,
}

impl PaymentSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn z(&self, k: usize, n: usize, j: usize) -> f64 {
        self.drift[k][n * self.dim + j]
    }

    pub fn gamma(&self, k: usize, j: usize) -> f64 {
        self.vol[k][j]
    }

    /// Payments to agent `n` on channel `j` over the grid.
    pub fn z_series(&self, n: usize, j: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.z(k, n, j)).collect()
    }

    pub fn gamma_series(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.gamma(k, j)).collect()
    }
}

/// Controls at one time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub drift: [f64; 2],
    pub vol: [f64; 2],
    /// False where the volatility sits on the band edge or has no interior optimum.
    pub interior: [bool; 2],
}

/// Drift and volatility controls of the two technologies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub tag: Option<ScenarioTag>,
    pub times: Vec<f64>,
    pub drift: Vec<[f64; 2]>,
    pub vol: Vec<[f64; 2]>,
}

impl ControlSchedule {
    pub fn constant(times: Vec<f64>, drift: [f64; 2], vol: [f64; 2]) -> Self {
        let n = times.len();
        ControlSchedule {
            tag: None,
            times,
            drift: vec![drift; n],
            vol: vec![vol; n],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Rebate prices for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrices {
    /// Price per unit of capacity above the initial level, per technology.
    pub drift: Vec<[f64; 2]>,
    /// Price per unit of quadratic variation, per technology.
    pub vol: Vec<[f64; 2]>,
    /// Fixed part of the contract in money.
    pub fixed: f64,
    /// Terminal bonus per unit of capacity change, per technology.
    pub terminal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractPrices {
    pub times: Vec<f64>,
    pub energy_scale: f64,
    pub agents: Vec<AgentPrices>,
}
