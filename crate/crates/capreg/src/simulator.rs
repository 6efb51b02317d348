//! Euler–Maruyama simulation of the controlled capacities
//! `dXʲ = (aʲ − δⱼXʲ)dt + bʲ dWʲ` and pathwise contract evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::TimeGrid;
use crate::schedule::{ContractPrices, ControlSchedule};

/// How the quadratic variation entering the contract is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QvMode {
    /// `b(t)² dt`.
    #[default]
    Predictable,
    /// Squared increments of the simulated path.
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub qv: QvMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub x0: [f64; 2],
    /// Path-major, `grid.len()` states per path.
    pub states: Vec<[f64; 2]>,
    /// Path-major, `grid.steps` quadratic-variation increments per path.
    pub qv: Vec<[f64; 2]>,
}

impl PathBundle {
    pub fn path(&self, p: usize) -> &[[f64; 2]] {
        let n = self.grid.len();
        &self.states[p * n..(p + 1) * n]
    }

    pub fn qv_path(&self, p: usize) -> &[[f64; 2]] {
        let n = self.grid.steps;
        &self.qv[p * n..(p + 1) * n]
    }

    pub fn terminal(&self, p: usize) -> [f64; 2] {
        *self.path(p).last().unwrap()
    }
}

/// Generator for one path: the seed selects the key, the path index the stream.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

struct Stepper<'a> {
    controls: &'a ControlSchedule,
    delta: [f64; 2],
    dt: f64,
    sqrt_dt: f64,
    qv: QvMode,
}

impl Stepper<'_> {
    /// Advances `x` over step `k`; returns the quadratic-variation increment.
    fn step(&self, k: usize, x: &mut [f64; 2], rng: &mut ChaCha8Rng) -> [f64; 2] {
        let a = self.controls.drift[k];
        let b = self.controls.vol[k];
        let mut dq = [0.0; 2];
        for j in 0..2 {
            let xi: f64 = rng.sample(StandardNormal);
            let dx = (a[j] - self.delta[j] * x[j]) * self.dt + b[j] * self.sqrt_dt * xi;
            x[j] += dx;
            dq[j] = match self.qv {
                QvMode::Predictable => b[j] * b[j] * self.dt,
                QvMode::Realized => dx * dx,
            };
        }
        dq
    }
}

fn check_inputs(controls: &ControlSchedule, grid: &TimeGrid, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(domain("number of paths must be positive"));
    }
    if controls.drift.len() != grid.len() || controls.vol.len() != grid.len() {
        return Err(domain("control schedule does not match the grid"));
    }
    Ok(())
}

fn stepper<'a>(
    controls: &'a ControlSchedule,
    delta: [f64; 2],
    grid: &TimeGrid,
    opts: SimOptions,
) -> Stepper<'a> {
    Stepper {
        controls,
        delta,
        dt: grid.dt(),
        sqrt_dt: grid.dt().sqrt(),
        qv: opts.qv,
    }
}

pub fn simulate_paths(
    controls: &ControlSchedule,
    x0: [f64; 2],
    delta: [f64; 2],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    simulate_paths_with(
        controls,
        x0,
        delta,
        grid,
        n_paths,
        seed,
        SimOptions::default(),
    )
}

pub fn simulate_paths_with(
    controls: &ControlSchedule,
    x0: [f64; 2],
    delta: [f64; 2],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<PathBundle> {
    check_inputs(controls, grid, n_paths)?;
    let stepper = stepper(controls, delta, grid, opts);
    let len = grid.len();
    let steps = grid.steps;
    let mut states = vec![[0.0; 2]; n_paths * len];
    let mut qv = vec![[0.0; 2]; n_paths * steps];
    states
        .par_chunks_mut(len)
        .zip(qv.par_chunks_mut(steps))
        .enumerate()
        .for_each(|(p, (xs, qs))| {
            let mut rng = path_rng(seed, p);
            let mut x = x0;
            xs[0] = x;
            for k in 0..steps {
                qs[k] = stepper.step(k, &mut x, &mut rng);
                xs[k + 1] = x;
            }
        });
    Ok(PathBundle {
        seed,
        n_paths,
        grid: *grid,
        x0,
        states,
        qv,
    })
}

/// Terminal states only; identical to the terminal states of [`simulate_paths`].
pub fn simulate_terminal(
    controls: &ControlSchedule,
    x0: [f64; 2],
    delta: [f64; 2],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    check_inputs(controls, grid, n_paths)?;
    let stepper = stepper(controls, delta, grid, SimOptions::default());
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut x = x0;
            for k in 0..grid.steps {
                stepper.step(k, &mut x, &mut rng);
            }
            x
        })
        .collect())
}

/// Contract value of one agent on one path, in money.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContractValue {
    pub fixed: f64,
    pub variable: f64,
}

impl ContractValue {
    pub fn total(&self) -> f64 {
        self.fixed + self.variable
    }
}

fn check_prices(prices: &ContractPrices, grid: &TimeGrid) -> Result<()> {
    if prices.times.len() != grid.len() || prices.agents.iter().any(|a| a.drift.len() != grid.len())
    {
        return Err(domain("contract prices do not match the grid"));
    }
    Ok(())
}

/// Pathwise contract values `[path][agent]`: capacity changes priced with
/// left-point sums, quadratic variation priced per increment, plus the
/// terminal bonus and the fixed part.
pub fn evaluate_contract(
    bundle: &PathBundle,
    prices: &ContractPrices,
    grid: &TimeGrid,
) -> Result<Vec<Vec<ContractValue>>> {
    if bundle.grid != *grid {
        return Err(domain("path bundle and grid differ"));
    }
    check_prices(prices, grid)?;
    let dt = grid.dt();
    let x0 = bundle.x0;
    Ok((0..bundle.n_paths)
        .into_par_iter()
        .map(|p| {
            let xs = bundle.path(p);
            let qs = bundle.qv_path(p);
            let xt = bundle.terminal(p);
            prices
                .agents
                .iter()
                .map(|ap| {
                    let mut variable = 0.0;
                    for j in 0..2 {
                        let drift: f64 = (0..grid.steps)
                            .map(|k| (xs[k][j] - x0[j]) * ap.drift[k][j])
                            .sum();
                        let vol: f64 = (0..grid.steps).map(|k| ap.vol[k][j] * qs[k][j]).sum();
                        variable += drift * dt + 0.5 * vol + (xt[j] - x0[j]) * ap.terminal[j];
                    }
                    ContractValue {
                        fixed: ap.fixed,
                        variable: prices.energy_scale * variable,
                    }
                })
                .collect()
        })
        .collect())
}

/// Running contract sums for all agents along one path.
#[derive(Debug, Clone)]
pub struct ContractAccumulator<'a> {
    prices: &'a ContractPrices,
    x0: [f64; 2],
    dt: f64,
    sums: Vec<f64>,
}

impl<'a> ContractAccumulator<'a> {
    pub fn new(prices: &'a ContractPrices, x0: [f64; 2], dt: f64) -> Self {
        ContractAccumulator {
            prices,
            x0,
            dt,
            sums: vec![0.0; prices.agents.len()],
        }
    }

    /// Records step `k` starting from state `x` with quadratic-variation increment `dq`.
    pub fn observe(&mut self, k: usize, x: [f64; 2], dq: [f64; 2]) {
        for (sum, ap) in self.sums.iter_mut().zip(&self.prices.agents) {
            for j in 0..2 {
                *sum += (x[j] - self.x0[j]) * ap.drift[k][j] * self.dt + 0.5 * ap.vol[k][j] * dq[j];
            }
        }
    }

    pub fn finish(self, terminal: [f64; 2]) -> Vec<ContractValue> {
        self.sums
            .iter()
            .zip(&self.prices.agents)
            .map(|(sum, ap)| {
                let bonus: f64 = (0..2)
                    .map(|j| (terminal[j] - self.x0[j]) * ap.terminal[j])
                    .sum();
                ContractValue {
                    fixed: ap.fixed,
                    variable: self.prices.energy_scale * (sum + bonus),
                }
            })
            .collect()
    }
}

/// Simulates and prices paths without storing them.
#[allow(clippy::too_many_arguments)]
pub fn simulate_contract_values(
    controls: &ControlSchedule,
    prices: &ContractPrices,
    x0: [f64; 2],
    delta: [f64; 2],
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<Vec<Vec<ContractValue>>> {
    check_inputs(controls, grid, n_paths)?;
    check_prices(prices, grid)?;
    let stepper = stepper(controls, delta, grid, opts);
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut acc = ContractAccumulator::new(prices, x0, grid.dt());
            let mut x = x0;
            for k in 0..grid.steps {
                let start = x;
                let dq = stepper.step(k, &mut x, &mut rng);
                acc.observe(k, start, dq);
            }
            acc.finish(x)
        })
        .collect())
}
