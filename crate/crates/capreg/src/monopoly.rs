//! A single producer owning both technologies.

use crate::error::{Error, Result};
use crate::fixed_point::{damped_picard, relative_residual, solve_grid_points, PicardOptions};
use crate::grid::TimeGrid;
use crate::hamiltonian::{drift_cost_monopoly, hamiltonian_agent};
use crate::params::{MarketSpec, VolMode};
use crate::revenue::{agent_revenue, principal_revenue, w_principal_rate};
use crate::schedule::{AgentPrices, ContractPrices, ControlSchedule, Controls, PaymentSchedule};
use crate::volatility::{phi_star, vol_best_response, vol_cost};

/// How the time derivative of the drift payments is obtained for pricing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum DerivativeMode {
    /// Central differences on the payment grid.
    #[default]
    CentralDifference,
    /// Differentiate the payment formula with the volatilities held fixed.
    FrozenVolatility,
}

/// Coefficients of the monopolist's payment system, in rate units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonopolyCoefficients {
    /// `Q_M = q₁q₂ − ε²`.
    pub q_m: f64,
    pub q: [f64; 2],
    pub congestion: f64,
    pub eta_agent: f64,
    pub eta_principal: f64,
}

impl MonopolyCoefficients {
    pub fn new(spec: &MarketSpec) -> Result<Self> {
        let q_m = spec.q_monopoly();
        if q_m.abs() < 1e-12 {
            return Err(Error::Degenerate("q₁q₂ − ε² vanishes".into()));
        }
        Ok(MonopolyCoefficients {
            q_m,
            q: [spec.tech[0].quadratic_cost, spec.tech[1].quadratic_cost],
            congestion: spec.congestion,
            eta_agent: spec.effective(spec.monopolist.risk_aversion),
            eta_principal: spec.effective(spec.principal.risk_aversion),
        })
    }

    /// `ζ_j = b_j²(η_P + η_A) + q_i/Q_M`.
    pub fn zeta(&self, j: usize, b2: f64) -> f64 {
        b2 * (self.eta_principal + self.eta_agent) + self.q[1 - j] / self.q_m
    }

    /// Linear map `C` with `z = C·w` at fixed squared volatilities.
    pub fn payment_map(&self, b2: [f64; 2]) -> [[f64; 2]; 2] {
        let e = self.congestion / self.q_m;
        let zeta = [self.zeta(0, b2[0]), self.zeta(1, b2[1])];
        let mut c = [[0.0; 2]; 2];
        for j in 0..2 {
            let i = 1 - j;
            let den = zeta[j] - e * e / zeta[i];
            c[j][j] = (b2[j] * self.eta_principal + self.q[i] / self.q_m - e * e / zeta[i]) / den;
            c[j][i] = -e * (b2[i] * self.eta_agent / zeta[i]) / den;
        }
        c
    }

    /// Second-best drift payments for principal revenue `w` at fixed volatilities.
    pub fn payments(&self, w: [f64; 2], b2: [f64; 2]) -> [f64; 2] {
        let c = self.payment_map(b2);
        [
            c[0][0] * w[0] + c[0][1] * w[1],
            c[1][0] * w[0] + c[1][1] * w[1],
        ]
    }
}

/// `m̂_j = −h − η_A z_j² − η_P (w_j − z_j)²`.
pub fn m_hat_monopoly(z: f64, w: f64, spec: &MarketSpec) -> f64 {
    let eta_a = spec.effective(spec.monopolist.risk_aversion);
    let eta_p = spec.effective(spec.principal.risk_aversion);
    -spec.principal.vol_penalty - eta_a * z * z - eta_p * (w - z).powi(2)
}

/// Drift controls `a_j = (q_i(z_j − l_j) − ε(z_i − l_i))/Q_M`.
pub fn drift_response_monopoly(z: [f64; 2], spec: &MarketSpec) -> Result<[f64; 2]> {
    let c = MonopolyCoefficients::new(spec)?;
    let m = [
        z[0] - spec.tech[0].linear_cost,
        z[1] - spec.tech[1].linear_cost,
    ];
    Ok([
        (c.q[1] * m[0] - c.congestion * m[1]) / c.q_m,
        (c.q[0] * m[1] - c.congestion * m[0]) / c.q_m,
    ])
}

fn vol_response(
    gamma: [f64; 2],
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<([f64; 2], [bool; 2])> {
    let mut b = spec.sigma();
    let mut interior = [false; 2];
    if mode == VolMode::Controlled {
        for j in 0..2 {
            let r = vol_best_response(
                gamma[j],
                spec.tech[j].vol_cost_scale,
                spec.tech[j].uncontrolled_vol,
            )?;
            b[j] = r.b;
            interior[j] = r.interior;
        }
    }
    Ok((b, interior))
}

/// Controls under payments `(z, γ)`.
pub fn sb_controls_monopoly(
    z: [f64; 2],
    gamma: [f64; 2],
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<Controls> {
    let drift = drift_response_monopoly(z, spec)?;
    let (vol, interior) = vol_response(gamma, spec, mode)?;
    Ok(Controls {
        drift,
        vol,
        interior,
    })
}

/// Behaviour without a contract: the monopolist responds to its own marginal
/// revenue and bears the full volatility risk.
pub fn bu_controls_monopoly(t: f64, spec: &MarketSpec, mode: VolMode) -> Result<Controls> {
    let w = agent_revenue(spec, t)?;
    let eta = spec.effective(spec.monopolist.risk_aversion);
    sb_controls_monopoly(w, [-eta * w[0] * w[0], -eta * w[1] * w[1]], spec, mode)
}

/// Constant time derivative of the business-as-usual drift without depreciation.
pub fn bu_slope_monopoly(spec: &MarketSpec) -> Result<[f64; 2]> {
    if spec.tech.iter().any(|t| t.depreciation != 0.0) {
        return Err(Error::Unsupported(
            "drift slope is constant only without depreciation".into(),
        ));
    }
    let c = MonopolyCoefficients::new(spec)?;
    let p = spec.power_price;
    Ok([
        -p * (c.q[1] - c.congestion) / c.q_m,
        -p * (c.q[0] - c.congestion) / c.q_m,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PointPayments {
    z: [f64; 2],
    gamma: [f64; 2],
    iterations: usize,
    residual: f64,
}

fn squared_vol(gamma: [f64; 2], spec: &MarketSpec, mode: VolMode) -> Result<[f64; 2]> {
    let (b, _) = vol_response(gamma, spec, mode)?;
    Ok([b[0] * b[0], b[1] * b[1]])
}

fn solve_point(
    w: [f64; 2],
    start: Option<[f64; 2]>,
    coeffs: &MonopolyCoefficients,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<PointPayments> {
    let gamma0 = start.unwrap_or_else(|| {
        let ratio = coeffs.eta_principal / (coeffs.eta_principal + coeffs.eta_agent);
        [
            m_hat_monopoly(ratio * w[0], w[0], spec),
            m_hat_monopoly(ratio * w[1], w[1], spec),
        ]
    });
    let out = damped_picard(
        gamma0.to_vec(),
        |g| {
            let z = coeffs.payments(w, squared_vol([g[0], g[1]], spec, mode)?);
            Ok(vec![
                m_hat_monopoly(z[0], w[0], spec),
                m_hat_monopoly(z[1], w[1], spec),
            ])
        },
        PicardOptions::default(),
    )?;
    let z = coeffs.payments(w, squared_vol([out.point[0], out.point[1]], spec, mode)?);
    Ok(PointPayments {
        z,
        gamma: [
            m_hat_monopoly(z[0], w[0], spec),
            m_hat_monopoly(z[1], w[1], spec),
        ],
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// Second-best drift and volatility payments on the grid.
pub fn sb_payments_monopoly(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<PaymentSchedule> {
    spec.validate()?;
    let coeffs = MonopolyCoefficients::new(spec)?;
    let times = grid.times();
    let revenue: Vec<[f64; 2]> = times
        .iter()
        .map(|t| principal_revenue(spec, *t))
        .collect::<Result<_>>()?;
    let points = solve_grid_points(grid.len(), |k, prev: Option<&PointPayments>| {
        solve_point(revenue[k], prev.map(|p| p.gamma), &coeffs, spec, mode)
    })?;
    Ok(PaymentSchedule {
        times,
        agents: 1,
        dim: 2,
        max_residual: points.iter().map(|p| p.residual).fold(0.0, f64::max),
        max_iterations: points.iter().map(|p| p.iterations).max().unwrap_or(0),
        drift: points.iter().map(|p| p.z.to_vec()).collect(),
        vol: points.iter().map(|p| p.gamma.to_vec()).collect(),
        revenue: revenue.iter().map(|w| w.to_vec()).collect(),
    })
}

/// Largest relative violation of the payment system over the grid: drift
/// payments against the closed form at the stored volatility payments, and
/// volatility payments against `m̂`.
pub fn payment_residual_monopoly(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<f64> {
    let coeffs = MonopolyCoefficients::new(spec)?;
    let mut worst: f64 = 0.0;
    for k in 0..schedule.len() {
        let w = [schedule.revenue[k][0], schedule.revenue[k][1]];
        let z = [schedule.z(k, 0, 0), schedule.z(k, 0, 1)];
        let gamma = [schedule.gamma(k, 0), schedule.gamma(k, 1)];
        let z_model = coeffs.payments(w, squared_vol(gamma, spec, mode)?);
        let g_model = [
            m_hat_monopoly(z[0], w[0], spec),
            m_hat_monopoly(z[1], w[1], spec),
        ];
        worst = worst
            .max(relative_residual(&z, &z_model))
            .max(relative_residual(&gamma, &g_model));
    }
    Ok(worst)
}

fn point_of(schedule: &PaymentSchedule, k: usize) -> ([f64; 2], [f64; 2]) {
    (
        [schedule.z(k, 0, 0), schedule.z(k, 0, 1)],
        [schedule.gamma(k, 0), schedule.gamma(k, 1)],
    )
}

pub fn sb_control_schedule_monopoly(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ControlSchedule> {
    let controls: Vec<Controls> = (0..schedule.len())
        .map(|k| {
            let (z, gamma) = point_of(schedule, k);
            sb_controls_monopoly(z, gamma, spec, mode)
        })
        .collect::<Result<_>>()?;
    Ok(ControlSchedule {
        tag: None,
        times: schedule.times.clone(),
        drift: controls.iter().map(|c| c.drift).collect(),
        vol: controls.iter().map(|c| c.vol).collect(),
    })
}

pub fn bu_control_schedule_monopoly(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ControlSchedule> {
    let times = grid.times();
    let controls: Vec<Controls> = times
        .iter()
        .map(|t| bu_controls_monopoly(*t, spec, mode))
        .collect::<Result<_>>()?;
    Ok(ControlSchedule {
        tag: None,
        drift: controls.iter().map(|c| c.drift).collect(),
        vol: controls.iter().map(|c| c.vol).collect(),
        times,
    })
}

pub(crate) fn grid_of(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 2 {
        return Err(crate::error::domain(
            "schedule needs at least two grid points",
        ));
    }
    TimeGrid::with_steps(*times.last().unwrap(), times.len() - 1)
}

/// Rebate prices and fixed part of the second-best contract.
pub fn contract_prices_monopoly(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
    derivative: DerivativeMode,
) -> Result<ContractPrices> {
    let grid = grid_of(&schedule.times)?;
    if grid.steps < 4 {
        return Err(crate::error::domain(
            "grid too coarse for pricing (needs at least 4 steps)",
        ));
    }
    let coeffs = MonopolyCoefficients::new(spec)?;
    let n = schedule.len();
    let zdot: Vec<[f64; 2]> = match derivative {
        DerivativeMode::CentralDifference => {
            let d0 = grid.derivative(&schedule.z_series(0, 0))?;
            let d1 = grid.derivative(&schedule.z_series(0, 1))?;
            d0.into_iter().zip(d1).map(|(a, b)| [a, b]).collect()
        }
        DerivativeMode::FrozenVolatility => (0..n)
            .map(|k| {
                let (_, gamma) = point_of(schedule, k);
                let c = coeffs.payment_map(squared_vol(gamma, spec, mode)?);
                let t = schedule.times[k];
                let wdot: Vec<f64> = (0..2)
                    .map(|j| {
                        w_principal_rate(
                            t,
                            spec.principal.externality[j],
                            spec.tech[j].depreciation,
                            spec.principal.horizon,
                        )
                    })
                    .collect();
                Ok([
                    c[0][0] * wdot[0] + c[0][1] * wdot[1],
                    c[1][0] * wdot[0] + c[1][1] * wdot[1],
                ])
            })
            .collect::<Result<_>>()?,
    };
    let x0 = spec.x0();
    let mut drift = Vec::with_capacity(n);
    let mut vol = Vec::with_capacity(n);
    let mut hamiltonian = Vec::with_capacity(n);
    for k in 0..n {
        let (z, gamma) = point_of(schedule, k);
        let w = &schedule.revenue[k];
        let mut pd = [0.0; 2];
        let mut pv = [0.0; 2];
        for j in 0..2 {
            pd[j] = -zdot[k][j] - spec.power_price + spec.tech[j].depreciation * z[j];
            pv[j] = -spec.principal.vol_penalty - coeffs.eta_principal * (w[j] - z[j]).powi(2);
        }
        drift.push(pd);
        vol.push(pv);
        let c = sb_controls_monopoly(z, gamma, spec, mode)?;
        hamiltonian.push(hamiltonian_agent(&x0, &z, &gamma, &c.drift, &c.vol, spec)?);
    }
    let last = point_of(schedule, n - 1).0;
    Ok(ContractPrices {
        times: schedule.times.clone(),
        energy_scale: spec.energy_scale,
        agents: vec![AgentPrices {
            drift,
            vol,
            fixed: spec.monopolist.reservation_ce - spec.money(grid.trapezoid(&hamiltonian)),
            terminal: last,
        }],
    })
}

/// Pointwise value-function coefficient and its aggregated value in money.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub integrand: Vec<f64>,
    pub value: f64,
}

/// Volatility part of the principal's pointwise objective on one channel.
pub(crate) fn vol_value(m: f64, j: usize, spec: &MarketSpec, mode: VolMode) -> f64 {
    let t = &spec.tech[j];
    match mode {
        VolMode::Uncontrolled => 0.5 * t.uncontrolled_vol.powi(2) * m,
        VolMode::Controlled => phi_star(m, t.vol_cost_scale, t.uncontrolled_vol),
    }
}

/// Principal's pointwise objective when paying `z` and facing revenue `w`.
pub fn principal_objective_monopoly(
    z: [f64; 2],
    w: [f64; 2],
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<f64> {
    let a = drift_response_monopoly(z, spec)?;
    let mut v = w[0] * a[0] + w[1] * a[1] - drift_cost_monopoly(&a, spec);
    for j in 0..2 {
        v += vol_value(m_hat_monopoly(z[j], w[j], spec), j, spec, mode);
    }
    Ok(v)
}

/// Monopolist's certainty equivalent without a contract.
pub fn bu_value_monopoly(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ValueFunction> {
    let eta = spec.effective(spec.monopolist.risk_aversion);
    let integrand: Vec<f64> = grid
        .times()
        .iter()
        .map(|t| {
            let w = agent_revenue(spec, *t)?;
            let c = bu_controls_monopoly(*t, spec, mode)?;
            let mut v = w[0] * c.drift[0] + w[1] * c.drift[1] - drift_cost_monopoly(&c.drift, spec);
            for j in 0..2 {
                let tech = &spec.tech[j];
                v -= 0.5 * eta * c.vol[j].powi(2) * w[j].powi(2);
                v -= vol_cost(c.vol[j], tech.vol_cost_scale, tech.uncontrolled_vol);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let w0 = agent_revenue(spec, 0.0)?;
    let x0 = spec.x0();
    let value = spec.money(w0[0] * x0[0] + w0[1] * x0[1] + grid.trapezoid(&integrand));
    Ok(ValueFunction { integrand, value })
}

/// Principal's certainty equivalent when offering the contract with payments `schedule`.
pub fn sb_principal_value_monopoly(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ValueFunction> {
    let grid = grid_of(&schedule.times)?;
    let integrand: Vec<f64> = (0..schedule.len())
        .map(|k| {
            let (z, _) = point_of(schedule, k);
            principal_objective_monopoly(
                z,
                [schedule.revenue[k][0], schedule.revenue[k][1]],
                spec,
                mode,
            )
        })
        .collect::<Result<_>>()?;
    let x0 = spec.x0();
    let w0 = &schedule.revenue[0];
    let value = -spec.monopolist.reservation_ce
        + spec.money(w0[0] * x0[0] + w0[1] * x0[1] + grid.trapezoid(&integrand));
    Ok(ValueFunction { integrand, value })
}
