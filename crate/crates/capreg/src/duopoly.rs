//! Two firms, firm `n` investing in technology `n` only.
//!
//! Payments are stacked firm-major: `drift[k] = [z¹₁, z¹₂, z²₁, z²₂]` where
//! `zⁿⱼ` pays firm `n` for changes of technology `j`; `vol[k] = [γ¹₁, γ²₂]`.

use crate::error::{Error, Result};
use crate::fixed_point::{damped_picard, relative_residual, solve_grid_points, PicardOptions};
use crate::grid::TimeGrid;
use crate::hamiltonian::{drift_cost_firm, hamiltonian_firm};
use crate::monopoly::{grid_of, vol_value, DerivativeMode, ValueFunction};
use crate::params::{MarketSpec, VolMode};
use crate::revenue::{agent_revenue, principal_revenue, w_principal_rate};
use crate::schedule::{AgentPrices, ContractPrices, ControlSchedule, Controls, PaymentSchedule};
use crate::volatility::{vol_best_response, vol_cost};

/// Coefficients of the competitive payment system, in rate units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuopolyCoefficients {
    /// `Q_C = q₁q₂ − ε²/4`.
    pub q_c: f64,
    pub q: [f64; 2],
    pub l: [f64; 2],
    pub congestion: f64,
    pub eta: [f64; 2],
    pub eta_principal: f64,
    /// `𝓔 = ε³/(4Q_C²)`.
    pub coupling: f64,
    /// `K_j`.
    pub offset: [f64; 2],
}

impl DuopolyCoefficients {
    pub fn new(spec: &MarketSpec) -> Result<Self> {
        let q_c = spec.q_competitive();
        if q_c.abs() < 1e-12 {
            return Err(Error::Degenerate("q₁q₂ − ε²/4 vanishes".into()));
        }
        let q = [spec.tech[0].quadratic_cost, spec.tech[1].quadratic_cost];
        let l = [spec.tech[0].linear_cost, spec.tech[1].linear_cost];
        let eps = spec.congestion;
        let coupling = eps.powi(3) / (4.0 * q_c * q_c);
        let mut offset = [0.0; 2];
        for j in 0..2 {
            let i = 1 - j;
            offset[j] = -l[j] * q[i] * eps * eps / (2.0 * q_c * q_c)
                + l[i] * (eps / (2.0 * q_c) + coupling);
        }
        Ok(DuopolyCoefficients {
            q_c,
            q,
            l,
            congestion: eps,
            eta: [
                spec.effective(spec.firms[0].risk_aversion),
                spec.effective(spec.firms[1].risk_aversion),
            ],
            eta_principal: spec.effective(spec.principal.risk_aversion),
            coupling,
            offset,
        })
    }

    /// Risk the principal shares with firm `i`: `η_P ηᵢ/(η_P + ηᵢ)`.
    pub fn shared_risk(&self, i: usize) -> f64 {
        self.eta_principal * self.eta[i] / (self.eta_principal + self.eta[i])
    }

    /// Fraction of the residual revenue on a foreign technology paid to firm `i`.
    pub fn cross_ratio(&self, i: usize) -> f64 {
        self.eta_principal / (self.eta_principal + self.eta[i])
    }

    pub fn zeta(&self, j: usize, b2: f64) -> f64 {
        let i = 1 - j;
        let base = (self.q[i] / self.q_c) * (1.0 - self.congestion.powi(2) / (2.0 * self.q_c));
        b2 * (self.eta[j] + self.shared_risk(i)) + base
    }

    pub fn f_own(&self, j: usize, b2: [f64; 2]) -> f64 {
        let i = 1 - j;
        b2[j] * self.shared_risk(i)
            + self.q[i] / self.q_c
            + (self.congestion / (2.0 * self.q_c)) * self.coupling / self.zeta(i, b2[i])
    }

    pub fn f_cross(&self, j: usize, b2: [f64; 2]) -> f64 {
        let i = 1 - j;
        self.congestion / (2.0 * self.q_c)
            + (self.coupling / self.zeta(i, b2[i]))
                * (b2[i] * self.shared_risk(j) + self.q[j] / self.q_c)
    }

    pub fn f_const(&self, j: usize, b2: [f64; 2]) -> f64 {
        let i = 1 - j;
        self.offset[j] - self.offset[i] * self.coupling / self.zeta(i, b2[i])
    }

    fn denominator(&self, b2: [f64; 2]) -> Result<f64> {
        let den = self.zeta(0, b2[0]) * self.zeta(1, b2[1]) - self.coupling.powi(2);
        if den.abs() < 1e-300 {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        Ok(den)
    }

    /// Own payments `zʲⱼ` at fixed squared volatilities.
    pub fn own_payments(&self, w: [f64; 2], b2: [f64; 2]) -> Result<[f64; 2]> {
        let den = self.denominator(b2)?;
        let mut z = [0.0; 2];
        for j in 0..2 {
            let i = 1 - j;
            z[j] = self.zeta(i, b2[i]) / den
                * (w[j] * self.f_own(j, b2) - w[i] * self.f_cross(j, b2) + self.f_const(j, b2));
        }
        Ok(z)
    }

    /// Time derivative of the own payments for revenue rate `wdot`, volatilities frozen.
    pub fn own_payment_rates(&self, wdot: [f64; 2], b2: [f64; 2]) -> Result<[f64; 2]> {
        let den = self.denominator(b2)?;
        let mut z = [0.0; 2];
        for j in 0..2 {
            let i = 1 - j;
            z[j] = self.zeta(i, b2[i]) / den
                * (wdot[j] * self.f_own(j, b2) - wdot[i] * self.f_cross(j, b2));
        }
        Ok(z)
    }

    /// All four payments: own payments and the cross payments
    /// `zⁱⱼ = η_P/(η_P+ηᵢ)(wⱼ − zʲⱼ)`.
    pub fn payments(&self, w: [f64; 2], b2: [f64; 2]) -> Result<[f64; 4]> {
        let own = self.own_payments(w, b2)?;
        Ok(self.complete(own, w))
    }

    fn complete(&self, own: [f64; 2], w: [f64; 2]) -> [f64; 4] {
        [
            own[0],
            self.cross_ratio(0) * (w[1] - own[1]),
            self.cross_ratio(1) * (w[0] - own[0]),
            own[1],
        ]
    }
}

/// Payment coefficients of the risk-neutral market, which do not depend on volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstBestCoefficients {
    pub zeta: [f64; 2],
    pub f_own: [f64; 2],
    pub f_cross: [f64; 2],
    pub f_const: [f64; 2],
}

impl FirstBestCoefficients {
    pub fn new(spec: &MarketSpec) -> Result<Self> {
        let q_c = spec.q_competitive();
        if q_c.abs() < 1e-12 {
            return Err(Error::Degenerate("q₁q₂ − ε²/4 vanishes".into()));
        }
        let q = [spec.tech[0].quadratic_cost, spec.tech[1].quadratic_cost];
        let l = [spec.tech[0].linear_cost, spec.tech[1].linear_cost];
        let eps = spec.congestion;
        let e = eps.powi(3) / (4.0 * q_c * q_c);
        let k = [
            -l[0] * q[1] * eps * eps / (2.0 * q_c * q_c) + l[1] * (eps / (2.0 * q_c) + e),
            -l[1] * q[0] * eps * eps / (2.0 * q_c * q_c) + l[0] * (eps / (2.0 * q_c) + e),
        ];
        let zeta = [
            (q[1] / q_c) * (1.0 - eps * eps / (2.0 * q_c)),
            (q[0] / q_c) * (1.0 - eps * eps / (2.0 * q_c)),
        ];
        let mut c = FirstBestCoefficients {
            zeta,
            f_own: [0.0; 2],
            f_cross: [0.0; 2],
            f_const: [0.0; 2],
        };
        for j in 0..2 {
            let i = 1 - j;
            c.f_own[j] = q[i] / q_c + (eps / (2.0 * q_c)) * e / zeta[i];
            c.f_cross[j] = eps / (2.0 * q_c) + (e / zeta[i]) * q[j] / q_c;
            c.f_const[j] = k[j] - k[i] * e / zeta[i];
        }
        let den = zeta[0] * zeta[1] - e * e;
        if den.abs() < 1e-300 {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        for j in 0..2 {
            let i = 1 - j;
            let s = zeta[i] / den;
            c.f_own[j] *= s;
            c.f_cross[j] *= s;
            c.f_const[j] *= s;
        }
        Ok(c)
    }

    /// Own payments; the scaling `ζᵢ/(ζ₁ζ₂ − 𝓔²)` is folded into the coefficients.
    pub fn own_payments(&self, w: [f64; 2]) -> [f64; 2] {
        [
            w[0] * self.f_own[0] - w[1] * self.f_cross[0] + self.f_const[0],
            w[1] * self.f_own[1] - w[0] * self.f_cross[1] + self.f_const[1],
        ]
    }

    pub fn own_payment_rates(&self, wdot: [f64; 2]) -> [f64; 2] {
        [
            wdot[0] * self.f_own[0] - wdot[1] * self.f_cross[0],
            wdot[1] * self.f_own[1] - wdot[0] * self.f_cross[1],
        ]
    }
}

/// `m̂ⱼ = −h − Σₙ ηₙ(zⁿⱼ)² − η_P(wⱼ − Σₙ zⁿⱼ)²`.
pub fn m_hat_competitive(z: &[f64; 4], w: [f64; 2], spec: &MarketSpec) -> [f64; 2] {
    let eta = [
        spec.effective(spec.firms[0].risk_aversion),
        spec.effective(spec.firms[1].risk_aversion),
    ];
    let eta_p = spec.effective(spec.principal.risk_aversion);
    let h = spec.principal.vol_penalty;
    let mut m = [0.0; 2];
    for j in 0..2 {
        let (z1, z2) = (z[j], z[2 + j]);
        m[j] = -h - eta[0] * z1 * z1 - eta[1] * z2 * z2 - eta_p * (w[j] - z1 - z2).powi(2);
    }
    m
}

/// Equilibrium investment for own payments `[z¹₁, z²₂]`.
pub fn drift_response_competitive(own: [f64; 2], spec: &MarketSpec) -> Result<[f64; 2]> {
    let q_c = spec.q_competitive();
    if q_c.abs() < 1e-12 {
        return Err(Error::Degenerate("q₁q₂ − ε²/4 vanishes".into()));
    }
    let half = 0.5 * spec.congestion;
    let m = [
        own[0] - spec.tech[0].linear_cost,
        own[1] - spec.tech[1].linear_cost,
    ];
    let q = [spec.tech[0].quadratic_cost, spec.tech[1].quadratic_cost];
    Ok([
        (q[1] * m[0] - half * m[1]) / q_c,
        (q[0] * m[1] - half * m[0]) / q_c,
    ])
}

/// Firm `n`'s best investment given the rival's investment `a_other`.
pub fn individual_response(n: usize, a_other: f64, own_payment: f64, spec: &MarketSpec) -> f64 {
    let t = &spec.tech[n];
    (own_payment - t.linear_cost - 0.5 * spec.congestion * a_other) / t.quadratic_cost
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

fn squared_vol(gamma: [f64; 2], spec: &MarketSpec, mode: VolMode) -> Result<[f64; 2]> {
    let (b, _) = vol_response(gamma, spec, mode)?;
    Ok([b[0] * b[0], b[1] * b[1]])
}

/// Equilibrium controls under own payments `[z¹₁, z²₂]` and volatility payments `[γ¹₁, γ²₂]`.
pub fn sb_controls_competitive(
    own: [f64; 2],
    gamma: [f64; 2],
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<Controls> {
    let drift = drift_response_competitive(own, spec)?;
    let (vol, interior) = vol_response(gamma, spec, mode)?;
    Ok(Controls {
        drift,
        vol,
        interior,
    })
}

/// Behaviour without a contract.
pub fn bu_controls_competitive(t: f64, spec: &MarketSpec, mode: VolMode) -> Result<Controls> {
    let w = agent_revenue(spec, t)?;
    let eta = [
        spec.effective(spec.firms[0].risk_aversion),
        spec.effective(spec.firms[1].risk_aversion),
    ];
    sb_controls_competitive(
        w,
        [-eta[0] * w[0] * w[0], -eta[1] * w[1] * w[1]],
        spec,
        mode,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PointPayments {
    z: [f64; 4],
    gamma: [f64; 2],
    iterations: usize,
    residual: f64,
}

fn solve_point(
    w: [f64; 2],
    start: Option<[f64; 2]>,
    coeffs: &DuopolyCoefficients,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<PointPayments> {
    let gamma0 = start.unwrap_or_else(|| {
        let r = [coeffs.cross_ratio(0), coeffs.cross_ratio(1)];
        let z = [
            0.5 * r[0] * w[0],
            0.5 * r[0] * w[1],
            0.5 * r[1] * w[0],
            0.5 * r[1] * w[1],
        ];
        m_hat_competitive(&z, w, spec)
    });
    let out = damped_picard(
        gamma0.to_vec(),
        |g| {
            let z = coeffs.payments(w, squared_vol([g[0], g[1]], spec, mode)?)?;
            Ok(m_hat_competitive(&z, w, spec).to_vec())
        },
        PicardOptions::default(),
    )?;
    let z = coeffs.payments(w, squared_vol([out.point[0], out.point[1]], spec, mode)?)?;
    Ok(PointPayments {
        z,
        gamma: m_hat_competitive(&z, w, spec),
        iterations: out.iterations,
        residual: out.residual,
    })
}

fn revenue_on(grid: &TimeGrid, spec: &MarketSpec) -> Result<Vec<[f64; 2]>> {
    grid.times()
        .iter()
        .map(|t| principal_revenue(spec, *t))
        .collect()
}

fn schedule_from(
    grid: &TimeGrid,
    revenue: Vec<[f64; 2]>,
    points: &[PointPayments],
) -> PaymentSchedule {
    PaymentSchedule {
        times: grid.times(),
        agents: 2,
        dim: 2,
        max_residual: points.iter().map(|p| p.residual).fold(0.0, f64::max),
        max_iterations: points.iter().map(|p| p.iterations).max().unwrap_or(0),
        drift: points.iter().map(|p| p.z.to_vec()).collect(),
        vol: points.iter().map(|p| p.gamma.to_vec()).collect(),
        revenue: revenue.iter().map(|w| w.to_vec()).collect(),
    }
}

/// Second-best payments on the grid.
pub fn sb_payments_competitive(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<PaymentSchedule> {
    spec.validate()?;
    let coeffs = DuopolyCoefficients::new(spec)?;
    let revenue = revenue_on(grid, spec)?;
    let points = solve_grid_points(grid.len(), |k, prev: Option<&PointPayments>| {
        solve_point(revenue[k], prev.map(|p| p.gamma), &coeffs, spec, mode)
    })?;
    Ok(schedule_from(grid, revenue, &points))
}

/// Payments for risk-neutral firms from the constant coefficients.
pub fn fb_payments_competitive(grid: &TimeGrid, spec: &MarketSpec) -> Result<PaymentSchedule> {
    spec.validate()?;
    let fb = FirstBestCoefficients::new(spec)?;
    let neutral = spec.risk_neutral_agents();
    let revenue = revenue_on(grid, spec)?;
    let points: Vec<PointPayments> = revenue
        .iter()
        .map(|w| {
            let own = fb.own_payments(*w);
            let z = [own[0], w[1] - own[1], w[0] - own[0], own[1]];
            PointPayments {
                z,
                gamma: m_hat_competitive(&z, *w, &neutral),
                iterations: 0,
                residual: 0.0,
            }
        })
        .collect();
    Ok(schedule_from(grid, revenue, &points))
}

fn own_of(schedule: &PaymentSchedule, k: usize) -> [f64; 2] {
    [schedule.z(k, 0, 0), schedule.z(k, 1, 1)]
}

fn all_of(schedule: &PaymentSchedule, k: usize) -> [f64; 4] {
    [
        schedule.z(k, 0, 0),
        schedule.z(k, 0, 1),
        schedule.z(k, 1, 0),
        schedule.z(k, 1, 1),
    ]
}

fn gamma_of(schedule: &PaymentSchedule, k: usize) -> [f64; 2] {
    [schedule.gamma(k, 0), schedule.gamma(k, 1)]
}

/// Largest relative violation of the competitive payment system over the grid.
pub fn payment_residual_competitive(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<f64> {
    let coeffs = DuopolyCoefficients::new(spec)?;
    let mut worst: f64 = 0.0;
    for k in 0..schedule.len() {
        let w = [schedule.revenue[k][0], schedule.revenue[k][1]];
        let z = all_of(schedule, k);
        let gamma = gamma_of(schedule, k);
        let z_model = coeffs.payments(w, squared_vol(gamma, spec, mode)?)?;
        let g_model = m_hat_competitive(&z, w, spec);
        worst = worst
            .max(relative_residual(&z, &z_model))
            .max(relative_residual(&gamma, &g_model));
    }
    Ok(worst)
}

pub fn sb_control_schedule_competitive(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ControlSchedule> {
    let controls: Vec<Controls> = (0..schedule.len())
        .map(|k| sb_controls_competitive(own_of(schedule, k), gamma_of(schedule, k), spec, mode))
        .collect::<Result<_>>()?;
    Ok(ControlSchedule {
        tag: None,
        times: schedule.times.clone(),
        drift: controls.iter().map(|c| c.drift).collect(),
        vol: controls.iter().map(|c| c.vol).collect(),
    })
}

pub fn bu_control_schedule_competitive(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ControlSchedule> {
    let times = grid.times();
    let controls: Vec<Controls> = times
        .iter()
        .map(|t| bu_controls_competitive(*t, spec, mode))
        .collect::<Result<_>>()?;
    Ok(ControlSchedule {
        tag: None,
        drift: controls.iter().map(|c| c.drift).collect(),
        vol: controls.iter().map(|c| c.vol).collect(),
        times,
    })
}

/// Rebate prices of both firms' contracts, including cross-technology prices
/// and the terminal bonus.
pub fn contract_prices_competitive(
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
    let coeffs = DuopolyCoefficients::new(spec)?;
    let n = schedule.len();
    // zdot[k] stacked like the schedule
    let zdot: Vec<[f64; 4]> = match derivative {
        DerivativeMode::CentralDifference => {
            let series: Vec<Vec<f64>> = (0..4)
                .map(|m| grid.derivative(&schedule.z_series(m / 2, m % 2)))
                .collect::<Result<_>>()?;
            (0..n)
                .map(|k| [series[0][k], series[1][k], series[2][k], series[3][k]])
                .collect()
        }
        DerivativeMode::FrozenVolatility => (0..n)
            .map(|k| {
                let t = schedule.times[k];
                let wdot = [0, 1].map(|j| {
                    w_principal_rate(
                        t,
                        spec.principal.externality[j],
                        spec.tech[j].depreciation,
                        spec.principal.horizon,
                    )
                });
                let own = coeffs
                    .own_payment_rates(wdot, squared_vol(gamma_of(schedule, k), spec, mode)?)?;
                Ok([
                    own[0],
                    coeffs.cross_ratio(0) * (wdot[1] - own[1]),
                    coeffs.cross_ratio(1) * (wdot[0] - own[0]),
                    own[1],
                ])
            })
            .collect::<Result<_>>()?,
    };
    let x0 = spec.x0();
    let h = spec.principal.vol_penalty;
    let mut agents = Vec::with_capacity(2);
    for firm in 0..2 {
        let other = 1 - firm;
        let mut drift = Vec::with_capacity(n);
        let mut vol = Vec::with_capacity(n);
        let mut hamiltonian = Vec::with_capacity(n);
        for k in 0..n {
            let z = all_of(schedule, k);
            let w = &schedule.revenue[k];
            let zn = [z[2 * firm], z[2 * firm + 1]];
            let mut pd = [0.0; 2];
            let mut pv = [0.0; 2];
            for j in 0..2 {
                pd[j] = -zdot[k][2 * firm + j] + spec.tech[j].depreciation * zn[j];
                if j == firm {
                    pd[j] -= spec.power_price;
                    pv[j] = -h
                        - coeffs.eta[other] * z[2 * other + firm].powi(2)
                        - coeffs.eta_principal * (w[firm] - z[firm] - z[2 + firm]).powi(2);
                } else {
                    pv[j] = coeffs.eta[firm] * zn[j].powi(2);
                }
            }
            drift.push(pd);
            vol.push(pv);
            let gamma = gamma_of(schedule, k);
            let c = sb_controls_competitive(own_of(schedule, k), gamma, spec, mode)?;
            hamiltonian.push(hamiltonian_firm(
                firm,
                &x0,
                &zn,
                gamma[firm],
                &c.drift,
                c.vol[firm],
                spec,
            )?);
        }
        let last = all_of(schedule, n - 1);
        agents.push(AgentPrices {
            drift,
            vol,
            fixed: spec.firms[firm].reservation_ce - spec.money(grid.trapezoid(&hamiltonian)),
            terminal: [last[2 * firm], last[2 * firm + 1]],
        });
    }
    Ok(ContractPrices {
        times: schedule.times.clone(),
        energy_scale: spec.energy_scale,
        agents,
    })
}

/// Principal's pointwise objective at the four payments `z`.
pub fn principal_objective_competitive(
    z: &[f64; 4],
    w: [f64; 2],
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<f64> {
    let a = drift_response_competitive([z[0], z[3]], spec)?;
    let mut v =
        w[0] * a[0] + w[1] * a[1] - drift_cost_firm(0, &a, spec) - drift_cost_firm(1, &a, spec);
    let m = m_hat_competitive(z, w, spec);
    for j in 0..2 {
        v += vol_value(m[j], j, spec, mode);
    }
    Ok(v)
}

/// Each firm's certainty equivalent without a contract.
pub fn bu_value_competitive(
    grid: &TimeGrid,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<[ValueFunction; 2]> {
    let times = grid.times();
    let x0 = spec.x0();
    let w0 = agent_revenue(spec, 0.0)?;
    let mut out = Vec::with_capacity(2);
    for n in 0..2 {
        let eta = spec.effective(spec.firms[n].risk_aversion);
        let tech = &spec.tech[n];
        let integrand: Vec<f64> = times
            .iter()
            .map(|t| {
                let w = agent_revenue(spec, *t)?;
                let c = bu_controls_competitive(*t, spec, mode)?;
                Ok(w[n] * c.drift[n]
                    - drift_cost_firm(n, &c.drift, spec)
                    - 0.5 * eta * c.vol[n].powi(2) * w[n].powi(2)
                    - vol_cost(c.vol[n], tech.vol_cost_scale, tech.uncontrolled_vol))
            })
            .collect::<Result<_>>()?;
        let value = spec.money(w0[n] * x0[n] + grid.trapezoid(&integrand));
        out.push(ValueFunction { integrand, value });
    }
    let second = out.pop().unwrap();
    let first = out.pop().unwrap();
    Ok([first, second])
}

/// Principal's certainty equivalent when paying `schedule` to both firms.
pub fn sb_principal_value_competitive(
    schedule: &PaymentSchedule,
    spec: &MarketSpec,
    mode: VolMode,
) -> Result<ValueFunction> {
    let grid = grid_of(&schedule.times)?;
    let integrand: Vec<f64> = (0..schedule.len())
        .map(|k| {
            principal_objective_competitive(
                &all_of(schedule, k),
                [schedule.revenue[k][0], schedule.revenue[k][1]],
                spec,
                mode,
            )
        })
        .collect::<Result<_>>()?;
    let x0 = spec.x0();
    let w0 = &schedule.revenue[0];
    let value = -spec.firms[0].reservation_ce - spec.firms[1].reservation_ce
        + spec.money(w0[0] * x0[0] + w0[1] * x0[1] + grid.trapezoid(&integrand));
    Ok(ValueFunction { integrand, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_scale() -> MarketSpec {
        let mut s = MarketSpec::reference();
        s.energy_scale = 1.0;
        s
    }

    #[test]
    fn bu_drift_examples() {
        let spec = unit_scale();
        assert_relative_eq!(spec.q_competitive(), 1.984375, max_relative = 1e-15);
        let c = bu_controls_competitive(0.0, &spec, VolMode::Controlled).unwrap();
        assert_relative_eq!(c.drift[0], 856.693, max_relative = 1e-5);
        assert_relative_eq!(c.drift[1], 346.457, max_relative = 1e-5);
    }

    #[test]
    fn bu_volatility_matches_monopoly() {
        let spec = MarketSpec::reference();
        for t in [0.0, 3.0, 9.9, 10.0] {
            let c = bu_controls_competitive(t, &spec, VolMode::Controlled).unwrap();
            let m = crate::monopoly::bu_controls_monopoly(t, &spec, VolMode::Controlled).unwrap();
            assert_eq!(c.vol, m.vol);
        }
    }

    #[test]
    fn equilibrium_is_mutual_best_response() {
        let spec = MarketSpec::reference();
        let own = [1500.0, 5200.0];
        let a = drift_response_competitive(own, &spec).unwrap();
        assert!((individual_response(0, a[1], own[0], &spec) - a[0]).abs() < 1e-12 * a[0].abs());
        assert!((individual_response(1, a[0], own[1], &spec) - a[1]).abs() < 1e-12 * a[1].abs());
        let zero = drift_response_competitive([100.0, 200.0], &spec).unwrap();
        assert!(zero[0].abs() < 1e-12 && zero[1].abs() < 1e-12);
        let mut no_cong = spec;
        no_cong.congestion = 0.0;
        let a = drift_response_competitive(own, &no_cong).unwrap();
        assert_relative_eq!(a[0], 1400.0, max_relative = 1e-14);
        assert_relative_eq!(a[1], 2500.0, max_relative = 1e-14);
    }

    #[test]
    fn own_payments_solve_linear_system() {
        // the own payments must make the principal's objective stationary in every payment
        let spec = MarketSpec::reference();
        let coeffs = DuopolyCoefficients::new(&spec).unwrap();
        let w = [-6.0, 4800.0];
        let b2 = [2500.0, 17000.0];
        let z = coeffs.payments(w, b2).unwrap();
        let model = crate::general::GeneralModel::duopoly(&spec, VolMode::Uncontrolled);
        let mut m = model.clone();
        m.channels[0].cap = b2[0].sqrt();
        m.channels[1].cap = b2[1].sqrt();
        let solver = crate::general::LqSolver::new(&m).unwrap();
        let wv = nalgebra::DVector::from_vec(w.to_vec());
        let zv = solver.assemble(&[0.0, 0.0], &wv).unwrap().solve().unwrap();
        for idx in 0..4 {
            assert!(
                (z[idx] - zv[idx]).abs() <= 1e-9 * (1.0 + zv[idx].abs()),
                "{idx}: {} vs {}",
                z[idx],
                zv[idx]
            );
        }
    }

    #[test]
    fn terminal_payments_do_not_vanish() {
        let spec = MarketSpec::reference();
        let grid = TimeGrid::weekly(10.0).unwrap();
        let s = sb_payments_competitive(&grid, &spec, VolMode::Controlled).unwrap();
        let last = s.len() - 1;
        let coeffs = DuopolyCoefficients::new(&spec).unwrap();
        let b2 = squared_vol(gamma_of(&s, last), &spec, VolMode::Controlled).unwrap();
        let den = coeffs.zeta(0, b2[0]) * coeffs.zeta(1, b2[1]) - coeffs.coupling.powi(2);
        for j in 0..2 {
            let i = 1 - j;
            let expected = coeffs.zeta(i, b2[i]) * coeffs.f_const(j, b2) / den;
            assert_relative_eq!(s.z(last, j, j), expected, max_relative = 1e-12);
            assert!(s.z(last, j, j).abs() > 1e-3);
            assert!(s.gamma(last, j) < -spec.principal.vol_penalty);
        }
        assert!(payment_residual_competitive(&s, &spec, VolMode::Controlled).unwrap() <= 1e-9);
    }

    #[test]
    fn cross_payments_follow_risk_sharing() {
        let spec = MarketSpec::reference();
        let grid = TimeGrid::with_steps(10.0, 52).unwrap();
        let s = sb_payments_competitive(&grid, &spec, VolMode::Controlled).unwrap();
        let c = DuopolyCoefficients::new(&spec).unwrap();
        for k in 0..s.len() {
            for j in 0..2 {
                let i = 1 - j;
                let expected = c.cross_ratio(i) * (s.revenue[k][j] - s.z(k, j, j));
                assert_eq!(s.z(k, i, j), expected);
            }
        }
    }

    #[test]
    fn risk_neutral_without_congestion() {
        let mut spec = MarketSpec::reference().risk_neutral_agents();
        spec.congestion = 0.0;
        let grid = TimeGrid::weekly(10.0).unwrap();
        let s = sb_payments_competitive(&grid, &spec, VolMode::Controlled).unwrap();
        for k in 0..s.len() {
            for j in 0..2 {
                let w = s.revenue[k][j];
                assert!((s.z(k, j, j) - w).abs() <= 1e-9 * (1.0 + w.abs()));
                assert!(s.z(k, 1 - j, j).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn first_best_paths_agree() {
        let spec = MarketSpec::reference();
        let neutral = spec.risk_neutral_agents();
        let grid = TimeGrid::weekly(10.0).unwrap();
        let fb = fb_payments_competitive(&grid, &spec).unwrap();
        for mode in [VolMode::Uncontrolled, VolMode::Controlled] {
            let sb = sb_payments_competitive(&grid, &neutral, mode).unwrap();
            for k in 0..grid.len() {
                for m in 0..4 {
                    let (a, b) = (fb.drift[k][m], sb.drift[k][m]);
                    assert!(
                        (a - b).abs() <= 1e-9 * (1.0 + b.abs()),
                        "k={k} m={m}: {a} vs {b}"
                    );
                }
                for j in 0..2 {
                    assert_relative_eq!(
                        fb.gamma(k, j),
                        -spec.principal.vol_penalty,
                        max_relative = 1e-12
                    );
                }
            }
        }
        let p = contract_prices_competitive(
            &fb,
            &neutral,
            VolMode::Controlled,
            DerivativeMode::FrozenVolatility,
        )
        .unwrap();
        let q = contract_prices_competitive(
            &fb,
            &neutral,
            VolMode::Controlled,
            DerivativeMode::CentralDifference,
        )
        .unwrap();
        for n in 0..2 {
            for k in 0..grid.len() {
                assert_relative_eq!(
                    p.agents[n].vol[k][n],
                    -spec.principal.vol_penalty,
                    max_relative = 1e-12
                );
                assert_eq!(p.agents[n].vol[k][1 - n], 0.0);
                for j in 0..2 {
                    assert!((p.agents[n].drift[k][j] - q.agents[n].drift[k][j]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cross_vol_prices_are_nonnegative() {
        let spec = MarketSpec::reference();
        let grid = TimeGrid::with_steps(10.0, 52).unwrap();
        let s = sb_payments_competitive(&grid, &spec, VolMode::Controlled).unwrap();
        let p = contract_prices_competitive(
            &s,
            &spec,
            VolMode::Controlled,
            DerivativeMode::CentralDifference,
        )
        .unwrap();
        for n in 0..2 {
            assert!(p.agents[n].vol.iter().all(|v| v[1 - n] >= 0.0));
        }
    }

    #[test]
    fn own_payments_differ_from_monopoly_without_congestion() {
        let mut spec = MarketSpec::reference();
        spec.congestion = 0.0;
        let grid = TimeGrid::with_steps(10.0, 52).unwrap();
        let c = sb_payments_competitive(&grid, &spec, VolMode::Controlled).unwrap();
        let m = crate::monopoly::sb_payments_monopoly(&grid, &spec, VolMode::Controlled).unwrap();
        for k in 0..grid.steps {
            for j in 0..2 {
                assert!((c.z(k, j, j) - m.z(k, 0, j)).abs() > 1e-6);
            }
        }
    }
}
