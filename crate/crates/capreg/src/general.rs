//! N agents controlling a d-dimensional linear state.
//!
//! Agent `n` chooses a drift control `αⁿ ∈ ℝᵈ` entering the state through
//! `Aₙ`, pays the quadratic cost `Lⁿ·α + ½αᵀQⁿα` over the stacked controls of
//! all agents, and steers the volatility of the channels it owns. The
//! principal pays drift payments `zⁿ` and volatility payments `γⁿ`; at each
//! time the optimal payments solve a linear system in `z` whose coefficients
//! depend on the volatilities induced by `γ`, which is closed by a damped
//! Picard iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::fixed_point::{damped_picard, relative_residual, solve_grid_points, PicardOptions};
use crate::grid::TimeGrid;
use crate::params::{MarketSpec, VolMode};
use crate::revenue::{solve_w_backward, MarginalRevenue};
use crate::schedule::PaymentSchedule;
use crate::volatility::{phi_star, phi_star_argmax, vol_best_response};

/// Largest condition number accepted for the payment system.
const MAX_CONDITION: f64 = 1e13;

/// Volatility channel `j`: cost scale `Φ`, cap `σ` and the agent steering it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolChannel {
    pub scale: f64,
    pub cap: f64,
    pub owner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralModel {
    pub dim: usize,
    pub agents: usize,
    pub a0: DMatrix<f64>,
    /// `Aₙ`, one per agent.
    pub control: Vec<DMatrix<f64>>,
    /// `c⁰ₙ`: linear running cost in the state, one per agent.
    pub base_cost: Vec<DVector<f64>>,
    /// `Lⁿ` over stacked controls (length `d·N`).
    pub linear_cost: Vec<DVector<f64>>,
    /// `Qⁿ` over stacked controls (`dN × dN`, symmetric).
    pub quadratic_cost: Vec<DMatrix<f64>>,
    pub channels: Vec<VolChannel>,
    pub vol_mode: VolMode,
    /// Effective (rate-unit) risk aversions.
    pub risk_aversion: Vec<f64>,
    pub principal_risk_aversion: f64,
    /// `λ`: principal's running weight on the state.
    pub running_weight: DVector<f64>,
    /// `Λ`: principal's terminal weight on the state.
    pub terminal_bonus: DVector<f64>,
    /// `g`: principal's weight on quadratic variation.
    pub qv_weight: DMatrix<f64>,
    pub horizon: f64,
}

impl GeneralModel {
    /// One agent owning both technologies.
    pub fn monopoly(spec: &MarketSpec, vol_mode: VolMode) -> Self {
        let t = &spec.tech;
        let p = spec.power_price;
        let k = spec.principal.externality;
        let h = spec.principal.vol_penalty;
        GeneralModel {
            dim: 2,
            agents: 1,
            a0: DMatrix::from_diagonal(&DVector::from_vec(vec![
                -t[0].depreciation,
                -t[1].depreciation,
            ])),
            control: vec![DMatrix::identity(2, 2)],
            base_cost: vec![DVector::from_vec(vec![-p, -p])],
            linear_cost: vec![DVector::from_vec(vec![t[0].linear_cost, t[1].linear_cost])],
            quadratic_cost: vec![DMatrix::from_row_slice(
                2,
                2,
                &[
                    t[0].quadratic_cost,
                    spec.congestion,
                    spec.congestion,
                    t[1].quadratic_cost,
                ],
            )],
            channels: channels(spec, [0, 0]),
            vol_mode,
            risk_aversion: vec![spec.effective(spec.monopolist.risk_aversion)],
            principal_risk_aversion: spec.effective(spec.principal.risk_aversion),
            running_weight: DVector::from_vec(vec![k[0] - p, k[1] - p]),
            terminal_bonus: DVector::zeros(2),
            qv_weight: DMatrix::from_element(2, 2, -h),
            horizon: spec.principal.horizon,
        }
    }

    /// Two firms, firm `n` investing only in technology `n`. Each firm's
    /// control vector has an unused component priced at a unit quadratic cost
    /// so that every own-cost block stays positive definite.
    pub fn duopoly(spec: &MarketSpec, vol_mode: VolMode) -> Self {
        let t = &spec.tech;
        let p = spec.power_price;
        let k = spec.principal.externality;
        let h = spec.principal.vol_penalty;
        let half_eps = 0.5 * spec.congestion;
        // stacked controls: (a¹₁, a¹₂, a²₁, a²₂); a¹₂ and a²₁ never move the state
        let mut q1 = DMatrix::zeros(4, 4);
        q1[(0, 0)] = t[0].quadratic_cost;
        q1[(1, 1)] = 1.0;
        q1[(0, 3)] = half_eps;
        q1[(3, 0)] = half_eps;
        let mut q2 = DMatrix::zeros(4, 4);
        q2[(3, 3)] = t[1].quadratic_cost;
        q2[(2, 2)] = 1.0;
        q2[(0, 3)] = half_eps;
        q2[(3, 0)] = half_eps;
        GeneralModel {
            dim: 2,
            agents: 2,
            a0: DMatrix::from_diagonal(&DVector::from_vec(vec![
                -t[0].depreciation,
                -t[1].depreciation,
            ])),
            control: vec![
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
                DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
            ],
            base_cost: vec![
                DVector::from_vec(vec![-p, 0.0]),
                DVector::from_vec(vec![0.0, -p]),
            ],
            linear_cost: vec![
                DVector::from_vec(vec![t[0].linear_cost, 0.0, 0.0, 0.0]),
                DVector::from_vec(vec![0.0, 0.0, 0.0, t[1].linear_cost]),
            ],
            quadratic_cost: vec![q1, q2],
            channels: channels(spec, [0, 1]),
            vol_mode,
            risk_aversion: vec![
                spec.effective(spec.firms[0].risk_aversion),
                spec.effective(spec.firms[1].risk_aversion),
            ],
            principal_risk_aversion: spec.effective(spec.principal.risk_aversion),
            running_weight: DVector::from_vec(vec![k[0] - p, k[1] - p]),
            terminal_bonus: DVector::zeros(2),
            qv_weight: DMatrix::from_element(2, 2, -h),
            horizon: spec.principal.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n) = (self.dim, self.agents);
        let dn = d * n;
        if d == 0 || n == 0 {
            return Err(domain("model needs at least one agent and one state"));
        }
        let square = |m: &DMatrix<f64>, size: usize| m.nrows() == size && m.ncols() == size;
        if !square(&self.a0, d)
            || self.control.len() != n
            || self.control.iter().any(|m| !square(m, d))
            || self.base_cost.len() != n
            || self.base_cost.iter().any(|v| v.len() != d)
            || self.linear_cost.len() != n
            || self.linear_cost.iter().any(|v| v.len() != dn)
            || self.quadratic_cost.len() != n
            || self.quadratic_cost.iter().any(|m| !square(m, dn))
            || self.channels.len() != d
            || self.risk_aversion.len() != n
            || self.running_weight.len() != d
            || self.terminal_bonus.len() != d
            || !square(&self.qv_weight, d)
        {
            return Err(domain("inconsistent dimensions in general model"));
        }
        for (i, q) in self.quadratic_cost.iter().enumerate() {
            if (q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
                return Err(domain(format!(
                    "quadratic cost of agent {i} is not symmetric"
                )));
            }
            let own = q.view((i * d, i * d), (d, d)).into_owned();
            if own.cholesky().is_none() {
                return Err(Error::Degenerate(format!(
                    "own cost block of agent {i} is not positive definite"
                )));
            }
        }
        if (&self.qv_weight - self.qv_weight.transpose()).amax()
            > 1e-12 * (1.0 + self.qv_weight.amax())
        {
            return Err(domain("quadratic-variation weight is not symmetric"));
        }
        for c in &self.channels {
            if c.owner >= n || !(c.scale > 0.0) || !(c.cap > 0.0) {
                return Err(domain("invalid volatility channel"));
            }
        }
        if self.risk_aversion.iter().any(|e| !(*e >= 0.0)) || !(self.principal_risk_aversion > 0.0)
        {
            return Err(domain(
                "risk aversions must be nonnegative (principal positive)",
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(domain("horizon must be positive"));
        }
        Ok(())
    }

    /// `𝒬`: block `(n, j)` is `Qⁿ_{nj}`.
    pub fn reaction_matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        let dn = d * self.agents;
        let mut m = DMatrix::zeros(dn, dn);
        for n in 0..self.agents {
            let rows = self.quadratic_cost[n].rows(n * d, d);
            m.rows_mut(n * d, d).copy_from(&rows);
        }
        m
    }

    /// `blockdiag(Aₙᵀ)`.
    fn control_blockdiag(&self) -> DMatrix<f64> {
        let d = self.dim;
        let dn = d * self.agents;
        let mut m = DMatrix::zeros(dn, dn);
        for n in 0..self.agents {
            m.view_mut((n * d, n * d), (d, d))
                .copy_from(&self.control[n].transpose());
        }
        m
    }

    /// Own linear costs `Lⁿₙ`, stacked.
    fn own_linear(&self) -> DVector<f64> {
        let d = self.dim;
        let mut v = DVector::zeros(d * self.agents);
        for n in 0..self.agents {
            v.rows_mut(n * d, d)
                .copy_from(&self.linear_cost[n].rows(n * d, d));
        }
        v
    }

    pub fn principal_revenue(&self, grid: &TimeGrid) -> Result<MarginalRevenue> {
        let total_base: DVector<f64> = self
            .base_cost
            .iter()
            .fold(DVector::zeros(self.dim), |acc, c| acc + c);
        let source = -(&self.running_weight - total_base);
        solve_w_backward(&self.a0, &source, &self.terminal_bonus, grid)
    }

    pub fn agent_revenue(&self, n: usize, grid: &TimeGrid) -> Result<MarginalRevenue> {
        solve_w_backward(
            &self.a0,
            &self.base_cost[n],
            &DVector::zeros(self.dim),
            grid,
        )
    }
}

fn channels(spec: &MarketSpec, owners: [usize; 2]) -> Vec<VolChannel> {
    (0..2)
        .map(|j| VolChannel {
            scale: spec.tech[j].vol_cost_scale,
            cap: spec.tech[j].uncontrolled_vol,
            owner: owners[j],
        })
        .collect()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// The linear system `𝒵ᶻ z = 𝒵ʷ wᴾ − 𝒵ᶜ` at fixed volatilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSystem {
    pub dim: usize,
    pub agents: usize,
    pub matrix: DMatrix<f64>,
    /// `𝒵ʷ` (`dN × d`).
    pub revenue_weight: DMatrix<f64>,
    /// `𝒵ᶜ`.
    pub constant: DVector<f64>,
    pub rhs: DVector<f64>,
    /// Squared volatilities per channel used in the assembly.
    pub variance: Vec<f64>,
}

impl ZSystem {
    /// Diagonal block `ζₙ`.
    pub fn zeta(&self, n: usize) -> DMatrix<f64> {
        let d = self.dim;
        self.matrix.view((n * d, n * d), (d, d)).into_owned()
    }

    pub fn condition(&self) -> f64 {
        condition_number(&self.matrix)
    }

    pub fn solve(&self) -> Result<DVector<f64>> {
        let cond = self.condition();
        if !(cond < MAX_CONDITION) {
            return Err(Error::SingularSystem { condition: cond });
        }
        self.matrix
            .clone()
            .lu()
            .solve(&self.rhs)
            .ok_or(Error::SingularSystem { condition: cond })
    }
}

/// Payments, volatility payments and controls at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    pub z: DVector<f64>,
    /// Volatility payment per channel, paid to the channel owner.
    pub gamma: Vec<f64>,
    pub variance: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// A validated model with the reaction system factorised.
#[derive(Debug, Clone)]
pub struct LqSolver<'a> {
    pub model: &'a GeneralModel,
    reaction: DMatrix<f64>,
    reaction_inv: DMatrix<f64>,
    /// `G = 𝒬⁻¹ blockdiag(Aₙᵀ)`: sensitivity of equilibrium controls to payments.
    gain: DMatrix<f64>,
    /// `S = Σₙ Qⁿ`.
    joint_quadratic: DMatrix<f64>,
    joint_linear: DVector<f64>,
    own_linear: DVector<f64>,
    /// Stack of `Aₙᵀ` (`dN × d`).
    control_stack: DMatrix<f64>,
    pub condition: f64,
    pub options: PicardOptions,
}

impl<'a> LqSolver<'a> {
    pub fn new(model: &'a GeneralModel) -> Result<Self> {
        model.validate()?;
        let d = model.dim;
        let dn = d * model.agents;
        let reaction = model.reaction_matrix();
        let condition = condition_number(&reaction);
        if !(condition < MAX_CONDITION) {
            return Err(Error::Degenerate(format!(
                "reaction matrix is singular (condition number {condition:e})"
            )));
        }
        let reaction_inv = reaction
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("reaction matrix is singular".into()))?;
        let gain = &reaction_inv * model.control_blockdiag();
        let joint_quadratic = model
            .quadratic_cost
            .iter()
            .fold(DMatrix::zeros(dn, dn), |acc, q| acc + q);
        let joint_linear = model
            .linear_cost
            .iter()
            .fold(DVector::zeros(dn), |acc, l| acc + l);
        let mut control_stack = DMatrix::zeros(dn, d);
        for n in 0..model.agents {
            control_stack
                .rows_mut(n * d, d)
                .copy_from(&model.control[n].transpose());
        }
        Ok(LqSolver {
            model,
            reaction,
            reaction_inv,
            gain,
            joint_quadratic,
            joint_linear,
            own_linear: model.own_linear(),
            control_stack,
            condition,
            options: PicardOptions::default(),
        })
    }

    /// Equilibrium controls `α = 𝒬⁻¹(𝒜z − L̄)` for stacked shadow prices `z`.
    pub fn nash(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.reaction_inv * (self.model.control_blockdiag() * z - &self.own_linear)
    }

    /// Largest violation of the agents' individual first-order conditions
    /// `Aₙᵀzⁿ = Lⁿₙ + Σⱼ Qⁿ_{nj} αʲ`.
    pub fn foc_residual(&self, z: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
        let d = self.model.dim;
        let mut worst: f64 = 0.0;
        for n in 0..self.model.agents {
            let q = &self.model.quadratic_cost[n];
            let lhs = self.model.control[n].transpose() * z.rows(n * d, d);
            let rhs = self.model.linear_cost[n].rows(n * d, d) + q.rows(n * d, d) * alpha;
            worst = worst.max((lhs - rhs).amax());
        }
        worst
    }

    /// Squared volatility per channel induced by the payments `gamma`.
    pub fn variance(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        self.model
            .channels
            .iter()
            .zip(gamma)
            .map(|(c, g)| match self.model.vol_mode {
                VolMode::Uncontrolled => Ok(c.cap * c.cap),
                VolMode::Controlled => vol_best_response(*g, c.scale, c.cap).map(|r| r.b * r.b),
            })
            .collect()
    }

    /// `M̂ = g − Σₙ ηₙ zⁿzⁿᵀ − η_P (w − Σₙzⁿ)(w − Σₙzⁿ)ᵀ`.
    pub fn m_hat(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        let d = self.model.dim;
        let mut m = self.model.qv_weight.clone();
        let mut gap = w.clone();
        for n in 0..self.model.agents {
            let zn = z.rows(n * d, d);
            m -= self.model.risk_aversion[n] * (&zn * zn.transpose());
            gap -= zn;
        }
        m -= self.model.principal_risk_aversion * (&gap * gap.transpose());
        m
    }

    pub fn m_hat_diag(&self, z: &DVector<f64>, w: &DVector<f64>) -> Vec<f64> {
        self.m_hat(z, w).diagonal().iter().copied().collect()
    }

    pub fn assemble(&self, gamma: &[f64], w: &DVector<f64>) -> Result<ZSystem> {
        let m = self.model;
        let d = m.dim;
        let n = m.agents;
        if gamma.len() != d || w.len() != d {
            return Err(domain("payment vector has wrong dimension"));
        }
        let variance = self.variance(gamma)?;
        let sigma_bar = DMatrix::from_diagonal(&DVector::from_vec(variance.clone()));
        let g = &self.gain;
        let gt = g.transpose();
        let mut matrix = &gt * &self.joint_quadratic * g;
        let mut revenue_weight = &gt * &self.control_stack;
        for a in 0..n {
            for b in 0..n {
                let mut block = m.principal_risk_aversion * &sigma_bar;
                if a == b {
                    block += m.risk_aversion[a] * &sigma_bar;
                }
                let mut view = matrix.view_mut((a * d, b * d), (d, d));
                view += block;
            }
            let mut view = revenue_weight.view_mut((a * d, 0), (d, d));
            view += m.principal_risk_aversion * &sigma_bar;
        }
        let constant = &gt
            * (&self.joint_linear - &self.joint_quadratic * &self.reaction_inv * &self.own_linear);
        let rhs = &revenue_weight * w - &constant;
        Ok(ZSystem {
            dim: d,
            agents: n,
            matrix,
            revenue_weight,
            constant,
            rhs,
            variance,
        })
    }

    /// Starting volatility payments from the risk-sharing guess
    /// `zⁿ = η_P/(η_P+ηₙ)·w`, split evenly across agents.
    pub fn initial_gamma(&self, w: &DVector<f64>) -> Vec<f64> {
        let m = self.model;
        let d = m.dim;
        let mut z = DVector::zeros(d * m.agents);
        for n in 0..m.agents {
            let ratio =
                m.principal_risk_aversion / (m.principal_risk_aversion + m.risk_aversion[n]);
            z.rows_mut(n * d, d)
                .copy_from(&(w * (ratio / m.agents as f64)));
        }
        self.m_hat_diag(&z, w)
    }

    pub fn solve_point(&self, w: &DVector<f64>, start: Option<&[f64]>) -> Result<PointSolution> {
        let gamma0 = match start {
            Some(g) => g.to_vec(),
            None => self.initial_gamma(w),
        };
        let out = damped_picard(
            gamma0,
            |gamma| {
                let z = self.assemble(gamma, w)?.solve()?;
                Ok(self.m_hat_diag(&z, w))
            },
            self.options,
        )?;
        let system = self.assemble(&out.point, w)?;
        let z = system.solve()?;
        Ok(PointSolution {
            gamma: self.m_hat_diag(&z, w),
            z,
            variance: system.variance,
            iterations: out.iterations,
            residual: out.residual,
        })
    }

    /// Principal's pointwise objective at payments `z`: value of induced drift
    /// minus the agents' costs, plus the best volatility trade-off given `M̂(z)`.
    pub fn reduced_objective(&self, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let m = self.model;
        let d = m.dim;
        let alpha = self.nash(z);
        let mut value = 0.0;
        for n in 0..m.agents {
            let an = alpha.rows(n * d, d);
            value += w.dot(&(&m.control[n] * an));
            value -=
                m.linear_cost[n].dot(&alpha) + 0.5 * alpha.dot(&(&m.quadratic_cost[n] * &alpha));
        }
        let mhat = self.m_hat_diag(z, w);
        for (c, mj) in m.channels.iter().zip(&mhat) {
            value += match m.vol_mode {
                VolMode::Uncontrolled => 0.5 * c.cap * c.cap * mj,
                VolMode::Controlled => phi_star(*mj, c.scale, c.cap),
            };
        }
        value
    }

    /// Relative gradient of the reduced objective at `z`, assembled term by
    /// term from the agents' cost gradients and the envelope of the volatility
    /// trade-off (without the payment-system matrices).
    pub fn stationarity_residual(&self, z: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        let m = self.model;
        let d = m.dim;
        let dn = d * m.agents;
        let alpha = self.nash(z);
        let lu = self.reaction.clone().lu();
        let mhat = self.m_hat_diag(z, w);
        let mut total = DVector::zeros(d);
        for n in 0..m.agents {
            total += z.rows(n * d, d);
        }
        let mut worst: f64 = 0.0;
        for idx in 0..dn {
            let (n, j) = (idx / d, idx % d);
            // response of all controls to a unit payment zⁿⱼ
            let mut push = DVector::zeros(dn);
            push.rows_mut(n * d, d)
                .copy_from(&m.control[n].row(j).transpose());
            let dalpha = lu
                .solve(&push)
                .ok_or_else(|| Error::Degenerate("reaction matrix is singular".into()))?;
            let mut terms = Vec::new();
            for l in 0..m.agents {
                let dal = dalpha.rows(l * d, d);
                terms.push(w.dot(&(&m.control[l] * dal)));
                let grad = &m.linear_cost[l] + &m.quadratic_cost[l] * &alpha;
                terms.push(-grad.dot(&dalpha));
            }
            let c = &m.channels[j];
            let big_b = match m.vol_mode {
                VolMode::Uncontrolled => 0.5 * c.cap * c.cap,
                VolMode::Controlled => phi_star_argmax(mhat[j], c.scale, c.cap),
            };
            terms.push(-2.0 * big_b * m.risk_aversion[n] * z[idx]);
            terms.push(2.0 * big_b * m.principal_risk_aversion * (w[j] - total[j]));
            let sum: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            worst = worst.max(sum.abs() / (1.0 + scale));
        }
        Ok(worst)
    }

    /// Volatility payments in the fixed point must reproduce `M̂(z)` on every channel.
    pub fn fixed_point_residual(&self, solution: &PointSolution, w: &DVector<f64>) -> Result<f64> {
        let z = self.assemble(&solution.gamma, w)?.solve()?;
        let zres = relative_residual(solution.z.as_slice(), z.as_slice());
        let gres = relative_residual(&solution.gamma, &self.m_hat_diag(&solution.z, w));
        Ok(zres.max(gres))
    }

    /// Equilibrium drift and volatility at given payments.
    pub fn controls(&self, z: &DVector<f64>, gamma: &[f64]) -> Result<(DVector<f64>, Vec<f64>)> {
        let alpha = self.nash(z);
        let b = self.variance(gamma)?.into_iter().map(f64::sqrt).collect();
        Ok((alpha, b))
    }

    /// Behaviour without a contract: shadow prices are the agents' own marginal
    /// revenues `w_n^A` and each channel carries the owner's risk premium.
    pub fn bu_controls(&self, agent_revenue: &[DVector<f64>]) -> Result<(DVector<f64>, Vec<f64>)> {
        let m = self.model;
        let d = m.dim;
        let mut z = DVector::zeros(d * m.agents);
        for (n, w) in agent_revenue.iter().enumerate() {
            z.rows_mut(n * d, d).copy_from(w);
        }
        let gamma: Vec<f64> = m
            .channels
            .iter()
            .enumerate()
            .map(|(j, c)| -m.risk_aversion[c.owner] * agent_revenue[c.owner][j].powi(2))
            .collect();
        self.controls(&z, &gamma)
    }

    pub fn sb_fixed_point(&self, grid: &TimeGrid) -> Result<PaymentSchedule> {
        let revenue = self.model.principal_revenue(grid)?;
        let points = solve_grid_points(grid.len(), |k, prev: Option<&PointSolution>| {
            self.solve_point(&revenue.values[k], prev.map(|p| p.gamma.as_slice()))
        })?;
        Ok(PaymentSchedule {
            times: grid.times(),
            agents: self.model.agents,
            dim: self.model.dim,
            max_residual: points.iter().map(|p| p.residual).fold(0.0, f64::max),
            max_iterations: points.iter().map(|p| p.iterations).max().unwrap_or(0),
            drift: points
                .iter()
                .map(|p| p.z.iter().copied().collect())
                .collect(),
            vol: points.iter().map(|p| p.gamma.clone()).collect(),
            revenue: revenue
                .values
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
        })
    }
}

/// Equilibrium drift controls per agent for per-agent shadow prices.
pub fn nash_drift_equilibrium(
    shadow: &[DVector<f64>],
    model: &GeneralModel,
) -> Result<Vec<DVector<f64>>> {
    let solver = LqSolver::new(model)?;
    let d = model.dim;
    if shadow.len() != model.agents || shadow.iter().any(|s| s.len() != d) {
        return Err(domain("shadow prices have wrong shape"));
    }
    let mut z = DVector::zeros(d * model.agents);
    for (n, s) in shadow.iter().enumerate() {
        z.rows_mut(n * d, d).copy_from(s);
    }
    let alpha = solver.nash(&z);
    Ok((0..model.agents)
        .map(|n| alpha.rows(n * d, d).into_owned())
        .collect())
}

pub fn assemble_z_system(gamma: &[f64], model: &GeneralModel, w: &DVector<f64>) -> Result<ZSystem> {
    LqSolver::new(model)?.assemble(gamma, w)
}

pub fn sb_fixed_point_general(model: &GeneralModel, grid: &TimeGrid) -> Result<PaymentSchedule> {
    LqSolver::new(model)?.sb_fixed_point(grid)
}
