//! Marginal revenue of installed capacity: closed forms for constant
//! coefficients and a backward RK4 integrator for the vector ODE
//! `ẇ = source − A₀ᵀ w`, `w(T) = terminal`.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};
use crate::grid::TimeGrid;
use crate::params::MarketSpec;

/// Below this depreciation rate the `δ → 0` limit is used.
pub const DELTA_LIMIT: f64 = 1e-10;

/// Substeps of the RK4 integrator per grid step.
pub const ODE_REFINEMENT: usize = 10;

/// `(1 − e^{−δτ})/δ`, or `τ` in the limit.
fn discounted_horizon(tau: f64, delta: f64) -> f64 {
    if delta.abs() < DELTA_LIMIT {
        tau
    } else {
        -(-delta * tau).exp_m1() / delta
    }
}

fn check_time(t: f64, delta: f64, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !(0.0..=horizon).contains(&t) {
        return Err(domain(format!("t = {t} outside [0, {horizon}]")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(domain(format!("depreciation {delta} must be nonnegative")));
    }
    Ok(())
}

pub fn w_agent_closed_form(t: f64, price: f64, delta: f64, horizon: f64) -> Result<f64> {
    check_time(t, delta, horizon)?;
    Ok(price * discounted_horizon(horizon - t, delta))
}

pub fn w_principal_closed_form(t: f64, externality: f64, delta: f64, horizon: f64) -> Result<f64> {
    check_time(t, delta, horizon)?;
    Ok(externality * discounted_horizon(horizon - t, delta))
}

/// Time derivative of the principal's closed form, `−k e^{−δ(T−t)}`.
pub fn w_principal_rate(t: f64, externality: f64, delta: f64, horizon: f64) -> f64 {
    -externality * (-delta * (horizon - t)).exp()
}

/// Agent's marginal revenue for both technologies at `t`.
pub fn agent_revenue(spec: &MarketSpec, t: f64) -> Result<[f64; 2]> {
    let h = spec.principal.horizon;
    Ok([
        w_agent_closed_form(t, spec.power_price, spec.tech[0].depreciation, h)?,
        w_agent_closed_form(t, spec.power_price, spec.tech[1].depreciation, h)?,
    ])
}

/// Principal's marginal revenue for both technologies at `t`.
pub fn principal_revenue(spec: &MarketSpec, t: f64) -> Result<[f64; 2]> {
    let h = spec.principal.horizon;
    let k = spec.principal.externality;
    Ok([
        w_principal_closed_form(t, k[0], spec.tech[0].depreciation, h)?,
        w_principal_closed_form(t, k[1], spec.tech[1].depreciation, h)?,
    ])
}

/// Vector-valued marginal revenue on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRevenue {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

impl MarginalRevenue {
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }
}

pub fn solve_w_backward(
    a0: &DMatrix<f64>,
    source: &DVector<f64>,
    terminal: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<MarginalRevenue> {
    let d = source.len();
    if a0.nrows() != d || a0.ncols() != d || terminal.len() != d {
        return Err(domain("dimension mismatch in backward ODE"));
    }
    if a0
        .iter()
        .chain(source.iter())
        .chain(terminal.iter())
        .any(|v| !v.is_finite())
    {
        return Err(domain("non-finite input to backward ODE"));
    }
    let a0t = a0.transpose();
    let rhs = |w: &DVector<f64>| source - &a0t * w;
    // integrate in reversed time s = T − t: dw/ds = −rhs(w)
    let h = grid.dt() / ODE_REFINEMENT as f64;
    let mut w = terminal.clone();
    let mut values = vec![w.clone()];
    for _ in 0..grid.steps {
        for _ in 0..ODE_REFINEMENT {
            let k1 = -rhs(&w);
            let k2 = -rhs(&(&w + &k1 * (0.5 * h)));
            let k3 = -rhs(&(&w + &k2 * (0.5 * h)));
            let k4 = -rhs(&(&w + &k3 * h));
            w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        values.push(w.clone());
    }
    values.reverse();
    values[grid.steps] = terminal.clone();
    Ok(MarginalRevenue {
        times: grid.times(),
        values,
    })
}
