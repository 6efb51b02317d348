//! Agents' Hamiltonians in rate units, evaluated at arbitrary controls.

use crate::error::{domain, Result};
use crate::params::MarketSpec;
use crate::volatility::vol_cost;

/// `l·a + ½q₁a₁² + ½q₂a₂² + εa₁a₂`: investment cost of the monopolist.
pub fn drift_cost_monopoly(a: &[f64; 2], spec: &MarketSpec) -> f64 {
    let t = &spec.tech;
    t[0].linear_cost * a[0]
        + t[1].linear_cost * a[1]
        + 0.5 * t[0].quadratic_cost * a[0] * a[0]
        + 0.5 * t[1].quadratic_cost * a[1] * a[1]
        + spec.congestion * a[0] * a[1]
}

/// Investment cost of firm `n`, which carries half of the congestion term.
pub fn drift_cost_firm(n: usize, a: &[f64; 2], spec: &MarketSpec) -> f64 {
    let t = &spec.tech[n];
    t.linear_cost * a[n]
        + 0.5 * t.quadratic_cost * a[n] * a[n]
        + 0.5 * spec.congestion * a[0] * a[1]
}

fn check_vol(j: usize, b: f64, spec: &MarketSpec) -> Result<()> {
    let t = &spec.tech[j];
    let slack = 1e-12 * t.uncontrolled_vol;
    if b < t.vol_floor() - slack || b > t.uncontrolled_vol + slack || b.is_nan() {
        return Err(domain(format!(
            "volatility {b} of technology {j} outside [{}, {}]",
            t.vol_floor(),
            t.uncontrolled_vol
        )));
    }
    Ok(())
}

/// Monopolist's Hamiltonian: revenue `p·x`, drift payments net of depreciation,
/// volatility payments, minus effort costs.
pub fn hamiltonian_agent(
    x: &[f64; 2],
    z: &[f64; 2],
    gamma: &[f64; 2],
    a: &[f64; 2],
    b: &[f64; 2],
    spec: &MarketSpec,
) -> Result<f64> {
    let mut h = -drift_cost_monopoly(a, spec);
    for j in 0..2 {
        check_vol(j, b[j], spec)?;
        let t = &spec.tech[j];
        h += (spec.power_price - t.depreciation * z[j]) * x[j] + z[j] * a[j];
        h += 0.5 * b[j] * b[j] * gamma[j] - vol_cost(b[j], t.vol_cost_scale, t.uncontrolled_vol);
    }
    Ok(h)
}

/// Hamiltonian of firm `n`, which earns `p·xₙ`, steers its own volatility and
/// receives drift payments `z` on both technologies.
pub fn hamiltonian_firm(
    n: usize,
    x: &[f64; 2],
    z: &[f64; 2],
    gamma_own: f64,
    a: &[f64; 2],
    b_own: f64,
    spec: &MarketSpec,
) -> Result<f64> {
    check_vol(n, b_own, spec)?;
    let t = &spec.tech[n];
    let mut h = spec.power_price * x[n] - drift_cost_firm(n, a, spec);
    h += 0.5 * b_own * b_own * gamma_own - vol_cost(b_own, t.vol_cost_scale, t.uncontrolled_vol);
    for j in 0..2 {
        h += (a[j] - spec.tech[j].depreciation * x[j]) * z[j];
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MarketSpec;

    #[test]
    fn zero_effort_baseline() {
        let spec = MarketSpec::reference();
        let sigma = spec.sigma();
        let gamma = [-3.0, 7.0];
        let h = hamiltonian_agent(&[0.0; 2], &[0.0; 2], &gamma, &[0.0; 2], &sigma, &spec).unwrap();
        let expected = 0.5 * (sigma[0].powi(2) * gamma[0] + sigma[1].powi(2) * gamma[1]);
        assert!((h - expected).abs() < 1e-9);
    }

    #[test]
    fn state_term() {
        let spec = MarketSpec::reference();
        let h = hamiltonian_agent(
            &spec.x0(),
            &[0.0; 2],
            &[0.0; 2],
            &[0.0; 2],
            &spec.sigma(),
            &spec,
        )
        .unwrap();
        assert_eq!(h, 100.0 * 5000.0);
        assert_eq!(spec.money(h), 100.0 * 5000.0 * 168.0);
    }

    #[test]
    fn rejects_inadmissible_volatility() {
        let spec = MarketSpec::reference();
        let x = spec.x0();
        assert!(
            hamiltonian_agent(&x, &[0.0; 2], &[0.0; 2], &[0.0; 2], &[0.0, 750.0], &spec).is_err()
        );
        assert!(
            hamiltonian_agent(&x, &[0.0; 2], &[0.0; 2], &[0.0; 2], &[300.0, 751.0], &spec).is_err()
        );
        assert!(hamiltonian_firm(1, &x, &[0.0; 2], 0.0, &[0.0; 2], 800.0, &spec).is_err());
    }

    #[test]
    fn firm_costs_add_up_to_monopoly_cost() {
        let spec = MarketSpec::reference();
        let a = [12.0, -3.5];
        let total = drift_cost_firm(0, &a, &spec) + drift_cost_firm(1, &a, &spec);
        assert!((total - drift_cost_monopoly(&a, &spec)).abs() < 1e-12);
    }
}
