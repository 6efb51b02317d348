use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform time grid `0 = t_0 < … < t_M = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Builds the grid with `round(T/dt)` steps. The requested step must divide
    /// the horizon up to rounding.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(domain("horizon must be positive and finite"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(domain("dt must be positive and finite"));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(domain(format!(
                "dt = {dt} does not divide the horizon {horizon}"
            )));
        }
        Ok(TimeGrid {
            horizon,
            steps: steps as usize,
        })
    }

    pub fn with_steps(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(domain("grid needs at least one step"));
        }
        Self::new(horizon, horizon / steps as f64)
    }

    /// Weekly steps.
    pub fn weekly(horizon: f64) -> Result<Self> {
        Self::new(horizon, 1.0 / 52.0)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let n = values.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = values[1..n - 1].iter().sum();
        self.dt() * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    /// Time derivative by central differences, one-sided at both ends.
    pub fn derivative(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(domain("series length does not match grid"));
        }
        if self.steps < 4 {
            return Err(domain(
                "grid too coarse for differentiation (needs at least 4 steps)",
            ));
        }
        let h = self.dt();
        let n = values.len();
        let mut out = Vec::with_capacity(n);
        out.push((values[1] - values[0]) / h);
        for k in 1..n - 1 {
            out.push((values[k + 1] - values[k - 1]) / (2.0 * h));
        }
        out.push((values[n - 1] - values[n - 2]) / h);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekly_grid_has_521_points() {
        let g = TimeGrid::weekly(10.0).unwrap();
        assert_eq!(g.len(), 521);
        let t = g.times();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 10.0);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - g.dt()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_dividing_step() {
        assert!(TimeGrid::new(10.0, 0.3).is_err());
        assert!(TimeGrid::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let g = TimeGrid::with_steps(2.0, 8).unwrap();
        let f: Vec<f64> = g.times().iter().map(|t| 3.0 * t + 1.0).collect();
        assert!((g.trapezoid(&f) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_linear_is_constant() {
        let g = TimeGrid::with_steps(1.0, 10).unwrap();
        let f: Vec<f64> = g.times().iter().map(|t| 5.0 - 2.0 * t).collect();
        for d in g.derivative(&f).unwrap() {
            assert!((d + 2.0).abs() < 1e-12);
        }
        let coarse = TimeGrid::with_steps(1.0, 3).unwrap();
        assert!(coarse.derivative(&[0.0; 4]).is_err());
    }
}
