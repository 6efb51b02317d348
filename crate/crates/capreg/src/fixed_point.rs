//! Damped Picard iteration `x ← x + θ(F(x) − x)`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Grid points solved sequentially inside one parallel task. Chunk boundaries
/// are fixed, so results do not depend on the number of worker threads.
pub const GRID_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once the relative residual falls to this level.
    pub tolerance: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            damping: 0.5,
            max_iter: 500,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub residuals: Vec<f64>,
}

/// `max_i |y_i − x_i| / (1 + |x_i|)`.
pub fn relative_residual(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (b - a).abs() / (1.0 + a.abs()))
        .fold(0.0, f64::max)
}

/// Runs the damped iteration from `x0`. The damping factor is halved whenever
/// the residual increases. The returned point `x` satisfies
/// `relative_residual(x, F(x)) ≤ tolerance`.
pub fn damped_picard<F>(x0: Vec<f64>, mut map: F, opts: PicardOptions) -> Result<PicardOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0;
    let mut theta = opts.damping;
    let mut residuals = Vec::new();
    for it in 1..=opts.max_iter {
        let fx = map(&x)?;
        let r = relative_residual(&x, &fx);
        if !r.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: r,
            });
        }
        if let Some(&prev) = residuals.last() {
            if r > prev {
                theta *= 0.5;
            }
        }
        residuals.push(r);
        if r <= opts.tolerance {
            return Ok(PicardOutcome {
                point: x,
                iterations: it,
                residual: r,
                residuals,
            });
        }
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi += theta * (fi - *xi);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Solves `n` pointwise problems in parallel chunks. Within a chunk each
/// point receives the previous point's solution as a warm start.
pub fn solve_grid_points<T, F>(n: usize, solve: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Option<&T>) -> Result<T> + Sync,
{
    let idx: Vec<usize> = (0..n).collect();
    let chunks: Vec<Vec<T>> = idx
        .par_chunks(GRID_CHUNK)
        .map(|chunk| {
            let mut out: Vec<T> = Vec::with_capacity(chunk.len());
            for &k in chunk {
                let next = solve(k, out.last())?;
                out.push(next);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_contraction() {
        let out = damped_picard(
            vec![0.0],
            |x| Ok(vec![x[0].cos()]),
            PicardOptions::default(),
        )
        .unwrap();
        assert!((out.point[0] - 0.7390851332151607).abs() < 1e-11);
        assert!(out.residual <= 1e-12);
    }

    #[test]
    fn exact_start_stops_immediately() {
        let out = damped_picard(vec![2.0], |_| Ok(vec![2.0]), PicardOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = PicardOptions {
            max_iter: 5,
            ..Default::default()
        };
        let err = damped_picard(vec![1.0], |x| Ok(vec![x[0] + 1.0]), opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 5, .. }));
    }

    #[test]
    fn damping_rescues_oscillating_map() {
        // undamped iteration of F(x) = −1.5x + 5 diverges
        let out = damped_picard(
            vec![0.0],
            |x| Ok(vec![-1.5 * x[0] + 5.0]),
            PicardOptions::default(),
        )
        .unwrap();
        assert!((out.point[0] - 2.0).abs() < 1e-10);
    }
}
