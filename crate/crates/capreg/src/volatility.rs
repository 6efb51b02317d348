//! Volatility effort for the cost family `φ(b) = (b⁻² − σ⁻²)Φ` on the band
//! `[b_floor, σ]`, and its Legendre transform in the variance variable `B = b²/2`.

use crate::error::{domain, Result};
use crate::params::VOL_FLOOR_FRACTION;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolResponse {
    pub b: f64,
    /// False when the optimum sits on the band edge or no interior optimum exists.
    pub interior: bool,
}

/// Agent's optimal volatility when paid `gamma` per unit of quadratic variation.
pub fn vol_best_response(gamma: f64, scale: f64, cap: f64) -> Result<VolResponse> {
    if !(scale > 0.0) {
        return Err(domain(format!(
            "volatility cost scale must be positive, got {scale}"
        )));
    }
    if !(cap > 0.0) {
        return Err(domain(format!(
            "volatility cap must be positive, got {cap}"
        )));
    }
    if gamma.is_nan() {
        return Err(domain("volatility payment is NaN"));
    }
    if gamma >= 0.0 {
        return Ok(VolResponse {
            b: cap,
            interior: false,
        });
    }
    let floor = VOL_FLOOR_FRACTION * cap;
    let b2 = (2.0 * scale / -gamma).sqrt();
    if b2 >= cap * cap {
        Ok(VolResponse {
            b: cap,
            interior: false,
        })
    } else if b2 <= floor * floor {
        Ok(VolResponse {
            b: floor,
            interior: false,
        })
    } else {
        Ok(VolResponse {
            b: b2.sqrt(),
            interior: true,
        })
    }
}

/// `φ(b)`; zero at the cap.
pub fn vol_cost(b: f64, scale: f64, cap: f64) -> f64 {
    if b >= cap {
        return 0.0;
    }
    (1.0 / (b * b) - 1.0 / (cap * cap)) * scale
}

/// `φ̃(B) = (½B⁻¹ − σ⁻²)Φ`, the cost written in `B = b²/2`.
pub fn vol_cost_variance(big_b: f64, scale: f64, cap: f64) -> f64 {
    if big_b >= 0.5 * cap * cap {
        return 0.0;
    }
    (0.5 / big_b - 1.0 / (cap * cap)) * scale
}

/// Maximiser of `B·M − φ̃(B)` over `B ∈ [½b_floor², ½σ²]`.
pub fn phi_star_argmax(m: f64, scale: f64, cap: f64) -> f64 {
    let lo = 0.5 * (VOL_FLOOR_FRACTION * cap).powi(2);
    let hi = 0.5 * cap * cap;
    if m >= 0.0 {
        return hi;
    }
    (scale / (-2.0 * m)).sqrt().clamp(lo, hi)
}

/// `sup_B {B·M − φ̃(B)}` on the admissible band; the objective is concave in `B`.
pub fn phi_star(m: f64, scale: f64, cap: f64) -> f64 {
    let b = phi_star_argmax(m, scale, cap);
    b * m - vol_cost_variance(b, scale, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const H: f64 = 6.25e6;

    fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if f(x1) < f(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        f(0.5 * (lo + hi))
    }

    #[test]
    fn best_response_examples() {
        let r = vol_best_response(-H, 2000f64.powi(4), 300.0).unwrap();
        assert_relative_eq!(r.b * r.b, 2262.741699796952, max_relative = 1e-12);
        assert_relative_eq!(r.b, 47.568, max_relative = 1e-4);
        assert!(r.interior);
        let r = vol_best_response(-H, 5000f64.powi(4), 750.0).unwrap();
        assert_relative_eq!(r.b, 118.92, max_relative = 1e-4);
        let r = vol_best_response(-1e300, 2000f64.powi(4), 300.0).unwrap();
        assert_relative_eq!(r.b, 0.3, max_relative = 1e-12);
        assert!(!r.interior);
        let r = vol_best_response(0.0, 2000f64.powi(4), 300.0).unwrap();
        assert_eq!(r.b, 300.0);
        assert!(!r.interior);
        assert!(vol_best_response(-H, 0.0, 300.0).is_err());
    }

    #[test]
    fn best_response_maximises_payment_minus_cost() {
        let (scale, cap) = (2000f64.powi(4), 300.0);
        for gamma in [-1e5, -H, -3e7, -1.9e9] {
            let b = vol_best_response(gamma, scale, cap).unwrap().b;
            let obj = |b: f64| 0.5 * b * b * gamma - vol_cost(b, scale, cap);
            let best = golden_max(obj, 0.3, 300.0);
            assert!(obj(b) >= best - 1e-9 * best.abs());
        }
    }

    #[test]
    fn cost_is_zero_at_cap() {
        assert_eq!(vol_cost(300.0, 2000f64.powi(4), 300.0), 0.0);
        assert_eq!(
            vol_cost_variance(0.5 * 300.0 * 300.0, 2000f64.powi(4), 300.0),
            0.0
        );
    }

    #[test]
    fn phi_star_interior_example() {
        let (scale, cap) = (2000f64.powi(4), 300.0);
        let b = phi_star_argmax(-H, scale, cap);
        assert_relative_eq!(b, (1.6e13f64 / 1.25e7).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(b, 1131.37, max_relative = 1e-5);
        let lo = 0.5 * 0.3f64.powi(2);
        let hi = 0.5 * cap * cap;
        let oracle = golden_max(|x| x * -H - vol_cost_variance(x, scale, cap), lo, hi);
        assert_relative_eq!(phi_star(-H, scale, cap), oracle, max_relative = 1e-6);
    }

    #[test]
    fn phi_star_nonnegative_payment_hits_cap() {
        let (scale, cap) = (5000f64.powi(4), 750.0);
        for m in [0.0, 1.0, 1e6] {
            assert_relative_eq!(
                phi_star(m, scale, cap),
                0.5 * cap * cap * m,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn phi_star_very_negative_payments() {
        let (scale, cap) = (2000f64.powi(4), 300.0);
        let lo = 0.5 * 0.3f64.powi(2);
        let hi = 0.5 * cap * cap;
        let mut prev = f64::INFINITY;
        for m in [-1e8, -1e10, -1e12, -1e14, -1e16] {
            let v = phi_star(m, scale, cap);
            let oracle = golden_max(|x| x * m - vol_cost_variance(x, scale, cap), lo, hi);
            assert!((v - oracle).abs() <= 1e-6 * oracle.abs());
            assert!(v < prev);
            prev = v;
        }
        // deep in the clamped region the value is the floor penalty plus the payment term
        let m = -1e16;
        assert_relative_eq!(
            phi_star(m, scale, cap),
            lo * m - vol_cost_variance(lo, scale, cap),
            max_relative = 1e-14
        );
    }
}
