//! Parameter containers for the two-technology market.
//!
//! Money amounts (`reservation_ce`) are in euros. Prices, costs and payment
//! rates are per unit of energy; `energy_scale` converts one unit of capacity
//! held for one unit of time into energy, and is the factor applied to every
//! money flow. Risk aversions are per euro, so solvers work with the
//! effective values `energy_scale * risk_aversion`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};

/// Lower bound of the volatility band as a fraction of the uncontrolled volatility.
pub const VOL_FLOOR_FRACTION: f64 = 1e-3;

/// Hours per week: capacity held for one week-step, expressed per year of model time.
pub const DEFAULT_ENERGY_SCALE: f64 = 168.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnologySpec {
    pub linear_cost: f64,
    pub quadratic_cost: f64,
    pub vol_cost_scale: f64,
    pub uncontrolled_vol: f64,
    pub depreciation: f64,
    pub initial_capacity: f64,
}

impl TechnologySpec {
    pub fn vol_floor(&self) -> f64 {
        VOL_FLOOR_FRACTION * self.uncontrolled_vol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub risk_aversion: f64,
    pub reservation_ce: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalSpec {
    /// Social value of one unit of energy per technology (carbon cost is negative).
    pub externality: [f64; 2],
    /// Marginal cost of quadratic variation in total capacity.
    pub vol_penalty: f64,
    pub risk_aversion: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    /// Index 0 is conventional, index 1 renewable.
    pub tech: [TechnologySpec; 2],
    pub congestion: f64,
    pub power_price: f64,
    pub monopolist: AgentSpec,
    /// Firm n owns technology n.
    pub firms: [AgentSpec; 2],
    pub principal: PrincipalSpec,
    pub energy_scale: f64,
}

/// Whether agents choose their volatility (DVC) or it stays at the cap (DC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VolMode {
    Uncontrolled,
    Controlled,
}

impl VolMode {
    pub fn label(self) -> &'static str {
        match self {
            VolMode::Uncontrolled => "DC",
            VolMode::Controlled => "DVC",
        }
    }
}

impl MarketSpec {
    /// Reference calibration: conventional plus renewable technology, weekly
    /// steps over ten years.
    pub fn reference() -> Self {
        let agent = AgentSpec {
            risk_aversion: 0.001,
            reservation_ce: 0.0,
        };
        MarketSpec {
            tech: [
                TechnologySpec {
                    linear_cost: 100.0,
                    quadratic_cost: 1.0,
                    vol_cost_scale: 2000f64.powi(4),
                    uncontrolled_vol: 300.0,
                    depreciation: 0.0,
                    initial_capacity: 4000.0,
                },
                TechnologySpec {
                    linear_cost: 200.0,
                    quadratic_cost: 2.0,
                    vol_cost_scale: 5000f64.powi(4),
                    uncontrolled_vol: 750.0,
                    depreciation: 0.0,
                    initial_capacity: 1000.0,
                },
            ],
            congestion: 0.25,
            power_price: 100.0,
            monopolist: agent,
            firms: [agent, agent],
            principal: PrincipalSpec {
                externality: [-1.0, 800.0],
                vol_penalty: 50f64.powi(4),
                risk_aversion: 0.001,
                horizon: 10.0,
            },
            energy_scale: DEFAULT_ENERGY_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be finite, got {v}")))
            }
        };
        for (j, t) in self.tech.iter().enumerate() {
            finite("linear_cost", t.linear_cost)?;
            finite("initial_capacity", t.initial_capacity)?;
            if !(t.quadratic_cost > 0.0 && t.quadratic_cost.is_finite()) {
                return Err(domain(format!("quadratic_cost[{j}] must be positive")));
            }
            if !(t.vol_cost_scale > 0.0 && t.vol_cost_scale.is_finite()) {
                return Err(domain(format!("vol_cost_scale[{j}] must be positive")));
            }
            if !(t.uncontrolled_vol > 0.0 && t.uncontrolled_vol.is_finite()) {
                return Err(domain(format!("uncontrolled_vol[{j}] must be positive")));
            }
            if !(t.depreciation >= 0.0 && t.depreciation.is_finite()) {
                return Err(domain(format!("depreciation[{j}] must be nonnegative")));
            }
        }
        finite("congestion", self.congestion)?;
        finite("power_price", self.power_price)?;
        for a in std::iter::once(&self.monopolist).chain(self.firms.iter()) {
            if !(a.risk_aversion >= 0.0 && a.risk_aversion.is_finite()) {
                return Err(domain("agent risk_aversion must be nonnegative"));
            }
            finite("reservation_ce", a.reservation_ce)?;
        }
        let p = &self.principal;
        finite("externality", p.externality[0])?;
        finite("externality", p.externality[1])?;
        if !(p.vol_penalty >= 0.0 && p.vol_penalty.is_finite()) {
            return Err(domain("vol_penalty must be nonnegative"));
        }
        if !(p.risk_aversion > 0.0 && p.risk_aversion.is_finite()) {
            return Err(domain("principal risk_aversion must be positive"));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(domain("horizon must be positive"));
        }
        if !(self.energy_scale > 0.0 && self.energy_scale.is_finite()) {
            return Err(domain("energy_scale must be positive"));
        }
        Ok(())
    }

    pub fn x0(&self) -> [f64; 2] {
        [self.tech[0].initial_capacity, self.tech[1].initial_capacity]
    }

    pub fn depreciation(&self) -> [f64; 2] {
        [self.tech[0].depreciation, self.tech[1].depreciation]
    }

    pub fn sigma(&self) -> [f64; 2] {
        [self.tech[0].uncontrolled_vol, self.tech[1].uncontrolled_vol]
    }

    /// q₁q₂ − ε², the determinant of the monopolist's cost Hessian.
    pub fn q_monopoly(&self) -> f64 {
        self.tech[0].quadratic_cost * self.tech[1].quadratic_cost - self.congestion.powi(2)
    }

    /// q₁q₂ − ε²/4, the determinant of the firms' joint reaction system.
    pub fn q_competitive(&self) -> f64 {
        self.tech[0].quadratic_cost * self.tech[1].quadratic_cost - self.congestion.powi(2) / 4.0
    }

    /// Risk aversion in rate units.
    pub fn effective(&self, eta: f64) -> f64 {
        eta * self.energy_scale
    }

    pub fn money(&self, rate_value: f64) -> f64 {
        rate_value * self.energy_scale
    }

    /// Same market with risk-neutral agents.
    pub fn risk_neutral_agents(&self) -> Self {
        let mut s = *self;
        s.monopolist.risk_aversion = 0.0;
        for f in &mut s.firms {
            f.risk_aversion = 0.0;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Market {
    Monopoly,
    Competitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    BusinessAsUsual,
    SecondBest,
    FirstBest,
}

/// One of the twelve market × regime × volatility combinations, written `M-SB-DVC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ScenarioTag {
    pub market: Market,
    pub regime: Regime,
    pub vol: VolMode,
}

impl ScenarioTag {
    pub fn new(market: Market, regime: Regime, vol: VolMode) -> Self {
        ScenarioTag {
            market,
            regime,
            vol,
        }
    }

    pub fn all() -> Vec<ScenarioTag> {
        let mut out = Vec::with_capacity(12);
        for market in [Market::Monopoly, Market::Competitive] {
            for regime in [
                Regime::BusinessAsUsual,
                Regime::SecondBest,
                Regime::FirstBest,
            ] {
                for vol in [VolMode::Uncontrolled, VolMode::Controlled] {
                    out.push(ScenarioTag {
                        market,
                        regime,
                        vol,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.market {
            Market::Monopoly => "M",
            Market::Competitive => "C",
        };
        let r = match self.regime {
            Regime::BusinessAsUsual => "BU",
            Regime::SecondBest => "SB",
            Regime::FirstBest => "FB",
        };
        write!(f, "{m}-{r}-{}", self.vol.label())
    }
}

impl From<ScenarioTag> for String {
    fn from(tag: ScenarioTag) -> String {
        tag.to_string()
    }
}

impl TryFrom<String> for ScenarioTag {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for ScenarioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 {
            return Err(domain(format!(
                "scenario name '{s}' is not of the form M-SB-DVC"
            )));
        }
        let market = match parts[0].to_ascii_uppercase().as_str() {
            "M" => Market::Monopoly,
            "C" => Market::Competitive,
            other => return Err(domain(format!("unknown market '{other}'"))),
        };
        let regime = match parts[1].to_ascii_uppercase().as_str() {
            "BU" => Regime::BusinessAsUsual,
            "SB" => Regime::SecondBest,
            "FB" => Regime::FirstBest,
            other => return Err(domain(format!("unknown regime '{other}'"))),
        };
        let vol = match parts[2].to_ascii_uppercase().as_str() {
            "DC" => VolMode::Uncontrolled,
            "DVC" => VolMode::Controlled,
            other => return Err(domain(format!("unknown volatility mode '{other}'"))),
        };
        Ok(ScenarioTag {
            market,
            regime,
            vol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        let s = MarketSpec::reference();
        s.validate().unwrap();
        assert!((s.q_monopoly() - 1.9375).abs() < 1e-15);
        assert!((s.q_competitive() - 1.984375).abs() < 1e-15);
        assert_eq!(s.principal.vol_penalty, 6.25e6);
    }

    #[test]
    fn tag_round_trip() {
        for tag in ScenarioTag::all() {
            let parsed: ScenarioTag = tag.to_string().parse().unwrap();
            assert_eq!(parsed, tag);
        }
        assert_eq!(ScenarioTag::all().len(), 12);
        assert!("M-XX-DC".parse::<ScenarioTag>().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = MarketSpec::reference();
        s.tech[1].quadratic_cost = 0.0;
        assert!(s.validate().is_err());
        let mut s = MarketSpec::reference();
        s.principal.risk_aversion = 0.0;
        assert!(s.validate().is_err());
        let mut s = MarketSpec::reference();
        s.power_price = f64::NAN;
        assert!(s.validate().is_err());
    }
}
