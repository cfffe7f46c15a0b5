//! CES preferences over the manufactured and the farm good: Marshallian
//! demand, indirect utility and the price change of variable that makes the
//! potential concave.
//!
//! Powers with exponent `alpha / (alpha - 1)` are evaluated through logs with
//! exponent arguments clamped to `[-700, 700]`, so extreme trial prices in a
//! line search never overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXP_CLAMP: f64 = 700.0;

#[inline]
fn exp_clamped(x: f64) -> f64 {
    x.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// CES exponent `alpha` and shipping-cost elasticity `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomyParams {
    pub alpha: f64,
    pub delta: f64,
}

impl EconomyParams {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let p = EconomyParams { alpha, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            return Err(Error::param("alpha", format!("must be finite and nonzero, got {}", self.alpha)));
        }
        if self.alpha >= 1.0 {
            // alpha = 1 is linear utility: demand is a corner solution and
            // alpha / (alpha - 1) is undefined.
            return Err(Error::param("alpha", format!("must be below 1, got {}", self.alpha)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::param("delta", format!("must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    /// `alpha / (alpha - 1)`.
    #[inline]
    pub fn rho(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    /// Budget share spent on the farm good, `p^rho / (q^rho + p^rho)`.
    #[inline]
    pub fn farm_share(&self, q: f64, p: f64) -> f64 {
        1.0 / (1.0 + exp_clamped(self.rho() * (q.ln() - p.ln())))
    }

    /// Budget share spent on the manufactured good, `q^rho / (q^rho + p^rho)`.
    #[inline]
    pub fn manuf_share(&self, q: f64, p: f64) -> f64 {
        1.0 / (1.0 + exp_clamped(self.rho() * (p.ln() - q.ln())))
    }

    pub fn demand(&self, q: f64, p: f64, omega: f64) -> Result<DemandBundle> {
        check_price(0, p)?;
        check_price(1, q)?;
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::param("omega", format!("income must be nonnegative, got {omega}")));
        }
        Ok(DemandBundle {
            c_m: self.manuf_share(q, p) * omega / q,
            c_a: self.farm_share(q, p) * omega / p,
        })
    }

    /// `ln v(q, p)` with `v = (q^rho + p^rho)^((1 - alpha) / alpha)`.
    #[inline]
    pub fn ln_marginal_utility(&self, q: f64, p: f64) -> f64 {
        let rho = self.rho();
        // (1 - alpha) / alpha == -1 / rho
        -log_sum_exp(rho * q.ln(), rho * p.ln()) / rho
    }

    /// Marginal utility of income `v(q, p)`.
    pub fn marginal_utility(&self, q: f64, p: f64) -> Result<f64> {
        check_price(0, p)?;
        check_price(1, q)?;
        Ok(exp_clamped(self.ln_marginal_utility(q, p)))
    }

    /// `V(q, p, omega) = v(q, p) * omega`.
    pub fn indirect_utility(&self, q: f64, p: f64, omega: f64) -> Result<f64> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::param("omega", format!("income must be nonnegative, got {omega}")));
        }
        Ok(self.marginal_utility(q, p)? * omega)
    }

    /// `ln(p * v(q, p))`, the log of the utility a farmer gets per unit of
    /// output delivered to a market paying `p`.
    #[inline]
    pub fn ln_vhat(&self, q: f64, p: f64) -> f64 {
        p.ln() + self.ln_marginal_utility(q, p)
    }

    /// The CES utility itself, for checks against the demand system.
    pub fn utility(&self, c_m: f64, c_a: f64) -> f64 {
        (c_m.powf(self.alpha) + c_a.powf(self.alpha)).powf(1.0 / self.alpha)
    }

    /// Change of variable `pbar = (1 + p^(alpha/(1-alpha)))^((1-alpha)/alpha)`
    /// at `q = 1`; equal to `p * v(1, p)`.
    pub fn pbar(&self, p: f64) -> Result<f64> {
        check_price(0, p)?;
        let rho = self.rho();
        // alpha/(1-alpha) == -rho, (1-alpha)/alpha == -1/rho
        Ok(exp_clamped(-log_sum_exp(0.0, -rho * p.ln()) / rho))
    }

    /// Inverse of [`Self::pbar`]. The image of `(0, inf)` is `(0, 1)` for
    /// `alpha < 0` and `(1, inf)` for `0 < alpha < 1`; values outside are
    /// rejected.
    pub fn pbar_inverse(&self, pbar: f64) -> Result<f64> {
        let rho = self.rho();
        if !(pbar.is_finite() && pbar > 0.0) {
            return Err(Error::OutsideTransformRange {
                value: pbar,
                alpha: self.alpha,
            });
        }
        let t = (-rho * pbar.ln()).exp_m1();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::OutsideTransformRange {
                value: pbar,
                alpha: self.alpha,
            });
        }
        Ok(exp_clamped(-t.ln() / rho))
    }

    /// Open interval that [`Self::pbar`] maps `(0, inf)` onto.
    pub fn pbar_range(&self) -> (f64, f64) {
        if self.alpha < 0.0 {
            (0.0, 1.0)
        } else {
            (1.0, f64::INFINITY)
        }
    }
}

fn check_price(index: usize, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositivePrice { index, value })
    }
}

/// Farm-good prices per city plus the manufacturing price `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceState {
    pub p: Vec<f64>,
    pub q: f64,
}

impl PriceState {
    pub fn new(p: Vec<f64>, q: f64) -> Result<Self> {
        let s = PriceState { p, q };
        s.validate()?;
        Ok(s)
    }

    /// Prices with `q = 1`.
    pub fn normalized_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p, 1.0)
    }

    pub fn ones(n: usize) -> Self {
        PriceState { p: vec![1.0; n], q: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.p.iter().enumerate() {
            check_price(i, v)?;
        }
        check_price(self.p.len(), self.q)
    }

    pub fn is_normalized(&self) -> bool {
        self.q == 1.0
    }

    /// Divides every price by `q`.
    pub fn normalized(&self) -> PriceState {
        PriceState {
            p: self.p.iter().map(|&v| v / self.q).collect(),
            q: 1.0,
        }
    }

    pub fn scaled(&self, t: f64) -> PriceState {
        PriceState {
            p: self.p.iter().map(|&v| v * t).collect(),
            q: self.q * t,
        }
    }
}

/// Per-agent consumption of the manufactured and the farm good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandBundle {
    pub c_m: f64,
    pub c_a: f64,
}
