//! Model-free volatility index from an option chain.
//!
//! ```text
//! VIX² = (2e^{rτ}/τ) · ( ∫₀^F P(K)/K² dK + ∫_F^∞ C(K)/K² dK )
//! ```
//!
//! Both integrals are truncated at the outermost quoted strikes and
//! discretized with the trapezoid rule over the out-of-the-money integrand.
//! The exchange's `(F/K₀ − 1)²` forward correction is not applied.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::pricing::bsm::{bsm_price, OptionKind};

/// Minimum number of strikes required on each side of the forward.
pub const MIN_STRIKES_PER_SIDE: usize = 3;

/// Out-of-the-money quotes around a forward level. `put_quotes` cover the
/// strikes at or below `forward`, `call_quotes` the strikes above it, both in
/// ascending strike order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixInput {
    pub strikes: Vec<f64>,
    pub put_quotes: Vec<f64>,
    pub call_quotes: Vec<f64>,
    pub forward: f64,
    pub rate: f64,
    pub tau: f64,
}

impl VixInput {
    /// Thirty calendar days, the index horizon.
    pub const THIRTY_DAYS: f64 = 30.0 / 365.0;

    /// A chain quoted by Black–Scholes–Merton at a single volatility, for
    /// testing the estimator against a known answer.
    pub fn flat_volatility(
        strikes: Vec<f64>,
        forward: f64,
        rate: f64,
        tau: f64,
        sigma: f64,
    ) -> Result<Self> {
        let spot = forward * (-rate * tau).exp();
        let mut input = VixInput {
            strikes: Vec::with_capacity(strikes.len()),
            put_quotes: Vec::new(),
            call_quotes: Vec::new(),
            forward,
            rate,
            tau,
        };
        for k in strikes {
            if k <= forward {
                input
                    .put_quotes
                    .push(bsm_price(spot, k, rate, tau, sigma, OptionKind::Put)?);
            } else {
                input
                    .call_quotes
                    .push(bsm_price(spot, k, rate, tau, sigma, OptionKind::Call)?);
            }
            input.strikes.push(k);
        }
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.strikes.len();
        if n == 0 {
            return Err(Error::InsufficientData {
                what: "strikes",
                needed: 2 * MIN_STRIKES_PER_SIDE,
                got: 0,
            });
        }
        if self.strikes.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return contract("strikes must be positive and finite");
        }
        if self.strikes.windows(2).any(|w| w[1] <= w[0]) {
            return contract("strikes must be strictly ascending");
        }
        if !(self.forward.is_finite() && self.rate.is_finite() && self.tau.is_finite()) {
            return contract("forward, rate and tau must be finite");
        }
        if self.tau <= 0.0 {
            return contract(format!("tau must be positive, got {}", self.tau));
        }
        if self.forward < self.strikes[0] || self.forward > self.strikes[n - 1] {
            return contract(format!(
                "forward {} outside strike range [{}, {}]",
                self.forward,
                self.strikes[0],
                self.strikes[n - 1]
            ));
        }
        let below = self.strikes.iter().filter(|&&k| k <= self.forward).count();
        let above = n - below;
        if self.put_quotes.len() != below || self.call_quotes.len() != above {
            return contract(format!(
                "expected {below} put and {above} call quotes, got {} and {}",
                self.put_quotes.len(),
                self.call_quotes.len()
            ));
        }
        if below.min(above) < MIN_STRIKES_PER_SIDE {
            return Err(Error::InsufficientData {
                what: "strikes on each side of the forward",
                needed: MIN_STRIKES_PER_SIDE,
                got: below.min(above),
            });
        }
        if let Some(q) = self
            .put_quotes
            .iter()
            .chain(&self.call_quotes)
            .find(|q| !(q.is_finite() && **q >= 0.0))
        {
            return contract(format!("option quotes must be >= 0, got {q}"));
        }
        Ok(())
    }
}

pub fn vix_from_chain(input: &VixInput) -> Result<f64> {
    input.validate()?;
    let quotes = input.put_quotes.iter().chain(&input.call_quotes);
    let integrand: Vec<f64> = input
        .strikes
        .iter()
        .zip(quotes)
        .map(|(k, q)| q / (k * k))
        .collect();
    let integral: f64 = input
        .strikes
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(k, g)| 0.5 * (k[1] - k[0]) * (g[0] + g[1]))
        .sum();
    let variance = 2.0 * (input.rate * input.tau).exp() / input.tau * integral;
    Ok(variance.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Flat-volatility chain with strikes from 50% to 200% of the forward.
    fn flat_chain(sigma: f64, spacing: f64) -> VixInput {
        let forward = 1000.0;
        let steps = ((2.0 - 0.5) / spacing).round() as usize;
        let strikes = (0..=steps)
            .map(|i| forward * (0.5 + i as f64 * spacing))
            .collect();
        VixInput::flat_volatility(strikes, forward, 0.02, VixInput::THIRTY_DAYS, sigma).unwrap()
    }

    #[test]
    fn flat_vol_recovers_sigma() {
        let v = vix_from_chain(&flat_chain(0.2, 0.005)).unwrap();
        assert!((v - 0.2).abs() < 0.01, "vix = {v}");
    }

    #[test]
    fn refinement_improves() {
        let coarse = vix_from_chain(&flat_chain(0.2, 0.02)).unwrap();
        let mid = vix_from_chain(&flat_chain(0.2, 0.01)).unwrap();
        let fine = vix_from_chain(&flat_chain(0.2, 0.005)).unwrap();
        assert!((mid - 0.2).abs() < (coarse - 0.2).abs());
        assert!((fine - 0.2).abs() < (mid - 0.2).abs());
    }

    #[test]
    fn zero_quotes_give_zero() {
        let mut input = flat_chain(0.2, 0.05);
        input.put_quotes.iter_mut().for_each(|q| *q = 0.0);
        input.call_quotes.iter_mut().for_each(|q| *q = 0.0);
        assert_eq!(vix_from_chain(&input).unwrap(), 0.0);
    }

    #[test]
    fn rejects_thin_or_bad_chains() {
        let input = VixInput {
            strikes: vec![90.0, 95.0, 100.0, 105.0, 110.0],
            put_quotes: vec![1.0, 2.0, 3.0],
            call_quotes: vec![2.0, 1.0],
            forward: 100.0,
            rate: 0.0,
            tau: 0.1,
        };
        assert!(matches!(
            vix_from_chain(&input),
            Err(Error::InsufficientData { .. })
        ));
        let mut neg = flat_chain(0.2, 0.05);
        neg.call_quotes[0] = -1.0;
        assert!(matches!(vix_from_chain(&neg), Err(Error::Contract(_))));
        let mut unsorted = flat_chain(0.2, 0.05);
        unsorted.strikes.swap(0, 1);
        assert!(vix_from_chain(&unsorted).is_err());
    }
}
