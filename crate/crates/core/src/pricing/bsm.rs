//! Black–Scholes–Merton European options with closed-form Greeks.
//!
//! ```text
//! d1 = [ln(S/K) + (r + σ²/2)τ] / (σ√τ),   d2 = d1 − σ√τ
//! C  = S·N(d1) − K·e^{−rτ}·N(d2)
//! P  = C − S + K·e^{−rτ}
//! ```
//!
//! Below `τ` or `σ` of [`LIMIT_THRESHOLD`] the formula is singular; prices
//! and Greeks fall back to the deterministic limit `max(S − K·e^{−rτ}, 0)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::features::{Curvature, ShapeProfile};

use super::{check_arity, eval_failure, PricingModel};

pub const LIMIT_THRESHOLD: f64 = 1e-12;

/// Feature layout shared by every option model: `(S, r, tau, K, sigma)`.
pub const OPTION_FEATURES: [&str; 5] = ["S", "r", "tau", "K", "sigma"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => contract(format!("unknown option kind {other:?}")),
        }
    }
}

impl OptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        }
    }
}

/// Standard normal CDF via the complementary error function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Greeks {
    pub delta: f64,
    pub vega: f64,
    pub rho: f64,
    pub gamma: f64,
    pub vomma: f64,
}

#[derive(Debug, Clone, Copy)]
struct Inputs {
    s: f64,
    k: f64,
    r: f64,
    tau: f64,
    sigma: f64,
}

impl Inputs {
    fn new(s: f64, k: f64, r: f64, tau: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("S", s), ("K", k), ("r", r), ("tau", tau), ("sigma", sigma)] {
            if !v.is_finite() {
                return contract(format!("{name} is not finite ({v})"));
            }
        }
        if s <= 0.0 || k <= 0.0 {
            return contract(format!("S and K must be positive (S={s}, K={k})"));
        }
        if tau < 0.0 || sigma < 0.0 {
            return contract(format!(
                "tau and sigma must be non-negative (tau={tau}, sigma={sigma})"
            ));
        }
        Ok(Self {
            s,
            k,
            r,
            tau,
            sigma,
        })
    }

    fn degenerate(&self) -> bool {
        self.tau < LIMIT_THRESHOLD || self.sigma < LIMIT_THRESHOLD
    }

    fn discount(&self) -> f64 {
        (-self.r * self.tau).exp()
    }

    fn d1_d2(&self) -> (f64, f64) {
        let vol_sqrt_t = self.sigma * self.tau.sqrt();
        let d1 = ((self.s / self.k).ln() + (self.r + 0.5 * self.sigma * self.sigma) * self.tau)
            / vol_sqrt_t;
        (d1, d1 - vol_sqrt_t)
    }

    fn call_in_limit(&self) -> bool {
        self.s > self.k * self.discount()
    }
}

pub fn bsm_price(s: f64, k: f64, r: f64, tau: f64, sigma: f64, kind: OptionKind) -> Result<f64> {
    let x = Inputs::new(s, k, r, tau, sigma)?;
    Ok(price(&x, kind))
}

fn price(x: &Inputs, kind: OptionKind) -> f64 {
    let pv_strike = x.k * x.discount();
    let call = if x.degenerate() {
        (x.s - pv_strike).max(0.0)
    } else {
        let (d1, d2) = x.d1_d2();
        x.s * norm_cdf(d1) - pv_strike * norm_cdf(d2)
    };
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => {
            if x.degenerate() {
                (pv_strike - x.s).max(0.0)
            } else {
                // direct form avoids cancellation for deep in-the-money calls
                let (d1, d2) = x.d1_d2();
                pv_strike * norm_cdf(-d2) - x.s * norm_cdf(-d1)
            }
        }
    }
}

pub fn bsm_greeks(
    s: f64,
    k: f64,
    r: f64,
    tau: f64,
    sigma: f64,
    kind: OptionKind,
) -> Result<Greeks> {
    let x = Inputs::new(s, k, r, tau, sigma)?;
    Ok(greeks(&x, kind))
}

fn greeks(x: &Inputs, kind: OptionKind) -> Greeks {
    let pv_strike = x.k * x.discount();
    if x.degenerate() {
        let itm_call = x.call_in_limit();
        let (delta, rho) = match (kind, itm_call) {
            (OptionKind::Call, true) => (1.0, x.tau * pv_strike),
            (OptionKind::Put, false) if x.s < pv_strike => (-1.0, -x.tau * pv_strike),
            _ => (0.0, 0.0),
        };
        return Greeks {
            delta,
            vega: 0.0,
            rho,
            gamma: 0.0,
            vomma: 0.0,
        };
    }
    let (d1, d2) = x.d1_d2();
    let sqrt_t = x.tau.sqrt();
    let pdf = norm_pdf(d1);
    let vega = x.s * pdf * sqrt_t;
    let gamma = pdf / (x.s * x.sigma * sqrt_t);
    let vomma = vega * d1 * d2 / x.sigma;
    let (delta, rho) = match kind {
        OptionKind::Call => (norm_cdf(d1), x.tau * pv_strike * norm_cdf(d2)),
        OptionKind::Put => (norm_cdf(d1) - 1.0, -x.tau * pv_strike * norm_cdf(-d2)),
    };
    Greeks {
        delta,
        vega,
        rho,
        gamma,
        vomma,
    }
}

/// Partials in `(S, r, tau, K, sigma)` order.
fn feature_gradient(x: &Inputs, kind: OptionKind) -> [f64; 5] {
    let g = greeks(x, kind);
    let disc = x.discount();
    let pv_strike = x.k * disc;
    if x.degenerate() {
        let (d_tau, d_k) = match kind {
            OptionKind::Call if x.call_in_limit() => (x.r * pv_strike, -disc),
            OptionKind::Put if x.s < pv_strike => (-x.r * pv_strike, disc),
            _ => (0.0, 0.0),
        };
        return [g.delta, g.rho, d_tau, d_k, 0.0];
    }
    let (d1, d2) = x.d1_d2();
    let time_decay = x.s * norm_pdf(d1) * x.sigma / (2.0 * x.tau.sqrt());
    let (d_tau, d_k) = match kind {
        OptionKind::Call => (
            time_decay + x.r * pv_strike * norm_cdf(d2),
            -disc * norm_cdf(d2),
        ),
        OptionKind::Put => (
            time_decay - x.r * pv_strike * norm_cdf(-d2),
            disc * norm_cdf(-d2),
        ),
    };
    [g.delta, g.rho, d_tau, d_k, g.vega]
}

/// Black–Scholes–Merton price over `(S, r, tau, K, sigma)`, rates in
/// decimals.
#[derive(Debug, Clone)]
pub struct BsmModel {
    kind: OptionKind,
    names: Vec<String>,
    shape: ShapeProfile,
    label: String,
}

impl BsmModel {
    pub fn new(kind: OptionKind) -> Self {
        Self {
            kind,
            names: OPTION_FEATURES.iter().map(|s| s.to_string()).collect(),
            shape: option_shape(kind),
            label: format!("bsm-{}", kind.as_str()),
        }
    }

    pub fn call() -> Self {
        Self::new(OptionKind::Call)
    }

    pub fn put() -> Self {
        Self::new(OptionKind::Put)
    }

    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    fn inputs(&self, x: &[f64]) -> Result<Inputs> {
        check_arity(self, x)?;
        Inputs::new(x[0], x[3], x[1], x[2], x[4]).map_err(|e| eval_failure(x, e.to_string()))
    }
}

/// Declared shape of a European option over `(S, r, tau, K, sigma)`:
/// signs of Delta, Rho, dV/dK and Vega, plus the convexity of the price in
/// `S` and `K`. Maturity is left unconstrained.
pub fn option_shape(kind: OptionKind) -> ShapeProfile {
    let base = ShapeProfile::unconstrained(5).increasing(4);
    match kind {
        OptionKind::Call => base
            .increasing(0)
            .with_curvature(0, Curvature::Ime)
            .increasing(1)
            .decreasing(3)
            .with_curvature(3, Curvature::Rdme),
        OptionKind::Put => base
            .decreasing(0)
            .with_curvature(0, Curvature::Rdme)
            .decreasing(1)
            .increasing(3)
            .with_curvature(3, Curvature::Ime),
    }
}

impl PricingModel for BsmModel {
    fn name(&self) -> &str {
        &self.label
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(price(&self.inputs(x)?, self.kind))
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(feature_gradient(&self.inputs(x)?, self.kind).to_vec())
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values below come from a 40-digit mpmath evaluation.

    #[test]
    #[allow(clippy::excessive_precision)]
    fn norm_cdf_reference_points() {
        assert_eq!(norm_cdf(0.0), 0.5);
        let cases = [
            (0.35, 0.636_830_651_175_619_07),
            (-8.0, 6.220_960_574_271_784e-16),
            (-3.2, 6.871_379_379_158_484_6e-4),
            (1.7, 0.955_434_537_241_456_96),
            (6.0, 0.999_999_999_013_412_35),
        ];
        for (x, want) in cases {
            assert!((norm_cdf(x) - want).abs() <= 1e-15, "Φ({x})");
        }
    }

    #[test]
    fn norm_cdf_symmetry() {
        for k in -400..=400 {
            let x = k as f64 * 0.02;
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn textbook_prices() {
        let c = bsm_price(100.0, 100.0, 0.05, 1.0, 0.2, OptionKind::Call).unwrap();
        let p = bsm_price(100.0, 100.0, 0.05, 1.0, 0.2, OptionKind::Put).unwrap();
        assert!((c - 10.450_583_572_185_567).abs() < 1e-10);
        assert!((p - 5.573_526_022_256_968).abs() < 1e-10);
    }

    #[test]
    fn textbook_greeks() {
        let g = bsm_greeks(100.0, 100.0, 0.05, 1.0, 0.2, OptionKind::Call).unwrap();
        assert_relative_eq!(g.delta, 0.636_830_651_175_619, epsilon = 1e-12);
        assert_relative_eq!(g.gamma, 0.018_762_017_345_846_89, epsilon = 1e-12);
        assert_relative_eq!(g.vega, 37.524_034_691_693_79, epsilon = 1e-9);
        assert_relative_eq!(g.rho, 53.232_481_545_376_34, epsilon = 1e-9);
        assert_relative_eq!(g.vomma, 9.850_059_106_569_619, epsilon = 1e-9);
        let p = bsm_greeks(100.0, 100.0, 0.05, 1.0, 0.2, OptionKind::Put).unwrap();
        assert_relative_eq!(p.delta, g.delta - 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.gamma, g.gamma);
        assert_relative_eq!(p.vega, g.vega);
    }

    #[test]
    fn short_maturity_tends_to_payoff() {
        for (s, k) in [(120.0, 100.0), (80.0, 100.0), (100.0, 100.0)] {
            let c = bsm_price(s, k, 0.05, 1e-10, 0.3, OptionKind::Call).unwrap();
            assert!((c - f64::max(s - k, 0.0)).abs() < 1e-3, "S={s}");
            let c0 = bsm_price(s, k, 0.05, 0.0, 0.3, OptionKind::Call).unwrap();
            assert_eq!(c0, f64::max(s - k, 0.0));
        }
    }

    #[test]
    fn deep_in_the_money_delta() {
        let g = bsm_greeks(1e4, 100.0, 0.02, 0.5, 0.2, OptionKind::Call).unwrap();
        assert!((g.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_violations() {
        assert!(bsm_price(-1.0, 100.0, 0.05, 1.0, 0.2, OptionKind::Call).is_err());
        assert!(bsm_price(100.0, 0.0, 0.05, 1.0, 0.2, OptionKind::Call).is_err());
        assert!(bsm_price(100.0, 100.0, 0.05, -1.0, 0.2, OptionKind::Put).is_err());
        assert!(bsm_price(100.0, 100.0, f64::NAN, 1.0, 0.2, OptionKind::Put).is_err());
        let m = BsmModel::call();
        assert!(matches!(
            m.evaluate(&[100.0, 0.05, 1.0, 100.0, -0.2]),
            Err(Error::ModelEvaluation { .. })
        ));
    }

    #[test]
    fn shapes_are_valid() {
        option_shape(OptionKind::Call).validate(5).unwrap();
        option_shape(OptionKind::Put).validate(5).unwrap();
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Put".parse::<OptionKind>().unwrap(), OptionKind::Put);
        assert!("straddle".parse::<OptionKind>().is_err());
    }
}
