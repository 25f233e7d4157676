//! Zero-coupon bond under continuous compounding.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::features::{Curvature, ShapeProfile};

use super::{check_arity, eval_failure, PricingModel};

/// Principal and maturity of a zero-coupon bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondSpec {
    pub principal: f64,
    pub maturity: f64,
}

impl BondSpec {
    pub fn new(principal: f64, maturity: f64) -> Result<Self> {
        if !(principal >= 0.0 && principal.is_finite()) {
            return contract(format!("bond principal must be >= 0, got {principal}"));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return contract(format!("bond maturity must be > 0, got {maturity}"));
        }
        Ok(Self {
            principal,
            maturity,
        })
    }

    pub fn price(&self, rate: f64) -> Result<f64> {
        bond_price(rate, self.principal, self.maturity)
    }
}

/// Present value `c * exp(-r T)`.
pub fn bond_price(rate: f64, principal: f64, maturity: f64) -> Result<f64> {
    if !rate.is_finite() || !principal.is_finite() || !maturity.is_finite() {
        return contract(format!(
            "non-finite bond input (r={rate}, c={principal}, T={maturity})"
        ));
    }
    if principal < 0.0 {
        return contract(format!("bond principal must be >= 0, got {principal}"));
    }
    if maturity <= 0.0 {
        return contract(format!("bond maturity must be > 0, got {maturity}"));
    }
    Ok(principal * (-rate * maturity).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    /// Features `(r, c)`, maturity held fixed.
    RatePrincipal { maturity: f64 },
    /// Features `(r, c, T)`.
    Full,
}

/// The bond as a pricing model. The default layout explains the price in
/// terms of `(r, c)` with the maturity as a fixed parameter.
#[derive(Debug, Clone)]
pub struct BondModel {
    layout: Layout,
    names: Vec<String>,
    shape: ShapeProfile,
}

impl BondModel {
    pub fn new(maturity: f64) -> Result<Self> {
        if !(maturity > 0.0 && maturity.is_finite()) {
            return contract(format!("bond maturity must be > 0, got {maturity}"));
        }
        let shape = ShapeProfile::unconstrained(2)
            .decreasing(0)
            .with_curvature(0, Curvature::Rdme)
            .increasing(1);
        Ok(Self {
            layout: Layout::RatePrincipal { maturity },
            names: vec!["r".into(), "c".into()],
            shape,
        })
    }

    /// Three-feature variant `(r, c, T)`. The sign of `dB/dT` depends on the
    /// sign of the rate, so `T` carries no monotone flag.
    pub fn with_maturity_feature() -> Self {
        let shape = ShapeProfile::unconstrained(3)
            .decreasing(0)
            .with_curvature(0, Curvature::Rdme)
            .increasing(1);
        Self {
            layout: Layout::Full,
            names: vec!["r".into(), "c".into(), "T".into()],
            shape,
        }
    }

    pub fn maturity(&self) -> Option<f64> {
        match self.layout {
            Layout::RatePrincipal { maturity } => Some(maturity),
            Layout::Full => None,
        }
    }

    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        match self.layout {
            Layout::RatePrincipal { maturity } => (x[0], x[1], maturity),
            Layout::Full => (x[0], x[1], x[2]),
        }
    }
}

impl PricingModel for BondModel {
    fn name(&self) -> &str {
        "bond"
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_arity(self, x)?;
        let (r, c, t) = self.unpack(x);
        bond_price(r, c, t).map_err(|e| eval_failure(x, e.to_string()))
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let price = self.evaluate(x)?;
        let (r, c, t) = self.unpack(x);
        let discount = (-r * t).exp();
        let mut g = vec![-t * price, discount];
        if self.layout == Layout::Full {
            g.push(-r * c * discount);
        }
        Ok(g)
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // 100 e^{-0.5}
        let p = bond_price(0.05, 100.0, 10.0).unwrap();
        assert!((p - 60.653_065_971_263_34).abs() < 1e-12);
        assert_eq!(bond_price(0.3, 0.0, 7.0).unwrap(), 0.0);
        assert_eq!(bond_price(0.0, 42.0, 5.0).unwrap(), 42.0);
    }

    #[test]
    fn contract_violations() {
        assert!(bond_price(f64::NAN, 1.0, 1.0).is_err());
        assert!(bond_price(0.1, -1.0, 1.0).is_err());
        assert!(bond_price(0.1, 1.0, 0.0).is_err());
        assert!(BondModel::new(-2.0).is_err());
    }

    #[test]
    fn nonincreasing_and_convex_in_rate() {
        let rates: Vec<f64> = (0..=30).map(|k| -0.05 + 0.02 * k as f64).collect();
        let b = |r: f64| bond_price(r, 100.0, 12.0).unwrap();
        for w in rates.windows(2) {
            assert!(b(w[1]) <= b(w[0]));
        }
        for i in 0..rates.len() {
            for j in i + 1..rates.len() {
                for k in j + 1..rates.len() {
                    let (r1, r2, r3) = (rates[i], rates[j], rates[k]);
                    let lam = (r3 - r2) / (r3 - r1);
                    let chord = lam * b(r1) + (1.0 - lam) * b(r3);
                    assert!(b(r2) <= chord + 1e-12, "convexity at {r1} {r2} {r3}");
                }
            }
        }
    }

    #[test]
    fn three_feature_gradient() {
        let m = BondModel::with_maturity_feature();
        let x = [0.04, 80.0, 6.0];
        let g = m.gradient(&x).unwrap();
        let fd = super::super::finite_difference_gradient(&m, &x, 1e-6).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
        }
    }
}
