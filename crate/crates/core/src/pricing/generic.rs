//! Closed-form test models: affine and polynomial.

use crate::error::{contract, Result};
use crate::features::ShapeProfile;

use super::{check_arity, PricingModel};

/// `f(x) = bias + sum_i w_i x_i`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    names: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    shape: ShapeProfile,
}

impl LinearModel {
    /// Monotone directions are read off the weight signs; zero weights stay
    /// unconstrained.
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        weights: Vec<f64>,
        bias: f64,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != weights.len() {
            return contract("linear model needs one weight per feature");
        }
        let mut shape = ShapeProfile::unconstrained(names.len());
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                shape = shape.increasing(i);
            } else if *w < 0.0 {
                shape = shape.decreasing(i);
            }
        }
        Ok(Self {
            names,
            weights,
            bias,
            shape,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl PricingModel for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_arity(self, x)?;
        Ok(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self, x)?;
        Ok(self.weights.clone())
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}

/// Sum of monomials `c * prod_i x_i^{e_i}` with non-negative integer
/// exponents.
#[derive(Debug, Clone)]
pub struct PolynomialModel {
    names: Vec<String>,
    terms: Vec<(f64, Vec<u32>)>,
    shape: ShapeProfile,
}

impl PolynomialModel {
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        terms: Vec<(f64, Vec<u32>)>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (c, exps) in &terms {
            if exps.len() != names.len() {
                return contract("monomial exponent list must match feature count");
            }
            if !c.is_finite() {
                return contract("non-finite monomial coefficient");
            }
        }
        let shape = ShapeProfile::unconstrained(names.len());
        Ok(Self {
            names,
            terms,
            shape,
        })
    }

    pub fn with_shape(mut self, shape: ShapeProfile) -> Result<Self> {
        shape.validate(self.names.len())?;
        self.shape = shape;
        Ok(self)
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }
}

impl PricingModel for PolynomialModel {
    fn name(&self) -> &str {
        "polynomial"
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_arity(self, x)?;
        Ok(self
            .terms
            .iter()
            .map(|(c, e)| {
                c * x
                    .iter()
                    .zip(e)
                    .map(|(v, &p)| v.powi(p as i32))
                    .product::<f64>()
            })
            .sum())
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self, x)?;
        let mut g = vec![0.0; x.len()];
        for (c, e) in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut term = c * e[i] as f64;
                for (j, (&v, &p)) in x.iter().zip(e).enumerate() {
                    let p = if j == i { p - 1 } else { p };
                    term *= v.powi(p as i32);
                }
                *gi += term;
            }
        }
        Ok(g)
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}
