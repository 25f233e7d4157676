//! Pricing models behind a common evaluation interface.
//!
//! Analytic oracles (zero-coupon bond, Black–Scholes–Merton) live in their
//! own modules; this module holds the [`PricingModel`] trait and a few
//! combinators the attribution and audit layers build on: finite-difference
//! gradients, frozen-coordinate restriction, dummy-feature extension and
//! linear combinations.

use std::sync::Arc;

use crate::error::{contract, Error, Result};
use crate::features::{FeatureVector, ShapeProfile};

pub mod bond;
pub mod bsm;
pub mod generic;
pub mod vix;

pub use bond::{bond_price, BondModel};
pub use bsm::{bsm_greeks, bsm_price, norm_cdf, norm_pdf, BsmModel, Greeks, OptionKind};
pub use generic::{LinearModel, PolynomialModel};
pub use vix::{vix_from_chain, VixInput};

/// A real-valued model over named features.
///
/// Implementations must be pure: the same input always yields the same
/// output, so attribution and audit code may evaluate from several threads.
pub trait PricingModel: Send + Sync {
    fn name(&self) -> &str;

    fn feature_names(&self) -> &[String];

    fn n_features(&self) -> usize {
        self.feature_names().len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Partial derivatives at `x`. Models without an analytic gradient
    /// return [`Error::GradientUnavailable`].
    fn gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Err(Error::GradientUnavailable)
    }

    fn shape(&self) -> &ShapeProfile;

    /// Evaluates at a named vector, checking the names against the model.
    fn value_at(&self, x: &FeatureVector) -> Result<f64> {
        x.ensure_names(self.feature_names())?;
        self.evaluate(x.values())
    }
}

macro_rules! forward_model {
    ($ty:ty) => {
        impl<T: PricingModel + ?Sized> PricingModel for $ty {
            fn name(&self) -> &str {
                (**self).name()
            }
            fn feature_names(&self) -> &[String] {
                (**self).feature_names()
            }
            fn evaluate(&self, x: &[f64]) -> Result<f64> {
                (**self).evaluate(x)
            }
            fn has_gradient(&self) -> bool {
                (**self).has_gradient()
            }
            fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
                (**self).gradient(x)
            }
            fn shape(&self) -> &ShapeProfile {
                (**self).shape()
            }
        }
    };
}

forward_model!(&T);
forward_model!(Box<T>);
forward_model!(Arc<T>);

pub(crate) fn check_arity(model: &dyn PricingModel, x: &[f64]) -> Result<()> {
    if x.len() != model.n_features() {
        return contract(format!(
            "{} expects {} features, got {}",
            model.name(),
            model.n_features(),
            x.len()
        ));
    }
    Ok(())
}

pub(crate) fn eval_failure(x: &[f64], reason: impl Into<String>) -> Error {
    Error::ModelEvaluation {
        point: x.to_vec(),
        reason: reason.into(),
    }
}

/// Central finite-difference gradient with step `h_i = 1e-6 * max(1, |x_i|)`.
pub fn finite_difference_gradient(
    model: &dyn PricingModel,
    x: &[f64],
    rel_step: f64,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = model.evaluate(&probe)?;
        probe[i] = x[i] - h;
        let down = model.evaluate(&probe)?;
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Gives any model a gradient by central differences.
#[derive(Debug, Clone)]
pub struct FiniteDifference<M> {
    inner: M,
    rel_step: f64,
}

impl<M: PricingModel> FiniteDifference<M> {
    pub const DEFAULT_STEP: f64 = 1e-6;

    pub fn new(inner: M) -> Self {
        Self {
            inner,
            rel_step: Self::DEFAULT_STEP,
        }
    }

    pub fn with_step(inner: M, rel_step: f64) -> Self {
        Self { inner, rel_step }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: PricingModel> PricingModel for FiniteDifference<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn feature_names(&self) -> &[String] {
        self.inner.feature_names()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.inner.evaluate(x)
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self, x)?;
        finite_difference_gradient(&self.inner, x, self.rel_step)
    }
    fn shape(&self) -> &ShapeProfile {
        self.inner.shape()
    }
}

/// A model with some coordinates frozen; the remaining features keep their
/// original order.
#[derive(Debug, Clone)]
pub struct Restricted<M> {
    inner: M,
    fixed: Vec<Option<f64>>,
    free: Vec<usize>,
    names: Vec<String>,
    shape: ShapeProfile,
    label: String,
}

impl<M: PricingModel> Restricted<M> {
    /// `fixed` lists `(feature index, frozen value)` pairs.
    pub fn new(inner: M, fixed: &[(usize, f64)]) -> Result<Self> {
        let n = inner.n_features();
        let mut slots = vec![None; n];
        for &(i, v) in fixed {
            if i >= n {
                return contract(format!("cannot fix feature {i} of a {n}-feature model"));
            }
            if !v.is_finite() {
                return contract(format!("frozen value for feature {i} is not finite"));
            }
            slots[i] = Some(v);
        }
        let free: Vec<usize> = (0..n).filter(|&i| slots[i].is_none()).collect();
        let names = free
            .iter()
            .map(|&i| inner.feature_names()[i].clone())
            .collect();
        let mut shape = inner.shape().clone();
        let mut dropped: Vec<usize> = (0..n).filter(|&i| slots[i].is_some()).collect();
        dropped.reverse();
        for i in dropped {
            shape = shape.without(i);
        }
        let label = format!("{}|restricted", inner.name());
        Ok(Self {
            inner,
            fixed: slots,
            free,
            names,
            shape,
            label,
        })
    }

    /// Keeps only the named features, freezing the rest at `at`'s values.
    pub fn keep(inner: M, keep: &[&str], at: &FeatureVector) -> Result<Self> {
        at.ensure_names(inner.feature_names())?;
        for k in keep {
            if at.index_of(k).is_none() {
                return contract(format!("unknown feature {k:?}"));
            }
        }
        let fixed: Vec<(usize, f64)> = at
            .names()
            .iter()
            .enumerate()
            .filter(|(_, n)| !keep.contains(&n.as_str()))
            .map(|(i, _)| (i, at.values()[i]))
            .collect();
        Self::new(inner, &fixed)
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut it = x.iter();
        self.fixed
            .iter()
            .map(|slot| match slot {
                Some(v) => *v,
                None => *it.next().expect("arity checked"),
            })
            .collect()
    }
}

impl<M: PricingModel> PricingModel for Restricted<M> {
    fn name(&self) -> &str {
        &self.label
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_arity(self, x)?;
        self.inner.evaluate(&self.expand(x))
    }
    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self, x)?;
        let full = self.inner.gradient(&self.expand(x))?;
        Ok(self.free.iter().map(|&i| full[i]).collect())
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}

/// Appends a feature the model never reads.
#[derive(Debug, Clone)]
pub struct WithDummy<M> {
    inner: M,
    names: Vec<String>,
    shape: ShapeProfile,
    label: String,
}

impl<M: PricingModel> WithDummy<M> {
    pub fn new(inner: M, dummy_name: &str) -> Result<Self> {
        if inner.feature_names().iter().any(|n| n == dummy_name) {
            return contract(format!("feature {dummy_name:?} already exists"));
        }
        let mut names = inner.feature_names().to_vec();
        names.push(dummy_name.to_string());
        let mut shape = inner.shape().clone();
        shape.curvature.push(Default::default());
        let label = format!("{}+{dummy_name}", inner.name());
        Ok(Self {
            inner,
            names,
            shape,
            label,
        })
    }
}

impl<M: PricingModel> PricingModel for WithDummy<M> {
    fn name(&self) -> &str {
        &self.label
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_arity(self, x)?;
        self.inner.evaluate(&x[..x.len() - 1])
    }
    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self, x)?;
        let mut g = self.inner.gradient(&x[..x.len() - 1])?;
        g.push(0.0);
        Ok(g)
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}

/// `sum_k w_k * f_k(x)` over models sharing one feature list.
#[derive(Clone)]
pub struct LinearCombination {
    terms: Vec<(f64, Arc<dyn PricingModel>)>,
    names: Vec<String>,
    shape: ShapeProfile,
    label: String,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn PricingModel>)>, shape: ShapeProfile) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return contract("linear combination needs at least one term");
        };
        let names = first.feature_names().to_vec();
        for (w, m) in &terms {
            if m.feature_names() != names.as_slice() {
                return contract(format!(
                    "{} has features {:?}, expected {:?}",
                    m.name(),
                    m.feature_names(),
                    names
                ));
            }
            if !w.is_finite() {
                return contract("non-finite combination weight");
            }
        }
        shape.validate(names.len())?;
        let label = terms
            .iter()
            .map(|(w, m)| format!("{w}*{}", m.name()))
            .collect::<Vec<_>>()
            .join(" + ");
        Ok(Self {
            terms,
            names,
            shape,
            label,
        })
    }
}

impl PricingModel for LinearCombination {
    fn name(&self) -> &str {
        &self.label
    }
    fn feature_names(&self) -> &[String] {
        &self.names
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (w, m) in &self.terms {
            total += w * m.evaluate(x)?;
        }
        Ok(total)
    }
    fn has_gradient(&self) -> bool {
        self.terms.iter().all(|(_, m)| m.has_gradient())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; x.len()];
        for (w, m) in &self.terms {
            for (t, g) in total.iter_mut().zip(m.gradient(x)?) {
                *t += w * g;
            }
        }
        Ok(total)
    }
    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}
