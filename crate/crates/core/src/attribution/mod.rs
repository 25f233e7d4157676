//! Baseline attribution methods: exact Baseline Shapley and Integrated
//! Gradients, plus the closed-form IG of the zero-coupon bond.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AttributionResult, FeatureVector, Method};
use crate::pricing::PricingModel;

mod bshap;
mod ig;
pub mod quadrature;

pub use bshap::{bshap, MAX_BSHAP_FEATURES};
pub use ig::{ig_bond_closed_form, integrated_gradients};
pub use quadrature::{QuadratureConfig, QuadratureRule};

/// A method together with its settings; what the audit harness calls to
/// produce attributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attributor {
    pub method: Method,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl Attributor {
    pub fn bshap() -> Self {
        Self {
            method: Method::BShap,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn ig(quadrature: QuadratureConfig) -> Self {
        Self {
            method: Method::IntegratedGradients,
            quadrature,
        }
    }

    pub fn attribute(
        &self,
        model: &dyn PricingModel,
        explicand: &FeatureVector,
        baseline: &FeatureVector,
    ) -> Result<AttributionResult> {
        match self.method {
            Method::BShap => bshap(model, explicand, baseline),
            Method::IntegratedGradients => {
                integrated_gradients(model, explicand, baseline, &self.quadrature)
            }
        }
    }
}

fn check_inputs(
    model: &dyn PricingModel,
    explicand: &FeatureVector,
    baseline: &FeatureVector,
) -> Result<()> {
    explicand.ensure_aligned(baseline)?;
    explicand.ensure_names(model.feature_names())
}

/// Runs the model, tagging any failure with the point it was evaluated at.
fn eval_at(model: &dyn PricingModel, x: &[f64]) -> Result<f64> {
    let value = model.evaluate(x).map_err(|e| tag_point(e, x))?;
    if !value.is_finite() {
        return Err(Error::ModelEvaluation {
            point: x.to_vec(),
            reason: format!("non-finite output {value}"),
        });
    }
    Ok(value)
}

fn tag_point(e: Error, x: &[f64]) -> Error {
    match e {
        Error::ModelEvaluation { .. } | Error::GradientUnavailable => e,
        other => Error::ModelEvaluation {
            point: x.to_vec(),
            reason: other.to_string(),
        },
    }
}
