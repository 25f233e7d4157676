//! Baseline Shapley and Integrated Gradients attributions for asset-pricing
//! models, plus a grid-based harness that checks whether those attributions
//! respect the risk structure (monotonicity, curvature, dominance, training
//! domain) the underlying pricing model is known to have.

pub mod attribution;
pub mod audit;
pub mod error;
pub mod features;
pub mod pricing;
pub mod records;
pub mod surrogate;

pub use error::{Error, Result};
pub use features::{
    coalition_substitute, shapley_weight, AttributionResult, Coalition, Curvature, Direction,
    FeatureVector, Method, ShapeProfile,
};
pub use pricing::PricingModel;
