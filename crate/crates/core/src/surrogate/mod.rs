//! Feed-forward ReLU network used as a learned option pricer.
//!
//! Inputs and the output are z-scored with training-split statistics; the
//! scaling is folded into [`MlpSurrogate::forward`] and
//! [`MlpSurrogate::input_gradient`], so callers work in raw units.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::features::{FeatureVector, ShapeProfile};
use crate::pricing::bsm::{option_shape, OptionKind, OPTION_FEATURES};
use crate::pricing::PricingModel;

mod data;
mod train;

pub use data::{synthetic_option_records, SyntheticSpec};
pub use train::{train_mlp, train_surrogate, Optimizer, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawMlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    output_mean: f64,
    output_std: f64,
    feature_names: Vec<String>,
    #[serde(default)]
    kind: Option<OptionKind>,
}

/// ReLU hidden layers, identity output. Weight matrices are row-major
/// `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp", into = "RawMlp")]
pub struct MlpSurrogate {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    output_mean: f64,
    output_std: f64,
    feature_names: Vec<String>,
    kind: Option<OptionKind>,
    name: String,
    shape: ShapeProfile,
}

impl TryFrom<RawMlp> for MlpSurrogate {
    type Error = crate::Error;

    fn try_from(raw: RawMlp) -> Result<Self> {
        let sizes = &raw.layer_sizes;
        if sizes.len() < 2 || sizes.contains(&0) {
            return contract(format!("invalid layer sizes {sizes:?}"));
        }
        if *sizes.last().unwrap() != 1 {
            return contract("the output layer must have one unit");
        }
        let layers = sizes.len() - 1;
        if raw.weights.len() != layers || raw.biases.len() != layers {
            return contract(format!(
                "expected {layers} weight matrices and bias vectors"
            ));
        }
        for l in 0..layers {
            if raw.weights[l].len() != sizes[l] * sizes[l + 1]
                || raw.biases[l].len() != sizes[l + 1]
            {
                return contract(format!("layer {l} parameters do not match sizes {sizes:?}"));
            }
        }
        let n_in = sizes[0];
        if raw.input_mean.len() != n_in
            || raw.input_std.len() != n_in
            || raw.feature_names.len() != n_in
        {
            return contract("standardization and feature names must match the input size");
        }
        let params = raw.weights.iter().chain(&raw.biases).flatten();
        let scales = raw
            .input_mean
            .iter()
            .chain(&raw.input_std)
            .chain([&raw.output_mean, &raw.output_std]);
        if params.chain(scales).any(|v| !v.is_finite()) {
            return contract("network parameters must be finite");
        }
        if raw
            .input_std
            .iter()
            .chain([&raw.output_std])
            .any(|s| *s <= 0.0)
        {
            return contract("standard deviations must be positive");
        }
        let shape = match raw.kind {
            Some(kind)
                if raw
                    .feature_names
                    .iter()
                    .map(String::as_str)
                    .eq(OPTION_FEATURES) =>
            {
                option_shape(kind)
            }
            _ => ShapeProfile::unconstrained(n_in),
        };
        let name = match raw.kind {
            Some(kind) => format!("mlp-{}", kind.as_str()),
            None => "mlp".to_string(),
        };
        Ok(Self {
            layer_sizes: raw.layer_sizes,
            weights: raw.weights,
            biases: raw.biases,
            input_mean: raw.input_mean,
            input_std: raw.input_std,
            output_mean: raw.output_mean,
            output_std: raw.output_std,
            feature_names: raw.feature_names,
            kind: raw.kind,
            name,
            shape,
        })
    }
}

impl From<MlpSurrogate> for RawMlp {
    fn from(m: MlpSurrogate) -> Self {
        RawMlp {
            layer_sizes: m.layer_sizes,
            weights: m.weights,
            biases: m.biases,
            input_mean: m.input_mean,
            input_std: m.input_std,
            output_mean: m.output_mean,
            output_std: m.output_std,
            feature_names: m.feature_names,
            kind: m.kind,
        }
    }
}

impl MlpSurrogate {
    /// A network with identity standardization.
    pub fn new<S: Into<String>>(
        feature_names: impl IntoIterator<Item = S>,
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let feature_names: Vec<String> = feature_names.into_iter().map(Into::into).collect();
        let n = feature_names.len();
        RawMlp {
            layer_sizes,
            weights,
            biases,
            input_mean: vec![0.0; n],
            input_std: vec![1.0; n],
            output_mean: 0.0,
            output_std: 1.0,
            feature_names,
            kind: None,
        }
        .try_into()
    }

    /// Sets the input and output z-score statistics.
    pub fn with_standardization(
        self,
        input_mean: Vec<f64>,
        input_std: Vec<f64>,
        output_mean: f64,
        output_std: f64,
    ) -> Result<Self> {
        let mut raw = RawMlp::from(self);
        raw.input_mean = input_mean;
        raw.input_std = input_std;
        raw.output_mean = output_mean;
        raw.output_std = output_std;
        raw.try_into()
    }

    /// Tags the network as a call or put pricer over `(S, r, tau, K, sigma)`,
    /// which gives it that option's declared shape.
    pub fn with_kind(self, kind: OptionKind) -> Result<Self> {
        let mut raw = RawMlp::from(self);
        raw.kind = Some(kind);
        raw.try_into()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn kind(&self) -> Option<OptionKind> {
        self.kind
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layer_sizes[0] {
            return contract(format!(
                "network expects {} inputs, got {}",
                self.layer_sizes[0],
                x.len()
            ));
        }
        Ok(x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    /// Pre-activations of every layer for standardized input `z`.
    fn pre_activations(&self, z: Vec<f64>) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut out = Vec::with_capacity(layers);
        let mut h = z;
        for l in 0..layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let a: Vec<f64> = (0..n_out)
                .map(|j| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    self.biases[l][j] + row.iter().zip(&h).map(|(wi, hi)| wi * hi).sum::<f64>()
                })
                .collect();
            h = if l + 1 < layers {
                a.iter().map(|v| v.max(0.0)).collect()
            } else {
                a.clone()
            };
            out.push(a);
        }
        out
    }

    /// Network output in raw price units.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardize(x)?;
        let pre = self.pre_activations(z);
        Ok(pre.last().unwrap()[0] * self.output_std + self.output_mean)
    }

    /// `df/dx` by backpropagation; ReLU has derivative 0 at the kink.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardize(x)?;
        let pre = self.pre_activations(z);
        let layers = self.weights.len();
        let mut delta = vec![1.0];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let mut back = vec![0.0; n_in];
            for (j, dj) in delta.iter().enumerate().take(n_out) {
                if *dj == 0.0 {
                    continue;
                }
                for (b, wi) in back.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *b += dj * wi;
                }
            }
            if l > 0 {
                for (b, a) in back.iter_mut().zip(&pre[l - 1]) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        Ok(delta
            .iter()
            .zip(&self.input_std)
            .map(|(d, s)| d * self.output_std / s)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::records::to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::records::write_json(self, path)
    }
}

pub fn mlp_forward(model: &MlpSurrogate, x: &FeatureVector) -> Result<f64> {
    x.ensure_names(&model.feature_names)?;
    model.forward(x.values())
}

pub fn mlp_input_gradient(model: &MlpSurrogate, x: &FeatureVector) -> Result<Vec<f64>> {
    x.ensure_names(&model.feature_names)?;
    model.input_gradient(x.values())
}

impl PricingModel for MlpSurrogate {
    fn name(&self) -> &str {
        &self.name
    }

    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.input_gradient(x)
    }

    fn shape(&self) -> &ShapeProfile {
        &self.shape
    }
}
