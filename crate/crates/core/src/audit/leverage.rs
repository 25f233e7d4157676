//! Synthetic (spot, volatility) clouds with a negative rank correlation, the
//! shape a training set takes under the leverage effect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::features::FeatureVector;
use crate::pricing::norm_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageSpec {
    pub n_points: usize,
    pub s_range: (f64, f64),
    pub sigma_range: (f64, f64),
    /// Target Spearman correlation, in (-1, 0).
    pub correlation: f64,
    pub seed: u64,
    /// Further features sampled uniformly and independently.
    #[serde(default)]
    pub extra: Vec<(String, (f64, f64))>,
}

impl LeverageSpec {
    pub fn new(
        n_points: usize,
        s_range: (f64, f64),
        sigma_range: (f64, f64),
        correlation: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_points,
            s_range,
            sigma_range,
            correlation,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with_extra(mut self, name: impl Into<String>, range: (f64, f64)) -> Self {
        self.extra.push((name.into(), range));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 10 {
            return contract(format!("need at least 10 points (got {})", self.n_points));
        }
        if !(self.correlation > -1.0 && self.correlation < 0.0) {
            return contract(format!(
                "correlation must lie in (-1, 0) (got {})",
                self.correlation
            ));
        }
        let ranges = [self.s_range, self.sigma_range]
            .into_iter()
            .chain(self.extra.iter().map(|(_, r)| *r));
        for (lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return contract(format!("empty range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// Samples `(S, sigma, extra...)` points through a Gaussian copula whose
/// Pearson parameter `2 sin(pi rho_s / 6)` gives the requested Spearman
/// correlation, with uniform marginals on the given ranges.
pub fn generate_leverage_data(spec: &LeverageSpec) -> Result<Vec<FeatureVector>> {
    spec.validate()?;
    let rho = 2.0 * (std::f64::consts::PI * spec.correlation / 6.0).sin();
    let tail = (1.0 - rho * rho).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names: Vec<String> = ["S", "sigma"]
        .into_iter()
        .map(String::from)
        .chain(spec.extra.iter().map(|(n, _)| n.clone()))
        .collect();
    let scale = |(lo, hi): (f64, f64), u: f64| lo + u * (hi - lo);

    let mut out = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w = rho * z1 + tail * z2;
        let mut values = vec![
            scale(spec.s_range, norm_cdf(z1)),
            scale(spec.sigma_range, norm_cdf(w)),
        ];
        for (_, range) in &spec.extra {
            values.push(scale(*range, rng.random::<f64>()));
        }
        out.push(FeatureVector::new(names.clone(), values)?);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        for (rank, i) in idx.into_iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    let var: f64 = rx.iter().map(|a| (a - mean) * (a - mean)).sum();
    cov / var
}
