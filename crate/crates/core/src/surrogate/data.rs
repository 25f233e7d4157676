//! Synthetic option datasets priced with Black–Scholes–Merton.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::pricing::bsm::{bsm_price, OptionKind};
use crate::records::OptionRecord;

/// Uniform sampling ranges; strikes are drawn as `S * moneyness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub kind: OptionKind,
    pub s_range: (f64, f64),
    pub moneyness_range: (f64, f64),
    pub tau_range: (f64, f64),
    pub r_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            kind: OptionKind::Call,
            s_range: (1200.0, 1500.0),
            moneyness_range: (0.85, 1.15),
            tau_range: (0.1, 1.0),
            r_range: (0.01, 0.05),
            sigma_range: (0.15, 0.45),
            seed: 0,
        }
    }
}

pub fn synthetic_option_records(spec: &SyntheticSpec) -> Result<Vec<OptionRecord>> {
    let ranges = [
        spec.s_range,
        spec.moneyness_range,
        spec.tau_range,
        spec.r_range,
        spec.sigma_range,
    ];
    if ranges
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return contract("synthetic ranges need finite lo <= hi");
    }
    if spec.s_range.0 <= 0.0
        || spec.moneyness_range.0 <= 0.0
        || spec.tau_range.0 <= 0.0
        || spec.sigma_range.0 <= 0.0
    {
        return contract("S, moneyness, tau and sigma ranges must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |(lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let s = draw(spec.s_range);
        let k = s * draw(spec.moneyness_range);
        let tau = draw(spec.tau_range);
        let r = draw(spec.r_range);
        let sigma = draw(spec.sigma_range);
        out.push(OptionRecord {
            s,
            r,
            tau,
            k,
            sigma,
            price: bsm_price(s, k, r, tau, sigma, spec.kind)?,
            kind: spec.kind,
            date: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prices_match_the_formula_and_repeat() {
        let spec = SyntheticSpec {
            n: 20,
            kind: OptionKind::Put,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let a = synthetic_option_records(&spec).unwrap();
        assert_eq!(a, synthetic_option_records(&spec).unwrap());
        for r in &a {
            assert_eq!(
                r.price,
                bsm_price(r.s, r.k, r.r, r.tau, r.sigma, OptionKind::Put).unwrap()
            );
            assert!((0.85..=1.15).contains(&(r.k / r.s)));
        }
    }
}
