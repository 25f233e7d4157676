//! Shared domain types: named feature vectors, coalitions, declared shape
//! constraints and attribution results.
//!
//! The coalition-substitution primitive lives here as well, since both the
//! Shapley enumeration and the audit harness build evaluation points from it.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Largest feature count for which coalitions are represented.
pub const MAX_COALITION_FEATURES: usize = 64;

/// An ordered, named real vector. Explicands, baselines and model evaluation
/// points are all carried as `FeatureVector`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureVector")]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<Vec<Option<String>>>,
}

#[derive(Deserialize)]
struct RawFeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
    #[serde(default)]
    units: Option<Vec<Option<String>>>,
}

impl TryFrom<RawFeatureVector> for FeatureVector {
    type Error = Error;

    fn try_from(raw: RawFeatureVector) -> Result<Self> {
        let mut fv = FeatureVector::new(raw.names, raw.values)?;
        if let Some(units) = raw.units {
            fv = fv.with_units(units)?;
        }
        Ok(fv)
    }
}

impl FeatureVector {
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != values.len() {
            return contract(format!("{} names but {} values", names.len(), values.len()));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return contract(format!("duplicate feature name {name:?}"));
            }
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return contract(format!("feature {:?} is not finite ({v})", names[i]));
        }
        Ok(Self {
            names,
            values,
            units: None,
        })
    }

    pub fn with_units(mut self, units: Vec<Option<String>>) -> Result<Self> {
        if units.len() != self.values.len() {
            return contract("unit list length differs from feature count");
        }
        self.units = Some(units);
        Ok(self)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn units(&self) -> Option<&[Option<String>]> {
        self.units.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy of `self` with feature `i` replaced by `value`.
    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        if i >= self.len() {
            return contract(format!("feature index {i} out of range for {}", self.len()));
        }
        if !value.is_finite() {
            return contract(format!(
                "feature {:?} set to non-finite {value}",
                self.names[i]
            ));
        }
        let mut out = self.clone();
        out.values[i] = value;
        Ok(out)
    }

    /// Same names, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = FeatureVector::new(self.names.clone(), values)?;
        out.units = self.units.clone();
        Ok(out)
    }

    /// Drops feature `i`, keeping the remaining order.
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return contract(format!("feature index {i} out of range for {}", self.len()));
        }
        let mut out = self.clone();
        out.names.remove(i);
        out.values.remove(i);
        if let Some(units) = out.units.as_mut() {
            units.remove(i);
        }
        Ok(out)
    }

    /// Fails unless `other` carries the same feature names in the same order.
    pub fn ensure_aligned(&self, other: &FeatureVector) -> Result<()> {
        if self.names != other.names {
            return contract(format!(
                "feature lists differ: {:?} vs {:?}",
                self.names, other.names
            ));
        }
        Ok(())
    }

    pub fn ensure_names(&self, names: &[String]) -> Result<()> {
        if self.names != names {
            return contract(format!(
                "feature lists differ: {:?} vs {:?}",
                self.names, names
            ));
        }
        Ok(())
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (n, v)) in self.names.iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        write!(f, ")")
    }
}

/// A set of feature indices drawn from `0..n`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    mask: u64,
    n: usize,
}

impl Coalition {
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_mask(0, n)
    }

    pub fn full(n: usize) -> Result<Self> {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self::from_mask(mask, n)
    }

    pub fn from_mask(mask: u64, n: usize) -> Result<Self> {
        if n > MAX_COALITION_FEATURES {
            return Err(Error::SizeLimit {
                n,
                limit: MAX_COALITION_FEATURES,
            });
        }
        if n < 64 && mask >> n != 0 {
            return contract(format!(
                "coalition mask {mask:#b} has members outside 0..{n}"
            ));
        }
        Ok(Self { mask, n })
    }

    pub fn from_members(n: usize, members: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &i in members {
            if i >= n {
                return contract(format!("coalition member {i} outside 0..{n}"));
            }
            if mask & (1 << i) != 0 {
                return contract(format!("coalition member {i} listed twice"));
            }
            mask |= 1 << i;
        }
        Self::from_mask(mask, n)
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.mask & (1 << i) != 0
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }
}

/// Sign of a declared monotone relationship.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

/// Declared second-order shape for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    #[default]
    None,
    /// Increasing and concave.
    Dme,
    /// Increasing and convex.
    Ime,
    /// Decreasing and convex.
    Rdme,
}

/// Monotone directions and curvature flags a model declares for its features.
/// Auditors only test axioms on features whose shape makes them applicable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShapeProfile {
    pub monotone_increasing: BTreeSet<usize>,
    pub monotone_decreasing: BTreeSet<usize>,
    pub curvature: Vec<Curvature>,
}

impl ShapeProfile {
    pub fn unconstrained(n: usize) -> Self {
        Self {
            monotone_increasing: BTreeSet::new(),
            monotone_decreasing: BTreeSet::new(),
            curvature: vec![Curvature::None; n],
        }
    }

    pub fn increasing(mut self, i: usize) -> Self {
        self.monotone_increasing.insert(i);
        self
    }

    pub fn decreasing(mut self, i: usize) -> Self {
        self.monotone_decreasing.insert(i);
        self
    }

    pub fn with_curvature(mut self, i: usize, c: Curvature) -> Self {
        if i >= self.curvature.len() {
            self.curvature.resize(i + 1, Curvature::None);
        }
        self.curvature[i] = c;
        self
    }

    pub fn direction(&self, i: usize) -> Option<Direction> {
        if self.monotone_increasing.contains(&i) {
            Some(Direction::Increasing)
        } else if self.monotone_decreasing.contains(&i) {
            Some(Direction::Decreasing)
        } else {
            None
        }
    }

    pub fn curvature(&self, i: usize) -> Curvature {
        self.curvature.get(i).copied().unwrap_or_default()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.curvature.len() != n {
            return contract(format!(
                "shape profile has {} curvature flags for {n} features",
                self.curvature.len()
            ));
        }
        for i in self
            .monotone_increasing
            .iter()
            .chain(&self.monotone_decreasing)
        {
            if *i >= n {
                return contract(format!("monotone feature index {i} outside 0..{n}"));
            }
        }
        if let Some(i) = self
            .monotone_increasing
            .intersection(&self.monotone_decreasing)
            .next()
        {
            return contract(format!(
                "feature {i} declared both increasing and decreasing"
            ));
        }
        for (i, c) in self.curvature.iter().enumerate() {
            let needed = match c {
                Curvature::None => continue,
                Curvature::Dme | Curvature::Ime => Direction::Increasing,
                Curvature::Rdme => Direction::Decreasing,
            };
            if self.direction(i) != Some(needed) {
                return contract(format!(
                    "feature {i} flagged {c:?} but not monotone {needed:?}"
                ));
            }
        }
        Ok(())
    }

    /// Profile for a model with feature `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let shift = |set: &BTreeSet<usize>| {
            set.iter()
                .filter(|&&j| j != i)
                .map(|&j| if j > i { j - 1 } else { j })
                .collect()
        };
        let mut curvature = self.curvature.clone();
        if i < curvature.len() {
            curvature.remove(i);
        }
        Self {
            monotone_increasing: shift(&self.monotone_increasing),
            monotone_decreasing: shift(&self.monotone_decreasing),
            curvature,
        }
    }
}

/// Attribution method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "bshap")]
    BShap,
    #[serde(rename = "ig")]
    IntegratedGradients,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::BShap => "bshap",
            Method::IntegratedGradients => "ig",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bshap" | "shapley" => Ok(Method::BShap),
            "ig" | "integrated-gradients" => Ok(Method::IntegratedGradients),
            other => contract(format!("unknown attribution method {other:?}")),
        }
    }
}

/// Per-feature attributions together with everything needed to audit them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub method: Method,
    pub attributions: Vec<f64>,
    pub explicand: FeatureVector,
    pub baseline: FeatureVector,
    pub f_explicand: f64,
    pub f_baseline: f64,
    /// `sum(attributions) - (f(explicand) - f(baseline))`.
    pub completeness_residual: f64,
    /// Points at which the model was evaluated (corners for BShap, path
    /// nodes for IG).
    pub evaluation_points: Vec<Vec<f64>>,
    pub n_model_evals: usize,
    /// Largest attribution change when the quadrature is re-run at twice the
    /// node count; only set when the refinement check was requested.
    pub refinement_delta: Option<f64>,
}

impl AttributionResult {
    pub fn names(&self) -> &[String] {
        self.explicand.names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.explicand.index_of(name).map(|i| self.attributions[i])
    }

    pub fn delta_f(&self) -> f64 {
        self.f_explicand - self.f_baseline
    }

    /// Residual divided by `max(1, |f(explicand) - f(baseline)|)`.
    pub fn relative_residual(&self) -> f64 {
        self.completeness_residual.abs() / self.delta_f().abs().max(1.0)
    }

    pub fn summary(&self) -> AttributionSummary {
        AttributionSummary {
            method: self.method,
            features: self.names().to_vec(),
            attributions: self.attributions.clone(),
            explicand: self.explicand.values().to_vec(),
            baseline: self.baseline.values().to_vec(),
            f_explicand: self.f_explicand,
            f_baseline: self.f_baseline,
            completeness_residual: self.completeness_residual,
            n_model_evals: self.n_model_evals,
            refinement_delta: self.refinement_delta,
        }
    }
}

/// Serialized form of an [`AttributionResult`] (evaluation points omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub method: Method,
    pub features: Vec<String>,
    pub attributions: Vec<f64>,
    pub explicand: Vec<f64>,
    pub baseline: Vec<f64>,
    pub f_explicand: f64,
    pub f_baseline: f64,
    pub completeness_residual: f64,
    pub n_model_evals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_delta: Option<f64>,
}

/// Splices explicand coordinates for members of `s` with baseline
/// coordinates elsewhere: the argument of `v(S) = f(x̄_S; x'_{N∖S})`.
pub fn coalition_substitute(
    explicand: &FeatureVector,
    baseline: &FeatureVector,
    s: Coalition,
) -> Result<FeatureVector> {
    explicand.ensure_aligned(baseline)?;
    if s.n() != explicand.len() {
        return contract(format!(
            "coalition over {} features applied to {} features",
            s.n(),
            explicand.len()
        ));
    }
    let values = splice(explicand.values(), baseline.values(), s.mask());
    explicand.with_values(values)
}

pub(crate) fn splice(explicand: &[f64], baseline: &[f64], mask: u64) -> Vec<f64> {
    explicand
        .iter()
        .zip(baseline)
        .enumerate()
        .map(|(i, (&e, &b))| if mask & (1 << i) != 0 { e } else { b })
        .collect()
}

/// Shapley weight `|S|!(n-|S|-1)!/n!`, computed as `1 / (n * C(n-1, |S|))`.
/// The binomial is built as an incremental product, exact in `f64` for
/// `n <= 20`.
pub fn shapley_weight(subset_size: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return contract("shapley_weight needs at least one player");
    }
    if subset_size >= n {
        return contract(format!(
            "coalition size {subset_size} must be below n = {n}"
        ));
    }
    let m = n - 1;
    let k = subset_size.min(m - subset_size);
    let mut binom = 1.0f64;
    for j in 0..k {
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    Ok(1.0 / (n as f64 * binom.round()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: [f64; 2], b: [f64; 2]) -> (FeatureVector, FeatureVector) {
        (
            FeatureVector::new(["x1", "x2"], a.to_vec()).unwrap(),
            FeatureVector::new(["x1", "x2"], b.to_vec()).unwrap(),
        )
    }

    #[test]
    fn substitute_matches_two_player_example() {
        let (e, b) = pair([3.5, -2.0], [0.0, 0.0]);
        let s = Coalition::from_members(2, &[0]).unwrap();
        let z = coalition_substitute(&e, &b, s).unwrap();
        assert_eq!(z.values(), &[3.5, 0.0]);
    }

    #[test]
    fn substitute_empty_and_full() {
        let (e, b) = pair([1.0, 2.0], [5.0, 6.0]);
        let empty = coalition_substitute(&e, &b, Coalition::empty(2).unwrap()).unwrap();
        let full = coalition_substitute(&e, &b, Coalition::full(2).unwrap()).unwrap();
        assert_eq!(empty, b);
        assert_eq!(full, e);
    }

    #[test]
    fn substitute_rejects_mismatched_names() {
        let e = FeatureVector::new(["a", "b"], vec![1.0, 2.0]).unwrap();
        let b = FeatureVector::new(["a", "c"], vec![1.0, 2.0]).unwrap();
        let err = coalition_substitute(&e, &b, Coalition::empty(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn feature_vector_invariants() {
        assert!(FeatureVector::new(["a", "a"], vec![1.0, 2.0]).is_err());
        assert!(FeatureVector::new(["a"], vec![1.0, 2.0]).is_err());
        assert!(FeatureVector::new(["a"], vec![f64::NAN]).is_err());
        let json = r#"{"names":["a","a"],"values":[1.0,2.0]}"#;
        assert!(serde_json::from_str::<FeatureVector>(json).is_err());
    }

    #[test]
    fn coalition_rejects_out_of_range_and_duplicates() {
        assert!(Coalition::from_members(3, &[3]).is_err());
        assert!(Coalition::from_members(3, &[1, 1]).is_err());
        assert_eq!(Coalition::full(4).unwrap().size(), 4);
    }

    #[test]
    fn shapley_weight_values() {
        assert_eq!(shapley_weight(0, 2).unwrap(), 0.5);
        // 2!·2!/5! = 4/120
        assert!((shapley_weight(2, 5).unwrap() - 1.0 / 30.0).abs() < 1e-16);
        assert!(shapley_weight(5, 5).is_err());
        assert!(shapley_weight(0, 0).is_err());
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|j| j as f64).product()
    }

    #[test]
    fn shapley_weight_matches_factorials_up_to_20() {
        for n in 1..=20 {
            for k in 0..n {
                let direct = factorial(k) * factorial(n - k - 1) / factorial(n);
                let w = shapley_weight(k, n).unwrap();
                assert!((w - direct).abs() <= 1e-14 * direct, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn weights_over_subsets_sum_to_one() {
        // Enumerate every subset of N \ {i} explicitly rather than using
        // binomial counts.
        for n in 1..=12usize {
            let i = n / 2;
            let mut total = 0.0;
            for mask in 0u64..(1 << n) {
                if mask & (1 << i) != 0 {
                    continue;
                }
                total += shapley_weight(mask.count_ones() as usize, n).unwrap();
            }
            assert!((total - 1.0).abs() < 1e-12, "n = {n}: {total}");
        }
    }

    #[test]
    fn shape_profile_validation() {
        let ok = ShapeProfile::unconstrained(2)
            .decreasing(0)
            .with_curvature(0, Curvature::Rdme)
            .increasing(1);
        ok.validate(2).unwrap();
        let bad = ShapeProfile::unconstrained(2).increasing(0).decreasing(0);
        assert!(bad.validate(2).is_err());
        let bad = ShapeProfile::unconstrained(2)
            .increasing(0)
            .with_curvature(0, Curvature::Rdme);
        assert!(bad.validate(2).is_err());
        let reduced = ok.without(0);
        assert_eq!(reduced.direction(0), Some(Direction::Increasing));
        reduced.validate(1).unwrap();
    }
}
