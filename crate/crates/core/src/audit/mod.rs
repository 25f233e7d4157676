//! Grid-based checks that an attribution method respects a model's declared
//! risk structure.
//!
//! Every axiom quantified over all explicands is tested on a finite grid, so
//! a `pass` verdict means "no violation found on this grid". Violations carry
//! witnesses: the points involved, the attributions computed there and the
//! margin by which the inequality failed. Margins always exceed the
//! tolerance recorded in the report.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::features::{FeatureVector, Method};

mod checks;
pub mod domain;
pub mod leverage;

pub use checks::{
    check_aim, check_dim, check_fmd, check_generalized_dummy, check_marginal, FmdGrid,
    SharedFeatureMap,
};
pub use domain::{check_cg, fit_domain, DomainMode, TrainingDomain};
pub use leverage::{generate_leverage_data, LeverageSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Axiom {
    Aim,
    Dim,
    Dme,
    Rdme,
    Ime,
    Fmd,
    Gd,
    Cg,
}

impl Axiom {
    pub fn label(self) -> &'static str {
        match self {
            Axiom::Aim => "AIM",
            Axiom::Dim => "DIM",
            Axiom::Dme => "DME",
            Axiom::Rdme => "RDME",
            Axiom::Ime => "IME",
            Axiom::Fmd => "FMD",
            Axiom::Gd => "GD",
            Axiom::Cg => "CG",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Axiom {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "aim" => Axiom::Aim,
            "dim" => Axiom::Dim,
            "dme" => Axiom::Dme,
            "rdme" => Axiom::Rdme,
            "ime" => Axiom::Ime,
            "fmd" => Axiom::Fmd,
            "gd" | "dummy" => Axiom::Gd,
            "cg" => Axiom::Cg,
            other => return contract(format!("unknown axiom {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Violated,
    NotApplicable,
}

/// Violations must exceed `max(abs, rel * scale)`, where the scale is the
/// largest magnitude among the quantities compared in that report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-8,
            rel: 1e-6,
        }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn resolve(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub points: Vec<Vec<f64>>,
    pub attributions: Vec<f64>,
    pub margin: f64,
    pub detail: String,
}

/// The grid a report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub feature: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    pub context: Vec<f64>,
    pub baseline: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub method: Method,
    pub model: String,
    pub feature: Option<String>,
    pub verdict: Verdict,
    pub tolerance_used: f64,
    pub checks: usize,
    pub witnesses: Vec<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grids: Vec<GridSummary>,
}

impl AxiomReport {
    pub fn violated(&self) -> bool {
        self.verdict == Verdict::Violated
    }
}

/// One report per (axiom, method, model) run, serialized as
/// `{"reports": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub reports: Vec<AxiomReport>,
}

impl ReportBundle {
    pub fn push(&mut self, report: AxiomReport) {
        self.reports.push(report);
    }

    pub fn any_violation(&self) -> bool {
        self.reports.iter().any(AxiomReport::violated)
    }

    /// Verdict counts keyed by axiom label, for log lines.
    pub fn tally(&self) -> BTreeMap<String, [usize; 3]> {
        let mut out: BTreeMap<String, [usize; 3]> = BTreeMap::new();
        for r in &self.reports {
            let slot = match r.verdict {
                Verdict::Pass => 0,
                Verdict::Violated => 1,
                Verdict::NotApplicable => 2,
            };
            out.entry(format!("{}/{}", r.axiom, r.method)).or_default()[slot] += 1;
        }
        out
    }
}

/// Explicands along one feature with the others frozen at `context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub feature: usize,
    pub values: Vec<f64>,
    pub context: FeatureVector,
    pub baseline: FeatureVector,
    /// Increments for DIM probing; empty means consecutive grid values.
    #[serde(default)]
    pub deltas: Vec<f64>,
}

impl AuditGrid {
    pub fn new(
        feature: usize,
        values: Vec<f64>,
        context: FeatureVector,
        baseline: FeatureVector,
    ) -> Result<Self> {
        let grid = Self {
            feature,
            values,
            context,
            baseline,
            deltas: Vec::new(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Evenly spaced grid of `count` values over `[lo, hi]`.
    pub fn linspace(
        feature: usize,
        lo: f64,
        hi: f64,
        count: usize,
        context: FeatureVector,
        baseline: FeatureVector,
    ) -> Result<Self> {
        if count < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return contract(format!(
                "grid needs count >= 2 and lo < hi (got {lo}..{hi} x{count})"
            ));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let values = (0..count).map(|i| lo + step * i as f64).collect();
        Self::new(feature, values, context, baseline)
    }

    pub fn with_deltas(mut self, deltas: Vec<f64>) -> Result<Self> {
        self.deltas = deltas;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.context.ensure_aligned(&self.baseline)?;
        if self.feature >= self.context.len() {
            return contract(format!(
                "grid feature {} outside 0..{}",
                self.feature,
                self.context.len()
            ));
        }
        if self.values.is_empty() {
            return contract("grid has no values");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return contract("grid values must be finite");
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return contract("grid values must be strictly ascending");
        }
        if self.deltas.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return contract("DIM deltas must be positive");
        }
        Ok(())
    }

    pub fn feature_name(&self) -> &str {
        &self.context.names()[self.feature]
    }

    pub fn baseline_value(&self) -> f64 {
        self.baseline.values()[self.feature]
    }

    pub fn explicand(&self, value: f64) -> Result<FeatureVector> {
        self.context.with_value(self.feature, value)
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            feature: self.feature_name().to_string(),
            values: self.values.clone(),
            deltas: self.deltas.clone(),
            context: self.context.values().to_vec(),
            baseline: self.baseline.values().to_vec(),
        }
    }
}

/// Collects candidate violations and settles the tolerance once the scale of
/// the compared quantities is known.
pub(crate) struct ReportBuilder {
    axiom: Axiom,
    method: Method,
    model: String,
    feature: Option<String>,
    checks: usize,
    scale: f64,
    candidates: Vec<Witness>,
    notes: Vec<String>,
    grids: Vec<GridSummary>,
}

impl ReportBuilder {
    pub(crate) fn new(axiom: Axiom, method: Method, model: &str) -> Self {
        Self {
            axiom,
            method,
            model: model.to_string(),
            feature: None,
            checks: 0,
            scale: 0.0,
            candidates: Vec::new(),
            notes: Vec::new(),
            grids: Vec::new(),
        }
    }

    pub(crate) fn feature(&mut self, name: &str) {
        match &self.feature {
            None if self.grids.is_empty() => self.feature = Some(name.to_string()),
            Some(f) if f == name => {}
            _ => self.feature = None,
        }
    }

    pub(crate) fn grid(&mut self, grid: GridSummary) {
        self.grids.push(grid);
    }

    pub(crate) fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub(crate) fn observe(&mut self, values: &[f64]) {
        for v in values {
            self.scale = self.scale.max(v.abs());
        }
    }

    /// Records one comparison; positive `margin` is the amount by which the
    /// required inequality fails.
    pub(crate) fn compare(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.checks += 1;
        if margin > 0.0 {
            let mut w = witness();
            w.margin = margin;
            self.candidates.push(w);
        }
    }

    pub(crate) fn not_applicable(mut self, reason: impl Into<String>) -> AxiomReport {
        self.notes.push(reason.into());
        AxiomReport {
            axiom: self.axiom,
            method: self.method,
            model: self.model,
            feature: self.feature,
            verdict: Verdict::NotApplicable,
            tolerance_used: 0.0,
            checks: self.checks,
            witnesses: Vec::new(),
            notes: self.notes,
            grids: self.grids,
        }
    }

    pub(crate) fn finish(self, tol: Tolerance) -> AxiomReport {
        let tolerance_used = tol.resolve(self.scale);
        self.finish_with(tolerance_used)
    }

    pub(crate) fn finish_with(self, tolerance_used: f64) -> AxiomReport {
        let witnesses: Vec<Witness> = self
            .candidates
            .into_iter()
            .filter(|w| w.margin > tolerance_used)
            .collect();
        let verdict = if witnesses.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Violated
        };
        AxiomReport {
            axiom: self.axiom,
            method: self.method,
            model: self.model,
            feature: self.feature,
            verdict,
            tolerance_used,
            checks: self.checks,
            witnesses,
            notes: self.notes,
            grids: self.grids,
        }
    }
}
