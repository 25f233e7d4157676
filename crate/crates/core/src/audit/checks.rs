//! Monotonicity, curvature, dominance and dummy axioms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attribution::Attributor;
use crate::error::{contract, Result};
use crate::features::{AttributionResult, Curvature, Direction, FeatureVector};
use crate::pricing::{finite_difference_gradient, PricingModel, Restricted};

use super::{AuditGrid, Axiom, AxiomReport, ReportBuilder, Tolerance, Witness};

/// Minimum gap above the baseline coordinate for ratio-based axioms.
const MIN_GAP: f64 = 1e-9;

/// Attributions along one grid, computed once per distinct feature value.
struct GridCache<'a> {
    att: &'a Attributor,
    model: &'a dyn PricingModel,
    grid: &'a AuditGrid,
    cache: BTreeMap<u64, AttributionResult>,
}

impl<'a> GridCache<'a> {
    fn new(att: &'a Attributor, model: &'a dyn PricingModel, grid: &'a AuditGrid) -> Self {
        Self {
            att,
            model,
            grid,
            cache: BTreeMap::new(),
        }
    }

    fn at(&mut self, value: f64) -> Result<&AttributionResult> {
        let key = value.to_bits();
        if !self.cache.contains_key(&key) {
            let explicand = self.grid.explicand(value)?;
            let res = self
                .att
                .attribute(self.model, &explicand, &self.grid.baseline)?;
            self.cache.insert(key, res);
        }
        Ok(&self.cache[&key])
    }

    fn feature_attr(&mut self, value: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let i = self.grid.feature;
        let res = self.at(value)?;
        Ok((
            res.attributions[i],
            res.explicand.values().to_vec(),
            res.attributions.clone(),
        ))
    }
}

fn check_grid(model: &dyn PricingModel, grid: &AuditGrid) -> Result<()> {
    grid.validate()?;
    grid.context.ensure_names(model.feature_names())
}

/// Average individual monotonicity: a feature declared monotone receives an
/// attribution whose sign agrees with the declared direction times the sign
/// of its move away from the baseline.
pub fn check_aim(
    att: &Attributor,
    model: &dyn PricingModel,
    grids: &[AuditGrid],
    tol: Tolerance,
) -> Result<AxiomReport> {
    let mut report = ReportBuilder::new(Axiom::Aim, att.method, model.name());
    let mut applicable = false;
    for grid in grids {
        check_grid(model, grid)?;
        report.feature(grid.feature_name());
        report.grid(grid.summary());
        let Some(dir) = model.shape().direction(grid.feature) else {
            report.note(format!("{} is not declared monotone", grid.feature_name()));
            continue;
        };
        applicable = true;
        let base = grid.baseline_value();
        let mut cache = GridCache::new(att, model, grid);
        for &v in &grid.values {
            if v == base {
                continue;
            }
            let (a, point, attrs) = cache.feature_attr(v)?;
            report.observe(&[a]);
            let expected_sign = dir.sign() * (v - base).signum();
            report.compare(-expected_sign * a, || Witness {
                points: vec![point, grid.baseline.values().to_vec()],
                attributions: attrs,
                margin: 0.0,
                detail: format!(
                    "{} = {v}: attribution {a} has the wrong sign for a {dir:?} feature",
                    grid.feature_name()
                ),
            });
        }
    }
    if !applicable {
        return Ok(report.not_applicable("no grid feature is declared monotone"));
    }
    Ok(report.finish(tol))
}

/// Demand individual monotonicity: raising a monotone feature moves its
/// attribution in the declared direction.
///
/// Pairs `(v, v + c)` come from `grid.deltas`, or from consecutive grid
/// values when no deltas are given. Only pairs with `v` at or above the
/// baseline coordinate are compared.
pub fn check_dim(
    att: &Attributor,
    model: &dyn PricingModel,
    grid: &AuditGrid,
    tol: Tolerance,
) -> Result<AxiomReport> {
    check_grid(model, grid)?;
    let mut report = ReportBuilder::new(Axiom::Dim, att.method, model.name());
    report.feature(grid.feature_name());
    report.grid(grid.summary());
    let Some(dir) = model.shape().direction(grid.feature) else {
        return Ok(
            report.not_applicable(format!("{} is not declared monotone", grid.feature_name()))
        );
    };

    let pairs: Vec<(f64, f64)> = if grid.deltas.is_empty() {
        grid.values.windows(2).map(|w| (w[0], w[1])).collect()
    } else {
        grid.values
            .iter()
            .flat_map(|&v| grid.deltas.iter().map(move |&c| (v, v + c)))
            .collect()
    };
    let base = grid.baseline_value();
    let (kept, skipped): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(lo, _)| *lo >= base);
    if !skipped.is_empty() {
        report.note(format!(
            "{} pair(s) below the baseline coordinate {base} skipped",
            skipped.len()
        ));
    }

    let mut cache = GridCache::new(att, model, grid);
    for (lo, hi) in kept {
        let (a_lo, p_lo, attrs_lo) = cache.feature_attr(lo)?;
        let (a_hi, p_hi, attrs_hi) = cache.feature_attr(hi)?;
        report.observe(&[a_lo, a_hi]);
        let margin = match dir {
            Direction::Increasing => a_lo - a_hi,
            Direction::Decreasing => a_hi - a_lo,
        };
        report.compare(margin, || Witness {
            points: vec![p_lo, p_hi],
            attributions: attrs_lo.into_iter().chain(attrs_hi).collect(),
            margin: 0.0,
            detail: format!(
                "{name}: A({lo}) = {a_lo}, A({hi}) = {a_hi}; a {dir:?} feature requires A to {} as it rises",
                if dir == Direction::Increasing { "not fall" } else { "not rise" },
                name = grid.feature_name(),
            ),
        });
    }
    Ok(report.finish(tol))
}

/// Diminishing / reverse-diminishing / increasing marginal effect: the
/// normalized attribution `A / (x - x')` is nonincreasing (DME) or
/// nondecreasing (RDME, IME) along grid values above the baseline.
pub fn check_marginal(
    att: &Attributor,
    model: &dyn PricingModel,
    grid: &AuditGrid,
    kind: Axiom,
    tol: Tolerance,
) -> Result<AxiomReport> {
    let wanted = match kind {
        Axiom::Dme => Curvature::Dme,
        Axiom::Rdme => Curvature::Rdme,
        Axiom::Ime => Curvature::Ime,
        other => return contract(format!("{other} is not a marginal-effect axiom")),
    };
    check_grid(model, grid)?;
    let mut report = ReportBuilder::new(kind, att.method, model.name());
    report.feature(grid.feature_name());
    report.grid(grid.summary());
    let declared = model.shape().curvature(grid.feature);
    if declared != wanted {
        return Ok(report.not_applicable(format!(
            "{} is flagged {declared:?}, not {wanted:?}",
            grid.feature_name()
        )));
    }

    let base = grid.baseline_value();
    let gap = MIN_GAP * base.abs().max(1.0);
    let above: Vec<f64> = grid
        .values
        .iter()
        .copied()
        .filter(|v| *v > base + gap)
        .collect();
    if above.len() < grid.values.len() {
        report.note(format!(
            "{} grid value(s) not strictly above the baseline coordinate {base} skipped",
            grid.values.len() - above.len()
        ));
    }
    if above.len() < 2 {
        return Ok(report.not_applicable("fewer than two grid values above the baseline"));
    }

    let mut cache = GridCache::new(att, model, grid);
    let mut ratios = Vec::with_capacity(above.len());
    for &v in &above {
        let (a, point, attrs) = cache.feature_attr(v)?;
        let ratio = a / (v - base);
        report.observe(&[ratio]);
        ratios.push((v, ratio, point, attrs));
    }
    for w in ratios.windows(2) {
        let (v0, r0, p0, a0) = &w[0];
        let (v1, r1, p1, a1) = &w[1];
        let margin = match wanted {
            Curvature::Dme => r1 - r0,
            _ => r0 - r1,
        };
        report.compare(margin, || Witness {
            points: vec![p0.clone(), p1.clone()],
            attributions: a0.iter().chain(a1.iter()).copied().collect(),
            margin: 0.0,
            detail: format!(
                "normalized attribution {r0} at {v0} vs {r1} at {v1} ({kind} requires {})",
                if wanted == Curvature::Dme {
                    "nonincreasing"
                } else {
                    "nondecreasing"
                }
            ),
        });
    }
    Ok(report.finish(tol))
}

/// Feature correspondence between two models compared for first-order
/// dominance: `alpha` is the feature under test, `shared` the remaining
/// features both models read with the same meaning. Pairs are
/// `(index in f, index in g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedFeatureMap {
    pub alpha: (usize, usize),
    pub shared: Vec<(usize, usize)>,
}

/// Explicands for the dominance audit: the tested feature takes each of
/// `values` in both models; everything else comes from the contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmdGrid {
    pub values: Vec<f64>,
    pub f_context: FeatureVector,
    pub f_baseline: FeatureVector,
    pub g_context: FeatureVector,
    pub g_baseline: FeatureVector,
}

fn gradient_of(model: &dyn PricingModel, x: &[f64]) -> Result<Vec<f64>> {
    if model.has_gradient() {
        model.gradient(x)
    } else {
        finite_difference_gradient(model, x, 1e-6)
    }
}

/// First-order monotonic dominance: if `f` is at least as sensitive to the
/// tested feature as `g` everywhere, its attribution is at least as large.
///
/// The dominance premise is spot-checked on points along both attribution
/// paths; if it fails, the report is not-applicable and says where.
pub fn check_fmd(
    att: &Attributor,
    model_f: &dyn PricingModel,
    model_g: &dyn PricingModel,
    map: &SharedFeatureMap,
    grid: &FmdGrid,
    tol: Tolerance,
) -> Result<AxiomReport> {
    grid.f_context.ensure_aligned(&grid.f_baseline)?;
    grid.g_context.ensure_aligned(&grid.g_baseline)?;
    grid.f_context.ensure_names(model_f.feature_names())?;
    grid.g_context.ensure_names(model_g.feature_names())?;
    let (af, ag) = map.alpha;
    let nf = model_f.n_features();
    let ng = model_g.n_features();
    if af >= nf || ag >= ng || map.shared.iter().any(|&(i, j)| i >= nf || j >= ng) {
        return contract("shared feature map refers to features the models lack");
    }
    let pairs = std::iter::once(map.alpha).chain(map.shared.iter().copied());
    for (i, j) in pairs {
        if grid.f_baseline.values()[i] != grid.g_baseline.values()[j] {
            return contract(format!(
                "baselines disagree on shared feature {} / {}",
                model_f.feature_names()[i],
                model_g.feature_names()[j]
            ));
        }
        if (i, j) != map.alpha && grid.f_context.values()[i] != grid.g_context.values()[j] {
            return contract(format!(
                "explicands disagree on shared feature {} / {}",
                model_f.feature_names()[i],
                model_g.feature_names()[j]
            ));
        }
    }
    if grid.values.is_empty() || grid.values.iter().any(|v| !v.is_finite()) {
        return contract("FMD grid needs finite values");
    }

    let label = format!("{} vs {}", model_f.name(), model_g.name());
    let mut report = ReportBuilder::new(Axiom::Fmd, att.method, &label);
    report.feature(&model_f.feature_names()[af]);

    // premise: ∂f/∂α ≥ ∂g/∂α on sampled path points
    let mut worst: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut deriv_scale = 0.0f64;
    for &v in &grid.values {
        let xf = grid.f_context.with_value(af, v)?;
        let xg = grid.g_context.with_value(ag, v)?;
        for k in 0..=8 {
            let t = k as f64 / 8.0;
            let pf = lerp(grid.f_baseline.values(), xf.values(), t);
            let pg = lerp(grid.g_baseline.values(), xg.values(), t);
            let df = gradient_of(model_f, &pf)?[af];
            let dg = gradient_of(model_g, &pg)?[ag];
            deriv_scale = deriv_scale.max(df.abs()).max(dg.abs());
            let gap = dg - df;
            if worst.as_ref().is_none_or(|(w, _, _)| gap > *w) {
                worst = Some((gap, pf, pg));
            }
        }
    }
    if let Some((gap, pf, pg)) = worst {
        if gap > tol.resolve(deriv_scale) {
            return Ok(report.not_applicable(format!(
                "dominance premise fails: dg/da - df/da = {gap} at f{pf:?} / g{pg:?}"
            )));
        }
    }

    // below the baseline the ordering flips, as for AIM
    let base = grid.f_baseline.values()[af];
    for &v in &grid.values {
        if v == base {
            continue;
        }
        let side = (v - base).signum();
        let xf = grid.f_context.with_value(af, v)?;
        let xg = grid.g_context.with_value(ag, v)?;
        let rf = att.attribute(model_f, &xf, &grid.f_baseline)?;
        let rg = att.attribute(model_g, &xg, &grid.g_baseline)?;
        let (a_f, a_g) = (rf.attributions[af], rg.attributions[ag]);
        report.observe(&[a_f, a_g]);
        report.compare(side * (a_g - a_f), || Witness {
            points: vec![xf.values().to_vec(), xg.values().to_vec()],
            attributions: vec![a_f, a_g],
            margin: 0.0,
            detail: format!(
                "A_f = {a_f}, A_g = {a_g} at {v}; dominance requires A_f {} A_g",
                if side > 0.0 { ">=" } else { "<=" }
            ),
        });
    }
    Ok(report.finish(tol))
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Generalized dummy: a feature the model ignores gets zero attribution, and
/// removing it (frozen at its baseline coordinate) leaves every other
/// attribution unchanged.
pub fn check_generalized_dummy(
    att: &Attributor,
    model: &dyn PricingModel,
    dummy_index: usize,
    grid: &AuditGrid,
    tol: Tolerance,
) -> Result<AxiomReport> {
    check_grid(model, grid)?;
    if dummy_index >= model.n_features() {
        return contract(format!(
            "dummy index {dummy_index} outside the model's features"
        ));
    }
    let dummy_name = model.feature_names()[dummy_index].clone();
    let mut report = ReportBuilder::new(Axiom::Gd, att.method, model.name());
    report.feature(&dummy_name);
    report.grid(grid.summary());

    // constancy in the dummy coordinate, sampled at every grid explicand
    let mut probes = vec![grid.baseline.clone()];
    for &v in &grid.values {
        probes.push(grid.explicand(v)?);
    }
    for x in &probes {
        let base = model.evaluate(x.values())?;
        let d = x.values()[dummy_index];
        for shifted in [d + 1.0, d - 1.0, 2.0 * d + 1.0, d + 10.0 * d.abs().max(1.0)] {
            let mut p = x.values().to_vec();
            p[dummy_index] = shifted;
            let moved = model.evaluate(&p)?;
            if (moved - base).abs() > 1e-12 * base.abs().max(1.0) {
                return Ok(report.not_applicable(format!(
                    "model is not constant in {dummy_name}: f({:?}) = {base}, f({p:?}) = {moved}",
                    x.values()
                )));
            }
        }
    }

    let frozen = grid.baseline.values()[dummy_index];
    let reduced = Restricted::new(model, &[(dummy_index, frozen)])?;
    let reduced_baseline = grid.baseline.without(dummy_index)?;
    for &v in &grid.values {
        let explicand = grid.explicand(v)?;
        let full = att.attribute(model, &explicand, &grid.baseline)?;
        let small = att.attribute(
            &reduced,
            &explicand.without(dummy_index)?,
            &reduced_baseline,
        )?;
        report.observe(&full.attributions);
        let a_dummy = full.attributions[dummy_index];
        report.compare(a_dummy.abs(), || Witness {
            points: vec![explicand.values().to_vec()],
            attributions: full.attributions.clone(),
            margin: 0.0,
            detail: format!("dummy feature {dummy_name} received {a_dummy}"),
        });
        let others = full
            .attributions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != dummy_index)
            .map(|(_, a)| *a);
        for (j, (a_full, a_small)) in others.zip(&small.attributions).enumerate() {
            report.compare((a_full - a_small).abs(), || Witness {
                points: vec![explicand.values().to_vec()],
                attributions: vec![a_full, *a_small],
                margin: 0.0,
                detail: format!(
                    "{} changed from {a_small} to {a_full} when the dummy was added",
                    reduced.feature_names()[j]
                ),
            });
        }
    }
    Ok(report.finish(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::QuadratureConfig;
    use crate::audit::Verdict;
    use crate::features::Method;
    use crate::pricing::{BondModel, LinearModel};

    fn bond_grid(values: Vec<f64>, c: f64) -> AuditGrid {
        let ctx = FeatureVector::new(["r", "c"], vec![values[0], c]).unwrap();
        let base = FeatureVector::new(["r", "c"], vec![0.0, 0.0]).unwrap();
        AuditGrid::new(0, values, ctx, base).unwrap()
    }

    fn ig() -> Attributor {
        Attributor::ig(QuadratureConfig::gauss_legendre(64))
    }

    #[test]
    fn bond_rate_counterexample() {
        let m = BondModel::new(30.0).unwrap();
        let grid = bond_grid(vec![0.3, 0.5], 100.0);
        let tol = Tolerance::absolute(1e-3);
        let rep = check_dim(&ig(), &m, &grid, tol).unwrap();
        assert_eq!(rep.verdict, Verdict::Violated);
        assert_eq!(rep.witnesses.len(), 1);
        // IG_r(0.5) - IG_r(0.3) = -6.66663 + 11.09740
        assert!((rep.witnesses[0].margin - 4.430_764_873_571_222).abs() < 1e-6);
        let rep = check_dim(&Attributor::bshap(), &m, &grid, tol).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn aim_on_bond_rate() {
        let m = BondModel::new(10.0).unwrap();
        let grid = bond_grid((1..=60).map(|k| k as f64 * 0.01).collect(), 100.0);
        for att in [Attributor::bshap(), ig()] {
            let rep =
                check_aim(&att, &m, std::slice::from_ref(&grid), Tolerance::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass, "{:?}", att.method);
            assert_eq!(rep.checks, 60);
        }
    }

    #[test]
    fn aim_trivial_at_baseline() {
        let m = BondModel::new(10.0).unwrap();
        let ctx = FeatureVector::new(["r", "c"], vec![0.0, 0.0]).unwrap();
        let grid = AuditGrid::new(0, vec![0.0], ctx.clone(), ctx).unwrap();
        let rep = check_aim(&Attributor::bshap(), &m, &[grid], Tolerance::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn unflagged_feature_is_not_applicable() {
        let m = LinearModel::new(["a", "b"], vec![0.0, 1.0], 0.0).unwrap();
        let ctx = FeatureVector::new(["a", "b"], vec![1.0, 1.0]).unwrap();
        let base = FeatureVector::new(["a", "b"], vec![0.0, 0.0]).unwrap();
        let grid = AuditGrid::new(0, vec![1.0, 2.0], ctx, base).unwrap();
        let rep = check_dim(&Attributor::bshap(), &m, &grid, Tolerance::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotApplicable);
        let rep = check_marginal(
            &Attributor::bshap(),
            &m,
            &grid,
            Axiom::Ime,
            Tolerance::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn rdme_on_bond_rate() {
        let m = BondModel::new(10.0).unwrap();
        let grid = bond_grid((1..=60).map(|k| k as f64 * 0.01).collect(), 100.0);
        for att in [Attributor::bshap(), ig()] {
            let rep = check_marginal(&att, &m, &grid, Axiom::Rdme, Tolerance::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass);
            assert_eq!(rep.method, att.method);
        }
        let rep = check_marginal(&ig(), &m, &grid, Axiom::Dme, Tolerance::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn fmd_reflexive() {
        let m = BondModel::new(10.0).unwrap();
        let ctx = FeatureVector::new(["r", "c"], vec![0.1, 50.0]).unwrap();
        let base = FeatureVector::new(["r", "c"], vec![0.0, 0.0]).unwrap();
        let grid = FmdGrid {
            values: vec![0.02, 0.05, 0.1],
            f_context: ctx.clone(),
            f_baseline: base.clone(),
            g_context: ctx,
            g_baseline: base,
        };
        let map = SharedFeatureMap {
            alpha: (0, 0),
            shared: vec![(1, 1)],
        };
        for att in [Attributor::bshap(), ig()] {
            let rep = check_fmd(&att, &m, &m, &map, &grid, Tolerance::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass);
        }
        let mut bad = grid.clone();
        bad.g_context = bad.g_context.with_value(1, 60.0).unwrap();
        assert!(check_fmd(
            &Attributor::bshap(),
            &m,
            &m,
            &map,
            &bad,
            Tolerance::default()
        )
        .is_err());
    }

    #[test]
    fn linear_zero_weight_is_a_dummy() {
        let m = LinearModel::new(["a", "b", "c"], vec![1.5, 0.0, -2.0], 0.3).unwrap();
        let ctx = FeatureVector::new(["a", "b", "c"], vec![1.0, 5.0, 2.0]).unwrap();
        let base = FeatureVector::new(["a", "b", "c"], vec![0.0, 1.0, 0.5]).unwrap();
        let grid = AuditGrid::linspace(0, 0.5, 3.0, 6, ctx, base).unwrap();
        for att in [Attributor::bshap(), ig()] {
            let rep =
                check_generalized_dummy(&att, &m, 1, &grid, Tolerance::absolute(1e-12)).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.witnesses);
        }
        let rep = check_generalized_dummy(&ig(), &m, 0, &grid, Tolerance::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotApplicable);
        assert_eq!(rep.method, Method::IntegratedGradients);
    }
}
