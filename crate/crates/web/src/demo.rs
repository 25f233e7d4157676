//! The computations behind the browser page, returning JSON strings.

use serde::Serialize;

use riskattr::attribution::{
    bshap, ig_bond_closed_form, integrated_gradients, Attributor, QuadratureConfig,
};
use riskattr::audit::{
    check_cg, check_dim, fit_domain, generate_leverage_data, AuditGrid, AxiomReport, DomainMode,
    LeverageSpec, Tolerance, TrainingDomain,
};
use riskattr::pricing::bsm::OPTION_FEATURES;
use riskattr::pricing::{BondModel, BsmModel, OptionKind, Restricted};
use riskattr::{Error, FeatureVector, Result};

fn linspace(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || hi <= lo || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Contract(format!(
            "need lo < hi and at least 2 points, got {lo}..{hi} x{count}"
        )));
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

#[derive(Serialize)]
struct BondCurves {
    rates: Vec<f64>,
    ig: Vec<f64>,
    bshap: Vec<f64>,
    closed_form: Vec<f64>,
    reports: Vec<AxiomReport>,
}

/// Rate attributions of a zero-coupon bond against the all-zero baseline,
/// for rates spread over `(0, r_max]`, with DIM audits for both methods.
pub fn bond_curves(
    maturity: f64,
    principal: f64,
    r_max: f64,
    count: usize,
    ig_points: usize,
) -> Result<String> {
    let model = BondModel::new(maturity)?;
    let rates = linspace(r_max / count as f64, r_max, count)?;
    let baseline = FeatureVector::new(["r", "c"], vec![0.0, 0.0])?;
    let context = FeatureVector::new(["r", "c"], vec![rates[0], principal])?;
    let q = QuadratureConfig::trapezoid(ig_points);
    let mut out = BondCurves {
        rates: rates.clone(),
        ig: Vec::with_capacity(count),
        bshap: Vec::with_capacity(count),
        closed_form: Vec::with_capacity(count),
        reports: Vec::new(),
    };
    for &r in &rates {
        let x = context.with_value(0, r)?;
        out.ig
            .push(integrated_gradients(&model, &x, &baseline, &q)?.attributions[0]);
        out.bshap
            .push(bshap(&model, &x, &baseline)?.attributions[0]);
        out.closed_form
            .push(ig_bond_closed_form(r, principal, maturity)?);
    }
    let grid = AuditGrid::new(0, rates, context, baseline)?;
    for att in [Attributor::bshap(), Attributor::ig(q)] {
        out.reports
            .push(check_dim(&att, &model, &grid, Tolerance::default())?);
    }
    json(&out)
}

fn option_vector(text: &str, percent_rates: bool, what: &str) -> Result<FeatureVector> {
    let values: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Contract(format!("{what}: {p:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 5 {
        return Err(Error::Contract(format!(
            "{what} needs 5 values (S, r, tau, K, sigma)"
        )));
    }
    let mut values = values;
    if percent_rates {
        values[1] /= 100.0;
    }
    FeatureVector::new(OPTION_FEATURES, values)
}

#[derive(Serialize)]
struct OptionCurves {
    feature: String,
    values: Vec<f64>,
    bshap: Vec<f64>,
    ig: Vec<f64>,
    names: Vec<String>,
    bshap_at_explicand: Vec<f64>,
    ig_at_explicand: Vec<f64>,
    reports: Vec<AxiomReport>,
}

/// Attribution of one option feature as that feature sweeps `[lo, hi]`
/// with the other coordinates taken from the explicand.
#[allow(clippy::too_many_arguments)]
pub fn option_curves(
    kind: &str,
    baseline: &str,
    explicand: &str,
    feature: &str,
    lo: f64,
    hi: f64,
    count: usize,
    percent_rates: bool,
) -> Result<String> {
    let kind: OptionKind = kind.parse()?;
    let model = BsmModel::new(kind);
    let b = option_vector(baseline, percent_rates, "baseline")?;
    let x = option_vector(explicand, percent_rates, "explicand")?;
    let Some(i) = x.index_of(feature) else {
        return Err(Error::Contract(format!("unknown feature {feature:?}")));
    };
    let scale = if percent_rates && feature == "r" {
        0.01
    } else {
        1.0
    };
    let values = linspace(lo * scale, hi * scale, count)?;
    let q = QuadratureConfig::default();
    let mut out = OptionCurves {
        feature: feature.to_string(),
        values: values.clone(),
        bshap: Vec::with_capacity(count),
        ig: Vec::with_capacity(count),
        names: x.names().to_vec(),
        bshap_at_explicand: bshap(&model, &x, &b)?.attributions,
        ig_at_explicand: integrated_gradients(&model, &x, &b, &q)?.attributions,
        reports: Vec::new(),
    };
    for &v in &values {
        let xv = x.with_value(i, v)?;
        out.bshap.push(bshap(&model, &xv, &b)?.attributions[i]);
        out.ig
            .push(integrated_gradients(&model, &xv, &b, &q)?.attributions[i]);
    }
    let grid = AuditGrid::new(i, values, x, b)?;
    for att in [Attributor::bshap(), Attributor::ig(q)] {
        out.reports
            .push(check_dim(&att, &model, &grid, Tolerance::default())?);
    }
    json(&out)
}

#[derive(Serialize)]
struct Evaluated {
    point: [f64; 2],
    inside: bool,
}

#[derive(Serialize)]
struct LeverageView {
    points: Vec<[f64; 2]>,
    hull: Vec<[f64; 2]>,
    baseline_inside: bool,
    explicand_inside: bool,
    bshap_points: Vec<Evaluated>,
    ig_points: Vec<Evaluated>,
    reports: Vec<AxiomReport>,
}

/// A leverage-effect point cloud in (S, sigma), its convex hull, and which
/// of the points each attribution method evaluates fall outside it. The
/// model is a call with r, tau and K frozen.
pub fn leverage_domain(
    n: usize,
    correlation: f64,
    seed: u64,
    baseline: [f64; 2],
    explicand: [f64; 2],
) -> Result<String> {
    let spec = LeverageSpec::new(n, (700.0, 1500.0), (0.15, 0.9), correlation, seed);
    let data = generate_leverage_data(&spec)?;
    let domain = fit_domain(&data, DomainMode::Hull2d { pair: (0, 1) })?;
    let TrainingDomain::Hull2d { vertices, .. } = &domain else {
        unreachable!("hull mode fits a hull");
    };
    let at = FeatureVector::new(
        OPTION_FEATURES,
        vec![explicand[0], 0.04, 0.5, 1200.0, explicand[1]],
    )?;
    let model = Restricted::keep(BsmModel::call(), &["S", "sigma"], &at)?;
    let b = FeatureVector::new(["S", "sigma"], baseline.to_vec())?;
    let x = FeatureVector::new(["S", "sigma"], explicand.to_vec())?;
    let results = [
        bshap(&model, &x, &b)?,
        integrated_gradients(&model, &x, &b, &QuadratureConfig::default())?,
    ];
    let flag = |p: &[f64]| -> Result<Evaluated> {
        Ok(Evaluated {
            point: [p[0], p[1]],
            inside: domain.contains(p)?,
        })
    };
    let baseline_inside = domain.contains(b.values())?;
    let explicand_inside = domain.contains(x.values())?;
    let mut reports = Vec::new();
    if baseline_inside && explicand_inside {
        for r in &results {
            reports.push(check_cg(r, &domain)?);
        }
    }
    let view = LeverageView {
        points: data
            .iter()
            .map(|p| [p.values()[0], p.values()[1]])
            .collect(),
        hull: vertices.clone(),
        baseline_inside,
        explicand_inside,
        bshap_points: results[0]
            .evaluation_points
            .iter()
            .map(|p| flag(p))
            .collect::<Result<_>>()?,
        ig_points: results[1]
            .evaluation_points
            .iter()
            .map(|p| flag(p))
            .collect::<Result<_>>()?,
        reports,
    };
    json(&view)
}
