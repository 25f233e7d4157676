//! Parsing of model names, command-line vectors, grids and generic CSV tables.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use riskattr::attribution::{QuadratureConfig, QuadratureRule};
use riskattr::audit::AuditGrid;
use riskattr::pricing::bsm::OPTION_FEATURES;
use riskattr::pricing::{BondModel, BsmModel, OptionKind, WithDummy};
use riskattr::records::{load_option_records, RateUnit};
use riskattr::surrogate::MlpSurrogate;
use riskattr::{AttributionResult, Error, FeatureVector, PricingModel, Result};

pub(crate) fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Bond,
    BsmCall,
    BsmPut,
    Surrogate(PathBuf),
}

impl FromStr for ModelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bond" => Ok(ModelSource::Bond),
            "bsm-call" | "call" => Ok(ModelSource::BsmCall),
            "bsm-put" | "put" => Ok(ModelSource::BsmPut),
            other => {
                let path = other.strip_prefix("surrogate:").unwrap_or(other);
                if path.is_empty() {
                    return bad("empty model name");
                }
                Ok(ModelSource::Surrogate(PathBuf::from(path)))
            }
        }
    }
}

/// `NAME=VALUE` model parameters such as the bond maturity `T=10`.
pub fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in raw {
        let Some((k, v)) = p.split_once('=') else {
            return bad(format!("parameter {p:?} is not NAME=VALUE"));
        };
        let value = parse_number(v, k.trim())?;
        if out.insert(k.trim().to_string(), value).is_some() {
            return bad(format!("parameter {k:?} given twice"));
        }
    }
    Ok(out)
}

pub fn build_model(
    source: &ModelSource,
    params: &BTreeMap<String, f64>,
) -> Result<Box<dyn PricingModel>> {
    let allowed: &[&str] = match source {
        ModelSource::Bond => &["T"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return bad(format!("model does not take parameter {k:?}"));
    }
    Ok(match source {
        ModelSource::Bond => match params.get("T") {
            Some(&t) => Box::new(BondModel::new(t)?),
            None => Box::new(BondModel::with_maturity_feature()),
        },
        ModelSource::BsmCall => Box::new(BsmModel::new(OptionKind::Call)),
        ModelSource::BsmPut => Box::new(BsmModel::new(OptionKind::Put)),
        ModelSource::Surrogate(path) => {
            if !path.exists() {
                return bad(format!(
                    "{} is neither a built-in model (bond, bsm-call, bsm-put) nor an existing model file",
                    path.display()
                ));
            }
            Box::new(MlpSurrogate::load(path)?)
        }
    })
}

/// Appends `name` as an ignored feature unless the model already has it.
pub fn with_dummy(model: Box<dyn PricingModel>, name: &str) -> Result<Box<dyn PricingModel>> {
    if model.feature_names().iter().any(|n| n == name) {
        Ok(model)
    } else {
        Ok(Box::new(WithDummy::new(model, name)?))
    }
}

pub fn is_option_layout(names: &[String]) -> bool {
    names.len() == OPTION_FEATURES.len() && names.iter().zip(OPTION_FEATURES).all(|(a, b)| a == b)
}

/// Rates on the command line default to percent for option-feature models,
/// matching how quoted vectors are usually written, and to decimals otherwise.
pub fn rate_unit(explicit: Option<RateUnit>, names: &[String]) -> RateUnit {
    explicit.unwrap_or(if is_option_layout(names) {
        RateUnit::Percent
    } else {
        RateUnit::Decimal
    })
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => bad(format!("{what}: {s:?} is not a finite number")),
    }
}

fn convert(name: &str, value: f64, unit: RateUnit) -> f64 {
    if name == "r" {
        unit.to_decimal(value)
    } else {
        value
    }
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| parse_number(p, what)).collect()
}

/// A comma-separated vector in the model's feature order.
pub fn parse_vector(
    s: &str,
    names: &[String],
    unit: RateUnit,
    what: &str,
) -> Result<FeatureVector> {
    let raw = parse_list(s, what)?;
    if raw.len() != names.len() {
        return bad(format!(
            "{what} has {} values but the model expects {} ({})",
            raw.len(),
            names.len(),
            names.join(",")
        ));
    }
    let values = names
        .iter()
        .zip(raw)
        .map(|(n, v)| convert(n, v, unit))
        .collect();
    FeatureVector::new(names.to_vec(), values)
}

/// `NAME:LO:HI:COUNT` for an even grid or `NAME=V1,V2,...` for explicit values.
pub fn parse_grid(
    spec: &str,
    context: &FeatureVector,
    baseline: &FeatureVector,
    unit: RateUnit,
) -> Result<AuditGrid> {
    let (name, values) = if let Some((name, list)) = spec.split_once('=') {
        (name.trim(), parse_list(list, "grid value")?)
    } else {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 4 {
            return bad(format!(
                "grid {spec:?} is not NAME:LO:HI:COUNT or NAME=V1,V2,..."
            ));
        }
        let lo = parse_number(parts[1], "grid lower bound")?;
        let hi = parse_number(parts[2], "grid upper bound")?;
        let count: usize = parts[3]
            .trim()
            .parse()
            .map_err(|_| Error::Contract(format!("grid count {:?} is not an integer", parts[3])))?;
        if count < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return bad(format!("grid {spec:?} needs LO < HI and COUNT >= 2"));
        }
        let step = (hi - lo) / (count - 1) as f64;
        (
            parts[0].trim(),
            (0..count).map(|i| lo + step * i as f64).collect(),
        )
    };
    let Some(feature) = context.index_of(name) else {
        return bad(format!(
            "grid feature {name:?} is not one of {}",
            context.names().join(",")
        ));
    };
    let values = values.into_iter().map(|v| convert(name, v, unit)).collect();
    AuditGrid::new(feature, values, context.clone(), baseline.clone())
}

/// `RULE[:POINTS]`, e.g. `trapezoid:256` or `gl:64`.
pub fn parse_quadrature(s: &str, refine_check: bool) -> Result<QuadratureConfig> {
    let (rule, points) = match s.split_once(':') {
        Some((r, p)) => (
            r.parse::<QuadratureRule>()?,
            p.trim().parse::<usize>().map_err(|_| {
                Error::Contract(format!("quadrature points {p:?} is not an integer"))
            })?,
        ),
        None => (
            s.parse::<QuadratureRule>()?,
            QuadratureConfig::default().points,
        ),
    };
    let config = QuadratureConfig {
        rule,
        points,
        refine_check,
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    match parse_list(&s.replace(':', ","), what)?.as_slice() {
        &[lo, hi] if lo <= hi => Ok((lo, hi)),
        _ => bad(format!("{what} {s:?} is not LO:HI with LO <= HI")),
    }
}

/// Numeric rows of a CSV file. Option-record files go through the record
/// loader so their rate directive is honoured; any other file must be
/// all-numeric.
pub fn load_points(path: &Path, columns: Option<&[String]>) -> Result<Vec<FeatureVector>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(String::from)
        .collect();
    let records_file = ["S", "r", "tau", "K", "sigma", "price", "kind"]
        .iter()
        .all(|c| headers.iter().any(|h| h == c));
    let (names, rows): (Vec<String>, Vec<Vec<f64>>) = if records_file {
        let recs = load_option_records(path)?;
        (
            OPTION_FEATURES.iter().map(|s| s.to_string()).collect(),
            recs.iter().map(|r| r.features().to_vec()).collect(),
        )
    } else {
        let mut rows = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let mut values = Vec::with_capacity(row.len());
            for (h, field) in headers.iter().zip(row.iter()) {
                values.push(field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {h:?} is not numeric: {field:?}"),
                })?);
            }
            rows.push(values);
        }
        (headers, rows)
    };
    let picked: Vec<usize> = match columns {
        None => (0..names.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                names.iter().position(|n| n == c).ok_or_else(|| {
                    Error::Contract(format!("no column {c:?} in {}", path.display()))
                })
            })
            .collect::<Result<_>>()?,
    };
    let picked_names: Vec<String> = picked.iter().map(|&i| names[i].clone()).collect();
    rows.into_iter()
        .map(|row| {
            FeatureVector::new(
                picked_names.clone(),
                picked.iter().map(|&i| row[i]).collect(),
            )
        })
        .collect()
}

/// Restricts a result to a subset of its features, keeping only those
/// coordinates of every evaluation point. Domain membership depends on
/// nothing else. Points that coincide after projection are kept once.
pub fn project_result(result: &AttributionResult, names: &[String]) -> Result<AttributionResult> {
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            result.explicand.index_of(n).ok_or_else(|| {
                Error::Contract(format!("domain feature {n:?} is not a model feature"))
            })
        })
        .collect::<Result<_>>()?;
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut seen = HashSet::new();
    let evaluation_points = result
        .evaluation_points
        .iter()
        .map(|p| pick(p))
        .filter(|p| seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect();
    Ok(AttributionResult {
        method: result.method,
        attributions: pick(&result.attributions),
        explicand: FeatureVector::new(names.to_vec(), pick(result.explicand.values()))?,
        baseline: FeatureVector::new(names.to_vec(), pick(result.baseline.values()))?,
        f_explicand: result.f_explicand,
        f_baseline: result.f_baseline,
        completeness_residual: result.completeness_residual,
        evaluation_points,
        n_model_evals: result.n_model_evals,
        refinement_delta: result.refinement_delta,
    })
}
