use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use riskattr::attribution::Attributor;
use riskattr::audit::{
    check_aim, check_cg, check_dim, check_fmd, check_generalized_dummy, check_marginal, fit_domain,
    generate_leverage_data, AuditGrid, Axiom, DomainMode, FmdGrid, LeverageSpec, ReportBundle,
    SharedFeatureMap, Tolerance, TrainingDomain,
};
use riskattr::features::AttributionSummary;
use riskattr::pricing::{vix_from_chain, OptionKind, VixInput};
use riskattr::records::{
    default_baseline, load_option_records, save_option_records, to_json_pretty, OptionRecord,
    RateUnit,
};
use riskattr::surrogate::{
    synthetic_option_records, train_surrogate, Optimizer, SyntheticSpec, TrainConfig,
};
use riskattr::{Error, FeatureVector, Method, PricingModel, Result};

use crate::inputs::{
    bad, build_model, parse_grid, parse_list, parse_pair, parse_params, parse_quadrature,
    parse_vector, project_result, rate_unit, with_dummy, ModelSource,
};
use crate::{
    io_err, AttributeArgs, AuditArgs, Cli, CmdResult, Command, DomainArgs, ModelArgs, PairArgs,
    PriceArgs, TrainArgs, VixArgs, EXIT_OK, EXIT_VIOLATION,
};

pub(crate) fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Price(a) => price(cli, a, out),
        Command::Train(a) => train(cli, a, out),
        Command::Attribute(a) => attribute(cli, a, out),
        Command::Audit(a) => audit(cli, a, out, err),
        Command::Vix(a) => vix(cli, a, out),
        Command::Domain(a) => domain(cli, a, out),
    }
}

fn model_from(args: &ModelArgs) -> Result<Box<dyn PricingModel>> {
    build_model(
        &args.model.parse::<ModelSource>()?,
        &parse_params(&args.params)?,
    )
}

/// Writes `text` to `path`, or to `out` when no path is given.
fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes()).map_err(io_err)?,
    }
    Ok(())
}

fn price(cli: &Cli, args: &PriceArgs, out: &mut dyn Write) -> CmdResult {
    let model = model_from(&args.model)?;
    let names = model.feature_names().to_vec();
    let x = parse_vector(&args.point, &names, rate_unit(cli.rates, &names), "point")?;
    let value = model.value_at(&x)?;
    writeln!(out, "{value}").map_err(io_err)?;
    Ok(EXIT_OK)
}

fn parse_optimizer(s: &str) -> Result<Optimizer> {
    match s.trim().to_ascii_lowercase().as_str() {
        "cg" | "conjugate-gradient" => Ok(Optimizer::NonlinearConjugateGradient),
        "gd" | "gradient-descent" => Ok(Optimizer::GradientDescent),
        other => bad(format!("unknown optimizer {other:?} (expected cg or gd)")),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    kind: OptionKind,
    records: usize,
    train_size: usize,
    test_size: usize,
    iterations: usize,
    final_loss: f64,
    train_rmse: f64,
    test_rmse: f64,
    mean_price: f64,
}

fn train(cli: &Cli, args: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let kind: OptionKind = args.kind.parse()?;
    let records: Vec<OptionRecord> = match &args.data {
        Some(path) => load_option_records(path)?
            .into_iter()
            .filter(|r| r.kind == kind)
            .collect(),
        None => synthetic_option_records(&SyntheticSpec {
            n: args.synthetic,
            kind,
            seed: cli.seed,
            ..SyntheticSpec::default()
        })?,
    };
    let hidden = parse_list(&args.hidden, "hidden width")?
        .into_iter()
        .map(|w| {
            if w >= 1.0 && w.fract() == 0.0 {
                Ok(w as usize)
            } else {
                bad(format!("hidden width {w} is not a positive integer"))
            }
        })
        .collect::<Result<Vec<usize>>>()?;
    let config = TrainConfig {
        hidden,
        l2_lambda: args.lambda,
        max_iters: args.max_iters,
        optimizer: parse_optimizer(&args.optimizer)?,
        split_fraction: args.split,
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let outcome = train_surrogate(&records, &config)?;
    outcome.model.save(&args.out)?;
    if let Some(path) = &args.save_data {
        save_option_records(&records, path)?;
    }
    let summary = TrainSummary {
        kind,
        records: records.len(),
        train_size: outcome.train_size,
        test_size: outcome.test_size,
        iterations: outcome.iterations,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
        train_rmse: outcome.train_rmse,
        test_rmse: outcome.test_rmse,
        mean_price: records.iter().map(|r| r.price).sum::<f64>() / records.len() as f64,
    };
    emit(&to_json_pretty(&summary)?, None, out)?;
    Ok(EXIT_OK)
}

/// Explicand and baseline from flags, falling back to a record file.
fn resolve_pair(
    pair: &PairArgs,
    names: &[String],
    unit: RateUnit,
) -> Result<(FeatureVector, FeatureVector)> {
    let records = pair.data.as_ref().map(load_option_records).transpose()?;
    let baseline = match (&pair.baseline, &records) {
        (Some(s), _) => parse_vector(s, names, unit, "baseline")?,
        (None, Some(recs)) => default_baseline(recs)?,
        (None, None) => return bad("give --baseline, or --data to use the first-date mean"),
    };
    let explicand = match (&pair.explicand, pair.row, &records) {
        (Some(_), Some(_), _) => return bad("--explicand and --row are mutually exclusive"),
        (Some(s), None, _) => parse_vector(s, names, unit, "explicand")?,
        (None, Some(row), Some(recs)) => match row.checked_sub(1).and_then(|i| recs.get(i)) {
            Some(r) => r.feature_vector(),
            None => return bad(format!("--row {row} outside 1..={}", recs.len())),
        },
        (None, Some(_), None) => return bad("--row needs --data"),
        (None, None, _) => return bad("give --explicand, or --data with --row"),
    };
    baseline.ensure_names(names)?;
    explicand.ensure_names(names)?;
    Ok((explicand, baseline))
}

fn attributors(list: &str, pair: &PairArgs) -> Result<Vec<Attributor>> {
    let q = parse_quadrature(&pair.quadrature, pair.refine_check)?;
    let mut out: Vec<Attributor> = Vec::new();
    for m in list.split(',') {
        let att = match m.parse::<Method>()? {
            Method::BShap => Attributor::bshap(),
            Method::IntegratedGradients => Attributor::ig(q),
        };
        if out.iter().any(|a| a.method == att.method) {
            return bad(format!("method {m:?} listed twice"));
        }
        out.push(att);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AttributeOutput {
    model: String,
    results: Vec<AttributionSummary>,
}

fn attribute(cli: &Cli, args: &AttributeArgs, out: &mut dyn Write) -> CmdResult {
    let model = model_from(&args.model)?;
    let names = model.feature_names().to_vec();
    let (x, b) = resolve_pair(&args.pair, &names, rate_unit(cli.rates, &names))?;
    let mut results = Vec::new();
    for att in attributors(&args.methods, &args.pair)? {
        results.push(att.attribute(model.as_ref(), &x, &b)?.summary());
    }
    if let Some(path) = &args.plot {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["method", "feature", "attribution"])
            .map_err(csv_err)?;
        for r in &results {
            for (name, a) in r.features.iter().zip(&r.attributions) {
                w.write_record([r.method.label(), name, &a.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
    }
    let output = AttributeOutput {
        model: model.name().to_string(),
        results,
    };
    emit(&to_json_pretty(&output)?, args.out.as_deref(), out)?;
    Ok(EXIT_OK)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn need_grids(axiom: Axiom, grids: &[AuditGrid]) -> Result<()> {
    if grids.is_empty() {
        return bad(format!("axiom {axiom} needs at least one --grid"));
    }
    Ok(())
}

fn audit(cli: &Cli, args: &AuditArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut model = model_from(&args.model)?;
    if let Some(d) = &args.dummy {
        model = with_dummy(model, d)?;
    }
    let names = model.feature_names().to_vec();
    let unit = rate_unit(cli.rates, &names);
    let (x, b) = resolve_pair(&args.pair, &names, unit)?;
    let deltas = args
        .deltas
        .as_deref()
        .map(|d| parse_list(d, "delta"))
        .transpose()?;
    let grids = args
        .grids
        .iter()
        .map(|g| {
            let grid = parse_grid(g, &x, &b, unit)?;
            match &deltas {
                Some(d) => grid.with_deltas(d.clone()),
                None => Ok(grid),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let axioms = args
        .axiom
        .split(',')
        .map(str::parse::<Axiom>)
        .collect::<Result<Vec<_>>>()?;
    let atts = attributors(&args.method, &args.pair)?;
    let tol = Tolerance {
        abs: args.tol_abs,
        rel: args.tol_rel,
    };
    if !(tol.abs >= 0.0 && tol.rel >= 0.0) {
        return bad("tolerances must be nonnegative");
    }
    let compare = match &args.compare_model {
        Some(m) => {
            let g = build_model(
                &m.parse::<ModelSource>()?,
                &parse_params(&args.compare_params)?,
            )?;
            if g.feature_names() != names.as_slice() {
                return bad(format!(
                    "compare model features ({}) differ from the model's ({})",
                    g.feature_names().join(","),
                    names.join(",")
                ));
            }
            Some(g)
        }
        None => None,
    };
    let domain: Option<TrainingDomain> = match &args.domain {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => None,
    };

    let mut bundle = ReportBundle::default();
    let m = model.as_ref();
    for &axiom in &axioms {
        for att in &atts {
            match axiom {
                Axiom::Aim => {
                    need_grids(axiom, &grids)?;
                    bundle.push(check_aim(att, m, &grids, tol)?);
                }
                Axiom::Dim => {
                    need_grids(axiom, &grids)?;
                    for g in &grids {
                        bundle.push(check_dim(att, m, g, tol)?);
                    }
                }
                Axiom::Dme | Axiom::Rdme | Axiom::Ime => {
                    need_grids(axiom, &grids)?;
                    for g in &grids {
                        bundle.push(check_marginal(att, m, g, axiom, tol)?);
                    }
                }
                Axiom::Fmd => {
                    need_grids(axiom, &grids)?;
                    let Some(g_model) = &compare else {
                        return bad("FMD needs --compare-model");
                    };
                    for g in &grids {
                        let map = SharedFeatureMap {
                            alpha: (g.feature, g.feature),
                            shared: (0..names.len())
                                .filter(|&i| i != g.feature)
                                .map(|i| (i, i))
                                .collect(),
                        };
                        let fg = FmdGrid {
                            values: g.values.clone(),
                            f_context: x.clone(),
                            f_baseline: b.clone(),
                            g_context: x.clone(),
                            g_baseline: b.clone(),
                        };
                        bundle.push(check_fmd(att, m, g_model.as_ref(), &map, &fg, tol)?);
                    }
                }
                Axiom::Gd => {
                    need_grids(axiom, &grids)?;
                    let Some(d) = &args.dummy else {
                        return bad("GD needs --dummy");
                    };
                    let idx = x.index_of(d).expect("dummy added to the model");
                    for g in &grids {
                        bundle.push(check_generalized_dummy(att, m, idx, g, tol)?);
                    }
                }
                Axiom::Cg => {
                    let Some(dom) = &domain else {
                        return bad("CG needs --domain");
                    };
                    let result = att.attribute(m, &x, &b)?;
                    let result = if dom.names() == names.as_slice() {
                        result
                    } else {
                        project_result(&result, dom.names())?
                    };
                    bundle.push(check_cg(&result, dom)?);
                }
            }
        }
    }

    emit(&to_json_pretty(&bundle)?, args.out.as_deref(), out)?;
    for (key, [pass, violated, na]) in bundle.tally() {
        writeln!(
            err,
            "{key}: {pass} pass, {violated} violated, {na} not applicable"
        )
        .map_err(io_err)?;
    }
    if args.fail_on_violation && bundle.any_violation() {
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

fn vix(cli: &Cli, args: &VixArgs, out: &mut dyn Write) -> CmdResult {
    let text = fs::read_to_string(&args.chain)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let Some(k_col) = col("K") else {
        return bad("chain CSV needs a K column");
    };
    let (put_col, call_col) = (col("put"), col("call"));
    let mut input = VixInput {
        strikes: Vec::new(),
        put_quotes: Vec::new(),
        call_quotes: Vec::new(),
        forward: args.forward,
        rate: cli.rates.unwrap_or_default().to_decimal(args.rate),
        tau: args.tau,
    };
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let number = |i: Option<usize>, what: &str| -> Result<f64> {
            let field = i.and_then(|i| row.get(i)).unwrap_or("");
            field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{what} quote missing or not a number: {field:?}"),
            })
        };
        let k = number(Some(k_col), "strike")?;
        if k <= args.forward {
            input.put_quotes.push(number(put_col, "put")?);
        } else {
            input.call_quotes.push(number(call_col, "call")?);
        }
        input.strikes.push(k);
    }
    writeln!(out, "{}", vix_from_chain(&input)?).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn domain(cli: &Cli, args: &DomainArgs, out: &mut dyn Write) -> CmdResult {
    let columns: Option<Vec<String>> = args
        .columns
        .as_ref()
        .map(|c| c.split(',').map(|s| s.trim().to_string()).collect());
    let points = match (&args.data, args.leverage) {
        (Some(path), None) => crate::inputs::load_points(path, columns.as_deref())?,
        (None, Some(n)) => {
            if columns.is_some() {
                return bad("--columns applies to --data only");
            }
            let spec = LeverageSpec::new(
                n,
                parse_pair(&args.s_range, "S range")?,
                parse_pair(&args.sigma_range, "sigma range")?,
                args.correlation,
                cli.seed,
            );
            generate_leverage_data(&spec)?
        }
        _ => return bad("give exactly one of --data and --leverage"),
    };
    let Some(first) = points.first() else {
        return bad("no sample points");
    };
    let mode = match args.mode.as_str() {
        "axis-box" | "box" => DomainMode::AxisBox,
        "hull2d" | "hull" => {
            let pair = match &args.pair {
                None => (0, 1),
                Some(p) => {
                    let idx: Vec<usize> = p
                        .split(',')
                        .map(|n| {
                            first.index_of(n.trim()).ok_or_else(|| {
                                Error::Contract(format!("no column {n:?} for the hull pair"))
                            })
                        })
                        .collect::<Result<_>>()?;
                    match idx.as_slice() {
                        &[a, b] => (a, b),
                        _ => return bad("--pair needs exactly two names"),
                    }
                }
            };
            DomainMode::Hull2d { pair }
        }
        "point-cloud" | "cloud" => DomainMode::PointCloud {
            radius: args.radius,
        },
        other => return bad(format!("unknown domain mode {other:?}")),
    };
    let fitted = fit_domain(&points, mode)?;
    emit(&to_json_pretty(&fitted)?, args.out.as_deref(), out)?;
    Ok(EXIT_OK)
}
