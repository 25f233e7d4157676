//! WebAssembly bindings for the demo page in `www/`. Every export returns a
//! JSON string; errors surface as JavaScript exceptions.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js(r: riskattr::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = bondCurves)]
pub fn bond_curves(
    maturity: f64,
    principal: f64,
    r_max: f64,
    count: usize,
    ig_points: usize,
) -> Result<String, JsError> {
    to_js(demo::bond_curves(
        maturity, principal, r_max, count, ig_points,
    ))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = optionCurves)]
pub fn option_curves(
    kind: &str,
    baseline: &str,
    explicand: &str,
    feature: &str,
    lo: f64,
    hi: f64,
    count: usize,
    percent_rates: bool,
) -> Result<String, JsError> {
    to_js(demo::option_curves(
        kind,
        baseline,
        explicand,
        feature,
        lo,
        hi,
        count,
        percent_rates,
    ))
}

#[wasm_bindgen(js_name = leverageDomain)]
pub fn leverage_domain(
    n: usize,
    correlation: f64,
    seed: u32,
    baseline_s: f64,
    baseline_sigma: f64,
    explicand_s: f64,
    explicand_sigma: f64,
) -> Result<String, JsError> {
    to_js(demo::leverage_domain(
        n,
        correlation,
        u64::from(seed),
        [baseline_s, baseline_sigma],
        [explicand_s, explicand_sigma],
    ))
}
