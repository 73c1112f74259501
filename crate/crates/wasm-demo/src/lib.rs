//! Browser bindings for three interactive views: the `I` against `n`
//! power-law fit on a synthetic panel, the mean-rescaling collapse of two
//! distributions, and power-tail estimation with the implied `ξ_r`.
//!
//! Every export returns a JSON string; errors come back as a thrown string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use citescale_core::binfit::{self, BinningConfig, Weighting};
use citescale_core::distributions::{self, ScaledDistribution, TailParams};
use citescale_core::indices::{index_table, Index};
use citescale_core::synth::{self, SynthSpec};

const MAX_PLOTTED_POINTS: usize = 1500;

fn text(err: impl std::fmt::Display) -> String {
    err.to_string()
}

/// Synthetic one-year panel, its `I` against `n` scatter, the log-binned
/// means and the fitted power law.
pub fn power_fit(n_journals: usize, xi: f64, noise: f64, seed: u64) -> Result<Value, String> {
    let spec = SynthSpec {
        n_journals,
        n_years: 1,
        coupling_exponent: xi,
        noise_level: noise,
        seed,
        ..SynthSpec::default()
    };
    let panel = synth::generate(&spec).map_err(text)?.panel;
    let table = index_table(&panel, None, None);
    let (points, _) = table.pairs(Index::AnnualCitations, Index::ImpactFactor, spec.first_year);
    let binned = binfit::log_bin(&points, &BinningConfig::default()).map_err(text)?;
    let fit = binfit::fit_power_law(&binned, Weighting::Unweighted).map_err(text)?;
    let stride = points.len().div_ceil(MAX_PLOTTED_POINTS).max(1);
    let shown: Vec<[f64; 2]> = points.iter().step_by(stride).map(|&(x, y)| [x, y]).collect();
    Ok(json!({
        "points": shown,
        "bins": binned.bin_centers.iter().zip(&binned.bin_means).map(|(x, y)| [*x, *y]).collect::<Vec<_>>(),
        "fit": fit,
        "truth": { "a": spec.coupling_amplitude, "xi": xi },
    }))
}

fn curve(d: &ScaledDistribution) -> Vec<[f64; 2]> {
    d.scaled_x
        .iter()
        .zip(&d.scaled_density)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| [*x, *y])
        .collect()
}

/// Two lognormal samples whose means differ by `ratio`, shown raw and after
/// rescaling by their means, with the distance between the curves.
pub fn collapse(sigma: f64, ratio: f64, n: usize, seed: u64) -> Result<Value, String> {
    if !(ratio > 0.0) {
        return Err("ratio must be positive".into());
    }
    let a = synth::lognormal_sample(0.0, sigma, n, seed);
    let b: Vec<f64> = synth::lognormal_sample(0.0, sigma, n, seed.wrapping_add(1))
        .into_iter()
        .map(|v| v * ratio)
        .collect();
    let (da, db) = (
        distributions::empirical_pdf(&a, 10).map_err(text)?,
        distributions::empirical_pdf(&b, 10).map_err(text)?,
    );
    let (ra, rb) = (ScaledDistribution::unscaled(&da, "a"), ScaledDistribution::unscaled(&db, "b"));
    let (sa, sb) = (
        distributions::scale_collapse(&da, "a").map_err(text)?,
        distributions::scale_collapse(&db, "b").map_err(text)?,
    );
    Ok(json!({
        "raw": [curve(&ra), curve(&rb)],
        "scaled": [curve(&sa), curve(&sb)],
        "distance_raw": distributions::collapse_distance(&ra, &rb).map_err(text)?,
        "distance_scaled": distributions::collapse_distance(&sa, &sb).map_err(text)?,
        "means": [da.sample_mean, db.sample_mean],
    }))
}

fn tail(gamma: f64, n: usize, seed: u64) -> Result<Value, String> {
    let mut values = synth::pareto_sample(gamma, 1.0, n, seed);
    let dist = distributions::empirical_pdf(&values, 10).map_err(text)?;
    values.sort_by(f64::total_cmp);
    let x_min = values[values.len() * 9 / 10];
    let fit = distributions::fit_power_tail(&dist, x_min).map_err(text)?;
    let TailParams::Power { gamma: binned, mle, .. } = fit.params else {
        return Err("unexpected tail family".into());
    };
    let scaled = ScaledDistribution::unscaled(&dist, "tail");
    Ok(json!({
        "curve": curve(&scaled),
        "x_min": x_min,
        "gamma_binned": binned,
        "gamma_mle": mle.map(|m| m.gamma),
    }))
}

/// Pareto samples for `I` and `r` tails, both estimators on each, and `ξ_r`
/// from the true and the estimated exponents.
pub fn tails(gamma_i: f64, gamma_r: f64, n: usize, seed: u64) -> Result<Value, String> {
    let ti = tail(gamma_i, n, seed)?;
    let tr = tail(gamma_r, n, seed.wrapping_add(1))?;
    let est = |v: &Value| v["gamma_mle"].as_f64().or(v["gamma_binned"].as_f64()).unwrap_or(f64::NAN);
    Ok(json!({
        "impact": ti,
        "rate": tr,
        "xi_exact": distributions::xi_from_tail_exponents(gamma_i, gamma_r).map_err(text)?,
        "xi_estimated": distributions::xi_from_tail_exponents(est(&ti), est(&tr)).map_err(text)?,
    }))
}

#[wasm_bindgen(js_name = powerFit)]
pub fn power_fit_js(n_journals: u32, xi: f64, noise: f64, seed: u32) -> Result<String, JsValue> {
    power_fit(n_journals as usize, xi, noise, seed as u64)
        .map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = collapseDemo)]
pub fn collapse_js(sigma: f64, ratio: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    collapse(sigma, ratio, n as usize, seed as u64)
        .map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = tailDemo)]
pub fn tails_js(gamma_i: f64, gamma_r: f64, n: u32, seed: u32) -> Result<String, JsValue> {
    tails(gamma_i, gamma_r, n as usize, seed as u64)
        .map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e))
}
