//! Browser bindings: vicinal sampling, ghost matching and tail decay.
//! Every entry point returns a JSON string.

use serde_json::{json, Value};
use vrm_core::cdfdist::{cdf_distance, dkw_decay_experiment};
use vrm_core::rng::derive_seed;
use vrm_core::vicinity::{sample_vicinal, Scope, VicinalDistribution};
use vrm_core::{vicinity_ghost_match, Result, SampleSet, SyntheticDistribution, VicinitySpec, VrmError};
use wasm_bindgen::prelude::*;

fn rows(set: &SampleSet) -> Vec<[f64; 2]> {
    set.rows().map(|r| [r[0], r[1]]).collect()
}

fn vicinity(kind: &str, param: f64) -> Result<VicinitySpec> {
    match kind {
        "dirac" => Ok(VicinitySpec::dirac()),
        "gaussian" => Ok(VicinitySpec::gaussian(param).with_scope(Scope::Joint)),
        "uniform" => Ok(VicinitySpec::uniform_ball(param).with_scope(Scope::Joint)),
        "mixup" => Ok(VicinitySpec::mixup(param)),
        other => Err(VrmError::InvalidParameter(format!("unknown vicinity {other}"))),
    }
}

/// `n` anchors from a noisy line and `m` draws from their vicinal distribution.
pub fn scatter(kind: &str, param: f64, n: usize, m: usize, seed: u64) -> Result<Value> {
    let anchors = SyntheticDistribution::linear_regression(vec![1.0], 0.3).sample(n, derive_seed(seed, 0))?;
    let vd = VicinalDistribution::new(anchors.clone(), vicinity(kind, param)?)?;
    let draws = sample_vicinal(&vd, m, derive_seed(seed, 1))?;
    Ok(json!({ "anchors": rows(&anchors), "draws": rows(&draws) }))
}

/// Two standard Gaussian sets of `n` points and their optimal pairing.
pub fn ghost_pairs(n: usize, seed: u64) -> Result<Value> {
    let dist = SyntheticDistribution::standard_gaussian(1, 1);
    let z = dist.sample(n, derive_seed(seed, 0))?;
    let zp = dist.sample(n, derive_seed(seed, 1))?;
    let m = vicinity_ghost_match(&z, &zp)?;
    let ghosts = m.ghost_samples(&zp);
    let mut max_cdf = 0.0f64;
    for (a, b) in z.rows().zip(ghosts.rows()) {
        max_cdf = max_cdf.max(cdf_distance(&dist, a, b)?);
    }
    Ok(json!({
        "z": rows(&z),
        "zprime": rows(&zp),
        "permutation": m.permutation,
        "total_cost": m.total_cost,
        "max_pair_cdf_distance": max_cdf,
    }))
}

/// Tail frequency of the max-pair CDF distance on a uniform square.
pub fn decay(n_grid: &[usize], xi: f64, trials: usize, seed: u64) -> Result<Value> {
    let report = dkw_decay_experiment(&SyntheticDistribution::uniform_cube(1, 1), n_grid, xi, trials, seed)?;
    serde_json::to_value(report).map_err(|e| VrmError::InvalidParameter(e.to_string()))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn vicinal_scatter(kind: &str, param: f64, n: u32, m: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_js(scatter(kind, param, n as usize, m as usize, seed.into()))
}

#[wasm_bindgen]
pub fn ghost_match(n: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_js(ghost_pairs(n as usize, seed.into()))
}

#[wasm_bindgen]
pub fn dkw_decay(n_grid: Vec<u32>, xi: f64, trials: u32, seed: u32) -> std::result::Result<String, JsError> {
    let grid: Vec<usize> = n_grid.into_iter().map(|n| n as usize).collect();
    to_js(decay(&grid, xi, trials as usize, seed.into()))
}
