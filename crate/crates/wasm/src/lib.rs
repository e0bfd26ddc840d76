//! Browser bindings for `plca`.
//!
//! Every exported function takes and returns plain strings (CSV or JSON) so
//! the page needs no glue beyond `JSON.parse`. The `*_json` functions hold the
//! logic and are tested natively; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use ndarray::{array, Array2};
use plca::io::{format_matrix, model_from_json, model_to_json, parse_matrix};
use plca::{build_empirical, corpus_to_counts, fobj, kld, sample_corpus, sample_loglik, FitConfig, PlcaModel};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest corpus the page may request in one call.
pub const MAX_SAMPLES: u32 = 5_000_000;

fn rows(m: &Array2<f64>) -> Value {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Fits a `k`-class model to a CSV count matrix.
pub fn fit_json(csv: &str, k: u32, seed: u32, restarts: u32, max_iters: u32) -> Result<String, String> {
    let raw = parse_matrix(csv).map_err(|e| e.to_string())?;
    let pi = build_empirical(&raw).map_err(|e| e.to_string())?;
    let cfg = FitConfig::new(k as usize)
        .with_seed(seed as u64)
        .with_max_iters(max_iters as usize);
    let (model, trace, best_seed) =
        plca::cli::fit_restarts(&pi, &cfg, restarts as usize).map_err(|e| e.to_string())?;
    let (m, n, k) = model.dims();
    let mut curve = vec![trace.initial_fobj];
    curve.extend(trace.records.iter().map(|r| r.fobj));
    Ok(json!({
        "dims": { "M": m, "N": n, "K": k },
        "fobj": trace.final_fobj(),
        "kld": trace.final_kld(),
        "termination": trace.termination.as_str(),
        "iterations": trace.iterations(),
        "best_seed": best_seed,
        "trace": curve,
        "input": rows(pi.table()),
        "reconstruction": rows(&model.joint_table()),
        "components": rows(model.components()),
        "mixture": rows(model.mixture()),
        "model": model_to_json(&model),
    })
    .to_string())
}

/// Draws `n` pairs from a model and reports the resulting count table.
pub fn sample_json(model_json: &str, n: u32, seed: u32) -> Result<String, String> {
    if n > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples per request"));
    }
    let model = model_from_json(model_json).map_err(|e| e.to_string())?;
    let (m, groups, _) = model.dims();
    let corpus = sample_corpus(&model, n as usize, seed as u64).map_err(|e| e.to_string())?;
    let counts = corpus_to_counts(&corpus, (m, groups)).map_err(|e| e.to_string())?;
    let empirical = build_empirical(&counts).map_err(|e| e.to_string())?;
    let own = build_empirical(&model.joint_table()).map_err(|e| e.to_string())?;
    Ok(json!({
        "counts": rows(&counts),
        "csv": format_matrix(&counts),
        "kld": kld(&empirical, &model).map_err(|e| e.to_string())?,
        "sample_loglik": sample_loglik(&corpus, &model).map_err(|e| e.to_string())?,
        "expected_loglik": -fobj(&own, &model).map_err(|e| e.to_string())?,
    })
    .to_string())
}

/// A two-class 8x8 count matrix with known structure.
pub fn planted_example_csv() -> String {
    let c0 = [0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0];
    let w0 = [1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.1, 0.0];
    let components = Array2::from_shape_fn((8, 2), |(e, z)| if z == 0 { c0[e] } else { c0[7 - e] });
    let mixture = Array2::from_shape_fn((2, 8), |(z, g)| if z == 0 { w0[g] } else { 1.0 - w0[g] });
    let prior = array![0.1, 0.15, 0.1, 0.15, 0.1, 0.15, 0.1, 0.15];
    let model = PlcaModel::new(prior, mixture, components).expect("valid planted model");
    format_matrix(&model.joint_table().mapv(|p| (p * 1000.0).round()))
}

#[wasm_bindgen]
pub fn fit(csv: &str, k: u32, seed: u32, restarts: u32, max_iters: u32) -> Result<String, JsError> {
    fit_json(csv, k, seed, restarts, max_iters).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample(model_json: &str, n: u32, seed: u32) -> Result<String, JsError> {
    sample_json(model_json, n, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn planted_example() -> String {
    planted_example_csv()
}
