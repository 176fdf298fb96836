//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export is a thin wrapper over a plain function returning
//! `Result<String, String>` so the logic is testable natively.

use lensdist::families::{cubic_sym, quad_sym};
use lensdist::io::{self, Representation};
use lensdist::{symmetry, warp};
use wasm_bindgen::prelude::*;

pub fn render(model_json: &str, shape: &str, count: usize, extent: f64) -> Result<String, String> {
    let f = io::parse_model(model_json).map_err(|e| e.to_string())?;
    let points = match shape {
        "circle" => warp::circle_points(extent, count),
        "grid" => warp::grid_points(extent, count),
        other => return Err(format!("unknown shape `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    Ok(lensdist::svg::render_field(&warp::sample_field(&f, &points), ""))
}

pub fn verify(model_json: &str, tol: f64) -> Result<String, String> {
    let f = io::parse_model(model_json).map_err(|e| e.to_string())?;
    let report = symmetry::reflection_symmetry(&f, tol).map_err(|e| e.to_string())?;
    Ok(io::to_json(&report))
}

/// Quadratic plus cubic model symmetric about the axis at angle `theta`.
/// `coeffs` is `[a, b, c, d, e, f, g]`.
pub fn symmetric(theta: f64, coeffs: &[f64]) -> Result<String, String> {
    let [a, b, c, d, e, f, g] = coeffs else {
        return Err(format!("expected 7 coefficients, got {}", coeffs.len()));
    };
    let model = quad_sym(theta, *a, *b, *c).sum(&cubic_sym(theta, *d, *e, *f, *g));
    Ok(io::model_to_json(&model, Representation::Complex))
}

#[wasm_bindgen(js_name = renderField)]
pub fn render_field_js(model_json: &str, shape: &str, count: usize, extent: f64) -> Result<String, JsError> {
    render(model_json, shape, count, extent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = verifySymmetry)]
pub fn verify_js(model_json: &str, tol: f64) -> Result<String, JsError> {
    verify(model_json, tol).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = symmetricModel)]
pub fn symmetric_js(theta: f64, coeffs: &[f64]) -> Result<String, JsError> {
    symmetric(theta, coeffs).map_err(|e| JsError::new(&e))
}
