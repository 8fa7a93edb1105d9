//! Browser bindings for the qudit CNOT simulator. Every export returns a
//! JSON string; the page in `www/` draws it.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qudit_cnot::cavity::CavityParams;
use qudit_cnot::circuit::builtin_paper_circuit;
use qudit_cnot::metrics::{self, builtin_calibration, conversion_matrix, min_conversion, r_grid};
use qudit_cnot::protocol::gate_action;
use qudit_cnot::state::Complex;

fn pair(z: Complex) -> Value {
    json!([z.re, z.im])
}

/// `{r_down, r_up, abs_down, abs_up}` from the closed-form reflection.
pub fn reflection_json(cooperativity: f64, delta_down: f64, delta_up: f64, delta_c: f64) -> Result<String, String> {
    let p = CavityParams::new(cooperativity, delta_down, delta_up, delta_c).map_err(|e| e.to_string())?;
    let (d, u) = p.reflections().map_err(|e| e.to_string())?;
    Ok(json!({
        "r_down": pair(d),
        "r_up": pair(u),
        "abs_down": d.norm(),
        "abs_up": u.norm(),
    })
    .to_string())
}

/// Rows of `{r, efficiency, fidelity, min_conversion}` for the built-in
/// circuit.
pub fn sweep_json(r_min: f64, r_max: f64, steps: usize) -> Result<String, String> {
    let grid = r_grid(r_min, r_max, steps).map_err(|e| e.to_string())?;
    let def = builtin_calibration().definition;
    let rows = metrics::sweep(&grid, &builtin_paper_circuit(), &def).map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// `{matrix, min_conversion}`: the 16×16 conversion matrix at `r↓ = −r↑ = r`.
pub fn truth_table_json(r: f64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&r) {
        return Err(format!("r = {r} is not in [0, 1]"));
    }
    let runs = gate_action(&builtin_paper_circuit(), &[CavityParams::symmetric(r); 4]).map_err(|e| e.to_string())?;
    let m = conversion_matrix(&runs);
    let min = min_conversion(&m, builtin_calibration().definition.conversion);
    Ok(json!({ "matrix": m, "min_conversion": min }).to_string())
}

#[wasm_bindgen]
pub fn reflection(cooperativity: f64, delta_down: f64, delta_up: f64, delta_c: f64) -> Result<String, JsError> {
    reflection_json(cooperativity, delta_down, delta_up, delta_c).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(r_min: f64, r_max: f64, steps: usize) -> Result<String, JsError> {
    sweep_json(r_min, r_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn truth_table(r: f64) -> Result<String, JsError> {
    truth_table_json(r).map_err(|e| JsError::new(&e))
}
