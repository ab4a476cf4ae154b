//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every operation returns a JSON string. The `*_json` functions carry the
//! logic and are callable natively; the exported wrappers only turn errors
//! into JavaScript exceptions.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cmc_foliate::hemisphere::Hemisphere;
use cmc_foliate::metric::{inverse_metric_series, MetricModel};
use cmc_foliate::solver::{chart_point, moment_constant, moment_constant_closed_form, Solver, SolverSettings, TauMode};

/// Largest `l_max` accepted from the page.
pub const MAX_L: usize = 10;

fn check_l(l_max: usize) -> Result<(), String> {
    if (2..=MAX_L).contains(&l_max) {
        Ok(())
    } else {
        Err(format!("l_max must lie in 2..={MAX_L}, got {l_max}"))
    }
}

fn bump(a: f64, q1: f64, q2: f64) -> Result<MetricModel, String> {
    MetricModel::bump(2, a, DMatrix::from_diagonal(&DVector::from_vec(vec![q1, q2]))).map_err(|e| e.to_string())
}

fn monomial(exponent: &[u8]) -> String {
    let names = ["x1", "x2", "t"];
    let parts: Vec<String> = exponent
        .iter()
        .zip(names)
        .filter(|(e, _)| **e > 0)
        .map(|(e, name)| if *e == 1 { name.to_string() } else { format!("{name}^{e}") })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" ")
    }
}

/// Kernel projection constant from quadrature against its closed form.
pub fn moments_json(n: usize, l_max: usize) -> Result<String, String> {
    check_l(l_max)?;
    let space = Hemisphere::build(n, l_max, 2 * l_max + 8).map_err(|e| e.to_string())?;
    let c_n = moment_constant(&space);
    let closed = moment_constant_closed_form(n);
    Ok(json!({ "n": n, "c_n": c_n, "closed_form": closed, "deviation": c_n - closed }).to_string())
}

/// Inverse metric coefficients in Fermi coordinates of the bump boundary at `tau`.
pub fn expand_json(a: f64, q1: f64, q2: f64, tau1: f64, tau2: f64) -> Result<String, String> {
    let model = bump(a, q1, q2)?;
    let jet = model.jet_at(&[tau1, tau2]).map_err(|e| e.to_string())?;
    let m = inverse_metric_series(&jet).map_err(|e| e.to_string())?;
    let mut entries = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let terms: Vec<Value> = m
                .get(i, j)
                .terms()
                .filter(|(_, c)| **c != 0.0)
                .map(|(e, c)| json!({ "monomial": monomial(e), "coefficient": c }))
                .collect();
            entries.push(json!({ "row": i, "col": j, "terms": terms }));
        }
    }
    Ok(json!({ "entries": entries }).to_string())
}

/// Leaves of the bump foliation on `count` radii up to `r_max`, each with its
/// cross-section in the `(x1, t)` plane.
pub fn foliate_json(a: f64, q1: f64, q2: f64, r_max: f64, count: usize, l_max: usize) -> Result<String, String> {
    check_l(l_max)?;
    if !(2..=12).contains(&count) {
        return Err(format!("leaf count must lie in 2..=12, got {count}"));
    }
    let space = Hemisphere::build(2, l_max, 2 * l_max + 8).map_err(|e| e.to_string())?;
    let solver = Solver::new(bump(a, q1, q2)?, space, SolverSettings::default()).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (1..=count).map(|k| r_max * k as f64 / count as f64).collect();
    let result = solver.build_foliation(&grid, &TauMode::Solve, 5).map_err(|e| e.to_string())?;
    let leaves: Vec<Value> = result
        .leaves
        .iter()
        .map(|leaf| {
            let section: Vec<[f64; 2]> = (0..=48)
                .map(|k| {
                    let s = -1.0 + k as f64 / 24.0;
                    let y = chart_point(leaf, &[s, 0.0]);
                    [y[0], y[2]]
                })
                .collect();
            json!({
                "r": leaf.r,
                "tau": leaf.tau,
                "kperp_residual": leaf.kperp_residual,
                "kernel_residual": leaf.kernel_residual,
                "converged": leaf.converged,
                "section": section,
            })
        })
        .collect();
    Ok(json!({
        "c_n": solver.c_n(),
        "leaves": leaves,
        "failure": result.failure,
        "det_min": result.diagnostics.as_ref().map(|d| d.det_min),
        "free_boundary_max_angle": result.diagnostics.as_ref().map(|d| d.free_boundary_max_angle),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn moments(n: usize, l_max: usize) -> Result<String, JsValue> {
    moments_json(n, l_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn expand(a: f64, q1: f64, q2: f64, tau1: f64, tau2: f64) -> Result<String, JsValue> {
    expand_json(a, q1, q2, tau1, tau2).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn foliate(a: f64, q1: f64, q2: f64, r_max: f64, count: usize, l_max: usize) -> Result<String, JsValue> {
    foliate_json(a, q1, q2, r_max, count, l_max).map_err(|e| JsValue::from_str(&e))
}
