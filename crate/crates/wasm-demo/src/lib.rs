//! Browser bindings: run a scenario, check its coefficient condition and
//! tabulate the independence probability of random coefficients.
//!
//! Each export takes and returns plain strings so the page needs no glue
//! beyond what `wasm-bindgen` generates. The `*_json` functions hold the
//! logic and are callable natively.

use pathguard::coefficients::{p1, p1_exact};
use pathguard::harness::{run_scenario, verify_only, Scenario};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct SimulateOut {
    passed: bool,
    success_rate: f64,
    summary: String,
}

#[derive(Serialize)]
struct CurvePoint {
    bits: u32,
    q: f64,
    p1: f64,
    p1_exact: f64,
}

pub fn simulate_json(toml: &str) -> Result<String, String> {
    let s = Scenario::parse(toml).map_err(|e| e.to_string())?;
    let r = run_scenario(&s).map_err(|e| e.to_string())?;
    let out = SimulateOut {
        passed: r.passed(),
        success_rate: r.success_rate(),
        summary: r.summary(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn verify_json(toml: &str) -> Result<String, String> {
    let s = Scenario::parse(toml).map_err(|e| e.to_string())?;
    let reports = verify_only(&s).map_err(|e| e.to_string())?;
    serde_json::to_string(&reports).map_err(|e| e.to_string())
}

pub fn claim1_curve_json(max_bits: u32) -> String {
    let points: Vec<CurvePoint> = (1..=max_bits.min(16))
        .map(|bits| {
            let q = f64::from(1u32 << bits);
            CurvePoint { bits, q, p1: p1(q), p1_exact: p1_exact(q) }
        })
        .collect();
    serde_json::to_string(&points).expect("plain numbers serialize")
}

/// Run a scenario given as TOML; returns `{passed, success_rate, summary}`.
#[wasm_bindgen]
pub fn simulate(toml: &str) -> Result<String, JsError> {
    simulate_json(toml).map_err(|e| JsError::new(&e))
}

/// Check the `[verify]` section of a scenario; returns the reports as JSON.
#[wasm_bindgen]
pub fn verify(toml: &str) -> Result<String, JsError> {
    verify_json(toml).map_err(|e| JsError::new(&e))
}

/// Independence probability of four random columns for `GF(2^1)..GF(2^max_bits)`.
#[wasm_bindgen]
pub fn claim1_curve(max_bits: u32) -> String {
    claim1_curve_json(max_bits)
}
