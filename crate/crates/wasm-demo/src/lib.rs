//! Browser demo of the solver-free parts of `gridmga-core`.
//!
//! Every operation takes and returns JSON text. The plain functions in
//! [`demo`] do the work and are tested natively; the `#[wasm_bindgen]`
//! exports only convert errors into JavaScript exceptions.

pub mod demo;

use wasm_bindgen::prelude::*;

pub use demo::DemoError;

fn to_js(result: Result<String, DemoError>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

/// Names of the cases [`power_flow`] accepts.
#[wasm_bindgen]
pub fn demo_cases() -> String {
    demo::case_list()
}

/// DC power flow of a demo case with the given branch ids open, under a
/// merit-order dispatch, plus the loading metrics and a switching sequence.
#[wasm_bindgen]
pub fn power_flow(case: &str, open_branches_json: &str) -> Result<String, JsError> {
    to_js(demo::power_flow(case, open_branches_json))
}

/// Feedback weights of every encoding for a ranking over bit-string topologies.
#[wasm_bindgen]
pub fn encode_feedback(request_json: &str) -> Result<String, JsError> {
    to_js(demo::encode_feedback(request_json))
}

/// Parses MATPOWER or native JSON case text and lists validation issues.
#[wasm_bindgen]
pub fn validate_case(text: &str) -> Result<String, JsError> {
    to_js(demo::validate_case(text))
}
