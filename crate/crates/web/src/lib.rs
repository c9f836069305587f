//! Browser bindings: an incoherence heatmap, projection with a Dutch book,
//! and merging two letter distributions.

use coherence::aggregation::AggregationMethod;
use coherence::ngram::{ContextSide, NgramHeuristic};
use coherence::projection::closed_form_complement_pair;
use coherence::{dutch_book, predict_masked, project, CredenceBase, Dissimilarity, SolverConfig, SummationSet};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn loss(name: &str) -> Result<Dissimilarity, String> {
    match name {
        "f" => Ok(Dissimilarity::BinaryKl),
        "fo" => Ok(Dissimilarity::TransposedKl),
        "sq" => Ok(Dissimilarity::Squared),
        "half-f" => Ok(Dissimilarity::HalfF),
        "half-fo" => Ok(Dissimilarity::HalfFo),
        other => Err(format!("unknown loss `{other}`")),
    }
}

/// `L*` for an event and its complement on a `(steps+1)²` grid, row `i`
/// holding `q_E = i/steps`. Points where `L*` is infinite are `NaN`.
pub fn pair_grid(loss_name: &str, steps: usize) -> Result<Vec<f64>, String> {
    let spec = loss(loss_name)?;
    if steps == 0 || steps > 1000 {
        return Err("steps must lie in 1..=1000".into());
    }
    let mut out = Vec::with_capacity((steps + 1) * (steps + 1));
    for i in 0..=steps {
        for j in 0..=steps {
            let (q1, q2) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let v = match closed_form_complement_pair(q1, q2, &spec) {
                Ok((_, l)) => l,
                Err(_) => {
                    let base = CredenceBase::from_matrix(&[[1.0, 0.0], [0.0, 1.0]], &[q1, q2], None).map_err(|e| e.to_string())?;
                    project(&base, &spec, &SolverConfig::default()).map_or(f64::NAN, |r| r.incoherence)
                }
            };
            out.push(if v.is_finite() { v } else { f64::NAN });
        }
    }
    Ok(out)
}

/// Parses one event per line as 0/1 entries separated by spaces or commas.
fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| match t {
                    "0" => Ok(0.0),
                    "1" => Ok(1.0),
                    _ => Err(format!("event {}: `{t}` is not 0 or 1", i + 1)),
                })
                .collect()
        })
        .collect()
}

/// Projection and, when the credences are incoherent, a Dutch book, as JSON.
pub fn project_report(rows: &str, credences: &[f64], loss_name: &str) -> Result<String, String> {
    let spec = loss(loss_name)?;
    let rows = parse_rows(rows)?;
    let base = CredenceBase::from_matrix(&rows, credences, None).map_err(|e| e.to_string())?;
    let r = project(&base, &spec, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let book = dutch_book(&base).map(|c| json!({ "stakes": c.a, "payouts": c.payouts, "cost": c.cost }));
    Ok(json!({
        "p_star": r.p_star,
        "pi_star": r.pi_star.as_slice(),
        "incoherence": r.incoherence,
        "converged": r.converged,
        "dutch_book": book,
    })
    .to_string())
}

fn heuristic(side: ContextSide, probs: &[f64]) -> Result<NgramHeuristic, String> {
    if probs.is_empty() || probs.len() > 26 {
        return Err("give between 1 and 26 probabilities".into());
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p > 0.0) || !p.is_finite()) || !(total > 0.0) {
        return Err("probabilities must be positive".into());
    }
    Ok(NgramHeuristic {
        side,
        context: String::new(),
        support: (b'a'..).take(probs.len()).map(char::from).collect(),
        probs: probs.iter().map(|p| p / total).collect(),
    })
}

/// Merged beliefs for two distributions over the same letters.
pub fn merge(q1: &[f64], q2: &[f64], method: &str, loss_name: &str) -> Result<Vec<f64>, String> {
    if q1.len() != q2.len() {
        return Err("both distributions need the same number of letters".into());
    }
    let summation = match method {
        "stated" => SummationSet::StatedEvents,
        "full-i" => SummationSet::FullI,
        "basis" => SummationSet::BasisB,
        "asym" => SummationSet::AsymmetricBasis,
        other => return Err(format!("unknown method `{other}`")),
    };
    let agg = AggregationMethod::new(summation, loss(loss_name)?).map_err(|e| e.to_string())?;
    let h1 = heuristic(ContextSide::AfterPrefix, q1)?;
    let h2 = heuristic(ContextSide::BeforeSuffix, q2)?;
    predict_masked(&h1, &h2, &agg, &SolverConfig::default()).map(|p| p.p_star).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = pairGrid)]
pub fn pair_grid_js(loss_name: &str, steps: usize) -> Result<Vec<f64>, JsError> {
    pair_grid(loss_name, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = projectReport)]
pub fn project_report_js(rows: &str, credences: &[f64], loss_name: &str) -> Result<String, JsError> {
    project_report(rows, credences, loss_name).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = merge)]
pub fn merge_js(q1: &[f64], q2: &[f64], method: &str, loss_name: &str) -> Result<Vec<f64>, JsError> {
    merge(q1, q2, method, loss_name).map_err(|e| JsError::new(&e))
}
