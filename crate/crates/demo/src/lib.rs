//! Browser bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the page draws it on a canvas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use twoweight::cantor::{
    closed_form_c1_max, closed_form_f_norm, closed_form_lhs_exact, closed_form_lhs_lower, summarize, CantorConfig,
    CantorRow,
};
use twoweight::lattice::{random_instance, RandomParams};
use twoweight::operators::maximal;
use twoweight::prooftools::rubio_majorant;
use twoweight::testing::{norm_ascent, verdict, AscentOptions, ReportDocument, TestingReport, DEFAULT_THRESHOLD};
use twoweight::SimpleFunction;

#[derive(Serialize)]
struct CantorCurves {
    rows: Vec<CantorRow>,
    /// `‖T_α f‖^p` from its closed form, per row.
    lhs: Vec<f64>,
    predicted_exponent: Option<f64>,
    c1_insufficient: bool,
}

/// Closed-form Cantor curves for depths `1..=max_depth`.
pub fn cantor_curves_json(p: f64, q: f64, r: f64, max_depth: usize) -> Result<String, String> {
    if !(1..=512).contains(&max_depth) {
        return Err("depth must be between 1 and 512".into());
    }
    let base = CantorConfig::boundary(1, p, q, r).map_err(|e| e.to_string())?;
    let mut rows: Vec<CantorRow> = Vec::with_capacity(max_depth);
    let mut lhs = Vec::with_capacity(max_depth);
    for depth in 1..=max_depth {
        let config = base.with_depth(depth);
        let lhs_lower = closed_form_lhs_lower(&config);
        rows.push(CantorRow {
            depth,
            c1: closed_form_c1_max(&config).1,
            f_norm: closed_form_f_norm(&config),
            lhs_lower,
            lhs_exact: None,
            ratio_to_prev: rows.last().map(|prev| lhs_lower / prev.lhs_lower),
        });
        lhs.push(closed_form_lhs_exact(&config));
    }
    let summary = summarize(&base, &rows).expect("at least one row");
    let doc = CantorCurves {
        rows,
        lhs,
        predicted_exponent: base.divergence_exponent(),
        c1_insufficient: summary.c1_insufficient,
    };
    Ok(serde_json::to_string(&doc).expect("serializes"))
}

#[derive(Serialize)]
struct Exploration {
    report: ReportDocument,
    leaves: usize,
    mu: Vec<f64>,
    nu: Vec<f64>,
    witness: Vec<f64>,
}

fn params(branching: usize, depth: usize, p: f64, q: f64) -> Result<RandomParams, String> {
    if branching.checked_pow(depth as u32).is_none_or(|n| n > 1024) {
        return Err("at most 1024 leaves in the browser".into());
    }
    Ok(RandomParams { branching, depth, p, q, ..Default::default() })
}

/// Testing constants, norm estimate and verdict for a random instance.
pub fn explore_instance_json(seed: u64, branching: usize, depth: usize, p: f64, q: f64, restarts: usize) -> Result<String, String> {
    let inst = random_instance(seed, &params(branching, depth, p, q)?).map_err(|e| e.to_string())?;
    let report = TestingReport::compute(&inst).map_err(|e| e.to_string())?;
    let est = norm_ascent(&inst, &AscentOptions { restarts, seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let v = verdict(&inst, &report, &est, DEFAULT_THRESHOLD);
    let doc = Exploration {
        report: ReportDocument::new(&inst, &report, &est, v),
        leaves: inst.lattice().num_leaves(),
        mu: inst.mu().leaf_masses().to_vec(),
        nu: inst.nu().leaf_masses().to_vec(),
        witness: est.witness.values().to_vec(),
    };
    Ok(serde_json::to_string(&doc).expect("serializes"))
}

#[derive(Serialize)]
struct LeafProfile {
    f: Vec<f64>,
    maximal: Vec<f64>,
    majorant: Vec<f64>,
    mu: Vec<f64>,
    truncation_k: usize,
    norm_ratio: f64,
    a1_constant: f64,
    a1_bound: f64,
}

/// Leafwise `f`, `M_μ f` and the Rubio majorant `F` for a random instance and
/// a random `f` (requires `q < p`).
pub fn rubio_profile_json(seed: u64, branching: usize, depth: usize, p: f64, q: f64, f_seed: u64) -> Result<String, String> {
    let inst = random_instance(seed, &params(branching, depth, p, q)?).map_err(|e| e.to_string())?;
    // a few isolated spikes make the majorant's spreading visible
    let mut rng = ChaCha8Rng::seed_from_u64(f_seed);
    let values = (0..inst.lattice().num_leaves())
        .map(|_| {
            let u: f64 = rng.gen();
            if u < 0.8 {
                0.1 * u
            } else {
                5.0 * u
            }
        })
        .collect();
    let f = SimpleFunction::new(inst.lattice(), values).map_err(|e| e.to_string())?;
    let m = maximal(&inst, &f).map_err(|e| e.to_string())?;
    let r = rubio_majorant(&inst, &f, 1e-12).map_err(|e| e.to_string())?;
    let doc = LeafProfile {
        f: f.values().to_vec(),
        maximal: m.values().to_vec(),
        majorant: r.majorant.values().to_vec(),
        mu: inst.mu().leaf_masses().to_vec(),
        truncation_k: r.truncation_k,
        norm_ratio: r.norm_ratio,
        a1_constant: r.a1_constant,
        a1_bound: r.a1_bound(),
    };
    Ok(serde_json::to_string(&doc).expect("serializes"))
}

#[wasm_bindgen]
pub fn cantor_curves(p: f64, q: f64, r: f64, max_depth: usize) -> Result<String, JsValue> {
    cantor_curves_json(p, q, r, max_depth).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn explore_instance(seed: u32, branching: usize, depth: usize, p: f64, q: f64, restarts: usize) -> Result<String, JsValue> {
    explore_instance_json(seed as u64, branching, depth, p, q, restarts).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rubio_profile(seed: u32, branching: usize, depth: usize, p: f64, q: f64, f_seed: u32) -> Result<String, JsValue> {
    rubio_profile_json(seed as u64, branching, depth, p, q, f_seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn cantor_curves_grow_while_c1_stays_flat() {
        let doc: Value = serde_json::from_str(&cantor_curves_json(2.0, 1.0, 0.7, 64).unwrap()).unwrap();
        let rows = doc["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 64);
        let lower: Vec<f64> = rows.iter().map(|r| r["lhs_lower"].as_f64().unwrap()).collect();
        assert!(lower.windows(2).all(|w| w[1] > w[0]));
        let lhs = doc["lhs"].as_array().unwrap();
        assert!(lhs.iter().zip(&lower).all(|(e, l)| e.as_f64().unwrap() >= *l));
        assert_eq!(doc["c1_insufficient"], true);
        assert!(cantor_curves_json(2.0, 1.0, 0.4, 8).is_err());
        assert!(cantor_curves_json(2.0, 1.0, 0.7, 0).is_err());
    }

    #[test]
    fn explorer_reports_constants() {
        let doc: Value = serde_json::from_str(&explore_instance_json(21, 2, 3, 2.0, 2.0, 4).unwrap()).unwrap();
        assert_eq!(doc["leaves"], 8);
        assert_eq!(doc["witness"].as_array().unwrap().len(), 8);
        assert!(doc["report"]["norm_estimate"].as_f64().unwrap() >= doc["report"]["c1"].as_f64().unwrap() * (1.0 - 1e-12));
        assert!(explore_instance_json(1, 4, 7, 2.0, 2.0, 1).is_err());
    }

    #[test]
    fn rubio_profile_dominates() {
        let doc: Value = serde_json::from_str(&rubio_profile_json(3, 2, 5, 3.0, 1.0, 9).unwrap()).unwrap();
        let f = doc["f"].as_array().unwrap();
        let big = doc["majorant"].as_array().unwrap();
        assert!(f.iter().zip(big).all(|(a, b)| b.as_f64().unwrap() >= a.as_f64().unwrap()));
        assert!(rubio_profile_json(3, 2, 5, 2.0, 2.0, 9).is_err());
    }
}
