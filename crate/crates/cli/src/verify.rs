use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use twoweight::operators::{cell_averages, lp_norm, maximal, mixed_norm_of_talpha};
use twoweight::prooftools::{chain_certificate_with_c1, reduction_compare, rubio_majorant};
use twoweight::testing::{norm_ascent, norm_exact_p2q2, testing_c1_all, AscentOptions};
use twoweight::{Instance, Measure, SimpleFunction};

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub functions: usize,
    pub tol: f64,
    pub restarts: usize,
    pub function_seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub holds: bool,
    pub count: usize,
    /// Smallest relative margin `(rhs − lhs) / max(|lhs|, |rhs|)`; negative
    /// when an inequality fails.
    pub worst_slack: Option<f64>,
    pub witness: Option<Value>,
}

impl CheckResult {
    fn new(check: &'static str) -> Self {
        CheckResult {
            check,
            holds: true,
            count: 0,
            worst_slack: None,
            witness: None,
        }
    }

    /// Records `lhs ≤ rhs` at relative tolerance `tol`.
    fn record(&mut self, lhs: f64, rhs: f64, tol: f64, witness: impl FnOnce() -> Value) {
        let scale = lhs.abs().max(rhs.abs());
        let slack = if scale == 0.0 { 0.0 } else { (rhs - lhs) / scale };
        self.record_slack(slack, lhs <= rhs * (1.0 + tol) || slack >= -tol, witness);
    }

    fn record_slack(&mut self, slack: f64, holds: bool, witness: impl FnOnce() -> Value) {
        self.count += 1;
        self.worst_slack = Some(self.worst_slack.map_or(slack, |w| w.min(slack)));
        if !holds && self.holds {
            self.holds = false;
            self.witness = Some(witness());
        }
    }

    /// Folds another run of the same check into this one.
    pub fn merge(&mut self, other: CheckResult) {
        self.count += other.count;
        self.worst_slack = match (self.worst_slack, other.worst_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if !other.holds && self.holds {
            self.holds = false;
            self.witness = other.witness;
        }
    }
}

pub fn random_function(inst: &Instance, seed: u64) -> SimpleFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..inst.lattice().num_leaves()).map(|_| rng.gen::<f64>()).collect();
    SimpleFunction::new(inst.lattice(), values).expect("length matches")
}

fn function_witness(inst: &Instance, f: &SimpleFunction) -> Value {
    json!({ "function": f.to_document(inst.lattice()) })
}

/// Runs every check that applies to the exponents of `inst`.
pub fn verify_instance(inst: &Instance, opts: &VerifyOptions) -> twoweight::Result<Vec<CheckResult>> {
    let e = inst.exponents();
    let (p, q) = (e.p(), e.q());
    let lattice = inst.lattice();
    let tol = opts.tol;
    let functions: Vec<SimpleFunction> = (0..opts.functions as u64)
        .map(|k| random_function(inst, opts.function_seed.wrapping_mul(1_000_003).wrapping_add(k)))
        .collect();
    let mut checks = Vec::new();

    let c1_all = testing_c1_all(inst);
    let mut necessity = CheckResult::new("necessity");
    for j in lattice.cells().filter(|&j| inst.mu().mass(j) > 0.0) {
        let lhs = c1_all[j.index()].powf(p) * inst.mu().mass(j);
        let rhs = mixed_norm_of_talpha(inst, &SimpleFunction::indicator(lattice, j))?.value.powf(p);
        necessity.record(lhs, rhs, tol, || json!({ "cell": lattice.label(j) }));
    }
    checks.push(necessity);

    let mut jensen = CheckResult::new("jensen");
    for f in &functions {
        let avgs = cell_averages(inst, f)?;
        let avgs_q = cell_averages(inst, &f.map(|v| v.powf(q)))?;
        for &leaf in lattice.leaves() {
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for cell in lattice.chain(leaf) {
                let a = inst.alpha_of(cell).powf(q);
                lhs += a * avgs[cell.index()].powf(q);
                rhs += a * avgs_q[cell.index()];
            }
            jensen.record(lhs, rhs, tol, || {
                json!({ "leaf": lattice.label(leaf), "function": f.to_document(lattice) })
            });
        }
    }
    checks.push(jensen);

    let mut doob = CheckResult::new("doob");
    for f in &functions {
        let lhs = lp_norm(inst, &maximal(inst, f)?, p, Measure::Mu)?.value;
        let rhs = e.p_conj() * lp_norm(inst, f, p, Measure::Mu)?.value;
        doob.record(lhs, rhs, tol, || function_witness(inst, f));
    }
    checks.push(doob);

    if p <= q {
        let c1 = c1_all.iter().copied().fold(0.0, f64::max);
        let mut chain = CheckResult::new("chain-certificate");
        for f in &functions {
            let cert = chain_certificate_with_c1(inst, f, c1)?;
            for step in &cert.steps {
                chain.record(step.lhs, step.rhs, tol, || {
                    json!({ "step": step.label, "function": f.to_document(lattice) })
                });
            }
            chain.record(cert.norm_p, cert.overall_rhs(), tol, || function_witness(inst, f));
        }
        checks.push(chain);
    }

    if q < p {
        let mut rubio = CheckResult::new("rubio-majorant");
        let mut reduction = CheckResult::new("reduction");
        for (k, f) in functions.iter().enumerate() {
            let r = rubio_majorant(inst, f, 1e-12)?;
            let dominates = r.majorant.values().iter().zip(f.values()).all(|(a, b)| a >= b);
            rubio.record_slack(0.0, dominates, || function_witness(inst, f));
            let nf = lp_norm(inst, f, p, Measure::Mu)?.value.powf(q);
            let nbig = lp_norm(inst, &r.majorant, p, Measure::Mu)?.value.powf(q);
            rubio.record(nbig, 2.0 * nf + r.tail_norm_bound, tol, || function_witness(inst, f));
            let violations = r.a1_violations(inst, tol);
            rubio.record_slack(0.0, violations.is_empty(), || {
                json!({ "cells": violations.iter().map(|&c| lattice.label(c)).collect::<Vec<_>>(), "function": f.to_document(lattice) })
            });

            let g = &functions[(k + 1) % functions.len()];
            let cmp = reduction_compare(inst, f, g, 1e-12)?;
            let pair = || json!({ "f": f.to_document(lattice), "g": g.to_document(lattice) });
            reduction.record(cmp.holder_lhs, cmp.holder_rhs, 1e-12, pair);
            reduction.record(cmp.holder_rhs, cmp.rubio_bound, tol, pair);
        }
        checks.push(rubio);
        checks.push(reduction);
    }

    if p == 2.0 && q == 2.0 {
        let exact = norm_exact_p2q2(inst)?.value;
        let est = norm_ascent(inst, &AscentOptions { restarts: opts.restarts, seed: opts.function_seed, ..Default::default() })?;
        let mut oracle = CheckResult::new("eigen-oracle");
        let gap = if exact == 0.0 { est.value } else { (est.value - exact).abs() / exact };
        oracle.record_slack(1e-6 - gap, gap <= 1e-6, || {
            json!({ "ascent": est.value, "exact": exact, "function": est.witness.to_document(lattice) })
        });
        checks.push(oracle);
    }
    Ok(checks)
}

/// Merges per-instance results by check name, in first-seen order.
pub fn aggregate(runs: Vec<(Option<u64>, Vec<CheckResult>)>) -> Vec<CheckResult> {
    let mut order = Vec::new();
    let mut merged: BTreeMap<&'static str, CheckResult> = BTreeMap::new();
    for (seed, checks) in runs {
        for mut check in checks {
            if let (Some(seed), Some(w)) = (seed, check.witness.as_mut()) {
                w["seed"] = json!(seed);
            }
            match merged.get_mut(check.check) {
                Some(existing) => existing.merge(check),
                None => {
                    order.push(check.check);
                    merged.insert(check.check, check);
                }
            }
        }
    }
    order.into_iter().map(|name| merged.remove(name).expect("inserted")).collect()
}
