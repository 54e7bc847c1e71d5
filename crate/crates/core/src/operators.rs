//! Averaging operators, the positive operator `T_α` (scalar and vector
//! forms), the martingale maximal function and the norms built from them.
//!
//! Every sum over `I ∈ L` is evaluated leaf by leaf along the ancestor chain,
//! so each generation-copy of a repeated cell contributes once. Cells with
//! `μ(I) = 0` have average zero and are invisible to the maximal function.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{subtree_sums, CellId, Instance, Lattice, Measure, SimpleFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Lp,
    MixedLpLq,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    pub kind: NormKind,
}

/// `x^e`, exact when `e == 1`.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

pub(crate) fn ensure_finite(lattice: &Lattice, per_cell: &[f64], what: &'static str) -> Result<()> {
    match per_cell.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            cell: lattice.label(lattice.cells().nth(i).expect("index in range")),
            what,
        }),
    }
}

fn ensure_finite_leaves(lattice: &Lattice, per_leaf: &[f64], what: &'static str) -> Result<()> {
    match per_leaf.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(pos) => Err(Error::NonFinite {
            cell: lattice.label(lattice.leaves()[pos]),
            what,
        }),
    }
}

fn check_len(lattice: &Lattice, f: &SimpleFunction) -> Result<()> {
    if f.len() == lattice.num_leaves() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: lattice.num_leaves(),
            got: f.len(),
        })
    }
}

/// Sum of a per-cell quantity over the ancestor-or-self chain of every leaf.
pub(crate) fn ancestor_sums(lattice: &Lattice, per_cell: &[f64]) -> Vec<f64> {
    let mut acc = per_cell.to_vec();
    for cell in lattice.cells() {
        if let Some(p) = lattice.parent(cell) {
            acc[cell.index()] += acc[p.index()];
        }
    }
    lattice.leaves().iter().map(|l| acc[l.index()]).collect()
}

/// Maximum of a per-cell quantity over the ancestor-or-self chain of every leaf.
pub(crate) fn ancestor_max(lattice: &Lattice, per_cell: &[f64]) -> Vec<f64> {
    let mut acc = per_cell.to_vec();
    for cell in lattice.cells() {
        if let Some(p) = lattice.parent(cell) {
            acc[cell.index()] = acc[cell.index()].max(acc[p.index()]);
        }
    }
    lattice.leaves().iter().map(|l| acc[l.index()]).collect()
}

/// `μ(I)^{-1} ∫_I f dμ` for every cell (zero when `μ(I) = 0`).
pub fn cell_averages(inst: &Instance, f: &SimpleFunction) -> Result<Vec<f64>> {
    let lattice = inst.lattice();
    check_len(lattice, f)?;
    let weighted: Vec<f64> = f
        .values()
        .iter()
        .zip(inst.mu().leaf_masses())
        .map(|(&v, &m)| if m == 0.0 { 0.0 } else { v * m })
        .collect();
    let integrals = subtree_sums(lattice, &weighted);
    let avgs: Vec<f64> = integrals
        .iter()
        .zip(inst.mu().cell_masses())
        .map(|(&s, &m)| if m > 0.0 { s / m } else { 0.0 })
        .collect();
    ensure_finite(lattice, &avgs, "μ-average")?;
    Ok(avgs)
}

/// `E_I^μ f = (μ(I)^{-1} ∫_I f dμ)·1_I`.
pub fn average(inst: &Instance, f: &SimpleFunction, cell: CellId) -> Result<SimpleFunction> {
    let lattice = inst.lattice();
    lattice.check(cell)?;
    let avg = cell_averages(inst, f)?[cell.index()];
    let mut out = vec![0.0; lattice.num_leaves()];
    out[lattice.span(cell)].fill(avg);
    Ok(SimpleFunction::from_vec(out))
}

/// Scalar operator `Σ_I α_I E_I^μ f`.
pub fn apply_scalar(inst: &Instance, f: &SimpleFunction) -> Result<SimpleFunction> {
    let avgs = cell_averages(inst, f)?;
    let terms: Vec<f64> = avgs.iter().zip(inst.alpha()).map(|(&a, &al)| al * a).collect();
    let out = ancestor_sums(inst.lattice(), &terms);
    ensure_finite_leaves(inst.lattice(), &out, "T_α f")?;
    Ok(SimpleFunction::from_vec(out))
}

/// Entry `α_I E_I^μ f` of the vector operator.
pub fn vector_entry(inst: &Instance, f: &SimpleFunction, cell: CellId) -> Result<SimpleFunction> {
    let alpha = inst.alpha_of(cell);
    Ok(average(inst, f, cell)?.map(|v| alpha * v))
}

/// Indexed family of functions, each supported on its cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FunctionFamily {
    pub entries: BTreeMap<CellId, SimpleFunction>,
}

impl FunctionFamily {
    /// `L^p(ℓ^q, ν)` norm, accumulated entry by entry (the transposed order of
    /// [`mixed_norm_of_talpha`]).
    pub fn mixed_norm(&self, inst: &Instance, p: f64, q: f64) -> f64 {
        let n = inst.lattice().num_leaves();
        let mut lq = vec![0.0; n];
        for g in self.entries.values() {
            for (acc, &v) in lq.iter_mut().zip(g.values()) {
                *acc += pow(v.abs(), q);
            }
        }
        let total: f64 = lq
            .iter()
            .zip(inst.nu().leaf_masses())
            .map(|(&s, &w)| pow(s, p / q) * w)
            .sum();
        total.powf(1.0 / p)
    }
}

/// The full vector `T_α f = {α_I E_I^μ f}_I`, materialized (nonzero entries only).
pub fn vector_family(inst: &Instance, f: &SimpleFunction) -> Result<FunctionFamily> {
    let lattice = inst.lattice();
    let avgs = cell_averages(inst, f)?;
    let mut entries = BTreeMap::new();
    for cell in lattice.cells() {
        let v = inst.alpha_of(cell) * avgs[cell.index()];
        if v != 0.0 {
            let mut g = vec![0.0; lattice.num_leaves()];
            g[lattice.span(cell)].fill(v);
            entries.insert(cell, SimpleFunction::from_vec(g));
        }
    }
    Ok(FunctionFamily { entries })
}

/// Martingale maximal function `M_μ f = sup_{I ∋ x} |E_I^μ f|`.
pub fn maximal(inst: &Instance, f: &SimpleFunction) -> Result<SimpleFunction> {
    let abs: Vec<f64> = cell_averages(inst, f)?.into_iter().map(f64::abs).collect();
    Ok(SimpleFunction::from_vec(ancestor_max(inst.lattice(), &abs)))
}

/// `‖f‖_{L^s(w)}` for the selected weight.
pub fn lp_norm(inst: &Instance, f: &SimpleFunction, exponent: f64, which: Measure) -> Result<NormValue> {
    if !(exponent >= 1.0 && exponent.is_finite()) {
        return Err(Error::InvalidParameter(format!("norm exponent must be ≥ 1, got {exponent}")));
    }
    check_len(inst.lattice(), f)?;
    Ok(NormValue {
        value: lp_norm_raw(f.values(), inst.weight(which).leaf_masses(), exponent),
        kind: NormKind::Lp,
    })
}

pub(crate) fn lp_norm_raw(values: &[f64], masses: &[f64], exponent: f64) -> f64 {
    let s: f64 = values
        .iter()
        .zip(masses)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&v, &m)| pow(v.abs(), exponent) * m)
        .sum();
    pow(s, 1.0 / exponent)
}

/// Per-leaf `Σ_{I ∋ x} α_I^q |E_I^μ f|^q`.
pub(crate) fn lq_aggregate(inst: &Instance, avgs: &[f64]) -> Vec<f64> {
    let q = inst.exponents().q();
    let terms: Vec<f64> = avgs
        .iter()
        .zip(inst.alpha())
        .map(|(&a, &al)| pow(al * a.abs(), q))
        .collect();
    ancestor_sums(inst.lattice(), &terms)
}

/// `(∫ [Σ_I |α_I E_I^μ f|^q]^{p/q} dν)^{1/p}`.
pub fn mixed_norm_of_talpha(inst: &Instance, f: &SimpleFunction) -> Result<NormValue> {
    let avgs = cell_averages(inst, f)?;
    let e = inst.exponents();
    let s = lq_aggregate(inst, &avgs);
    ensure_finite_leaves(inst.lattice(), &s, "ℓ^q aggregate")?;
    let total: f64 = s
        .iter()
        .zip(inst.nu().leaf_masses())
        .map(|(&x, &w)| pow(x, e.ratio()) * w)
        .sum();
    if !total.is_finite() {
        return Err(Error::NonFinite {
            cell: inst.lattice().label(inst.lattice().leaves()[0]),
            what: "mixed norm",
        });
    }
    Ok(NormValue {
        value: total.powf(1.0 / e.p()),
        kind: NormKind::MixedLpLq,
    })
}

/// `Σ_I α_I^q E_I^μ h`, the scalar operator of the reduced problem.
pub fn reduced_scalar_value(inst: &Instance, h: &SimpleFunction) -> Result<SimpleFunction> {
    let lattice = inst.lattice();
    check_len(lattice, h)?;
    if let Some(pos) = h.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeInput {
            leaf: lattice.label(lattice.leaves()[pos]),
            value: h.values()[pos],
        });
    }
    let q = inst.exponents().q();
    let avgs = cell_averages(inst, h)?;
    let terms: Vec<f64> = avgs.iter().zip(inst.alpha()).map(|(&a, &al)| pow(al, q) * a).collect();
    let out = ancestor_sums(lattice, &terms);
    ensure_finite_leaves(lattice, &out, "reduced operator")?;
    Ok(SimpleFunction::from_vec(out))
}
