//! Executable forms of the sufficiency arguments.
//!
//! - [`level_sets`] and [`chain_certificate`]: the stopping-time argument for
//!   `p ≤ q`, with every inequality evaluated on both sides.
//! - [`doob_check`]: `‖M_μ f‖_p ≤ p'‖f‖_p`.
//! - [`rubio_majorant`]: the Rubio de Francia iteration
//!   `F^q = Σ_k (2‖M‖)^{-k} M^{(k)}(f^q)` with `‖M‖` replaced by the Doob bound `(p/q)'`.
//! - [`reduction_compare`]: both directions of the reduction to the scalar
//!   operator with coefficients `α_I^q`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{conjugate, subtree_sums, CellId, Instance, SimpleFunction};
use crate::operators::{cell_averages, lp_norm_raw, maximal, pow};
use crate::testing::{finite_or_tag, testing_c1_all, testing_integral};

/// `K(p) = 2^{2p} (p')^p / (2^p − 1)`, the constant delivered by the chain:
/// `‖T_α f‖^p ≤ K(p) C₁^p ‖f‖_p^p` for `p ≤ q`.
pub fn chain_constant(p: f64) -> f64 {
    layer_cake_constant(p) * conjugate(p).powf(p)
}

/// `2^{2p} / (2^p − 1)`: `Σ_k 2^{(k+1)p} μ(M f > 2^k) ≤ this · ‖M f‖_p^p`.
pub fn layer_cake_constant(p: f64) -> f64 {
    4f64.powf(p) / (2f64.powf(p) - 1.0)
}

fn two_pow(k: i32) -> f64 {
    2f64.powi(k)
}

/// Largest integer `k` with `2^k < m`, for `m > 0`.
fn level_below(m: f64) -> i32 {
    let mut k = m.log2().ceil() as i32 - 1;
    while two_pow(k + 1) < m {
        k += 1;
    }
    while two_pow(k) >= m {
        k -= 1;
    }
    k
}

/// Dyadic level sets `E_k = {M_μ f > 2^k}` and their maximal cells.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetDecomposition {
    /// Every `k` for which `E_k` differs from `E_{k-1}` or is the top level;
    /// below the first threshold `E_k` stays equal to the first set.
    pub thresholds: Vec<i32>,
    /// Leaf positions of `E_k`.
    pub level_sets: BTreeMap<i32, Vec<usize>>,
    /// Disjoint maximal cells whose union is `E_k`.
    pub maximal_cells: BTreeMap<i32, Vec<CellId>>,
    /// The `k` with `I ⊆ E_k` but `I ⊄ E_{k+1}`; `None` if `I` lies in no `E_k`.
    pub cell_class: Vec<Option<i32>>,
    pub maximal_function: SimpleFunction,
}

impl LevelSetDecomposition {
    pub fn mu_of_level(&self, inst: &Instance, k: i32) -> f64 {
        let mu = inst.mu().leaf_masses();
        let k = match self.thresholds.first() {
            Some(&lo) => k.max(lo),
            None => return 0.0,
        };
        self.level_sets.get(&k).map_or(0.0, |s| s.iter().map(|&i| mu[i]).sum())
    }
}

/// Level-set decomposition of `M_μ f`.
///
/// A cell belongs to `E_k` when all of its leaves do; its maximal cells are
/// the members of `E_k` whose parent is not a member.
pub fn level_sets(inst: &Instance, f: &SimpleFunction) -> Result<LevelSetDecomposition> {
    let lattice = inst.lattice();
    let m = maximal(inst, f)?;
    let mv = m.values();

    // min of M_μ f over the leaves of each cell, bottom-up
    let mut min_m = vec![f64::INFINITY; lattice.len()];
    for (pos, &leaf) in lattice.leaves().iter().enumerate() {
        min_m[leaf.index()] = mv[pos];
    }
    for cell in lattice.cells().rev() {
        if let Some(p) = lattice.parent(cell) {
            min_m[p.index()] = min_m[p.index()].min(min_m[cell.index()]);
        }
    }
    let cell_class: Vec<Option<i32>> = min_m.iter().map(|&v| (v > 0.0).then(|| level_below(v))).collect();

    let max_m = mv.iter().copied().fold(0.0, f64::max);
    let min_pos = mv.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let mut decomposition = LevelSetDecomposition {
        thresholds: Vec::new(),
        level_sets: BTreeMap::new(),
        maximal_cells: BTreeMap::new(),
        cell_class,
        maximal_function: m.clone(),
    };
    if max_m == 0.0 {
        return Ok(decomposition);
    }
    let (lo, hi) = (level_below(min_pos), level_below(max_m));
    decomposition.thresholds = (lo..=hi).collect();
    for k in lo..=hi {
        let set: Vec<usize> = (0..mv.len()).filter(|&i| mv[i] > two_pow(k)).collect();
        decomposition.level_sets.insert(k, set);
        decomposition.maximal_cells.insert(k, Vec::new());
    }
    for cell in lattice.cells() {
        let Some(top) = decomposition.cell_class[cell.index()] else {
            continue;
        };
        let below = lattice
            .parent(cell)
            .and_then(|p| decomposition.cell_class[p.index()])
            .map_or(lo, |pc| (pc + 1).max(lo));
        for k in below..=top.min(hi) {
            decomposition.maximal_cells.get_mut(&k).expect("threshold in range").push(cell);
        }
    }
    Ok(decomposition)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStep {
    pub label: &'static str,
    #[serde(serialize_with = "finite_or_tag")]
    pub lhs: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub rhs: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub slack: f64,
}

impl ChainStep {
    fn new(label: &'static str, lhs: f64, rhs: f64) -> Self {
        ChainStep {
            label,
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + tol)
    }
}

/// Numerical record of the stopping-time chain for one `f ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainCertificate {
    pub steps: Vec<ChainStep>,
    pub p: f64,
    /// `K(p)`.
    pub final_constant: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub c1: f64,
    /// `‖T_α f‖^p`.
    pub norm_p: f64,
    /// `‖f‖_{L^p(μ)}^p`.
    pub f_norm_p: f64,
    /// `‖M_μ f‖_{L^p(μ)}^p`.
    pub maximal_norm_p: f64,
    /// First-step right side with each class integrated over `E_k ∖ E_{k+1}`
    /// rather than `E_k`. Not an upper bound in general; recorded only.
    pub split_over_class_difference: f64,
}

pub const DEFAULT_STEP_TOL: f64 = 1e-12;

impl ChainCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.steps.iter().all(|s| s.holds(tol)) && self.overall_holds(tol)
    }

    /// `K(p) C₁^p ‖f‖_p^p`.
    pub fn overall_rhs(&self) -> f64 {
        if self.f_norm_p == 0.0 {
            0.0
        } else {
            self.final_constant * self.c1.powf(self.p) * self.f_norm_p
        }
    }

    pub fn overall_holds(&self, tol: f64) -> bool {
        self.norm_p <= self.overall_rhs() * (1.0 + tol)
    }

    /// Ordered `[{label, lhs, rhs, slack}]` document.
    pub fn to_document(&self) -> serde_json::Value {
        serde_json::to_value(&self.steps).expect("steps serialize")
    }
}

/// Evaluates the stopping-time chain for `1 < p ≤ q` and `f ≥ 0`, using the
/// global `C₁` of the instance.
pub fn chain_certificate(inst: &Instance, f: &SimpleFunction) -> Result<ChainCertificate> {
    let c1 = testing_c1_all(inst).into_iter().fold(0.0, f64::max);
    chain_certificate_with_c1(inst, f, c1)
}

/// [`chain_certificate`] with a precomputed `C₁`.
pub fn chain_certificate_with_c1(inst: &Instance, f: &SimpleFunction, c1: f64) -> Result<ChainCertificate> {
    let e = inst.exponents();
    let (p, q) = (e.p(), e.q());
    if p > q {
        return Err(Error::ExponentMismatch(format!(
            "chain valid only for p ≤ q (p = {p}, q = {q})"
        )));
    }
    if let Some(pos) = f.values().iter().position(|&v| v < 0.0) {
        let lattice = inst.lattice();
        return Err(Error::NegativeInput {
            leaf: lattice.label(lattice.leaves()[pos]),
            value: f.values()[pos],
        });
    }
    let lattice = inst.lattice();
    let ls = level_sets(inst, f)?;
    let avgs = cell_averages(inst, f)?;
    let nu = inst.nu().leaf_masses();
    let mu = inst.mu().leaf_masses();
    let s = e.ratio();
    // μ-null cells average to zero, so they are dropped here as in C₁
    let alpha_q: Vec<f64> = inst
        .alpha()
        .iter()
        .zip(inst.mu().cell_masses())
        .map(|(&a, &m)| if m > 0.0 { pow(a, q) } else { 0.0 })
        .collect();
    let mv = ls.maximal_function.values();

    // per leaf: the chain grouped by class, both with the true averages and
    // with the averages replaced by their dyadic bound
    let mut norm_p = 0.0;
    let mut split = 0.0;
    let mut split_diff = 0.0;
    let mut bounded = 0.0;
    let mut groups: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
    for (pos, &leaf) in lattice.leaves().iter().enumerate() {
        let w = nu[pos];
        if w == 0.0 {
            continue;
        }
        groups.clear();
        let mut total = 0.0;
        for cell in lattice.chain(leaf) {
            let i = cell.index();
            let term = alpha_q[i] * pow(avgs[i], q);
            total += term;
            if let Some(k) = ls.cell_class[i] {
                let g = groups.entry(k).or_insert((0.0, 0.0));
                g.0 += term;
                g.1 += alpha_q[i];
            }
        }
        norm_p += pow(total, s) * w;
        let leaf_level = (mv[pos] > 0.0).then(|| level_below(mv[pos]));
        for (&k, &(exact, coeff)) in &groups {
            let piece = pow(exact, s) * w;
            split += piece;
            if leaf_level == Some(k) {
                split_diff += piece;
            }
            bounded += two_pow(k + 1).powf(p) * pow(coeff, s) * w;
        }
    }

    let mut regrouped = 0.0;
    for (&k, cells) in &ls.maximal_cells {
        let sum: f64 = cells
            .iter()
            .map(|&j| testing_integral(lattice, j, &alpha_q, s, nu))
            .sum();
        regrouped += two_pow(k + 1).powf(p) * sum;
    }

    // Σ_{k∈ℤ} 2^{(k+1)p} μ(E_k), with the geometric tail below the first threshold
    let mut level_sum = 0.0;
    if let Some(&lo) = ls.thresholds.first() {
        for &k in &ls.thresholds {
            level_sum += two_pow(k + 1).powf(p) * ls.mu_of_level(inst, k);
        }
        level_sum += ls.mu_of_level(inst, lo) * two_pow(lo + 1).powf(p) / (2f64.powf(p) - 1.0);
    }
    let times_c1 = |x: f64| if x == 0.0 { 0.0 } else { c1.powf(p) * x };

    let f_norm_p = pow(lp_norm_raw(f.values(), mu, p), p);
    let maximal_norm_p = pow(lp_norm_raw(mv, mu, p), p);
    let final_constant = chain_constant(p);
    let steps = vec![
        ChainStep::new("split-by-class", norm_p, split),
        ChainStep::new("average-bound", split, bounded),
        ChainStep::new("regroup-maximal", bounded, regrouped),
        ChainStep::new("testing-condition", regrouped, times_c1(level_sum)),
        ChainStep::new(
            "layer-cake-doob",
            times_c1(level_sum),
            times_c1(final_constant * f_norm_p),
        ),
    ];
    Ok(ChainCertificate {
        steps,
        p,
        final_constant,
        c1,
        norm_p,
        f_norm_p,
        maximal_norm_p,
        split_over_class_difference: split_diff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DoobCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `‖M_μ f‖_{L^p(μ)}` against `p'‖f‖_{L^p(μ)}`.
pub fn doob_check(inst: &Instance, f: &SimpleFunction) -> Result<DoobCheck> {
    let p = inst.exponents().p();
    let mu = inst.mu().leaf_masses();
    let lhs = lp_norm_raw(maximal(inst, f)?.values(), mu, p);
    let rhs = conjugate(p) * lp_norm_raw(f.values(), mu, p);
    Ok(DoobCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Output of the Rubio de Francia iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorantResult {
    pub majorant: SimpleFunction,
    /// Index of the last term kept in the series.
    pub truncation_k: usize,
    /// `‖F‖_p / ‖f‖_p` (1 when `f` vanishes μ-a.e.).
    pub norm_ratio: f64,
    /// `max_I E_I^μ(F^q) / min_I F^q` over μ-positive cells.
    pub a1_constant: f64,
    /// `1 / (2 (p/q)')`, the series ratio.
    pub weight: f64,
    /// `L^{p/q}(μ)` bound on the omitted tail of `F^q`.
    pub tail_norm_bound: f64,
    /// Largest value of the first omitted term.
    pub tail_sup: f64,
    /// `‖M(f^q)‖_{p/q} / ‖f^q‖_{p/q}`, the observed maximal-operator ratio.
    pub measured_maximal_ratio: f64,
    /// `E_I^μ(F^q)` per cell (dense index; zero on μ-null cells).
    pub cell_mean_fq: Vec<f64>,
    /// `min_{x∈I} F^q(x)` per cell.
    pub cell_min_fq: Vec<f64>,
}

impl MajorantResult {
    /// `2 (p/q)'`.
    pub fn a1_bound(&self) -> f64 {
        1.0 / self.weight
    }

    /// Absolute allowance on `E_I(F^q)` due to truncation.
    pub fn a1_slack(&self) -> f64 {
        self.a1_bound() * self.tail_sup
    }

    /// Cells violating `E_I(F^q) ≤ 2(p/q)'·min_I F^q·(1+tol) + slack`.
    pub fn a1_violations(&self, inst: &Instance, tol: f64) -> Vec<CellId> {
        let slack = self.a1_slack();
        inst.lattice()
            .cells()
            .filter(|&c| {
                let i = c.index();
                inst.mu().mass(c) > 0.0
                    && self.cell_mean_fq[i] > self.a1_bound() * self.cell_min_fq[i] * (1.0 + tol) + slack
            })
            .collect()
    }
}

/// Builds `F = [Σ_{k≥0} (2(p/q)')^{-k} M_μ^{(k)}(f^q)]^{1/q}` for `q < p`.
///
/// Terms are added until the `L^{p/q}(μ)` norm of the next one falls below
/// `tol·‖f^q‖_{p/q}`; that omitted term bounds the rest of the tail (each term
/// is at most half the previous one in norm).
pub fn rubio_majorant(inst: &Instance, f: &SimpleFunction, tol: f64) -> Result<MajorantResult> {
    let e = inst.exponents();
    let (p, q) = (e.p(), e.q());
    let s_conj = e.ratio_conj().ok_or_else(|| {
        Error::ExponentMismatch(format!("the majorant needs q < p (p = {p}, q = {q})"))
    })?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if let Some(pos) = f.values().iter().position(|&v| v < 0.0) {
        let lattice = inst.lattice();
        return Err(Error::NegativeInput {
            leaf: lattice.label(lattice.leaves()[pos]),
            value: f.values()[pos],
        });
    }
    let lattice = inst.lattice();
    let mu = inst.mu().leaf_masses();
    let s = e.ratio();
    let weight = 1.0 / (2.0 * s_conj);

    let h0 = f.map(|v| pow(v, q));
    let h0_norm = lp_norm_raw(h0.values(), mu, s);
    let mut sum = h0.values().to_vec();
    let mut term = h0.clone();
    let mut k = 0;
    let mut measured_maximal_ratio = 0.0;
    let (tail_norm, tail_sup) = loop {
        let next = maximal(inst, &term)?.map(|v| weight * v);
        let next_norm = lp_norm_raw(next.values(), mu, s);
        if k == 0 && h0_norm > 0.0 {
            measured_maximal_ratio = next_norm / (weight * h0_norm);
        }
        let sup = next.values().iter().copied().fold(0.0, f64::max);
        if next_norm < tol * h0_norm || sup == 0.0 || k >= 10_000 {
            break (next_norm, sup);
        }
        sum.iter_mut().zip(next.values()).for_each(|(a, b)| *a += b);
        term = next;
        k += 1;
    };

    let fq = SimpleFunction::new(lattice, sum)?;
    // (f^q)^{1/q} can round below f; F ≥ f holds exactly before rounding
    let majorant = SimpleFunction::new(
        lattice,
        fq.values().iter().zip(f.values()).map(|(&v, &x)| pow(v, 1.0 / q).max(x)).collect(),
    )?;
    let f_norm = lp_norm_raw(f.values(), mu, p);
    let norm_ratio = if f_norm == 0.0 {
        1.0
    } else {
        lp_norm_raw(majorant.values(), mu, p) / f_norm
    };

    let cell_mean_fq = cell_averages(inst, &fq)?;
    let mut cell_min_fq = vec![f64::INFINITY; lattice.len()];
    for (pos, &leaf) in lattice.leaves().iter().enumerate() {
        cell_min_fq[leaf.index()] = fq.values()[pos];
    }
    for cell in lattice.cells().rev() {
        if let Some(par) = lattice.parent(cell) {
            cell_min_fq[par.index()] = cell_min_fq[par.index()].min(cell_min_fq[cell.index()]);
        }
    }
    let a1_constant = lattice
        .cells()
        .filter(|&c| inst.mu().mass(c) > 0.0)
        .map(|c| {
            let (mean, min) = (cell_mean_fq[c.index()], cell_min_fq[c.index()]);
            if mean == 0.0 {
                0.0
            } else if min == 0.0 {
                f64::INFINITY
            } else {
                mean / min
            }
        })
        .fold(0.0, f64::max);

    Ok(MajorantResult {
        majorant,
        truncation_k: k,
        norm_ratio,
        a1_constant,
        weight,
        tail_norm_bound: 2.0 * tail_norm,
        tail_sup,
        measured_maximal_ratio,
        cell_mean_fq,
        cell_min_fq,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionComparison {
    /// `A = ∫ [Σ_I α_I^q (E_I f)^q] g dν`.
    pub holder_lhs: f64,
    /// `B = ∫ [Σ_I α_I^q E_I(f^q)] g dν`.
    pub holder_rhs: f64,
    /// `∫ [Σ_I α_I^q (E_I F)^q] g dν` for the majorant `F`.
    pub majorant_lhs: f64,
    /// `2(p/q)'·majorant_lhs` plus the truncation allowance.
    pub rubio_bound: f64,
    pub truncation_slack: f64,
    pub holds_pair: (bool, bool),
}

/// Compares the vector form with the reduced scalar form at one `(f, g)`.
pub fn reduction_compare(inst: &Instance, f: &SimpleFunction, g: &SimpleFunction, tol: f64) -> Result<ReductionComparison> {
    if !g.is_nonnegative() {
        let lattice = inst.lattice();
        let pos = g.values().iter().position(|&v| v < 0.0).expect("negative entry");
        return Err(Error::NegativeInput {
            leaf: lattice.label(lattice.leaves()[pos]),
            value: g.values()[pos],
        });
    }
    let rubio = rubio_majorant(inst, f, tol)?;
    let lattice = inst.lattice();
    let q = inst.exponents().q();
    let alpha_q: Vec<f64> = inst.alpha().iter().map(|&a| pow(a, q)).collect();
    let g_nu: Vec<f64> = g.values().iter().zip(inst.nu().leaf_masses()).map(|(&a, &b)| a * b).collect();
    let g_int = subtree_sums(lattice, &g_nu);

    let pair = |per_cell: &[f64]| -> f64 {
        per_cell
            .iter()
            .zip(&alpha_q)
            .zip(&g_int)
            .map(|((&v, &a), &gi)| a * v * gi)
            .sum()
    };
    let powq = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| pow(x, q)).collect() };

    let holder_lhs = pair(&powq(cell_averages(inst, f)?));
    let holder_rhs = pair(&cell_averages(inst, &f.map(|v| pow(v, q)))?);
    let majorant_lhs = pair(&powq(cell_averages(inst, &rubio.majorant)?));
    let positive: Vec<f64> = inst.mu().cell_masses().iter().map(|&m| if m > 0.0 { 1.0 } else { 0.0 }).collect();
    let truncation_slack = rubio.a1_slack() * pair(&positive);
    let rubio_bound = rubio.a1_bound() * majorant_lhs * (1.0 + tol) + truncation_slack;
    Ok(ReductionComparison {
        holder_lhs,
        holder_rhs,
        majorant_lhs,
        rubio_bound,
        truncation_slack,
        holds_pair: (
            holder_lhs <= holder_rhs * (1.0 + DEFAULT_STEP_TOL),
            holder_rhs <= rubio_bound,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{random_instance, ExponentPair, Lattice, RandomParams, Weight};
    use crate::operators::mixed_norm_of_talpha;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_f(inst: &Instance, seed: u64) -> SimpleFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..inst.lattice().num_leaves()).map(|_| rng.gen::<f64>()).collect();
        SimpleFunction::new(inst.lattice(), values).unwrap()
    }

    #[test]
    fn chain_constant_values() {
        assert_relative_eq!(chain_constant(2.0), 16.0 * 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(layer_cake_constant(1.5), 8.0 / (2f64.powf(1.5) - 1.0), max_relative = 1e-15);
    }

    #[test]
    fn level_below_is_strict() {
        assert_eq!(level_below(1.0), -1);
        assert_eq!(level_below(1.5), 0);
        assert_eq!(level_below(2.0), 0);
        assert_eq!(level_below(2.0000001), 1);
        assert_eq!(level_below(0.25), -3);
    }

    #[test]
    fn maximal_cells_partition_level_sets() {
        let params = RandomParams { depth: 4, branching: 2, p: 1.5, q: 2.0, ..Default::default() };
        let inst = random_instance(23, &params).unwrap();
        let f = random_f(&inst, 1).map(|v| 10.0 * v);
        let ls = level_sets(&inst, &f).unwrap();
        let lattice = inst.lattice();
        for (&k, cells) in &ls.maximal_cells {
            let mut covered: Vec<usize> = cells
                .iter()
                .filter(|&&c| lattice.chain_top(c) == c)
                .flat_map(|&c| lattice.span(c))
                .collect();
            covered.sort_unstable();
            let before = covered.len();
            covered.dedup();
            assert_eq!(before, covered.len(), "overlap at level {k}");
            assert_eq!(&covered, &ls.level_sets[&k]);
        }
    }

    #[test]
    fn chain_for_zero_function() {
        let params = RandomParams { depth: 3, branching: 2, p: 2.0, q: 2.0, ..Default::default() };
        let inst = random_instance(4, &params).unwrap();
        let cert = chain_certificate(&inst, &SimpleFunction::zero(inst.lattice())).unwrap();
        assert!(cert.holds(DEFAULT_STEP_TOL));
        assert!(cert.steps.iter().all(|s| s.lhs == 0.0 && s.rhs == 0.0));
        assert_eq!(cert.overall_rhs(), 0.0);
    }

    #[test]
    fn chain_holds_on_random_instance() {
        let params = RandomParams { depth: 4, branching: 3, p: 1.5, q: 2.0, ..Default::default() };
        let inst = random_instance(23, &params).unwrap();
        for seed in 0..20 {
            let f = random_f(&inst, seed);
            let cert = chain_certificate(&inst, &f).unwrap();
            assert!(cert.holds(1e-10), "{:?}", cert.steps);
            let direct = mixed_norm_of_talpha(&inst, &f).unwrap().value.powf(1.5);
            assert_relative_eq!(cert.norm_p, direct, max_relative = 1e-12);
            let labels: Vec<_> = cert.steps.iter().map(|s| s.label).collect();
            assert_eq!(
                labels,
                ["split-by-class", "average-bound", "regroup-maximal", "testing-condition", "layer-cake-doob"]
            );
        }
    }

    #[test]
    fn chain_on_indicators() {
        let params = RandomParams { depth: 3, branching: 2, p: 2.0, q: 3.0, ..Default::default() };
        let inst = random_instance(5, &params).unwrap();
        for j in inst.lattice().cells().filter(|&j| inst.mu().mass(j) > 0.0) {
            let cert = chain_certificate(&inst, &SimpleFunction::indicator(inst.lattice(), j)).unwrap();
            assert!(cert.holds(1e-10));
            let tested = crate::testing::testing_c1(&inst, j).unwrap().powf(2.0) * inst.mu().mass(j);
            assert!(cert.norm_p >= tested * (1.0 - 1e-12));
        }
    }

    #[test]
    fn chain_rejects_p_above_q_and_negative_f() {
        let params = RandomParams { depth: 2, branching: 2, p: 3.0, q: 1.0, ..Default::default() };
        let inst = random_instance(2, &params).unwrap();
        let f = random_f(&inst, 0);
        assert!(matches!(chain_certificate(&inst, &f), Err(Error::ExponentMismatch(_))));
        let inst = inst.with_exponents(ExponentPair::new(2.0, 2.0).unwrap());
        let neg = f.map(|v| v - 2.0);
        assert!(matches!(chain_certificate(&inst, &neg), Err(Error::NegativeInput { .. })));
    }

    #[test]
    fn doob_examples() {
        let lattice = Lattice::regular(2, 1).unwrap();
        let mu = Weight::new(&lattice, vec![0.5, 0.5]).unwrap();
        let inst = Instance::new(lattice.clone(), mu.clone(), mu, vec![1.0; 3], ExponentPair::new(2.0, 1.0).unwrap()).unwrap();
        let f = SimpleFunction::new(&lattice, vec![1.0, 0.0]).unwrap();
        let d = doob_check(&inst, &f).unwrap();
        // M f = (1, 1/2)
        assert_relative_eq!(d.lhs, (0.5f64 + 0.125).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d.rhs, 2.0 * 0.5f64.sqrt(), max_relative = 1e-15);
        assert!(d.holds);
        let d = doob_check(&inst, &SimpleFunction::constant(&lattice, 3.0)).unwrap();
        assert_relative_eq!(d.lhs * 2.0, d.rhs, max_relative = 1e-15);
    }

    #[test]
    fn majorant_of_constant() {
        let params = RandomParams { depth: 3, branching: 2, p: 3.0, q: 1.5, mass_zero_fraction: 0.0, ..Default::default() };
        let inst = random_instance(8, &params).unwrap();
        let c = 1.7;
        let r = rubio_majorant(&inst, &SimpleFunction::constant(inst.lattice(), c), 1e-14).unwrap();
        let w = r.weight;
        assert_relative_eq!(w, 0.25, max_relative = 1e-15);
        let limit = c * (1.0 - w).powf(-1.0 / 1.5);
        for &v in r.majorant.values() {
            assert!(v <= limit && v >= c);
            assert_relative_eq!(v, limit, max_relative = 1e-12);
        }
        assert_relative_eq!(r.a1_constant, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn majorant_properties_on_random_instance() {
        let params = RandomParams { depth: 4, branching: 2, p: 3.0, q: 1.0, ..Default::default() };
        let inst = random_instance(29, &params).unwrap();
        for seed in 0..10 {
            let f = random_f(&inst, seed);
            let r = rubio_majorant(&inst, &f, 1e-12).unwrap();
            for (a, b) in r.majorant.values().iter().zip(f.values()) {
                assert!(a >= b);
            }
            assert!(r.norm_ratio.powf(1.0) <= 2f64.powf(1.0) * (1.0 + 1e-10) + r.tail_norm_bound);
            assert!(r.a1_violations(&inst, 1e-10).is_empty());
            assert!(r.measured_maximal_ratio <= 1.5 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn majorant_needs_q_below_p() {
        let params = RandomParams { depth: 2, branching: 2, p: 2.0, q: 2.0, ..Default::default() };
        let inst = random_instance(1, &params).unwrap();
        assert!(rubio_majorant(&inst, &random_f(&inst, 0), 1e-10).is_err());
    }

    #[test]
    fn reduction_with_q_one_is_an_identity() {
        let params = RandomParams { depth: 3, branching: 3, p: 2.0, q: 1.0, ..Default::default() };
        let inst = random_instance(31, &params).unwrap();
        let r = reduction_compare(&inst, &random_f(&inst, 1), &random_f(&inst, 2), 1e-12).unwrap();
        assert_relative_eq!(r.holder_lhs, r.holder_rhs, max_relative = 1e-12);
        assert_eq!(r.holds_pair, (true, true));
    }

    #[test]
    fn reduction_with_constant_f() {
        let params = RandomParams { depth: 3, branching: 2, p: 4.0, q: 2.0, ..Default::default() };
        let inst = random_instance(31, &params).unwrap();
        let f = SimpleFunction::constant(inst.lattice(), 2.0);
        let r = reduction_compare(&inst, &f, &random_f(&inst, 3), 1e-12).unwrap();
        assert_relative_eq!(r.holder_lhs, r.holder_rhs, max_relative = 1e-12);
        assert!(r.holds_pair.1);
    }

    #[test]
    fn reduction_on_random_pairs() {
        let params = RandomParams { depth: 4, branching: 2, p: 4.0, q: 2.0, ..Default::default() };
        let inst = random_instance(31, &params).unwrap();
        for seed in 0..20 {
            let r = reduction_compare(&inst, &random_f(&inst, seed), &random_f(&inst, seed + 100), 1e-12).unwrap();
            assert!(r.holder_lhs <= r.holder_rhs * (1.0 + 1e-12));
            assert_eq!(r.holds_pair, (true, true), "{r:?}");
        }
    }
}
