//! Testing constants and operator-norm oracles.
//!
//! `C₁` is tested on indicators:
//! `∫_J [Σ_{I⊆J} α_I^q 1_I]^{p/q} dν ≤ C₁^p μ(J)`. For `p > q` the dual
//! constant uses the exponent `s' = (p/q)'`:
//! `∫_J [Σ_{I⊆J} α_I^q ν(I)/μ(I) 1_I]^{s'} dμ ≤ C₂^{q s'} ν(J)`,
//! so that the reported `C₂` scales linearly in `α` like `C₁`. The raw value
//! (the `s'`-th root of the ratio, which scales like `α^q`) is kept as well.

mod norm;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{conjugate, CellId, Instance, Lattice};
use crate::operators::pow;
use crate::prooftools::chain_constant;

pub use norm::{norm_ascent, norm_exact_p2q2, AscentOptions, NormEstimate, NormMethod};

/// Default `‖T‖/C₁` level above which a verdict reports that `C₁` alone
/// does not control the norm.
pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// Serializes non-finite values as `"+infinity"` / `"nan"` strings.
pub(crate) fn finite_or_tag<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("+infinity")
    } else {
        s.serialize_str("-infinity")
    }
}

pub(crate) fn opt_finite_or_tag<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => finite_or_tag(v, s),
        None => s.serialize_none(),
    }
}

/// `Σ_{x∈J} (Σ_{I: x∈I⊆J} coeff_I)^exponent · weight(x)`, where the inner sum
/// also counts the single-child copies of `J` above it.
pub(crate) fn testing_integral(lattice: &Lattice, j: CellId, coeff: &[f64], exponent: f64, leaf_weight: &[f64]) -> f64 {
    let top = lattice.chain_top(j);
    let mut init = coeff[j.index()];
    let mut cur = j;
    while cur != top {
        cur = lattice.parent(cur).expect("chain top is an ancestor");
        init += coeff[cur.index()];
    }
    let mut total = 0.0;
    let mut stack = vec![(j, init)];
    while let Some((cell, acc)) = stack.pop() {
        let kids = lattice.children(cell);
        if kids.is_empty() {
            let w = leaf_weight[lattice.span(cell).start];
            if w > 0.0 {
                total += pow(acc, exponent) * w;
            }
        } else {
            stack.extend(kids.iter().map(|&k| (k, acc + coeff[k.index()])));
        }
    }
    total
}

/// `(numerator / denominator)^{1/exponent}` with the zero-mass conventions:
/// `0/0 = 0`, `x/0 = +∞`.
fn normalized(numerator: f64, denominator: f64, exponent: f64) -> f64 {
    if denominator > 0.0 {
        pow(numerator / denominator, 1.0 / exponent)
    } else if numerator > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `α_I^q`, with cells of zero μ-mass dropped: the operator averages them to zero.
fn c1_coefficients(inst: &Instance) -> Vec<f64> {
    let q = inst.exponents().q();
    let mu = inst.mu().cell_masses();
    inst.alpha()
        .iter()
        .zip(mu)
        .map(|(&a, &m)| if m > 0.0 { pow(a, q) } else { 0.0 })
        .collect()
}

/// `α_I^q ν(I)/μ(I)`; `+∞` where `μ(I) = 0 < ν(I)` and `α_I > 0`.
fn c2_coefficients(inst: &Instance) -> Vec<f64> {
    let q = inst.exponents().q();
    let (mu, nu) = (inst.mu().cell_masses(), inst.nu().cell_masses());
    inst.alpha()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if a == 0.0 || nu[i] == 0.0 {
                0.0
            } else if mu[i] == 0.0 {
                f64::INFINITY
            } else {
                pow(a, q) * nu[i] / mu[i]
            }
        })
        .collect()
}

fn c1_at(inst: &Instance, coeff: &[f64], j: CellId) -> f64 {
    let e = inst.exponents();
    let num = testing_integral(inst.lattice(), j, coeff, e.ratio(), inst.nu().leaf_masses());
    normalized(num, inst.mu().mass(j), e.p())
}

/// Raw dual testing value: `(∫_J [Σ_{I⊆J} c_I 1_I]^{s'} dμ / ν(J))^{1/s'}`.
fn c2_raw_at(inst: &Instance, coeff: &[f64], s_conj: f64, j: CellId) -> f64 {
    let lattice = inst.lattice();
    let infinite = lattice
        .cells_within(j)
        .expect("cell checked by caller")
        .iter()
        .any(|c| coeff[c.index()].is_infinite());
    if infinite {
        return f64::INFINITY;
    }
    let num = testing_integral(lattice, j, coeff, s_conj, inst.mu().leaf_masses());
    normalized(num, inst.nu().mass(j), s_conj)
}

/// Smallest `C₁` making the indicator test hold at `J`. Cells with `μ(I) = 0`
/// carry no weight, so `μ(J) = 0` gives 0.
pub fn testing_c1(inst: &Instance, j: CellId) -> Result<f64> {
    inst.lattice().check(j)?;
    Ok(c1_at(inst, &c1_coefficients(inst), j))
}

/// Raw dual testing value at `J` (scales like `α^q`); see the module docs.
pub fn testing_c2(inst: &Instance, j: CellId) -> Result<f64> {
    inst.lattice().check(j)?;
    let e = inst.exponents();
    let s_conj = e.ratio_conj().ok_or(Error::C2Undefined { p: e.p(), q: e.q() })?;
    Ok(c2_raw_at(inst, &c2_coefficients(inst), s_conj, j))
}

/// `C₁(J)` for every cell, indexed by dense cell index.
pub fn testing_c1_all(inst: &Instance) -> Vec<f64> {
    let coeff = c1_coefficients(inst);
    inst.lattice().cells().map(|j| c1_at(inst, &coeff, j)).collect()
}

/// Testing constants of the scalar operator `Σ_I α_I^q E_I^μ` between
/// `L^s(μ)` and `L^s(ν)`, `s = p/q`.
pub fn scalar_testing(inst: &Instance) -> Result<(f64, f64)> {
    let e = inst.exponents();
    let s = e.ratio();
    if s <= 1.0 {
        return Err(Error::InvalidExponents(format!(
            "the reduced scalar problem needs s = p/q > 1, got {s}"
        )));
    }
    let s_conj = conjugate(s);
    let lattice = inst.lattice();
    let beta = c1_coefficients(inst);
    let dual = c2_coefficients(inst);
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for j in lattice.cells() {
        let num = testing_integral(lattice, j, &beta, s, inst.nu().leaf_masses());
        c1 = c1.max(normalized(num, inst.mu().mass(j), s));
        c2 = c2.max(c2_raw_at(inst, &dual, s_conj, j));
    }
    Ok((c1, c2))
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Per-cell and global testing constants of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TestingReport {
    /// Indexed by dense cell index.
    pub c1_per_cell: Vec<f64>,
    pub c1: f64,
    pub c1_witness: CellId,
    /// `C₂(J)` in the linear-in-α scale; empty when `p ≤ q`.
    pub c2_per_cell: Vec<f64>,
    /// Raw dual values (`α^q` scale); empty when `p ≤ q`.
    pub c2_raw_per_cell: Vec<f64>,
    pub c2: f64,
    /// `C₂` if the dual inequality is read with `C₂^{p'}` on the right.
    pub c2_pprime_reading: Option<f64>,
    pub scalar_c1: Option<f64>,
    pub scalar_c2: Option<f64>,
    /// Cells with `μ(I) = 0 < α_I`.
    pub degenerate_cells: Vec<CellId>,
}

impl TestingReport {
    pub fn compute(inst: &Instance) -> Result<Self> {
        let e = inst.exponents();
        let lattice = inst.lattice();
        let c1_per_cell = testing_c1_all(inst);
        let (w, c1) = argmax(&c1_per_cell);
        let mut report = TestingReport {
            c1_per_cell,
            c1,
            c1_witness: lattice.cells().nth(w).expect("nonempty lattice"),
            c2_per_cell: Vec::new(),
            c2_raw_per_cell: Vec::new(),
            c2: 0.0,
            c2_pprime_reading: None,
            scalar_c1: None,
            scalar_c2: None,
            degenerate_cells: inst.degenerate_alpha_cells(),
        };
        if let Some(s_conj) = e.ratio_conj() {
            let coeff = c2_coefficients(inst);
            let raw: Vec<f64> = lattice.cells().map(|j| c2_raw_at(inst, &coeff, s_conj, j)).collect();
            report.c2_per_cell = raw.iter().map(|&r| pow(r, 1.0 / e.q())).collect();
            report.c2 = argmax(&report.c2_per_cell).1;
            report.c2_pprime_reading = Some(
                raw.iter()
                    .map(|&r| pow(pow(r, s_conj), 1.0 / e.p_conj()))
                    .fold(0.0, f64::max),
            );
            report.c2_raw_per_cell = raw;
            let (sc1, sc2) = scalar_testing(inst)?;
            report.scalar_c1 = Some(sc1);
            report.scalar_c2 = Some(sc2);
        }
        Ok(report)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Bounded,
    /// `C₁` is finite but the norm estimate exceeds `threshold · C₁`.
    C1Insufficient,
    /// For `p ≤ q`, the estimate exceeds the certified `K(p)^{1/p} C₁`.
    CertifiedBoundViolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// `estimate / (C₁ + C₂)`, zero when both sides vanish.
    #[serde(serialize_with = "finite_or_tag")]
    pub ratio: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub norm_over_c1: f64,
    #[serde(serialize_with = "opt_finite_or_tag")]
    pub certified_upper: Option<f64>,
    pub threshold: f64,
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn verdict(inst: &Instance, report: &TestingReport, estimate: &NormEstimate, threshold: f64) -> Verdict {
    let e = inst.exponents();
    let ratio = safe_ratio(estimate.value, report.c1 + report.c2);
    let norm_over_c1 = safe_ratio(estimate.value, report.c1);
    let certified_upper = (e.p() <= e.q()).then(|| chain_constant(e.p()).powf(1.0 / e.p()) * report.c1);
    let kind = match certified_upper {
        Some(bound) if estimate.value > bound * (1.0 + 1e-12) => VerdictKind::CertifiedBoundViolated,
        _ if report.c1.is_finite() && norm_over_c1 > threshold => VerdictKind::C1Insufficient,
        _ => VerdictKind::Bounded,
    };
    Verdict {
        kind,
        ratio,
        norm_over_c1,
        certified_upper,
        threshold,
    }
}

/// The report document emitted by the command line.
#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    #[serde(serialize_with = "finite_or_tag")]
    pub c1: f64,
    #[serde(serialize_with = "finite_or_tag")]
    pub c2: f64,
    pub c1_witness_cell: u64,
    pub norm_estimate: f64,
    pub method: NormMethod,
    #[serde(serialize_with = "finite_or_tag")]
    pub ratio: f64,
    pub converged: bool,
    pub restarts: usize,
    pub verdict: Verdict,
    #[serde(serialize_with = "opt_finite_or_tag")]
    pub c2_pprime_reading: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_tag")]
    pub scalar_c1: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_tag")]
    pub scalar_c2: Option<f64>,
    pub degenerate_cells: Vec<u64>,
    pub witness: crate::lattice::FunctionDocument,
}

impl ReportDocument {
    pub fn new(inst: &Instance, report: &TestingReport, estimate: &NormEstimate, verdict: Verdict) -> Self {
        let l = inst.lattice();
        ReportDocument {
            c1: report.c1,
            c2: report.c2,
            c1_witness_cell: l.label(report.c1_witness),
            norm_estimate: estimate.value,
            method: estimate.method,
            ratio: verdict.ratio,
            converged: estimate.converged,
            restarts: estimate.restarts,
            verdict,
            c2_pprime_reading: report.c2_pprime_reading,
            scalar_c1: report.scalar_c1,
            scalar_c2: report.scalar_c2,
            degenerate_cells: report.degenerate_cells.iter().map(|&c| l.label(c)).collect(),
            witness: estimate.witness.to_document(l),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{random_instance, ExponentPair, RandomParams, SimpleFunction, Weight};
    use approx::assert_relative_eq;

    fn single(alpha: f64, m: f64, w: f64, p: f64, q: f64) -> Instance {
        let l = Lattice::regular(2, 0).unwrap();
        let mu = Weight::new(&l, vec![m]).unwrap();
        let nu = Weight::new(&l, vec![w]).unwrap();
        Instance::new(l, mu, nu, vec![alpha], ExponentPair::new(p, q).unwrap()).unwrap()
    }

    fn root(inst: &Instance) -> CellId {
        inst.lattice().cell(0).unwrap()
    }

    #[test]
    fn single_cell_closed_forms() {
        let (a, m, w) = (1.7, 0.4, 0.9);
        let inst = single(a, m, w, 3.0, 1.5);
        assert_relative_eq!(testing_c1(&inst, root(&inst)).unwrap(), a * (w / m).powf(1.0 / 3.0), max_relative = 1e-14);

        let s_conj = 2.0; // (3/1.5)' = 2
        let expected = a.powf(1.5) * (w / m) * m.powf(1.0 / s_conj) * w.powf(-1.0 / s_conj);
        assert_relative_eq!(testing_c2(&inst, root(&inst)).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn zero_alpha_gives_zero_constants() {
        let params = RandomParams { p: 3.0, q: 1.5, ..Default::default() };
        let inst = random_instance(4, &params).unwrap();
        let inst = inst.with_alpha(vec![0.0; inst.lattice().len()]).unwrap();
        let report = TestingReport::compute(&inst).unwrap();
        assert!(report.c1_per_cell.iter().all(|&v| v == 0.0));
        assert!(report.c2_per_cell.iter().all(|&v| v == 0.0));
        assert_eq!((report.scalar_c1, report.scalar_c2), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn c2_undefined_for_p_le_q() {
        let inst = single(1.0, 1.0, 1.0, 2.0, 2.0);
        assert!(matches!(testing_c2(&inst, root(&inst)), Err(Error::C2Undefined { .. })));
        let report = TestingReport::compute(&inst).unwrap();
        assert!(report.c2_per_cell.is_empty());
        assert_eq!(report.scalar_c1, None);
    }

    #[test]
    fn zero_mass_conventions() {
        // a μ-null cell is invisible to the operator, so only the dual test sees it
        let inst = single(1.0, 0.0, 0.5, 2.0, 1.0);
        assert_eq!(testing_c1(&inst, root(&inst)).unwrap(), 0.0);
        assert_eq!(testing_c2(&inst, root(&inst)).unwrap(), f64::INFINITY);
        let inst = single(1.0, 0.0, 0.0, 2.0, 1.0);
        assert_eq!(testing_c1(&inst, root(&inst)).unwrap(), 0.0);
        assert_eq!(testing_c2(&inst, root(&inst)).unwrap(), 0.0);
    }

    #[test]
    fn c2_matches_brute_force() {
        let params = RandomParams { depth: 3, branching: 3, p: 3.0, q: 1.2, ..Default::default() };
        let inst = random_instance(9, &params).unwrap();
        let l = inst.lattice();
        let (q, s_conj) = (1.2, inst.exponents().ratio_conj().unwrap());
        for j in l.cells() {
            let nu_j = inst.nu().mass(j);
            let mut num = 0.0;
            let mut infinite = false;
            for pos in l.span(j) {
                let mut s = 0.0;
                for i in l.cells() {
                    if l.span(i).contains(&pos) && l.is_within(i, j) && inst.alpha_of(i) > 0.0 && inst.nu().mass(i) > 0.0 {
                        if inst.mu().mass(i) == 0.0 {
                            infinite = true;
                        } else {
                            s += inst.alpha_of(i).powf(q) * inst.nu().mass(i) / inst.mu().mass(i);
                        }
                    }
                }
                num += s.powf(s_conj) * inst.mu().leaf_masses()[pos];
            }
            let expected = if infinite || (nu_j == 0.0 && num > 0.0) {
                f64::INFINITY
            } else if nu_j == 0.0 {
                0.0
            } else {
                (num / nu_j).powf(1.0 / s_conj)
            };
            let got = testing_c2(&inst, j).unwrap();
            if expected.is_finite() {
                assert_relative_eq!(got, expected, max_relative = 1e-12);
            } else {
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn scalar_constants_track_the_vector_ones() {
        // q = 1: definitions coincide
        let params = RandomParams { depth: 3, p: 2.5, q: 1.0, mass_zero_fraction: 0.0, ..Default::default() };
        let inst = random_instance(13, &params).unwrap();
        let report = TestingReport::compute(&inst).unwrap();
        assert_relative_eq!(report.scalar_c1.unwrap(), report.c1, max_relative = 1e-14);
        assert_relative_eq!(report.scalar_c2.unwrap(), report.c2, max_relative = 1e-14);

        // p = 3, q = 1.5: scalar C₁ = C₁^q, scalar C₂ = raw C₂ = C₂^q
        let params = RandomParams { depth: 3, p: 3.0, q: 1.5, mass_zero_fraction: 0.0, ..Default::default() };
        let inst = random_instance(13, &params).unwrap();
        let report = TestingReport::compute(&inst).unwrap();
        assert_relative_eq!(report.scalar_c1.unwrap(), report.c1.powf(1.5), max_relative = 1e-12);
        assert_relative_eq!(report.scalar_c2.unwrap(), report.c2.powf(1.5), max_relative = 1e-12);

        let low = inst.with_exponents(ExponentPair::new(2.0, 2.0).unwrap());
        assert!(scalar_testing(&low).is_err());
    }

    #[test]
    fn necessity_on_indicators() {
        let params = RandomParams { depth: 4, branching: 2, p: 1.5, q: 2.5, ..Default::default() };
        let inst = random_instance(6, &params).unwrap();
        let p = inst.exponents().p();
        for j in inst.lattice().cells() {
            let mu_j = inst.mu().mass(j);
            if mu_j > 0.0 {
                let f = SimpleFunction::indicator(inst.lattice(), j);
                let lhs = crate::operators::mixed_norm_of_talpha(&inst, &f).unwrap().value.powf(p);
                let rhs = testing_c1(&inst, j).unwrap().powf(p) * mu_j;
                assert!(lhs >= rhs * (1.0 - 1e-12), "{lhs} < {rhs}");
            }
        }
    }

    #[test]
    fn scaling_and_monotonicity() {
        let params = RandomParams { depth: 3, p: 3.0, q: 1.5, mass_zero_fraction: 0.0, ..Default::default() };
        let inst = random_instance(8, &params).unwrap();
        let base = TestingReport::compute(&inst).unwrap();
        let t = 2.5;
        let scaled = TestingReport::compute(&inst.with_alpha(inst.alpha().iter().map(|a| a * t).collect()).unwrap()).unwrap();
        assert_relative_eq!(scaled.c1, t * base.c1, max_relative = 1e-12);
        assert_relative_eq!(scaled.c2, t * base.c2, max_relative = 1e-12);

        let mut alpha = inst.alpha().to_vec();
        alpha[3] += 0.5;
        let bumped = TestingReport::compute(&inst.with_alpha(alpha).unwrap()).unwrap();
        for i in 0..inst.lattice().len() {
            assert!(bumped.c1_per_cell[i] >= base.c1_per_cell[i]);
            assert!(bumped.c2_raw_per_cell[i] >= base.c2_raw_per_cell[i]);
        }
    }

    #[test]
    fn verdicts() {
        let params = RandomParams { depth: 2, p: 2.0, q: 2.0, ..Default::default() };
        let inst = random_instance(2, &params).unwrap();
        let zero = inst.with_alpha(vec![0.0; inst.lattice().len()]).unwrap();
        let report = TestingReport::compute(&zero).unwrap();
        let est = norm_exact_p2q2(&zero).unwrap();
        let v = verdict(&zero, &report, &est, DEFAULT_THRESHOLD);
        assert_eq!(v.kind, VerdictKind::Bounded);
        assert_eq!(v.ratio, 0.0);

        let report = TestingReport::compute(&inst).unwrap();
        let est = norm_exact_p2q2(&inst).unwrap();
        let v = verdict(&inst, &report, &est, DEFAULT_THRESHOLD);
        assert_eq!(v.kind, VerdictKind::Bounded);
        assert!(v.ratio >= 1.0 - 1e-12);
        assert!(est.value <= v.certified_upper.unwrap());

        let inflated = NormEstimate { value: 1e6 * report.c1, ..est };
        let v = verdict(&inst, &report, &inflated, DEFAULT_THRESHOLD);
        assert_eq!(v.kind, VerdictKind::CertifiedBoundViolated);
    }

    #[test]
    fn report_document_tags_infinity() {
        let inst = single(1.0, 0.0, 0.5, 2.0, 1.0);
        let report = TestingReport::compute(&inst).unwrap();
        let est = norm_ascent(&inst, &AscentOptions::default()).unwrap();
        let v = verdict(&inst, &report, &est, DEFAULT_THRESHOLD);
        let json = serde_json::to_value(ReportDocument::new(&inst, &report, &est, v)).unwrap();
        assert_eq!(json["c2"], "+infinity");
        assert_eq!(json["degenerate_cells"][0], 0);
    }
}
