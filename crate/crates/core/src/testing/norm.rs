//! Operator-norm oracles for `T_α: L^p(μ) → L^p(ℓ^q, ν)`.
//!
//! [`norm_exact_p2q2`] solves the `p = q = 2` case as a symmetric eigenproblem.
//! [`norm_ascent`] is a lower-bound maximizer for any `(p, q)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{subtree_sums, Instance, SimpleFunction};
use crate::operators::{ancestor_sums, lp_norm_raw, mixed_norm_of_talpha, pow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    ExactQuadratic,
    Ascent,
    /// Ratio achieved by an explicitly constructed function.
    Witness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    /// `‖T_α f‖ / ‖f‖_{L^p(μ)}` at the witness.
    pub value: f64,
    pub method: NormMethod,
    pub witness: SimpleFunction,
    pub restarts: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl NormEstimate {
    /// Estimate realized by `witness`; zero for a μ-null witness.
    pub fn from_witness(inst: &Instance, witness: SimpleFunction, method: NormMethod) -> Result<Self> {
        let value = ratio_of(inst, &witness)?;
        Ok(NormEstimate {
            value,
            method,
            witness,
            restarts: 1,
            converged: true,
            iterations: 0,
        })
    }
}

fn ratio_of(inst: &Instance, f: &SimpleFunction) -> Result<f64> {
    let den = lp_norm_raw(f.values(), inst.mu().leaf_masses(), inst.exponents().p());
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(mixed_norm_of_talpha(inst, f)?.value / den)
}

/// Exact norm for `p = q = 2`: the square root of the top eigenvalue of
/// `Q(f) = Σ_I α_I² ν(I) (E_I^μ f)²` relative to `‖f‖²_{L²(μ)}`.
///
/// Substituting `g = √μ · f` on the μ-positive leaves turns the weighted
/// problem into a standard symmetric one.
pub fn norm_exact_p2q2(inst: &Instance) -> Result<NormEstimate> {
    let e = inst.exponents();
    if e.p() != 2.0 || e.q() != 2.0 {
        return Err(Error::ExponentMismatch(format!(
            "the exact oracle needs p = q = 2, got p = {}, q = {}",
            e.p(),
            e.q()
        )));
    }
    let lattice = inst.lattice();
    let mu = inst.mu().leaf_masses();
    let positive: Vec<usize> = (0..lattice.num_leaves()).filter(|&i| mu[i] > 0.0).collect();
    let mut slot = vec![usize::MAX; lattice.num_leaves()];
    for (k, &pos) in positive.iter().enumerate() {
        slot[pos] = k;
    }
    let n = positive.len();
    let mut witness = vec![0.0; lattice.num_leaves()];
    if n > 0 {
        let mut a = DMatrix::<f64>::zeros(n, n);
        let sqrt_mu: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
        for cell in lattice.cells() {
            let (alpha, m, w) = (inst.alpha_of(cell), inst.mu().mass(cell), inst.nu().mass(cell));
            if alpha == 0.0 || m == 0.0 || w == 0.0 {
                continue;
            }
            let coef = alpha * alpha * w / (m * m);
            let members: Vec<usize> = lattice.span(cell).filter(|&i| mu[i] > 0.0).collect();
            for &x in &members {
                for &y in &members {
                    a[(slot[x], slot[y])] += coef * sqrt_mu[x] * sqrt_mu[y];
                }
            }
        }
        let eig = SymmetricEigen::new(a);
        let top = eig.eigenvalues.imax();
        if eig.eigenvalues[top] > 0.0 {
            let v = eig.eigenvectors.column(top);
            // the matrix is entrywise nonnegative, so |v| is also a maximizer
            for (k, &pos) in positive.iter().enumerate() {
                witness[pos] = v[k].abs() / sqrt_mu[pos];
            }
        } else {
            witness[positive[0]] = 1.0;
        }
    }
    let witness = SimpleFunction::new(lattice, witness)?;
    NormEstimate::from_witness(inst, witness, NormMethod::ExactQuadratic)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentOptions {
    /// Random nonnegative starts, in addition to every cell indicator.
    pub restarts: usize,
    /// Stop when the relative ratio improvement per iteration drops below this.
    pub tol: f64,
    pub seed: u64,
    pub max_iters: usize,
    /// Iterations every start receives before the best ones are polished.
    pub screen_iters: usize,
    /// Number of screened starts carried on to convergence.
    pub polish: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            restarts: 32,
            tol: 1e-10,
            seed: 0,
            max_iters: 10_000,
            screen_iters: 30,
            polish: 4,
        }
    }
}

/// `Φ(f) = ‖T_α f‖^p` on nonnegative `f`, with its gradient.
struct Objective<'a> {
    inst: &'a Instance,
    alpha_q: Vec<f64>,
    p: f64,
    q: f64,
}

struct Point {
    f: Vec<f64>,
    ratio: f64,
}

impl<'a> Objective<'a> {
    fn new(inst: &'a Instance) -> Self {
        let e = inst.exponents();
        Objective {
            inst,
            alpha_q: inst.alpha().iter().map(|&a| pow(a, e.q())).collect(),
            p: e.p(),
            q: e.q(),
        }
    }

    fn averages(&self, f: &[f64]) -> Vec<f64> {
        let mu = self.inst.mu();
        let weighted: Vec<f64> = f.iter().zip(mu.leaf_masses()).map(|(&v, &m)| v * m).collect();
        subtree_sums(self.inst.lattice(), &weighted)
            .iter()
            .zip(mu.cell_masses())
            .map(|(&s, &m)| if m > 0.0 { s / m } else { 0.0 })
            .collect()
    }

    fn aggregate(&self, avgs: &[f64]) -> Vec<f64> {
        let terms: Vec<f64> = avgs.iter().zip(&self.alpha_q).map(|(&a, &c)| c * pow(a, self.q)).collect();
        ancestor_sums(self.inst.lattice(), &terms)
    }

    fn value(&self, f: &[f64]) -> f64 {
        let s = self.aggregate(&self.averages(f));
        s.iter()
            .zip(self.inst.nu().leaf_masses())
            .map(|(&x, &w)| pow(x, self.p / self.q) * w)
            .sum()
    }

    fn norm_p(&self, f: &[f64]) -> f64 {
        lp_norm_raw(f, self.inst.mu().leaf_masses(), self.p)
    }

    fn ratio(&self, f: &[f64]) -> f64 {
        let den = self.norm_p(f);
        if den == 0.0 {
            0.0
        } else {
            self.value(f).powf(1.0 / self.p) / den
        }
    }

    /// `∂Φ/∂f_m / μ_m` on every leaf (the μ-weighted gradient).
    fn weighted_gradient(&self, f: &[f64]) -> Vec<f64> {
        let lattice = self.inst.lattice();
        let avgs = self.averages(f);
        let s = self.aggregate(&avgs);
        let e = self.p / self.q - 1.0;
        let u: Vec<f64> = s
            .iter()
            .zip(self.inst.nu().leaf_masses())
            .map(|(&x, &w)| if x > 0.0 && w > 0.0 { w * pow(x, e) } else { 0.0 })
            .collect();
        let big_w = subtree_sums(lattice, &u);
        let mu = self.inst.mu().cell_masses();
        let per_cell: Vec<f64> = (0..lattice.len())
            .map(|i| {
                if mu[i] == 0.0 || self.alpha_q[i] == 0.0 {
                    return 0.0;
                }
                let slope = if self.q == 1.0 { 1.0 } else { avgs[i].powf(self.q - 1.0) };
                self.p * self.alpha_q[i] * slope * big_w[i] / mu[i]
            })
            .collect();
        ancestor_sums(lattice, &per_cell)
    }

    fn normalize(&self, mut f: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.norm_p(&f);
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        f.iter_mut().for_each(|v| *v /= n);
        Some(f)
    }

    fn point(&self, f: Vec<f64>) -> Option<Point> {
        let f = self.normalize(f)?;
        let ratio = self.ratio(&f);
        ratio.is_finite().then_some(Point { f, ratio })
    }

    /// One ascent step; `None` when no improving move was found.
    fn step(&self, cur: &Point) -> Option<Point> {
        let grad = self.weighted_gradient(&cur.f);
        let mu = self.inst.mu().leaf_masses();
        // stationarity: grad_m / μ_m ∝ f_m^{p-1}
        let fixed: Vec<f64> = grad
            .iter()
            .zip(mu)
            .map(|(&g, &m)| if m > 0.0 && g > 0.0 { g.powf(1.0 / (self.p - 1.0)) } else { 0.0 })
            .collect();
        if let Some(next) = self.point(fixed) {
            if next.ratio >= cur.ratio {
                return Some(next);
            }
        }
        // projected gradient with backtracking
        let scale = cur.f.iter().fold(0.0f64, |a, &v| a.max(v))
            / grad.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut t = scale;
        for _ in 0..40 {
            let cand: Vec<f64> = cur
                .f
                .iter()
                .zip(&grad)
                .zip(mu)
                .map(|((&v, &g), &m)| if m > 0.0 { (v + t * g).max(0.0) } else { 0.0 })
                .collect();
            if let Some(next) = self.point(cand) {
                if next.ratio > cur.ratio {
                    return Some(next);
                }
            }
            t *= 0.5;
        }
        None
    }

    /// Runs up to `iters` steps; returns (point, converged, iterations used).
    fn run(&self, mut cur: Point, iters: usize, tol: f64) -> (Point, bool, usize) {
        for it in 0..iters {
            match self.step(&cur) {
                None => return (cur, true, it),
                Some(next) => {
                    let gain = if cur.ratio > 0.0 {
                        (next.ratio - cur.ratio) / cur.ratio
                    } else {
                        f64::INFINITY
                    };
                    cur = next;
                    if gain < tol {
                        return (cur, true, it + 1);
                    }
                }
            }
        }
        (cur, false, iters)
    }
}

/// Maximizes `‖T_α f‖ / ‖f‖_{L^p(μ)}` over nonnegative `f`.
///
/// Every cell indicator is a start, so the result is never below
/// `max_J C₁(J)`; `opts.restarts` random nonnegative starts are added. All
/// starts get `screen_iters` steps and the best `polish` run to convergence.
/// Each step takes the normalized fixed-point update when it improves the
/// ratio and a backtracking projected-gradient step otherwise, so the ratio
/// never decreases.
pub fn norm_ascent(inst: &Instance, opts: &AscentOptions) -> Result<NormEstimate> {
    if opts.restarts < 1 {
        return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let lattice = inst.lattice();
    let mu = inst.mu().leaf_masses();
    let objective = Objective::new(inst);

    let mut starts: Vec<Vec<f64>> = lattice
        .cells()
        .filter(|&c| lattice.chain_top(c) == c && inst.mu().mass(c) > 0.0)
        .map(|c| SimpleFunction::indicator(lattice, c).values().to_vec())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        starts.push(mu.iter().map(|&m| if m > 0.0 { rng.gen::<f64>() } else { 0.0 }).collect());
    }
    let total_starts = starts.len();

    let mut screened: Vec<(Point, bool, usize)> = starts
        .into_iter()
        .filter_map(|s| objective.point(s))
        .map(|p| objective.run(p, opts.screen_iters, opts.tol))
        .collect();
    if screened.is_empty() {
        let witness = SimpleFunction::zero(lattice);
        return Ok(NormEstimate {
            value: 0.0,
            method: NormMethod::Ascent,
            witness,
            restarts: total_starts,
            converged: true,
            iterations: 0,
        });
    }
    screened.sort_by(|a, b| b.0.ratio.total_cmp(&a.0.ratio));
    screened.truncate(opts.polish.max(1));

    let remaining = opts.max_iters.saturating_sub(opts.screen_iters);
    let mut best: Option<(Point, bool, usize)> = None;
    for (point, done, used) in screened {
        let (point, converged, more) = if done {
            (point, true, 0)
        } else {
            objective.run(point, remaining, opts.tol)
        };
        let better = best.as_ref().is_none_or(|b| point.ratio > b.0.ratio);
        if better {
            best = Some((point, converged, used + more));
        }
    }
    let (point, converged, iterations) = best.expect("at least one start");
    let witness = SimpleFunction::new(lattice, point.f)?;
    let value = ratio_of(inst, &witness)?;
    Ok(NormEstimate {
        value,
        method: NormMethod::Ascent,
        witness,
        restarts: total_starts,
        converged,
        iterations,
    })
}
