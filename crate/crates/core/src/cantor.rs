//! The middle-thirds Cantor instance: Lebesgue μ on the tri-adic grid of
//! `[0,1)`, the Cantor measure ν, `α_I = (2/3)^{n/p}` on the components of
//! `C_n` and a gap function `f` that is constant on each maximal gap.
//!
//! For `q < p` and `1/p < r < 1/q` the indicator test stays bounded in the
//! depth while `‖T_α f‖` grows without bound and `‖f‖_p` stays bounded.
//! Everything here has a closed form; [`build_cantor_instance`] materializes
//! small depths so the generic engine can be checked against them.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ExponentPair, Instance, Lattice, SimpleFunction, Weight};
use crate::operators::pow;

/// Largest depth [`build_cantor_instance`] materializes (`3^13` leaves).
pub const DEFAULT_MATERIALIZE_LIMIT: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CantorConfig {
    pub depth: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl CantorConfig {
    /// Requires `depth ≥ 1`, `1 ≤ q < p` and `1/p < r < 1/q`.
    pub fn new(depth: usize, p: f64, q: f64, r: f64) -> Result<Self> {
        let config = Self::boundary(depth, p, q, r)?;
        if !(r < 1.0 / q) {
            return Err(Error::InvalidParameter(format!(
                "r = {r} must satisfy 1/p = {} < r < 1/q = {}",
                1.0 / p,
                1.0 / q
            )));
        }
        Ok(config)
    }

    /// Like [`CantorConfig::new`] but allows `r ≥ 1/q`, where the lower
    /// bound stops diverging.
    pub fn boundary(depth: usize, p: f64, q: f64, r: f64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidParameter("depth must be ≥ 1".into()));
        }
        let e = ExponentPair::new(p, q)?;
        if e.ratio_conj().is_none() {
            return Err(Error::InvalidParameter(format!("the construction needs q < p (p = {p}, q = {q})")));
        }
        if !(r.is_finite() && r > 1.0 / p) {
            return Err(Error::InvalidParameter(format!("r = {r} must exceed 1/p = {}", 1.0 / p)));
        }
        Ok(CantorConfig { depth, p, q, r })
    }

    pub fn with_depth(self, depth: usize) -> Self {
        CantorConfig { depth, ..self }
    }

    pub fn exponents(&self) -> ExponentPair {
        ExponentPair::new(self.p, self.q).expect("checked on construction")
    }

    /// `α` on a component of `C_n`.
    pub fn alpha(&self, n: usize) -> f64 {
        (2.0f64 / 3.0).powf(n as f64 / self.p)
    }

    /// Value of `f` on a maximal gap of length `3^{-n}`, `n ≥ 1`.
    pub fn gap_value(&self, n: usize) -> f64 {
        1.5f64.powf(n as f64 / self.p) * (n as f64).powf(-self.r)
    }

    /// `(1 − qr) p / q`, the growth exponent of the lower bound, when positive.
    pub fn divergence_exponent(&self) -> Option<f64> {
        let e = (1.0 - self.q * self.r) * self.p / self.q;
        (e > 0.0).then_some(e)
    }
}

/// Number of maximal gaps of length `3^{-n}`: one in the middle of each
/// component of `C_{n−1}`.
pub fn gap_count(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        2f64.powi(n as i32 - 1)
    }
}

#[derive(Clone, Debug)]
pub struct CantorInstance {
    pub config: CantorConfig,
    pub instance: Instance,
    pub f: SimpleFunction,
}

/// Materializes the instance and `f` with the default depth limit.
pub fn build_cantor_instance(config: &CantorConfig) -> Result<CantorInstance> {
    build_cantor_instance_with_limit(config, DEFAULT_MATERIALIZE_LIMIT)
}

pub fn build_cantor_instance_with_limit(config: &CantorConfig, limit: usize) -> Result<CantorInstance> {
    let depth = config.depth;
    if depth > limit {
        return Err(Error::TooDeep { depth, limit });
    }
    let lattice = Lattice::regular(3, depth)?;

    // The leaf at position i has ternary digits i_1 … i_N (most significant
    // first); it lies in C_N iff no digit is 1, else in the maximal gap at the
    // first 1.
    let leaves = 3usize.pow(depth as u32);
    let leaf_mu = 1.0 / leaves as f64;
    let leaf_nu = 0.5f64.powi(depth as i32);
    let mu = vec![leaf_mu; leaves];
    let mut nu = vec![0.0; leaves];
    let mut f = vec![0.0; leaves];
    for i in 0..leaves {
        match first_middle_digit(i, depth) {
            None => nu[i] = leaf_nu,
            Some(n) => f[i] = config.gap_value(n),
        }
    }

    let mut alpha = vec![0.0; lattice.len()];
    for n in 0..=depth {
        for (i, cell) in lattice.generation(n).enumerate() {
            if first_middle_digit(i, n).is_none() {
                alpha[cell.index()] = config.alpha(n);
            }
        }
    }
    let mu = Weight::new(&lattice, mu)?;
    let nu = Weight::new(&lattice, nu)?;
    let f = SimpleFunction::new(&lattice, f)?;
    let instance = Instance::new(lattice, mu, nu, alpha, config.exponents())?;
    Ok(CantorInstance { config: *config, instance, f })
}

/// Position (1-based, most significant first) of the first ternary digit 1
/// among the `digits` digits of `i`.
fn first_middle_digit(mut i: usize, digits: usize) -> Option<usize> {
    let mut first = None;
    for pos in (1..=digits).rev() {
        if i % 3 == 1 {
            first = Some(pos);
        }
        i /= 3;
    }
    first
}

/// Testing value at a component of `C_n`:
/// `([Σ_{k=n}^{N} (2/3)^{qk/p}]^{p/q} · 2^{-n} / 3^{-n})^{1/p}`.
pub fn closed_form_c1(config: &CantorConfig, n: usize) -> Result<f64> {
    if n > config.depth {
        return Err(Error::InvalidParameter(format!("generation {n} exceeds depth {}", config.depth)));
    }
    let (p, q) = (config.p, config.q);
    let inner: f64 = (n..=config.depth).map(|k| (2.0f64 / 3.0).powf(q * k as f64 / p)).sum();
    Ok((pow(inner, p / q) * 1.5f64.powi(n as i32)).powf(1.0 / p))
}

/// Global `C₁`: the largest [`closed_form_c1`] over generations, with its
/// generation. Gap cells carry no ν-mass and contribute 0.
pub fn closed_form_c1_max(config: &CantorConfig) -> (usize, f64) {
    (0..=config.depth)
        .map(|n| (n, closed_form_c1(config, n).expect("n ≤ depth")))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Depth-independent bound `(1 − (2/3)^{q/p})^{-1/q}` on every
/// [`closed_form_c1`].
pub fn uniform_c1_bound(p: f64, q: f64) -> f64 {
    (1.0 - (2.0f64 / 3.0).powf(q / p)).powf(-1.0 / q)
}

/// `‖f‖_{L^p(μ)}^p = Σ_{n=1}^{N} g_n 3^{-n} (3/2)^n n^{-pr}`.
pub fn closed_form_f_norm_p(config: &CantorConfig) -> f64 {
    (1..=config.depth)
        .map(|n| gap_count(n) * 3f64.powi(-(n as i32)) * 1.5f64.powi(n as i32) * (n as f64).powf(-config.p * config.r))
        .sum()
}

/// `‖f‖_{L^p(μ)}`.
pub fn closed_form_f_norm(config: &CantorConfig) -> f64 {
    closed_form_f_norm_p(config).powf(1.0 / config.p)
}

/// `lim_{N→∞} ‖f‖_p^p = ζ(pr)/2`.
pub fn limit_f_norm_p(p: f64, r: f64) -> f64 {
    0.5 * zeta(p * r)
}

/// Riemann zeta for `s > 1` by Euler–Maclaurin summation from 64 on.
fn zeta(s: f64) -> f64 {
    const M: f64 = 64.0;
    let head: f64 = (1..64).map(|n| (n as f64).powf(-s)).sum();
    let tail = M.powf(1.0 - s) / (s - 1.0) + 0.5 * M.powf(-s) + s * M.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * M.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * M.powf(-s - 5.0) / 30240.0;
    head + tail
}

/// Lower bound `[Σ_{k=0}^{N−1} ((1/3)(3/2)^{1/p}(k+1)^{-r})^q]^{p/q}` on
/// `‖T_α f‖^p`, from `E_I f ≥ (1/3)(3/2)^{(k+1)/p}(k+1)^{-r}` on components
/// of `C_k` and `ν(C_N) = 1`.
pub fn closed_form_lhs_lower(config: &CantorConfig) -> f64 {
    let (p, q, r) = (config.p, config.q, config.r);
    let base = 1.5f64.powf(1.0 / p) / 3.0;
    let inner: f64 = (0..config.depth).map(|k| pow(base * ((k + 1) as f64).powf(-r), q)).sum();
    pow(inner, p / q)
}

/// `E_I^μ f` on a component of `C_k`:
/// `3^k Σ_{m=k+1}^{N} 2^{m−k−1} 3^{-m} (3/2)^{m/p} m^{-r}`.
pub fn component_average(config: &CantorConfig, k: usize) -> f64 {
    (k + 1..=config.depth)
        .map(|m| 2f64.powi((m - k - 1) as i32) * 3f64.powi(-((m - k) as i32)) * config.gap_value(m))
        .sum()
}

/// `‖T_α f‖^p` exactly. ν lives on `C_N`, and every point there sees the same
/// chain of components, so the leafwise `ℓ^q` sum is a single number.
pub fn closed_form_lhs_exact(config: &CantorConfig) -> f64 {
    let q = config.q;
    let inner: f64 = (0..=config.depth)
        .map(|k| pow(config.alpha(k) * component_average(config, k), q))
        .sum();
    pow(inner, config.p / q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CantorRow {
    pub depth: usize,
    pub c1: f64,
    /// `‖f‖_{L^p(μ)}`.
    pub f_norm: f64,
    pub lhs_lower: f64,
    /// `‖T_α f‖^p` from the materialized instance, when built.
    pub lhs_exact: Option<f64>,
    /// `lhs_lower` over the previous row's.
    pub ratio_to_prev: Option<f64>,
}

impl CantorRow {
    pub fn f_norm_p(&self, p: f64) -> f64 {
        self.f_norm.powf(p)
    }
}

/// One row per depth for `r` in `(1/p, 1/q)`; depths up to
/// `materialize_up_to` also get `lhs_exact` from the generic engine.
pub fn divergence_sweep(p: f64, q: f64, r: f64, depths: &[usize], materialize_up_to: usize) -> Result<Vec<CantorRow>> {
    let configs = depths
        .iter()
        .map(|&d| CantorConfig::new(d, p, q, r))
        .collect::<Result<Vec<_>>>()?;
    sweep(&configs, materialize_up_to)
}

/// [`divergence_sweep`] without the upper restriction on `r`.
pub fn boundary_sweep(p: f64, q: f64, r: f64, depths: &[usize], materialize_up_to: usize) -> Result<Vec<CantorRow>> {
    let configs = depths
        .iter()
        .map(|&d| CantorConfig::boundary(d, p, q, r))
        .collect::<Result<Vec<_>>>()?;
    sweep(&configs, materialize_up_to)
}

fn sweep(configs: &[CantorConfig], materialize_up_to: usize) -> Result<Vec<CantorRow>> {
    let mut rows: Vec<CantorRow> = Vec::with_capacity(configs.len());
    for config in configs {
        let lhs_exact = if config.depth <= materialize_up_to {
            let built = build_cantor_instance_with_limit(config, materialize_up_to)?;
            let norm = crate::operators::mixed_norm_of_talpha(&built.instance, &built.f)?.value;
            Some(norm.powf(config.p))
        } else {
            None
        };
        let lhs_lower = closed_form_lhs_lower(config);
        rows.push(CantorRow {
            depth: config.depth,
            c1: closed_form_c1_max(config).1,
            f_norm: closed_form_f_norm(config),
            lhs_lower,
            lhs_exact,
            ratio_to_prev: rows.last().map(|prev| lhs_lower / prev.lhs_lower),
        });
    }
    Ok(rows)
}

/// CSV with header `depth,c1,f_norm,lhs_lower,lhs_exact,ratio_to_prev`;
/// absent values are empty fields.
pub fn rows_to_csv(rows: &[CantorRow]) -> String {
    let mut out = String::from("depth,c1,f_norm,lhs_lower,lhs_exact,ratio_to_prev\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for row in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            row.depth,
            row.c1,
            row.f_norm,
            row.lhs_lower,
            opt(row.lhs_exact),
            opt(row.ratio_to_prev)
        )
        .expect("writing to a String");
    }
    out
}

/// Least-squares slope of `log lhs_lower` against `log depth` over the rows.
pub fn growth_exponent(rows: &[CantorRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.depth as f64).ln(), r.lhs_lower.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub c1_low: f64,
    pub c1_high: f64,
    /// `lim ‖f‖_p` as the depth grows.
    pub f_norm_limit: f64,
    pub lhs_lower_growth: f64,
    pub fitted_exponent: Option<f64>,
    pub predicted_exponent: Option<f64>,
    /// `lhs_lower / (c1_high^p ‖f‖_∞-depth^p)` at the deepest row: a lower
    /// bound on the ratio of the true constant to `C₁`, raised to `p`.
    pub insufficiency_ratio: f64,
    /// `C₁` stays in a band of ratio < 4, `lhs_lower` strictly increases and
    /// the last ratio exceeds the first.
    pub c1_insufficient: bool,
}

/// Summarizes a sweep computed with `config`'s `p, q, r`.
pub fn summarize(config: &CantorConfig, rows: &[CantorRow]) -> Option<SweepSummary> {
    let first = rows.first()?;
    let last = rows.last()?;
    let c1_low = rows.iter().map(|r| r.c1).fold(f64::INFINITY, f64::min);
    let c1_high = rows.iter().map(|r| r.c1).fold(0.0, f64::max);
    let f_norm_limit_p = limit_f_norm_p(config.p, config.r);
    let increasing = rows.windows(2).all(|w| w[1].lhs_lower > w[0].lhs_lower);
    let insufficiency = |row: &CantorRow| row.lhs_lower / (c1_high.powf(config.p) * f_norm_limit_p);
    Some(SweepSummary {
        c1_low,
        c1_high,
        f_norm_limit: f_norm_limit_p.powf(1.0 / config.p),
        lhs_lower_growth: last.lhs_lower / first.lhs_lower,
        fitted_exponent: growth_exponent(rows),
        predicted_exponent: config.divergence_exponent(),
        insufficiency_ratio: insufficiency(last),
        c1_insufficient: c1_high / c1_low < 4.0 && increasing && insufficiency(last) > insufficiency(first),
    })
}
