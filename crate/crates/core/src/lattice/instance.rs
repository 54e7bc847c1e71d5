use serde::Serialize;

use super::{CellId, Lattice};
use crate::error::{Error, Result};

/// Exponents `(p, q)` of the mixed-norm inequality, with `p > 1` and `q ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentPair {
    p: f64,
    q: f64,
}

impl ExponentPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidExponents(format!("need 1 < p < ∞, got p = {p}")));
        }
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::InvalidExponents(format!("need 1 ≤ q < ∞, got q = {q}")));
        }
        Ok(ExponentPair { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Hölder conjugate `p' = p / (p − 1)`.
    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    /// `p / q`, the exponent of the reduced scalar problem.
    pub fn ratio(&self) -> f64 {
        self.p / self.q
    }

    /// `(p/q)'`, defined only when `p > q`.
    pub fn ratio_conj(&self) -> Option<f64> {
        (self.p > self.q).then(|| conjugate(self.ratio()))
    }
}

pub(crate) fn conjugate(s: f64) -> f64 {
    s / (s - 1.0)
}

/// Selects one of the two weights of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Mu,
    Nu,
}

/// Atomic measure on the leaves, with the mass of every cell precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    leaf: Vec<f64>,
    cell: Vec<f64>,
}

impl Weight {
    /// `leaf_masses` is indexed by leaf position.
    pub fn new(lattice: &Lattice, leaf_masses: Vec<f64>) -> Result<Self> {
        if leaf_masses.len() != lattice.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: lattice.num_leaves(),
                got: leaf_masses.len(),
            });
        }
        for (pos, &m) in leaf_masses.iter().enumerate() {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidMass {
                    leaf: lattice.label(lattice.leaves()[pos]),
                    mass: m,
                });
            }
        }
        let cell = subtree_sums(lattice, &leaf_masses);
        Ok(Weight {
            leaf: leaf_masses,
            cell,
        })
    }

    pub fn leaf_masses(&self) -> &[f64] {
        &self.leaf
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.cell
    }

    pub fn mass(&self, cell: CellId) -> f64 {
        self.cell[cell.index()]
    }

    pub fn total(&self, lattice: &Lattice) -> f64 {
        lattice.generation(0).map(|c| self.mass(c)).sum()
    }
}

/// Sums a leaf-indexed quantity over the leaves of every cell, bottom-up.
pub(crate) fn subtree_sums(lattice: &Lattice, leaf_values: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; lattice.len()];
    for (pos, &leaf) in lattice.leaves().iter().enumerate() {
        sums[leaf.index()] = leaf_values[pos];
    }
    for cell in lattice.cells().rev() {
        if let Some(p) = lattice.parent(cell) {
            sums[p.index()] += sums[cell.index()];
        }
    }
    sums
}

/// Function constant on each leaf cell, indexed by leaf position.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleFunction {
    values: Vec<f64>,
}

impl SimpleFunction {
    pub fn new(lattice: &Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: lattice.num_leaves(),
                got: values.len(),
            });
        }
        Ok(SimpleFunction { values })
    }

    pub fn zero(lattice: &Lattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: &Lattice, c: f64) -> Self {
        SimpleFunction {
            values: vec![c; lattice.num_leaves()],
        }
    }

    /// `1_J`.
    pub fn indicator(lattice: &Lattice, cell: CellId) -> Self {
        let mut values = vec![0.0; lattice.num_leaves()];
        values[lattice.span(cell)].fill(1.0);
        SimpleFunction { values }
    }

    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        SimpleFunction { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SimpleFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

/// The complete problem datum: lattice, two weights, coefficients and exponents.
#[derive(Clone, Debug)]
pub struct Instance {
    lattice: Lattice,
    mu: Weight,
    nu: Weight,
    alpha: Vec<f64>,
    exponents: ExponentPair,
}

impl Instance {
    /// `alpha` is indexed by dense cell index.
    pub fn new(lattice: Lattice, mu: Weight, nu: Weight, alpha: Vec<f64>, exponents: ExponentPair) -> Result<Self> {
        if mu.leaf.len() != lattice.num_leaves() || nu.leaf.len() != lattice.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: lattice.num_leaves(),
                got: mu.leaf.len().min(nu.leaf.len()),
            });
        }
        if alpha.len() != lattice.len() {
            return Err(Error::LengthMismatch {
                expected: lattice.len(),
                got: alpha.len(),
            });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidCoefficient {
                    cell: lattice.labels[i],
                    value: a,
                });
            }
        }
        Ok(Instance {
            lattice,
            mu,
            nu,
            alpha,
            exponents,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn weight(&self, which: Measure) -> &Weight {
        match which {
            Measure::Mu => &self.mu,
            Measure::Nu => &self.nu,
        }
    }

    pub fn mu(&self) -> &Weight {
        &self.mu
    }

    pub fn nu(&self) -> &Weight {
        &self.nu
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_of(&self, cell: CellId) -> f64 {
        self.alpha[cell.index()]
    }

    pub fn exponents(&self) -> ExponentPair {
        self.exponents
    }

    /// μ(I) or ν(I).
    pub fn cell_mass(&self, which: Measure, cell: CellId) -> Result<f64> {
        self.lattice.check(cell)?;
        Ok(self.weight(which).mass(cell))
    }

    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        Instance::new(self.lattice.clone(), self.mu.clone(), self.nu.clone(), alpha, self.exponents)
    }

    pub fn with_exponents(&self, exponents: ExponentPair) -> Self {
        Instance {
            exponents,
            ..self.clone()
        }
    }

    /// Cells where μ(I) = 0 but α_I > 0; the zero-average convention hides
    /// these from every operator.
    pub fn degenerate_alpha_cells(&self) -> Vec<CellId> {
        self.lattice
            .cells()
            .filter(|&c| self.mu.mass(c) == 0.0 && self.alpha_of(c) > 0.0)
            .collect()
    }
}
