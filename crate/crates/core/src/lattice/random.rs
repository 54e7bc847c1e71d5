use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExponentPair, Instance, Lattice, Weight};
use crate::error::{Error, Result};

/// Parameters of [`random_instance`].
///
/// Masses are independent uniform draws on `[0, 1]`, each replaced by an exact
/// zero with probability `mass_zero_fraction`; coefficients likewise with
/// `alpha_zero_fraction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomParams {
    pub branching: usize,
    pub depth: usize,
    pub p: f64,
    pub q: f64,
    pub mass_zero_fraction: f64,
    pub alpha_zero_fraction: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            branching: 2,
            depth: 3,
            p: 2.0,
            q: 1.0,
            mass_zero_fraction: 0.1,
            alpha_zero_fraction: 0.2,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, zero_fraction: f64) -> f64 {
    if rng.gen::<f64>() < zero_fraction {
        0.0
    } else {
        rng.gen::<f64>()
    }
}

/// Regular random instance, reproducible from `seed`.
pub fn random_instance(seed: u64, params: &RandomParams) -> Result<Instance> {
    if params.branching < 2 {
        return Err(Error::InvalidParameter("branching must be ≥ 2".into()));
    }
    if params.depth < 1 {
        return Err(Error::InvalidParameter("depth must be ≥ 1".into()));
    }
    for (name, x) in [("mass", params.mass_zero_fraction), ("alpha", params.alpha_zero_fraction)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("{name} zero fraction must lie in [0, 1]")));
        }
    }
    let exponents = ExponentPair::new(params.p, params.q)?;
    let lattice = Lattice::regular(params.branching, params.depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lattice.num_leaves();
    let mu: Vec<f64> = (0..n).map(|_| draw(&mut rng, params.mass_zero_fraction)).collect();
    let nu: Vec<f64> = (0..n).map(|_| draw(&mut rng, params.mass_zero_fraction)).collect();
    let alpha: Vec<f64> = (0..lattice.len()).map(|_| draw(&mut rng, params.alpha_zero_fraction)).collect();
    let mu = Weight::new(&lattice, mu)?;
    let nu = Weight::new(&lattice, nu)?;
    Instance::new(lattice, mu, nu, alpha, exponents)
}
