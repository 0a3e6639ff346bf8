//! Reference plants and random plant generators shared by tests, the
//! acceptance suite and the benchmark harness.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{PlantSpec, ShapeFunction};
use crate::simulator::{InitialCondition, ProfileTerm};

/// Environment variable that fixes the seed of randomized test data.
pub const SEED_ENV: &str = "CASCADE_STAB_SEED";

/// Seed from [`SEED_ENV`], or `default` when unset or unparsable.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

/// Indicator shapes `1_[w j, w (j + 1)]` for `j = 1..=n`.
pub fn step_shapes(n: usize, width: f64) -> Vec<ShapeFunction<f64>> {
    (1..=n).map(|j| ShapeFunction::Indicator { a: width * j as f64, b: width * (j + 1) as f64 }).collect()
}

/// Unstable three-equation cascade on `[0, π]` with a Dirichlet condition at
/// `x = π`, diffusions `(4, 5, 6)` and three narrow indicator actuators.
pub fn reference_plant() -> PlantSpec<f64> {
    PlantSpec {
        diffusion: vec![4.0, 5.0, 6.0],
        coupling: DMatrix::from_row_slice(3, 3, &[10.0, 4.0, 8.0, 1.0, 10.0, 2.0, 0.0, 1.0, 20.0]),
        length: PI,
        gamma1: 1.0,
        gamma2: 0.0,
        shapes: step_shapes(3, 0.1),
    }
}

/// Initial profile `(cos x + 1, 6 cos(x/2) + 3, −cos(x/2) − 0.5)` for [`reference_plant`].
pub fn reference_initial_condition() -> InitialCondition<f64> {
    let cos = |amplitude: f64, frequency: f64| ProfileTerm::Cosine { amplitude, frequency };
    let c = |value: f64| ProfileTerm::Constant { value };
    InitialCondition {
        components: vec![vec![cos(1.0, 1.0), c(1.0)], vec![cos(6.0, 0.5), c(3.0)], vec![cos(-1.0, 0.5), c(-0.5)]],
    }
}

/// Random valid cascade with `m` equations.
///
/// Coupling entries on and above the diagonal are uniform in `[-1, 1]`, the
/// subdiagonal has magnitude in `[0.5, 1.5]` with random sign, and the
/// diffusions are distinct draws from `[0.5, 3]`. The domain is `[0, 1]`
/// with a Dirichlet condition at `x = 1`; no shapes are attached.
pub fn random_cascade(seed: u64, m: usize) -> PlantSpec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            q[(i, j)] = rng.random_range(-1.0..1.0);
        }
        if i + 1 < m {
            let mag: f64 = rng.random_range(0.5..1.5);
            q[(i + 1, i)] = if rng.random_bool(0.5) { mag } else { -mag };
        }
    }
    let diffusion = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
    PlantSpec { diffusion, coupling: q, length: 1.0, gamma1: 1.0, gamma2: 0.0, shapes: vec![] }
}
