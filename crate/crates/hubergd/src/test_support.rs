//! Shared fixtures for unit tests: random instances rejection-sampled away
//! from the activation kinks.

use crate::data::{random_unit_vector, Dataset};
use crate::model::ParamMatrix;
use crate::oracles::kink_distance;
use crate::rng::seeded_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random weights and unit-norm data with every preactivation at least
/// `1e-3` away from the set `{0, h}` where the weak Hessian is undefined.
pub(crate) fn smooth_instance(
    p: usize,
    dim: usize,
    n: usize,
    h: f64,
    mut seed: u64,
) -> (ParamMatrix, Dataset) {
    loop {
        let mut rng = seeded_rng(seed);
        let data: Vec<f64> =
            (0..2 * p * dim).map(|_| StandardNormal.sample::<f64, _>(&mut rng)).collect();
        let v = ParamMatrix::from_flat(p, dim, data).unwrap();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            features.extend(random_unit_vector(dim, &mut rng));
            labels.push(if rng.gen::<bool>() { 1.0 } else { -1.0 });
        }
        let d = Dataset::new(dim, features, labels, None).unwrap();
        if kink_distance(&v, &d, h) >= 1e-3 {
            return (v, d);
        }
        seed = seed.wrapping_add(0x9E37_79B9);
    }
}
