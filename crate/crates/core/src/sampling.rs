//! Seeded random sampling shared by the probes and experiments.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn standard_normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn uniform_vector<R: Rng>(rng: &mut R, n: usize, amplitude: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-amplitude..=amplitude))
}
