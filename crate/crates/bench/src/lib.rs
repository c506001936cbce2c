//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vset_core::harness::{draw_trial, Series, WeightScheme};
use vset_core::{ClassSimplex, Dictionary, SummedVector};

/// A synthetic dictionary and the sum of `k` random members with weights in
/// [0.5, 1.5].
pub fn planted(dim: usize, size: usize, k: usize, seed: u64) -> (Dictionary, SummedVector) {
    let d = Dictionary::generate_synthetic(dim, size, seed).expect("valid sizes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = draw_trial(&d, k, Series::Random, WeightScheme::Uniform, 0.0, &mut rng).expect("k fits");
    (d, SummedVector::new(t.target))
}

/// A class simplex over the first `k` entries of a synthetic dictionary and a
/// point outside it.
pub fn simplex_fixture(dim: usize, k: usize, seed: u64) -> (ClassSimplex, Vec<f64>) {
    let d = Dictionary::generate_synthetic(dim, k + 1, seed).expect("valid sizes");
    let members: Vec<String> = d.tokens()[..k].to_vec();
    let s = ClassSimplex::from_dictionary(&d, "bench", &members).expect("members exist");
    let x = d.vector(&d.tokens()[k]).expect("present").to_vec();
    (s, x)
}
