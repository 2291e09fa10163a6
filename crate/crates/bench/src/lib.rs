//! Inputs shared by the benchmarks under `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppga_core::synthetic::{city_election, CityConfig};
use ppga_core::{cost_utility, FeasibleRegion, Instance};

/// Generated city election with `voters` voters over 40 projects.
pub fn city(voters: usize) -> Instance {
    let raw = city_election(&CityConfig {
        voters,
        ..CityConfig::default()
    });
    cost_utility(&raw).expect("generated election is valid")
}

/// Random caps in `[0.02, 0.5]` and a point with entries in `[-1, 1]`.
pub fn region_and_point(m: usize, seed: u64) -> (FeasibleRegion, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = (0..m).map(|_| rng.random_range(0.02..=0.5)).collect();
    let point = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (FeasibleRegion::with_bounds(bounds), point)
}

/// Random vector with entries in `[lo, hi)`.
pub fn uniform(m: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| rng.random_range(lo..hi)).collect()
}
