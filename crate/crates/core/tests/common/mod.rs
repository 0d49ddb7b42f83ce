#![allow(dead_code)]

use downwash_core::frame::{FormationSnapshot, Vec3, VehicleState};
use downwash_core::models::{GridLookupModel, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> Vec3 {
    Vec3::new(
        rng.random_range(lo[0]..hi[0]),
        rng.random_range(lo[1]..hi[1]),
        rng.random_range(lo[2]..hi[2]),
    )
}

/// Sufferer anywhere near the origin, `k` neighbours above it within the
/// sweep volume, random velocities.
pub fn random_snapshot(rng: &mut ChaCha8Rng, k: usize) -> FormationSnapshot {
    let sufferer_pos = random_vec(rng, [-0.2; 3], [0.2; 3]);
    let sufferer = VehicleState::new(sufferer_pos, random_vec(rng, [-0.5; 3], [0.5; 3]), 0.0);
    let neighbours = (0..k)
        .map(|_| {
            let rel = random_vec(rng, [-1.0, -1.0, -1.4], [1.0, 1.0, -0.1]);
            VehicleState::new(
                sufferer_pos + rel,
                random_vec(rng, [-0.6; 3], [0.6; 3]),
                rng.random_range(-3.0..3.0),
            )
        })
        .collect();
    FormationSnapshot::new(sufferer, neighbours).unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng) -> GridLookupModel {
    let spec = GridSpec {
        origin: [-1.0, -1.0, -1.3],
        cell: [0.2, 0.25, 0.5],
        counts: [11, 9, 3],
    };
    let values = (0..spec.n_cells())
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    GridLookupModel::from_values(spec, values).unwrap()
}

/// Every permutation of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}
