//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use fibercheck_core::geometry::RadiusEntry;
use fibercheck_core::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(seed: u64, n: usize, dim: usize) -> PointCloud {
    let mut r = rng(seed);
    let coords: Vec<f64> = (0..n * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    PointCloud::new(coords, n, dim).unwrap()
}

/// Plain left-to-right Euclidean distance.
pub fn naive_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    s.sqrt()
}

/// Reference volume/radius curve for one point: sort all nonzero distances,
/// collapse ties to the largest volume, and keep the span from the first entry
/// reaching `v_min - 1` to the first reaching `v_max + 1`. `None` if the curve
/// never reaches `v_max + 1`.
#[allow(clippy::int_plus_one)] // the range rule, written as stated
pub fn brute_profile(cloud: &PointCloud, i: usize, v_min: usize, v_max: usize) -> Option<Vec<RadiusEntry>> {
    let mut d: Vec<f64> = (0..cloud.n())
        .filter(|&j| j != i)
        .map(|j| naive_distance(cloud.row(i), cloud.row(j)))
        .filter(|&x| x > 0.0)
        .collect();
    d.sort_by(f64::total_cmp);
    let mut merged: Vec<RadiusEntry> = Vec::new();
    for (k, &r) in d.iter().enumerate() {
        match merged.last_mut() {
            Some(last) if last.radius == r => last.volume = k + 1,
            _ => merged.push(RadiusEntry { volume: k + 1, radius: r }),
        }
    }
    let start = merged.iter().position(|e| e.volume >= v_min - 1)?;
    let end = merged.iter().position(|e| e.volume >= v_max + 1)?;
    Some(merged[start..=end].to_vec())
}

/// Random orthogonal matrix (Gram-Schmidt on Gaussian-ish columns), row-major.
pub fn random_rotation(seed: u64, dim: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

pub fn rigid_motion(cloud: &PointCloud, seed: u64) -> PointCloud {
    let dim = cloud.dim();
    let rot = random_rotation(seed, dim);
    let mut r = rng(seed ^ 0x5eed);
    let shift: Vec<f64> = (0..dim).map(|_| r.gen_range(-10.0..10.0)).collect();
    cloud
        .map_rows(|x| (0..dim).map(|a| rot[a].iter().zip(x).map(|(m, v)| m * v).sum::<f64>() + shift[a]).collect())
        .unwrap()
}

pub fn dist3(a: &[f64], b: &[f64; 3]) -> f64 {
    naive_distance(a, b)
}
