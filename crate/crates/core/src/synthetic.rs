//! Seeded generators for the validation geometries.
//!
//! All randomness comes from ChaCha20 seeded with a 64-bit seed. Uniform
//! variates take the top 53 bits of each 64-bit output; Gaussians use the
//! Box-Muller transform on two such uniforms. Output for a given
//! `(kind, n, seed, params)` is identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NeighborProfile, RadiusEntry};
use crate::pointcloud::PointCloud;

/// Bumped whenever a generator's output for a fixed seed changes.
pub const GENERATOR_VERSION: u32 = 1;

pub const DEFAULT_CANDY_FRACTION: f64 = 0.8;
pub const DEFAULT_STICK_LENGTH: f64 = 1.0;

struct Sampler(ChaCha20Rng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Uniform on [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn unit_sphere(&mut self) -> [f64; 3] {
        loop {
            let v = [self.gaussian(), self.gaussian(), self.gaussian()];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm > 1e-8 {
                return [v[0] / norm, v[1] / norm, v[2] / norm];
            }
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 10 {
        return Err(Error::Parameter(format!("synthetic datasets need n >= 10, got {n}")));
    }
    Ok(())
}

/// How points are distributed over the cusp surface `z^8 = x^2 + y^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CuspSampling {
    /// Height `z` uniform on [0, 1], angle uniform; `(x, y)` on the circle of radius `z^4`.
    #[default]
    HeightUniform,
    /// `(x, y)` uniform on the unit disk, `z = (x^2 + y^2)^(1/8)`.
    DiskUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    Sphere,
    Cusp { sampling: CuspSampling },
    Lollipop { candy_fraction: f64, stick_length: f64 },
    Strip { length: f64, width: f64 },
}

/// Everything needed to regenerate a synthetic cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub n: usize,
    pub seed: u64,
    pub generator_version: u32,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed, generator_version: GENERATOR_VERSION }
    }

    pub fn generate(&self) -> Result<PointCloud> {
        match self.kind {
            SyntheticKind::Sphere => gen_sphere(self.n, self.seed),
            SyntheticKind::Cusp { sampling } => gen_cusp_with(self.n, self.seed, sampling),
            SyntheticKind::Lollipop { candy_fraction, stick_length } => {
                gen_lollipop(self.n, self.seed, candy_fraction, stick_length)
            }
            SyntheticKind::Strip { length, width } => gen_strip(self.n, self.seed, length, width),
        }
    }
}

/// `n` points uniform on the unit sphere in R^3.
pub fn gen_sphere(n: usize, seed: u64) -> Result<PointCloud> {
    check_n(n)?;
    let mut s = Sampler::new(seed);
    let coords: Vec<f64> = (0..n).flat_map(|_| s.unit_sphere()).collect();
    Ok(PointCloud::new(coords, n, 3)?.with_source(format!("sphere(n={n}, seed={seed})")))
}

/// `n` points on the cusp surface `z^8 = x^2 + y^2`, `x^2 + y^2 <= 1`.
pub fn gen_cusp(n: usize, seed: u64) -> Result<PointCloud> {
    gen_cusp_with(n, seed, CuspSampling::default())
}

pub fn gen_cusp_with(n: usize, seed: u64, sampling: CuspSampling) -> Result<PointCloud> {
    check_n(n)?;
    let mut s = Sampler::new(seed);
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let (rho, z) = match sampling {
            CuspSampling::HeightUniform => {
                let z = s.uniform();
                (z.powi(4), z)
            }
            CuspSampling::DiskUniform => {
                let rho = s.uniform().sqrt();
                (rho, rho.sqrt().sqrt())
            }
        };
        let theta = std::f64::consts::TAU * s.uniform();
        coords.extend([rho * theta.cos(), rho * theta.sin(), z]);
    }
    Ok(PointCloud::new(coords, n, 3)?.with_source(format!("cusp(n={n}, seed={seed})")))
}

/// Location of the two singular points of a lollipop built by [`gen_lollipop`].
pub fn lollipop_singularities(stick_length: f64) -> ([f64; 3], [f64; 3]) {
    ([0.0, 0.0, 1.0], [0.0, 0.0, 1.0 + stick_length])
}

/// A unit sphere (the candy) with a segment (the stick) attached at the north
/// pole and pointing outward along +z.
///
/// `floor(candy_fraction * n)` points lie on the sphere, the rest on the stick.
pub fn gen_lollipop(n: usize, seed: u64, candy_fraction: f64, stick_length: f64) -> Result<PointCloud> {
    check_n(n)?;
    if !(candy_fraction > 0.0 && candy_fraction <= 1.0) {
        return Err(Error::Parameter(format!("candy_fraction must lie in (0, 1], got {candy_fraction}")));
    }
    if !(stick_length > 0.0 && stick_length.is_finite()) {
        return Err(Error::Parameter(format!("stick_length must be positive, got {stick_length}")));
    }
    let candy = (candy_fraction * n as f64).floor() as usize;
    let mut s = Sampler::new(seed);
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..candy {
        coords.extend(s.unit_sphere());
    }
    for _ in candy..n {
        coords.extend([0.0, 0.0, 1.0 + stick_length * s.uniform()]);
    }
    Ok(PointCloud::new(coords, n, 3)?.with_source(format!("lollipop(n={n}, seed={seed})")))
}

/// Uniform points in the rectangle `[0, length] x [0, width]`.
pub fn gen_strip(n: usize, seed: u64, length: f64, width: f64) -> Result<PointCloud> {
    check_n(n)?;
    if !(width >= 0.0 && length > 0.0 && width < length && length.is_finite()) {
        return Err(Error::Parameter(format!("strip needs 0 <= width < length, got width {width}, length {length}")));
    }
    let mut s = Sampler::new(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let x = length * s.uniform();
        let y = width * s.uniform();
        coords.extend([x, y]);
    }
    Ok(PointCloud::new(coords, n, 2)?.with_source(format!("strip(n={n}, seed={seed})")))
}

/// Exact power-law profile `r_v = v^(1/d)` over ranks `v_min - 1 ..= v_max + 1`.
pub fn gen_power_law_oracle(v_min: usize, v_max: usize, d: f64) -> Result<NeighborProfile> {
    if v_min < 2 || v_max < v_min {
        return Err(Error::Parameter(format!("invalid volume range {v_min}..={v_max}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Parameter(format!("oracle dimension must be positive, got {d}")));
    }
    Ok(NeighborProfile {
        point_index: 0,
        v_min,
        v_max,
        radii: (v_min - 1..=v_max + 1).map(|v| RadiusEntry { volume: v, radius: (v as f64).powf(1.0 / d) }).collect(),
        dropped_zero_distances: 0,
        short: false,
    })
}
