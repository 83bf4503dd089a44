//! Nearest-neighbor radii at fixed ball volumes.
//!
//! Distances are evaluated in row tiles against column blocks and streamed into
//! a bounded per-point selector, so the full `n x n` matrix is never stored.
//! Ball volumes are Monte-Carlo counts: volume `k` at radius `r` means exactly
//! `k` other points lie within distance `r` of the center.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

/// Default number of columns evaluated per block.
pub const DEFAULT_BLOCK_SIZE: usize = 1024;

const ROW_TILE: usize = 32;

/// One tie-merged step of a point's volume/radius curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEntry {
    pub volume: usize,
    pub radius: f64,
}

/// Sorted radii around one point at volume ranks `v_min - 1 ..= v_max + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborProfile {
    pub point_index: usize,
    /// Requested volume range; `radii` spans ranks `v_min - 1 ..= v_max + 1`.
    pub v_min: usize,
    pub v_max: usize,
    /// Strictly increasing in both volume and radius; all radii positive.
    pub radii: Vec<RadiusEntry>,
    /// Other points at exactly zero distance, excluded from all volumes.
    pub dropped_zero_distances: usize,
    /// Set when the point has too few distinct neighbors to reach volume `v_max + 1`.
    pub short: bool,
}

/// A dense block of Euclidean distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBlock {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    pub data: Vec<f64>,
}

impl DistanceBlock {
    /// Distance between point `rows.start + i` and point `cols.start + j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols.len() + j]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NeighborConfig {
    pub v_min: usize,
    pub v_max: usize,
    pub block_size: usize,
}

impl NeighborConfig {
    pub fn new(v_min: usize, v_max: usize) -> Self {
        Self { v_min, v_max, block_size: DEFAULT_BLOCK_SIZE }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.v_min < 2 {
            return Err(Error::Parameter(format!(
                "v_min must be at least 2 so that rank v_min-1 >= 1 exists (got {})",
                self.v_min
            )));
        }
        if self.v_max < self.v_min {
            return Err(Error::Parameter(format!("v_max ({}) must be >= v_min ({})", self.v_max, self.v_min)));
        }
        if self.v_max + 1 > n.saturating_sub(1) {
            return Err(Error::Parameter(format!(
                "v_max + 1 must be <= n - 1, i.e. v_max <= n - 2 = {} (got v_max = {})",
                n as i64 - 2,
                self.v_max
            )));
        }
        if self.block_size == 0 {
            return Err(Error::Parameter("block size must be positive".into()));
        }
        Ok(())
    }
}

/// Squared Euclidean distance, accumulated in a fixed order so that
/// `sq_dist(a, b) == sq_dist(b, a)` bit for bit.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Euclidean distances between every point in `rows` and every point in `cols`.
pub fn pairwise_distance_block(cloud: &PointCloud, rows: Range<usize>, cols: Range<usize>) -> Result<DistanceBlock> {
    let n = cloud.n();
    for (name, r) in [("rows", &rows), ("cols", &cols)] {
        if r.start > r.end || r.end > n {
            return Err(Error::Parameter(format!("{name} range {}..{} outside 0..{n}", r.start, r.end)));
        }
    }
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for i in rows.clone() {
        let a = cloud.row(i);
        data.extend(cols.clone().map(|j| distance(a, cloud.row(j))));
    }
    Ok(DistanceBlock { rows, cols, data })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Keeps the `capacity` smallest distances seen, plus how many discarded
/// distances tie with the current maximum.
#[derive(Debug)]
struct NearestSelector {
    capacity: usize,
    heap: BinaryHeap<Dist>,
    ties_beyond: usize,
    zeros: usize,
}

impl NearestSelector {
    fn new(capacity: usize) -> Self {
        Self { capacity, heap: BinaryHeap::with_capacity(capacity + 1), ties_beyond: 0, zeros: 0 }
    }

    #[inline]
    fn push(&mut self, d: f64) {
        if d == 0.0 {
            self.zeros += 1;
            return;
        }
        if self.heap.len() < self.capacity {
            self.heap.push(Dist(d));
            return;
        }
        let max = self.heap.peek().expect("capacity > 0").0;
        match d.total_cmp(&max) {
            Ordering::Greater => {}
            Ordering::Equal => self.ties_beyond += 1,
            Ordering::Less => {
                self.heap.pop();
                self.heap.push(Dist(d));
                let new_max = self.heap.peek().expect("non-empty").0;
                if new_max == max {
                    self.ties_beyond += 1;
                } else {
                    self.ties_beyond = 0;
                }
            }
        }
    }

    fn into_profile(self, point_index: usize, v_min: usize, v_max: usize) -> NeighborProfile {
        let full = self.heap.len() == self.capacity;
        let ties_beyond = self.ties_beyond;
        let sorted: Vec<f64> = self.heap.into_sorted_vec().into_iter().map(|d| d.0).collect();

        let mut merged: Vec<RadiusEntry> = Vec::new();
        for (k, &r) in sorted.iter().enumerate() {
            let volume = k + 1;
            match merged.last_mut() {
                Some(last) if last.radius == r => last.volume = volume,
                _ => merged.push(RadiusEntry { volume, radius: r }),
            }
        }
        if full {
            if let Some(last) = merged.last_mut() {
                last.volume += ties_beyond;
            }
        }

        let lo = v_min - 1;
        let hi = v_max + 1;
        let reaches_top = merged.last().is_some_and(|e| e.volume >= hi);
        let start = merged.iter().position(|e| e.volume >= lo).unwrap_or(merged.len());
        let end = merged.iter().position(|e| e.volume >= hi).map(|i| i + 1).unwrap_or(merged.len());
        let radii = merged[start..end.max(start)].to_vec();

        NeighborProfile { point_index, v_min, v_max, radii, dropped_zero_distances: self.zeros, short: !reaches_top }
    }
}

/// Computes the neighbor profile of every point with the default block size.
pub fn neighbor_radii(cloud: &PointCloud, v_min: usize, v_max: usize) -> Result<Vec<NeighborProfile>> {
    neighbor_radii_with(cloud, &NeighborConfig::new(v_min, v_max))
}

/// Computes the neighbor profile of every point.
///
/// Rows are processed in parallel tiles; each row's result depends only on its
/// own distances, so the output does not depend on the thread count.
pub fn neighbor_radii_with(cloud: &PointCloud, config: &NeighborConfig) -> Result<Vec<NeighborProfile>> {
    let n = cloud.n();
    config.validate(n)?;
    let capacity = config.v_max + 1;
    let block = config.block_size;

    let starts: Vec<usize> = (0..n).step_by(ROW_TILE).collect();
    let tiles: Vec<Vec<NeighborProfile>> = starts
        .into_par_iter()
        .map(|start| {
            let rows = start..(start + ROW_TILE).min(n);
            let mut selectors: Vec<NearestSelector> = rows.clone().map(|_| NearestSelector::new(capacity)).collect();
            let mut col = 0;
            while col < n {
                let cols = col..(col + block).min(n);
                for (i, selector) in rows.clone().zip(selectors.iter_mut()) {
                    let a = cloud.row(i);
                    for j in cols.clone() {
                        if j != i {
                            selector.push(distance(a, cloud.row(j)));
                        }
                    }
                }
                col = cols.end;
            }
            rows.zip(selectors).map(|(i, s)| s.into_profile(i, config.v_min, config.v_max)).collect()
        })
        .collect();
    Ok(tiles.into_iter().flatten().collect())
}

/// Builds a profile from an explicit, ascending list of neighbor distances.
/// Used for oracle profiles that bypass the point cloud.
pub fn profile_from_distances(point_index: usize, distances: &[f64], v_min: usize, v_max: usize) -> NeighborProfile {
    let mut selector = NearestSelector::new(v_max + 1);
    for &d in distances {
        selector.push(d);
    }
    selector.into_profile(point_index, v_min, v_max)
}
