//! Local dimension estimates from log-volume versus log-radius slopes.

use crate::error::{Error, Result};
use crate::geometry::NeighborProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEntry {
    pub volume: usize,
    pub radius: f64,
    pub log_radius: f64,
    /// Local dimension estimate `d ln v / d ln r`.
    pub slope: f64,
}

/// Per-point dimension estimates, ordered by volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSeries {
    pub point_index: usize,
    pub entries: Vec<SlopeEntry>,
}

impl SlopeSeries {
    pub fn slopes(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.slope).collect()
    }

    /// Median slope, the per-point summary used for dimension quartiles.
    pub fn median_slope(&self) -> Option<f64> {
        let mut s = self.slopes();
        if s.is_empty() {
            return None;
        }
        s.sort_by(f64::total_cmp);
        Some(quantile_sorted(&s, 0.5))
    }
}

/// Converts a neighbor profile into slopes of `ln v` against `ln r`.
///
/// Interior entries use centered differences over their two neighbors; the
/// first and last entry of the profile fall back to one-sided differences.
/// Only entries with volume in `[v_min, v_max]` are returned, so the margin
/// ranks `v_min - 1` and `v_max + 1` serve purely as stencil points.
pub fn loglog_slopes(profile: &NeighborProfile) -> Result<SlopeSeries> {
    let m = profile.radii.len();
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "point {} has {m} distinct radii; at least 3 are needed for slopes",
            profile.point_index
        )));
    }
    let r = &profile.radii;

    let entries = (0..m)
        .filter(|&j| (profile.v_min..=profile.v_max).contains(&r[j].volume))
        .map(|j| {
            let (lo, hi) = match j {
                0 => (0, 1),
                j if j == m - 1 => (m - 2, m - 1),
                j => (j - 1, j + 1),
            };
            // Log-ratios rather than differences of logs: no cancellation
            // against the magnitude of ln r, so rescaling the cloud leaves
            // the slope unchanged up to rounding of the ratio.
            let dv = (r[hi].volume as f64 / r[lo].volume as f64).ln();
            let dr = (r[hi].radius / r[lo].radius).ln();
            SlopeEntry { volume: r[j].volume, radius: r[j].radius, log_radius: r[j].radius.ln(), slope: dv / dr }
        })
        .collect();
    Ok(SlopeSeries { point_index: profile.point_index, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quartiles of arbitrary values.
pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::InsufficientData("quartiles of an empty set".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(Quartiles { q1: quantile_sorted(&s, 0.25), q2: quantile_sorted(&s, 0.5), q3: quantile_sorted(&s, 0.75) })
}

/// Quartiles of per-point median slopes.
///
/// Callers pass only the series of points that admit an estimate in the
/// regime, i.e. points whose manifold test was not rejected.
pub fn dimension_quartiles<'a>(series: impl IntoIterator<Item = &'a SlopeSeries>) -> Result<Quartiles> {
    let medians: Vec<f64> = series.into_iter().filter_map(SlopeSeries::median_slope).collect();
    quartiles(&medians)
}
