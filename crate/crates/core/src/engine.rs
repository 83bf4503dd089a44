//! Per-point manifold and fiber-bundle tests and the study-wide correction.
//!
//! The manifold test asks whether the local dimension is constant across a
//! point's volume range: any significant change between adjacent slope windows
//! rejects. The fiber-bundle test only rejects when the dimension *increases*
//! with radius, which a fiber bundle with small reach cannot do.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{loglog_slopes, SlopeSeries};
use crate::error::{Error, Result};
use crate::geometry::{neighbor_radii_with, NeighborConfig, NeighborProfile, DEFAULT_BLOCK_SIZE};
use crate::pointcloud::PointCloud;
use crate::report::{summarize_regime, StudySummary};
use crate::stats::{holm_bonferroni, welch_t_test, Alternative};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallRadius,
    LargeRadius,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::SmallRadius => "small",
            Regime::LargeRadius => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub v_min: usize,
    pub v_max: usize,
    /// Sliding window size W.
    pub window: usize,
    pub alpha: f64,
    pub regime: Regime,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
}

fn default_block_size() -> usize {
    DEFAULT_BLOCK_SIZE
}

impl TestConfig {
    pub const DEFAULT_WINDOW: usize = 16;
    pub const DEFAULT_ALPHA: f64 = 1e-3;

    pub fn new(v_min: usize, v_max: usize, window: usize, alpha: f64, regime: Regime) -> Self {
        Self { v_min, v_max, window, alpha, regime, block_size: DEFAULT_BLOCK_SIZE }
    }

    pub fn small() -> Self {
        Self::new(8, 256, Self::DEFAULT_WINDOW, Self::DEFAULT_ALPHA, Regime::SmallRadius)
    }

    pub fn large() -> Self {
        Self::new(256, 2048, Self::DEFAULT_WINDOW, Self::DEFAULT_ALPHA, Regime::LargeRadius)
    }

    /// Checks the configuration on its own, independent of any cloud.
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Parameter(format!("window must be at least 2 (got {})", self.window)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.v_max < self.v_min || self.v_max - self.v_min + 1 < 2 * self.window {
            return Err(Error::Parameter(format!(
                "v_max - v_min + 1 must be at least 2 * window = {} (got v_min = {}, v_max = {})",
                2 * self.window,
                self.v_min,
                self.v_max
            )));
        }
        self.neighbor_config().validate(usize::MAX)
    }

    /// Checks the configuration against a cloud of `n` points.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        self.neighbor_config().validate(n)
    }

    pub fn neighbor_config(&self) -> NeighborConfig {
        NeighborConfig { v_min: self.v_min, v_max: self.v_max, block_size: self.block_size }
    }
}

/// The most significant adjacent-window split for one test at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub p_raw: f64,
    /// Volume of the first entry after the split.
    pub split_volume: usize,
    /// Radius at the split boundary; the empirical transition radius.
    pub transition_radius: f64,
    pub mean_before: f64,
    pub mean_after: f64,
}

/// Raw p-values at every split position, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitP {
    pub split_volume: usize,
    pub p_manifold: f64,
    pub p_fiber_bundle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTestResult {
    pub point_index: usize,
    pub label: Option<String>,
    pub manifold: Option<SplitOutcome>,
    pub fiber_bundle: Option<SplitOutcome>,
    pub p_manifold_adjusted: Option<f64>,
    pub p_fb_adjusted: Option<f64>,
    /// Median slope over the regime's volume range.
    pub dimension: Option<f64>,
    pub dropped_zero_distances: usize,
    pub short_profile: bool,
}

impl TokenTestResult {
    pub fn p_manifold_raw(&self) -> Option<f64> {
        self.manifold.map(|s| s.p_raw)
    }

    pub fn p_fb_raw(&self) -> Option<f64> {
        self.fiber_bundle.map(|s| s.p_raw)
    }

    pub fn rejects_manifold(&self, alpha: f64) -> bool {
        self.p_manifold_adjusted.is_some_and(|p| p < alpha)
    }

    pub fn rejects_fiber_bundle(&self, alpha: f64) -> bool {
        self.p_fb_adjusted.is_some_and(|p| p < alpha)
    }

    fn short(point_index: usize, label: Option<String>, dropped: usize, dimension: Option<f64>) -> Self {
        Self {
            point_index,
            label,
            manifold: None,
            fiber_bundle: None,
            p_manifold_adjusted: None,
            p_fb_adjusted: None,
            dimension,
            dropped_zero_distances: dropped,
            short_profile: true,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn scan(series: &SlopeSeries, window: usize, alternative: Alternative) -> Result<Option<SplitOutcome>> {
    let slopes = series.slopes();
    let m = slopes.len();
    if window < 2 || m < 2 * window {
        return Ok(None);
    }
    let mut best: Option<SplitOutcome> = None;
    for i in window..=m - window {
        let before = &slopes[i - window..i];
        let after = &slopes[i..i + window];
        let p = welch_t_test(after, before, alternative)?.p_value;
        if best.is_none_or(|b| p < b.p_raw) {
            let entry = series.entries[i];
            best = Some(SplitOutcome {
                p_raw: p,
                split_volume: entry.volume,
                transition_radius: entry.radius,
                mean_before: mean(before),
                mean_after: mean(after),
            });
        }
    }
    Ok(best)
}

/// Two-sided test that the slope is constant; minimum p over all splits with
/// `window` entries on each side. `None` when the series is too short.
pub fn manifold_test(series: &SlopeSeries, window: usize) -> Result<Option<SplitOutcome>> {
    scan(series, window, Alternative::TwoSided)
}

/// One-sided test against the slope increasing with radius (H1: the later
/// window's mean exceeds the earlier one's). `None` when the series is too short.
pub fn fiber_bundle_test(series: &SlopeSeries, window: usize) -> Result<Option<SplitOutcome>> {
    scan(series, window, Alternative::Greater)
}

/// Both p-values at every split position.
pub fn split_p_values(series: &SlopeSeries, window: usize) -> Result<Vec<SplitP>> {
    let slopes = series.slopes();
    let m = slopes.len();
    if window < 2 || m < 2 * window {
        return Ok(Vec::new());
    }
    (window..=m - window)
        .map(|i| {
            let before = &slopes[i - window..i];
            let after = &slopes[i..i + window];
            Ok(SplitP {
                split_volume: series.entries[i].volume,
                p_manifold: welch_t_test(after, before, Alternative::TwoSided)?.p_value,
                p_fiber_bundle: welch_t_test(after, before, Alternative::Greater)?.p_value,
            })
        })
        .collect()
}

/// Runs both tests on one profile. Adjusted p-values are filled in later.
pub fn test_profile(profile: &NeighborProfile, window: usize, label: Option<String>) -> Result<TokenTestResult> {
    let idx = profile.point_index;
    let dropped = profile.dropped_zero_distances;
    if profile.short {
        log::warn!("point {idx}: too few distinct neighbors to reach volume {}", profile.v_max + 1);
        return Ok(TokenTestResult::short(idx, label, dropped, None));
    }
    let series = match loglog_slopes(profile) {
        Ok(s) => s,
        Err(Error::InsufficientData(msg)) => {
            log::warn!("{msg}");
            return Ok(TokenTestResult::short(idx, label, dropped, None));
        }
        Err(e) => return Err(e),
    };
    let dimension = series.median_slope();
    let manifold = manifold_test(&series, window)?;
    let fiber_bundle = fiber_bundle_test(&series, window)?;
    if manifold.is_none() || fiber_bundle.is_none() {
        log::warn!(
            "point {idx}: {} slope entries after tie-merging, fewer than 2 * window = {}",
            series.entries.len(),
            2 * window
        );
        return Ok(TokenTestResult::short(idx, label, dropped, dimension));
    }
    Ok(TokenTestResult {
        point_index: idx,
        label,
        manifold,
        fiber_bundle,
        p_manifold_adjusted: None,
        p_fb_adjusted: None,
        dimension,
        dropped_zero_distances: dropped,
        short_profile: false,
    })
}

/// Applies Holm-Bonferroni separately to the manifold and fiber-bundle p-values
/// of all non-short results.
pub fn apply_correction(results: &mut [TokenTestResult]) -> Result<()> {
    let tested: Vec<usize> = (0..results.len()).filter(|&i| !results[i].short_profile).collect();
    let pm: Vec<f64> = tested.iter().map(|&i| results[i].p_manifold_raw().unwrap()).collect();
    let pf: Vec<f64> = tested.iter().map(|&i| results[i].p_fb_raw().unwrap()).collect();
    let am = holm_bonferroni(&pm)?;
    let af = holm_bonferroni(&pf)?;
    for (k, &i) in tested.iter().enumerate() {
        results[i].p_manifold_adjusted = Some(am[k]);
        results[i].p_fb_adjusted = Some(af[k]);
    }
    Ok(())
}

/// Tests every profile in parallel and applies the correction.
pub fn test_profiles(
    profiles: &[NeighborProfile],
    labels: Option<&[String]>,
    window: usize,
) -> Result<Vec<TokenTestResult>> {
    let mut results = profiles
        .par_iter()
        .map(|p| test_profile(p, window, labels.map(|l| l[p.point_index].clone())))
        .collect::<Result<Vec<_>>>()?;
    apply_correction(&mut results)?;
    Ok(results)
}

/// The full pipeline for one regime: neighbor radii, slopes, both tests at
/// every point, Holm-Bonferroni correction and a summary.
pub fn run_study(cloud: &PointCloud, config: &TestConfig) -> Result<(Vec<TokenTestResult>, StudySummary)> {
    config.validate_for(cloud.n())?;
    let profiles = neighbor_radii_with(cloud, &config.neighbor_config())?;
    let coincident = profiles.iter().filter(|p| p.dropped_zero_distances > 0).count();
    if coincident > 0 {
        log::warn!("{coincident} points have coincident neighbors at distance 0; excluded from volumes");
    }
    let results = test_profiles(&profiles, cloud.labels(), config.window)?;
    let summary = summarize_regime(cloud.source(), cloud.n(), config, &results)?;
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::SlopeEntry;

    fn series(slopes: &[f64]) -> SlopeSeries {
        SlopeSeries {
            point_index: 0,
            entries: slopes
                .iter()
                .enumerate()
                .map(|(i, &s)| SlopeEntry {
                    volume: i + 2,
                    radius: (i + 2) as f64,
                    log_radius: ((i + 2) as f64).ln(),
                    slope: s,
                })
                .collect(),
        }
    }

    fn step(first: f64, second: f64) -> SlopeSeries {
        let jitter = |i: usize| 1e-3 * ((i * 7919) % 13) as f64 / 13.0;
        let v: Vec<f64> = (0..40).map(|i| if i < 20 { first } else { second } + jitter(i)).collect();
        series(&v)
    }

    #[test]
    fn constant_slopes_never_reject() {
        let s = series(&[2.0; 40]);
        let m = manifold_test(&s, 10).unwrap().unwrap();
        assert_eq!(m.p_raw, 1.0);
        let f = fiber_bundle_test(&s, 10).unwrap().unwrap();
        assert_eq!(f.p_raw, 0.5);
    }

    #[test]
    fn decreasing_step_is_a_manifold_rejection_only() {
        let s = step(3.0, 1.0);
        let m = manifold_test(&s, 10).unwrap().unwrap();
        assert!(m.p_raw < 1e-6);
        assert_eq!(m.split_volume, 22);
        // At the step itself the one-sided p is essentially 1; elsewhere the
        // minimum over splits only sees jitter and stays far from significance.
        let at_step = split_p_values(&s, 10).unwrap().into_iter().find(|sp| sp.split_volume == 22).unwrap();
        assert!(at_step.p_fiber_bundle > 1.0 - 1e-9, "{at_step:?}");
        let f = fiber_bundle_test(&s, 10).unwrap().unwrap();
        assert!(f.p_raw > 1e-3, "{}", f.p_raw);
    }

    #[test]
    fn increasing_step_rejects_both() {
        let s = step(1.0, 3.0);
        let f = fiber_bundle_test(&s, 10).unwrap().unwrap();
        assert!(f.p_raw < 1e-6);
        assert_eq!(f.split_volume, 22);
        assert!(f.mean_after > f.mean_before);
        assert_eq!(f.transition_radius, 22.0);
    }

    #[test]
    fn short_series_yields_none() {
        assert!(manifold_test(&series(&[1.0; 19]), 10).unwrap().is_none());
        assert!(manifold_test(&series(&[1.0; 20]), 10).unwrap().is_some());
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig::small().validate().is_ok());
        assert!(TestConfig::large().validate().is_ok());
        let mut c = TestConfig::small();
        c.window = 1;
        assert!(c.validate().is_err());
        let mut c = TestConfig::small();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let c = TestConfig::new(8, 38, 16, 1e-3, Regime::SmallRadius);
        assert!(c.validate().is_err());
        let c = TestConfig::new(8, 39, 16, 1e-3, Regime::SmallRadius);
        assert!(c.validate().is_ok());
        assert!(TestConfig::small().validate_for(257).is_err());
        assert!(TestConfig::small().validate_for(258).is_ok());
    }
}
