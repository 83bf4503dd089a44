//! Study summaries, result exports and neighborhood dumps for plotting.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dimension::{quartiles, Quartiles};
use crate::engine::{Regime, TestConfig, TokenTestResult};
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::pca::top_components;
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionStat {
    pub reject_count: usize,
    /// `None` when no point was tested.
    pub min_adjusted_p: Option<f64>,
}

impl RejectionStat {
    fn from_adjusted(adjusted: impl Iterator<Item = f64>, alpha: f64) -> Self {
        let mut count = 0;
        let mut min: Option<f64> = None;
        for p in adjusted {
            if p < alpha {
                count += 1;
            }
            min = Some(min.map_or(p, |m| m.min(p)));
        }
        Self { reject_count: count, min_adjusted_p: min }
    }
}

/// One regime's worth of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub config: TestConfig,
    pub tested: usize,
    pub short: usize,
    pub manifold: RejectionStat,
    pub fiber_bundle: RejectionStat,
    /// Quartiles of per-point median slopes over points that do not reject the
    /// manifold test in this regime.
    pub quartiles: Option<Quartiles>,
}

/// Table-shaped summary across one or two regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub model_name: String,
    pub n: usize,
    pub alpha: f64,
    /// A point rejects if its manifold test rejects in any regime.
    pub manifold: RejectionStat,
    pub fb_small: Option<RegimeSummary>,
    pub fb_large: Option<RegimeSummary>,
}

impl StudySummary {
    pub fn regimes(&self) -> impl Iterator<Item = &RegimeSummary> {
        self.fb_small.iter().chain(self.fb_large.iter())
    }
}

/// Summarizes one regime's corrected results.
pub fn regime_summary(config: &TestConfig, results: &[TokenTestResult]) -> Result<RegimeSummary> {
    let alpha = config.alpha;
    let tested: Vec<&TokenTestResult> = results.iter().filter(|r| !r.short_profile).collect();
    let dims: Vec<f64> = tested.iter().filter(|r| !r.rejects_manifold(alpha)).filter_map(|r| r.dimension).collect();
    Ok(RegimeSummary {
        config: *config,
        tested: tested.len(),
        short: results.len() - tested.len(),
        manifold: RejectionStat::from_adjusted(tested.iter().filter_map(|r| r.p_manifold_adjusted), alpha),
        fiber_bundle: RejectionStat::from_adjusted(tested.iter().filter_map(|r| r.p_fb_adjusted), alpha),
        quartiles: if dims.is_empty() { None } else { Some(quartiles(&dims)?) },
    })
}

pub(crate) fn summarize_regime(
    model_name: &str,
    n: usize,
    config: &TestConfig,
    results: &[TokenTestResult],
) -> Result<StudySummary> {
    let regime = regime_summary(config, results)?;
    let manifold = regime.manifold;
    let (fb_small, fb_large) = match config.regime {
        Regime::SmallRadius => (Some(regime), None),
        Regime::LargeRadius => (None, Some(regime)),
    };
    Ok(StudySummary { model_name: model_name.to_string(), n, alpha: config.alpha, manifold, fb_small, fb_large })
}

/// Combines a small-radius and a large-radius run on the same cloud.
pub fn summarize(
    model_name: &str,
    small: (&TestConfig, &[TokenTestResult]),
    large: (&TestConfig, &[TokenTestResult]),
    alpha: f64,
) -> Result<StudySummary> {
    let (small_cfg, small_res) = small;
    let (large_cfg, large_res) = large;
    let ids = |r: &[TokenTestResult]| r.iter().map(|t| t.point_index).collect::<BTreeSet<_>>();
    if small_res.len() != large_res.len() || ids(small_res) != ids(large_res) {
        return Err(Error::Validation("small- and large-radius results cover different point sets".into()));
    }
    let mut small_cfg = *small_cfg;
    let mut large_cfg = *large_cfg;
    small_cfg.alpha = alpha;
    large_cfg.alpha = alpha;

    let mut by_point: Vec<(usize, Option<f64>, bool)> =
        small_res.iter().map(|r| (r.point_index, r.p_manifold_adjusted, r.rejects_manifold(alpha))).collect();
    by_point.sort_by_key(|t| t.0);
    let mut large_sorted: Vec<&TokenTestResult> = large_res.iter().collect();
    large_sorted.sort_by_key(|r| r.point_index);

    let mut reject_count = 0;
    let mut min_p: Option<f64> = None;
    for ((_, p_small, rej_small), large) in by_point.iter().zip(large_sorted) {
        if *rej_small || large.rejects_manifold(alpha) {
            reject_count += 1;
        }
        for p in p_small.iter().chain(large.p_manifold_adjusted.iter()) {
            min_p = Some(min_p.map_or(*p, |m: f64| m.min(*p)));
        }
    }

    Ok(StudySummary {
        model_name: model_name.to_string(),
        n: small_res.len(),
        alpha,
        manifold: RejectionStat { reject_count, min_adjusted_p: min_p },
        fb_small: Some(regime_summary(&small_cfg, small_res)?),
        fb_large: Some(regime_summary(&large_cfg, large_res)?),
    })
}

impl std::fmt::Display for StudySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"));
        writeln!(f, "model: {}  n = {}  alpha = {:e}", self.model_name, self.n, self.alpha)?;
        writeln!(
            f,
            "manifold rejects: {}  (min adjusted p = {})",
            self.manifold.reject_count,
            p(self.manifold.min_adjusted_p)
        )?;
        for (name, r) in [("small", &self.fb_small), ("large", &self.fb_large)] {
            let Some(r) = r else { continue };
            write!(
                f,
                "{name} radius [v {}..{}, W {}]: fiber-bundle rejects {} (min adjusted p = {}), tested {}, short {}",
                r.config.v_min,
                r.config.v_max,
                r.config.window,
                r.fiber_bundle.reject_count,
                p(r.fiber_bundle.min_adjusted_p),
                r.tested,
                r.short
            )?;
            match r.quartiles {
                Some(q) => writeln!(f, ", dim Q1 {:.2} Q2 {:.2} Q3 {:.2}", q.q1, q.q2, q.q3)?,
                None => writeln!(f, ", dim n/a")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "point_index",
    "label",
    "p_manifold_raw",
    "p_manifold_adj",
    "p_fb_raw",
    "p_fb_adj",
    "transition_radius",
    "slope_pre",
    "slope_post",
    "short_profile",
];

/// Flat per-point record as written to disk. Split statistics come from the
/// manifold test's most significant split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub point_index: usize,
    pub label: Option<String>,
    pub p_manifold_raw: Option<f64>,
    pub p_manifold_adj: Option<f64>,
    pub p_fb_raw: Option<f64>,
    pub p_fb_adj: Option<f64>,
    pub transition_radius: Option<f64>,
    pub slope_pre: Option<f64>,
    pub slope_post: Option<f64>,
    pub short_profile: bool,
}

impl From<&TokenTestResult> for ResultRow {
    fn from(r: &TokenTestResult) -> Self {
        Self {
            point_index: r.point_index,
            label: r.label.clone(),
            p_manifold_raw: r.p_manifold_raw(),
            p_manifold_adj: r.p_manifold_adjusted,
            p_fb_raw: r.p_fb_raw(),
            p_fb_adj: r.p_fb_adjusted,
            transition_radius: r.manifold.map(|s| s.transition_radius),
            slope_pre: r.manifold.map(|s| s.mean_before),
            slope_post: r.manifold.map(|s| s.mean_after),
            short_profile: r.short_profile,
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.16e}"))
}

fn parse_opt(field: &str, row: usize, col: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|e| Error::Parse { row, col, msg: format!("{field:?}: {e}") })
}

pub fn export_results(results: &[TokenTestResult], path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    write_rows(&rows, path.as_ref(), format)
}

fn write_rows(rows: &[ResultRow], path: &Path, format: ExportFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        ExportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        ExportFormat::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            let wrap = |e: csv::Error| Error::Format(e.to_string());
            csv.write_record(RESULT_COLUMNS).map_err(wrap)?;
            for r in rows {
                csv.write_record([
                    r.point_index.to_string(),
                    r.label.clone().unwrap_or_default(),
                    fmt_opt(r.p_manifold_raw),
                    fmt_opt(r.p_manifold_adj),
                    fmt_opt(r.p_fb_raw),
                    fmt_opt(r.p_fb_adj),
                    fmt_opt(r.transition_radius),
                    fmt_opt(r.slope_pre),
                    fmt_opt(r.slope_post),
                    r.short_profile.to_string(),
                ])
                .map_err(wrap)?;
            }
            csv.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a results file written by [`export_results`].
pub fn read_results(path: impl AsRef<Path>, format: ExportFormat) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        ExportFormat::Json => {
            serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Format(e.to_string()))
        }
        ExportFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?;
            if header.iter().ne(RESULT_COLUMNS) {
                return Err(Error::Format(format!("unexpected result columns {header:?}")));
            }
            let mut rows = Vec::new();
            for (row, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
                let point_index = rec[0].parse().map_err(|e| Error::Parse { row, col: 0, msg: format!("{e}") })?;
                let short_profile = rec[9].parse().map_err(|e| Error::Parse { row, col: 9, msg: format!("{e}") })?;
                rows.push(ResultRow {
                    point_index,
                    label: (!rec[1].is_empty()).then(|| rec[1].to_string()),
                    p_manifold_raw: parse_opt(&rec[2], row, 2)?,
                    p_manifold_adj: parse_opt(&rec[3], row, 3)?,
                    p_fb_raw: parse_opt(&rec[4], row, 4)?,
                    p_fb_adj: parse_opt(&rec[5], row, 5)?,
                    transition_radius: parse_opt(&rec[6], row, 6)?,
                    slope_pre: parse_opt(&rec[7], row, 7)?,
                    slope_post: parse_opt(&rec[8], row, 8)?,
                    short_profile,
                });
            }
            Ok(rows)
        }
    }
}

/// Which point a neighborhood is centered on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Center {
    Index(usize),
    Label(String),
}

/// One plot-ready row of a neighborhood dump.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodPoint {
    pub point_index: usize,
    pub label: String,
    pub pcs: [f64; 3],
    pub p_manifold_adj: Option<f64>,
}

/// The center and its `k` nearest neighbors, projected onto the top three
/// principal components of that neighborhood.
pub fn neighborhood_projection(
    cloud: &PointCloud,
    results: &[TokenTestResult],
    center: &Center,
    k: usize,
) -> Result<Vec<NeighborhoodPoint>> {
    let p_adj: HashMap<usize, f64> =
        results.iter().filter_map(|r| r.p_manifold_adjusted.map(|p| (r.point_index, p))).collect();
    neighborhood_projection_with(cloud, |i| p_adj.get(&i).copied(), center, k)
}

/// Like [`neighborhood_projection`], with adjusted manifold p-values supplied
/// by a lookup from point index (e.g. from a results file read back from disk).
pub fn neighborhood_projection_with(
    cloud: &PointCloud,
    p_manifold_adj: impl Fn(usize) -> Option<f64>,
    center: &Center,
    k: usize,
) -> Result<Vec<NeighborhoodPoint>> {
    let n = cloud.n();
    let c = match center {
        Center::Index(i) if *i < n => *i,
        Center::Index(i) => return Err(Error::Parameter(format!("center index {i} out of range 0..{n}"))),
        Center::Label(l) => cloud.find_label(l)?,
    };
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("neighbor count k must satisfy 0 < k < n = {n}, got {k}")));
    }
    let origin = cloud.row(c);
    let mut others: Vec<(f64, usize)> =
        (0..n).filter(|&j| j != c).map(|j| (distance(origin, cloud.row(j)), j)).collect();
    others.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.truncate(k);
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let members: Vec<usize> = std::iter::once(c).chain(others.iter().map(|&(_, j)| j)).collect();
    let rows: Vec<&[f64]> = members.iter().map(|&i| cloud.row(i)).collect();
    let projected = top_components(&rows, 3);

    Ok(members
        .iter()
        .zip(projected)
        .map(|(&i, pcs)| NeighborhoodPoint {
            point_index: i,
            label: cloud.label(i).map_or_else(|| i.to_string(), str::to_string),
            pcs: [pcs[0], pcs[1], pcs[2]],
            p_manifold_adj: p_manifold_adj(i),
        })
        .collect())
}

/// Writes the neighborhood as `label,pc1,pc2,pc3,p_manifold_adj`.
pub fn export_neighborhood(
    cloud: &PointCloud,
    results: &[TokenTestResult],
    center: &Center,
    k: usize,
    path: impl AsRef<Path>,
) -> Result<Vec<NeighborhoodPoint>> {
    let points = neighborhood_projection(cloud, results, center, k)?;
    write_neighborhood(&points, path.as_ref())?;
    Ok(points)
}

/// Writes already-projected points as `label,pc1,pc2,pc3,p_manifold_adj`.
pub fn write_neighborhood(points: &[NeighborhoodPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| Error::Format(e.to_string());
    csv.write_record(["label", "pc1", "pc2", "pc3", "p_manifold_adj"]).map_err(wrap)?;
    for p in points {
        csv.write_record([
            p.label.clone(),
            format!("{:.16e}", p.pcs[0]),
            format!("{:.16e}", p.pcs[1]),
            format!("{:.16e}", p.pcs[2]),
            fmt_opt(p.p_manifold_adj),
        ])
        .map_err(wrap)?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}
