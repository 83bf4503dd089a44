//! Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-8 are gates;
//! criterion 9 needs a GPT2 embedding matrix (FIBERCHECK_GPT2_NPY) and is
//! reported but never gates.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use fibercheck_core::synthetic::*;
use fibercheck_core::*;
use rand::Rng;

const ALPHA: f64 = 1e-3;
/// Seed from the documented CLI example, fixed before any calibration.
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn min_p(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(1.0, f64::min)
}

fn sphere_control() -> Outcome {
    let start = Instant::now();
    let cloud = gen_sphere(1200, SEED).unwrap();
    let (_, s) = run_study(&cloud, &TestConfig::small()).unwrap();
    let elapsed = start.elapsed();
    let fb = s.fb_small.as_ref().unwrap().fiber_bundle;
    outcome(
        s.manifold.reject_count == 0 && fb.reject_count == 0 && elapsed < Duration::from_secs(60),
        format!(
            "manifold rejects {}, fiber-bundle rejects {}, min adjusted p {:.2e}/{:.2e}, {:.2?}",
            s.manifold.reject_count,
            fb.reject_count,
            s.manifold.min_adjusted_p.unwrap(),
            fb.min_adjusted_p.unwrap(),
            elapsed
        ),
    )
}

fn cusp_detection() -> Outcome {
    let cloud = gen_cusp(1200, SEED).unwrap();
    let (res, _) = run_study(&cloud, &TestConfig::small()).unwrap();
    let origin = [0.0; 3];
    let near: Vec<&TokenTestResult> = res.iter().filter(|r| dist3(cloud.row(r.point_index), &origin) < 0.1).collect();
    let hits = near.iter().filter(|r| r.p_manifold_adjusted.is_some_and(|p| p < 1e-5)).count();
    let best = min_p(near.iter().filter_map(|r| r.p_manifold_adjusted));
    let fb = res.iter().filter(|r| r.rejects_fiber_bundle(ALPHA)).count();
    // Rim: the boundary circle x^2 + y^2 = 1, taken as radius >= 0.95 in the plane.
    let rim = res
        .iter()
        .filter(|r| {
            let x = cloud.row(r.point_index);
            x[0] * x[0] + x[1] * x[1] >= 0.95 * 0.95
        })
        .filter(|r| r.rejects_manifold(ALPHA))
        .count();
    outcome(
        hits >= 1 && fb == 0 && rim == 0,
        format!(
            "{} points within 0.1 of the cusp, {hits} with adjusted p < 1e-5 (best {best:.2e}); fiber-bundle rejects {fb}; rim manifold rejects {rim}",
            near.len()
        ),
    )
}

fn lollipop_discrimination() -> Outcome {
    let stick = DEFAULT_STICK_LENGTH;
    let cloud = gen_lollipop(3000, SEED, DEFAULT_CANDY_FRACTION, stick).unwrap();
    let (res, _) = run_study(&cloud, &TestConfig::small()).unwrap();
    let (junction, end) = lollipop_singularities(stick);
    let near = |r: &&TokenTestResult, c: &[f64; 3]| dist3(cloud.row(r.point_index), c) <= 0.15;
    let manifold: Vec<&TokenTestResult> = res.iter().filter(|r| r.rejects_manifold(ALPHA)).collect();
    let stray = manifold.iter().filter(|r| !near(r, &junction) && !near(r, &end)).count();
    let fb_junction = res.iter().filter(|r| r.rejects_fiber_bundle(ALPHA)).filter(|r| near(r, &junction)).count();
    let fb_end = res.iter().filter(|r| r.p_fb_adjusted.is_some_and(|p| p < 1e-5)).filter(|r| near(r, &end)).count();
    outcome(
        !manifold.is_empty() && stray == 0 && fb_junction >= 1 && fb_end == 0,
        format!(
            "manifold rejects {} ({stray} away from both singular loci); fiber-bundle rejects near junction {fb_junction}, near stick end at p<1e-5 {fb_end}",
            manifold.len()
        ),
    )
}

fn strip_two_regimes() -> Outcome {
    let cloud = gen_strip(5000, SEED, 10.0, 0.05).unwrap();
    let interior: Vec<usize> = (0..cloud.n()).filter(|&i| (1.0..=9.0).contains(&cloud.row(i)[0])).collect();
    let median = |v_min, v_max| {
        let profiles = neighbor_radii(&cloud, v_min, v_max).unwrap();
        let series: Vec<SlopeSeries> = interior.iter().map(|&i| loglog_slopes(&profiles[i]).unwrap()).collect();
        dimension_quartiles(series.iter()).unwrap().q2
    };
    // Small balls stay well inside the strip's width, large ones span it.
    let small = median(2, 16);
    let large = median(256, 2048);
    outcome(
        (1.7..=2.3).contains(&small) && (0.8..=1.3).contains(&large),
        format!("{} interior points: small-radius median {small:.3}, large-radius median {large:.3}", interior.len()),
    )
}

fn power_law_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut all_p_one = true;
    for d in [1.0, 2.0, 3.0, 5.0, 10.0] {
        let profile = gen_power_law_oracle(8, 256, d).unwrap();
        let s = loglog_slopes(&profile).unwrap();
        for e in &s.entries {
            worst = worst.max((e.slope - d).abs());
        }
        all_p_one &= manifold_test(&s, 16).unwrap().is_some_and(|m| m.p_raw == 1.0);
    }
    outcome(
        worst < 1e-9 && all_p_one,
        format!("max |slope - d| = {worst:.1e}, manifold p = 1 on all profiles: {all_p_one}"),
    )
}

fn table3() -> Outcome {
    let rows = [
        (768, 389, 1024, 1038, false),
        (768, 14, 1024, 38, true),
        (4096, 4096, 4096, 8193, false),
        (4096, 11, 4096, 23, true),
        (4096, 48, 4096, 97, true),
        (4096, 6, 4096, 13, true),
        (4096, 108, 4096, 217, true),
        (4096, 5, 4096, 11, true),
    ];
    let start = Instant::now();
    let got: Vec<(u64, bool)> = rows
        .iter()
        .map(|&(l, d, w, _, _)| {
            let c = theorem2_check(l, d, w).unwrap();
            (c.m_min, c.satisfied)
        })
        .collect();
    let elapsed = start.elapsed();
    let want: Vec<(u64, bool)> = rows.iter().map(|r| (r.3, r.4)).collect();
    outcome(got == want && elapsed < Duration::from_millis(1), format!("{got:?} in {elapsed:.2?}"))
}

fn stats_kernel() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Welch {
        a: Vec<f64>,
        b: Vec<f64>,
        p_two_sided: f64,
    }
    #[derive(serde::Deserialize)]
    struct Oracle {
        welch: Vec<Welch>,
    }
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/stats_oracle.json");
    let oracle: Oracle = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let worst = oracle
        .welch
        .iter()
        .map(|c| (welch_t_test(&c.a, &c.b, Alternative::TwoSided).unwrap().p_value - c.p_two_sided).abs())
        .fold(0.0, f64::max);

    // Ten vectors with step-down values worked out by hand.
    let holm_cases: [(&[f64], &[f64]); 10] = [
        (&[0.01, 0.04, 0.03, 0.005], &[3.0 * 0.01, 2.0 * 0.03, 2.0 * 0.03, 4.0 * 0.005]),
        (&[0.5], &[0.5]),
        (&[0.001, 0.001, 0.001], &[3.0 * 0.001, 3.0 * 0.001, 3.0 * 0.001]),
        (&[0.2, 0.1, 0.05, 0.04, 0.01], &[2.0 * 0.1, 2.0 * 0.1, 4.0 * 0.04, 4.0 * 0.04, 5.0 * 0.01]),
        (&[1.0, 0.0, 0.5], &[1.0, 0.0, 1.0]),
        (
            &[0.03, 0.02, 0.01, 0.04, 0.05, 0.06],
            &[3.0 * 0.04, 5.0 * 0.02, 6.0 * 0.01, 3.0 * 0.04, 3.0 * 0.04, 3.0 * 0.04],
        ),
        (&[0.9, 0.8, 0.7], &[1.0, 1.0, 1.0]),
        (
            &[0.0001, 0.5, 0.0002, 0.02, 0.3, 0.0003, 0.01],
            &[7.0 * 0.0001, 2.0 * 0.3, 6.0 * 0.0002, 3.0 * 0.02, 2.0 * 0.3, 5.0 * 0.0003, 4.0 * 0.01],
        ),
        (&[0.25, 0.25], &[2.0 * 0.25, 2.0 * 0.25]),
        (&[0.011, 0.012, 0.013, 0.014, 0.015, 0.016, 0.017, 0.018, 0.019, 0.02], &[10.0 * 0.011; 10]),
    ];
    let holm_ok = holm_cases.iter().all(|(p, want)| holm_bonferroni(p).unwrap() == *want);
    let cdf = student_t_cdf(2.0, 10.0).unwrap();
    outcome(
        oracle.welch.len() == 50 && worst < 1e-10 && holm_ok && (cdf - 0.963306).abs() < 1e-6,
        format!(
            "max Welch |dp| = {worst:.1e} over {} pairs; Holm exact: {holm_ok}; t_cdf(2, 10) = {cdf:.7}",
            oracle.welch.len()
        ),
    )
}

fn determinism_and_invariance() -> Outcome {
    let cfg = TestConfig::new(4, 60, 8, ALPHA, Regime::SmallRadius);
    let cloud = gen_sphere(800, SEED).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in [1, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (res, _) = pool.install(|| run_study(&cloud, &cfg).unwrap());
        let path = dir.path().join(format!("t{threads}.csv"));
        export_results(&res, &path, ExportFormat::Csv).unwrap();
        files.push(std::fs::read(path).unwrap());
    }
    let threads_ok = files[0] == files[1];

    let base = run_study(&cloud, &cfg).unwrap().0;
    let moved = run_study(&rigid_motion(&cloud, 3), &cfg).unwrap().0;
    let p = |r: &TokenTestResult| {
        [r.p_manifold_raw(), r.p_fb_raw(), r.p_manifold_adjusted, r.p_fb_adjusted].map(Option::unwrap)
    };
    let rigid = base
        .iter()
        .zip(&moved)
        .flat_map(|(a, b)| p(a).into_iter().zip(p(b)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);

    let scaled = cloud.map_rows(|x| x.iter().map(|v| v * 37.25).collect()).unwrap();
    let pa = neighbor_radii(&cloud, 4, 60).unwrap();
    let pb = neighbor_radii(&scaled, 4, 60).unwrap();
    let mut scale: f64 = 0.0;
    for (a, b) in pa.iter().zip(&pb) {
        let (sa, sb) = (loglog_slopes(a).unwrap(), loglog_slopes(b).unwrap());
        for (x, y) in sa.entries.iter().zip(&sb.entries) {
            scale = scale.max((x.slope - y.slope).abs() / x.slope.abs().max(1.0));
        }
    }

    let mut r = rng(2024);
    let mut blocked_ok = true;
    for c in 0..50 {
        let n = r.gen_range(2..=200);
        let dim = r.gen_range(1..=32);
        let cl = random_cloud(1000 + c, n, dim);
        let block = pairwise_distance_block(&cl, 0..n, 0..n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = naive_distance(cl.row(i), cl.row(j));
                blocked_ok &= (block.get(i, j) - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE);
            }
        }
        if n >= 8 {
            let v_max = (n - 3).min(50);
            let profiles =
                neighbor_radii_with(&cl, &NeighborConfig { block_size: 13, ..NeighborConfig::new(2, v_max) }).unwrap();
            for p in &profiles {
                let want = brute_profile(&cl, p.point_index, 2, v_max).unwrap();
                blocked_ok &= p.radii.len() == want.len()
                    && p.radii
                        .iter()
                        .zip(&want)
                        .all(|(g, w)| g.volume == w.volume && (g.radius - w.radius).abs() <= 1e-12 * w.radius);
            }
        }
    }
    outcome(
        threads_ok && rigid < 1e-9 && scale < 1e-9 && blocked_ok,
        format!(
            "threads 1 vs 8 byte-identical: {threads_ok}; rigid-motion max |dp| {rigid:.1e}; scale max relative dslope {scale:.1e}; blocked = brute force on 50 clouds: {blocked_ok}"
        ),
    )
}

/// At-scale GPT2 check; `None` when the embedding matrix is not available.
fn gpt2_at_scale() -> Option<Outcome> {
    let path = std::env::var_os("FIBERCHECK_GPT2_NPY")?;
    let start = Instant::now();
    let cloud = match load_npy(&path) {
        Ok(c) => c,
        Err(e) => return Some(outcome(false, format!("could not load {path:?}: {e}"))),
    };
    let (small_cfg, large_cfg) = (TestConfig::small(), TestConfig::large());
    let (small, _) = run_study(&cloud, &small_cfg).unwrap();
    let (large, _) = run_study(&cloud, &large_cfg).unwrap();
    let s = summarize("GPT2", (&small_cfg, &small), (&large_cfg, &large), ALPHA).unwrap();
    let elapsed = start.elapsed();
    let within = |got: usize, want: f64| (got as f64 - want).abs() <= 0.2 * want;
    let fs = s.fb_small.as_ref().unwrap();
    let fl = s.fb_large.as_ref().unwrap();
    let q = fl.quartiles.unwrap_or(Quartiles { q1: f64::NAN, q2: f64::NAN, q3: f64::NAN });
    let q_ok = [(q.q1, 8.0), (q.q2, 14.0), (q.q3, 32.0)].iter().all(|(g, w)| (g - w).abs() <= 4.0);
    Some(outcome(
        cloud.n() == 50257
            && elapsed < Duration::from_secs(8 * 3600)
            && within(s.manifold.reject_count, 66.0)
            && within(fs.fiber_bundle.reject_count, 12.0)
            && within(fl.fiber_bundle.reject_count, 7.0)
            && q_ok,
        format!(
            "n {}, rejects ({}, {}, {}), large quartiles ({:.1}, {:.1}, {:.1}), {:.0?}",
            cloud.n(),
            s.manifold.reject_count,
            fs.fiber_bundle.reject_count,
            fl.fiber_bundle.reject_count,
            q.q1,
            q.q2,
            q.q3,
            elapsed
        ),
    ))
}

type Gate = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let gates: [Gate; 8] = [
        (1, "sphere control", sphere_control),
        (2, "cusp detection", cusp_detection),
        (3, "lollipop discrimination", lollipop_discrimination),
        (4, "strip two-regime slopes", strip_two_regimes),
        (5, "power-law oracle", power_law_oracle),
        (6, "persistence table", table3),
        (7, "statistics kernel", stats_kernel),
        (8, "determinism and invariance", determinism_and_invariance),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in gates {
        let o = check();
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    match gpt2_at_scale() {
        None => println!("SKIP criterion 9 (GPT2 at scale, not a gate): set FIBERCHECK_GPT2_NPY to run"),
        Some(o) => {
            println!("{} criterion 9 (GPT2 at scale, not a gate): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail)
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gates passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed gates {failed:?}");
        ExitCode::FAILURE
    }
}
