use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use fibercheck_core::report::{neighborhood_projection_with, RegimeSummary, RejectionStat};
use fibercheck_core::synthetic::{CuspSampling, SyntheticKind, SyntheticSpec};
use fibercheck_core::{
    export_results, load_csv, load_labels, load_npy, read_results, run_study, save_csv, save_npy, summarize,
    theorem2_check, write_neighborhood, Center, ExportFormat, PointCloud, Regime, ResultRow, StudySummary, TestConfig,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "fibercheck", version, about = "Local manifold / fiber-bundle tests for point clouds")]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "FIBERCHECK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the manifold and fiber-bundle tests on a point cloud.
    Test(TestArgs),
    /// Generate a synthetic point cloud.
    Synth(SynthArgs),
    /// Check whether singularities persist through a transformer (m_min and w >= m_min).
    Persist(PersistArgs),
    /// Combine small- and large-radius result files into one summary.
    Summarize(SummarizeArgs),
    /// Dump a PCA-3 projection of a point's neighborhood for plotting.
    Neighborhood(NeighborhoodArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Small,
    Large,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct InputArgs {
    /// Point cloud, .npy or .csv.
    #[arg(long)]
    input: PathBuf,
    /// One label per line, aligned with the rows of the input.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CSV input: zero-based column holding point labels.
    #[arg(long)]
    label_column: Option<usize>,
    /// CSV input: the first line is data, not a header.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "small")]
    regime: RegimeArg,
    /// Smallest volume (small regime when --regime both).
    #[arg(long)]
    vmin: Option<usize>,
    /// Largest volume (small regime when --regime both).
    #[arg(long)]
    vmax: Option<usize>,
    /// Large-regime smallest volume when --regime both.
    #[arg(long)]
    large_vmin: Option<usize>,
    /// Large-regime largest volume when --regime both.
    #[arg(long)]
    large_vmax: Option<usize>,
    /// Sliding window size W.
    #[arg(long, default_value_t = TestConfig::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = TestConfig::DEFAULT_ALPHA)]
    alpha: f64,
    /// Rows per distance block.
    #[arg(long)]
    block_size: Option<usize>,
    /// Results file. Defaults to a name built from the input and the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to the extension of --out, else csv.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Name shown in the summary. Defaults to the input file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Sphere,
    Cusp,
    Lollipop,
    Strip,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplingArg {
    Height,
    Disk,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// .npy or .csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "height")]
    sampling: SamplingArg,
    #[arg(long, default_value_t = fibercheck_core::synthetic::DEFAULT_CANDY_FRACTION)]
    candy_fraction: f64,
    #[arg(long, default_value_t = fibercheck_core::synthetic::DEFAULT_STICK_LENGTH)]
    stick_length: f64,
    #[arg(long, default_value_t = 10.0)]
    length: f64,
    #[arg(long, default_value_t = 0.05)]
    width: f64,
}

#[derive(Args)]
struct PersistArgs {
    /// Latent dimension.
    #[arg(long)]
    latent: u64,
    /// Bounding-manifold dimension.
    #[arg(long, conflicts_with = "from_summary", required_unless_present = "from_summary")]
    bounding: Option<u64>,
    /// Context window length.
    #[arg(long = "window-ctx")]
    window_ctx: u64,
    /// Take the bounding dimension from a study summary (median dimension, rounded up).
    #[arg(long)]
    from_summary: Option<PathBuf>,
    /// Which regime's median to use with --from-summary.
    #[arg(long, value_enum, default_value = "large")]
    regime: RegimeArg,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Small-radius results file written by `test`.
    #[arg(long)]
    small: PathBuf,
    /// Large-radius results file written by `test`.
    #[arg(long)]
    large: PathBuf,
    #[arg(long, default_value_t = TestConfig::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    name: Option<String>,
    /// Also write the summary as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NeighborhoodArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Results file from `test`, for the p-value column.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Center point: a row index, or a label with --by-label.
    #[arg(long)]
    center: String,
    /// Treat --center as a label rather than a row index.
    #[arg(long)]
    by_label: bool,
    /// Number of neighbors.
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Configuration and input fingerprint written next to every output.
#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    input: Option<InputFingerprint>,
    config: C,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct InputFingerprint {
    path: String,
    sha256: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for filesystem failures, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<fibercheck_core::Error>() {
            return if err.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Persist(a) => cmd_persist(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Neighborhood(a) => cmd_neighborhood(a),
    }
}

fn load_cloud(a: &InputArgs) -> Result<PointCloud> {
    let is_csv = a.input.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut cloud = if is_csv {
        load_csv(&a.input, !a.no_header, a.label_column)?
    } else {
        if a.label_column.is_some() {
            bail!("--label-column only applies to CSV input");
        }
        load_npy(&a.input)?
    };
    if let Some(path) = &a.labels {
        cloud = cloud.with_labels(load_labels(path)?)?;
    }
    log::info!("loaded {} points in R^{} from {}", cloud.n(), cloud.dim(), a.input.display());
    Ok(cloud)
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_provenance<C: Serialize>(
    primary: &Path,
    command: &str,
    input: Option<&Path>,
    config: C,
    outputs: &[&Path],
) -> Result<()> {
    let input = match input {
        Some(p) => Some(InputFingerprint { path: p.display().to_string(), sha256: sha256_file(p)? }),
        None => None,
    };
    let prov = Provenance {
        tool: "fibercheck",
        version: VERSION,
        command,
        input,
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(&sidecar(primary, ".provenance.json"), &prov)
}

fn regime_path(out: &Path, regime: Regime) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{regime}.{ext}"),
        None => format!("{stem}_{regime}"),
    };
    out.with_file_name(name)
}

fn default_out(input: &Path, cfg: &TestConfig, ext: &str) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
    PathBuf::from(format!("{stem}_{}_v{}-{}_W{}_a{:e}.{ext}", cfg.regime, cfg.v_min, cfg.v_max, cfg.window, cfg.alpha))
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let mk = |regime: Regime, vmin: Option<usize>, vmax: Option<usize>| {
        let base = match regime {
            Regime::SmallRadius => TestConfig::small(),
            Regime::LargeRadius => TestConfig::large(),
        };
        let mut cfg =
            TestConfig::new(vmin.unwrap_or(base.v_min), vmax.unwrap_or(base.v_max), a.window, a.alpha, regime);
        if let Some(b) = a.block_size {
            cfg.block_size = b;
        }
        cfg
    };
    let configs = match a.regime {
        RegimeArg::Small => vec![mk(Regime::SmallRadius, a.vmin, a.vmax)],
        RegimeArg::Large => vec![mk(Regime::LargeRadius, a.vmin, a.vmax)],
        RegimeArg::Both => {
            vec![mk(Regime::SmallRadius, a.vmin, a.vmax), mk(Regime::LargeRadius, a.large_vmin, a.large_vmax)]
        }
    };
    if a.regime != RegimeArg::Both && (a.large_vmin.is_some() || a.large_vmax.is_some()) {
        bail!("--large-vmin/--large-vmax only apply with --regime both");
    }
    for cfg in &configs {
        cfg.validate()?;
    }

    let cloud = load_cloud(&a.input)?;
    for cfg in &configs {
        cfg.validate_for(cloud.n())?;
    }
    let name = a.name.clone().unwrap_or_else(|| {
        a.input.input.file_stem().map_or_else(|| cloud.source().to_string(), |s| s.to_string_lossy().into_owned())
    });

    let format = match a.format {
        Some(FormatArg::Json) => ExportFormat::Json,
        Some(FormatArg::Csv) => ExportFormat::Csv,
        None => a.out.as_deref().map_or(ExportFormat::Csv, ExportFormat::from_path),
    };
    let ext = match format {
        ExportFormat::Csv => "csv",
        ExportFormat::Json => "json",
    };

    let mut runs = Vec::new();
    for cfg in &configs {
        log::info!("{} radius: v {}..{}, W {}, alpha {:e}", cfg.regime, cfg.v_min, cfg.v_max, cfg.window, cfg.alpha);
        let (results, mut summary) = run_study(&cloud, cfg)?;
        summary.model_name = name.clone();
        let out = match (&a.out, configs.len()) {
            (Some(o), 1) => o.clone(),
            (Some(o), _) => regime_path(o, cfg.regime),
            (None, _) => default_out(&a.input.input, cfg, ext),
        };
        export_results(&results, &out, format)?;
        let summary_path = sidecar(&out, ".summary.json");
        write_json(&summary_path, &summary)?;
        write_provenance(&out, "test", Some(&a.input.input), cfg, &[&out, &summary_path])?;
        log::info!("wrote {}", out.display());
        runs.push((*cfg, results, summary));
    }

    let summary = if let [(sc, sr, _), (lc, lr, _)] = runs.as_slice() {
        let s = summarize(&name, (sc, sr), (lc, lr), a.alpha)?;
        if let Some(o) = &a.out {
            let path = sidecar(o, ".summary.json");
            write_json(&path, &s)?;
            write_provenance(o, "test", Some(&a.input.input), &configs, &[&path])?;
        }
        s
    } else {
        runs.pop().map(|r| r.2).ok_or_else(|| anyhow!("no regime ran"))?
    };
    print!("{summary}");
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let kind = match a.kind {
        KindArg::Sphere => SyntheticKind::Sphere,
        KindArg::Cusp => SyntheticKind::Cusp {
            sampling: match a.sampling {
                SamplingArg::Height => CuspSampling::HeightUniform,
                SamplingArg::Disk => CuspSampling::DiskUniform,
            },
        },
        KindArg::Lollipop => SyntheticKind::Lollipop { candy_fraction: a.candy_fraction, stick_length: a.stick_length },
        KindArg::Strip => SyntheticKind::Strip { length: a.length, width: a.width },
    };
    let spec = SyntheticSpec::new(kind, a.n, a.seed);
    let cloud = spec.generate()?;
    if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        save_csv(&cloud, &a.out)?;
    } else {
        save_npy(&cloud, &a.out)?;
    }
    let spec_path = sidecar(&a.out, ".json");
    write_json(&spec_path, &spec)?;
    write_provenance(&a.out, "synth", None, spec, &[&a.out, &spec_path])?;
    log::info!("wrote {} points to {}", cloud.n(), a.out.display());
    Ok(())
}

fn read_summary(path: &Path) -> Result<StudySummary> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing summary {}", path.display()))
}

fn cmd_persist(a: PersistArgs) -> Result<()> {
    let d = match (a.bounding, &a.from_summary) {
        (Some(d), _) => d,
        (None, Some(path)) => {
            let s = read_summary(path)?;
            let regime = match a.regime {
                RegimeArg::Small => s.fb_small.as_ref(),
                RegimeArg::Large => s.fb_large.as_ref(),
                RegimeArg::Both => bail!("--regime must be small or large with --from-summary"),
            };
            let q2 = regime
                .and_then(|r| r.quartiles)
                .ok_or_else(|| anyhow!("{} has no median dimension for that regime", path.display()))?
                .q2;
            if !(q2.is_finite() && q2 >= 0.0) {
                bail!("median dimension {q2} is not a usable bounding dimension");
            }
            let d = q2.ceil() as u64;
            log::info!("bounding dimension {d} from median {q2:.3}");
            d
        }
        (None, None) => bail!("give --bounding or --from-summary"),
    };
    let check = theorem2_check(a.latent, d, a.window_ctx)?;
    println!("m_min={}, satisfied={}", check.m_min, if check.satisfied { "yes" } else { "no" });
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    Ok(read_results(path, ExportFormat::from_path(path))?)
}

/// Recounts a regime at `alpha` from its rows, keeping the configuration and
/// dimension quartiles recorded by the run.
fn recount(rows: &[ResultRow], recorded: Option<&RegimeSummary>, regime: Regime, alpha: f64) -> Result<RegimeSummary> {
    let tested: Vec<&ResultRow> = rows.iter().filter(|r| !r.short_profile).collect();
    let stat = |ps: Vec<f64>| RejectionStat {
        reject_count: ps.iter().filter(|&&p| p < alpha).count(),
        min_adjusted_p: ps.iter().copied().reduce(f64::min),
    };
    let (config, quartiles) = match recorded {
        Some(r) => (r.config, r.quartiles),
        None => {
            let base = match regime {
                Regime::SmallRadius => TestConfig::small(),
                Regime::LargeRadius => TestConfig::large(),
            };
            (base, None)
        }
    };
    Ok(RegimeSummary {
        config: TestConfig { alpha, ..config },
        tested: tested.len(),
        short: rows.len() - tested.len(),
        manifold: stat(tested.iter().filter_map(|r| r.p_manifold_adj).collect()),
        fiber_bundle: stat(tested.iter().filter_map(|r| r.p_fb_adj).collect()),
        quartiles,
    })
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        bail!("alpha must lie in (0, 1), got {}", a.alpha);
    }
    let small = read_rows(&a.small)?;
    let large = read_rows(&a.large)?;
    let ids = |rows: &[ResultRow]| rows.iter().map(|r| r.point_index).collect::<BTreeSet<_>>();
    if small.len() != large.len() || ids(&small) != ids(&large) {
        bail!("small- and large-radius results cover different point sets");
    }
    let recorded = |p: &Path, pick: fn(StudySummary) -> Option<RegimeSummary>| {
        let s = sidecar(p, ".summary.json");
        if s.exists() {
            read_summary(&s).map(pick)
        } else {
            log::warn!("{} not found; quartiles unavailable", s.display());
            Ok(None)
        }
    };
    let small_rec = recorded(&a.small, |s| s.fb_small)?;
    let large_rec = recorded(&a.large, |s| s.fb_large)?;

    let mut by_point: Vec<(usize, Option<f64>)> = small.iter().map(|r| (r.point_index, r.p_manifold_adj)).collect();
    let mut large_p: Vec<(usize, Option<f64>)> = large.iter().map(|r| (r.point_index, r.p_manifold_adj)).collect();
    by_point.sort_by_key(|t| t.0);
    large_p.sort_by_key(|t| t.0);
    let mut reject_count = 0;
    let mut min_p: Option<f64> = None;
    for ((_, ps), (_, pl)) in by_point.iter().zip(&large_p) {
        if ps.is_some_and(|p| p < a.alpha) || pl.is_some_and(|p| p < a.alpha) {
            reject_count += 1;
        }
        for p in ps.iter().chain(pl.iter()) {
            min_p = Some(min_p.map_or(*p, |m| m.min(*p)));
        }
    }

    let name = a.name.clone().unwrap_or_else(|| a.small.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let summary = StudySummary {
        model_name: name,
        n: small.len(),
        alpha: a.alpha,
        manifold: RejectionStat { reject_count, min_adjusted_p: min_p },
        fb_small: Some(recount(&small, small_rec.as_ref(), Regime::SmallRadius, a.alpha)?),
        fb_large: Some(recount(&large, large_rec.as_ref(), Regime::LargeRadius, a.alpha)?),
    };
    if let Some(out) = &a.out {
        write_json(out, &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn cmd_neighborhood(a: NeighborhoodArgs) -> Result<()> {
    let cloud = load_cloud(&a.input)?;
    let center = if a.by_label {
        Center::Label(a.center.clone())
    } else {
        Center::Index(
            a.center
                .parse()
                .with_context(|| format!("--center {:?} is not a row index (use --by-label for labels)", a.center))?,
        )
    };
    let p_adj: Vec<Option<f64>> = match &a.results {
        Some(path) => {
            let mut p = vec![None; cloud.n()];
            for r in read_rows(path)? {
                if r.point_index >= cloud.n() {
                    bail!("results file refers to point {} but the cloud has {} points", r.point_index, cloud.n());
                }
                p[r.point_index] = r.p_manifold_adj;
            }
            p
        }
        None => vec![None; cloud.n()],
    };
    let points = neighborhood_projection_with(&cloud, |i| p_adj[i], &center, a.k)?;
    write_neighborhood(&points, &a.out)?;
    write_provenance(
        &a.out,
        "neighborhood",
        Some(&a.input.input),
        serde_json::json!({ "center": a.center, "by_label": a.by_label, "k": a.k }),
        &[&a.out],
    )?;
    log::info!("wrote {} points to {}", points.len(), a.out.display());
    Ok(())
}
