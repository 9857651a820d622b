//! `qcert`: simulate, certify and reproduce the figure data.
//!
//! Settings precedence: command-line flags, then `QCERT_SEED` (seed only),
//! then the JSON config given by `--config`, then the built-in calibrated
//! default.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcert_core::bases::ModeSpace;
use qcert_core::report::{certification_report, sha256_hex, Provenance};
use qcert_core::run::{expected_observations, simulate, sweep, violation_curve, write_sweep_csv, SweepParam};
use qcert_core::source::noisy_state;
use qcert_core::tomo::{reconstruct_exact, reconstruct_from_table};
use qcert_core::{CoincidenceTable, CountMode, Error, Observations, Result, RunConfig};
use serde::Serialize;

use manifest::{write_manifest, FileDigest, ManifestCore};

#[derive(Parser)]
#[command(name = "qcert", version, about = "High-dimensional entanglement certification toolkit")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Leave the creation time out of the manifest so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample coincidence counts for every configured setting.
    Simulate(SimulateArgs),
    /// Dimension witness, E_F bound and available CGLMP values from counts.
    Certify(CertifyArgs),
    /// CGLMP violation table over a range of dimensions.
    Bell(BellArgs),
    /// Two-qubit tomography of one mode pair.
    Tomo(TomoArgs),
    /// Witness, E_F and CGLMP on expected counts over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration (default: built-in calibrated configuration).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, env = "QCERT_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Count table to write; the metadata sidecar goes next to it.
    #[arg(long, default_value = "counts.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Count table written by `simulate` or converted from measured data.
    #[arg(long)]
    counts: PathBuf,

    #[arg(long, default_value = "X")]
    space: ModeSpace,

    #[arg(long)]
    subtract_accidentals: bool,

    /// Error bars required above each witness bound.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,

    /// Number of modes, when the table has no metadata sidecar.
    #[arg(long = "dim")]
    dim: Option<usize>,

    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BellArgs {
    /// Count table; without it the exact probabilities of the configured state are used.
    #[arg(long, conflicts_with = "config")]
    counts: Option<PathBuf>,

    #[command(flatten)]
    config: ConfigArgs,

    /// Inclusive range `a..b` (or `a..=b`), or a comma-separated list.
    #[arg(long, default_value = "2..10")]
    d_range: String,

    #[arg(long)]
    subtract_accidentals: bool,

    #[arg(long, default_value = "bell.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TomoArgs {
    /// Count table; without it the exact probabilities of the configured state are used.
    #[arg(long, conflicts_with = "config")]
    counts: Option<PathBuf>,

    #[command(flatten)]
    config: ConfigArgs,

    /// Mode pair `j,k`.
    #[arg(long)]
    pair: String,

    #[arg(long, default_value = "X")]
    space: ModeSpace,

    #[arg(long)]
    subtract_accidentals: bool,

    /// Poisson bootstrap replicas for the fidelity error (counts only).
    #[arg(long, default_value_t = 200)]
    resamples: usize,

    #[arg(long, default_value = "tomo.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// noise_fraction, P_bg_idler or eta_r.
    #[arg(long, default_value = "noise_fraction")]
    param: SweepParam,

    /// `start:stop:count` (inclusive, evenly spaced) or a comma-separated list.
    #[arg(long)]
    grid: String,

    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let timestamp = !cli.no_timestamp;
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, timestamp),
        Command::Certify(a) => cmd_certify(a, timestamp),
        Command::Bell(a) => cmd_bell(a, timestamp),
        Command::Tomo(a) => cmd_tomo(a, timestamp),
        Command::Sweep(a) => cmd_sweep(a, timestamp),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

/// Effective configuration and the bytes it was read from.
fn load_config(args: &ConfigArgs, manifest: &mut ManifestCore) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
            manifest.config_path = Some(path.display().to_string());
            manifest.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()) });
            RunConfig::from_json(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default_calibrated(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    manifest.seed = Some(cfg.seed);
    manifest.input_sha256 = sha256_hex(&serde_json::to_vec(&cfg)?);
    Ok(cfg)
}

fn load_counts(path: &Path, manifest: &mut ManifestCore) -> Result<CoincidenceTable> {
    let table = CoincidenceTable::load(path)?;
    let digest = FileDigest::of(path)?;
    manifest.input_sha256 = digest.sha256.clone();
    manifest.inputs.push(digest);
    let meta = qcert_core::counting::metadata_path(path);
    if meta.exists() {
        manifest.inputs.push(FileDigest::of(&meta)?);
    }
    manifest.seed = table.metadata().map(|m| m.seed);
    Ok(table)
}

fn count_mode(subtract: bool) -> CountMode {
    if subtract {
        CountMode::Subtracted
    } else {
        CountMode::Raw
    }
}

/// Writes `value` as pretty JSON with the manifest hash as its first field.
fn write_json<T: Serialize>(path: &Path, value: &T, manifest_sha256: &str) -> Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("manifest_sha256".into(), manifest_sha256.into());
    match serde_json::to_value(value)? {
        serde_json::Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&obj)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, timestamp: bool) -> Result<()> {
    let mut m = ManifestCore::new("simulate");
    let cfg = load_config(&a.config, &mut m)?;
    let mut table = simulate(&cfg)?;
    let hash = m.hash();
    let mut meta = table.metadata().cloned().expect("simulate attaches metadata");
    meta.extra.insert("manifest_sha256".into(), hash.into());
    table = table.with_metadata(meta);
    table.save(&a.out)?;
    let sidecar = qcert_core::counting::metadata_path(&a.out);
    write_manifest(&m, &[&a.out, &sidecar], &a.out, timestamp)?;
    println!("wrote {} records for {} settings to {}", table.len(), table.settings().len(), a.out.display());
    Ok(())
}

fn cmd_certify(a: CertifyArgs, timestamp: bool) -> Result<()> {
    let mut m = ManifestCore::new("certify")
        .option("space", a.space)
        .option("subtract_accidentals", a.subtract_accidentals)
        .option("margin", a.margin);
    let table = load_counts(&a.counts, &mut m)?;
    let d = match (a.dim, table.metadata()) {
        (Some(d), _) => d,
        (None, Some(meta)) => meta.d,
        (None, None) => {
            return Err(Error::MissingData(format!(
                "{} has no metadata sidecar; pass --dim",
                a.counts.display()
            )))
        }
    };
    m = m.option("D", d);
    let obs = Observations::from_table(&table, count_mode(a.subtract_accidentals))?;
    let prov = Provenance { input_sha256: Some(m.input_sha256.clone()), seed: m.seed };
    let report = certification_report(&obs, a.space, d, a.margin, prov)?;
    write_json(&a.out, &report, &m.hash())?;
    write_manifest(&m, &[&a.out], &a.out, timestamp)?;
    println!(
        "W_{} = {:.3} ± {:.3}, certified dimension {}",
        a.space, report.w, report.w_err, report.certified_dimension
    );
    Ok(())
}

fn parse_d_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("invalid --d-range {s:?}"));
    let dims: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        (lo..=hi).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(bad());
    }
    Ok(dims)
}

fn cmd_bell(a: BellArgs, timestamp: bool) -> Result<()> {
    let dims = parse_d_range(&a.d_range)?;
    let mut m = ManifestCore::new("bell").option("d_range", &a.d_range);
    let obs = match &a.counts {
        Some(path) => {
            m = m.option("subtract_accidentals", a.subtract_accidentals);
            let table = load_counts(path, &mut m)?;
            Observations::from_table(&table, count_mode(a.subtract_accidentals))?
        }
        None => {
            m = m.option("path", "exact");
            let mut cfg = load_config(&a.config, &mut m)?;
            if let Some(&bad) = dims.iter().find(|&&d| d > cfg.source.d()) {
                return Err(Error::InvalidArgument(format!("d = {bad} exceeds D = {}", cfg.source.d())));
            }
            cfg.spaces.clear();
            cfg.tomography_pairs.clear();
            cfg.bell_dimensions = dims.clone();
            expected_observations(&cfg, None)?
        }
    };
    let curve = violation_curve(&obs, &dims)?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&a.out).map_err(csv_err)?;
    out.write_record(["d", "S", "S_err", "violated"]).map_err(csv_err)?;
    for e in &curve {
        out.write_record([e.d.to_string(), e.s.to_string(), e.s_err.to_string(), e.violated.to_string()])
            .map_err(csv_err)?;
    }
    out.flush()?;
    drop(out);
    write_manifest(&m, &[&a.out], &a.out, timestamp)?;
    let up_to = curve.iter().take_while(|e| e.violated).last().map(|e| e.d);
    match up_to {
        Some(d) => println!("violation up to d = {d}"),
        None => println!("no violation at d = {}", curve[0].d),
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("invalid --pair {s:?} (expected j,k)"));
    let (j, k) = s.split_once(',').ok_or_else(bad)?;
    Ok((j.trim().parse().map_err(|_| bad())?, k.trim().parse().map_err(|_| bad())?))
}

fn cmd_tomo(a: TomoArgs, timestamp: bool) -> Result<()> {
    let (j, k) = parse_pair(&a.pair)?;
    let mut m = ManifestCore::new("tomo").option("pair", format!("{j},{k}")).option("space", a.space);
    let result = match &a.counts {
        Some(path) => {
            m = m.option("subtract_accidentals", a.subtract_accidentals).option("resamples", a.resamples);
            let table = load_counts(path, &mut m)?;
            let seed = m.seed.unwrap_or(0);
            reconstruct_from_table(&table, count_mode(a.subtract_accidentals), a.space, j, k, a.resamples, seed)?
        }
        None => {
            m = m.option("path", "exact");
            let cfg = load_config(&a.config, &mut m)?;
            reconstruct_exact(&noisy_state(&cfg.source), a.space, j, k)?
        }
    };
    write_json(&a.out, &result, &m.hash())?;
    write_manifest(&m, &[&a.out], &a.out, timestamp)?;
    println!("fidelity {:.4}, relative phase {:.2} deg", result.fidelity, result.relative_phase_deg);
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("invalid --grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, count] => {
            let (a, b): (f64, f64) = (start.parse().map_err(|_| bad())?, stop.parse().map_err(|_| bad())?);
            let n: usize = count.parse().map_err(|_| bad())?;
            match n {
                0 => return Err(bad()),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        [list] => list.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    if grid.iter().any(|x: &f64| !x.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn cmd_sweep(a: SweepArgs, timestamp: bool) -> Result<()> {
    let grid = parse_grid(&a.grid)?;
    let mut m = ManifestCore::new("sweep").option("param", a.param).option("grid", &a.grid);
    let cfg = load_config(&a.config, &mut m)?;
    let rows = sweep(&cfg, a.param, &grid)?;
    write_sweep_csv(fs::File::create(&a.out)?, a.param, &cfg.bell_dimensions, &rows)?;
    write_manifest(&m, &[&a.out], &a.out, timestamp)?;
    println!("wrote {} sweep points to {}", rows.len(), a.out.display());
    Ok(())
}
