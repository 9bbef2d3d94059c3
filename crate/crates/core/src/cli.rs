//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or usage,
//! 3 numerical or analysis failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{exact_fidelity, fidelity_report};
use crate::detection::Basis;
use crate::error::Error;
use crate::experiment::{run_scan, CountRecord, ExperimentConfig, RunMode, ScanResult};

pub const CSV_SCHEMA: &str = "stimclone-scan/1";
pub const CSV_HEADER: &str = "delay_fs,gamma,scheme,basis,expected_rate_hz,expected_count,sampled_count,trigger_count";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIDELITY_FILE: &str = "fidelity.json";
/// Worker count; unset means one worker per core.
pub const THREADS_ENV: &str = "STIMCLONE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Run(Error::Config { .. } | Error::Usage(_)) => 2,
            CliError::Run(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "stimclone", version, about = "Stimulated-emission photon cloning simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan the delay grid and write count tables, fidelities and a manifest.
    Scan {
        /// Experiment configuration, or a manifest from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "all")]
        basis: BasisArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Clone and anti-clone fidelities of the conditioned output state.
    Fidelity {
        #[arg(long)]
        config: PathBuf,
        /// Overlap to evaluate; defaults to the zero-delay overlap.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Print the reference operating point as a configuration file.
    DefaultConfig,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
    Both,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => RunMode::Exact,
            ModeArg::Mc => RunMode::MonteCarlo,
            ModeArg::Both => RunMode::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Vh,
    #[value(name = "45")]
    D45,
    Circ,
    All,
}

impl BasisArg {
    fn basis(self) -> Option<Basis> {
        match self {
            BasisArg::Vh => Some(Basis::LinearVH),
            BasisArg::D45 => Some(Basis::Linear45),
            BasisArg::Circ => Some(Basis::Circular),
            BasisArg::All => None,
        }
    }
}

/// Everything needed to reproduce a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub stimclone_manifest: u32,
    pub version: String,
    pub csv_schema: String,
    pub seed: u64,
    pub mode: RunMode,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

/// Reads an experiment configuration, or the configuration embedded in a
/// run manifest, and validates it.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let is_manifest = value.get("stimclone_manifest").is_some();
    let cfg = if is_manifest {
        decode::<RunManifest>(value)?.config
    } else {
        decode::<ExperimentConfig>(value)?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn decode<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        CliError::Config(format!("invalid configuration `{field}`: {}", e.inner()))
    })
}

pub fn scan_file_name(basis: Basis) -> String {
    format!("scan_{}.csv", basis.tag())
}

fn fmt_f(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn csv_row(r: &CountRecord) -> String {
    [
        fmt_f(r.delay_fs),
        fmt_f(r.gamma),
        r.scheme.tag().to_string(),
        r.basis.tag().to_string(),
        fmt_f(r.expected_rate_hz),
        fmt_f(r.expected_count),
        fmt_opt(r.sampled_count),
        fmt_opt(r.trigger_count),
    ]
    .join(",")
}

/// One CSV table per basis, keyed by basis.
pub fn render_csv(scan: &ScanResult) -> Vec<(Basis, String)> {
    scan.config
        .bases
        .iter()
        .map(|&b| {
            let mut out = format!("# schema={CSV_SCHEMA} manifest={MANIFEST_FILE}\n{CSV_HEADER}\n");
            for r in scan.records.iter().filter(|r| r.basis == b) {
                out.push_str(&csv_row(r));
                out.push('\n');
            }
            (b, out)
        })
        .collect()
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(CliError::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Run(Error::Numerical(format!("thread pool: {e}"))))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn warn_config(cfg: &ExperimentConfig) {
    for w in cfg.pdc.warnings() {
        eprintln!("warning: {w}");
    }
}

fn cmd_scan(
    config: &Path,
    mode: Option<ModeArg>,
    seed: Option<u64>,
    basis: BasisArg,
    out: &Path,
) -> Result<String, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(b) = basis.basis() {
        cfg.bases = vec![b];
    }
    cfg.validate()?;
    warn_config(&cfg);

    let scan = thread_pool()?.install(|| run_scan(&cfg))?;
    let report = fidelity_report(&scan)?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut outputs = Vec::new();
    for (b, csv) in render_csv(&scan) {
        let name = scan_file_name(b);
        write(&out.join(&name), &csv)?;
        outputs.push(name);
    }
    let fidelity = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&out.join(FIDELITY_FILE), &(fidelity + "\n"))?;
    outputs.push(FIDELITY_FILE.to_string());

    let manifest = RunManifest {
        stimclone_manifest: 1,
        version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema: CSV_SCHEMA.to_string(),
        seed: cfg.seed,
        mode: cfg.mode,
        outputs,
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out.join(MANIFEST_FILE), &(text + "\n"))?;

    let mut summary = String::new();
    for e in &report.estimates {
        let _ = writeln!(
            summary,
            "{:<5} {:<8} R = {:.6} ± {:.6}  F = {:.6} ± {:.6}",
            e.basis.tag(),
            format!("{:?}", e.source).to_lowercase(),
            e.r,
            e.sigma_r,
            e.fidelity,
            e.sigma_fidelity
        );
    }
    for u in &report.universality {
        let _ = writeln!(
            summary,
            "universality ({}): spread {:.3e}, {}",
            format!("{:?}", u.source).to_lowercase(),
            u.spread,
            if u.universal { "universal" } else { "NOT universal" }
        );
    }
    Ok(summary)
}

fn cmd_fidelity(config: &Path, gamma: Option<f64>) -> Result<String, CliError> {
    let cfg = load_config(config)?;
    warn_config(&cfg);
    let gamma = gamma.unwrap_or_else(|| cfg.overlap.gamma(0.0));
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config("gamma", format!("{gamma} is outside [0, 1]")).into());
    }
    let mut out = format!(
        "gamma      {gamma:.6}\ndephasing  {:.6}\nbasis  clone     anti-clone\n",
        cfg.pdc.dephasing
    );
    for &b in &cfg.bases {
        let f = exact_fidelity(&cfg.pdc, gamma, b.reference_polarization())?;
        let _ = writeln!(out, "{:<6} {:.6}  {:.6}", b.tag(), f.clone, f.anticlone);
    }
    Ok(out)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Scan {
            config,
            mode,
            seed,
            basis,
            out,
        } => cmd_scan(config, *mode, *seed, *basis, out),
        Command::Fidelity { config, gamma } => cmd_fidelity(config, *gamma),
        Command::DefaultConfig => {
            Ok(serde_json::to_string_pretty(&ExperimentConfig::reference()).expect("config serializes") + "\n")
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_is_named() {
        let mut v = serde_json::to_value(ExperimentConfig::reference()).unwrap();
        v["pdc"]["kappa"] = serde_json::json!(0.1);
        let err = parse_config(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("pdc"), "{err}");
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn wrong_type_names_path() {
        let mut v = serde_json::to_value(ExperimentConfig::reference()).unwrap();
        v["detector"]["efficiency"] = serde_json::json!("high");
        let err = parse_config(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("detector.efficiency"), "{err}");
    }

    #[test]
    fn out_of_range_value_is_config_error() {
        let mut v = serde_json::to_value(ExperimentConfig::reference()).unwrap();
        v["pdc"]["dephasing"] = serde_json::json!(2.0);
        let err = parse_config(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("pdc.dephasing"), "{err}");
    }

    #[test]
    fn manifest_round_trips_to_config() {
        let cfg = ExperimentConfig::reference();
        let m = RunManifest {
            stimclone_manifest: 1,
            version: "x".into(),
            csv_schema: CSV_SCHEMA.into(),
            seed: cfg.seed,
            mode: cfg.mode,
            outputs: vec![],
            config: cfg.clone(),
        };
        let back = parse_config(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn csv_uses_twelve_significant_digits() {
        let r = CountRecord {
            delay_fs: -12.5,
            gamma: 0.5,
            scheme: crate::detection::Scheme::PbsCoincidence,
            basis: Basis::Circular,
            expected_rate_hz: 1.0 / 3.0,
            expected_count: 200.0,
            sampled_count: None,
            trigger_count: Some(7),
        };
        assert_eq!(
            csv_row(&r),
            "-1.25000000000e1,5.00000000000e-1,N11,circ,3.33333333333e-1,2.00000000000e2,,7"
        );
    }
}
