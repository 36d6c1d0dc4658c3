//! Command-line front end: argument parsing, artifact writing, exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use geophase::diagnostics::flag_string;
use serde_json::{json, Value};

use crate::config::{parse_config, Config, ExperimentKind, Overrides};
use crate::experiments::{self, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "geophase", version, about = "Run geometric-phase sensing experiments from JSON configs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for CSV, manifest and SVG outputs; overrides the config.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Fock cutoff N; overrides the config.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file (or a run manifest).
    Run { config: PathBuf },
    /// List the available experiments.
    List,
}

/// The alphabetized experiment listing.
pub fn list_experiments() -> String {
    let mut out = String::new();
    for k in ExperimentKind::ALL {
        let head = format!("{} → {}", k.name(), k.figure());
        out.push_str(&format!("{head:<32}{}\n", k.description()));
    }
    out
}

/// Paths written by a successful run.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub svg: Vec<PathBuf>,
}

/// Outcome of [`run_config`].
#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub message: Option<String>,
    pub artifacts: Option<Artifacts>,
}

impl RunReport {
    fn fail(exit_code: i32, message: String) -> Self {
        RunReport { exit_code, message: Some(message), artifacts: None }
    }
}

/// Resolves, runs and writes one experiment.
pub fn run_config(text: &str, source: &str, ov: &Overrides, jobs: Option<usize>, svg: bool) -> RunReport {
    let cfg = match parse_config(text).and_then(|c| c.resolve(ov)) {
        Ok(c) => c,
        Err(e) => return RunReport::fail(EXIT_CONFIG, format!("config error in {source}: {e}")),
    };
    if jobs == Some(0) {
        return RunReport::fail(EXIT_CONFIG, "config error: --jobs must be at least 1".into());
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return RunReport::fail(EXIT_IO, format!("cannot start worker pool: {e}")),
    };
    let start = Instant::now();
    let result = pool.install(|| experiments::run(&cfg));
    let elapsed = start.elapsed().as_secs_f64();
    let out_cfg = cfg.output();
    let dir = PathBuf::from(out_cfg.dir.as_deref().unwrap_or("."));
    let stem = out_cfg.stem.clone().unwrap_or_else(|| cfg.experiment().name().into());
    if let Err(e) = fs::create_dir_all(&dir) {
        return RunReport::fail(EXIT_IO, format!("cannot create {}: {e}", dir.display()));
    }
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    match result {
        Ok(out) => write_run(&cfg, &out, &dir, &stem, &manifest_path, elapsed, jobs, svg),
        Err(e) => {
            let manifest = base_manifest(&cfg, elapsed, jobs);
            let mut m = manifest;
            m["error"] = json!(e.to_string());
            m["exit_code"] = json!(EXIT_NUMERICAL);
            if let Err(e) = write_file(&manifest_path, &pretty(&m)) {
                return RunReport::fail(EXIT_IO, e);
            }
            RunReport::fail(EXIT_NUMERICAL, format!("numerical failure: {e}"))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn base_manifest(cfg: &Config, elapsed: f64, jobs: Option<usize>) -> Value {
    json!({
        "tool": "geophase",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": geophase::VERSION,
        "experiment": cfg.experiment().name(),
        "resolved_config": cfg.to_json(),
        "timing_seconds": elapsed,
        "jobs": jobs,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_run(
    cfg: &Config,
    out: &RunOutput,
    dir: &Path,
    stem: &str,
    manifest_path: &Path,
    elapsed: f64,
    jobs: Option<usize>,
    svg: bool,
) -> RunReport {
    let csv = dir.join(format!("{stem}.csv"));
    if let Err(e) = write_file(&csv, &out.table.to_csv(cfg.experiment().name())) {
        return RunReport::fail(EXIT_IO, e);
    }
    let mut svgs = Vec::new();
    if svg {
        for (suffix, text) in &out.plots {
            let path = dir.join(format!("{stem}.{suffix}.svg"));
            if let Err(e) = write_file(&path, text) {
                return RunReport::fail(EXIT_IO, e);
            }
            svgs.push(path);
        }
    }
    let convergence = out.warnings.iter().any(|w| w.is_convergence());
    let failed_cells = out.summary.get("failed_cells").and_then(Value::as_u64).unwrap_or(0);
    let exit_code = if convergence || failed_cells > 0 { EXIT_NUMERICAL } else { EXIT_OK };
    let name = |p: &PathBuf| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut m = base_manifest(cfg, elapsed, jobs);
    m["summary"] = Value::Object(out.summary.clone());
    m["diagnostics"] = json!({
        "flags": flag_string(&out.warnings),
        "convergence_failure": convergence,
        "warnings": out.warnings,
    });
    m["outputs"] = json!({
        "csv": name(&csv),
        "rows": out.table.rows.len(),
        "svg": svgs.iter().map(name).collect::<Vec<_>>(),
    });
    m["exit_code"] = json!(exit_code);
    if let Err(e) = write_file(manifest_path, &pretty(&m)) {
        return RunReport::fail(EXIT_IO, e);
    }
    let message = (exit_code != EXIT_OK).then(|| {
        format!("numerical diagnostics failed ({}); see {}", flag_string(&out.warnings), manifest_path.display())
    });
    RunReport {
        exit_code,
        message,
        artifacts: Some(Artifacts { csv, manifest: manifest_path.to_path_buf(), svg: svgs }),
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            EXIT_OK
        }
        Command::Run { config } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return EXIT_IO;
                }
            };
            let ov =
                Overrides { cutoff: cli.cutoff, output_dir: cli.output_dir.map(|p| p.to_string_lossy().into_owned()) };
            let report = run_config(&text, &config.display().to_string(), &ov, cli.jobs, !cli.no_svg);
            if let Some(m) = &report.message {
                eprintln!("{m}");
            }
            if let Some(a) = &report.artifacts {
                println!("wrote {}", a.csv.display());
                println!("wrote {}", a.manifest.display());
                for s in &a.svg {
                    println!("wrote {}", s.display());
                }
            }
            report.exit_code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_mentions_every_experiment() {
        let l = list_experiments();
        assert!(l.contains("noise-sweep → Fig. 5(b)"));
        for k in ExperimentKind::ALL {
            assert!(l.contains(k.name()));
        }
        assert_eq!(l.lines().count(), 7);
    }
}
