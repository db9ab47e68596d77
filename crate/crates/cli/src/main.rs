use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use blab_cli::manifest::{Assertion, ConformalSpec, Task, TaskKind, Value};
use blab_cli::{run, run_one, CliError, Manifest};
use blab_core::chart::ChartSpec;
use blab_core::geodesic::{BoundKind, BoundSpec};
use blab_core::neck::{certify_neck, neck_metric, NeckProfile, SampleSpec};
use blab_core::scan::ScanSpec;
use blab_core::stability::{BuiltinEmbedding, DomainGrid};
use clap::{Args, Parser, Subcommand};

/// Curvature workbench: scans, diameter estimates, bounds, eigenproblems
/// and neck constructions.
#[derive(Parser)]
#[command(name = "blab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every task of a manifest and write reports.
    Run { manifest: PathBuf },
    /// Minimum bi-Ricci (or Ricci) curvature over a grid.
    Scan {
        #[command(flatten)]
        chart: ChartArg,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Scan Ricci curvature instead of bi-Ricci.
        #[arg(long)]
        ricci: bool,
        #[arg(long, default_value_t = 6)]
        points: usize,
        #[arg(long, default_value_t = 64)]
        directions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the diameter of a chart, optionally after a conformal change.
    Diameter {
        #[command(flatten)]
        chart: ChartArg,
        /// Conformal data as JSON: {"factors": [...], "weights": [...]}.
        #[arg(long)]
        conformal: Option<String>,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a closed-form diameter bound.
    Bound {
        #[arg(long, value_parser = parse_json::<BoundKind>)]
        kind: BoundKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// First Dirichlet eigenpair of the Jacobi operator of a hypersurface.
    Eigen {
        /// Embedding as JSON, for example {"name":"equator","n":3}.
        #[arg(long)]
        hypersurface: String,
        /// Domain grid as JSON.
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Neck profiles.
    Neck {
        #[command(subcommand)]
        command: NeckCommand,
    },
}

#[derive(Subcommand)]
enum NeckCommand {
    /// Build and certify a radial profile.
    Build {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        c: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample bi-Ricci curvature of a neck built from a saved profile.
    Certify {
        /// Profile JSON written by `neck build`.
        #[arg(long)]
        profile: PathBuf,
        #[command(flatten)]
        chart: ChartArg,
        #[arg(long, default_value_t = 20)]
        shells: usize,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Final radius as the neck parameter grows.
    RhoSweep {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        r0: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        t1: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct ChartArg {
    /// Chart as inline JSON or a path to a JSON file.
    #[arg(long)]
    chart: String,
}

#[derive(Args)]
struct Common {
    /// Write report files here instead of printing records.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Assertion on the headline value as JSON, for example {"gt":0}.
    #[arg(long, value_parser = parse_json::<Assertion>)]
    assert: Option<Assertion>,
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s)
        .or_else(|_| serde_json::from_value(serde_json::Value::String(s.to_string())))
        .map_err(|e| e.to_string())
}

fn json_or_file<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, CliError> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        std::fs::read_to_string(s).map_err(|e| CliError::Manifest(format!("{s}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{s}: {e}")))
}

fn single(kind: TaskKind, common: Common, setup: impl FnOnce(&mut Manifest)) -> Result<(), CliError> {
    let mut manifest = Manifest::from_json("{}")?;
    setup(&mut manifest);
    let id = kind.name().to_string();
    manifest.tasks.push(Task { id, depends_on: Vec::new(), assertion: common.assert, kind });
    let failed = match common.out {
        Some(dir) => {
            manifest.output_dir = dir;
            run(&manifest, Path::new("."))?.failed_assertions
        }
        None => {
            let reports = run_one(&manifest)?;
            for r in &reports {
                for rec in &r.records {
                    println!("{rec}");
                }
                let summary = serde_json::json!({ "task": r.id, "kind": r.kind, "headline": r.headline, "passed": r.passed });
                println!("{summary}");
            }
            reports.iter().filter(|r| r.passed == Some(false)).count()
        }
    };
    if failed > 0 {
        return Err(CliError::Assertions(failed));
    }
    Ok(())
}

fn chart_setup(spec: ChartSpec) -> impl FnOnce(&mut Manifest) {
    move |m| {
        m.charts.insert("chart".into(), spec);
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { manifest: path } => {
            let manifest = Manifest::load(&path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let summary = run(&manifest, base)?;
            for t in &summary.tasks {
                let status = match t.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "done",
                };
                eprintln!("{status:>4}  {:<24} {:<14} {:.9e}", t.id, t.kind, t.headline);
            }
            if summary.failed_assertions > 0 {
                return Err(CliError::Assertions(summary.failed_assertions));
            }
            Ok(())
        }
        Command::Scan { chart, sigma, ricci, points, directions, seed, bins, common } => {
            let spec: ChartSpec = json_or_file(&chart.chart)?;
            let scan = ScanSpec { points_per_axis: points, directions, seed, bins };
            let kind = if ricci {
                TaskKind::CurvatureScan { chart: "chart".into(), scan }
            } else {
                TaskKind::BiricciScan { chart: "chart".into(), sigma, scan }
            };
            single(kind, common, chart_setup(spec))
        }
        Command::Diameter { chart, conformal, samples, seed, common } => {
            let spec: ChartSpec = json_or_file(&chart.chart)?;
            let cd: Option<ConformalSpec> = conformal.as_deref().map(json_or_file).transpose()?;
            let kind =
                TaskKind::Diameter { chart: "chart".into(), conformal: cd.as_ref().map(|_| "conformal".into()), samples };
            single(kind, common, move |m| {
                m.seed = seed;
                m.charts.insert("chart".into(), spec);
                if let Some(cd) = cd {
                    m.conformal.insert("conformal".into(), cd);
                }
            })
        }
        Command::Bound { kind, n, kappa, sigma, epsilon, a, delta, lambda, m, common } => {
            let spec = BoundSpec { kind, n, kappa, sigma, epsilon, a, delta, lambda, m };
            single(TaskKind::Bound { spec, kappa: None }, common, |_| {})
        }
        Command::Eigen { hypersurface, grid, common } => {
            let hs: BuiltinEmbedding = json_or_file(&hypersurface)?;
            let grid: DomainGrid = json_or_file(&grid)?;
            single(TaskKind::Eigen { hypersurface: "hs".into(), grid }, common, move |m| {
                m.hypersurfaces.insert("hs".into(), hs);
            })
        }
        Command::Neck { command } => match command {
            NeckCommand::Build { m, sigma, kappa, r0, t1, c, common } => {
                let kind = TaskKind::NeckBuild { m, sigma, kappa: Value::Number(kappa), r0, t1, c };
                single(kind, common, |_| {})
            }
            NeckCommand::RhoSweep { m, sigma, kappa, r0, t1, common } => {
                let kind = TaskKind::RhoSweep { m, sigma, kappa: Value::Number(kappa), r0, t1 };
                single(kind, common, |_| {})
            }
            NeckCommand::Certify { profile, chart, shells, points, pairs, seed } => {
                let p: NeckProfile = json_or_file(&profile.to_string_lossy())?;
                let spec: ChartSpec = json_or_file(&chart.chart)?;
                let task = |source| CliError::Task { id: "neck-certify".into(), source };
                let base = spec.build().map_err(task)?;
                let (m, sigma) = (p.m, p.sigma);
                let neck = neck_metric(&base, Arc::new(p)).map_err(task)?;
                let sample = SampleSpec { shells, points_per_shell: points, pairs_per_shell: pairs, seed, r_range: None };
                let report = certify_neck(&neck, m, sigma, &sample).map_err(task)?;
                println!("{}", serde_json::to_string(&report).expect("json"));
                Ok(())
            }
        },
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("BLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("BLAB_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
