//! Task execution and report files.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use blab_core::conformal::ConformalData;
use blab_core::field::ScalarField;
use blab_core::geodesic::{
    bound_value, estimate_diameter_with, integrate_conformal_geodesic, lemma1_check, DiameterMode, DiameterOptions,
    PhiFamily, PhiProfile,
};
use blab_core::neck::{build_profile, certify_neck, neck_metric, rho_sweep, NeckProfile};
use blab_core::scan::{biricci_scan, ricci_scan, ScanReport, ScanSpec};
use blab_core::stability::{first_eigenpair, lemma3_conformal_ricci, EigenResult, Hypersurface};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::manifest::{Manifest, Task, TaskKind, Value};
use crate::CliError;

/// Results a later task may consume.
#[derive(Clone, Debug)]
pub enum Artifact {
    None,
    Eigen(Box<EigenResult>),
    Profile(Box<NeckProfile>),
}

#[derive(Clone, Debug)]
pub struct TaskReport {
    pub id: String,
    pub kind: &'static str,
    /// The number assertions are checked against.
    pub headline: f64,
    pub passed: Option<bool>,
    pub records: Vec<Json>,
    /// Header and rows of the CSV mirror.
    pub table: Option<(Vec<String>, Vec<Vec<String>>)>,
    pub artifact: Artifact,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub id: String,
    pub kind: String,
    pub headline: f64,
    pub passed: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub tasks: Vec<TaskStatus>,
    pub failed_assertions: usize,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn to_json<T: Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("report values serialize")
}

struct Context<'a> {
    manifest: &'a Manifest,
    done: &'a HashMap<String, TaskReport>,
}

impl Context<'_> {
    fn chart(&self, name: &str) -> Result<blab_core::chart::Chart, blab_core::Error> {
        self.manifest.charts[name].build()
    }

    fn conformal(&self, name: &str) -> Result<ConformalData, blab_core::Error> {
        let spec = &self.manifest.conformal[name];
        let factors: Vec<Arc<dyn ScalarField>> =
            spec.factors.iter().map(|f| Arc::new(f.clone()) as Arc<dyn ScalarField>).collect();
        ConformalData::new(factors, spec.weights.clone())
    }

    fn value(&self, v: &Value) -> f64 {
        match v {
            Value::Number(x) => *x,
            Value::From { from } => self.done[from].headline,
        }
    }

    fn seed(&self, local: u64) -> u64 {
        self.manifest.seed.wrapping_add(local)
    }
}

fn scan_report(id: &str, kind: &'static str, r: ScanReport) -> TaskReport {
    let width = (r.histogram.hi - r.histogram.lo) / r.histogram.counts.len() as f64;
    let rows = r
        .histogram
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![num(r.histogram.lo + k as f64 * width), num(r.histogram.lo + (k + 1) as f64 * width), c.to_string()])
        .collect();
    TaskReport {
        id: id.into(),
        kind,
        headline: r.min,
        passed: None,
        records: vec![to_json(&r)],
        table: Some((vec!["lo".into(), "hi".into(), "count".into()], rows)),
        artifact: Artifact::None,
    }
}

fn plain(id: &str, kind: &'static str, headline: f64, records: Vec<Json>) -> TaskReport {
    TaskReport { id: id.into(), kind, headline, passed: None, records, table: None, artifact: Artifact::None }
}

fn execute(task: &Task, ctx: &Context) -> Result<TaskReport, blab_core::Error> {
    let id = task.id.as_str();
    let kind = task.kind.name();
    let mut report = match &task.kind {
        TaskKind::CurvatureScan { chart, scan } => {
            let spec = ScanSpec { seed: ctx.seed(scan.seed), ..scan.clone() };
            scan_report(id, kind, ricci_scan(&ctx.chart(chart)?, &spec)?)
        }
        TaskKind::BiricciScan { chart, sigma, scan } => {
            let spec = ScanSpec { seed: ctx.seed(scan.seed), ..scan.clone() };
            scan_report(id, kind, biricci_scan(&ctx.chart(chart)?, *sigma, &spec)?)
        }
        TaskKind::Diameter { chart, conformal, samples } => {
            let chart = ctx.chart(chart)?;
            let cd = conformal.as_deref().map(|c| ctx.conformal(c)).transpose()?;
            let mode = cd.as_ref().map_or(DiameterMode::Base, DiameterMode::Conformal);
            let opts = DiameterOptions { seed: ctx.seed(0), ..DiameterOptions::default() };
            let est = estimate_diameter_with(&chart, *samples, mode, &opts)?;
            let record = json!({
                "diameter": est.diameter,
                "graph_diameter": est.graph_diameter,
                "samples": est.samples,
                "neighbors": est.neighbors,
                "endpoints": est.endpoints,
            });
            let header = (0..chart.dim()).map(|i| format!("x{i}")).collect();
            let rows = est.path.iter().map(|p| p.iter().map(|v| num(*v)).collect()).collect();
            TaskReport { table: Some((header, rows)), ..plain(id, kind, est.diameter, vec![record]) }
        }
        TaskKind::Bound { spec, kappa } => {
            let mut spec = spec.clone();
            if let Some(k) = kappa {
                spec.kappa = ctx.value(k);
            }
            let value = bound_value(&spec)?;
            plain(id, kind, value, vec![json!({ "spec": spec, "value": value })])
        }
        TaskKind::Lemma1 { chart, conformal, x0, v0, length } => {
            let chart = ctx.chart(chart)?;
            let cd = ctx.conformal(conformal)?;
            let path = integrate_conformal_geodesic(&chart, &cd, x0, v0, *length)?;
            let family = PhiFamily::standard();
            let phis: Vec<&dyn PhiProfile> = family.iter().map(|p| p as &dyn PhiProfile).collect();
            let terms = lemma1_check(&chart, &cd, &path, &phis)?;
            let worst = terms.iter().map(|t| t.margin()).fold(f64::INFINITY, f64::min);
            plain(id, kind, worst, terms.iter().map(to_json).collect())
        }
        TaskKind::Eigen { hypersurface, grid } => {
            let hs = Hypersurface::builtin(ctx.manifest.hypersurfaces[hypersurface].clone())?;
            let eig = first_eigenpair(&hs, grid)?;
            let mut header: Vec<String> = (0..grid.dim()).map(|i| format!("u{i}")).collect();
            header.push("f".into());
            let rows = (0..grid.len())
                .map(|i| {
                    let mut row: Vec<String> = grid.coords(i).iter().map(|v| num(*v)).collect();
                    row.push(num(eig.eigenfunction[i]));
                    row
                })
                .collect();
            TaskReport {
                table: Some((header, rows)),
                artifact: Artifact::Eigen(Box::new(eig.clone())),
                ..plain(id, kind, eig.lambda, vec![to_json(&eig.summary())])
            }
        }
        TaskKind::Lemma3 { hypersurface, eigen, sigma, points } => {
            let hs = Hypersurface::builtin(ctx.manifest.hypersurfaces[hypersurface].clone())?;
            let Artifact::Eigen(eig) = &ctx.done[eigen].artifact else {
                unreachable!("plan checks the input kind")
            };
            let mut records = Vec::new();
            let mut worst = f64::INFINITY;
            for u in points {
                let g = hs.induced_metric(u);
                let e = DVector::from_fn(u.len(), |i, _| if i == 0 { 1.0 } else { 0.0 });
                let v = &e / g[(0, 0)].sqrt();
                let value = lemma3_conformal_ricci(&hs, u, &v, *sigma, eig)?;
                worst = worst.min(value);
                records.push(json!({ "u": u, "v": v.as_slice(), "value": value }));
            }
            plain(id, kind, worst, records)
        }
        TaskKind::NeckBuild { m, sigma, kappa, r0, t1, c } => {
            let p = build_profile(*m, *sigma, ctx.value(kappa), *r0, *t1, *c)?;
            let header = ["t", "r", "psi", "beta", "phi", "tau", "eta"].iter().map(|s| s.to_string()).collect();
            let rows = (0..p.grid.len())
                .map(|k| [p.grid[k], p.r[k], p.psi[k], p.beta[k], p.phi[k], p.tau[k], p.eta[k]].iter().map(|v| num(*v)).collect())
                .collect();
            TaskReport {
                table: Some((header, rows)),
                artifact: Artifact::Profile(Box::new(p.clone())),
                ..plain(id, kind, p.rho, vec![profile_summary(&p)])
            }
        }
        TaskKind::NeckCertify { profile, chart, sample } => {
            let Artifact::Profile(p) = &ctx.done[profile].artifact else {
                unreachable!("plan checks the input kind")
            };
            let (m, sigma) = (p.m, p.sigma);
            let neck = neck_metric(&ctx.chart(chart)?, Arc::new((**p).clone()))?;
            let spec = blab_core::neck::SampleSpec { seed: ctx.seed(sample.seed), ..sample.clone() };
            let r = certify_neck(&neck, m, sigma, &spec)?;
            let header = ["r", "min_biricci", "min_bound"].iter().map(|s| s.to_string()).collect();
            let rows = r.shells.iter().map(|s| vec![num(s.r), num(s.min_biricci), num(s.min_bound)]).collect();
            TaskReport { table: Some((header, rows)), ..plain(id, kind, r.min_biricci, vec![to_json(&r)]) }
        }
        TaskKind::RhoSweep { m, sigma, kappa, r0, t1 } => {
            let rows = rho_sweep(*m, *sigma, ctx.value(kappa), *r0, t1)?;
            let ratio = match (rows.first(), rows.last()) {
                (Some(a), Some(b)) => b.rho / a.rho,
                _ => f64::NAN,
            };
            let header = ["t1", "c", "r1", "tau_r1", "rho", "plateau"].iter().map(|s| s.to_string()).collect();
            let table = rows.iter().map(|r| [r.t1, r.c, r.r1, r.tau_r1, r.rho, r.plateau].iter().map(|v| num(*v)).collect()).collect();
            TaskReport { table: Some((header, table)), ..plain(id, kind, ratio, rows.iter().map(to_json).collect()) }
        }
    };
    report.passed = task.assertion.as_ref().map(|a| a.holds(report.headline));
    Ok(report)
}

fn profile_summary(p: &NeckProfile) -> Json {
    json!({
        "m": p.m, "sigma": p.sigma, "kappa": p.kappa, "r0": p.r0, "t1": p.t1,
        "c": p.c, "c0": p.c0, "c1": p.c1, "r1": p.r1, "rho": p.rho, "plateau": p.plateau,
        "margin": p.margin, "radial_min": p.radial_min, "tau_residual": p.tau_residual,
    })
}

fn write_reports(dir: &Path, report: &TaskReport) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    let mut lines = String::new();
    for r in &report.records {
        lines.push_str(&serde_json::to_string(r).expect("json"));
        lines.push('\n');
    }
    let summary = json!({ "task": report.id, "kind": report.kind, "headline": report.headline, "passed": report.passed });
    lines.push_str(&serde_json::to_string(&summary).expect("json"));
    lines.push('\n');
    fs::write(dir.join(format!("{}.jsonl", report.id)), lines).map_err(io)?;
    if let Some((header, rows)) = &report.table {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", report.id))).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)?;
    }
    if let Artifact::Profile(p) = &report.artifact {
        let text = serde_json::to_string(p).expect("json");
        fs::write(dir.join(format!("{}.profile.json", report.id)), text).map_err(io)?;
    }
    Ok(())
}

/// Runs every task in dependency order. Reports go to `output_dir`
/// (relative paths resolve against `base`); nothing is written for an
/// empty task list.
pub fn run(manifest: &Manifest, base: &Path) -> Result<RunSummary, CliError> {
    let levels = manifest.plan()?;
    let out: PathBuf = base.join(&manifest.output_dir);
    if !manifest.tasks.is_empty() {
        fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    }
    let mut done: HashMap<String, TaskReport> = HashMap::new();
    for level in levels {
        let results: Vec<Result<TaskReport, CliError>> = level
            .par_iter()
            .map(|&i| {
                let task = &manifest.tasks[i];
                let ctx = Context { manifest, done: &done };
                execute(task, &ctx).map_err(|source| CliError::Task { id: task.id.clone(), source })
            })
            .collect();
        for r in results {
            let r = r?;
            write_reports(&out, &r)?;
            done.insert(r.id.clone(), r);
        }
    }
    let tasks: Vec<TaskStatus> = manifest
        .tasks
        .iter()
        .map(|t| {
            let r = &done[&t.id];
            TaskStatus { id: r.id.clone(), kind: r.kind.into(), headline: r.headline, passed: r.passed }
        })
        .collect();
    let failed_assertions = tasks.iter().filter(|t| t.passed == Some(false)).count();
    let summary = RunSummary { tasks, failed_assertions };
    if !manifest.tasks.is_empty() {
        let lines: String =
            summary.tasks.iter().map(|t| serde_json::to_string(t).expect("json") + "\n").collect();
        fs::write(out.join("summary.jsonl"), lines).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(summary)
}

/// Runs a single task outside a manifest file and returns its report.
pub fn run_one(manifest: &Manifest) -> Result<Vec<TaskReport>, CliError> {
    let levels = manifest.plan()?;
    let mut done: HashMap<String, TaskReport> = HashMap::new();
    let mut order = Vec::new();
    for level in levels {
        for i in level {
            let task = &manifest.tasks[i];
            let ctx = Context { manifest, done: &done };
            let r = execute(task, &ctx).map_err(|source| CliError::Task { id: task.id.clone(), source })?;
            order.push(r.id.clone());
            done.insert(r.id.clone(), r);
        }
    }
    Ok(order.into_iter().map(|id| done.remove(&id).expect("finished task")).collect())
}
