//! Experiment manifests: named charts, conformal factors and embeddings,
//! plus a list of tasks with dependencies.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use blab_core::chart::ChartSpec;
use blab_core::field::BuiltinField;
use blab_core::geodesic::BoundSpec;
use blab_core::neck::SampleSpec;
use blab_core::scan::ScanSpec;
use blab_core::stability::{BuiltinEmbedding, DomainGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub seed: u64,
    /// Report directory, relative to the manifest file.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub charts: BTreeMap<String, ChartSpec>,
    #[serde(default)]
    pub conformal: BTreeMap<String, ConformalSpec>,
    #[serde(default)]
    pub hypersurfaces: BTreeMap<String, BuiltinEmbedding>,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

fn default_output() -> PathBuf {
    PathBuf::from("reports")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalSpec {
    pub factors: Vec<BuiltinField>,
    pub weights: Vec<f64>,
}

/// A check on the headline number of a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assertion {
    Gt(f64),
    Lt(f64),
    Le(f64),
    Within { value: f64, tol: f64 },
}

impl Assertion {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Assertion::Gt(v) => x > v,
            Assertion::Lt(v) => x < v,
            Assertion::Le(v) => x <= v,
            Assertion::Within { value, tol } => (x - value).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(default)]
    pub depends_on: Vec<String>,
    #[serde(default, rename = "assert")]
    pub assertion: Option<Assertion>,
    #[serde(flatten)]
    pub kind: TaskKind,
}

/// Either a number or the headline of an earlier task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    From { from: String },
}

impl Value {
    pub fn reference(&self) -> Option<&str> {
        match self {
            Value::From { from } => Some(from),
            Value::Number(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskKind {
    /// Minimum Ricci curvature.
    CurvatureScan {
        chart: String,
        #[serde(default)]
        scan: ScanSpec,
    },
    BiricciScan {
        chart: String,
        sigma: f64,
        #[serde(default)]
        scan: ScanSpec,
    },
    Diameter {
        chart: String,
        #[serde(default)]
        conformal: Option<String>,
        samples: usize,
    },
    Bound {
        spec: BoundSpec,
        /// Overrides `spec.kappa`.
        #[serde(default)]
        kappa: Option<Value>,
    },
    Lemma1 {
        chart: String,
        conformal: String,
        x0: Vec<f64>,
        v0: Vec<f64>,
        length: f64,
    },
    Eigen {
        hypersurface: String,
        grid: DomainGrid,
    },
    Lemma3 {
        hypersurface: String,
        eigen: String,
        sigma: f64,
        points: Vec<Vec<f64>>,
    },
    NeckBuild {
        m: usize,
        sigma: f64,
        kappa: Value,
        r0: f64,
        t1: f64,
        #[serde(default)]
        c: Option<f64>,
    },
    NeckCertify {
        profile: String,
        chart: String,
        #[serde(default)]
        sample: SampleSpec,
    },
    RhoSweep {
        m: usize,
        sigma: f64,
        kappa: Value,
        r0: f64,
        t1: Vec<f64>,
    },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::CurvatureScan { .. } => "curvature-scan",
            TaskKind::BiricciScan { .. } => "biricci-scan",
            TaskKind::Diameter { .. } => "diameter",
            TaskKind::Bound { .. } => "bound",
            TaskKind::Lemma1 { .. } => "lemma1",
            TaskKind::Eigen { .. } => "eigen",
            TaskKind::Lemma3 { .. } => "lemma3",
            TaskKind::NeckBuild { .. } => "neck-build",
            TaskKind::NeckCertify { .. } => "neck-certify",
            TaskKind::RhoSweep { .. } => "rho-sweep",
        }
    }

    /// Names of charts, conformal data and embeddings the task uses.
    fn resources(&self) -> Vec<(&'static str, &str)> {
        match self {
            TaskKind::CurvatureScan { chart, .. } | TaskKind::BiricciScan { chart, .. } => vec![("chart", chart)],
            TaskKind::Diameter { chart, conformal, .. } => {
                let mut out = vec![("chart", chart.as_str())];
                out.extend(conformal.as_deref().map(|c| ("conformal", c)));
                out
            }
            TaskKind::Lemma1 { chart, conformal, .. } => vec![("chart", chart), ("conformal", conformal)],
            TaskKind::Eigen { hypersurface, .. } | TaskKind::Lemma3 { hypersurface, .. } => {
                vec![("hypersurface", hypersurface)]
            }
            TaskKind::NeckCertify { chart, .. } => vec![("chart", chart)],
            _ => Vec::new(),
        }
    }

    /// Tasks whose results this one consumes, with the kinds they must have.
    fn inputs(&self) -> Vec<(&str, &'static [&'static str])> {
        const ANY: &[&str] = &[];
        match self {
            TaskKind::Bound { kappa: Some(k), .. } => k.reference().map(|r| (r, ANY)).into_iter().collect(),
            TaskKind::NeckBuild { kappa, .. } | TaskKind::RhoSweep { kappa, .. } => kappa.reference().map(|r| (r, ANY)).into_iter().collect(),
            TaskKind::Lemma3 { eigen, .. } => vec![(eigen.as_str(), &["eigen"][..])],
            TaskKind::NeckCertify { profile, .. } => vec![(profile.as_str(), &["neck-build"][..])],
            _ => Vec::new(),
        }
    }
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks references and returns the tasks grouped into dependency
    /// levels; tasks within a level are independent.
    pub fn plan(&self) -> Result<Vec<Vec<usize>>, CliError> {
        let bad = |msg: String| Err(CliError::Manifest(msg));
        let mut index = HashMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if index.insert(t.id.as_str(), i).is_some() {
                return bad(format!("duplicate task id {:?}", t.id));
            }
        }
        for t in &self.tasks {
            for (what, name) in t.kind.resources() {
                let known = match what {
                    "chart" => self.charts.contains_key(name),
                    "conformal" => self.conformal.contains_key(name),
                    _ => self.hypersurfaces.contains_key(name),
                };
                if !known {
                    return bad(format!("task {:?} refers to unknown {what} {name:?}", t.id));
                }
            }
            for dep in &t.depends_on {
                if !index.contains_key(dep.as_str()) {
                    return bad(format!("task {:?} depends on unknown task {dep:?}", t.id));
                }
            }
            for (input, kinds) in t.kind.inputs() {
                let Some(&j) = index.get(input) else {
                    return bad(format!("task {:?} uses the result of unknown task {input:?}", t.id));
                };
                if !t.depends_on.iter().any(|d| d == input) {
                    return bad(format!("task {:?} uses {input:?} without depending on it", t.id));
                }
                let kind = self.tasks[j].kind.name();
                if !kinds.is_empty() && !kinds.contains(&kind) {
                    return bad(format!("task {:?} needs a {} task, {input:?} is {kind}", t.id, kinds.join("/")));
                }
            }
        }
        let mut level = vec![usize::MAX; self.tasks.len()];
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut done = 0;
        while done < self.tasks.len() {
            let ready: Vec<usize> = (0..self.tasks.len())
                .filter(|&i| level[i] == usize::MAX)
                .filter(|&i| {
                    self.tasks[i].depends_on.iter().all(|d| {
                        let l = level[index[d.as_str()]];
                        l != usize::MAX && l < levels.len()
                    })
                })
                .collect();
            if ready.is_empty() {
                let stuck: Vec<&str> =
                    (0..self.tasks.len()).filter(|&i| level[i] == usize::MAX).map(|i| self.tasks[i].id.as_str()).collect();
                return bad(format!("dependency cycle among tasks {stuck:?}"));
            }
            for &i in &ready {
                level[i] = levels.len();
            }
            done += ready.len();
            levels.push(ready);
        }
        Ok(levels)
    }
}
