//! End-to-end drivers behind the CLI: `select` and `bench`, and the JSON
//! documents they write.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{kfold_cv, CvResult};
use crate::greedy::{backward_select, forward_select, stepwise_select, StopRule};
use crate::incremental::ScatterContext;
use crate::io::{jitter, load_csv, standardize, CsvOptions};
use crate::pfst::{pfst_run, PfstConfig};
use crate::report::SelectionReport;
use crate::synth::{generate, SyntheticSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pfst,
    Forward,
    Backward,
    Stepwise,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pfst, Method::Forward, Method::Backward, Method::Stepwise];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pfst => "pfst",
            Method::Forward => "forward",
            Method::Backward => "backward",
            Method::Stepwise => "stepwise",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Csv { path: PathBuf, options: CsvOptions },
    Synthetic(SyntheticSpec),
}

impl Source {
    pub fn describe(&self) -> String {
        match self {
            Source::Csv { path, .. } => path.display().to_string(),
            Source::Synthetic(s) => format!(
                "synthetic(n={}, p={}, classes={}, informative={}, seed={})",
                s.n, s.p, s.classes, s.informative, s.seed
            ),
        }
    }

    /// Loaded dataset plus the planted informative features for synthetic sources.
    fn load(&self) -> Result<(Dataset, Option<Vec<usize>>)> {
        match self {
            Source::Csv { path, options } => Ok((load_csv(path, options)?, None)),
            Source::Synthetic(spec) => {
                let s = generate(spec)?;
                Ok((s.data, Some(s.informative)))
            }
        }
    }
}

/// Everything one `select` invocation needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub source: Source,
    pub method: Method,
    /// Thresholds, blocks, seed and the standardization flag; the greedy
    /// methods read `alpha`, `beta` and `max_features` from here.
    pub params: PfstConfig,
    pub cv_folds: Option<usize>,
    pub jitter: Option<f64>,
    pub ridge: f64,
    /// Selection gives up with [`Error::TimedOut`] after this long.
    pub timeout: Option<Duration>,
}

impl RunSpec {
    pub fn new(source: Source, method: Method) -> Self {
        Self {
            source,
            method,
            params: PfstConfig::default(),
            cv_folds: Some(5),
            jitter: None,
            ridge: 0.0,
            timeout: None,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            alpha: self.params.alpha,
            beta: self.params.beta,
            max_features: self.params.max_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub n: usize,
    pub p: usize,
    pub classes: usize,
    pub class_names: Vec<String>,
    /// Columns that were constant and zeroed by standardization.
    pub constant_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub dataset: DatasetSummary,
    pub selection: SelectionReport,
    pub selected_names: Vec<String>,
    pub cv: Option<CvResult>,
}

impl ReportDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported report schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let d = &self.dataset;
        let _ = writeln!(out, "dataset   {} (n={}, p={}, classes={})", d.source, d.n, d.p, d.classes);
        let _ = writeln!(out, "method    {}", self.selection.config.name());
        let _ = writeln!(out, "selected  {} features, trace {:.6}", self.selection.selected.len(), self.selection.final_trace);
        for (rank, (f, name)) in self.selection.selected.iter().zip(&self.selected_names).enumerate() {
            let _ = writeln!(out, "  {:>3}  {:>6}  {}", rank + 1, f, name);
        }
        for t in &self.selection.timings {
            let _ = writeln!(out, "time      {:<16} {:.4} s", format!("{:?}", t.stage), t.seconds);
        }
        if let Some(cv) = &self.cv {
            let _ = writeln!(out, "cv        {}-fold misclassification {:.4}", cv.k, cv.mean_error);
        }
        out
    }
}

/// Loads the source named by `spec`, then runs [`select_on`].
pub fn run_select(spec: &RunSpec) -> Result<ReportDocument> {
    let (data, _) = spec.source.load()?;
    select_on(&data, &spec.source.describe(), spec)
}

/// Preprocesses `data`, runs the selection method and cross-validates LDA on the result.
pub fn select_on(data: &Dataset, source: &str, spec: &RunSpec) -> Result<ReportDocument> {
    let (prepared, constant) = prepare(data, spec)?;
    let deadline = spec.timeout.map(|t| Instant::now() + t);
    let selection = run_method(&prepared, spec, deadline)?;
    let cv = match spec.cv_folds {
        Some(k) => Some(kfold_cv(&prepared, &selection.selected, k, spec.params.seed, spec.ridge, spec.params.singular_tol)?),
        None => None,
    };
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        dataset: DatasetSummary {
            source: source.to_string(),
            n: data.n_rows(),
            p: data.n_features(),
            classes: data.n_classes(),
            class_names: data.class_names().to_vec(),
            constant_columns: constant,
        },
        selected_names: selection.selected.iter().map(|&f| data.names()[f].clone()).collect(),
        selection,
        cv,
    })
}

fn prepare(data: &Dataset, spec: &RunSpec) -> Result<(Dataset, Vec<usize>)> {
    let data = match spec.jitter {
        Some(sigma) => jitter(data, sigma, spec.params.seed)?,
        None => data.clone(),
    };
    Ok(if spec.params.standardize {
        standardize(&data)
    } else {
        (data, Vec::new())
    })
}

/// Runs one method on already-preprocessed data.
fn run_method(data: &Dataset, spec: &RunSpec, deadline: Option<Instant>) -> Result<SelectionReport> {
    let ctx = ScatterContext::from_dataset(data, spec.params.singular_tol)?.with_deadline(deadline);
    match spec.method {
        Method::Pfst => pfst_run(&ctx, &spec.params),
        Method::Forward => forward_select(&ctx, &spec.stop_rule()),
        Method::Backward => backward_select(&ctx, &spec.stop_rule()),
        Method::Stepwise => stepwise_select(&ctx, &spec.stop_rule()),
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub sources: Vec<Source>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub timeout: Option<Duration>,
    pub params: PfstConfig,
    pub cv_folds: Option<usize>,
}

/// One method on one dataset. `None` fields render as NA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub dataset: String,
    pub method: Method,
    pub median_seconds: Option<f64>,
    pub seconds: Vec<f64>,
    pub n_selected: Option<usize>,
    pub cv_error: Option<f64>,
    /// Planted informative features recovered (synthetic sources only).
    pub recall: Option<usize>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub repeats: usize,
    pub timeout_seconds: Option<f64>,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cell(&self, dataset: &str, method: Method) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.dataset == dataset && c.method == method)
    }

    pub fn to_table(&self) -> String {
        let na = |v: Option<String>| v.unwrap_or_else(|| "NA".into());
        let w = self.cells.iter().map(|c| c.dataset.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w$}  {:<9} {:>12} {:>9} {:>9} {:>7}", "dataset", "method", "time (s)", "selected", "cv error", "recall");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<w$}  {:<9} {:>12} {:>9} {:>9} {:>7}",
                c.dataset,
                c.method.name(),
                na(c.median_seconds.map(|s| format!("{s:.4}"))),
                na(c.n_selected.map(|k| k.to_string())),
                na(c.cv_error.map(|e| format!("{e:.4}"))),
                na(c.recall.map(|r| r.to_string())),
            );
        }
        out
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Times every method on every source, sequentially. A run that overshoots the
/// timeout leaves an NA cell and the benchmark moves on.
pub fn run_benchmark(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.sources.is_empty() || spec.methods.is_empty() || spec.repeats == 0 {
        return Err(Error::InvalidConfig("bench needs at least one dataset, one method and one repeat".into()));
    }
    let mut cells = Vec::new();
    for source in &spec.sources {
        let (raw, planted) = source.load()?;
        let name = source.describe();
        for &method in &spec.methods {
            let run = RunSpec {
                source: source.clone(),
                method,
                params: spec.params,
                cv_folds: spec.cv_folds,
                jitter: None,
                ridge: 0.0,
                timeout: spec.timeout,
            };
            let (data, _) = prepare(&raw, &run)?;
            cells.push(bench_cell(&data, &name, &run, spec, planted.as_deref()));
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        repeats: spec.repeats,
        timeout_seconds: spec.timeout.map(|d| d.as_secs_f64()),
        cells,
    })
}

fn bench_cell(data: &Dataset, name: &str, run: &RunSpec, spec: &BenchSpec, planted: Option<&[usize]>) -> BenchCell {
    let mut cell = BenchCell {
        dataset: name.to_string(),
        method: run.method,
        median_seconds: None,
        seconds: Vec::new(),
        n_selected: None,
        cv_error: None,
        recall: None,
        status: "ok".into(),
    };
    let mut last = None;
    for _ in 0..spec.repeats {
        let started = Instant::now();
        let deadline = spec.timeout.map(|t| started + t);
        match run_method(data, run, deadline) {
            Ok(report) => {
                cell.seconds.push(started.elapsed().as_secs_f64());
                last = Some(report);
            }
            Err(Error::TimedOut) => {
                cell.status = "timeout".into();
                cell.seconds.clear();
                return cell;
            }
            Err(e) => {
                cell.status = format!("error: {e}");
                cell.seconds.clear();
                return cell;
            }
        }
    }
    let report = last.expect("repeats >= 1");
    cell.median_seconds = median(&cell.seconds);
    cell.n_selected = Some(report.selected.len());
    cell.recall = planted.map(|p| p.iter().filter(|f| report.selected.contains(f)).count());
    if let Some(k) = spec.cv_folds {
        match kfold_cv(data, &report.selected, k, run.params.seed, run.ridge, run.params.singular_tol) {
            Ok(cv) => cell.cv_error = Some(cv.mean_error),
            Err(e) => cell.status = format!("cv error: {e}"),
        }
    }
    cell
}
