//! Executes a resolved configuration and persists its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use qbc_core::counting::{count_recurrence, count_shrinking_target, CountOptions, CountRecord, EventKind};
use qbc_core::harness::{
    default_envelope, dichotomy_check, fit_error_exponent, retained_hits, run_experiment, variance_statistic,
    ExperimentReport, FitOutcome, HarnessError, QbcInstance, VarianceEstimate, REPORT_SCHEMA_VERSION,
};
use qbc_core::measure::{
    event_recurrence, event_target, measure_intersection, mixing_deficit, rect_measure, EventSet, MeasureError,
};
use qbc_core::points::{point_seed, GenericPoint, PointError, TargetPoint};
use qbc_core::{MapError, Rational};

use crate::config::{Mode, Resolved};
use crate::svg::{LineChart, Series};

/// Version of the manifest layout.
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Point(#[from] PointError),
    #[error(transparent)]
    Count(#[from] qbc_core::counting::CountError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => f.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Float(f) => json!(f),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<&Rational> for Cell {
    fn from(v: &Rational) -> Self {
        Cell::Text(v.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// A named table written as CSV or as a JSON array of objects.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, c)| (h.to_string(), c.json()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => serde_json::to_string_pretty(&self.to_json()).expect("plain values") + "\n",
        }
    }
}

/// What a run produced, before anything touches the disk.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Tables in output order; the first is echoed to stdout.
    pub tables: Vec<Table>,
    /// Extra JSON documents (name without extension, content).
    pub documents: Vec<(&'static str, Value)>,
    pub charts: Vec<(&'static str, LineChart)>,
    pub summary: Value,
    /// Human-readable threshold verdicts; any `false` means exit code 2.
    pub checks: Vec<(String, bool)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

pub fn execute(r: &Resolved) -> Result<Outcome, RunError> {
    match r.config.mode {
        Mode::Count | Mode::Target => count(r),
        Mode::Measure => measure(r),
        Mode::Intersect => intersect(r),
        Mode::Mixing => mixing(r),
        Mode::Experiment => experiment(r, false),
        Mode::Fit => experiment(r, true),
        Mode::Dichotomy => dichotomy(r),
    }
}

fn count_header(kind: EventKind) -> &'static [&'static str] {
    match kind {
        EventKind::Recurrence => &["seed", "N", "R", "Psi_exact", "Psi_float", "unresolved"],
        EventKind::Target => &["seed", "N", "W", "Phi_exact", "Phi_float", "unresolved"],
    }
}

fn count_table(kind: EventKind, records: &[CountRecord]) -> Table {
    let mut t = Table::new("counts", count_header(kind));
    for rec in records {
        for (c, m) in rec.counts.iter().zip(&rec.main_terms) {
            t.push(vec![
                rec.seed.into(),
                c.n.into(),
                c.count.into(),
                m.exact.as_ref().into(),
                m.float.into(),
                c.unresolved.into(),
            ]);
        }
    }
    t
}

fn hits_table(records: &[CountRecord]) -> Table {
    let mut t = Table::new("hits", &["seed", "n"]);
    for rec in records {
        for &n in rec.hits.as_deref().unwrap_or_default() {
            t.push(vec![rec.seed.into(), (n as u64).into()]);
        }
    }
    t
}

fn count(r: &Resolved) -> Result<Outcome, RunError> {
    let kind = r.kind();
    let target = match kind {
        EventKind::Target => Some(TargetPoint::new(&r.map, r.target.clone().expect("validated"))?),
        EventKind::Recurrence => None,
    };
    let opts = CountOptions {
        predicate: r.predicate(),
        keep_hits: r.config.keep_hits,
    };
    let records = (0..r.config.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut p = GenericPoint::sample(&r.map, point_seed(r.config.seed, i)).with_budget(r.config.budget);
            match &target {
                None => count_recurrence(&r.rate, &mut p, &r.checkpoints, &opts),
                Some(t) => count_shrinking_target(&r.rate, t, &mut p, &r.checkpoints, &opts),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome {
        tables: vec![count_table(kind, &records)],
        summary: json!({
            "points": records.len(),
            "unresolved_total": records.iter().map(CountRecord::total_unresolved).sum::<u64>(),
        }),
        ..Outcome::default()
    };
    if r.config.keep_hits {
        out.tables.push(hits_table(&records));
    }
    Ok(out)
}

fn event(r: &Resolved, n: u32) -> Result<EventSet, MeasureError> {
    match r.kind() {
        EventKind::Recurrence => event_recurrence(&r.map, &r.rate, n),
        EventKind::Target => event_target(&r.map, &r.rate, r.target.as_deref().expect("validated"), n),
    }
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Recurrence => "recurrence",
        EventKind::Target => "target",
    }
}

fn measure(r: &Resolved) -> Result<Outcome, RunError> {
    let mut t = Table::new("oracle", &["kind", "n", "measure_exact", "measure_float"]);
    for n in r.config.measure.n.to_vec() {
        let v = event(r, n)?.measure().into_inner();
        t.push(vec![kind_name(r.kind()).into(), (n as u64).into(), (&v).into(), v.to_f64().into()]);
    }
    Ok(Outcome {
        summary: json!({ "rows": t.rows.len() }),
        tables: vec![t],
        ..Outcome::default()
    })
}

fn intersect(r: &Resolved) -> Result<Outcome, RunError> {
    let m = r.config.measure.m.expect("validated");
    let first = event(r, m)?;
    let mut t = Table::new("oracle", &["kind", "n", "m", "measure_exact", "measure_float"]);
    for n in r.config.measure.n.to_vec() {
        let v = measure_intersection(&first, &event(r, n)?)?.into_inner();
        t.push(vec![
            kind_name(r.kind()).into(),
            (n as u64).into(),
            (m as u64).into(),
            (&v).into(),
            v.to_f64().into(),
        ]);
    }
    Ok(Outcome {
        summary: json!({ "rows": t.rows.len() }),
        tables: vec![t],
        ..Outcome::default()
    })
}

fn mixing(r: &Resolved) -> Result<Outcome, RunError> {
    let mx = r.config.mixing.as_ref().expect("validated");
    let e: Vec<(Rational, Rational)> = mx.e.iter().map(|[a, b]| (a.0.clone(), b.0.clone())).collect();
    let f: Vec<Vec<(Rational, Rational)>> = mx
        .f
        .iter()
        .map(|rect| rect.iter().map(|[a, b]| (a.0.clone(), b.0.clone())).collect())
        .collect();
    let mu_e = rect_measure(&e);
    let mu_f = f.iter().fold(Rational::zero(), |acc, r| acc + rect_measure(r));
    let d = Rational::from_integer(r.map.dimension() as i64);
    let mut t = Table::new(
        "mixing",
        &["n", "mu_E", "mu_F", "deficit_exact", "deficit_float", "bound_float"],
    );
    for n in mx.n.to_vec() {
        let deficit = mixing_deficit(&r.map, &e, &f, n)?;
        let bound = Rational::from_integer(4) * &d * r.map.lambda().recip().pow(n as i32) * &mu_f;
        t.push(vec![
            (n as u64).into(),
            (&mu_e).into(),
            (&mu_f).into(),
            (&deficit).into(),
            deficit.to_f64().into(),
            bound.to_f64().into(),
        ]);
    }
    Ok(Outcome {
        summary: json!({ "rows": t.rows.len() }),
        tables: vec![t],
        ..Outcome::default()
    })
}

fn summary_table(report: &ExperimentReport) -> Table {
    let mut t = Table::new(
        "summary",
        &[
            "N",
            "S",
            "mean",
            "main_exact",
            "main_float",
            "variance",
            "abs_err_median",
            "abs_err_q90",
            "abs_err_max",
            "rel_err_median",
            "unresolved",
        ],
    );
    for c in &report.checkpoints {
        t.push(vec![
            c.n.into(),
            (c.samples as u64).into(),
            c.mean.into(),
            c.main_exact.as_ref().into(),
            c.main_float.into(),
            c.variance.into(),
            c.abs_err_median.into(),
            c.abs_err_q90.into(),
            c.abs_err_max.into(),
            c.rel_err_median.into(),
            c.unresolved.into(),
        ]);
    }
    t
}

/// Most point traces drawn in the R - Psi chart.
const MAX_TRACES: usize = 24;

fn charts(report: &ExperimentReport) -> Vec<(&'static str, LineChart)> {
    let main = match report.kind {
        EventKind::Recurrence => "Psi",
        EventKind::Target => "Phi",
    };
    let mut traces: Vec<Series> = report
        .records
        .iter()
        .take(MAX_TRACES)
        .map(|rec| {
            let pts = rec
                .counts
                .iter()
                .zip(&report.checkpoints)
                .map(|(c, s)| (c.n as f64, c.count as f64 - s.main_float))
                .collect();
            Series::new("", pts).faint()
        })
        .collect();
    let n = report.checkpoints.len();
    let mean_dev: Vec<(f64, f64)> = report
        .checkpoints
        .iter()
        .map(|c| (c.n as f64, c.mean - c.main_float))
        .collect();
    traces.push(Series::new("mean", mean_dev));
    traces.push(Series::new("zero", report.checkpoints.iter().map(|c| (c.n as f64, 0.0)).collect()).dashed());
    let deviation = LineChart {
        title: format!("R - {main} by checkpoint"),
        x_label: "N".into(),
        y_label: format!("R - {main}"),
        log_x: true,
        series: traces,
    };

    let shape = |psi: f64| psi.sqrt() * psi.max(1.0).ln().powf(1.5);
    let errors = LineChart {
        title: format!("|R - {main}| against the error shape"),
        x_label: main.into(),
        y_label: format!("|R - {main}|"),
        log_x: true,
        series: vec![
            Series::new(
                "median",
                report.checkpoints.iter().map(|c| (c.main_float, c.abs_err_median)).collect(),
            ),
            Series::new("q90", report.checkpoints.iter().map(|c| (c.main_float, c.abs_err_q90)).collect()),
            Series::new(
                "sqrt(x) ln(x)^1.5",
                (0..n)
                    .map(|j| {
                        let p = report.checkpoints[j].main_float;
                        (p, shape(p))
                    })
                    .collect(),
            )
            .dashed(),
        ],
    };
    vec![("r_minus_main", deviation), ("error_shape", errors)]
}

#[derive(Serialize)]
struct VarianceDoc<'a> {
    a: u64,
    b: u64,
    proxy_from: Option<u64>,
    #[serde(flatten)]
    estimate: &'a VarianceEstimate,
}

fn experiment(r: &Resolved, fit_only: bool) -> Result<Outcome, RunError> {
    let config = r.experiment();
    let report = run_experiment(&config)?;
    let th = r.config.thresholds;
    let fit = fit_error_exponent(&report, &r.fit_options());
    let mut out = Outcome::default();

    if fit_only {
        let fit = fit?;
        let mut t = Table::new("fit", &["status", "slope", "intercept", "band_lo", "band_hi", "checkpoints"]);
        match &fit {
            FitOutcome::Fitted(f) => t.push(vec![
                "fitted".into(),
                f.slope.into(),
                f.intercept.into(),
                f.band.0.into(),
                f.band.1.into(),
                (f.checkpoints_used as u64).into(),
            ]),
            FitOutcome::ZeroResidual => t.push(vec![
                "zero-residual".into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]),
        }
        out.tables.push(t);
        out.summary = json!({ "fit": fit });
        return Ok(out);
    }

    let last = report.last();
    let rel = last.rel_err_median;
    out.checks.push((
        format!("median relative error {rel:.4} <= {}", th.rel_err),
        rel <= th.rel_err,
    ));
    let cover = report.envelope_fraction(default_envelope);
    out.checks.push((
        format!("envelope coverage {:.4} >= {}", cover, th.envelope),
        cover >= th.envelope,
    ));
    let fit_value = match &fit {
        Ok(FitOutcome::Fitted(f)) => {
            out.checks.push((
                format!("slope band upper end {:.4} <= {}", f.band.1, th.slope_band),
                f.band.1 <= th.slope_band,
            ));
            json!(fit.as_ref().ok())
        }
        Ok(FitOutcome::ZeroResidual) => json!({ "status": "zero-residual" }),
        Err(e) => json!({ "status": "skipped", "reason": e.to_string() }),
    };

    let mut variance_value = Value::Null;
    if let Some(v) = r.config.variance {
        let inst = QbcInstance::recurrence(&r.map, &r.rate, v.a, v.b, r.config.oracle_cap)?;
        let est = variance_statistic(&retained_hits(&report)?, &inst);
        out.checks.push((
            format!("variance ratio {:.4} <= {}", est.ratio, th.variance_ratio),
            est.ratio <= th.variance_ratio,
        ));
        variance_value = serde_json::to_value(VarianceDoc {
            a: v.a,
            b: v.b,
            proxy_from: inst.proxy_from,
            estimate: &est,
        })
        .expect("plain values");
    }

    out.tables.push(summary_table(&report));
    out.tables.push(count_table(report.kind, &report.records));
    if r.config.keep_hits {
        out.tables.push(hits_table(&report.records));
    }
    out.documents.push((
        "report",
        json!({
            "report": report,
            "fit": fit_value,
            "variance": variance_value,
            "checks": out.checks.iter().map(|(c, ok)| json!({ "check": c, "pass": ok })).collect::<Vec<_>>(),
        }),
    ));
    out.summary = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "samples": report.samples,
        "final_N": last.n,
        "final_mean": last.mean,
        "final_main": last.main_float,
        "rel_err_median": rel,
        "envelope_coverage": cover,
        "unresolved_total": report.unresolved_total,
        "fit": fit_value,
        "variance": variance_value,
        "passed": out.passed(),
    });
    if r.config.output.svg {
        out.charts = charts(&report);
    }
    Ok(out)
}

fn dichotomy(r: &Resolved) -> Result<Outcome, RunError> {
    let th = r.config.thresholds;
    let mut config = r.experiment();
    config.keep_hits = true;
    let report = dichotomy_check(&config, th.psi_bound)?;
    let mut t = Table::new("dichotomy", &["point", "final_R"]);
    for (i, c) in report.final_counts.iter().enumerate() {
        t.push(vec![(i as u64).into(), (*c).into()]);
    }
    let mut out = Outcome {
        tables: vec![t],
        ..Outcome::default()
    };
    out.checks.push((
        format!("max final count {} <= {}", report.max_final_count, th.dichotomy_max),
        report.max_final_count <= th.dichotomy_max,
    ));
    out.summary = json!({
        "psi_total": report.psi_total,
        "samples": report.samples,
        "max_final_count": report.max_final_count,
        "max_last_hit": report.max_last_hit,
        "unresolved_total": report.unresolved_total,
        "passed": out.passed(),
    });
    out.documents.push(("dichotomy", serde_json::to_value(&report).expect("plain values")));
    Ok(out)
}

fn write(path: &Path, content: &str) -> Result<(), RunError> {
    fs::write(path, content).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Run metadata written next to the artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub report_schema_version: u32,
    pub library_version: &'static str,
    pub mode: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub artifacts: Vec<String>,
    pub summary: Value,
    pub config: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes tables, documents, charts and the manifest into `dir`.
pub fn persist(
    dir: &Path,
    r: &Resolved,
    out: &Outcome,
    format: Format,
    started_at: String,
) -> Result<Manifest, RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut artifacts = Vec::new();
    for t in &out.tables {
        let name = match format {
            Format::Csv => format!("{}.csv", t.name),
            Format::Json => format!("{}.json", t.name),
        };
        write(&dir.join(&name), &t.render(format))?;
        artifacts.push(name);
    }
    for (name, doc) in &out.documents {
        let file = format!("{name}.json");
        write(&dir.join(&file), &(serde_json::to_string_pretty(doc).expect("plain values") + "\n"))?;
        artifacts.push(file);
    }
    for (name, chart) in &out.charts {
        let file = format!("{name}.svg");
        write(&dir.join(&file), &chart.to_svg())?;
        artifacts.push(file);
    }
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        report_schema_version: REPORT_SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION"),
        mode: r.config.mode.to_string(),
        config_hash: r.config.hash(),
        started_at,
        finished_at: now(),
        threads: rayon::current_num_threads(),
        artifacts,
        summary: out.summary.clone(),
        config: crate::config::emit(&r.config),
    };
    write(
        &dir.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("plain values") + "\n"),
    )?;
    Ok(manifest)
}
