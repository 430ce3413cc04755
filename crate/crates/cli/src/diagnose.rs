//! `diagnose`: cosine histogram from training logs and covariance trace of a
//! gradient stream.

use std::path::{Path, PathBuf};

use camegrad::diagnostics::{
    covariance_trace, kappa_scaling_check, trace_csv, TraceMonitor, DEFAULT_BINS,
    DEFAULT_TRACE_WINDOW,
};
use camegrad::{ConflictStats, GradVec};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::{read_file, to_json, write_file, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseOptions {
    pub logs: Vec<PathBuf>,
    /// Text file with one gradient sample per line.
    pub stream: Option<PathBuf>,
    pub kappa: Option<f64>,
    pub window: usize,
    pub bins: usize,
    pub output_dir: PathBuf,
}

impl DiagnoseOptions {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            logs: Vec::new(),
            stream: None,
            kappa: None,
            window: DEFAULT_TRACE_WINDOW,
            bins: DEFAULT_BINS,
            output_dir: output_dir.into(),
        }
    }
}

fn schema_error(path: &Path, msg: String) -> CliError {
    CliError::Parse(format!("{}: {msg}", path.display()))
}

/// Index of the `min_cosine` column after checking the training-log header.
fn check_header(path: &Path, header: &csv::StringRecord) -> Result<usize> {
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 7 {
        return Err(schema_error(
            path,
            format!("expected at least 7 columns, found {n}"),
        ));
    }
    let tasks = n - 6;
    let mut expected = vec!["step".to_string(), "strategy".into(), "seed".into()];
    expected.extend((0..tasks).map(|t| format!("loss_{t}")));
    expected.extend([
        "joint_norm".into(),
        "min_cosine".into(),
        "negative_ratio".into(),
    ]);
    if let Some((i, (got, want))) = cols
        .iter()
        .zip(&expected)
        .enumerate()
        .find(|(_, (g, w))| *g != w)
    {
        return Err(schema_error(
            path,
            format!("column {} is `{got}`, expected `{want}`", i + 1),
        ));
    }
    Ok(n - 2)
}

fn log_stats(path: &Path, bins: usize) -> Result<ConflictStats> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| schema_error(path, e.to_string()))?
        .clone();
    let col = check_header(path, &header)?;
    let mut stats = ConflictStats::new(bins)?;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| schema_error(path, e.to_string()))?;
        let field = record.get(col).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        let c: f64 = field.parse().map_err(|_| {
            schema_error(
                path,
                format!("line {line}: min_cosine `{field}` is not a number"),
            )
        })?;
        stats
            .record_cosine(c)
            .map_err(|e| schema_error(path, format!("line {line}: {e}")))?;
    }
    Ok(stats)
}

/// Reads one sample per non-blank line, whitespace separated.
pub fn read_stream(path: &Path) -> Result<Vec<GradVec>> {
    let text = read_file(path)?;
    let mut samples: Vec<GradVec> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema_error(path, format!("line {}: {e}", i + 1)))?;
        if let Some(first) = samples.first() {
            if first.dim() != values.len() {
                return Err(schema_error(
                    path,
                    format!(
                        "line {}: {} values, expected {}",
                        i + 1,
                        values.len(),
                        first.dim()
                    ),
                ));
            }
        }
        samples.push(
            GradVec::new(values).map_err(|e| schema_error(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(samples)
}

fn stream_report(path: &Path, opts: &DiagnoseOptions) -> Result<Value> {
    let samples = read_stream(path)?;
    let full = covariance_trace(&samples)?;
    let window = opts.window.min(samples.len());
    let mut monitor = TraceMonitor::new(window)?;
    let mut series = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if let Some(t) = monitor.push(s.clone())? {
            series.push((i, t));
        }
    }
    let trace_path = opts.output_dir.join("trace.csv");
    write_file(&trace_path, &trace_csv(&series))?;
    let kappa_ratio = opts
        .kappa
        .map(|k| kappa_scaling_check(&samples, k))
        .transpose()?;
    Ok(json!({
        "samples": full.sample_count,
        "trace": full.trace,
        "window": window,
        "trace_csv": trace_path,
        "kappa": opts.kappa,
        "kappa_ratio": kappa_ratio,
    }))
}

/// Merges the `min_cosine` column of every log into one histogram written
/// to `histogram.csv`; with a stream, also writes the rolling trace to
/// `trace.csv`.
pub fn cmd_diagnose(opts: &DiagnoseOptions) -> Result<Outcome> {
    if opts.logs.is_empty() && opts.stream.is_none() {
        return Err(CliError::Invariant(
            "nothing to diagnose: pass log files or --stream".into(),
        ));
    }
    let mut report = serde_json::Map::new();
    if !opts.logs.is_empty() {
        let mut merged = ConflictStats::new(opts.bins)?;
        for path in &opts.logs {
            merged.merge(&log_stats(path, opts.bins)?)?;
        }
        let hist_path = opts.output_dir.join("histogram.csv");
        write_file(&hist_path, &merged.histogram_csv())?;
        report.insert("logs".into(), json!(opts.logs.len()));
        report.insert("pairs".into(), json!(merged.count()));
        report.insert("negative_count".into(), json!(merged.negative_count()));
        report.insert("negative_ratio".into(), json!(merged.negative_ratio().ok()));
        report.insert("histogram_csv".into(), json!(hist_path));
    }
    if let Some(stream) = &opts.stream {
        report.insert("stream".into(), stream_report(stream, opts)?);
    }
    Ok(Outcome::ok(to_json(&report)))
}
