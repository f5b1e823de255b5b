use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use audiotok::compress::{CompressionOutcome, Compressor, OutcomeSummary};
use audiotok::corpus::CorpusAccounting;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{inputs, report, usage, CliError, CliResult, CompressArgs, ReportFormat};

/// Report file name inside the output directory, by format.
pub fn report_name(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Json => "report.json",
        ReportFormat::Csv => "report.csv",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accounting: Option<OutcomeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressReport {
    pub compressor: String,
    pub files: Vec<FileEntry>,
    /// Absent when every file failed.
    pub aggregate: Option<CorpusAccounting>,
}

/// Flat CSV row; the last row has path `TOTAL` and carries the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub path: String,
    pub status: String,
    pub input_tokens: Option<usize>,
    pub output_tokens: Option<usize>,
    pub compression_factor: Option<f64>,
    pub input_rate: Option<f64>,
    pub output_rate: Option<f64>,
    pub error: Option<String>,
}

impl CompressReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows: Vec<CsvRow> = self
            .files
            .iter()
            .map(|f| CsvRow {
                path: f.path.clone(),
                status: if f.error.is_some() { "error" } else { "ok" }.into(),
                input_tokens: f.accounting.as_ref().map(|a| a.input_tokens),
                output_tokens: f.accounting.as_ref().map(|a| a.output_tokens),
                compression_factor: f.accounting.as_ref().map(|a| a.compression_factor),
                input_rate: f.accounting.as_ref().map(|a| a.input_rate),
                output_rate: f.accounting.as_ref().map(|a| a.output_rate),
                error: f.error.clone(),
            })
            .collect();
        if let Some(a) = &self.aggregate {
            rows.push(CsvRow {
                path: "TOTAL".into(),
                status: "ok".into(),
                input_tokens: Some(a.input_tokens),
                output_tokens: Some(a.output_tokens),
                compression_factor: Some(a.compression_factor),
                input_rate: Some(a.input_rate),
                output_rate: Some(a.output_rate),
                error: None,
            });
        }
        rows
    }
}

fn compress_one(path: &Path, compressor: &Compressor, out_path: &Path) -> anyhow::Result<CompressionOutcome> {
    let seq = inputs::load_features(path)?;
    let outcome = compressor.apply(&seq)?;
    inputs::write_atcf(&outcome.compressed, out_path)?;
    Ok(outcome)
}

pub fn run(args: &CompressArgs) -> CliResult {
    let compressor = Compressor::from_parts(&args.compressor.to_ascii_lowercase(), args.k).map_err(usage)?;
    let files = inputs::collect(&args.inputs, &["atcf", "wav"]).map_err(CliError::Usage)?;
    if files.is_empty() {
        return Err(usage("no input files found"));
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut seen = HashSet::new();
    let targets: Vec<(PathBuf, Option<PathBuf>)> = files
        .into_iter()
        .map(|p| {
            let name = format!("{}.atcf", inputs::stem(&p));
            let out = seen.insert(name.clone()).then(|| args.out_dir.join(name));
            (p, out)
        })
        .collect();

    let results: Vec<(FileEntry, Option<CompressionOutcome>)> = targets
        .par_iter()
        .map(|(path, out)| {
            let res = match out {
                Some(out) => compress_one(path, &compressor, out),
                None => Err(anyhow!("another input already writes {}.atcf", inputs::stem(path))),
            };
            let path_str = path.display().to_string();
            match res {
                Ok(o) => (
                    FileEntry {
                        path: path_str,
                        output: out.as_ref().map(|p| p.display().to_string()),
                        error: None,
                        accounting: Some(o.summary(&compressor)),
                    },
                    Some(o),
                ),
                Err(e) => (
                    FileEntry {
                        path: path_str,
                        output: None,
                        error: Some(format!("{e:#}")),
                        accounting: None,
                    },
                    None,
                ),
            }
        })
        .collect();

    let failed = results.iter().filter(|(f, _)| f.error.is_some()).count();
    let aggregate = CorpusAccounting::from_outcomes(results.iter().filter_map(|(_, o)| o.as_ref()));
    let report = CompressReport {
        compressor: compressor.to_string(),
        files: results.into_iter().map(|(f, _)| f).collect(),
        aggregate,
    };
    let report_path = args.out_dir.join(report_name(args.report_format));
    let w = report::sink(Some(&report_path))?;
    match args.report_format {
        ReportFormat::Json => report::write_json(&report, w)?,
        ReportFormat::Csv => report::write_csv(&report.csv_rows(), w)?,
    }
    for f in report.files.iter().filter(|f| f.error.is_some()) {
        eprintln!("{}: {}", f.path, f.error.as_deref().unwrap_or_default());
    }
    if failed > 0 {
        return Err(CliError::Failed(anyhow!("{failed} of {} inputs failed", report.files.len())));
    }
    Ok(())
}
