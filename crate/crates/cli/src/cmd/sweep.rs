use anyhow::anyhow;
use audiotok::corpus::{self, SweepRow};
use audiotok::costmodel::{LlmShape, COST_TERMS};
use serde::{Deserialize, Serialize};

use crate::{inputs, report, usage, CliError, CliResult, ReportFormat, ShapeArgs, SweepArgs};

impl ShapeArgs {
    pub fn shape(&self) -> LlmShape {
        LlmShape::new(self.layers, self.d_model).with_text_tokens(self.text_tokens)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub cost_terms: String,
    pub shape: LlmShape,
    pub files: usize,
    pub skipped: Vec<String>,
    pub rows: Vec<SweepRow>,
}

pub fn run(args: &SweepArgs) -> CliResult {
    if args.factors.is_empty() {
        return Err(usage("--factors must not be empty"));
    }
    if args.factors.contains(&0) {
        return Err(usage("compression factors must be at least 1"));
    }
    let families: Vec<String> = args.families.iter().map(|f| f.to_ascii_lowercase()).collect();
    if let Some(bad) = families.iter().find(|f| !matches!(f.as_str(), "uniavg" | "unisamp")) {
        return Err(usage(format!("sweep family must be uniavg or unisamp, got `{bad}`")));
    }
    let files = inputs::collect(&args.inputs, &["atcf", "wav"]).map_err(CliError::Usage)?;
    if files.is_empty() {
        return Err(usage("no input files found"));
    }
    let mut seqs = Vec::with_capacity(files.len());
    let mut skipped = Vec::new();
    for f in &files {
        match inputs::load_features(f) {
            Ok(s) => seqs.push(s),
            Err(e) => {
                eprintln!("{}: {e:#}", f.display());
                skipped.push(f.display().to_string());
            }
        }
    }
    if seqs.is_empty() {
        return Err(CliError::Failed(anyhow!("all {} inputs failed", files.len())));
    }
    let fams: Vec<&str> = families.iter().map(String::as_str).collect();
    let shape = args.shape.shape();
    let rows = corpus::sweep(&seqs, &fams, &args.factors, &shape).map_err(|e| CliError::Failed(e.into()))?;
    let w = report::sink(args.out.as_deref())?;
    match args.report_format {
        ReportFormat::Csv => report::write_csv(&rows, w)?,
        ReportFormat::Json => report::write_json(
            &SweepReport {
                cost_terms: COST_TERMS.to_string(),
                shape,
                files: seqs.len(),
                skipped: skipped.clone(),
                rows,
            },
            w,
        )?,
    }
    if !skipped.is_empty() {
        return Err(CliError::Failed(anyhow!("{} of {} inputs failed", skipped.len(), files.len())));
    }
    Ok(())
}
