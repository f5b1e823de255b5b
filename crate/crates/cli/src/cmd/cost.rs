use audiotok::costmodel::{CostRow, LlmShape, COST_TERMS};
use serde::{Deserialize, Serialize};

use crate::{report, usage, CliError, CliResult, CostArgs, ReportFormat};

#[derive(Debug, Serialize, Deserialize)]
pub struct CostReport {
    pub cost_terms: String,
    pub shape: LlmShape,
    pub seconds: f64,
    pub rows: Vec<CostRow>,
}

pub fn run(args: &CostArgs) -> CliResult {
    if args.seconds.is_nan() || args.seconds <= 0.0 {
        return Err(usage("--seconds must be positive"));
    }
    let points: Vec<(usize, f64)> = if !args.rates.is_empty() {
        if args.rates.iter().any(|r| r.is_nan() || *r < 0.0) {
            return Err(usage("rates must be non-negative"));
        }
        args.rates
            .iter()
            .map(|&r| ((r * args.seconds).round() as usize, r))
            .collect()
    } else if !args.tokens.is_empty() {
        args.tokens.iter().map(|&t| (t, t as f64 / args.seconds)).collect()
    } else {
        return Err(usage("give --tokens or --rates"));
    };
    let shape = args.shape.shape();
    let baseline = points[0].0;
    let rows = points
        .iter()
        .map(|&(tokens, rate)| CostRow::new(baseline, tokens, rate, &shape))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.into()))?;
    let w = report::sink(None)?;
    match args.report_format {
        ReportFormat::Json => report::write_json(
            &CostReport {
                cost_terms: COST_TERMS.into(),
                shape,
                seconds: args.seconds,
                rows,
            },
            w,
        )?,
        ReportFormat::Csv => report::write_csv(&rows, w)?,
    }
    Ok(())
}
