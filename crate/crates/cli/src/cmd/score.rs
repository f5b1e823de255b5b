use anyhow::Context;
use audiotok::metrics::{self, BleuReport, WerReport};
use serde::{Deserialize, Serialize};

use crate::{inputs, report, usage, CliError, CliResult, Metric, ScoreArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerOutput {
    pub metric: String,
    pub utterances: usize,
    #[serde(flatten)]
    pub pooled: WerReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_mean_wer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuOutput {
    pub metric: String,
    pub utterances: usize,
    #[serde(flatten)]
    pub report: BleuReport,
}

fn prepare(tokens: Vec<String>, args: &ScoreArgs) -> Vec<String> {
    let tokens = if args.normalize { metrics::normalize_tokens(&tokens) } else { tokens };
    if args.zh_char_split {
        metrics::char_tokens(&tokens)
    } else {
        tokens
    }
}

pub fn run(args: &ScoreArgs) -> CliResult {
    if args.max_n == 0 {
        return Err(usage("--max-n must be at least 1"));
    }
    let refs = inputs::load_utterances(&args.refs)?;
    let hyps = inputs::load_utterances(&args.hyps)?;
    let pairs: Vec<(Vec<String>, Vec<String>)> = metrics::pair_by_id(&refs, &hyps)
        .context("pairing references with hypotheses")?
        .into_iter()
        .map(|(r, h)| (prepare(r, args), prepare(h, args)))
        .collect();
    let w = report::sink(args.out.as_deref())?;
    match args.metric {
        Metric::Wer => {
            let pooled = metrics::corpus_wer(&pairs).map_err(|e| CliError::Failed(e.into()))?;
            let utterance_mean_wer = if args.both_aggregations {
                Some(metrics::mean_utterance_wer(&pairs).map_err(|e| CliError::Failed(e.into()))?)
            } else {
                None
            };
            let out = WerOutput {
                metric: "wer".into(),
                utterances: pairs.len(),
                pooled,
                utterance_mean_wer,
            };
            report::write_report(&out, args.report_format, w)?;
        }
        Metric::Bleu => {
            let rep = metrics::corpus_bleu(&pairs, args.max_n).map_err(|e| CliError::Failed(e.into()))?;
            let out = BleuOutput {
                metric: "bleu".into(),
                utterances: pairs.len(),
                report: rep,
            };
            report::write_report(&out, args.report_format, w)?;
        }
    }
    Ok(())
}
