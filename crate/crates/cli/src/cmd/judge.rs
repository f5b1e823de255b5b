use std::time::Duration;

use anyhow::{anyhow, Context};
use audiotok::metrics;
use audiotok_judge::{write_jsonl, JudgeClient, JudgeConfig, JudgePair};

use crate::{inputs, report, CliError, CliResult, JudgeArgs};

pub fn config_from(args: &JudgeArgs) -> CliResult<JudgeConfig> {
    let mut cfg = JudgeConfig::from_env().map_err(|e| CliError::Usage(e.into()))?;
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    if let Some(p) = &args.prompt_file {
        cfg.prompt_template = std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(CliError::Usage)?;
    }
    cfg.timeout = Duration::from_secs(args.timeout_secs);
    cfg.max_retries = args.max_retries;
    cfg.backoff_base = Duration::from_millis(args.backoff_ms);
    cfg.max_in_flight = args.max_in_flight;
    cfg.validate().map_err(|e| CliError::Usage(e.into()))?;
    Ok(cfg)
}

pub fn run(args: &JudgeArgs) -> CliResult {
    // Config problems surface before any file or network work.
    let cfg = config_from(args)?;
    let refs = inputs::load_utterances(&args.refs)?;
    let hyps = inputs::load_utterances(&args.hyps)?;
    metrics::pair_by_id(&refs, &hyps).context("pairing references with hypotheses")?;
    let by_id: std::collections::HashMap<&str, &audiotok::Utterance> =
        hyps.iter().map(|u| (u.id.as_str(), u)).collect();
    let pairs: Vec<JudgePair> = refs
        .iter()
        .map(|r| JudgePair::new(r.id.clone(), by_id[r.id.as_str()].tokens.join(" "), r.tokens.join(" ")))
        .collect();

    let client = JudgeClient::new(cfg).map_err(|e| CliError::Usage(e.into()))?;
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    let result = rt.block_on(client.judge_corpus(&pairs));
    let w = report::sink(Some(&args.out))?;
    match result {
        Ok(done) => {
            write_jsonl(&done.per_pair, Some(&done.summary), w).context("writing judge results")?;
            println!(
                "{} pairs: meaning {:.3}, readability {:.3}, mpn {:.3}",
                done.summary.count, done.summary.meaning, done.summary.readability, done.summary.mpn
            );
            Ok(())
        }
        Err(fail) => {
            write_jsonl(&fail.completed, None, w).context("writing partial judge results")?;
            Err(CliError::Failed(anyhow!(
                "{fail}; {} completed results written to {}",
                fail.completed.len(),
                args.out.display()
            )))
        }
    }
}
