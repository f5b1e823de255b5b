//! LLM-as-judge client.
//!
//! Each (prediction, reference) pair is sent as one chat-completion request;
//! the judge must answer with a JSON object holding `meaning`, `readability`
//! and `mpn` scores in `[1, 5]`. Corpus runs average the three scores.

use std::fmt;
use std::io::{self, Write};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "JUDGE_ENDPOINT";
pub const ENV_TOKEN: &str = "JUDGE_TOKEN";
pub const DEFAULT_PROMPT: &str = include_str!("../prompts/default.txt");
pub const METRICS: [&str; 3] = ["meaning", "readability", "mpn"];
pub const SCORE_RANGE: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
    #[error("invalid judge config: {0}")]
    Config(String),
    #[error("reference for `{0}` is empty")]
    EmptyReference(String),
    #[error("no pairs to judge")]
    NoPairs,
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("judge endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed judge response: {0}")]
    Malformed(String),
    #[error("judge response is missing `{0}`")]
    MissingKey(&'static str),
    #[error("{metric} score {value} outside [1, 5]")]
    OutOfRange { metric: &'static str, value: f64 },
}

/// Wraps the bearer token so it never shows up in `Debug` output.
#[derive(Clone)]
pub struct Token(String);

impl Token {
    pub fn new(token: impl Into<String>) -> Self {
        Self(token.into())
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Token(***)")
    }
}

#[derive(Debug, Clone)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub token: Token,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub prompt_template: String,
    /// Delay before the first retry; later retries multiply by `backoff_factor`.
    pub backoff_base: Duration,
    pub backoff_factor: f64,
    pub max_in_flight: usize,
}

impl JudgeConfig {
    pub fn new(endpoint: impl Into<String>, token: Token) -> Self {
        Self {
            endpoint: endpoint.into(),
            token,
            model: "gpt-4o-mini".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            prompt_template: DEFAULT_PROMPT.to_string(),
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2.0,
            max_in_flight: 4,
        }
    }

    /// Reads endpoint and token from `JUDGE_ENDPOINT` / `JUDGE_TOKEN`.
    pub fn from_env() -> Result<Self, JudgeError> {
        let endpoint = non_empty_env(ENV_ENDPOINT)?;
        let token = non_empty_env(ENV_TOKEN)?;
        Ok(Self::new(endpoint, Token::new(token)))
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.timeout.is_zero() {
            return Err(JudgeError::Config("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(JudgeError::Config("max_in_flight must be at least 1".into()));
        }
        if self.backoff_factor.is_nan() || self.backoff_factor < 1.0 {
            return Err(JudgeError::Config("backoff_factor must be >= 1".into()));
        }
        if reqwest::Url::parse(&self.endpoint).is_err() {
            return Err(JudgeError::Config(format!("bad endpoint URL `{}`", self.endpoint)));
        }
        Ok(())
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base.mul_f64(self.backoff_factor.powi(retry as i32))
    }
}

fn non_empty_env(name: &'static str) -> Result<String, JudgeError> {
    match std::env::var(name) {
        Ok(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(JudgeError::MissingEnv(name)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub utterance_id: String,
    pub meaning: f64,
    pub readability: f64,
    pub mpn: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgePair {
    pub id: String,
    pub prediction: String,
    pub reference: String,
}

impl JudgePair {
    pub fn new(id: impl Into<String>, prediction: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            prediction: prediction.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
}

/// Substitutes `{prediction}` and `{reference}` in one left-to-right pass,
/// so placeholder text inside the inputs is never expanded.
pub fn fill_template(template: &str, prediction: &str, reference: &str) -> String {
    let mut out = String::with_capacity(template.len() + prediction.len() + reference.len());
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{prediction}") {
            out.push_str(prediction);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{reference}") {
            out.push_str(reference);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

/// Request body for one pair. Identical inputs give identical bytes.
pub fn request_body(cfg: &JudgeConfig, prediction: &str, reference: &str) -> Vec<u8> {
    let req = ChatRequest {
        model: &cfg.model,
        messages: [ChatMessage {
            role: "user",
            content: fill_template(&cfg.prompt_template, prediction, reference),
        }],
    };
    serde_json::to_vec(&req).expect("chat request serializes")
}

/// Extracts the three scores from a judge response.
///
/// Accepts either the score object itself or a chat-completion envelope
/// whose first choice's message content contains the object, possibly
/// wrapped in surrounding text or a code fence.
pub fn parse_scores(body: &str, utterance_id: &str) -> Result<JudgeScores, JudgeError> {
    let value: Value = serde_json::from_str(body).map_err(|e| JudgeError::Malformed(e.to_string()))?;
    let object = match value.pointer("/choices/0/message/content") {
        Some(Value::String(content)) => extract_object(content)?,
        Some(other) => other.clone(),
        None => value,
    };
    let obj = object
        .as_object()
        .ok_or_else(|| JudgeError::Malformed("expected a JSON object".into()))?;
    let mut scores = [0.0; 3];
    for (slot, metric) in scores.iter_mut().zip(METRICS) {
        let v = obj.get(metric).ok_or(JudgeError::MissingKey(metric))?;
        let x = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .ok_or_else(|| JudgeError::Malformed(format!("`{metric}` is not a number")))?;
        if !(SCORE_RANGE.0..=SCORE_RANGE.1).contains(&x) {
            return Err(JudgeError::OutOfRange { metric, value: x });
        }
        *slot = x;
    }
    Ok(JudgeScores {
        utterance_id: utterance_id.to_string(),
        meaning: scores[0],
        readability: scores[1],
        mpn: scores[2],
    })
}

fn extract_object(content: &str) -> Result<Value, JudgeError> {
    let start = content.find('{');
    let end = content.rfind('}');
    match (start, end) {
        (Some(s), Some(e)) if s < e => {
            serde_json::from_str(&content[s..=e]).map_err(|e| JudgeError::Malformed(e.to_string()))
        }
        _ => Err(JudgeError::Malformed("no JSON object in message content".into())),
    }
}

/// Averages over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSummary {
    pub count: usize,
    pub meaning: f64,
    pub readability: f64,
    pub mpn: f64,
}

impl JudgeSummary {
    pub fn from_scores(scores: &[JudgeScores]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        let mean = |f: fn(&JudgeScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
        Some(Self {
            count: scores.len(),
            meaning: mean(|s| s.meaning),
            readability: mean(|s| s.readability),
            mpn: mean(|s| s.mpn),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusJudgement {
    /// Per-pair scores in input order.
    pub per_pair: Vec<JudgeScores>,
    pub summary: JudgeSummary,
}

/// A corpus run that stopped on a failing pair.
#[derive(Debug, Error)]
#[error("judging `{failed_id}` failed: {error}")]
pub struct CorpusFailure {
    /// Pairs scored before the failure, in input order.
    pub completed: Vec<JudgeScores>,
    pub failed_id: String,
    #[source]
    pub error: JudgeError,
}

pub struct JudgeClient {
    http: reqwest::Client,
    cfg: JudgeConfig,
}

impl JudgeClient {
    pub fn new(cfg: JudgeConfig) -> Result<Self, JudgeError> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| JudgeError::Config(e.to_string()))?;
        Ok(Self { http, cfg })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    async fn post_once(&self, body: &[u8]) -> Result<String, Attempt> {
        let resp = self
            .http
            .post(&self.cfg.endpoint)
            .bearer_auth(self.cfg.token.expose())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec())
            .send()
            .await
            .map_err(|e| Attempt::Retry(strip_url(e).to_string()))?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| Attempt::Retry(strip_url(e).to_string()))?;
        if status.is_success() {
            Ok(text)
        } else if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            Err(Attempt::Retry(format!("HTTP {status}")))
        } else {
            Err(Attempt::Fatal(JudgeError::Status {
                status: status.as_u16(),
                body: text,
            }))
        }
    }

    /// Scores one pair, retrying transport failures, 429 and 5xx responses.
    pub async fn judge_pair(&self, id: &str, prediction: &str, reference: &str) -> Result<JudgeScores, JudgeError> {
        if reference.trim().is_empty() {
            return Err(JudgeError::EmptyReference(id.to_string()));
        }
        let body = request_body(&self.cfg, prediction, reference);
        let mut attempt = 0;
        loop {
            match self.post_once(&body).await {
                Ok(text) => return parse_scores(&text, id),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempt >= self.cfg.max_retries {
                        return Err(JudgeError::Transport {
                            attempts: attempt + 1,
                            message,
                        });
                    }
                    tokio::time::sleep(self.cfg.backoff(attempt)).await;
                    attempt += 1;
                }
            }
        }
    }

    /// Scores every pair with at most `max_in_flight` concurrent requests.
    pub async fn judge_corpus(&self, pairs: &[JudgePair]) -> Result<CorpusJudgement, CorpusFailure> {
        if pairs.is_empty() {
            return Err(CorpusFailure {
                completed: Vec::new(),
                failed_id: String::new(),
                error: JudgeError::NoPairs,
            });
        }
        let mut results: Vec<Option<JudgeScores>> = vec![None; pairs.len()];
        let mut stream = stream::iter(pairs.iter().enumerate())
            .map(|(i, p)| async move { (i, self.judge_pair(&p.id, &p.prediction, &p.reference).await) })
            .buffer_unordered(self.cfg.max_in_flight);
        while let Some((i, res)) = stream.next().await {
            match res {
                Ok(scores) => results[i] = Some(scores),
                Err(error) => {
                    return Err(CorpusFailure {
                        completed: results.into_iter().flatten().collect(),
                        failed_id: pairs[i].id.clone(),
                        error,
                    })
                }
            }
        }
        let per_pair: Vec<JudgeScores> = results.into_iter().flatten().collect();
        let summary = JudgeSummary::from_scores(&per_pair).expect("non-empty corpus");
        Ok(CorpusJudgement { per_pair, summary })
    }
}

enum Attempt {
    Retry(String),
    Fatal(JudgeError),
}

fn strip_url(e: reqwest::Error) -> reqwest::Error {
    e.without_url()
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    summary: &'a JudgeSummary,
}

/// One JSON line per pair, then a `{"summary": ...}` line if given.
pub fn write_jsonl<W: Write>(per_pair: &[JudgeScores], summary: Option<&JudgeSummary>, mut sink: W) -> io::Result<()> {
    for s in per_pair {
        serde_json::to_writer(&mut sink, s)?;
        sink.write_all(b"\n")?;
    }
    if let Some(summary) = summary {
        serde_json::to_writer(&mut sink, &SummaryRecord { summary })?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
