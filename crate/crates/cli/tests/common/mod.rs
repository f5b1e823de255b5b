#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use audiotok::featio::{write_features, FeatureSequence};
use axum::body::Bytes;
use axum::extract::State;
use axum::routing::post;
use axum::Router;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_audiotok"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("JUDGE_ENDPOINT").env_remove("JUDGE_TOKEN").output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Writes a `t x 2` ATCF file whose frames never repeat direction.
pub fn write_ramp(path: &Path, t: usize, rate: f32) {
    let frames = (0..t).flat_map(|i| [1.0, i as f32 * 0.37 + 0.1]).collect();
    let seq = FeatureSequence::new(frames, 2, rate).unwrap();
    write_features(&seq, std::fs::File::create(path).unwrap()).unwrap();
}

pub fn write_seq(path: &Path, seq: &FeatureSequence) {
    write_features(seq, std::fs::File::create(path).unwrap()).unwrap();
}

/// Local judge endpoint; scores meaning 3 when the prompt contains
/// `PRED-B`, 5 otherwise.
pub struct MockJudge {
    pub addr: SocketAddr,
    pub hits: Arc<AtomicUsize>,
    _rt: tokio::runtime::Runtime,
}

impl MockJudge {
    pub fn start() -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_all()
            .build()
            .unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let state = hits.clone();
        let addr = rt.block_on(async move {
            let app = Router::new().route("/v1/chat", post(reply)).with_state(state);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let addr = listener.local_addr().unwrap();
            tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
            addr
        });
        Self { addr, hits, _rt: rt }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

async fn reply(State(hits): State<Arc<AtomicUsize>>, body: Bytes) -> String {
    hits.fetch_add(1, Ordering::SeqCst);
    let body = String::from_utf8_lossy(&body);
    let meaning = if body.contains("PRED-B") { 3 } else { 5 };
    let content = format!("{{\"meaning\": {meaning}, \"readability\": 5, \"mpn\": 5}}");
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}
