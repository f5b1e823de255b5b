use std::fs::File;
use std::io::BufReader;

use anyhow::anyhow;
use audiotok::featio::{read_header, HEADER_LEN};
use serde_json::json;

use crate::{CliError, CliResult, InfoArgs};

pub fn run(args: &InfoArgs) -> CliResult {
    let mut failed = 0;
    for path in &args.files {
        let header = File::open(path)
            .map_err(anyhow::Error::from)
            .and_then(|f| Ok(read_header(BufReader::new(f))?));
        match header {
            Ok(h) => {
                let duration = h.frames as f64 / h.frame_rate as f64;
                let bytes = HEADER_LEN as u64 + h.payload_len();
                if args.json {
                    println!(
                        "{}",
                        json!({
                            "path": path.display().to_string(),
                            "version": h.version,
                            "frames": h.frames,
                            "dim": h.dim,
                            "frame_rate": h.frame_rate,
                            "duration_secs": duration,
                            "expected_bytes": bytes,
                        })
                    );
                } else {
                    println!(
                        "{}: ATCF v{} T={} D={} rate={} Hz duration={:.3} s size={} B",
                        path.display(),
                        h.version,
                        h.frames,
                        h.dim,
                        h.frame_rate,
                        duration,
                        bytes
                    );
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(anyhow!("{failed} of {} files unreadable", args.files.len())));
    }
    Ok(())
}
