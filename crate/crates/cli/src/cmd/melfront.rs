use anyhow::anyhow;
use audiotok::melfront::{self, MelConfig, MelFrontend};

use crate::{inputs, usage, CliError, CliResult, MelfrontArgs};

pub fn run(args: &MelfrontArgs) -> CliResult {
    let cfg = MelConfig {
        n_mels: args.n_mels,
        pool_rate: args.pool_rate,
        log_floor: args.log_floor,
        ..MelConfig::default()
    };
    let front = MelFrontend::new(cfg).map_err(usage)?;
    let files = inputs::collect(&args.inputs, &["wav"]).map_err(CliError::Usage)?;
    if files.is_empty() {
        return Err(usage("no WAV files found"));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Failed(e.into()))?;
    let mut failed = 0;
    for f in &files {
        let res = melfront::read_wav(f)
            .and_then(|audio| front.features(&audio))
            .map_err(anyhow::Error::from)
            .and_then(|seq| {
                let out = args.out_dir.join(format!("{}.atcf", inputs::stem(f)));
                inputs::write_atcf(&seq, &out)?;
                Ok((seq, out))
            });
        match res {
            Ok((seq, out)) => println!(
                "{} -> {} ({} frames x {} at {} Hz)",
                f.display(),
                out.display(),
                seq.len(),
                seq.dim(),
                seq.frame_rate()
            ),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e:#}", f.display());
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(anyhow!("{failed} of {} inputs failed", files.len())));
    }
    Ok(())
}
