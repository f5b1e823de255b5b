//! Input discovery and loading.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use audiotok::featio::{self, FeatureSequence, Utterance};
use audiotok::melfront::{self, MelConfig, MelFrontend};

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Expands directories (recursively) to the files with one of `exts`.
/// Paths named directly are kept whatever their extension. The result is
/// sorted and de-duplicated.
pub fn collect(paths: &[PathBuf], exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, exts, &mut out)?;
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn walk(dir: &Path, exts: &[&str], out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, exts, out)?;
        } else if has_ext(&path, exts) {
            out.push(path);
        }
    }
    Ok(())
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn is_wav(path: &Path) -> bool {
    has_ext(path, &["wav"])
}

/// Reads an ATCF file, or runs a WAV file through the default mel front end.
pub fn load_features(path: &Path) -> Result<FeatureSequence> {
    let seq = if is_wav(path) {
        let audio = melfront::read_wav(path)?;
        MelFrontend::new(MelConfig::default())?.features(&audio)?
    } else {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        featio::read_features(BufReader::new(f))?
    };
    Ok(seq.with_source_id(stem(path)))
}

pub fn load_utterances(path: &Path) -> Result<Vec<Utterance>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    featio::read_utterances(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_atcf(seq: &FeatureSequence, path: &Path) -> Result<u64> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(featio::write_features(seq, std::io::BufWriter::new(f))?)
}
