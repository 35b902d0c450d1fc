//! Output directory layout and the utterance index.

use std::path::{Path, PathBuf};

use cochlea_feast::error::{Error, Result};
use cochlea_feast::io::{self, Split};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Derives a stage seed: the first 8 bytes (little-endian) of
/// SHA-256(`"{master}:{stage}:{scale}"`).
pub fn stage_seed(master: u64, stage: &str, scale: usize) -> u64 {
    let digest = Sha256::digest(format!("{master}:{stage}:{scale}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub wav: PathBuf,
    pub label: String,
    pub split: Split,
    pub speaker: String,
    pub fs: u32,
    /// Length in samples; the binning duration.
    pub samples: u64,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventIndex {
    pub mode: String,
    pub n_channels: u16,
    pub utterances: Vec<Utterance>,
}

impl EventIndex {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }
}

/// Paths under `--out`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("events").join("index.json")
    }

    pub fn events(&self, id: &str) -> PathBuf {
        self.root.join("events").join(format!("{id}.aevt"))
    }

    pub fn feast_model(&self, scale: usize) -> PathBuf {
        self.root.join("models").join(format!("feast_s{scale}.fmdl"))
    }

    pub fn feast_stats(&self, scale: usize) -> PathBuf {
        self.root.join("models").join(format!("feast_s{scale}.json"))
    }

    pub fn map(&self, scale: usize, id: &str) -> PathBuf {
        self.root.join("maps").join(format!("s{scale}")).join(format!("{id}.aevt"))
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn features(&self, set: &str, bins: usize, split: Split) -> PathBuf {
        let split = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        self.features_dir().join(format!("{set}_b{bins}_{split}.csv"))
    }

    pub fn classifiers_dir(&self) -> PathBuf {
        self.root.join("classifiers")
    }

    pub fn classifier(&self, set: &str, bins: usize) -> PathBuf {
        self.classifiers_dir().join(format!("{set}_b{bins}.lmdl"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    pub fn render_dir(&self) -> PathBuf {
        self.root.join("render")
    }

    pub fn load_index(&self) -> Result<EventIndex> {
        let path = self.index();
        if !path.is_file() {
            return Err(Error::Input(format!(
                "{} not found; run `encode` first",
                path.display()
            )));
        }
        io::read_json(&path)
    }
}

/// Splits `"{set}_b{bins}"` back into its parts.
pub fn parse_stem(stem: &str) -> Option<(String, usize)> {
    let (set, bins) = stem.rsplit_once("_b")?;
    Some((set.to_string(), bins.parse().ok()?))
}

/// `{set}_b{bins}` stems that have a file with `suffix` in `dir`, sorted.
pub fn list_stems(dir: &Path, suffix: &str) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).map_err(|e| Error::Io { path: dir.into(), source: e })? {
        let entry = entry.map_err(|e| Error::Io { path: dir.into(), source: e })?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(stem) = name.strip_suffix(suffix) {
            if let Some(p) = parse_stem(stem) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
