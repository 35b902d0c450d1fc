//! Synthetic spoken-digit stand-in: harmonic tones with per-speaker pitch
//! and level offsets, written as 16-bit WAV files plus a manifest.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cochlea_feast::io::write_wav;

pub const FS: u32 = 8_000;

pub const SMALL_CONFIG: &str = "\
scales = [1, 5]

[cochlea]
n_channels = 32

[feast]
neurons = 8
epochs = 2
max_training_contexts = 2000

[features]
bin_sweep = [2, 4]

[classifier]
epochs = 5
";

fn utterance(label: usize, speaker: usize) -> Vec<f64> {
    let base = [400.0, 1400.0][label] * (1.0 + 0.03 * (speaker as f64 - 2.0));
    let level = 0.2 + 0.05 * speaker as f64;
    let n = 2_400;
    (0..n)
        .map(|i| {
            let t = i as f64 / FS as f64;
            let env = (PI * i as f64 / n as f64).sin();
            let tone = (2.0 * PI * base * t).sin() + 0.4 * (2.0 * PI * 2.0 * base * t).sin();
            level * env * tone / 1.4
        })
        .collect()
}

/// Writes 20 utterances (2 classes x 5 speakers x 2 takes) and a manifest;
/// speakers 0-3 train, speaker 4 tests. Returns the manifest path.
pub fn make_fixture(dir: &Path) -> PathBuf {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).unwrap();
    let mut manifest = String::from("path,label,split,speaker\n");
    for speaker in 0..5 {
        for take in 0..2 {
            for label in 0..2 {
                let name = format!("s{speaker}_t{take}_d{label}.wav");
                let mut x = utterance(label, speaker);
                if take == 1 {
                    x.iter_mut().for_each(|v| *v *= 0.8);
                }
                write_wav(&wav_dir.join(&name), FS, &x).unwrap();
                let split = if speaker == 4 { "test" } else { "train" };
                manifest.push_str(&format!("wav/{name},{label},{split},spk{speaker}\n"));
            }
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{SMALL_CONFIG}{extra}")).unwrap();
    path
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cochlea-feast")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn cochlea-feast")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Relative path to file contents for every file below `root`.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Names of files that differ between two trees (including missing ones).
pub fn tree_diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
