//! Files in and out: audio, manifests, event files, model containers,
//! feature tables, reports and the run configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{LinearModel, TrainSpec};
use crate::cochlea::CochleaConfig;
use crate::error::{Error, Result};
use crate::events::{AudEvent, ContextParams, EventStream};
use crate::feast::{FeastConfig, FeastModel, FeastNeuron};
use crate::features::FeatureConfig;
use crate::scalar::Scalar;
use crate::spikegen::LifConfig;

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Like [`write_atomic`] but streams through a buffered writer.
pub fn write_atomic_with<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = std::io::BufWriter::new(tmp);
    fill(&mut w)?;
    let tmp = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- audio

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub fs: u32,
    pub samples: Vec<f64>,
}

/// Reads 16-bit PCM mono; anything else is rejected.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            msg: format!("{} channels, only mono is accepted", spec.channels),
        });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            msg: format!(
                "{}-bit {:?} samples, only 16-bit PCM is accepted",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    Ok(Audio {
        fs: spec.sample_rate,
        samples,
    })
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedFormat {
            path: path.into(),
            msg: "compressed or otherwise unsupported encoding".into(),
        },
        other => Error::format(path, other.to_string()),
    }
}

/// Writes 16-bit PCM mono, clipping to the representable range.
pub fn write_wav(path: &Path, fs: u32, samples: &[f64]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec).map_err(|e| wav_error(path, e))?;
        for &s in samples {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v).map_err(|e| wav_error(path, e))?;
        }
        w.finalize().map_err(|e| wav_error(path, e))?;
    }
    write_atomic(path, buf.get_ref())
}

// ---------------------------------------------------------------- events

pub const EVENT_MAGIC: [u8; 4] = *b"AEVT";
pub const EVENT_VERSION: u16 = 1;
pub const EVENT_HEADER_LEN: usize = 20;
pub const EVENT_RECORD_LEN: usize = 12;

/// Header: magic, version u16, fs u32, n_channels u16, count u64.
/// Records: t u64, ch u16, id u8, reserved u8. All little-endian.
pub fn encode_events(stream: &EventStream) -> Result<Vec<u8>> {
    if let Err((i, msg)) = stream.check() {
        return Err(Error::Input(format!("event {i}: {msg}")));
    }
    let mut out = Vec::with_capacity(EVENT_HEADER_LEN + EVENT_RECORD_LEN * stream.len());
    out.extend_from_slice(&EVENT_MAGIC);
    out.extend_from_slice(&EVENT_VERSION.to_le_bytes());
    out.extend_from_slice(&stream.fs.to_le_bytes());
    out.extend_from_slice(&stream.n_channels.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.ch.to_le_bytes());
        out.push(e.id);
        out.push(0);
    }
    Ok(out)
}

pub fn decode_events(path: &Path, bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < EVENT_HEADER_LEN {
        return Err(Error::format(
            path,
            format!(
                "truncated header: file ends at byte offset {}, header needs {EVENT_HEADER_LEN} bytes",
                bytes.len()
            ),
        ));
    }
    if bytes[0..4] != EVENT_MAGIC {
        return Err(Error::format(path, "bad magic at byte offset 0, expected AEVT"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != EVENT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version as u32,
            supported: EVENT_VERSION as u32,
        });
    }
    let fs = u32_at(6);
    let n_channels = u16_at(10);
    let count = u64_at(12);
    let body = (bytes.len() - EVENT_HEADER_LEN) as u64;
    let expected = count.checked_mul(EVENT_RECORD_LEN as u64);
    match expected {
        Some(len) if len == body => {}
        Some(len) if len > body => {
            let whole = body / EVENT_RECORD_LEN as u64;
            let offset = EVENT_HEADER_LEN as u64 + whole * EVENT_RECORD_LEN as u64;
            return Err(Error::format(
                path,
                format!(
                    "truncated: header declares {count} events, record {whole} at byte offset {offset} is incomplete (file is {} bytes)",
                    bytes.len()
                ),
            ));
        }
        Some(len) => {
            return Err(Error::format(
                path,
                format!(
                    "{} trailing bytes after the last record, starting at byte offset {}",
                    body - len,
                    EVENT_HEADER_LEN as u64 + len
                ),
            ));
        }
        None => return Err(Error::format(path, format!("event count {count} at byte offset 12 overflows"))),
    }
    let mut events = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let o = EVENT_HEADER_LEN + i * EVENT_RECORD_LEN;
        events.push(AudEvent {
            t: u64_at(o),
            ch: u16_at(o + 8),
            id: bytes[o + 10],
        });
    }
    let stream = EventStream {
        fs,
        n_channels,
        label: None,
        events,
    };
    if let Err((i, msg)) = stream.check() {
        let offset = EVENT_HEADER_LEN + i * EVENT_RECORD_LEN;
        return Err(Error::format(path, format!("record {i} at byte offset {offset}: {msg}")));
    }
    Ok(stream)
}

pub fn write_events(path: &Path, stream: &EventStream) -> Result<()> {
    write_atomic(path, &encode_events(stream)?)
}

pub fn read_events(path: &Path) -> Result<EventStream> {
    decode_events(path, &read_bytes(path)?)
}

// ---------------------------------------------------------------- containers

pub const FEAST_MAGIC: [u8; 4] = *b"FMDL";
pub const LINEAR_MAGIC: [u8; 4] = *b"LMDL";
pub const MODEL_VERSION: u16 = 1;
const CONTAINER_HEADER_LEN: usize = 4 + 2 + 8 + 32;

/// Header: magic, version u16, payload length u64, SHA-256 of the payload;
/// then the JSON payload.
fn seal(magic: [u8; 4], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(CONTAINER_HEADER_LEN + payload.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(payload));
    out.extend_from_slice(payload);
    out
}

fn unseal<'a>(path: &Path, magic: [u8; 4], bytes: &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < CONTAINER_HEADER_LEN {
        return Err(Error::format(
            path,
            format!("truncated header: file ends at byte offset {}", bytes.len()),
        ));
    }
    if bytes[0..4] != magic {
        return Err(Error::format(
            path,
            format!("bad magic at byte offset 0, expected {}", String::from_utf8_lossy(&magic)),
        ));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version as u32,
            supported: MODEL_VERSION as u32,
        });
    }
    let len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let payload = &bytes[CONTAINER_HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(Error::format(
            path,
            format!(
                "payload at byte offset {CONTAINER_HEADER_LEN} is {} bytes, header declares {len}",
                payload.len()
            ),
        ));
    }
    if Sha256::digest(payload).as_slice() != &bytes[14..46] {
        return Err(Error::Checksum { path: path.into() });
    }
    Ok(payload)
}

#[derive(Serialize, Deserialize)]
struct NeuronRecord {
    weights: Vec<f64>,
    base_threshold: f64,
    wins: u64,
    miss_mark: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeastRecord {
    config: Option<PipelineConfig>,
    scale: usize,
    samples: usize,
    delta_i: f64,
    delta_e: f64,
    eta: f64,
    epochs: usize,
    seed: u64,
    clamp_thresholds: bool,
    renormalize_weights: bool,
    misses: u64,
    epochs_trained: usize,
    neurons: Vec<NeuronRecord>,
}

fn to_t<T: Scalar>(path: &Path, v: f64) -> Result<T> {
    T::from_f64(v).ok_or_else(|| Error::format(path, format!("value {v} not representable")))
}

pub fn encode_feast<T: Scalar>(model: &FeastModel<T>, config: Option<&PipelineConfig>) -> Result<Vec<u8>> {
    let rec = FeastRecord {
        config: config.cloned(),
        scale: model.scale,
        samples: model.samples,
        delta_i: model.delta_i.as_f64(),
        delta_e: model.delta_e.as_f64(),
        eta: model.eta.as_f64(),
        epochs: model.epochs,
        seed: model.seed,
        clamp_thresholds: model.clamp_thresholds,
        renormalize_weights: model.renormalize_weights,
        misses: model.misses,
        epochs_trained: model.epochs_trained,
        neurons: model
            .neurons
            .iter()
            .map(|n| NeuronRecord {
                weights: n.weights.iter().map(|w| w.as_f64()).collect(),
                base_threshold: n.base_threshold.as_f64(),
                wins: n.wins,
                miss_mark: n.miss_mark,
            })
            .collect(),
    };
    let payload = serde_json::to_vec(&rec).map_err(|e| Error::Input(format!("serialising model: {e}")))?;
    Ok(seal(FEAST_MAGIC, &payload))
}

/// Decodes a FEAST container; returns the model and its config snapshot.
pub fn decode_feast<T: Scalar>(path: &Path, bytes: &[u8]) -> Result<(FeastModel<T>, Option<PipelineConfig>)> {
    let payload = unseal(path, FEAST_MAGIC, bytes)?;
    let rec: FeastRecord = serde_json::from_slice(payload)
        .map_err(|e| Error::format(path, format!("model payload: {e}")))?;
    let dims = rec.scale * rec.samples;
    let mut neurons = Vec::with_capacity(rec.neurons.len());
    for (i, n) in rec.neurons.into_iter().enumerate() {
        if n.weights.len() != dims {
            return Err(Error::format(
                path,
                format!("neuron {i} has {} weights, expected {dims}", n.weights.len()),
            ));
        }
        neurons.push(FeastNeuron {
            weights: n.weights.iter().map(|&w| to_t(path, w)).collect::<Result<_>>()?,
            base_threshold: to_t(path, n.base_threshold)?,
            wins: n.wins,
            miss_mark: n.miss_mark,
        });
    }
    if neurons.is_empty() {
        return Err(Error::format(path, "model has no neurons"));
    }
    let model = FeastModel {
        scale: rec.scale,
        samples: rec.samples,
        delta_i: to_t(path, rec.delta_i)?,
        delta_e: to_t(path, rec.delta_e)?,
        eta: to_t(path, rec.eta)?,
        epochs: rec.epochs,
        seed: rec.seed,
        clamp_thresholds: rec.clamp_thresholds,
        renormalize_weights: rec.renormalize_weights,
        neurons,
        misses: rec.misses,
        epochs_trained: rec.epochs_trained,
    };
    Ok((model, rec.config))
}

pub fn save_feast<T: Scalar>(path: &Path, model: &FeastModel<T>, config: Option<&PipelineConfig>) -> Result<()> {
    write_atomic(path, &encode_feast(model, config)?)
}

pub fn load_feast<T: Scalar>(path: &Path) -> Result<(FeastModel<T>, Option<PipelineConfig>)> {
    decode_feast(path, &read_bytes(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearRecord<T> {
    config: Option<PipelineConfig>,
    columns: Vec<String>,
    model: LinearModel<T>,
}

/// A classifier together with the feature column names it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredClassifier<T> {
    pub model: LinearModel<T>,
    pub columns: Vec<String>,
    pub config: Option<PipelineConfig>,
}

pub fn encode_linear<T: Scalar + Serialize>(
    model: &LinearModel<T>,
    columns: &[String],
    config: Option<&PipelineConfig>,
) -> Result<Vec<u8>> {
    let rec = LinearRecord {
        config: config.cloned(),
        columns: columns.to_vec(),
        model: model.clone(),
    };
    let payload = serde_json::to_vec(&rec).map_err(|e| Error::Input(format!("serialising model: {e}")))?;
    Ok(seal(LINEAR_MAGIC, &payload))
}

pub fn decode_linear<T: Scalar + DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<StoredClassifier<T>> {
    let payload = unseal(path, LINEAR_MAGIC, bytes)?;
    let rec: LinearRecord<T> = serde_json::from_slice(payload)
        .map_err(|e| Error::format(path, format!("model payload: {e}")))?;
    rec.model
        .check()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if rec.columns.len() != rec.model.dims() {
        return Err(Error::format(path, "column list does not match model dimensions"));
    }
    Ok(StoredClassifier {
        model: rec.model,
        columns: rec.columns,
        config: rec.config,
    })
}

pub fn save_linear<T: Scalar + Serialize>(
    path: &Path,
    model: &LinearModel<T>,
    columns: &[String],
    config: Option<&PipelineConfig>,
) -> Result<()> {
    write_atomic(path, &encode_linear(model, columns, config)?)
}

pub fn load_linear<T: Scalar + DeserializeOwned>(path: &Path) -> Result<StoredClassifier<T>> {
    decode_linear(path, &read_bytes(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Input(format!("serialising {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| Error::format(path, e.to_string()))
}

// ---------------------------------------------------------------- config

/// Context geometry shared by every scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsConfig {
    pub k: usize,
    pub samples: usize,
    pub tau_ms: f64,
}

impl Default for EventsConfig {
    fn default() -> Self {
        Self {
            k: 4,
            samples: 32,
            tau_ms: 1.0,
        }
    }
}

impl EventsConfig {
    pub fn params<T: Scalar>(&self, fs: u32) -> Result<ContextParams<T>> {
        let p = ContextParams {
            k: self.k,
            samples: self.samples,
            tau: T::lit(fs as f64 * self.tau_ms * 1e-3),
        };
        p.validate()?;
        Ok(p)
    }
}

fn default_classes() -> Vec<String> {
    let mut c: Vec<String> = (0..10).map(|d| d.to_string()).collect();
    c.push("oh".into());
    c
}

fn default_scales() -> Vec<usize> {
    vec![5, 13, 25, 37]
}

/// Every tunable of the pipeline. Absent keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Context heights (channels) of the FEAST models; 1 is the 1-D model.
    pub scales: Vec<usize>,
    /// Labels a manifest may use.
    pub classes: Vec<String>,
    pub cochlea: CochleaConfig,
    pub lif: LifConfig,
    pub events: EventsConfig,
    pub feast: FeastConfig,
    pub features: FeatureConfig,
    pub classifier: TrainSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scales: default_scales(),
            classes: default_classes(),
            cochlea: CochleaConfig::default(),
            lif: LifConfig::default(),
            events: EventsConfig::default(),
            feast: FeastConfig::default(),
            features: FeatureConfig::default(),
            classifier: TrainSpec::default(),
        }
    }
}

impl PipelineConfig {
    /// Checks everything that does not depend on the sampling rate.
    pub fn validate(&self) -> Result<()> {
        self.cochlea.validate_static()?;
        self.lif.validate()?;
        self.feast.validate()?;
        self.features.validate()?;
        self.classifier.validate()?;
        if self.events.k == 0 {
            return Err(Error::config("events.k", "must be >= 1"));
        }
        if self.events.samples < 2 {
            return Err(Error::config("events.samples", "must be >= 2"));
        }
        if !(self.events.tau_ms > 0.0 && self.events.tau_ms.is_finite()) {
            return Err(Error::config("events.tau_ms", "must be positive"));
        }
        if self.scales.is_empty() {
            return Err(Error::config("scales", "at least one scale is required"));
        }
        let stream_channels = self.cochlea.n_channels * self.cochlea.n_ears;
        for (i, &s) in self.scales.iter().enumerate() {
            if s % 2 == 0 || s > stream_channels {
                return Err(Error::config(
                    format!("scales[{i}]"),
                    format!("{s} must be odd and at most {stream_channels}"),
                ));
            }
            if self.scales[..i].contains(&s) {
                return Err(Error::config(format!("scales[{i}]"), format!("{s} is repeated")));
            }
        }
        if self.classes.len() < 2 {
            return Err(Error::config("classes", "at least two classes are required"));
        }
        Ok(())
    }

    pub fn fac_mode(&self) -> &'static str {
        if self.cochlea.fac_enabled {
            "CAR-FAC"
        } else {
            "linear CAR"
        }
    }
}

pub fn parse_config(path: &Path, text: &str) -> Result<PipelineConfig> {
    let de = toml::Deserializer::new(text);
    let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::ConfigParse {
            path: path.into(),
            key: if key == "." { "<root>".into() } else { key },
            msg: e.into_inner().message().trim().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(path, &text)
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: PathBuf,
    pub label: String,
    pub split: Split,
    #[serde(default)]
    pub speaker: String,
}

/// Rows of `path,label,split,speaker`, with paths resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = (usize, &ManifestRow)> {
        self.rows.iter().enumerate().filter(move |(_, r)| r.split == split)
    }
}

pub fn load_manifest(path: &Path, classes: &[String]) -> Result<Manifest> {
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
        let line = i + 2;
        let mut row = rec.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        if !classes.contains(&row.label) {
            return Err(Error::format(
                path,
                format!("line {line}: label `{}` is not in the configured classes", row.label),
            ));
        }
        if row.path.is_relative() {
            row.path = base.join(&row.path);
        }
        if !row.path.is_file() {
            return Err(Error::format(
                path,
                format!("line {line}: audio file {} does not exist", row.path.display()),
            ));
        }
        rows.push(row);
    }
    let m = Manifest { rows };
    for split in [Split::Train, Split::Test] {
        if m.split(split).next().is_none() {
            return Err(Error::format(path, format!("no {split:?} rows").to_lowercase()));
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------- feature tables

/// A feature CSV as read back: `id,label,<columns...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
        return Err(Error::format(path, "header must start with `id,label`"));
    }
    let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let (mut ids, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        ids.push(rec[0].to_string());
        labels.push(rec[1].to_string());
        let values = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("line {line}, column {}: `{v}` is not a number", columns[j]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(FeatureTable {
        columns,
        ids,
        labels,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_paper_scales() {
        let cfg = parse_config(Path::new("x.toml"), "").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.scales, vec![5, 13, 25, 37]);
        assert_eq!(cfg.cochlea.fs, None);
    }

    #[test]
    fn config_errors_name_keys() {
        match parse_config(Path::new("x.toml"), "[feast]\ndelta_i = -1.0\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "feast.delta_i"),
            other => panic!("{other:?}"),
        }
        match parse_config(Path::new("x.toml"), "[cochlea]\nbogus = 1\n") {
            Err(Error::ConfigParse { key, .. }) => assert!(key.starts_with("cochlea"), "{key}"),
            other => panic!("{other:?}"),
        }
        match parse_config(Path::new("x.toml"), "[events]\nk = \"four\"\n") {
            Err(Error::ConfigParse { key, .. }) => assert_eq!(key, "events.k"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config(Path::new("x.toml"), "scales = [4]\n"),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn event_header_layout() {
        let mut s = EventStream::new(16_000, 64);
        s.events.push(AudEvent { t: 7, ch: 3, id: 1 });
        let b = encode_events(&s).unwrap();
        assert_eq!(b.len(), 32);
        assert_eq!(&b[0..4], b"AEVT");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &16_000u32.to_le_bytes());
        assert_eq!(&b[12..20], &1u64.to_le_bytes());
        assert_eq!(&b[20..32], &[7, 0, 0, 0, 0, 0, 0, 0, 3, 0, 1, 0]);
    }
}
