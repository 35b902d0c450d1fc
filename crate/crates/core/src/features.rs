//! Fixed time binning of spike streams into dense feature vectors.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Time bins per utterance.
    pub bins: usize,
    /// Bin counts tried by the pipeline; the one with the best validation
    /// accuracy is kept. Empty means `[bins]`.
    pub bin_sweep: Vec<usize>,
    /// L2-normalise each assembled vector.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bins: 4,
            bin_sweep: vec![2, 4, 8],
            normalize: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::config("features.bins", "must be >= 1"));
        }
        if self.bin_sweep.contains(&0) {
            return Err(Error::config("features.bin_sweep", "bin counts must be >= 1"));
        }
        Ok(())
    }

    pub fn sweep(&self) -> Vec<usize> {
        if self.bin_sweep.is_empty() {
            vec![self.bins]
        } else {
            self.bin_sweep.clone()
        }
    }
}

/// A spike to be binned: time, channel, neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinEvent {
    pub t: u64,
    pub ch: u16,
    pub neuron: u16,
}

/// Counts indexed (neuron, channel, bin).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTensor {
    pub neurons: usize,
    pub channels: usize,
    pub bins: usize,
    pub counts: Vec<u32>,
}

impl CountTensor {
    pub fn get(&self, neuron: usize, ch: usize, bin: usize) -> u32 {
        self.counts[(neuron * self.channels + ch) * self.bins + bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Bin `b` covers `[b * duration / bins, (b + 1) * duration / bins)`; the
/// last bin is closed on the right.
pub fn bin_index(t: u64, duration: u64, bins: usize) -> usize {
    let b = (t as u128 * bins as u128 / duration as u128) as usize;
    b.min(bins - 1)
}

pub fn time_bin(
    events: impl IntoIterator<Item = BinEvent>,
    duration: u64,
    neurons: usize,
    channels: usize,
    bins: usize,
) -> Result<CountTensor> {
    if duration == 0 {
        return Err(Error::Input("duration must be positive".into()));
    }
    if bins == 0 {
        return Err(Error::Input("need at least one bin".into()));
    }
    let mut counts = vec![0u32; neurons * channels * bins];
    for e in events {
        if e.t > duration {
            return Err(Error::Input(format!(
                "event at t = {} beyond duration {duration}",
                e.t
            )));
        }
        let (n, c) = (e.neuron as usize, e.ch as usize);
        if n >= neurons || c >= channels {
            return Err(Error::Input(format!(
                "event (neuron {n}, channel {c}) outside {neurons} x {channels}"
            )));
        }
        counts[(n * channels + c) * bins + bin_index(e.t, duration, bins)] += 1;
    }
    Ok(CountTensor {
        neurons,
        channels,
        bins,
        counts,
    })
}

/// Which stream a block of the feature vector came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockSource {
    /// Raw cochlear spikes.
    Raw,
    /// FEAST feature maps at a context scale.
    Scale(usize),
}

impl BlockSource {
    pub fn tag(&self) -> String {
        match self {
            BlockSource::Raw => "raw".to_string(),
            BlockSource::Scale(s) => format!("s{s}"),
        }
    }
}

/// Layout of one block of the feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub source: BlockSource,
    pub neurons: usize,
    pub channels: usize,
    pub bins: usize,
}

impl BlockLayout {
    pub fn len(&self) -> usize {
        self.neurons * self.channels * self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A labelled, flattened feature vector with layout
/// [block][neuron][channel][bin], blocks in ascending source order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub label: String,
    pub values: Vec<T>,
    pub layout: Vec<BlockLayout>,
}

impl<T> FeatureVector<T> {
    pub fn dims(&self) -> usize {
        self.values.len()
    }
}

/// Column names: `<source>_n<neuron>_c<channel>_b<bin>`.
pub fn column_names(layout: &[BlockLayout]) -> Vec<String> {
    let mut names = Vec::new();
    for b in layout {
        let tag = b.source.tag();
        for n in 0..b.neurons {
            for c in 0..b.channels {
                for k in 0..b.bins {
                    names.push(format!("{tag}_n{n}_c{c}_b{k}"));
                }
            }
        }
    }
    names
}

/// Concatenates per-source count tensors in ascending source order and
/// optionally L2-normalises the result.
pub fn assemble<T: Scalar>(
    label: &str,
    blocks: &[(BlockSource, CountTensor)],
    normalize: bool,
) -> Result<FeatureVector<T>> {
    if blocks.is_empty() {
        return Err(Error::Input("no feature blocks".into()));
    }
    let mut sorted: Vec<&(BlockSource, CountTensor)> = blocks.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Input("duplicate feature block source".into()));
    }
    let (channels, bins) = (sorted[0].1.channels, sorted[0].1.bins);
    let mut values = Vec::new();
    let mut layout = Vec::new();
    for (source, t) in sorted {
        if t.channels != channels || t.bins != bins {
            return Err(Error::Input(format!(
                "block {} has {} channels x {} bins, expected {channels} x {bins}",
                source.tag(),
                t.channels,
                t.bins
            )));
        }
        if t.counts.len() != t.neurons * t.channels * t.bins {
            return Err(Error::Input(format!("block {} has inconsistent size", source.tag())));
        }
        values.extend(t.counts.iter().map(|&c| T::from_u64_lossy(c as u64)));
        layout.push(BlockLayout {
            source: source.clone(),
            neurons: t.neurons,
            channels: t.channels,
            bins: t.bins,
        });
    }
    if normalize {
        let norm = crate::scalar::l2_norm(&values);
        if norm > T::zero() {
            values.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(FeatureVector {
        label: label.to_string(),
        values,
        layout,
    })
}

/// Streams feature vectors as CSV rows `id,label,<columns...>`.
pub struct FeatureCsvWriter<W: Write> {
    inner: csv::Writer<W>,
    layout: Vec<BlockLayout>,
}

impl<W: Write> FeatureCsvWriter<W> {
    /// Writes the header for `layout`.
    pub fn new(out: W, layout: &[BlockLayout]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(column_names(layout));
        inner.write_record(&header).map_err(csv_err)?;
        Ok(Self {
            inner,
            layout: layout.to_vec(),
        })
    }

    pub fn write_row<T: Scalar>(&mut self, id: &str, fv: &FeatureVector<T>) -> Result<()> {
        if fv.layout != self.layout {
            return Err(Error::Input(format!("row {id} has a different feature layout")));
        }
        let mut rec = Vec::with_capacity(fv.values.len() + 2);
        rec.push(id.to_string());
        rec.push(fv.label.clone());
        rec.extend(fv.values.iter().map(|v| format!("{}", v.as_f64())));
        self.inner.write_record(&rec).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<csv>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Input(format!("csv: {}", e.error())))
    }
}

/// Writes all `rows` (id, vector) with the first row's layout.
pub fn write_feature_csv<T: Scalar, W: Write>(
    out: W,
    rows: &[(String, FeatureVector<T>)],
) -> Result<()> {
    let layout = rows.first().map(|r| r.1.layout.clone()).unwrap_or_default();
    let mut w = FeatureCsvWriter::new(out, &layout)?;
    for (id, fv) in rows {
        w.write_row(id, fv)?;
    }
    w.finish()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}
