//! Grayscale images of cochleagrams, spike rasters, neuron weights and
//! feature maps.
//!
//! Every image is written three ways: a plain PGM (P2, maxval 255) scaled
//! so that 0 is black and the image maximum is white, a CSV of the raw
//! values, and a `.max.txt` sidecar holding that maximum. An all-zero image
//! is all black.
//!
//! Time runs left to right over `width` columns; rows are channels with
//! channel 0 (highest characteristic frequency) at the top.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cochlea_feast::cochlea::CarFac;
use cochlea_feast::error::{Error, Result};
use cochlea_feast::events::EventStream;
use cochlea_feast::feast::FeastModel;
use cochlea_feast::io::{self, PipelineConfig};

/// Row-major image of non-negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut f64 {
        &mut self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_pgm(&self) -> String {
        let max = self.max();
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    if max > 0.0 {
                        ((v / max) * 255.0).round().clamp(0.0, 255.0).to_string()
                    } else {
                        "0".to_string()
                    }
                })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Writes `<base>.pgm`, `<base>.csv` and `<base>.max.txt`.
    pub fn save(&self, base: &Path) -> Result<Vec<PathBuf>> {
        let with = |ext: &str| {
            let mut p = base.as_os_str().to_owned();
            p.push(ext);
            PathBuf::from(p)
        };
        let (pgm, csv, max) = (with(".pgm"), with(".csv"), with(".max.txt"));
        io::write_atomic(&pgm, self.to_pgm().as_bytes())?;
        io::write_atomic(&csv, self.to_csv().as_bytes())?;
        let mut m = String::new();
        writeln!(m, "{}", self.max()).expect("string write");
        io::write_atomic(&max, m.as_bytes())?;
        Ok(vec![pgm, csv, max])
    }
}

fn column(t: u64, duration: u64, width: usize) -> usize {
    ((t as u128 * width as u128 / duration.max(1) as u128) as usize).min(width - 1)
}

/// Mean inner-hair-cell output per (channel, column).
pub fn cochleagram(cfg: &PipelineConfig, wav: &Path, width: usize) -> Result<Image> {
    let audio = io::read_wav(wav)?;
    let cochlea = cfg.cochlea.with_sample_rate(audio.fs)?;
    cochlea.validate()?;
    let car = CarFac::<f64>::new(&cochlea)?;
    let n = car.n_channels();
    let mut img = Image::zeros(width, n);
    let mut hits = vec![0usize; width];
    let len = audio.samples.len() as u64;
    car.run(&audio.samples, |t, _, ihc| {
        let x = column(t as u64, len, width);
        hits[x] += 1;
        for (ch, &v) in ihc.iter().enumerate() {
            *img.at_mut(x, ch) += v.max(0.0);
        }
    })?;
    for y in 0..n {
        for (x, &h) in hits.iter().enumerate() {
            if h > 0 {
                *img.at_mut(x, y) /= h as f64;
            }
        }
    }
    Ok(img)
}

fn stream_duration(stream: &EventStream, duration: Option<u64>) -> u64 {
    duration.unwrap_or_else(|| stream.events.last().map_or(1, |e| e.t + 1))
}

/// Spike counts per (channel, column); `n_channels` rows.
pub fn raster(stream: &EventStream, width: usize, duration: Option<u64>) -> Image {
    let d = stream_duration(stream, duration);
    let mut img = Image::zeros(width, stream.n_channels as usize);
    for e in &stream.events {
        *img.at_mut(column(e.t, d, width), e.ch as usize) += 1.0;
    }
    img
}

/// Latest winning neuron per (channel, column), stored as neuron id + 1 so
/// that empty cells stay black.
pub fn feature_map(stream: &EventStream, width: usize, duration: Option<u64>) -> Image {
    let d = stream_duration(stream, duration);
    let mut img = Image::zeros(width, stream.n_channels as usize);
    for e in &stream.events {
        *img.at_mut(column(e.t, d, width), e.ch as usize) = e.id as f64 + 1.0;
    }
    img
}

/// Neuron weight matrices (`scale` rows by `samples` columns) tiled left to
/// right with a one-pixel black gap.
pub fn neuron_weights(model: &FeastModel<f64>) -> Image {
    let (h, w) = (model.scale, model.samples);
    let n = model.n_neurons();
    let width = n * w + n.saturating_sub(1);
    let mut img = Image::zeros(width.max(1), h);
    for (i, neuron) in model.neurons.iter().enumerate() {
        let x0 = i * (w + 1);
        for r in 0..h {
            for c in 0..w {
                *img.at_mut(x0 + c, r) = neuron.weights[r * w + c].max(0.0);
            }
        }
    }
    img
}

#[derive(Debug, Clone, Default)]
pub struct RenderRequest {
    pub wav: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub maps: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub width: usize,
    pub duration: Option<u64>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or("image".into(), |s| s.to_string_lossy().to_string())
}

/// Renders whatever inputs are given into `dir`; returns the files written.
pub fn render(cfg: &PipelineConfig, dir: &Path, req: &RenderRequest) -> Result<Vec<PathBuf>> {
    if req.width == 0 {
        return Err(Error::Usage("--width must be at least 1".into()));
    }
    let mut written = Vec::new();
    if let Some(wav) = &req.wav {
        let img = cochleagram(cfg, wav, req.width)?;
        written.extend(img.save(&dir.join(format!("cochleagram_{}", stem(wav))))?);
    }
    if let Some(ev) = &req.events {
        let stream = io::read_events(ev)?;
        let img = raster(&stream, req.width, req.duration);
        written.extend(img.save(&dir.join(format!("raster_{}", stem(ev))))?);
    }
    if let Some(m) = &req.maps {
        let stream = io::read_events(m)?;
        let img = feature_map(&stream, req.width, req.duration);
        written.extend(img.save(&dir.join(format!("featuremap_{}", stem(m))))?);
    }
    if let Some(m) = &req.model {
        let (model, _) = io::load_feast::<f64>(m)?;
        let img = neuron_weights(&model);
        written.extend(img.save(&dir.join(format!("weights_{}", stem(m))))?);
    }
    if written.is_empty() {
        return Err(Error::Usage(
            "nothing to render: pass --wav, --events, --maps or --model".into(),
        ));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stream_is_black() {
        let img = raster(&EventStream::new(16_000, 64), 512, None);
        let pgm = img.to_pgm();
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("512 64"));
        assert_eq!(lines.next(), Some("255"));
        assert!(lines.all(|l| l.split(' ').all(|v| v == "0")));
    }

    #[test]
    fn raster_counts() {
        let mut s = EventStream::new(16_000, 2);
        s.events.push(cochlea_feast::AudEvent { t: 0, ch: 1, id: 0 });
        s.events.push(cochlea_feast::AudEvent { t: 99, ch: 1, id: 0 });
        let img = raster(&s, 4, Some(100));
        assert_eq!(img.values, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(img.to_pgm().ends_with("255 0 0 255\n"));
    }
}
