//! Feature extraction with adaptive selection thresholds.
//!
//! Each neuron holds a non-negative weight vector and a selection threshold.
//! While learning, the most similar neuron whose cosine similarity exceeds
//! its threshold wins: its threshold rises by `delta_i` and its weights move
//! towards the normalised context by the mixing rate `eta`. When no neuron
//! crosses its threshold every threshold drops by `delta_e`. After learning,
//! the winner is simply the most similar neuron.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{for_each_context, ContextParams, EventStream};
use crate::scalar::{dot, l2_norm, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeastConfig {
    /// Neurons per scale.
    pub neurons: usize,
    pub delta_i: f64,
    pub delta_e: f64,
    pub eta: f64,
    pub epochs: usize,
    /// Initial thresholds are drawn uniformly from (0, init_threshold_max).
    pub init_threshold_max: f64,
    /// Floor thresholds at zero after every decrease.
    pub clamp_thresholds: bool,
    /// Rescale the winner's weights to unit norm after every update.
    pub renormalize_weights: bool,
    /// Upper bound on training contexts per scale (0 = use all). Contexts are
    /// subsampled uniformly without replacement.
    pub max_training_contexts: usize,
}

impl Default for FeastConfig {
    fn default() -> Self {
        Self {
            neurons: 32,
            delta_i: 0.001,
            delta_e: 0.003,
            eta: 0.001,
            epochs: 10,
            init_threshold_max: 0.5,
            clamp_thresholds: false,
            renormalize_weights: false,
            max_training_contexts: 20_000,
        }
    }
}

impl FeastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons < 1 || self.neurons > 256 {
            return Err(Error::config("feast.neurons", "must lie in 1..=256"));
        }
        for (key, v) in [("feast.delta_i", self.delta_i), ("feast.delta_e", self.delta_e)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::config("feast.eta", "must lie in (0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("feast.epochs", "must be >= 1"));
        }
        if !(self.init_threshold_max > 0.0 && self.init_threshold_max.is_finite()) {
            return Err(Error::config("feast.init_threshold_max", "must be positive"));
        }
        Ok(())
    }
}

/// One competitive neuron.
///
/// The threshold is stored as a base value plus win/miss counters so that
/// `threshold = base + delta_i * wins - delta_e * misses` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeastNeuron<T> {
    pub weights: Vec<T>,
    pub base_threshold: T,
    /// Wins since the base was last set.
    pub wins: u64,
    /// Model miss count when the base was last set.
    pub miss_mark: u64,
}

/// Result of presenting one context while learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnOutcome {
    Winner(usize),
    /// No neuron crossed its threshold.
    Miss,
    /// Zero-norm context; nothing changed.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpochStats {
    pub wins: Vec<u64>,
    pub misses: u64,
}

/// Neurons for one context scale plus their learning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeastModel<T> {
    pub scale: usize,
    pub samples: usize,
    pub delta_i: T,
    pub delta_e: T,
    pub eta: T,
    pub epochs: usize,
    pub seed: u64,
    pub clamp_thresholds: bool,
    pub renormalize_weights: bool,
    pub neurons: Vec<FeastNeuron<T>>,
    /// Total no-winner presentations.
    pub misses: u64,
    pub epochs_trained: usize,
}

/// Cosine similarity of two non-negative vectors, clipped to [0, 1].
pub fn similarity<T: Scalar>(ec: &[T], w: &[T]) -> T {
    let denom = l2_norm(ec) * l2_norm(w);
    if denom <= T::zero() {
        return T::zero();
    }
    (dot(ec, w) / denom).max(T::zero()).min(T::one())
}

fn normalized<T: Scalar>(v: &[T]) -> Option<Vec<T>> {
    let n = l2_norm(v);
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    Some(v.iter().map(|&x| x / n).collect())
}

/// Argmax with ties resolved to the lowest index.
fn argmax<T: Scalar>(values: impl Iterator<Item = (usize, T)>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

impl<T: Scalar> FeastModel<T> {
    /// Random initial weights (uniform, then unit-normalised) and thresholds.
    pub fn new(cfg: &FeastConfig, scale: usize, samples: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if scale == 0 || scale % 2 == 0 {
            return Err(Error::config("scales", format!("scale {scale} must be odd")));
        }
        if samples < 2 {
            return Err(Error::config("events.samples", "must be >= 2"));
        }
        let dims = scale * samples;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let neurons = (0..cfg.neurons)
            .map(|_| {
                let raw: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                let threshold = rng.gen::<f64>() * cfg.init_threshold_max;
                FeastNeuron {
                    weights: raw.iter().map(|&x| T::lit(x / norm)).collect(),
                    base_threshold: T::lit(threshold),
                    wins: 0,
                    miss_mark: 0,
                }
            })
            .collect();
        Ok(Self {
            scale,
            samples,
            delta_i: T::lit(cfg.delta_i),
            delta_e: T::lit(cfg.delta_e),
            eta: T::lit(cfg.eta),
            epochs: cfg.epochs,
            seed,
            clamp_thresholds: cfg.clamp_thresholds,
            renormalize_weights: cfg.renormalize_weights,
            neurons,
            misses: 0,
            epochs_trained: 0,
        })
    }

    pub fn dims(&self) -> usize {
        self.scale * self.samples
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_trained(&self) -> bool {
        self.epochs_trained > 0
    }

    /// Current selection threshold of neuron `i`.
    pub fn threshold(&self, i: usize) -> T {
        let n = &self.neurons[i];
        n.base_threshold + self.delta_i * T::from_u64_lossy(n.wins)
            - self.delta_e * T::from_u64_lossy(self.misses - n.miss_mark)
    }

    pub fn thresholds(&self) -> Vec<T> {
        (0..self.neurons.len()).map(|i| self.threshold(i)).collect()
    }

    fn check_dims(&self, ec: &[T]) -> Result<()> {
        if ec.len() != self.dims() {
            return Err(Error::Input(format!(
                "context has {} values, model expects {}",
                ec.len(),
                self.dims()
            )));
        }
        Ok(())
    }

    /// Similarity of a unit-norm context with every neuron.
    fn similarities_unit(&self, unit: &[T]) -> Vec<T> {
        self.neurons
            .iter()
            .map(|n| {
                let wn = l2_norm(&n.weights);
                if wn > T::zero() {
                    (dot(unit, &n.weights) / wn).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn similarities(&self, ec: &[T]) -> Result<Vec<T>> {
        self.check_dims(ec)?;
        Ok(match normalized(ec) {
            Some(unit) => self.similarities_unit(&unit),
            None => vec![T::zero(); self.neurons.len()],
        })
    }

    /// Applies the learning rules for one context.
    pub fn learn_step(&mut self, ec: &[T]) -> Result<LearnOutcome> {
        self.check_dims(ec)?;
        let Some(unit) = normalized(ec) else {
            return Ok(LearnOutcome::Skipped);
        };
        let sims = self.similarities_unit(&unit);
        Ok(self.apply_rules(&unit, &sims))
    }

    /// Threshold and weight updates given precomputed similarities.
    fn apply_rules(&mut self, unit: &[T], sims: &[T]) -> LearnOutcome {
        let winner = argmax(
            sims.iter()
                .enumerate()
                .filter(|&(i, &s)| s > self.threshold(i))
                .map(|(i, &s)| (i, s)),
        );
        match winner {
            Some((w, _)) => {
                let eta = self.eta;
                let neuron = &mut self.neurons[w];
                neuron.wins += 1;
                for (wi, &x) in neuron.weights.iter_mut().zip(unit) {
                    *wi = *wi + eta * (x - *wi);
                }
                if self.renormalize_weights {
                    let n = l2_norm(&neuron.weights);
                    if n > T::zero() {
                        neuron.weights.iter_mut().for_each(|v| *v /= n);
                    }
                }
                LearnOutcome::Winner(w)
            }
            None => {
                self.misses += 1;
                if self.clamp_thresholds {
                    for i in 0..self.neurons.len() {
                        if self.threshold(i) < T::zero() {
                            let misses = self.misses;
                            let n = &mut self.neurons[i];
                            n.base_threshold = T::zero();
                            n.wins = 0;
                            n.miss_mark = misses;
                        }
                    }
                }
                LearnOutcome::Miss
            }
        }
    }

    /// Runs `epochs` passes over `contexts`, each in a fresh seeded shuffle.
    pub fn train<C: AsRef<[T]>>(&mut self, contexts: &[C]) -> Result<Vec<EpochStats>> {
        if contexts.is_empty() {
            return Err(Error::Input("no training contexts".into()));
        }
        for c in contexts {
            self.check_dims(c.as_ref())?;
        }
        let units: Vec<Option<Vec<T>>> = contexts.iter().map(|c| normalized(c.as_ref())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..contexts.len()).collect();
        let mut stats = Vec::with_capacity(self.epochs);
        for _ in 0..self.epochs {
            order.shuffle(&mut rng);
            let mut epoch = EpochStats {
                wins: vec![0; self.neurons.len()],
                misses: 0,
            };
            for &idx in &order {
                let Some(unit) = &units[idx] else { continue };
                let sims = self.similarities_unit(unit);
                match self.apply_rules(unit, &sims) {
                    LearnOutcome::Winner(w) => epoch.wins[w] += 1,
                    LearnOutcome::Miss => epoch.misses += 1,
                    LearnOutcome::Skipped => {}
                }
            }
            self.epochs_trained += 1;
            stats.push(epoch);
        }
        Ok(stats)
    }

    /// Winner after learning: the most similar neuron, ties to the lowest index.
    pub fn infer(&self, ec: &[T]) -> Result<usize> {
        let sims = self.similarities(ec)?;
        Ok(argmax(sims.into_iter().enumerate()).map_or(0, |(i, _)| i))
    }
}

/// One winner spike in a neuron's feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeatureMapEvent {
    pub t: u64,
    pub ch: u16,
    pub neuron: u16,
    pub scale_id: usize,
}

/// Runs every trained model over a stream in one forward pass. Output `s`
/// holds the feature-map events of `models[s]`, in stream order.
pub fn extract_feature_maps<T: Scalar>(
    models: &[FeastModel<T>],
    stream: &EventStream,
    params: &ContextParams<T>,
) -> Result<Vec<Vec<FeatureMapEvent>>> {
    for m in models {
        if !m.is_trained() {
            return Err(Error::Usage(format!("FEAST model for scale {} is untrained", m.scale)));
        }
        if m.samples != params.samples {
            return Err(Error::Usage(format!(
                "model for scale {} uses {} samples per channel, extraction uses {}",
                m.scale, m.samples, params.samples
            )));
        }
    }
    let scales: Vec<usize> = models.iter().map(|m| m.scale).collect();
    let mut maps = vec![Vec::new(); models.len()];
    for_each_context(stream, &scales, params, |idx, si, ctx| {
        let neuron = models[si].infer(&ctx.values)?;
        let ev = stream.events[idx];
        maps[si].push(FeatureMapEvent {
            t: ev.t,
            ch: ev.ch,
            neuron: neuron as u16,
            scale_id: si,
        });
        Ok(())
    })?;
    Ok(maps)
}

/// Feature-map events of one scale as a stream whose event ids are neuron ids.
pub fn feature_map_stream(
    source: &EventStream,
    map: &[FeatureMapEvent],
) -> EventStream {
    EventStream {
        fs: source.fs,
        n_channels: source.n_channels,
        label: source.label.clone(),
        events: map
            .iter()
            .map(|e| crate::events::AudEvent {
                t: e.t,
                ch: e.ch,
                id: e.neuron as u8,
            })
            .collect(),
    }
}
