//! Lateral inhibition and leaky integrate-and-fire spike generation.

use serde::{Deserialize, Serialize};

use crate::cochlea::{CarFac, CochleaConfig};
use crate::error::{Error, Result};
use crate::events::{AudEvent, EventStream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdLevel {
    pub id: u8,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifConfig {
    /// Membrane time constant in seconds.
    pub tau_lif: f64,
    /// Threshold levels, sorted by id.
    pub thresholds: Vec<ThresholdLevel>,
    pub v_reset: f64,
    /// Lateral inhibition strength in [0, 1]; 0 disables it.
    pub li_alpha: f64,
    pub neurons_per_threshold: usize,
    /// Gain from IHC output units to membrane drive units.
    pub input_gain: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            tau_lif: 0.01,
            thresholds: vec![ThresholdLevel {
                id: 0,
                value: 0.0004,
            }],
            v_reset: 0.0,
            li_alpha: 0.5,
            neurons_per_threshold: 1,
            input_gain: 0.05,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_lif > 0.0 && self.tau_lif.is_finite()) {
            return Err(Error::config("lif.tau_lif", "must be positive"));
        }
        if self.thresholds.is_empty() {
            return Err(Error::config("lif.thresholds", "need at least one level"));
        }
        if self.thresholds.iter().any(|l| !(l.value > 0.0 && l.value.is_finite())) {
            return Err(Error::config("lif.thresholds", "threshold values must be positive"));
        }
        if self.thresholds.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::config(
                "lif.thresholds",
                "level ids must be unique and listed in increasing order",
            ));
        }
        if !self.v_reset.is_finite() {
            return Err(Error::config("lif.v_reset", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.li_alpha) {
            return Err(Error::config("lif.li_alpha", "must lie in [0, 1]"));
        }
        if self.neurons_per_threshold == 0 {
            return Err(Error::config("lif.neurons_per_threshold", "must be >= 1"));
        }
        let max_id = self.thresholds.last().map_or(0, |l| l.id as usize);
        if (max_id + 1) * self.neurons_per_threshold > 256 {
            return Err(Error::config(
                "lif.neurons_per_threshold",
                "neuron ids must fit in 8 bits",
            ));
        }
        if !(self.input_gain > 0.0 && self.input_gain.is_finite()) {
            return Err(Error::config("lif.input_gain", "must be positive"));
        }
        Ok(())
    }

    /// Membrane update coefficient `1 / (fs * tau_lif)`.
    pub fn coefficient(&self, fs: u32) -> f64 {
        1.0 / (fs as f64 * self.tau_lif)
    }

    /// (event id, threshold) for every neuron attached to one channel, in
    /// increasing id order. Neuron `j` of level `id` gets event id
    /// `id * neurons_per_threshold + j`.
    pub fn neurons(&self) -> Vec<(u8, f64)> {
        let npt = self.neurons_per_threshold;
        self.thresholds
            .iter()
            .flat_map(|l| (0..npt).map(move |j| ((l.id as usize * npt + j) as u8, l.value)))
            .collect()
    }
}

/// Subtracts `alpha` times the mean of the neighbouring channels and
/// rectifies. Edge channels use their single neighbour.
pub fn lateral_inhibition<T: Scalar>(ihc: &[T], alpha: T, out: &mut [T]) {
    let n = ihc.len();
    debug_assert_eq!(out.len(), n);
    let half = T::lit(0.5);
    for s in 0..n {
        let neighbours = match (s.checked_sub(1), (s + 1 < n).then_some(s + 1)) {
            (Some(l), Some(r)) => (ihc[l] + ihc[r]) * half,
            (Some(l), None) => ihc[l],
            (None, Some(r)) => ihc[r],
            (None, None) => T::zero(),
        };
        out[s] = (ihc[s] - alpha * neighbours).max(T::zero());
    }
}

/// Membrane potentials, one per (channel, neuron).
#[derive(Debug, Clone, PartialEq)]
pub struct LifState<T> {
    pub n_channels: usize,
    /// (event id, threshold) per neuron, shared by every channel.
    neurons: Vec<(u8, T)>,
    pub membrane: Vec<T>,
    coefficient: T,
    v_reset: T,
}

impl<T: Scalar> LifState<T> {
    pub fn new(n_channels: usize, cfg: &LifConfig, fs: u32) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.coefficient(fs);
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::config(
                "lif.tau_lif",
                format!("fs * tau_lif must be >= 1 (got coefficient {c})"),
            ));
        }
        let neurons: Vec<(u8, T)> = cfg
            .neurons()
            .into_iter()
            .map(|(id, th)| (id, T::lit(th)))
            .collect();
        let v_reset = T::lit(cfg.v_reset);
        Ok(Self {
            n_channels,
            membrane: vec![v_reset; n_channels * neurons.len()],
            neurons,
            coefficient: T::lit(c),
            v_reset,
        })
    }

    pub fn coefficient(&self) -> T {
        self.coefficient
    }

    pub fn neurons_per_channel(&self) -> usize {
        self.neurons.len()
    }

    pub fn potential(&self, ch: usize, neuron: usize) -> T {
        self.membrane[ch * self.neurons.len() + neuron]
    }

    /// One membrane update at sample `t`; appends emitted spikes to `events`
    /// in (channel, id) order. `channel_offset` is added to channel numbers.
    pub fn step(&mut self, li: &[T], t: u64, channel_offset: usize, events: &mut Vec<AudEvent>) {
        debug_assert_eq!(li.len(), self.n_channels);
        let per = self.neurons.len();
        for (s, &drive) in li.iter().enumerate() {
            let row = &mut self.membrane[s * per..(s + 1) * per];
            for (v, &(id, threshold)) in row.iter_mut().zip(&self.neurons) {
                let next = *v + self.coefficient * (drive - *v);
                if next > threshold {
                    events.push(AudEvent {
                        t,
                        ch: (s + channel_offset) as u16,
                        id,
                    });
                    *v = self.v_reset;
                } else {
                    *v = next;
                }
            }
        }
    }
}

/// Convenience wrapper around [`LifState::step`] returning the spikes.
pub fn lif_step<T: Scalar>(state: &mut LifState<T>, li: &[T], t: u64) -> Vec<AudEvent> {
    let mut events = Vec::new();
    state.step(li, t, 0, &mut events);
    events
}

/// Closed-form number of updates from reset until a constant drive `drive`
/// first pushes the membrane strictly above `threshold` (with `v_reset = 0`).
/// `None` when the drive never crosses.
pub fn first_spike_steps(drive: f64, threshold: f64, coefficient: f64) -> Option<u64> {
    if !(drive > threshold) {
        return None;
    }
    // Smallest integer strictly above the real crossing point.
    let steps = ((1.0 - threshold / drive).ln() / (1.0 - coefficient).ln()).floor() + 1.0;
    Some(steps.max(1.0) as u64)
}

/// Full encoder: cochlea, lateral inhibition and LIF neurons.
#[derive(Debug, Clone)]
pub struct SpikeEncoder<T> {
    cochlea: CarFac<T>,
    lif: LifConfig,
    fs: u32,
}

impl<T: Scalar> SpikeEncoder<T> {
    /// `cochlea` must already carry a resolved sampling rate.
    pub fn new(cochlea: &CochleaConfig, lif: &LifConfig) -> Result<Self> {
        lif.validate()?;
        let fs = cochlea.sample_rate()?;
        let total = cochlea.n_channels * cochlea.n_ears;
        if total > u16::MAX as usize {
            return Err(Error::config("cochlea.n_channels", "too many channels"));
        }
        Ok(Self {
            cochlea: CarFac::new(cochlea)?,
            lif: lif.clone(),
            fs,
        })
    }

    pub fn cochlea(&self) -> &CarFac<T> {
        &self.cochlea
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    /// Channel count of the produced stream (all ears stacked).
    pub fn n_stream_channels(&self) -> usize {
        self.cochlea.n_channels() * self.cochlea.config().n_ears
    }

    /// Encodes one utterance from reset. With two ears the mono signal drives
    /// both cascades and the second ear's channels follow the first's.
    pub fn encode(&self, samples: &[T]) -> Result<EventStream> {
        if samples.is_empty() {
            return Err(Error::Input("empty signal".into()));
        }
        let n = self.cochlea.n_channels();
        let n_ears = self.cochlea.config().n_ears;
        let alpha = T::lit(self.lif.li_alpha);
        let gain = T::lit(self.lif.input_gain);

        let mut ears: Vec<_> = (0..n_ears)
            .map(|_| {
                Ok((
                    self.cochlea.reset_state(),
                    LifState::<T>::new(n, &self.lif, self.fs)?,
                ))
            })
            .collect::<Result<_>>()?;
        let mut bm = vec![T::zero(); n];
        let mut ihc = vec![T::zero(); n];
        let mut li = vec![T::zero(); n];
        let mut events = Vec::new();
        for (t, &x) in samples.iter().enumerate() {
            for (ear, (cstate, lstate)) in ears.iter_mut().enumerate() {
                self.cochlea.step(cstate, x, &mut bm, &mut ihc)?;
                for v in ihc.iter_mut() {
                    *v *= gain;
                }
                lateral_inhibition(&ihc, alpha, &mut li);
                lstate.step(&li, t as u64, ear * n, &mut events);
            }
        }
        Ok(EventStream {
            fs: self.fs,
            n_channels: self.n_stream_channels() as u16,
            label: None,
            events,
        })
    }
}

/// One-shot form of [`SpikeEncoder::encode`].
pub fn encode_signal<T: Scalar>(
    samples: &[T],
    cochlea: &CochleaConfig,
    lif: &LifConfig,
) -> Result<EventStream> {
    SpikeEncoder::new(cochlea, lif)?.encode(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lateral_inhibition_flat_input() {
        let mut out = [0.0; 3];
        lateral_inhibition(&[1.0, 1.0, 1.0], 0.5, &mut out);
        assert_eq!(out, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn lateral_inhibition_zero_alpha_is_identity() {
        let input = [0.3, 0.0, 2.5, 1.0];
        let mut out = [0.0; 4];
        lateral_inhibition(&input, 0.0, &mut out);
        assert_eq!(out, input);
    }

    #[test]
    fn lateral_inhibition_single_peak() {
        let mut out = [9.0; 3];
        lateral_inhibition(&[0.0, 1.0, 0.0], 0.5, &mut out);
        assert_eq!(out, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn coefficient_at_16k() {
        let cfg = LifConfig::default();
        assert_eq!(cfg.coefficient(16_000), 0.00625);
    }

    #[test]
    fn first_spike_after_111_updates() {
        let cfg = LifConfig {
            input_gain: 1.0,
            ..LifConfig::default()
        };
        let mut state = LifState::<f64>::new(1, &cfg, 16_000).unwrap();
        let mut first = None;
        for t in 0..1000u64 {
            if !lif_step(&mut state, &[0.0008], t).is_empty() {
                first = Some(t + 1);
                break;
            }
        }
        assert_eq!(first, Some(111));
        assert_eq!(first_spike_steps(0.0008, 0.0004, 0.00625), Some(111));
    }

    #[test]
    fn drive_equal_to_threshold_never_spikes() {
        let mut state = LifState::<f64>::new(1, &LifConfig::default(), 16_000).unwrap();
        for t in 0..200_000u64 {
            assert!(lif_step(&mut state, &[0.0004], t).is_empty());
        }
        assert!(state.potential(0, 0) <= 0.0004);
    }

    #[test]
    fn membrane_resets_exactly() {
        let cfg = LifConfig {
            v_reset: 0.0001,
            ..LifConfig::default()
        };
        let mut state = LifState::<f64>::new(2, &cfg, 16_000).unwrap();
        for t in 0..500u64 {
            let ev = lif_step(&mut state, &[0.01, 0.0], t);
            for e in ev {
                assert_eq!(state.potential(e.ch as usize, 0), 0.0001);
            }
        }
    }

    #[test]
    fn neuron_ids_expand_per_level() {
        let cfg = LifConfig {
            thresholds: vec![
                ThresholdLevel { id: 0, value: 0.0002 },
                ThresholdLevel { id: 1, value: 0.0004 },
                ThresholdLevel { id: 2, value: 0.0008 },
            ],
            neurons_per_threshold: 3,
            ..LifConfig::default()
        };
        let ids: Vec<u8> = cfg.neurons().iter().map(|n| n.0).collect();
        assert_eq!(ids, (0..9).collect::<Vec<u8>>());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            LifConfig { tau_lif: 0.0, ..LifConfig::default() },
            LifConfig { li_alpha: 1.5, ..LifConfig::default() },
            LifConfig { thresholds: vec![], ..LifConfig::default() },
            LifConfig {
                thresholds: vec![ThresholdLevel { id: 0, value: -1.0 }],
                ..LifConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config { .. })), "{cfg:?}");
        }
    }
}
