//! Spike streams, exponential time surfaces and fixed-size event contexts.
//!
//! A context is anchored at a trigger spike. For each of `scale` channels
//! centred on the trigger channel, the most recent `k` spikes are selected
//! and the piecewise-exponential surface they define is resampled onto
//! `samples` uniformly spaced query points spanning that row's own window,
//! from its oldest selected spike to the trigger time. The trigger channel
//! uses its `k` previous spikes plus the trigger itself, so the last entry of
//! the centre row is always exactly 1.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One spike: sample index, channel, and threshold-level (neuron) id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AudEvent {
    pub t: u64,
    pub ch: u16,
    pub id: u8,
}

/// A time-sorted spike stream with its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    pub fs: u32,
    pub n_channels: u16,
    pub label: Option<String>,
    pub events: Vec<AudEvent>,
}

impl EventStream {
    pub fn new(fs: u32, n_channels: u16) -> Self {
        Self {
            fs,
            n_channels,
            label: None,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks ordering (strictly increasing in (t, ch, id)) and channel range.
    /// Returns the index of the first offending event.
    pub fn check(&self) -> std::result::Result<(), (usize, String)> {
        for (i, e) in self.events.iter().enumerate() {
            if e.ch >= self.n_channels {
                return Err((i, format!("channel {} >= {}", e.ch, self.n_channels)));
            }
            if i > 0 && self.events[i - 1] >= *e {
                return Err((i, "events not strictly ordered by (t, ch, id)".into()));
            }
        }
        Ok(())
    }

    /// Spike count per channel.
    pub fn channel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_channels as usize];
        for e in &self.events {
            counts[e.ch as usize] += 1;
        }
        counts
    }
}

/// Time-surface value at `t` given the latest spike `t_last`: `exp(-(t - t_last) / tau)`,
/// or 0 when there has been no spike.
pub fn surface_value<T: Scalar>(t: u64, t_last: Option<u64>, tau: T) -> T {
    match t_last {
        Some(last) => {
            debug_assert!(t >= last);
            (-(T::from_u64_lossy(t - last) / tau)).exp()
        }
        None => T::zero(),
    }
}

/// Default surface time constant: one millisecond of samples.
pub fn default_tau<T: Scalar>(fs: u32) -> T {
    T::lit(fs as f64 * 1e-3)
}

/// Recent spike times per channel. Simultaneous spikes of different levels in
/// one channel share one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeHistory {
    capacity: usize,
    channels: Vec<VecDeque<u64>>,
}

impl SpikeHistory {
    /// Keeps at most `capacity` timestamps per channel (oldest dropped).
    pub fn new(n_channels: usize, capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            channels: vec![VecDeque::with_capacity(capacity.clamp(1, 64)); n_channels],
        }
    }

    /// Unbounded history pre-filled with ascending timestamps per channel.
    pub fn from_times(times: &[Vec<u64>]) -> Result<Self> {
        let mut h = Self::new(times.len(), usize::MAX);
        for (ch, ts) in times.iter().enumerate() {
            for &t in ts {
                h.push(ch, t)?;
            }
        }
        Ok(h)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn push(&mut self, ch: usize, t: u64) -> Result<()> {
        let q = self
            .channels
            .get_mut(ch)
            .ok_or_else(|| Error::Input(format!("channel {ch} out of range")))?;
        match q.back() {
            Some(&last) if last == t => return Ok(()),
            Some(&last) if last > t => {
                return Err(Error::Input(format!(
                    "spike at {t} precedes channel {ch}'s latest spike {last}"
                )))
            }
            _ => {}
        }
        if q.len() == self.capacity {
            q.pop_front();
        }
        q.push_back(t);
        Ok(())
    }

    pub fn times(&self, ch: usize) -> &VecDeque<u64> {
        &self.channels[ch]
    }

    /// Number of stored spikes in `ch` strictly before `t`.
    pub fn count_before(&self, ch: usize, t: u64) -> usize {
        let q = &self.channels[ch];
        q.partition_point(|&s| s < t)
    }
}

/// The `k` largest timestamps `<= t_i` in channel `ch`, ascending.
pub fn select_spikes(history: &SpikeHistory, ch: usize, t_i: u64, k: usize) -> Vec<u64> {
    let Some(q) = history.channels.get(ch) else {
        return Vec::new();
    };
    let end = q.partition_point(|&s| s <= t_i);
    let start = end.saturating_sub(k);
    q.range(start..end).copied().collect()
}

/// Samples the surface defined by `spike_times` (ascending) at `samples`
/// uniform points from `t_start` to `t_i` inclusive.
///
/// Query `j` sits at `t_start + j * (t_i - t_start) / (samples - 1)`. Elapsed
/// times are formed in integer units of `1 / (samples - 1)` samples so the
/// result is exact whenever the query falls on an integer sample.
pub fn resample_channel<T: Scalar>(
    spike_times: &[u64],
    t_start: u64,
    t_i: u64,
    samples: usize,
    tau: T,
) -> Result<Vec<T>> {
    if samples < 2 {
        return Err(Error::Input("need at least 2 samples per channel".into()));
    }
    if t_start > t_i {
        return Err(Error::Input(format!("window start {t_start} after end {t_i}")));
    }
    if !(tau > T::zero()) {
        return Err(Error::Input("tau must be positive".into()));
    }
    if t_start == t_i {
        if spike_times != [t_i] {
            return Err(Error::Input(
                "degenerate window is only valid for a single spike at the window end".into(),
            ));
        }
        let mut out = vec![T::zero(); samples];
        out[samples - 1] = T::one();
        return Ok(out);
    }

    let d = (samples - 1) as u128;
    let span = (t_i - t_start) as u128;
    let denom = T::from_u64_lossy(d as u64) * tau;
    let mut out = Vec::with_capacity(samples);
    let mut next = 0usize;
    let mut last: Option<u64> = None;
    for j in 0..samples as u128 {
        // Query position scaled by d.
        let q = t_start as u128 * d + j * span;
        while next < spike_times.len() && (spike_times[next] as u128) * d <= q {
            last = Some(spike_times[next]);
            next += 1;
        }
        out.push(match last {
            Some(s) => {
                let elapsed = (q - s as u128 * d) as f64;
                (-(T::lit(elapsed) / denom)).exp()
            }
            None => T::zero(),
        });
    }
    Ok(out)
}

/// Parameters shared by every context extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextParams<T> {
    /// Spikes selected per channel (the trigger channel adds the trigger).
    pub k: usize,
    /// Resampled points per channel.
    pub samples: usize,
    /// Surface time constant in samples.
    pub tau: T,
}

impl<T: Scalar> ContextParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("events.k", "must be >= 1"));
        }
        if self.samples < 2 {
            return Err(Error::config("events.samples", "must be >= 2"));
        }
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(Error::config("events.tau_ms", "must be positive"));
        }
        Ok(())
    }
}

/// A `scale x samples` matrix of surface values anchored at a trigger spike.
#[derive(Debug, Clone, PartialEq)]
pub struct EventContext<T> {
    pub t: u64,
    pub ch: u16,
    pub scale: usize,
    pub samples: usize,
    /// Row-major; row `r` is channel `ch - (scale - 1) / 2 + r`.
    pub values: Vec<T>,
}

impl<T: Scalar> EventContext<T> {
    pub fn row(&self, r: usize) -> &[T] {
        &self.values[r * self.samples..(r + 1) * self.samples]
    }

    pub fn center_row(&self) -> &[T] {
        self.row(self.scale / 2)
    }
}

fn check_scale(scale: usize) -> Result<()> {
    if scale == 0 || scale % 2 == 0 {
        return Err(Error::Input(format!("context scale {scale} must be odd")));
    }
    Ok(())
}

/// Builds the context for `trigger`, or `None` when the trigger channel has
/// fewer than `k` spikes before the trigger.
///
/// `history` may already contain spikes at the trigger time (including the
/// trigger itself); only strictly earlier spikes count for the trigger
/// channel, while other channels use every spike up to and including `t`.
pub fn extract_context<T: Scalar>(
    history: &SpikeHistory,
    trigger: AudEvent,
    scale: usize,
    params: &ContextParams<T>,
) -> Result<Option<EventContext<T>>> {
    check_scale(scale)?;
    let t_i = trigger.t;
    let center = trigger.ch as usize;
    let n_channels = history.n_channels();
    if center >= n_channels {
        return Err(Error::Input(format!(
            "trigger channel {center} out of range 0..{n_channels}"
        )));
    }
    let past = match t_i.checked_sub(1) {
        Some(prev) => select_spikes(history, center, prev, params.k),
        None => Vec::new(),
    };
    if past.len() < params.k {
        return Ok(None);
    }

    let s = params.samples;
    let half = (scale / 2) as isize;
    let mut values = Vec::with_capacity(scale * s);
    for offset in -half..=half {
        let row_ch = center as isize + offset;
        if row_ch < 0 || row_ch >= n_channels as isize {
            values.extend(std::iter::repeat(T::zero()).take(s));
            continue;
        }
        let spikes = if offset == 0 {
            let mut v = past.clone();
            v.push(t_i);
            v
        } else {
            select_spikes(history, row_ch as usize, t_i, params.k)
        };
        match spikes.first() {
            None => values.extend(std::iter::repeat(T::zero()).take(s)),
            Some(&oldest) => values.extend(resample_channel(&spikes, oldest, t_i, s, params.tau)?),
        }
    }
    Ok(Some(EventContext {
        t: t_i,
        ch: trigger.ch,
        scale,
        samples: s,
        values,
    }))
}

/// Walks a stream forward in time. All spikes sharing a timestamp enter the
/// history together, then each of those events is offered as a trigger.
/// `visit(event_index, history)` is called once per event.
pub fn walk_stream<F>(stream: &EventStream, capacity: usize, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &SpikeHistory) -> Result<()>,
{
    let mut history = SpikeHistory::new(stream.n_channels as usize, capacity);
    let events = &stream.events;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].t;
        let mut j = i;
        while j < events.len() && events[j].t == t {
            history.push(events[j].ch as usize, t)?;
            j += 1;
        }
        for idx in i..j {
            visit(idx, &history)?;
        }
        i = j;
    }
    Ok(())
}

/// Calls `visit(event_index, scale_index, context)` for every event with
/// enough trigger-channel history, at every requested scale.
pub fn for_each_context<T, F>(
    stream: &EventStream,
    scales: &[usize],
    params: &ContextParams<T>,
    mut visit: F,
) -> Result<()>
where
    T: Scalar,
    F: FnMut(usize, usize, EventContext<T>) -> Result<()>,
{
    params.validate()?;
    for &scale in scales {
        check_scale(scale)?;
    }
    walk_stream(stream, params.k + 1, |idx, history| {
        let ev = stream.events[idx];
        for (si, &scale) in scales.iter().enumerate() {
            match extract_context(history, ev, scale, params)? {
                Some(ctx) => visit(idx, si, ctx)?,
                None => break,
            }
        }
        Ok(())
    })
}

/// For each event, whether its trigger channel has at least `k` earlier
/// spikes (the condition for a context at any scale).
pub fn eligible_events(stream: &EventStream, k: usize) -> Result<Vec<bool>> {
    let mut out = vec![false; stream.events.len()];
    walk_stream(stream, k + 1, |idx, history| {
        let ev = stream.events[idx];
        out[idx] = history.count_before(ev.ch as usize, ev.t) >= k;
        Ok(())
    })?;
    Ok(out)
}
