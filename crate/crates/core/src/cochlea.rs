//! CAR-FAC cochlea: a cascade of asymmetric two-pole/two-zero resonators with
//! outer-hair-cell damping control, inner-hair-cell transduction and a
//! four-stage automatic gain control loop.
//!
//! Channel 0 carries the highest characteristic frequency; each stage's output
//! is the next stage's input. With `fac_enabled = false` the pole radius is
//! frozen at its rest value and the system is a linear CAR filter bank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Greenwood place-to-frequency map, `x` in [0, 1] along the cochlea.
pub fn greenwood_frequency(x: f64) -> f64 {
    165.4 * (10f64.powf(2.1 * x) - 0.88)
}

/// Inverse of [`greenwood_frequency`].
pub fn greenwood_position(hz: f64) -> f64 {
    (hz / 165.4 + 0.88).log10() / 2.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarParams {
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub zero_ratio: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        Self {
            zeta_min: 0.10,
            zeta_max: 0.35,
            zero_ratio: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OhcParams {
    pub velocity_scale: f64,
    pub v_offset: f64,
}

impl Default for OhcParams {
    fn default() -> Self {
        Self {
            velocity_scale: 0.1,
            v_offset: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IhcParams {
    /// Offset added to the BM signal before the saturating nonlinearity.
    pub offset: f64,
    /// Cutoffs of the two one-pole smoothing filters, in Hz.
    pub cutoffs_hz: [f64; 2],
}

impl Default for IhcParams {
    fn default() -> Self {
        Self {
            offset: 0.175,
            cutoffs_hz: [3000.0, 300.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgcParams {
    /// Per-stage smoothing time constants in seconds.
    pub time_constants: Vec<f64>,
    /// Weight of the next (slower) stage's state in each stage's input.
    pub stage_gain: f64,
    /// Per-stage decimation factors relative to the previous stage.
    pub decimation: Vec<usize>,
    pub spatial_kernel: [f64; 3],
}

impl Default for AgcParams {
    fn default() -> Self {
        Self {
            time_constants: vec![0.002, 0.008, 0.032, 0.128],
            stage_gain: 2.0,
            decimation: vec![8, 2, 2, 2],
            spatial_kernel: [0.25, 0.5, 0.25],
        }
    }
}

/// Filter-cascade design parameters.
///
/// `fs` and `cf_max` may be left unset in configuration files; they are
/// resolved from the audio file's rate by [`CochleaConfig::with_sample_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CochleaConfig {
    pub fs: Option<u32>,
    pub n_channels: usize,
    pub cf_min: f64,
    pub cf_max: Option<f64>,
    pub fac_enabled: bool,
    pub n_ears: usize,
    pub car: CarParams,
    pub ohc: OhcParams,
    pub ihc: IhcParams,
    pub agc: AgcParams,
}

impl Default for CochleaConfig {
    fn default() -> Self {
        Self {
            fs: None,
            n_channels: 64,
            cf_min: 100.0,
            cf_max: None,
            fac_enabled: true,
            n_ears: 1,
            car: CarParams::default(),
            ohc: OhcParams::default(),
            ihc: IhcParams::default(),
            agc: AgcParams::default(),
        }
    }
}

impl CochleaConfig {
    /// Default highest CF for a sampling rate: 6 kHz, or 45% of the rate when
    /// that is lower (3.6 kHz at 8 kHz).
    pub fn default_cf_max(fs: u32) -> f64 {
        (0.45 * fs as f64).min(6000.0)
    }

    /// Fixes the sampling rate. A rate already present must agree with `fs`.
    pub fn with_sample_rate(&self, fs: u32) -> Result<Self> {
        if let Some(configured) = self.fs {
            if configured != fs {
                return Err(Error::config(
                    "cochlea.fs",
                    format!("configured rate {configured} Hz does not match audio rate {fs} Hz"),
                ));
            }
        }
        let mut out = self.clone();
        out.fs = Some(fs);
        if out.cf_max.is_none() {
            out.cf_max = Some(Self::default_cf_max(fs));
        }
        Ok(out)
    }

    pub fn sample_rate(&self) -> Result<u32> {
        self.fs
            .ok_or_else(|| Error::config("cochlea.fs", "sampling rate not resolved"))
    }

    pub fn resolved_cf_max(&self) -> Result<f64> {
        let fs = self.sample_rate()?;
        Ok(self.cf_max.unwrap_or_else(|| Self::default_cf_max(fs)))
    }

    /// Checks the parameters that do not depend on the sampling rate.
    pub fn validate_static(&self) -> Result<()> {
        if self.n_channels < 2 {
            return Err(Error::config("cochlea.n_channels", "must be at least 2"));
        }
        if self.n_channels > u16::MAX as usize {
            return Err(Error::config("cochlea.n_channels", "must fit in 16 bits"));
        }
        if !(self.n_ears == 1 || self.n_ears == 2) {
            return Err(Error::config("cochlea.n_ears", "must be 1 or 2"));
        }
        if !(self.cf_min > 0.0) {
            return Err(Error::config("cochlea.cf_min", "must be positive"));
        }
        if let Some(cf_max) = self.cf_max {
            if !(cf_max > self.cf_min) {
                return Err(Error::config("cochlea.cf_max", "must exceed cf_min"));
            }
        }
        let car = &self.car;
        if !(car.zeta_min > 0.0 && car.zeta_min < car.zeta_max) {
            return Err(Error::config(
                "cochlea.car.zeta_min",
                "need 0 < zeta_min < zeta_max",
            ));
        }
        if !(car.zero_ratio > 1.0) {
            return Err(Error::config("cochlea.car.zero_ratio", "must exceed 1"));
        }
        if !(self.ohc.velocity_scale.is_finite() && self.ohc.v_offset.is_finite()) {
            return Err(Error::config("cochlea.ohc", "parameters must be finite"));
        }
        if !self.ihc.offset.is_finite() {
            return Err(Error::config("cochlea.ihc.offset", "must be finite"));
        }
        if self.ihc.cutoffs_hz.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::config("cochlea.ihc.cutoffs_hz", "must be positive"));
        }
        let agc = &self.agc;
        if agc.time_constants.is_empty() || agc.time_constants.len() != agc.decimation.len() {
            return Err(Error::config(
                "cochlea.agc.decimation",
                "need one decimation factor per stage time constant",
            ));
        }
        if agc.time_constants.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::config(
                "cochlea.agc.time_constants",
                "all time constants must be positive",
            ));
        }
        if agc.decimation.iter().any(|&d| d == 0) {
            return Err(Error::config("cochlea.agc.decimation", "factors must be >= 1"));
        }
        if !(agc.stage_gain >= 0.0 && agc.stage_gain.is_finite()) {
            return Err(Error::config("cochlea.agc.stage_gain", "must be finite and >= 0"));
        }
        let k = agc.spatial_kernel;
        if k.iter().any(|&w| w < 0.0) || (k.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "cochlea.agc.spatial_kernel",
                "weights must be non-negative and sum to 1",
            ));
        }
        Ok(())
    }

    /// Full validation, including the rate-dependent CF bounds.
    pub fn validate(&self) -> Result<()> {
        self.validate_static()?;
        let fs = self.sample_rate()?;
        let cf_max = self.resolved_cf_max()?;
        let nyquist = fs as f64 / 2.0;
        if !(self.cf_min < cf_max && cf_max < nyquist) {
            return Err(Error::config(
                "cochlea.cf_max",
                format!("need 0 < cf_min < cf_max < fs/2 ({nyquist} Hz)"),
            ));
        }
        Ok(())
    }
}

/// Characteristic frequency of channel `i`: Greenwood positions uniformly
/// spaced from `cf_max` (channel 0) down to `cf_min` (last channel).
pub fn greenwood_cf(i: usize, cfg: &CochleaConfig) -> Result<f64> {
    let n = cfg.n_channels;
    if n < 2 {
        return Err(Error::config("cochlea.n_channels", "must be at least 2"));
    }
    if i >= n {
        return Err(Error::Input(format!("channel {i} out of range 0..{n}")));
    }
    let fs = cfg.sample_rate()?;
    let cf_max = cfg.resolved_cf_max()?;
    let nyquist = fs as f64 / 2.0;
    for (key, cf) in [("cochlea.cf_min", cfg.cf_min), ("cochlea.cf_max", cf_max)] {
        if !(cf > 0.0 && cf < nyquist) {
            return Err(Error::config(key, format!("{cf} Hz outside (0, {nyquist})")));
        }
    }
    if i == 0 {
        return Ok(cf_max);
    }
    if i == n - 1 {
        return Ok(cfg.cf_min);
    }
    let x_hi = greenwood_position(cf_max);
    let x_lo = greenwood_position(cfg.cf_min);
    let x = x_hi - (x_hi - x_lo) * i as f64 / (n - 1) as f64;
    Ok(greenwood_frequency(x))
}

/// Per-channel resonator coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCoeffs<T> {
    pub cf: Vec<f64>,
    pub theta: Vec<T>,
    pub a0: Vec<T>,
    pub c0: Vec<T>,
    pub h: Vec<T>,
    /// Maximally damped pole radius.
    pub r1: Vec<T>,
    /// Undamping range added on top of `r1`.
    pub drz: Vec<T>,
    /// Pole radius with no input (zero velocity, full undamping).
    pub r_rest: Vec<T>,
    /// DC-gain normaliser.
    pub g: Vec<T>,
}

impl<T: Scalar> ChannelCoeffs<T> {
    pub fn len(&self) -> usize {
        self.cf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cf.is_empty()
    }

    /// Transfer function of stage `i` at radius `r`, evaluated at `z = e^{jw}`.
    /// Returns (real, imaginary).
    pub fn stage_response(&self, i: usize, r: T, w: T) -> (T, T) {
        // H(z) = g * (1 + h r c0 z / (z^2 - 2 r a0 z + r^2))
        let (a0, c0, h, g) = (self.a0[i], self.c0[i], self.h[i], self.g[i]);
        let two = T::lit(2.0);
        let (zr, zi) = (w.cos(), w.sin());
        let (z2r, z2i) = (zr * zr - zi * zi, two * zr * zi);
        let dr = z2r - two * r * a0 * zr + r * r;
        let di = z2i - two * r * a0 * zi;
        let nr = h * r * c0 * zr;
        let ni = h * r * c0 * zi;
        let den = dr * dr + di * di;
        let qr = (nr * dr + ni * di) / den;
        let qi = (ni * dr - nr * di) / den;
        (g * (T::one() + qr), g * qi)
    }
}

fn ohc_nonlinearity<T: Scalar>(v: T, velocity_scale: T, v_offset: T) -> T {
    let u = v * velocity_scale + v_offset;
    T::one() / (T::one() + u * u)
}

/// Designs the per-channel coefficients for a validated configuration.
pub fn design_coefficients<T: Scalar>(cfg: &CochleaConfig) -> Result<ChannelCoeffs<T>> {
    cfg.validate()?;
    let fs = cfg.sample_rate()? as f64;
    let n = cfg.n_channels;
    let car = &cfg.car;
    let nlf_rest = ohc_nonlinearity(0.0, cfg.ohc.velocity_scale, cfg.ohc.v_offset);

    let mut out = ChannelCoeffs {
        cf: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        a0: Vec::with_capacity(n),
        c0: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        r1: Vec::with_capacity(n),
        drz: Vec::with_capacity(n),
        r_rest: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
    };
    for i in 0..n {
        let cf = greenwood_cf(i, cfg)?;
        let theta = 2.0 * std::f64::consts::PI * cf / fs;
        let a0 = theta.cos();
        let c0 = theta.sin();
        let h = c0 * (car.zero_ratio * car.zero_ratio - 1.0);
        let r1 = 1.0 - theta * car.zeta_max;
        let drz = theta * (car.zeta_max - car.zeta_min);
        let r = r1 + drz * nlf_rest;
        let g = (1.0 - 2.0 * a0 * r + r * r) / (1.0 - 2.0 * a0 * r + h * c0 * r + r * r);
        let values = [theta, a0, c0, h, r1, drz, r, g];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(
                "cochlea",
                format!("non-finite coefficient for channel {i} (cf {cf} Hz)"),
            ));
        }
        if !(r1 > 0.0 && r1 + drz < 1.0 && g > 0.0) {
            return Err(Error::config(
                "cochlea.car",
                format!("channel {i} (cf {cf:.1} Hz) has an invalid pole radius or gain"),
            ));
        }
        out.cf.push(cf);
        out.theta.push(T::lit(theta));
        out.a0.push(T::lit(a0));
        out.c0.push(T::lit(c0));
        out.h.push(T::lit(h));
        out.r1.push(T::lit(r1));
        out.drz.push(T::lit(drz));
        out.r_rest.push(T::lit(r));
        out.g.push(T::lit(g));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
struct AgcStageState<T> {
    accum: Vec<T>,
    count: usize,
    /// Block average produced the last time this stage fired.
    input: Vec<T>,
    memory: Vec<T>,
}

/// Running filter state of one ear.
#[derive(Debug, Clone, PartialEq)]
pub struct CochleaState<T> {
    pub z1: Vec<T>,
    pub z2: Vec<T>,
    /// `z2` one sample earlier; `z2 - z2_prev` is the OHC velocity proxy.
    pub z2_prev: Vec<T>,
    pub ihc_lp1: Vec<T>,
    pub ihc_lp2: Vec<T>,
    /// Undamping feedback in [0, 1] set by the AGC.
    pub undamping: Vec<T>,
    agc: Vec<AgcStageState<T>>,
    /// Scratch row for the decimated AGC input.
    scratch: Vec<T>,
}

impl<T: Scalar> CochleaState<T> {
    fn new(n_channels: usize, n_stages: usize) -> Self {
        let zeros = vec![T::zero(); n_channels];
        Self {
            z1: zeros.clone(),
            z2: zeros.clone(),
            z2_prev: zeros.clone(),
            ihc_lp1: zeros.clone(),
            ihc_lp2: zeros.clone(),
            undamping: vec![T::one(); n_channels],
            agc: (0..n_stages)
                .map(|_| AgcStageState {
                    accum: zeros.clone(),
                    count: 0,
                    input: zeros.clone(),
                    memory: zeros.clone(),
                })
                .collect(),
            scratch: zeros,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.z1, &self.z2, &self.z2_prev, &self.ihc_lp1, &self.ihc_lp2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
            && self.agc.iter().all(|s| s.memory.iter().all(|x| x.is_finite()))
    }

    /// AGC output of the fastest stage.
    pub fn agc_output(&self) -> &[T] {
        &self.agc[0].memory
    }
}

/// Row-major (sample, channel) matrix of cochlea outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochleagram<T> {
    pub n_channels: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Cochleagram<T> {
    pub fn n_samples(&self) -> usize {
        self.data.len() / self.n_channels.max(1)
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.n_channels..(t + 1) * self.n_channels]
    }

    pub fn value(&self, t: usize, ch: usize) -> T {
        self.data[t * self.n_channels + ch]
    }
}

/// A designed CAR-FAC cochlea. Immutable; per-utterance state lives in
/// [`CochleaState`].
#[derive(Debug, Clone)]
pub struct CarFac<T> {
    cfg: CochleaConfig,
    coeffs: ChannelCoeffs<T>,
    velocity_scale: T,
    v_offset: T,
    ihc_offset: T,
    ihc_rest: T,
    ihc_alpha: [T; 2],
    agc_decimation: Vec<usize>,
    agc_eps: Vec<T>,
    agc_gain: T,
    kernel: [T; 3],
}

fn ihc_saturation<T: Scalar>(y: T, offset: T) -> T {
    let z = (y + offset).max(T::zero());
    let z2 = z * z;
    let z3 = z2 * z;
    z3 / (z3 + z2 + T::lit(0.1))
}

impl<T: Scalar> CarFac<T> {
    pub fn new(cfg: &CochleaConfig) -> Result<Self> {
        let coeffs = design_coefficients::<T>(cfg)?;
        let fs = cfg.sample_rate()? as f64;
        let ihc_alpha = cfg
            .ihc
            .cutoffs_hz
            .map(|fc| T::lit(1.0 - (-2.0 * std::f64::consts::PI * fc / fs).exp()));
        let mut cumulative = 1usize;
        let agc_eps = cfg
            .agc
            .decimation
            .iter()
            .zip(&cfg.agc.time_constants)
            .map(|(&d, &tau)| {
                cumulative *= d;
                T::lit(1.0 - (-(cumulative as f64) / (tau * fs)).exp())
            })
            .collect();
        let ihc_offset = T::lit(cfg.ihc.offset);
        Ok(Self {
            cfg: cfg.clone(),
            coeffs,
            velocity_scale: T::lit(cfg.ohc.velocity_scale),
            v_offset: T::lit(cfg.ohc.v_offset),
            ihc_offset,
            ihc_rest: ihc_saturation(T::zero(), ihc_offset),
            ihc_alpha,
            agc_decimation: cfg.agc.decimation.clone(),
            agc_eps,
            agc_gain: T::lit(cfg.agc.stage_gain),
            kernel: cfg.agc.spatial_kernel.map(T::lit),
        })
    }

    pub fn config(&self) -> &CochleaConfig {
        &self.cfg
    }

    pub fn coeffs(&self) -> &ChannelCoeffs<T> {
        &self.coeffs
    }

    pub fn n_channels(&self) -> usize {
        self.coeffs.len()
    }

    /// All-zero state (the reset state every utterance starts from).
    pub fn reset_state(&self) -> CochleaState<T> {
        CochleaState::new(self.n_channels(), self.agc_decimation.len())
    }

    /// Pole radius stage `i` would use for the next sample.
    pub fn pole_radius(&self, state: &CochleaState<T>, i: usize) -> T {
        let c = &self.coeffs;
        if !self.cfg.fac_enabled {
            return c.r_rest[i];
        }
        let v = state.z2[i] - state.z2_prev[i];
        let nlf = ohc_nonlinearity(v, self.velocity_scale, self.v_offset);
        c.r1[i] + c.drz[i] * nlf * state.undamping[i]
    }

    /// Advances the cascade by one input sample, writing basilar-membrane
    /// outputs to `bm` and inner-hair-cell outputs to `ihc`.
    pub fn step(&self, state: &mut CochleaState<T>, x: T, bm: &mut [T], ihc: &mut [T]) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Processing(format!("non-finite input sample {x}")));
        }
        let n = self.n_channels();
        debug_assert!(bm.len() == n && ihc.len() == n);
        let c = &self.coeffs;
        let mut input = x;
        for i in 0..n {
            let r = self.pole_radius(state, i);
            let (z1, z2) = (state.z1[i], state.z2[i]);
            let z1_new = r * (c.a0[i] * z1 - c.c0[i] * z2) + input;
            let z2_new = r * (c.c0[i] * z1 + c.a0[i] * z2);
            state.z2_prev[i] = z2;
            state.z1[i] = z1_new;
            state.z2[i] = z2_new;
            let y = c.g[i] * (input + c.h[i] * z2_new);
            bm[i] = y;
            input = y;
        }

        if !self.cfg.fac_enabled {
            for (out, &y) in ihc.iter_mut().zip(bm.iter()) {
                *out = y.max(T::zero());
            }
        } else {
            let [a1, a2] = self.ihc_alpha;
            for i in 0..n {
                let u = (ihc_saturation(bm[i], self.ihc_offset) - self.ihc_rest).max(T::zero());
                let lp1 = state.ihc_lp1[i] + a1 * (u - state.ihc_lp1[i]);
                let lp2 = state.ihc_lp2[i] + a2 * (lp1 - state.ihc_lp2[i]);
                state.ihc_lp1[i] = lp1;
                state.ihc_lp2[i] = lp2;
                ihc[i] = lp2;
            }
            self.agc_update(state, ihc);
        }
        if !input.is_finite() {
            return Err(Error::Processing("cochlea state diverged".into()));
        }
        Ok(())
    }

    fn agc_update(&self, state: &mut CochleaState<T>, ihc: &[T]) {
        let n_stages = self.agc_decimation.len();
        let CochleaState {
            agc,
            scratch,
            undamping,
            ..
        } = state;
        scratch.copy_from_slice(ihc);

        // Accumulate down the stage chain; a stage fires when its decimation
        // count completes, passing its block average on to the next stage.
        let mut deepest = None;
        for s in 0..n_stages {
            let stage = &mut agc[s];
            for (acc, &v) in stage.accum.iter_mut().zip(scratch.iter()) {
                *acc += v;
            }
            stage.count += 1;
            if stage.count < self.agc_decimation[s] {
                break;
            }
            let inv = T::one() / T::from_usize_lossy(stage.count);
            for ((dst, acc), inp) in scratch
                .iter_mut()
                .zip(stage.accum.iter_mut())
                .zip(stage.input.iter_mut())
            {
                *dst = *acc * inv;
                *inp = *dst;
                *acc = T::zero();
            }
            stage.count = 0;
            deepest = Some(s);
        }
        let Some(deepest) = deepest else {
            return;
        };

        for s in (0..=deepest).rev() {
            let (head, tail) = agc.split_at_mut(s + 1);
            let stage = &mut head[s];
            let next = tail.first();
            let eps = self.agc_eps[s];
            let n = stage.memory.len();
            for i in 0..n {
                let mut stage_in = stage.input[i];
                if let Some(next) = next {
                    stage_in += self.agc_gain * next.memory[i];
                }
                let m = stage.memory[i];
                stage.memory[i] = m + eps * (stage_in - m);
            }
            spatial_smooth(&mut stage.memory, self.kernel);
        }
        for (b, &m) in undamping.iter_mut().zip(&agc[0].memory) {
            *b = (T::one() - m).max(T::zero()).min(T::one());
        }
    }

    /// Runs a signal from the reset state, calling `visit(t, bm, ihc)` after
    /// every sample.
    pub fn run<F>(&self, samples: &[T], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[T], &[T]),
    {
        if samples.is_empty() {
            return Err(Error::Input("empty signal".into()));
        }
        let n = self.n_channels();
        let mut state = self.reset_state();
        let mut bm = vec![T::zero(); n];
        let mut ihc = vec![T::zero(); n];
        for (t, &x) in samples.iter().enumerate() {
            self.step(&mut state, x, &mut bm, &mut ihc)?;
            visit(t, &bm, &ihc);
        }
        Ok(())
    }

    /// Inner-hair-cell outputs for every sample, from the reset state.
    pub fn process_signal(&self, samples: &[T]) -> Result<Cochleagram<T>> {
        let n = self.n_channels();
        let mut data = Vec::with_capacity(samples.len() * n);
        self.run(samples, |_, _, ihc| data.extend_from_slice(ihc))?;
        Ok(Cochleagram { n_channels: n, data })
    }

    /// Basilar-membrane outputs for every sample, from the reset state.
    pub fn process_signal_bm(&self, samples: &[T]) -> Result<Cochleagram<T>> {
        let n = self.n_channels();
        let mut data = Vec::with_capacity(samples.len() * n);
        self.run(samples, |_, bm, _| data.extend_from_slice(bm))?;
        Ok(Cochleagram { n_channels: n, data })
    }

    /// Runs one independent cascade per ear. The number of signals must equal
    /// the configured `n_ears`.
    pub fn process_ears(&self, ears: &[&[T]]) -> Result<Vec<Cochleagram<T>>> {
        if ears.len() != self.cfg.n_ears {
            return Err(Error::Input(format!(
                "expected {} ear signal(s), got {}",
                self.cfg.n_ears,
                ears.len()
            )));
        }
        ears.iter().map(|s| self.process_signal(s)).collect()
    }
}

/// Three-tap smoothing across channels; edges replicate the border value so
/// a spatially constant input is preserved.
fn spatial_smooth<T: Scalar>(values: &mut [T], kernel: [T; 3]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mut prev = values[0];
    for i in 0..n {
        let cur = values[i];
        let next = if i + 1 < n { values[i + 1] } else { cur };
        values[i] = kernel[0] * prev + kernel[1] * cur + kernel[2] * next;
        prev = cur;
    }
}
