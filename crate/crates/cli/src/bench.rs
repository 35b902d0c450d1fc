//! Throughput of the encoder and of FEAST inference, sequential and
//! utterance-parallel.

use std::time::Instant;

use cochlea_feast::error::{Error, Result};
use cochlea_feast::events::EventStream;
use cochlea_feast::feast::{extract_feature_maps, FeatureMapEvent};
use cochlea_feast::io;
use cochlea_feast::spikegen::SpikeEncoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::layout::Utterance;
use crate::stages::{load_models, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Throughput {
    pub wall_seconds: f64,
    pub per_second: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeastBench {
    pub input_events: usize,
    pub feature_events: usize,
    pub sequential: Throughput,
    pub parallel: Throughput,
    pub parallel_matches_sequential: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub threads: usize,
    pub utterances: usize,
    pub audio_samples: u64,
    pub spikes: usize,
    /// Audio samples per second through cochlea and LIF encoding.
    pub encode_sequential: Throughput,
    pub encode_parallel: Throughput,
    pub encode_parallel_matches_sequential: bool,
    /// Input events per second through FEAST inference; absent without
    /// trained models.
    pub feast: Option<FeastBench>,
}

fn encode_one(run: &Run, u: &Utterance) -> Result<EventStream> {
    let audio = io::read_wav(&u.wav)?;
    let cochlea = run.cfg.cochlea.with_sample_rate(audio.fs)?;
    cochlea.validate()?;
    SpikeEncoder::<f64>::new(&cochlea, &run.cfg.lif)?.encode(&audio.samples)
}

fn throughput(count: f64, start: Instant) -> Throughput {
    let wall = start.elapsed().as_secs_f64();
    Throughput {
        wall_seconds: wall,
        per_second: if wall > 0.0 { count / wall } else { f64::INFINITY },
    }
}

pub fn bench(run: &Run, limit: Option<usize>) -> Result<BenchReport> {
    let index = run.out.load_index()?;
    let mut utts: Vec<&Utterance> = index.utterances.iter().collect();
    if let Some(n) = limit {
        utts.truncate(n);
    }
    if utts.is_empty() {
        return Err(Error::Input("empty dataset: the index lists no utterances".into()));
    }
    let audio_samples: u64 = utts.iter().map(|u| u.samples).sum();

    let start = Instant::now();
    let seq: Vec<EventStream> = utts.iter().map(|u| encode_one(run, u)).collect::<Result<_>>()?;
    let encode_sequential = throughput(audio_samples as f64, start);
    let start = Instant::now();
    let par: Vec<EventStream> = utts.par_iter().map(|u| encode_one(run, u)).collect::<Result<_>>()?;
    let encode_parallel = throughput(audio_samples as f64, start);
    let spikes = seq.iter().map(EventStream::len).sum();

    let feast = if run.cfg.scales.iter().all(|&s| run.out.feast_model(s).is_file()) {
        let models = load_models(run)?;
        let infer = |s: &EventStream| -> Result<Vec<Vec<FeatureMapEvent>>> {
            extract_feature_maps(&models, s, &run.cfg.events.params::<f64>(s.fs)?)
        };
        let start = Instant::now();
        let a: Vec<_> = seq.iter().map(infer).collect::<Result<_>>()?;
        let sequential = throughput(spikes as f64, start);
        let start = Instant::now();
        let b: Vec<_> = seq.par_iter().map(infer).collect::<Result<_>>()?;
        let parallel = throughput(spikes as f64, start);
        Some(FeastBench {
            input_events: spikes,
            feature_events: a.iter().flatten().map(Vec::len).sum(),
            sequential,
            parallel,
            parallel_matches_sequential: a == b,
        })
    } else {
        None
    };

    let report = BenchReport {
        threads: rayon::current_num_threads(),
        utterances: utts.len(),
        audio_samples,
        spikes,
        encode_sequential,
        encode_parallel,
        encode_parallel_matches_sequential: seq == par,
        feast,
    };
    io::write_json(&run.out.report("bench"), &report)?;
    Ok(report)
}
