//! Pipeline stages. Each subcommand is one function here; `pipeline` calls
//! them in order.

use std::collections::BTreeMap;
use std::path::Path;

use cochlea_feast::classify::{self, Dataset, Evaluation, LambdaResult};
use cochlea_feast::error::{Error, Result};
use cochlea_feast::events::{eligible_events, extract_context, walk_stream, EventStream};
use cochlea_feast::feast::{extract_feature_maps, feature_map_stream, EpochStats, FeastModel};
use cochlea_feast::features::{self, BinEvent, BlockLayout, BlockSource, CountTensor, FeatureCsvWriter};
use cochlea_feast::io::{self, PipelineConfig, Split};
use cochlea_feast::spikegen::SpikeEncoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::layout::{stage_seed, EventIndex, Layout, Utterance};

/// Everything a stage needs: configuration, output root and master seed.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: PipelineConfig,
    pub out: Layout,
    pub seed: u64,
}

fn file_stem(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Encodes every manifest row into an event file and writes the index.
pub fn encode(run: &Run, manifest: &Path) -> Result<EventIndex> {
    let cfg = &run.cfg;
    let manifest = io::load_manifest(manifest, &cfg.classes)?;
    let utterances = manifest
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let id = format!("{i:05}_{}", file_stem(&row.path));
            let audio = io::read_wav(&row.path)?;
            let cochlea = cfg.cochlea.with_sample_rate(audio.fs).map_err(|e| match e {
                Error::Config { key, msg } => Error::Config {
                    key,
                    msg: format!("{msg} ({})", row.path.display()),
                },
                other => other,
            })?;
            cochlea.validate()?;
            let encoder = SpikeEncoder::<f64>::new(&cochlea, &cfg.lif)?;
            let stream = encoder
                .encode(&audio.samples)
                .map_err(|e| Error::Input(format!("{}: {e}", row.path.display())))?;
            io::write_events(&run.out.events(&id), &stream)?;
            Ok(Utterance {
                id,
                wav: row.path.clone(),
                label: row.label.clone(),
                split: row.split,
                speaker: row.speaker.clone(),
                fs: audio.fs,
                samples: audio.samples.len() as u64,
                events: stream.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = EventIndex {
        mode: cfg.fac_mode().to_string(),
        n_channels: (cfg.cochlea.n_channels * cfg.cochlea.n_ears) as u16,
        utterances,
    };
    io::write_json(&run.out.index(), &index)?;
    Ok(index)
}

fn load_streams<'a>(run: &Run, utts: &[&'a Utterance]) -> Result<Vec<(&'a Utterance, EventStream)>> {
    utts.par_iter()
        .map(|&u| Ok((u, io::read_events(&run.out.events(&u.id))?)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeastTrainReport {
    pub scale: usize,
    pub eligible_contexts: usize,
    pub training_contexts: usize,
    pub epochs: Vec<EpochStats>,
    pub final_thresholds: Vec<f64>,
}

/// Picks which eligible contexts (in global order) train a scale.
fn choose_contexts(total: usize, max: usize, seed: u64) -> Vec<usize> {
    if max == 0 || total <= max {
        return (0..total).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, total, max).into_vec();
    picked.sort_unstable();
    picked
}

/// Trains one FEAST model per configured scale on the training split.
pub fn feast_train(run: &Run) -> Result<Vec<FeastTrainReport>> {
    let cfg = &run.cfg;
    let index = run.out.load_index()?;
    let train: Vec<&Utterance> = index.split(Split::Train).collect();
    let streams = load_streams(run, &train)?;
    let k = cfg.events.k;
    let eligible: Vec<Vec<usize>> = streams
        .par_iter()
        .map(|(_, s)| {
            Ok(eligible_events(s, k)?
                .into_iter()
                .enumerate()
                .filter_map(|(i, ok)| ok.then_some(i))
                .collect())
        })
        .collect::<Result<_>>()?;
    let total: usize = eligible.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Input(
            "the training split has no event with enough history to form a context".into(),
        ));
    }

    cfg.scales
        .par_iter()
        .map(|&scale| {
            let picked = choose_contexts(
                total,
                cfg.feast.max_training_contexts,
                stage_seed(run.seed, "contexts", scale),
            );
            // Split the global picks back into per-utterance event indices.
            let mut per_utt: Vec<Vec<usize>> = vec![Vec::new(); streams.len()];
            let mut offset = 0;
            let mut p = 0;
            for (u, elig) in eligible.iter().enumerate() {
                while p < picked.len() && picked[p] < offset + elig.len() {
                    per_utt[u].push(elig[picked[p] - offset]);
                    p += 1;
                }
                offset += elig.len();
            }
            let contexts: Vec<Vec<Vec<f64>>> = streams
                .par_iter()
                .zip(per_utt.par_iter())
                .map(|((_, stream), wanted)| {
                    let params = cfg.events.params::<f64>(stream.fs)?;
                    let mut out = Vec::with_capacity(wanted.len());
                    let mut next = 0;
                    walk_stream(stream, k + 1, |idx, history| {
                        if next < wanted.len() && wanted[next] == idx {
                            next += 1;
                            if let Some(ctx) =
                                extract_context(history, stream.events[idx], scale, &params)?
                            {
                                out.push(ctx.values);
                            }
                        }
                        Ok(())
                    })?;
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let contexts: Vec<Vec<f64>> = contexts.into_iter().flatten().collect();
            let mut model = FeastModel::<f64>::new(
                &cfg.feast,
                scale,
                cfg.events.samples,
                stage_seed(run.seed, "feast", scale),
            )?;
            let epochs = model.train(&contexts)?;
            io::save_feast(&run.out.feast_model(scale), &model, Some(cfg))?;
            let report = FeastTrainReport {
                scale,
                eligible_contexts: total,
                training_contexts: contexts.len(),
                epochs,
                final_thresholds: model.thresholds(),
            };
            io::write_json(&run.out.feast_stats(scale), &report)?;
            Ok(report)
        })
        .collect()
}

/// Loads the model of every configured scale, checking it matches the
/// configuration.
pub fn load_models(run: &Run) -> Result<Vec<FeastModel<f64>>> {
    run.cfg
        .scales
        .iter()
        .map(|&scale| {
            let path = run.out.feast_model(scale);
            if !path.is_file() {
                return Err(Error::Input(format!(
                    "{} not found; run `feast-train` first",
                    path.display()
                )));
            }
            let (model, _) = io::load_feast::<f64>(&path)?;
            if model.scale != scale || model.samples != run.cfg.events.samples {
                return Err(Error::format(
                    &path,
                    format!(
                        "model has scale {} x {} samples, configuration asks for {scale} x {}",
                        model.scale, model.samples, run.cfg.events.samples
                    ),
                ));
            }
            Ok(model)
        })
        .collect()
}

/// Runs the trained models over every utterance and writes feature maps.
pub fn feast_apply(run: &Run) -> Result<usize> {
    let index = run.out.load_index()?;
    let models = load_models(run)?;
    let counts = index
        .utterances
        .par_iter()
        .map(|u| {
            let stream = io::read_events(&run.out.events(&u.id))?;
            let params = run.cfg.events.params::<f64>(stream.fs)?;
            let maps = extract_feature_maps(&models, &stream, &params)?;
            let mut n = 0;
            for (scale, map) in run.cfg.scales.iter().zip(&maps) {
                io::write_events(&run.out.map(*scale, &u.id), &feature_map_stream(&stream, map))?;
                n += map.len();
            }
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(counts.into_iter().sum())
}

/// Feature sets a configuration produces: `(name, sources)`. Every scale
/// gets its own set; `multiscale` concatenates all 2-D scales when there
/// are at least two.
pub fn feature_sets(cfg: &PipelineConfig, baseline: bool) -> Vec<(String, Vec<BlockSource>)> {
    if baseline {
        return vec![("baseline".into(), vec![BlockSource::Raw])];
    }
    let mut sets: Vec<(String, Vec<BlockSource>)> = cfg
        .scales
        .iter()
        .map(|&s| (format!("s{s}"), vec![BlockSource::Scale(s)]))
        .collect();
    let two_d: Vec<BlockSource> = cfg
        .scales
        .iter()
        .filter(|&&s| s > 1)
        .map(|&s| BlockSource::Scale(s))
        .collect();
    if two_d.len() > 1 {
        sets.push(("multiscale".into(), two_d));
    }
    sets
}

fn bin_stream(stream: &EventStream, u: &Utterance, neurons: usize, bins: usize) -> Result<CountTensor> {
    features::time_bin(
        stream.events.iter().map(|e| BinEvent {
            t: e.t,
            ch: e.ch,
            neuron: e.id as u16,
        }),
        u.samples.max(1),
        neurons,
        stream.n_channels as usize,
        bins,
    )
}

fn neurons_of(cfg: &PipelineConfig, src: &BlockSource) -> usize {
    match src {
        BlockSource::Raw => cfg.lif.neurons().len(),
        BlockSource::Scale(_) => cfg.feast.neurons,
    }
}

const FEATURIZE_CHUNK: usize = 64;

/// Writes one CSV per (feature set, bin count, split). With `baseline` the
/// raw spike streams are binned instead of the feature maps.
pub fn featurize(run: &Run, baseline: bool) -> Result<Vec<String>> {
    let cfg = &run.cfg;
    let index = run.out.load_index()?;
    let mut written = Vec::new();
    for (name, sources) in feature_sets(cfg, baseline) {
        for bins in cfg.features.sweep() {
            for split in [Split::Train, Split::Test] {
                let utts: Vec<&Utterance> = index.split(split).collect();
                let path = run.out.features(&name, bins, split);
                let layout: Vec<BlockLayout> = sources
                    .iter()
                    .map(|src| BlockLayout {
                        source: src.clone(),
                        neurons: neurons_of(cfg, src),
                        channels: index.n_channels as usize,
                        bins,
                    })
                    .collect();
                io::write_atomic_with(&path, |w| {
                    let mut writer = FeatureCsvWriter::new(w, &layout)?;
                    for chunk in utts.chunks(FEATURIZE_CHUNK) {
                        let vectors = chunk
                            .par_iter()
                            .map(|u| {
                                let blocks = sources
                                    .iter()
                                    .map(|src| {
                                        let file = match src {
                                            BlockSource::Raw => run.out.events(&u.id),
                                            BlockSource::Scale(s) => run.out.map(*s, &u.id),
                                        };
                                        let stream = io::read_events(&file)?;
                                        let counts = bin_stream(&stream, u, neurons_of(cfg, src), bins)
                                            .map_err(|e| Error::Input(format!("{}: {e}", file.display())))?;
                                        Ok((src.clone(), counts))
                                    })
                                    .collect::<Result<Vec<_>>>()?;
                                features::assemble::<f64>(&u.label, &blocks, cfg.features.normalize)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        for (u, fv) in chunk.iter().zip(&vectors) {
                            writer.write_row(&u.id, fv)?;
                        }
                    }
                    writer.finish()?;
                    Ok(())
                })?;
                written.push(path.display().to_string());
            }
        }
    }
    Ok(written)
}

/// `(set, bins)` pairs the configuration expects, restricted to those whose
/// training table exists.
fn available_tables(run: &Run) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for baseline in [true, false] {
        for (name, _) in feature_sets(&run.cfg, baseline) {
            for bins in run.cfg.features.sweep() {
                if run.out.features(&name, bins, Split::Train).is_file() {
                    out.push((name.clone(), bins));
                }
            }
        }
    }
    out
}

fn load_table(path: &Path) -> Result<io::FeatureTable> {
    if !path.is_file() {
        return Err(Error::Input(format!("{} not found; run `featurize` first", path.display())));
    }
    io::read_feature_csv(path)
}

/// Trains one classifier per available feature table.
pub fn train_classifiers(run: &Run) -> Result<Vec<(String, usize)>> {
    let tables = available_tables(run);
    if tables.is_empty() {
        return Err(Error::Input("no feature tables found; run `featurize` first".into()));
    }
    let mut spec = run.cfg.classifier.clone();
    spec.seed = stage_seed(run.seed, "classifier", 0);
    for (set, bins) in &tables {
        let table = load_table(&run.out.features(set, *bins, Split::Train))?;
        let model = classify::train(Dataset::new(&table.rows, &table.labels)?, &spec)
            .map_err(|e| Error::Input(format!("{set}_b{bins}: {e}")))?;
        io::save_linear(&run.out.classifier(set, *bins), &model, &table.columns, Some(&run.cfg))?;
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_set: String,
    pub bins: usize,
    pub mode: String,
    pub dims: usize,
    pub lambda: f64,
    pub validation_accuracy: f64,
    pub grid: Vec<LambdaResult>,
    pub test: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub feature_set: String,
    pub bins: usize,
    pub dims: usize,
    pub lambda: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    /// Best bin count per feature set, chosen by validation accuracy.
    pub results: Vec<SummaryRow>,
    /// Every (feature set, bin count) evaluated.
    pub sweep: Vec<SummaryRow>,
}

/// Evaluates every trained classifier on the test split and writes reports.
pub fn evaluate(run: &Run) -> Result<Summary> {
    let tables = available_tables(run);
    let mut sweep = Vec::new();
    for (set, bins) in &tables {
        let path = run.out.classifier(set, *bins);
        if !path.is_file() {
            continue;
        }
        let stored = io::load_linear::<f64>(&path)?;
        let test = load_table(&run.out.features(set, *bins, Split::Test))?;
        if test.columns != stored.columns {
            return Err(Error::Input(format!(
                "{}: test features do not match the classifier's columns",
                path.display()
            )));
        }
        let eval = stored.model.evaluate(Dataset::new(&test.rows, &test.labels)?)?;
        let validation_accuracy = stored
            .model
            .grid
            .iter()
            .find(|g| g.lambda == stored.model.lambda)
            .map_or(f64::NAN, |g| g.val_accuracy);
        let report = EvalReport {
            feature_set: set.clone(),
            bins: *bins,
            mode: run.cfg.fac_mode().to_string(),
            dims: stored.model.dims(),
            lambda: stored.model.lambda,
            validation_accuracy,
            grid: stored.model.grid.clone(),
            test: eval.clone(),
        };
        io::write_json(&run.out.report(&format!("{set}_b{bins}")), &report)?;
        sweep.push(SummaryRow {
            feature_set: set.clone(),
            bins: *bins,
            dims: report.dims,
            lambda: report.lambda,
            validation_accuracy,
            test_accuracy: eval.accuracy,
        });
    }
    if sweep.is_empty() {
        return Err(Error::Input("no trained classifiers found; run `train-classifier` first".into()));
    }
    let mut best: BTreeMap<&str, &SummaryRow> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for row in &sweep {
        match best.get(row.feature_set.as_str()) {
            None => {
                order.push(&row.feature_set);
                best.insert(&row.feature_set, row);
            }
            Some(b) if row.validation_accuracy > b.validation_accuracy => {
                best.insert(&row.feature_set, row);
            }
            _ => {}
        }
    }
    let results = order.iter().map(|s| best[s].clone()).collect();
    let summary = Summary {
        mode: run.cfg.fac_mode().to_string(),
        seed: run.seed,
        results,
        sweep: sweep.clone(),
    };
    io::write_json(&run.out.report("summary"), &summary)?;
    Ok(summary)
}

/// Every stage in order.
pub fn pipeline(run: &Run, manifest: &Path) -> Result<Summary> {
    encode(run, manifest)?;
    feast_train(run)?;
    feast_apply(run)?;
    featurize(run, false)?;
    featurize(run, true)?;
    train_classifiers(run)?;
    evaluate(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_choice() {
        assert_eq!(choose_contexts(5, 10, 1), vec![0, 1, 2, 3, 4]);
        assert_eq!(choose_contexts(5, 0, 1), vec![0, 1, 2, 3, 4]);
        let a = choose_contexts(1000, 10, 3);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, choose_contexts(1000, 10, 3));
    }

    #[test]
    fn sets_for_paper_scales() {
        let cfg = PipelineConfig::default();
        let names: Vec<String> = feature_sets(&cfg, false).into_iter().map(|s| s.0).collect();
        assert_eq!(names, ["s5", "s13", "s25", "s37", "multiscale"]);
        assert_eq!(feature_sets(&cfg, true)[0].0, "baseline");
        let cfg = PipelineConfig {
            scales: vec![1, 5, 13],
            ..PipelineConfig::default()
        };
        let sets = feature_sets(&cfg, false);
        assert_eq!(sets[3].0, "multiscale");
        assert_eq!(sets[3].1, vec![BlockSource::Scale(5), BlockSource::Scale(13)]);
    }
}
