use std::path::Path;

use cochlea_feast::classify::{train, Dataset, TrainSpec};
use cochlea_feast::error::Error;
use cochlea_feast::events::EventStream;
use cochlea_feast::feast::{FeastConfig, FeastModel};
use cochlea_feast::io::{self, PipelineConfig, Split};
use cochlea_feast::AudEvent;
use tempfile::tempdir;

fn write_raw_wav(path: &Path, channels: u16, bits: u16, samples: &[i32]) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: 16_000,
        bits_per_sample: bits,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        if bits == 16 {
            w.write_sample(s as i16).unwrap();
        } else {
            w.write_sample(s).unwrap();
        }
    }
    w.finalize().unwrap();
}

#[test]
fn wav_scaling_and_rejections() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("a.wav");
    write_raw_wav(&p, 1, 16, &[32767, -32768, 0, 16384]);
    let audio = io::read_wav(&p).unwrap();
    assert_eq!(audio.fs, 16_000);
    assert_eq!(audio.samples, vec![32767.0 / 32768.0, -1.0, 0.0, 0.5]);
    assert!((audio.samples[0] - 0.999_969_482_421_875).abs() < 1e-15);

    let stereo = dir.path().join("s.wav");
    write_raw_wav(&stereo, 2, 16, &[1, 2, 3, 4]);
    assert!(matches!(io::read_wav(&stereo), Err(Error::UnsupportedFormat { .. })));
    let deep = dir.path().join("d.wav");
    write_raw_wav(&deep, 1, 24, &[1, 2, 3]);
    assert!(matches!(io::read_wav(&deep), Err(Error::UnsupportedFormat { .. })));

    let junk = dir.path().join("j.wav");
    std::fs::write(&junk, b"not a wav file at all").unwrap();
    assert!(matches!(io::read_wav(&junk), Err(Error::Format { .. })));
    assert!(matches!(io::read_wav(&dir.path().join("missing.wav")), Err(Error::Io { .. })));
}

#[test]
fn wav_round_trip() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("r.wav");
    let x: Vec<f64> = (0..100).map(|i| (i as f64 - 50.0) / 64.0).collect();
    io::write_wav(&p, 8_000, &x).unwrap();
    let back = io::read_wav(&p).unwrap();
    assert_eq!(back.fs, 8_000);
    assert_eq!(back.samples, x);
}

fn stream(events: &[(u64, u16, u8)]) -> EventStream {
    let mut s = EventStream::new(16_000, 64);
    s.events = events.iter().map(|&(t, ch, id)| AudEvent { t, ch, id }).collect();
    s
}

fn format_msg(e: Error) -> String {
    match e {
        Error::Format { msg, .. } => msg,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn event_files_round_trip() {
    let dir = tempdir().unwrap();
    for s in [stream(&[]), stream(&[(0, 3, 0), (5, 1, 1), (5, 2, 0)])] {
        let p = dir.path().join("e.aevt");
        io::write_events(&p, &s).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 20 + 12 * s.len());
        assert_eq!(io::read_events(&p).unwrap(), s);
    }
}

#[test]
fn event_file_errors() {
    let p = Path::new("x.aevt");
    let good = io::encode_events(&stream(&[(0, 3, 0), (5, 1, 1), (9, 2, 0)])).unwrap();

    let msg = format_msg(io::decode_events(p, &good[..good.len() - 5]).unwrap_err());
    assert!(msg.contains("byte offset 44"), "{msg}");
    let msg = format_msg(io::decode_events(p, &good[..10]).unwrap_err());
    assert!(msg.contains("byte offset 10"), "{msg}");

    let mut extra = good.clone();
    extra.extend_from_slice(&[0, 0, 0]);
    let msg = format_msg(io::decode_events(p, &extra).unwrap_err());
    assert!(msg.contains("byte offset 56"), "{msg}");

    let mut magic = good.clone();
    magic[0] = b'X';
    let msg = format_msg(io::decode_events(p, &magic).unwrap_err());
    assert!(msg.contains("byte offset 0"), "{msg}");

    let mut version = good.clone();
    version[4] = 2;
    assert!(matches!(
        io::decode_events(p, &version),
        Err(Error::Version { found: 2, supported: 1, .. })
    ));

    let mut unsorted = good.clone();
    unsorted[20 + 12..20 + 20].copy_from_slice(&100u64.to_le_bytes());
    let msg = format_msg(io::decode_events(p, &unsorted).unwrap_err());
    assert!(msg.contains("record 2 at byte offset 44"), "{msg}");

    let mut channel = good;
    channel[20 + 8..20 + 10].copy_from_slice(&64u16.to_le_bytes());
    assert!(io::decode_events(p, &channel).is_err());

    assert!(io::encode_events(&stream(&[(5, 0, 0), (1, 0, 0)])).is_err());
}

fn trained_feast() -> FeastModel<f64> {
    let cfg = FeastConfig {
        neurons: 3,
        epochs: 2,
        ..FeastConfig::default()
    };
    let mut m = FeastModel::<f64>::new(&cfg, 3, 4, 42).unwrap();
    let contexts: Vec<Vec<f64>> = (0..50)
        .map(|i| (0..12).map(|j| ((i * 7 + j * 3) % 11) as f64 / 10.0 + 0.01).collect())
        .collect();
    m.train(&contexts).unwrap();
    m
}

#[test]
fn feast_container_round_trip_and_checksum() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("m.fmdl");
    let m = trained_feast();
    let cfg = PipelineConfig::default();
    io::save_feast(&p, &m, Some(&cfg)).unwrap();
    let (back, back_cfg) = io::load_feast::<f64>(&p).unwrap();
    assert_eq!(back, m);
    assert_eq!(back_cfg, Some(cfg));

    let mut bytes = std::fs::read(&p).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 0x01;
    assert!(matches!(io::decode_feast::<f64>(&p, &bytes), Err(Error::Checksum { .. })));
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[4] = 9;
    assert!(matches!(io::decode_feast::<f64>(&p, &bytes), Err(Error::Version { .. })));
    let bytes = std::fs::read(&p).unwrap();
    assert!(matches!(io::decode_feast::<f64>(&p, &bytes[..30]), Err(Error::Format { .. })));
    assert!(matches!(io::decode_linear::<f64>(&p, &bytes), Err(Error::Format { .. })));
}

#[test]
fn linear_container_round_trip() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("c.lmdl");
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1 + 0.3, (i % 3) as f64]).collect();
    let y: Vec<String> = (0..20).map(|i| if i < 10 { "a" } else { "b" }.to_string()).collect();
    let model = train(Dataset::new(&x, &y).unwrap(), &TrainSpec::default()).unwrap();
    let columns = vec!["f0".to_string(), "f1".to_string()];
    io::save_linear(&p, &model, &columns, None).unwrap();
    let back = io::load_linear::<f64>(&p).unwrap();
    assert_eq!(back.model, model);
    assert_eq!(back.columns, columns);
    assert!(io::save_linear(&p, &model, &columns[..1], None).is_ok());
    assert!(matches!(io::load_linear::<f64>(&p), Err(Error::Format { .. })));
}

#[test]
fn config_errors_name_their_keys() {
    let p = Path::new("c.toml");
    assert_eq!(io::parse_config(p, "").unwrap(), PipelineConfig::default());
    match io::parse_config(p, "[feast]\ndelta_i = -1.0\n") {
        Err(Error::Config { key, .. }) => assert_eq!(key, "feast.delta_i"),
        other => panic!("{other:?}"),
    }
    match io::parse_config(p, "[lif]\ntau_lif = \"slow\"\n") {
        Err(Error::ConfigParse { key, .. }) => assert_eq!(key, "lif.tau_lif"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(io::parse_config(p, "scales = [5, 5]\n"), Err(Error::Config { .. })));
    assert!(matches!(io::parse_config(p, "classes = [\"a\"]\n"), Err(Error::Config { .. })));
    assert!(matches!(io::parse_config(p, "bogus = 1\n"), Err(Error::ConfigParse { .. })));
    let linear = io::parse_config(p, "[cochlea]\nfac_enabled = false\n").unwrap();
    assert_eq!(linear.fac_mode(), "linear CAR");
    assert_eq!(PipelineConfig::default().fac_mode(), "CAR-FAC");
}

#[test]
fn manifest_loading() {
    let dir = tempdir().unwrap();
    io::write_wav(&dir.path().join("a.wav"), 8_000, &[0.0; 10]).unwrap();
    io::write_wav(&dir.path().join("b.wav"), 8_000, &[0.0; 10]).unwrap();
    let classes: Vec<String> = vec!["0".into(), "1".into()];
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "path,label,split,speaker\na.wav,0,train,s1\nb.wav,1,test,s2\n").unwrap();
    let man = io::load_manifest(&m, &classes).unwrap();
    assert_eq!(man.rows.len(), 2);
    assert_eq!(man.rows[0].path, dir.path().join("a.wav"));
    assert_eq!(man.split(Split::Test).count(), 1);

    let cases = [
        "path,label,split,speaker\na.wav,7,train,s1\nb.wav,1,test,s2\n",
        "path,label,split,speaker\na.wav,0,train,s1\nzz.wav,1,test,s2\n",
        "path,label,split,speaker\na.wav,0,train,s1\nb.wav,1,train,s2\n",
        "path,label,split,speaker\na.wav,0,dev,s1\nb.wav,1,test,s2\n",
    ];
    for text in cases {
        std::fs::write(&m, text).unwrap();
        assert!(matches!(io::load_manifest(&m, &classes), Err(Error::Format { .. })), "{text}");
    }
}

#[test]
fn json_round_trip_has_trailing_newline() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("r.json");
    io::write_json(&p, &vec![1.5, 2.0]).unwrap();
    assert!(std::fs::read_to_string(&p).unwrap().ends_with("]\n"));
    let back: Vec<f64> = io::read_json(&p).unwrap();
    assert_eq!(back, vec![1.5, 2.0]);
}
