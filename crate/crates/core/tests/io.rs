use std::fs;

use graphpde::datagen::{generate_samples, DatagenConfig};
use graphpde::io::*;
use graphpde::model::{ModelConfig, ModelParams};
use graphpde::trainer::{Adam, EpochLog};

fn small() -> (DatagenConfig, Vec<graphpde::datagen::PdeSample>, graphpde::datagen::GenerationStats) {
    let mut cfg = DatagenConfig::with_count(5);
    cfg.grid.n_t = 4;
    let (s, st) = generate_samples(&cfg, 9).unwrap();
    (cfg, s, st)
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let (cfg, samples, stats) = small();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &samples, &stats, Some(&cfg), 9).unwrap();
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back.samples.len(), 5);
    for (a, b) in samples.iter().zip(&back.samples) {
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.solution), bits(&b.solution));
        assert_eq!(bits(&a.ic), bits(&b.ic));
        assert_eq!(a, b);
    }
    assert_eq!(back.manifest.stats, stats);
    assert_eq!(back.manifest.config.as_ref(), Some(&cfg));
    let first = fs::read(dir.path().join("000000.bin")).unwrap();
    assert_eq!(first.len(), 4 * (256 + 4 * 256));
}

#[test]
fn dataset_bytes_repeat() {
    let (cfg, samples, stats) = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_dataset(a.path(), &samples, &stats, Some(&cfg), 9).unwrap();
    write_dataset(b.path(), &samples, &stats, Some(&cfg), 9).unwrap();
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn damaged_datasets_are_refused() {
    let (cfg, samples, stats) = small();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &samples, &stats, Some(&cfg), 9).unwrap();
    let bin = dir.path().join("000002.bin");
    let bytes = fs::read(&bin).unwrap();

    fs::write(&bin, &bytes[..100]).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(IoError::CorruptFile { offset: 100, .. })));

    let mut flipped = bytes.clone();
    flipped[7] ^= 1;
    fs::write(&bin, &flipped).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(IoError::ChecksumMismatch { .. })));
    fs::write(&bin, &bytes).unwrap();
    assert!(read_dataset(dir.path()).is_ok());

    let manifest = dir.path().join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replace("\"count\": 5", "\"count\": 4")).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(IoError::CountMismatch { .. })));

    fs::write(&manifest, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(IoError::VersionMismatch { found: 2, .. })));
}

fn tiny() -> ModelConfig {
    ModelConfig { d_e: 8, heads: 2, feat_hidden: 8, d_h: 4, hyper_hidden: 6, enc_layers: 1, n_mod: 2, ..ModelConfig::desk() }
}

#[test]
fn checkpoint_round_trip() {
    let params = ModelParams::init(tiny(), 4).unwrap();
    let mut adam = Adam::new(params.data.len());
    let mut p2 = params.clone();
    adam.update(&mut p2.data, &vec![0.25; params.data.len()], 1e-3);
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &p2, Some(&adam), 7).unwrap();
    let back = load_checkpoint(dir.path()).unwrap();
    assert_eq!(back.params.data, p2.data);
    assert_eq!(back.params.config, p2.config);
    assert_eq!(back.optimizer.as_ref(), Some(&adam));
    assert_eq!(back.manifest.epoch, 7);
    assert_eq!(back.manifest.params.iter().map(|p| p.name.as_str()).collect::<Vec<_>>()[0], "enc.type_emb");

    let bin = dir.path().join("params.bin");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(IoError::CorruptFile { .. })));
    fs::write(&bin, &bytes).unwrap();

    let manifest = dir.path().join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replacen("\"d_h\": 4", "\"d_h\": 5", 1)).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(IoError::Incompatible { .. })));
}

#[test]
fn loss_csv_round_trip() {
    let curve = vec![
        EpochLog { epoch: 0, lr: 3e-5, train_loss: 0.9, test_loss: Some(1.0) },
        EpochLog { epoch: 1, lr: 6e-5, train_loss: 0.5, test_loss: Some(0.75) },
    ];
    let s = loss_csv(&curve);
    assert!(s.starts_with("epoch,lr,train_loss,test_loss\n"));
    assert_eq!(parse_loss_csv(&s).unwrap(), curve);
    let plain: Vec<EpochLog> = curve.iter().map(|l| EpochLog { test_loss: None, ..l.clone() }).collect();
    let s = loss_csv(&plain);
    assert!(s.starts_with("epoch,lr,train_loss\n"));
    assert_eq!(parse_loss_csv(&s).unwrap(), plain);
}

#[test]
fn heatmaps() {
    let opts = HeatmapOptions::default();
    let flat = heatmap_svg(&vec![0.5; 101 * 256], 101, 256, &opts).unwrap();
    let plot_fills: Vec<&str> = flat
        .lines()
        .take_while(|l| !l.contains("fill=\"none\""))
        .filter(|l| l.starts_with("<rect x="))
        .filter_map(|l| l.split("fill=\"").nth(1))
        .collect();
    assert_eq!(plot_fills.len(), 101);
    assert!(plot_fills.windows(2).all(|w| w[0] == w[1]));

    let field: Vec<f32> = (0..101 * 256).map(|k| ((k % 256) as f32 * 0.05).sin() * (k / 256) as f32).collect();
    let a = heatmap_svg(&field, 101, 256, &opts).unwrap();
    assert_eq!(a, heatmap_svg(&field, 101, 256, &opts).unwrap());
    assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.svg");
    export_heatmap(&path, &field, 101, 256, &opts).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), a);

    let mut bad = field.clone();
    bad[3] = f32::NAN;
    assert!(heatmap_svg(&bad, 101, 256, &opts).is_err());
    assert!(heatmap_svg(&field, 100, 256, &opts).is_err());
    assert_eq!(VIRIDIS[0], [68, 1, 84]);
    assert_eq!(VIRIDIS[255], [253, 231, 37]);
}
