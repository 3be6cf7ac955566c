use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hencall::audio::{load_wav, write_wav, AudioClip, SAMPLE_RATE};
use hencall::features::{cache, extract, FeatureSet};
use hencall::manifest;
use tempfile::TempDir;

const FAST: &str = "hidden_size = 8\nboom_dim = 16\nepochs = 3\nbatch_size = 8\noptimizer = adam\nlearning_rate = 0.005\ncepstral_pool = 10\ngmm_components = 2\n";

fn hencall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hencall"))
        .args(args)
        .output()
        .expect("spawn hencall")
}

fn ok(args: &[&str]) -> String {
    let out = hencall(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(per_class: usize, seed: u64) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("fast.conf"), FAST).unwrap();
        ok(&[
            "synth",
            "--out",
            p(&dir.path().join("ds")),
            "--per-class",
            &per_class.to_string(),
            "--seed",
            &seed.to_string(),
        ]);
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn features(&self, split: Option<&str>, out: &str) -> PathBuf {
        let out = self.path(out);
        let manifest = self.path("ds/manifest.tsv");
        let conf = self.path("fast.conf");
        let mut args = vec![
            "features",
            "--manifest",
            p(&manifest),
            "--config",
            p(&conf),
            "--out",
            p(&out),
        ];
        if let Some(s) = split {
            args.extend(["--split", s]);
        }
        ok(&args);
        out
    }
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_dataset_and_is_repeatable() {
    let f = Fixture::new(20, 7);
    let first = file_bytes(&f.path("ds"));
    assert_eq!(
        first.iter().filter(|(n, _)| n.ends_with(".wav")).count(),
        160
    );
    assert!(first.iter().any(|(n, _)| n == "manifest.tsv"));
    assert_eq!(
        manifest::read(f.path("ds/manifest.tsv")).unwrap().len(),
        160
    );

    ok(&[
        "synth",
        "--out",
        p(&f.path("ds")),
        "--per-class",
        "20",
        "--seed",
        "7",
    ]);
    assert_eq!(file_bytes(&f.path("ds")), first);
}

#[test]
fn synth_into_unwritable_location_fails() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = hencall(&[
        "synth",
        "--out",
        p(&blocker.join("sub")),
        "--per-class",
        "1",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("i/o failure"));
}

#[test]
fn segment_prints_tab_separated_intervals() {
    let f = Fixture::new(1, 3);
    let text = ok(&["segment", "--wav", p(&f.path("ds/food_calls_000.wav"))]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 2);
    let mut last = -1.0;
    for l in lines {
        let (a, b) = l.split_once('\t').unwrap();
        let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        assert!(last <= a && a < b);
        last = b;
    }
    let all = ok(&["segment", "--manifest", p(&f.path("ds/manifest.tsv"))]);
    assert_eq!(all.lines().filter(|l| l.starts_with("# ")).count(), 8);
}

#[test]
fn feature_cache_matches_in_memory_extraction() {
    let f = Fixture::new(2, 5);
    let cache_path = f.features(None, "all.hvfc");
    let cached = cache::read(&cache_path).unwrap();
    let entries = manifest::read(f.path("ds/manifest.tsv")).unwrap();
    assert_eq!(cached.len(), entries.len());
    let cfg = hencall::config::RunConfig::load(f.path("fast.conf")).unwrap();
    for (c, e) in cached.iter().zip(&entries) {
        let mut fresh = extract(
            &load_wav(&e.path).unwrap(),
            Some(e.labels),
            &cfg.experiment.features,
        )
        .unwrap()
        .features;
        fresh.id = e.id();
        assert_eq!(c, &fresh);
        assert_eq!(FeatureSet::MfccLfcc.select(c).cepstral.cols, 80);
    }
}

#[test]
fn silent_clip_is_excluded_with_warning() {
    let f = Fixture::new(1, 9);
    let silent = f.path("ds/silence.wav");
    write_wav(
        &silent,
        &AudioClip::new(vec![0.0; SAMPLE_RATE as usize], SAMPLE_RATE, "s").unwrap(),
    )
    .unwrap();
    let mut text = fs::read_to_string(f.path("ds/manifest.tsv")).unwrap();
    text += "silence.wav\tfear\n";
    fs::write(f.path("ds/manifest.tsv"), text).unwrap();
    let out_path = f.path("c.hvfc");
    let out = hencall(&[
        "features",
        "--manifest",
        p(&f.path("ds/manifest.tsv")),
        "--out",
        p(&out_path),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`silence`"));
    assert_eq!(cache::read(&out_path).unwrap().len(), 8);
}

#[test]
fn train_eval_round_trip() {
    let f = Fixture::new(4, 11);
    let train = f.features(None, "train.hvfc");
    let conf = f.path("fast.conf");
    let (run_a, run_b) = (f.path("a"), f.path("b"));
    for run in [&run_a, &run_b] {
        ok(&[
            "train",
            "--cache",
            p(&train),
            "--config",
            p(&conf),
            "--seed",
            "4",
            "--out",
            p(run),
        ]);
    }
    let history = fs::read_to_string(run_a.join("history.tsv")).unwrap();
    assert_eq!(
        history,
        fs::read_to_string(run_b.join("history.tsv")).unwrap()
    );
    assert_eq!(
        fs::read(run_a.join("model.ckpt")).unwrap(),
        fs::read(run_b.join("model.ckpt")).unwrap()
    );
    assert_eq!(history.lines().count(), 3);

    let report = ok(&[
        "eval",
        "--checkpoint",
        p(&run_a.join("model.ckpt")),
        "--cache",
        p(&train),
        "--split",
        "train",
    ]);
    let final_f1: f64 = history
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    let value = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!((value("sample_f1:") - final_f1).abs() < 1e-9);
    assert_eq!(report.lines().filter(|l| l.starts_with("f1.")).count(), 8);
    let matrix_start = report
        .lines()
        .position(|l| l.starts_with("confusion"))
        .unwrap();
    let rows: Vec<&str> = report.lines().skip(matrix_start + 2).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split('\t').count() == 5));

    let again = f.path("report.txt");
    ok(&[
        "eval",
        "--checkpoint",
        p(&run_a.join("model.ckpt")),
        "--cache",
        p(&train),
        "--split",
        "train",
        "--out",
        p(&again),
    ]);
    assert_eq!(fs::read_to_string(&again).unwrap(), report);
}

#[test]
fn baselines_train_and_classify() {
    let f = Fixture::new(4, 12);
    let train = f.features(None, "train.hvfc");
    let conf = f.path("fast.conf");
    for model in ["gmm", "cascade"] {
        let run = f.path(model);
        ok(&[
            "train",
            "--cache",
            p(&train),
            "--config",
            p(&conf),
            "--model",
            model,
            "--out",
            p(&run),
        ]);
        assert!(!run.join("history.tsv").exists());
        let wav = f.path("ds/fear_000.wav");
        let line = ok(&[
            "classify",
            "--checkpoint",
            p(&run.join("model.ckpt")),
            "--config",
            p(&conf),
            "--wav",
            p(&wav),
        ]);
        let cols: Vec<&str> = line.trim_end().split('\t').collect();
        assert_eq!(cols[0], "fear_000");
        assert_eq!(cols[3].split(',').count(), 8);
    }
}

#[test]
fn eval_without_checkpoint_fails() {
    let f = Fixture::new(1, 2);
    let c = f.features(None, "c.hvfc");
    let out = hencall(&[
        "eval",
        "--checkpoint",
        p(&f.path("missing.ckpt")),
        "--cache",
        p(&c),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ckpt"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "hiden_size = 3\n").unwrap();
    let out = hencall(&["segment", "--wav", "x.wav", "--config", p(&conf)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn grid_covers_every_cell_deterministically() {
    let f = Fixture::new(12, 13);
    let conf = f.path("fast.conf");
    let manifest = f.path("ds/manifest.tsv");
    let a = ok(&["grid", "--manifest", p(&manifest), "--config", p(&conf)]);
    let b = ok(&["grid", "--manifest", p(&manifest), "--config", p(&conf)]);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "feature_set\tsharnn\tgmm\tcascade");
    let sets: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    let expected: Vec<&str> = FeatureSet::ALL.iter().map(|s| s.name()).collect();
    assert_eq!(sets, expected);
    for l in &lines[1..] {
        let cells: Vec<f64> = l.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}
