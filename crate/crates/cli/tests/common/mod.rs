#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_mlpl");

/// Runs the CLI inside `dir`.
pub fn mlpl(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn mlpl")
}

/// Runs the CLI and returns its output directory, panicking on failure.
pub fn mlpl_ok(dir: &Path, args: &[&str]) -> PathBuf {
    let out = mlpl(dir, args);
    assert!(
        out.status.success(),
        "mlpl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join(String::from_utf8(out.stdout).unwrap().trim())
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `distance_m,path_loss_db` rows of a simple-format file.
pub fn read_pairs(path: &Path) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

/// Noise-free log-distance loss of the synthetic generator's defaults.
pub fn truth(d: f64) -> f64 {
    47.0 + 22.0 * d.log10()
}

/// gen-synth, ingest, train and fit-fading for one seed; returns the
/// samples file, model file and fit-fading directory.
pub fn pipeline(dir: &Path, seed: u64, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let seed = seed.to_string();
    let n = n.to_string();
    let name = format!("s{seed}");
    let common = ["--seed", seed.as_str(), "--name", name.as_str()];
    let with = |cmd: &[&str]| -> Vec<String> {
        cmd.iter()
            .chain(common.iter())
            .map(|s| s.to_string())
            .collect()
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        mlpl_ok(dir, &refs)
    };
    let raw = run(with(&["gen-synth", "--n", &n])).join("raw.csv");
    let samples = run(with(&["ingest", "--input", raw.to_str().unwrap()])).join("samples.csv");
    let s = samples.to_str().unwrap();
    let model = run(with(&["train", "--input", s])).join("model.txt");
    let fading = run(with(&["fit-fading", "--input", s]));
    (samples, model, fading)
}
