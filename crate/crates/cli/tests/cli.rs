mod common;

use std::path::Path;

use common::{mlpl, mlpl_ok, pipeline, read_pairs, stderr, truth};
use mlpl_core::traces::{noise_floor, parse_raw, RadioConfig};

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn assert_error(out: &std::process::Output, code: &str, needle: &str) {
    assert!(!out.status.success());
    let err = stderr(out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "{err}");
    assert!(err.contains(needle), "{err}");
}

#[test]
fn ingest_matches_link_budget_arithmetic() {
    let t = tmp();
    let raw = mlpl_ok(t.path(), &["gen-synth", "--n", "50"]).join("raw.csv");
    let samples =
        mlpl_ok(t.path(), &["ingest", "--input", raw.to_str().unwrap()]).join("samples.csv");
    let records = parse_raw(&raw).unwrap();
    let pairs = read_pairs(&samples);
    assert_eq!(pairs.len(), records.len());
    // -174 dBm/Hz + 10 log10(20 MHz) + 7 dB
    let floor = -174.0 + 10.0 * (20e6f64).log10() + 7.0;
    assert!((noise_floor(20.0, &RadioConfig::default()) - floor).abs() < 1e-12);
    for (r, (d, pl)) in records.iter().zip(pairs) {
        let want = r.tx_power + r.tx_gain + r.rx_gain - (r.snr + floor);
        assert!((pl - want).abs() < 1e-9);
        let dd = ((r.tx_pos[0] - r.rx_pos[0]).powi(2)
            + (r.tx_pos[1] - r.rx_pos[1]).powi(2)
            + (r.tx_pos[2] - r.rx_pos[2]).powi(2))
        .sqrt();
        assert!((d - dd).abs() < 1e-12);
    }
}

#[test]
fn ingest_rejects_simple_file_and_suggests_train() {
    let t = tmp();
    std::fs::write(t.path().join("s.csv"), "distance_m,path_loss_db\n1,40\n").unwrap();
    let out = mlpl(t.path(), &["ingest", "--input", "s.csv"]);
    assert_error(&out, "E_PARSE", "`train`");
    assert!(!t.path().join("out/ingest").exists());
}

#[test]
fn missing_column_is_named() {
    let t = tmp();
    std::fs::write(t.path().join("s.csv"), "distance_m\n1\n").unwrap();
    let out = mlpl(t.path(), &["train", "--input", "s.csv"]);
    assert_error(&out, "E_PARSE", "path_loss_db");
}

#[test]
fn errors_are_single_prefixed_lines() {
    let t = tmp();
    assert_error(&mlpl(t.path(), &["train"]), "E_USAGE", "--input");
    assert_error(
        &mlpl(
            t.path(),
            &["predict", "--kind", "friis", "--distances", "0"],
        ),
        "E_DOMAIN",
        "positive",
    );
    assert_error(
        &mlpl(t.path(), &["predict", "--distances", "1"]),
        "E_USAGE",
        "--model",
    );
    assert_error(
        &mlpl(t.path(), &["train", "--input", "nope.csv"]),
        "E_IO",
        "nope.csv",
    );
    std::fs::write(t.path().join("m.txt"), "mlplmodel v2\n").unwrap();
    assert_error(
        &mlpl(
            t.path(),
            &["predict", "--model", "m.txt", "--distances", "1"],
        ),
        "E_MODEL",
        "v2",
    );
}

#[test]
fn closed_loop_recovers_generator() {
    let t = tmp();
    let (samples, model, _) = pipeline(t.path(), 11, 10_000);
    let pairs = read_pairs(&samples);
    let list: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
    std::fs::write(
        t.path().join("d.csv"),
        format!("distance_m\n{}\n", list.join("\n")),
    )
    .unwrap();
    let pred = mlpl_ok(
        t.path(),
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--distances-file",
            "d.csv",
        ],
    );
    let preds = read_pairs(&pred.join("predictions.csv"));
    assert_eq!(preds.len(), pairs.len());
    let mse: f64 = preds
        .iter()
        .map(|(d, p)| (p - truth(*d)).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    assert!(mse.sqrt() <= 1.5, "rmse {}", mse.sqrt());
}

#[test]
fn extrapolation_model_is_flat_beyond_range() {
    let t = tmp();
    let raw = mlpl_ok(t.path(), &["gen-synth", "--n", "3000"]).join("raw.csv");
    let samples =
        mlpl_ok(t.path(), &["ingest", "--input", raw.to_str().unwrap()]).join("samples.csv");
    let model = mlpl_ok(
        t.path(),
        &[
            "train",
            "--input",
            samples.to_str().unwrap(),
            "--scenario",
            "extrapolation",
        ],
    )
    .join("model.txt");
    let max = read_pairs(&samples)
        .into_iter()
        .map(|p| p.0)
        .filter(|&d| d < 10.0)
        .fold(0.0, f64::max);
    let ds = format!("{max},{}", 2.0 * max);
    let out = mlpl_ok(
        t.path(),
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--distances",
            &ds,
        ],
    );
    let p = read_pairs(&out.join("predictions.csv"));
    assert_eq!(p[0].1, p[1].1);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let t = tmp();
    std::fs::write(
        t.path().join("run.cfg"),
        "# defaults\nseed = 9\nkind = friis\ndistances = 1,10\nname = cfg\n",
    )
    .unwrap();
    let out = mlpl_ok(
        t.path(),
        &["predict", "--config", "run.cfg", "--freq-mhz", "2400"],
    );
    assert!(out.ends_with("out/predict/cfg"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["model"]["freq_mhz"], 2400.0);
    assert_eq!(m["config"]["model"]["kind"], "friis");
    assert_eq!(m["inputs"][0]["path"], "run.cfg");

    std::fs::write(t.path().join("bad.cfg"), "bogus = 1\n").unwrap();
    assert_error(
        &mlpl(t.path(), &["predict", "--config", "bad.cfg"]),
        "E_CONFIG",
        "bogus",
    );
}

#[test]
fn manifest_records_digests_of_every_file() {
    let t = tmp();
    let out = mlpl_ok(
        t.path(),
        &["gen-synth", "--n", "20", "--seed", "4", "--name", "m"],
    );
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "gen-synth");
    assert_eq!(m["seed"], 4);
    assert_eq!(m["outputs"][0]["path"], "raw.csv");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let entries: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(entries.len(), 2);
}

#[test]
fn gaussian_sigma_bypasses_fitting() {
    let t = tmp();
    std::fs::write(
        t.path().join("s.csv"),
        "distance_m,path_loss_db\n1,40\n2,45\n",
    )
    .unwrap();
    let out = mlpl_ok(
        t.path(),
        &[
            "fit-fading",
            "--input",
            "s.csv",
            "--gaussian-sigma",
            "3",
            "--points",
            "11",
        ],
    );
    let table = mlpl_core::CdfTable::load(out.join("cdf.csv")).unwrap();
    assert_eq!(table.points().len(), 11);
    assert!((table.points()[5].0).abs() < 1e-9);
}

#[test]
fn evaluate_accepts_predictions_and_runs() {
    let t = tmp();
    let (samples, model, fading) = pipeline(t.path(), 3, 2000);
    let traj = t.path().join("traj.csv");
    std::fs::write(&traj, "t_s,x,y,z\n0,3,0,0\n10,12,0,0\n20,22,0,0\n").unwrap();
    let sim = mlpl_ok(
        t.path(),
        &[
            "simulate",
            "--model",
            model.to_str().unwrap(),
            "--cdf",
            fading.join("cdf.csv").to_str().unwrap(),
            "--trajectory",
            traj.to_str().unwrap(),
            "--duration",
            "30",
        ],
    );
    let ev = mlpl_ok(
        t.path(),
        &[
            "evaluate",
            "--input",
            sim.join("linkrun.csv").to_str().unwrap(),
            "--reference",
            samples.to_str().unwrap(),
        ],
    );
    for f in [
        "curve_model.csv",
        "curve_reference.csv",
        "diff.csv",
        "box_stats.csv",
        "manifest.json",
    ] {
        assert!(Path::new(&ev.join(f)).exists(), "{f}");
    }
    let diff = std::fs::read_to_string(ev.join("diff.csv")).unwrap();
    assert!(diff.starts_with("bin_m,d25,d50,d75\n"));
    // the run visits three 1 m bins
    assert_eq!(diff.lines().count(), 4);
}
