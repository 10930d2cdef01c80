use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use mlpl_core::fading::{
    self, extract_residuals, fit_candidates, to_cdf_table, CdfTable, FadingDist,
};
use mlpl_core::linksim::{self, LinkRun, RateTable, SimConfig, Trajectory};
use mlpl_core::metrics::{
    box_stats, make_split, percentile_curve, percentile_diff, rmse, write_diff_csv, Scenario,
    BOX_HEADER,
};
use mlpl_core::pathloss_ml::{load_model, train, TrainConfig};
use mlpl_core::synth::{generate_records, FadingSpec, Placement, SynthConfig};
use mlpl_core::traces::{
    parse_raw, parse_simple, records_to_samples, write_raw, write_simple, PathLossSample,
    RadioConfig,
};
use mlpl_core::{
    make_stream, Error, LinkBudget, LogDistanceParams, PathLossVariant, PropagationEngine,
};

use crate::args::{
    Cli, Command, EvaluateArgs, FitFadingArgs, GenSynthArgs, IngestArgs, ModelArgs, PredictArgs,
    SimulateArgs, TrainArgs,
};
use crate::manifest::Run;
use crate::CliError;

pub fn dispatch(cli: Cli) -> Result<PathBuf> {
    let common = cli.common;
    let name = cli.command.name();
    let config = match &cli.command {
        Command::Ingest(a) => serde_json::to_value(a),
        Command::Train(a) => serde_json::to_value(a),
        Command::FitFading(a) => serde_json::to_value(a),
        Command::Predict(a) => serde_json::to_value(a),
        Command::Simulate(a) => serde_json::to_value(a),
        Command::Evaluate(a) => serde_json::to_value(a),
        Command::GenSynth(a) => serde_json::to_value(a),
    }?;
    let mut run = Run::create(&common.out, name, &common.name, common.seed, config)?;
    if let Some(c) = &common.config {
        run.input(c);
    }
    match &cli.command {
        Command::Ingest(a) => ingest(a, &mut run)?,
        Command::Train(a) => train_cmd(a, &mut run)?,
        Command::FitFading(a) => fit_fading(a, &mut run)?,
        Command::Predict(a) => predict(a, &mut run)?,
        Command::Simulate(a) => simulate(a, common.seed, &mut run)?,
        Command::Evaluate(a) => evaluate(a, &mut run)?,
        Command::GenSynth(a) => gen_synth(a, common.seed, &mut run)?,
    }
    run.finish()
}

fn ingest(a: &IngestArgs, run: &mut Run) -> Result<()> {
    run.input(&a.input);
    let records = parse_raw(&a.input)?;
    let samples = records_to_samples(&records, &RadioConfig::new(a.noise_figure)?)?;
    run.write("samples.csv", |w| write_simple(w, &samples))?;
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    scenario: &'static str,
    n_train: usize,
    n_test: usize,
    train_range_m: (f64, f64),
    train_rmse_db: f64,
    test_rmse_db: f64,
    /// Held-out samples inside the training region, when a held-out file is given.
    heldout_covered_n: Option<usize>,
    heldout_covered_rmse_db: Option<f64>,
}

fn train_cmd(a: &TrainArgs, run: &mut Run) -> Result<()> {
    run.input(&a.input);
    let scenario: Scenario = a.scenario.parse()?;
    let cfg = TrainConfig {
        n_trees: a.n_trees,
        max_depth: a.max_depth,
        learning_rate: a.learning_rate,
        min_samples_leaf: a.min_samples_leaf,
    };
    cfg.validate()?;
    let samples = parse_simple(&a.input)?;
    let mut split = make_split(&samples, scenario)?;
    let mut covered = None;
    if let Some(test) = &a.test {
        run.input(test);
        let heldout = parse_simple(test)?;
        let (inside, outside): (Vec<_>, Vec<_>) = heldout
            .into_iter()
            .partition(|s| scenario != Scenario::FullSet && scenario.trains_on(s.distance));
        if outside.is_empty() {
            return Err(Error::Degenerate(format!(
                "{}: held-out file has no samples in the test region",
                scenario.name()
            ))
            .into());
        }
        split.test = outside;
        if !inside.is_empty() {
            covered = Some(inside);
        }
    }
    let model = train(&split.train, &cfg)?;
    let report = TrainReport {
        scenario: scenario.name(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        train_range_m: model.train_range,
        train_rmse_db: rmse(&model, &split.train)?,
        test_rmse_db: rmse(&model, &split.test)?,
        heldout_covered_n: covered.as_ref().map(Vec::len),
        heldout_covered_rmse_db: covered.as_deref().map(|c| rmse(&model, c)).transpose()?,
    };
    run.write("model.txt", |w| w.write_all(model.to_text().as_bytes()))?;
    run.write_json("report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct Candidate {
    family: &'static str,
    params: BTreeMap<&'static str, f64>,
    sse: Option<f64>,
    error: Option<String>,
    selected: bool,
}

#[derive(Serialize)]
struct FadingReport {
    n_residuals: usize,
    source: &'static str,
    candidates: Vec<Candidate>,
}

fn describe(dist: &FadingDist, sse: Option<f64>, selected: bool) -> Candidate {
    Candidate {
        family: dist.family().name(),
        params: dist.params().into_iter().collect(),
        sse,
        error: None,
        selected,
    }
}

fn fit_fading(a: &FitFadingArgs, run: &mut Run) -> Result<()> {
    run.input(&a.input);
    let samples = parse_simple(&a.input)?;
    let (dist, report) = match a.gaussian_sigma {
        Some(sigma) => {
            let dist = FadingDist::normal(0.0, sigma)?;
            let report = FadingReport {
                n_residuals: 0,
                source: "gaussian-sigma",
                candidates: vec![describe(&dist, None, true)],
            };
            (dist, report)
        }
        None => {
            let residuals = extract_residuals(&samples)?;
            let candidates = fit_candidates(&residuals.values, a.bins)?;
            let chosen = fading::choose_fading(&candidates)?;
            let listed = candidates
                .iter()
                .map(|(family, fit)| match fit {
                    Ok(f) => describe(&f.dist, Some(f.sse), f.dist == chosen.dist),
                    Err(e) => Candidate {
                        family: family.name(),
                        params: BTreeMap::new(),
                        sse: None,
                        error: Some(e.to_string()),
                        selected: false,
                    },
                })
                .collect();
            let report = FadingReport {
                n_residuals: residuals.values.len(),
                source: "fitted",
                candidates: listed,
            };
            (chosen.dist, report)
        }
    };
    let table = to_cdf_table(&dist, a.points)?;
    run.write("cdf.csv", |w| table.write_csv(w))?;
    run.write_json("report.json", &report)?;
    Ok(())
}

fn variant(m: &ModelArgs, run: &mut Run) -> Result<PathLossVariant> {
    Ok(
        match m.kind.to_ascii_lowercase().replace('_', "-").as_str() {
            "mlpl" | "ml" => {
                let path = m.model.as_ref().ok_or_else(|| {
                    CliError::usage("--model is required for the mlpl model kind".into())
                })?;
                run.input(path);
                PathLossVariant::Mlpl(load_model(path)?)
            }
            "friis" => PathLossVariant::Friis {
                freq_mhz: m.freq_mhz,
            },
            "log-distance" | "logdistance" => {
                let ref_loss = match m.ref_loss {
                    Some(l) => l,
                    None => mlpl_core::friis_loss(m.ref_distance, m.freq_mhz)?,
                };
                PathLossVariant::LogDistance(LogDistanceParams::new(
                    m.ref_distance,
                    ref_loss,
                    m.exponent,
                )?)
            }
            other => {
                return Err(CliError::usage(format!(
                    "unknown model kind `{other}` (mlpl, friis, log-distance)"
                ))
                .into())
            }
        },
    )
}

fn read_distances(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(d) => out.push(d),
            Err(_) if first => {}
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    msg: format!("cannot parse distance {field:?}"),
                }
                .into())
            }
        }
        first = false;
    }
    Ok(out)
}

fn predict(a: &PredictArgs, run: &mut Run) -> Result<()> {
    let v = variant(&a.model, run)?;
    let distances = match &a.distances_file {
        Some(p) => {
            run.input(p);
            read_distances(p)?
        }
        None => a.distances.clone(),
    };
    if distances.is_empty() {
        return Err(
            CliError::usage("no distances given (--distances or --distances-file)".into()).into(),
        );
    }
    let predictions = distances
        .iter()
        .map(|&d| Ok(PathLossSample::new(d, v.path_loss(d)?)?))
        .collect::<Result<Vec<_>>>()?;
    run.write("predictions.csv", |w| write_simple(w, &predictions))?;
    Ok(())
}

#[derive(Serialize)]
struct SimSummary {
    variant: &'static str,
    fading: bool,
    ticks: usize,
    delivered_bits: f64,
    mean_goodput_mbps: f64,
}

fn simulate(a: &SimulateArgs, seed: u64, run: &mut Run) -> Result<()> {
    let v = variant(&a.model, run)?;
    run.input(&a.trajectory);
    let traj = Trajectory::load(&a.trajectory, a.fixed)?;
    let mut engine = match &a.cdf {
        Some(p) => {
            run.input(p);
            PropagationEngine::with_fading(v, CdfTable::load(p)?, make_stream(seed, a.stream_id))
        }
        None => PropagationEngine::deterministic(v),
    };
    let cfg = SimConfig {
        budget: LinkBudget {
            tx_power: a.radio.tx_power,
            tx_gain: a.radio.tx_gain,
            rx_gain: a.radio.rx_gain,
        },
        bandwidth_mhz: a.radio.bandwidth_mhz,
        noise: RadioConfig::new(a.radio.noise_figure)?,
        rates: RateTable::default(),
        payload: a.payload,
        duration: a.duration,
        tick: a.tick,
        seed,
    };
    let result: LinkRun = linksim::run(&traj, &mut engine, &cfg)?;
    let n = result.rows.len();
    let summary = SimSummary {
        variant: engine.variant.name(),
        fading: engine.fading.is_some(),
        ticks: n,
        delivered_bits: result.delivered_bits(),
        mean_goodput_mbps: result.rows.iter().map(|r| r.goodput).sum::<f64>() / n as f64,
    };
    run.write("linkrun.csv", |w| result.write_csv(w))?;
    run.write_json("summary.json", &summary)?;
    Ok(())
}

/// Predictions file or simulated run, whichever the header says.
fn load_model_side(path: &Path) -> Result<Vec<PathLossSample>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if header == linksim::LINKRUN_HEADER {
        Ok(LinkRun::read_csv(text.as_bytes(), path)?.samples()?)
    } else {
        Ok(mlpl_core::traces::read_simple(text.as_bytes(), path)?)
    }
}

fn evaluate(a: &EvaluateArgs, run: &mut Run) -> Result<()> {
    run.input(&a.input);
    run.input(&a.reference);
    let model = load_model_side(&a.input)?;
    let reference = parse_simple(&a.reference)?;
    let model_curve = percentile_curve(&model, a.bin_width)?;
    let ref_curve = percentile_curve(&reference, a.bin_width)?;
    let diff = percentile_diff(&model_curve, &ref_curve)?;
    let losses = |s: &[PathLossSample]| s.iter().map(|x| x.path_loss).collect::<Vec<_>>();
    let model_box = box_stats(&losses(&model))?;
    let ref_box = box_stats(&losses(&reference))?;
    run.write("curve_model.csv", |w| model_curve.write_csv(w))?;
    run.write("curve_reference.csv", |w| ref_curve.write_csv(w))?;
    run.write("diff.csv", |w| write_diff_csv(w, &diff))?;
    run.write("box_stats.csv", |w| {
        writeln!(w, "{BOX_HEADER}")?;
        writeln!(w, "{}", model_box.csv_row("model"))?;
        writeln!(w, "{}", ref_box.csv_row("reference"))
    })?;
    Ok(())
}

fn gen_synth(a: &GenSynthArgs, seed: u64, run: &mut Run) -> Result<()> {
    let fading = match a.fading.to_ascii_lowercase().as_str() {
        "none" => FadingSpec::None,
        "normal" | "gaussian" => FadingSpec::Normal {
            mean: a.fading_mean,
            std: a.fading_std,
        },
        "rayleigh" => FadingSpec::Rayleigh {
            loc: a.fading_loc,
            scale: a.fading_scale,
        },
        "rician" | "rice" => FadingSpec::Rician {
            shape: a.fading_shape,
            loc: a.fading_loc,
            scale: a.fading_scale,
        },
        other => {
            return Err(CliError::usage(format!(
                "unknown fading `{other}` (none, normal, rayleigh, rician)"
            ))
            .into())
        }
    };
    let placement = match &a.trajectory {
        Some(p) => {
            run.input(p);
            let traj = Trajectory::load(p, a.fixed)?;
            Placement::Waypoints(traj.waypoints().iter().map(|w| w.1).collect())
        }
        None => Placement::UniformDistance {
            min: a.min_distance,
            max: a.max_distance,
        },
    };
    let cfg = SynthConfig {
        pathloss: LogDistanceParams::new(a.ref_distance, a.ref_loss, a.exponent)?,
        fading,
        placement,
        n_samples: a.n,
        dt: a.dt,
        fixed_pos: a.fixed,
        tx_power: a.radio.tx_power,
        tx_gain: a.radio.tx_gain,
        rx_gain: a.radio.rx_gain,
        freq_mhz: a.freq_mhz,
        bandwidth_mhz: a.radio.bandwidth_mhz,
        radio: RadioConfig::new(a.radio.noise_figure)?,
        seed,
    };
    let records = generate_records(&cfg)?;
    run.write("raw.csv", |w| write_raw(w, &records))?;
    Ok(())
}
