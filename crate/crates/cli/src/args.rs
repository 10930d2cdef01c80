use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "mlpl",
    version,
    about = "Learn path loss and fast fading from wireless traces, then simulate links with them"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Root of the output tree; products go to <out>/<command>/<name>/.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// key=value file supplying defaults for any flag. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run name, the last component of the output directory.
    #[arg(long, global = true, default_value = "default")]
    pub name: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw trace into path-loss samples.
    Ingest(IngestArgs),
    /// Train the boosted-tree path-loss model.
    Train(TrainArgs),
    /// Fit the fast-fading distribution and write its CDF table.
    FitFading(FitFadingArgs),
    /// Predict path loss at given distances.
    Predict(PredictArgs),
    /// Replay a trajectory through the link simulator.
    Simulate(SimulateArgs),
    /// Compare predictions or a simulated run against reference data.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic raw trace with a known ground truth.
    GenSynth(GenSynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::FitFading(_) => "fit-fading",
            Command::Predict(_) => "predict",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
            Command::GenSynth(_) => "gen-synth",
        }
    }
}

fn parse_position(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut p = [0.0; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| format!("bad coordinate `{part}`"))?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RadioArgs {
    /// Transmit power, dBm.
    #[arg(long, default_value_t = 7.0, allow_negative_numbers = true)]
    pub tx_power: f64,
    /// Transmit antenna gain, dBi.
    #[arg(long, default_value_t = -7.0, allow_negative_numbers = true)]
    pub tx_gain: f64,
    /// Receive antenna gain, dBi.
    #[arg(long, default_value_t = -7.0, allow_negative_numbers = true)]
    pub rx_gain: f64,
    #[arg(long, default_value_t = 20.0)]
    pub bandwidth_mhz: f64,
    /// Receiver noise figure, dB.
    #[arg(long, default_value_t = 7.0)]
    pub noise_figure: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Raw trace CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Receiver noise figure used to turn SNR back into received power, dB.
    #[arg(long, default_value_t = 7.0)]
    pub noise_figure: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Path-loss sample CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// extrapolation, interpolation or full-set.
    #[arg(long, default_value = "full-set")]
    pub scenario: String,
    /// Held-out sample CSV. Replaces the test partition; for split scenarios
    /// only its samples outside the training region are tested.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitFadingArgs {
    /// Path-loss sample CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Histogram bins used to score the candidates.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Points in the written CDF table.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Skip fitting and use a zero-mean Normal with this deviation, dB.
    #[arg(long)]
    pub gaussian_sigma: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// mlpl, friis or log-distance.
    #[arg(long, default_value = "mlpl")]
    pub kind: String,
    /// Model file, required for mlpl.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 5220.0)]
    pub freq_mhz: f64,
    /// Log-distance reference distance, m.
    #[arg(long, default_value_t = 1.0)]
    pub ref_distance: f64,
    /// Log-distance loss at the reference distance; Friis at that distance when absent.
    #[arg(long)]
    pub ref_loss: Option<f64>,
    /// Log-distance exponent.
    #[arg(long, default_value_t = 3.0)]
    pub exponent: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated distances, m.
    #[arg(long, value_delimiter = ',', conflicts_with = "distances_file")]
    pub distances: Vec<f64>,
    /// CSV whose first column holds distances (a header line is skipped).
    #[arg(long)]
    pub distances_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CDF table from fit-fading; no fading when absent.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
    /// Trajectory CSV (t_s,x,y,z) of the mobile node.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Position of the fixed node.
    #[arg(long, value_parser = parse_position, default_value = "0,0,0", allow_hyphen_values = true)]
    pub fixed: [f64; 3],
    /// Fading stream within the seed.
    #[arg(long, default_value_t = 0)]
    pub stream_id: u64,
    #[command(flatten)]
    pub radio: RadioArgs,
    /// Packet payload, bytes.
    #[arg(long, default_value_t = 1400)]
    pub payload: usize,
    /// Simulated time, s.
    #[arg(long, default_value_t = 404.0)]
    pub duration: f64,
    /// Sampling interval, s.
    #[arg(long, default_value_t = 1.0)]
    pub tick: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Predictions (distance_m,path_loss_db) or a simulated run CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference path-loss sample CSV.
    #[arg(long)]
    pub reference: PathBuf,
    /// Distance bin width, m.
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenSynthArgs {
    /// Number of records.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub ref_distance: f64,
    #[arg(long, default_value_t = 47.0)]
    pub ref_loss: f64,
    #[arg(long, default_value_t = 2.2)]
    pub exponent: f64,
    /// none, normal, rayleigh or rician.
    #[arg(long, default_value = "normal")]
    pub fading: String,
    /// Normal mean, dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub fading_mean: f64,
    /// Normal deviation, dB.
    #[arg(long, default_value_t = 4.0)]
    pub fading_std: f64,
    /// Rician shape (line-of-sight over scatter amplitude).
    #[arg(long, default_value_t = 2.0)]
    pub fading_shape: f64,
    /// Rayleigh/Rician location, dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub fading_loc: f64,
    /// Rayleigh/Rician scale, dB.
    #[arg(long, default_value_t = 1.0)]
    pub fading_scale: f64,
    #[arg(long, default_value_t = 2.0)]
    pub min_distance: f64,
    #[arg(long, default_value_t = 24.0)]
    pub max_distance: f64,
    /// Visit the positions of this trajectory CSV instead of uniform distances.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Position of the fixed (transmitting) node.
    #[arg(long, value_parser = parse_position, default_value = "0,0,0", allow_hyphen_values = true)]
    pub fixed: [f64; 3],
    /// Time between records, s.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, default_value_t = 5220.0)]
    pub freq_mhz: f64,
    #[command(flatten)]
    pub radio: RadioArgs,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn positions() {
        assert_eq!(parse_position("1, -2,3.5").unwrap(), [1.0, -2.0, 3.5]);
        assert!(parse_position("1,2").is_err());
    }
}
