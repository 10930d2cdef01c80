//! Link-level replay: move a node along a trajectory, evaluate the loss at
//! each tick, and estimate the saturated 802.11a goodput that results.
//!
//! Rate selection is a static SNR threshold table with a preamble-detection
//! cutoff on received power. Goodput comes from a single-sender DCF timing
//! model: DIFS, mean backoff, data frame, SIFS and ACK, no collisions or
//! retries.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::propagation::{rx_power, LinkBudget, PropagationEngine};
use crate::traces::{distance, noise_floor, read_table, PathLossSample, Position, RadioConfig};

// 802.11a OFDM timing, microseconds
const SLOT_US: f64 = 9.0;
const SIFS_US: f64 = 16.0;
const DIFS_US: f64 = SIFS_US + 2.0 * SLOT_US;
/// CWmin = 15, so the mean backoff is 7.5 slots.
const MEAN_BACKOFF_US: f64 = 7.5 * SLOT_US;
const ACK_US: f64 = 28.0;
const PREAMBLE_US: f64 = 20.0;
const SYMBOL_US: f64 = 4.0;
const SERVICE_BITS: f64 = 16.0;
const TAIL_BITS: f64 = 6.0;
/// MAC header + FCS + LLC/SNAP + IP + UDP overhead per payload.
const OVERHEAD_BYTES: f64 = 36.0;

/// Data bits per OFDM symbol for each 802.11a rate (Mbit/s).
const DATA_BITS_PER_SYMBOL: [(f64, f64); 8] = [
    (6.0, 24.0),
    (9.0, 36.0),
    (12.0, 48.0),
    (18.0, 72.0),
    (24.0, 96.0),
    (36.0, 144.0),
    (48.0, 192.0),
    (54.0, 216.0),
];

pub const TRAJECTORY_HEADER: [&str; 4] = ["t_s", "x", "y", "z"];
pub const LINKRUN_HEADER: &str =
    "t_s,distance_m,loss_db,rx_power_dbm,snr_db,phy_rate_mbps,goodput_mbps";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<(f64, Position)>,
    pub fixed_pos: Position,
}

impl Trajectory {
    pub fn new(waypoints: Vec<(f64, Position)>, fixed_pos: Position) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::Validation("trajectory has no waypoints".into()));
        }
        if waypoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation(
                "waypoint times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            waypoints,
            fixed_pos,
        })
    }

    pub fn waypoints(&self) -> &[(f64, Position)] {
        &self.waypoints
    }

    pub fn read_csv<R: Read>(reader: R, label: &Path, fixed_pos: Position) -> Result<Self> {
        let waypoints = read_table(reader, label, &TRAJECTORY_HEADER, |_, v| {
            Ok((v[0], [v[1], v[2], v[3]]))
        })?;
        Self::new(waypoints, fixed_pos)
    }

    pub fn load(path: impl AsRef<Path>, fixed_pos: Position) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, path, fixed_pos)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", TRAJECTORY_HEADER.join(","))?;
        for (t, p) in &self.waypoints {
            writeln!(w, "{t},{},{},{}", p[0], p[1], p[2])?;
        }
        w.flush()
    }

    /// Position of the latest waypoint at or before `t` (zero-order hold).
    pub fn position_at(&self, t: f64) -> Result<Position> {
        let first = self.waypoints[0].0;
        if t < first {
            return Err(Error::Domain(format!(
                "time {t} precedes the first waypoint at {first}"
            )));
        }
        let idx = self.waypoints.partition_point(|(wt, _)| *wt <= t);
        Ok(self.waypoints[idx - 1].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// `(minimum SNR dB, PHY rate Mbit/s)`, both strictly increasing.
    entries: Vec<(f64, f64)>,
    /// Received power below which no frame is detected.
    pub min_rx_power: f64,
}

impl Default for RateTable {
    fn default() -> Self {
        Self {
            entries: vec![
                (6.0, 6.0),
                (8.0, 9.0),
                (9.0, 12.0),
                (11.0, 18.0),
                (17.0, 24.0),
                (19.0, 36.0),
                (24.0, 48.0),
                (25.0, 54.0),
            ],
            min_rx_power: -90.0,
        }
    }
}

impl RateTable {
    pub fn new(entries: Vec<(f64, f64)>, min_rx_power: f64) -> Result<Self> {
        if entries
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1))
        {
            return Err(Error::Validation(
                "rate table thresholds and rates must be strictly increasing".into(),
            ));
        }
        if let Some((_, r)) = entries
            .iter()
            .find(|(_, r)| data_bits_per_symbol(*r).is_none())
        {
            return Err(Error::Validation(format!(
                "{r} Mbit/s is not an 802.11a rate"
            )));
        }
        Ok(Self {
            entries,
            min_rx_power,
        })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }
}

fn data_bits_per_symbol(rate: f64) -> Option<f64> {
    DATA_BITS_PER_SYMBOL
        .iter()
        .find(|(r, _)| *r == rate)
        .map(|(_, n)| *n)
}

/// Highest rate whose SNR threshold is met, or 0 when the frame is below the
/// detection cutoff or no threshold is met.
pub fn select_rate(snr: f64, rx_power: f64, table: &RateTable) -> f64 {
    if rx_power < table.min_rx_power {
        return 0.0;
    }
    table
        .entries
        .iter()
        .rev()
        .find(|(min_snr, _)| *min_snr <= snr)
        .map_or(0.0, |(_, rate)| *rate)
}

/// Airtime of one data frame carrying `payload` bytes, microseconds.
pub fn data_frame_us(phy_rate: f64, payload: usize) -> Result<f64> {
    let ndbps = data_bits_per_symbol(phy_rate)
        .ok_or_else(|| Error::Domain(format!("{phy_rate} Mbit/s is not an 802.11a rate")))?;
    let bits = SERVICE_BITS + TAIL_BITS + 8.0 * (payload as f64 + OVERHEAD_BYTES);
    Ok(PREAMBLE_US + SYMBOL_US * (bits / ndbps).ceil())
}

/// Saturated single-sender goodput in Mbit/s.
pub fn goodput_estimate(phy_rate: f64, payload: usize) -> Result<f64> {
    if phy_rate == 0.0 {
        return Ok(0.0);
    }
    let frame = DIFS_US + MEAN_BACKOFF_US + data_frame_us(phy_rate, payload)? + SIFS_US + ACK_US;
    // bits per microsecond == Mbit/s
    Ok(8.0 * payload as f64 / frame)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub budget: LinkBudget,
    pub bandwidth_mhz: f64,
    pub noise: RadioConfig,
    pub rates: RateTable,
    /// Application payload per packet, bytes.
    pub payload: usize,
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The reference warehouse set-up: 7 dBm, -7 dBi antennas, 20 MHz,
    /// 1400-byte packets for 404 s at 1 s resolution.
    pub fn warehouse(seed: u64) -> Self {
        Self {
            budget: LinkBudget::WAREHOUSE,
            bandwidth_mhz: 20.0,
            noise: RadioConfig::default(),
            rates: RateTable::default(),
            payload: 1400,
            duration: 404.0,
            tick: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tick > 0.0) || self.payload == 0 || !(self.duration >= 0.0) {
            return Err(Error::Validation(
                "simulation needs tick > 0, payload > 0 and duration >= 0".into(),
            ));
        }
        if !(self.bandwidth_mhz > 0.0) {
            return Err(Error::Validation("bandwidth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRow {
    pub t: f64,
    pub distance: f64,
    pub loss: f64,
    pub rx_power: f64,
    pub snr: f64,
    pub phy_rate: f64,
    pub goodput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRun {
    pub tick: f64,
    pub rows: Vec<LinkRow>,
}

impl LinkRun {
    /// Useful bits delivered over the run.
    pub fn delivered_bits(&self) -> f64 {
        self.rows.iter().map(|r| r.goodput * 1e6 * self.tick).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LINKRUN_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t, r.distance, r.loss, r.rx_power, r.snr, r.phy_rate, r.goodput
            )?;
        }
        w.flush()
    }

    /// Reads a run written by [`LinkRun::write_csv`]. The tick is taken from
    /// the first two rows (1 s for shorter runs).
    pub fn read_csv<R: Read>(reader: R, label: &Path) -> Result<Self> {
        let header: Vec<&str> = LINKRUN_HEADER.split(',').collect();
        let rows = read_table(reader, label, &header, |_, v| {
            Ok(LinkRow {
                t: v[0],
                distance: v[1],
                loss: v[2],
                rx_power: v[3],
                snr: v[4],
                phy_rate: v[5],
                goodput: v[6],
            })
        })?;
        let tick = match rows.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 1.0,
        };
        Ok(Self { tick, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, path)
    }

    /// `(distance, total loss)` per tick, as path-loss samples.
    pub fn samples(&self) -> Result<Vec<PathLossSample>> {
        self.rows
            .iter()
            .map(|r| PathLossSample::new(r.distance, r.loss))
            .collect()
    }
}

/// Replays `traj` tick by tick from t = 0 to `cfg.duration`.
pub fn run(traj: &Trajectory, engine: &mut PropagationEngine, cfg: &SimConfig) -> Result<LinkRun> {
    cfg.validate()?;
    let floor = noise_floor(cfg.bandwidth_mhz, &cfg.noise);
    let n_ticks = (cfg.duration / cfg.tick + 1e-9).floor() as usize + 1;
    let mut rows = Vec::with_capacity(n_ticks);
    for k in 0..n_ticks {
        let t = k as f64 * cfg.tick;
        let d = distance(traj.position_at(t)?, traj.fixed_pos);
        let loss = engine.total_loss(d)?;
        let rx = rx_power(&cfg.budget, loss);
        let snr = rx - floor;
        let phy_rate = select_rate(snr, rx, &cfg.rates);
        let goodput = goodput_estimate(phy_rate, cfg.payload)?;
        rows.push(LinkRow {
            t,
            distance: d,
            loss,
            rx_power: rx,
            snr,
            phy_rate,
            goodput,
        });
    }
    Ok(LinkRun {
        tick: cfg.tick,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::CdfTable;
    use crate::propagation::PathLossVariant;
    use crate::randvar::make_stream;
    use approx::assert_abs_diff_eq;

    fn friis() -> PropagationEngine {
        PropagationEngine::deterministic(PathLossVariant::Friis { freq_mhz: 5220.0 })
    }

    fn line(n: usize, step: f64) -> Trajectory {
        let w = (0..n)
            .map(|i| (i as f64, [2.0 + step * i as f64, 0.0, 0.0]))
            .collect();
        Trajectory::new(w, [0.0; 3]).unwrap()
    }

    #[test]
    fn step_positions() {
        let a = [1.0, 0.0, 0.0];
        let b = [2.0, 0.0, 0.0];
        let t = Trajectory::new(vec![(0.0, a), (1.0, b)], [0.0; 3]).unwrap();
        assert_eq!(t.position_at(0.5).unwrap(), a);
        assert_eq!(t.position_at(1.0).unwrap(), b);
        assert_eq!(t.position_at(50.0).unwrap(), b);
        assert!(t.position_at(-0.1).is_err());
        assert!(Trajectory::new(vec![(0.0, a), (0.0, b)], [0.0; 3]).is_err());
        assert!(Trajectory::new(vec![], [0.0; 3]).is_err());
    }

    #[test]
    fn rates() {
        let table = RateTable::default();
        assert_eq!(select_rate(30.0, -95.0, &table), 0.0);
        assert_eq!(select_rate(30.0, -60.0, &table), 54.0);
        assert_eq!(select_rate(5.9, -60.0, &table), 0.0);
        assert_eq!(select_rate(18.0, -60.0, &table), 24.0);
        assert!(RateTable::new(vec![(6.0, 6.0), (5.0, 9.0)], -90.0).is_err());
        assert!(RateTable::new(vec![(6.0, 7.0)], -90.0).is_err());
    }

    #[test]
    fn goodput_formula() {
        assert_eq!(data_frame_us(54.0, 1400).unwrap(), 236.0);
        assert_abs_diff_eq!(goodput_estimate(54.0, 1400).unwrap(), 29.36, epsilon = 0.01);
        assert_eq!(goodput_estimate(0.0, 1400).unwrap(), 0.0);
        assert!(goodput_estimate(11.0, 1400).is_err());

        let mut prev = 0.0;
        for (rate, _) in DATA_BITS_PER_SYMBOL {
            let g = goodput_estimate(rate, 1400).unwrap();
            assert!(g > prev && g <= rate);
            assert!(g <= 8.0 * 1400.0 / data_frame_us(rate, 1400).unwrap());
            prev = g;
        }
    }

    #[test]
    fn stationary_run_is_flat() {
        let traj = Trajectory::new(vec![(0.0, [5.0, 0.0, 0.0])], [0.0; 3]).unwrap();
        let mut cfg = SimConfig::warehouse(0);
        cfg.duration = 20.0;
        let run = run(&traj, &mut friis(), &cfg).unwrap();
        assert_eq!(run.rows.len(), 21);
        assert!(run.rows.iter().all(|r| {
            let r0 = run.rows[0];
            (r.distance, r.loss, r.goodput) == (r0.distance, r0.loss, r0.goodput)
        }));
    }

    #[test]
    fn seeded_runs_repeat() {
        let table = CdfTable::new(vec![(-8.0, 0.0), (0.0, 0.5), (8.0, 1.0)]).unwrap();
        let mk = || {
            PropagationEngine::with_fading(
                PathLossVariant::Friis { freq_mhz: 5220.0 },
                table.clone(),
                make_stream(5, 0),
            )
        };
        let traj = line(30, 0.7);
        let mut cfg = SimConfig::warehouse(5);
        cfg.duration = 29.0;
        let a = run(&traj, &mut mk(), &cfg).unwrap();
        let b = run(&traj, &mut mk(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fading_free_goodput_non_increasing() {
        let traj = line(23, 1.0);
        let mut cfg = SimConfig::warehouse(0);
        cfg.duration = 22.0;
        cfg.budget.tx_power = -20.0; // push the far end through every rate step
        let run = run(&traj, &mut friis(), &cfg).unwrap();
        for w in run.rows.windows(2) {
            assert!(w[1].distance >= w[0].distance);
            assert!(w[1].goodput <= w[0].goodput);
        }
        assert!(run
            .rows
            .iter()
            .all(|r| r.goodput <= r.phy_rate && r.goodput >= 0.0));
        let bits: f64 = run.rows.iter().map(|r| r.goodput * 1e6).sum();
        assert!((run.delivered_bits() - bits).abs() <= 1e-6 * bits.max(1.0));
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let t = line(5, 1.5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice(), Path::new("t"), [0.0; 3]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn linkrun_csv_round_trip() {
        let cfg = SimConfig {
            duration: 6.0,
            ..SimConfig::warehouse(0)
        };
        let run = run(&line(4, 3.0), &mut friis(), &cfg).unwrap();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let back = LinkRun::read_csv(buf.as_slice(), Path::new("r")).unwrap();
        assert_eq!(back, run);
        assert_eq!(back.samples().unwrap().len(), 7);
    }
}
