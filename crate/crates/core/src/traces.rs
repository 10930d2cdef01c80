//! Trace ingestion.
//!
//! Two CSV layouts are understood:
//!
//! * the sample layout, `distance_m,path_loss_db`, one [`PathLossSample`] per row;
//! * the raw layout, one [`TraceRecord`] per row with transmit power, SNR,
//!   node coordinates and radio configuration.
//!
//! Raw records are turned into samples through a link budget: the measured
//! SNR is lifted to a received power with the receiver noise floor, and the
//! path loss is whatever the transmitter's EIRP plus receive gain lost on the
//! way there. That keeps the learned loss independent of transmit power.
//!
//! Lines starting with `#` are comments. Fields are plain decimal numbers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Cartesian position in metres.
pub type Position = [f64; 3];

pub const SIMPLE_HEADER: [&str; 2] = ["distance_m", "path_loss_db"];

pub const RAW_HEADER: [&str; 13] = [
    "t_s",
    "tx_power_dbm",
    "snr_db",
    "tx_x",
    "tx_y",
    "tx_z",
    "rx_x",
    "rx_y",
    "rx_z",
    "tx_gain_dbi",
    "rx_gain_dbi",
    "freq_mhz",
    "bw_mhz",
];

/// Thermal noise power spectral density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossSample {
    pub distance: f64,
    pub path_loss: f64,
}

impl PathLossSample {
    pub fn new(distance: f64, path_loss: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::Validation(format!(
                "distance must be positive, got {distance}"
            )));
        }
        if !path_loss.is_finite() {
            return Err(Error::Validation(format!(
                "path loss must be finite, got {path_loss}"
            )));
        }
        Ok(Self {
            distance,
            path_loss,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub tx_power: f64,
    pub snr: f64,
    pub tx_pos: Position,
    pub rx_pos: Position,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub freq_mhz: f64,
    pub bandwidth_mhz: f64,
}

impl TraceRecord {
    pub fn distance(&self) -> f64 {
        distance(self.tx_pos, self.rx_pos)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let fields = [
            self.t,
            self.tx_power,
            self.snr,
            self.tx_gain,
            self.rx_gain,
            self.freq_mhz,
            self.bandwidth_mhz,
        ];
        if fields
            .iter()
            .chain(self.tx_pos.iter())
            .chain(self.rx_pos.iter())
            .any(|v| !v.is_finite())
        {
            return Err("non-finite field".into());
        }
        if !(self.bandwidth_mhz > 0.0) {
            return Err(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_mhz
            ));
        }
        if !(self.freq_mhz > 0.0) {
            return Err(format!("frequency must be positive, got {}", self.freq_mhz));
        }
        Ok(())
    }
}

/// Receiver noise parameters used to turn SNR into received power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Receiver noise figure in dB.
    pub noise_figure: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self { noise_figure: 7.0 }
    }
}

impl RadioConfig {
    pub fn new(noise_figure: f64) -> Result<Self> {
        if !(noise_figure >= 0.0) || !noise_figure.is_finite() {
            return Err(Error::Validation(format!(
                "noise figure must be >= 0, got {noise_figure}"
            )));
        }
        Ok(Self { noise_figure })
    }
}

/// Euclidean distance between two positions.
pub fn distance(a: Position, b: Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Noise floor in dBm for a receiver of the given bandwidth (MHz).
pub fn noise_floor(bandwidth_mhz: f64, cfg: &RadioConfig) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * (bandwidth_mhz * 1e6).log10() + cfg.noise_figure
}

/// Converts one raw measurement into a `(distance, path loss)` sample.
pub fn record_to_sample(rec: &TraceRecord, cfg: &RadioConfig) -> Result<PathLossSample> {
    let d = rec.distance();
    if !(d > 0.0) {
        return Err(Error::Validation(format!(
            "transmitter and receiver coincide at t={}",
            rec.t
        )));
    }
    let rx_power = rec.snr + noise_floor(rec.bandwidth_mhz, cfg);
    let path_loss = rec.tx_power + rec.tx_gain + rec.rx_gain - rx_power;
    PathLossSample::new(d, path_loss)
}

pub fn records_to_samples(
    records: &[TraceRecord],
    cfg: &RadioConfig,
) -> Result<Vec<PathLossSample>> {
    records.iter().map(|r| record_to_sample(r, cfg)).collect()
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads a fixed-header CSV and hands each row (with its line number) to `row`.
pub(crate) fn read_table<R: Read, T>(
    reader: R,
    label: &Path,
    header: &[&str],
    mut row: impl FnMut(u64, &[f64]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let parse_err = |line: u64, msg: String| Error::Parse {
        path: label.to_path_buf(),
        line,
        msg,
    };

    let found = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    check_header(&found, header).map_err(|msg| parse_err(1, msg))?;

    let mut out = Vec::new();
    let mut values = Vec::with_capacity(header.len());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        values.clear();
        for (field, name) in rec.iter().zip(header) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column {name}: cannot parse {field:?}")))?;
            values.push(v);
        }
        out.push(row(line, &values).map_err(|msg| parse_err(line, msg))?);
    }
    Ok(out)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> std::result::Result<(), String> {
    let found: Vec<&str> = found.iter().collect();
    if found == expected {
        return Ok(());
    }
    if found == SIMPLE_HEADER && expected == RAW_HEADER {
        return Err(
            "this is a path-loss sample file, not a raw trace; use it with `train` directly".into(),
        );
    }
    if found == RAW_HEADER && expected == SIMPLE_HEADER {
        return Err("this is a raw trace; convert it with `ingest` first".into());
    }
    if let Some(missing) = expected.iter().find(|c| !found.contains(c)) {
        return Err(format!("missing column `{missing}`"));
    }
    Err(format!(
        "unexpected header `{}`, expected `{}`",
        found.join(","),
        expected.join(",")
    ))
}

pub fn read_simple<R: Read>(reader: R, label: &Path) -> Result<Vec<PathLossSample>> {
    read_table(reader, label, &SIMPLE_HEADER, |_, v| {
        PathLossSample::new(v[0], v[1]).map_err(|e| e.to_string())
    })
}

pub fn parse_simple(path: impl AsRef<Path>) -> Result<Vec<PathLossSample>> {
    let path = path.as_ref();
    read_simple(open(path)?, path)
}

pub fn read_raw<R: Read>(reader: R, label: &Path) -> Result<Vec<TraceRecord>> {
    let mut last_t = f64::NEG_INFINITY;
    read_table(reader, label, &RAW_HEADER, |_, v| {
        let rec = TraceRecord {
            t: v[0],
            tx_power: v[1],
            snr: v[2],
            tx_pos: [v[3], v[4], v[5]],
            rx_pos: [v[6], v[7], v[8]],
            tx_gain: v[9],
            rx_gain: v[10],
            freq_mhz: v[11],
            bandwidth_mhz: v[12],
        };
        rec.validate()?;
        if rec.t < last_t {
            return Err(format!("time goes backwards ({} after {last_t})", rec.t));
        }
        last_t = rec.t;
        Ok(rec)
    })
}

pub fn parse_raw(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    read_raw(open(path)?, path)
}

pub fn write_simple<W: Write>(mut w: W, samples: &[PathLossSample]) -> std::io::Result<()> {
    writeln!(w, "{}", SIMPLE_HEADER.join(","))?;
    for s in samples {
        writeln!(w, "{},{}", s.distance, s.path_loss)?;
    }
    w.flush()
}

pub fn write_raw<W: Write>(mut w: W, records: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(w, "{}", RAW_HEADER.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.tx_power,
            r.snr,
            r.tx_pos[0],
            r.tx_pos[1],
            r.tx_pos[2],
            r.rx_pos[0],
            r.rx_pos[1],
            r.rx_pos[2],
            r.tx_gain,
            r.rx_gain,
            r.freq_mhz,
            r.bandwidth_mhz
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn label() -> &'static Path {
        Path::new("test.csv")
    }

    fn table1_record(snr: f64) -> TraceRecord {
        TraceRecord {
            t: 0.0,
            tx_power: 7.0,
            snr,
            tx_pos: [0.0, 0.0, 0.0],
            rx_pos: [3.0, 4.0, 0.0],
            tx_gain: -7.0,
            rx_gain: -7.0,
            freq_mhz: 5220.0,
            bandwidth_mhz: 20.0,
        }
    }

    #[test]
    fn simple_rows() {
        let s = read_simple("distance_m,path_loss_db\n10.0,66.8\n".as_bytes(), label()).unwrap();
        assert_eq!(
            s,
            vec![PathLossSample {
                distance: 10.0,
                path_loss: 66.8
            }]
        );

        let s = read_simple("distance_m,path_loss_db\n".as_bytes(), label()).unwrap();
        assert!(s.is_empty());

        let s = read_simple(
            "# comment\ndistance_m,path_loss_db\n# another\n1,2\n3,4\n".as_bytes(),
            label(),
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].distance, 3.0);
    }

    #[test]
    fn simple_errors_carry_line() {
        let err = read_simple("distance_m,path_loss_db\n0.0,50\n".as_bytes(), label()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err =
            read_simple("distance_m,path_loss_db\n1,2\n1,abc\n".as_bytes(), label()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let err = read_simple("distance_m,path_loss_db\n1,2,3\n".as_bytes(), label()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn raw_rows() {
        let text = "t_s,tx_power_dbm,snr_db,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,tx_gain_dbi,rx_gain_dbi,freq_mhz,bw_mhz\n\
                    0,7,30,0,0,0,3,4,0,-7,-7,5220,20\n";
        let r = read_raw(text.as_bytes(), label()).unwrap();
        assert_eq!(r, vec![table1_record(30.0)]);
    }

    #[test]
    fn raw_validation() {
        let head = RAW_HEADER.join(",");
        let neg_bw = format!("{head}\n0,7,30,0,0,0,3,4,0,-7,-7,5220,-20\n");
        assert!(read_raw(neg_bw.as_bytes(), label()).is_err());

        let backwards =
            format!("{head}\n1,7,30,0,0,0,3,4,0,-7,-7,5220,20\n0,7,30,0,0,0,3,4,0,-7,-7,5220,20\n");
        let err = read_raw(backwards.as_bytes(), label()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn header_mismatch_messages() {
        let err = read_raw("distance_m,path_loss_db\n1,2\n".as_bytes(), label()).unwrap_err();
        assert!(err.to_string().contains("`train`"), "{err}");

        let head = RAW_HEADER[..12].join(",");
        let err = read_raw(format!("{head}\n").as_bytes(), label()).unwrap_err();
        assert!(err.to_string().contains("bw_mhz"), "{err}");
    }

    #[test]
    fn distances() {
        assert_eq!(distance([0.0; 3], [3.0, 4.0, 0.0]), 5.0);
        assert_eq!(distance([1.0; 3], [1.0; 3]), 0.0);
        assert_abs_diff_eq!(distance([1.0; 3], [2.0; 3]), 1.732_050_8, epsilon = 1e-7);
    }

    #[test]
    fn noise_floors() {
        let nf7 = RadioConfig::default();
        let nf0 = RadioConfig::new(0.0).unwrap();
        assert_abs_diff_eq!(noise_floor(20.0, &nf7), -93.99, epsilon = 0.01);
        assert_abs_diff_eq!(noise_floor(1.0, &nf0), -114.0, epsilon = 1e-12);
        assert_abs_diff_eq!(noise_floor(20.0, &nf0), -100.99, epsilon = 0.01);
        assert!(RadioConfig::new(-1.0).is_err());
    }

    #[test]
    fn link_budget_inversion() {
        let cfg = RadioConfig::default();
        let s = record_to_sample(&table1_record(30.0), &cfg).unwrap();
        assert_eq!(s.distance, 5.0);
        assert_abs_diff_eq!(s.path_loss, 56.99, epsilon = 0.01);

        let s = record_to_sample(&table1_record(0.0), &cfg).unwrap();
        assert_abs_diff_eq!(s.path_loss, 86.99, epsilon = 0.01);

        let mut rec = table1_record(0.0);
        rec.rx_pos = rec.tx_pos;
        assert!(record_to_sample(&rec, &cfg).is_err());
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1e3..1e3f64
    }

    fn point() -> impl Strategy<Value = Position> {
        [coord(), coord(), coord()]
    }

    proptest! {
        #[test]
        fn snr_slope_is_minus_one(snr in -20.0..60.0f64, delta in 0.01..20.0f64) {
            let cfg = RadioConfig::default();
            let a = record_to_sample(&table1_record(snr), &cfg).unwrap();
            let b = record_to_sample(&table1_record(snr + delta), &cfg).unwrap();
            prop_assert!(b.path_loss < a.path_loss);
            prop_assert!(((a.path_loss - b.path_loss) - delta).abs() < 1e-9);
        }

        #[test]
        fn distance_is_a_metric(a in point(), b in point(), c in point()) {
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        }

        #[test]
        fn raw_round_trip(
            rows in prop::collection::vec(
                (0.0..1e4f64, -10.0..30.0f64, -20.0..80.0f64, point(), point(),
                 -10.0..10.0f64, -10.0..10.0f64, 1.0..6e3f64, 1.0..160.0f64),
                0..20,
            )
        ) {
            let mut records: Vec<TraceRecord> = rows
                .into_iter()
                .map(|(t, p, s, a, b, g1, g2, f, bw)| TraceRecord {
                    t, tx_power: p, snr: s, tx_pos: a, rx_pos: b,
                    tx_gain: g1, rx_gain: g2, freq_mhz: f, bandwidth_mhz: bw,
                })
                .collect();
            records.sort_by(|x, y| x.t.total_cmp(&y.t));
            let mut buf = Vec::new();
            write_raw(&mut buf, &records).unwrap();
            let back = read_raw(buf.as_slice(), label()).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
