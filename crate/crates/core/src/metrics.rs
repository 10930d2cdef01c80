//! Evaluation statistics: percentiles, per-distance percentile curves, box
//! plot summaries and the three train/test scenarios.
//!
//! Quantiles use linear interpolation at index `q * (N - 1)` of the sorted
//! values.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::pathloss_ml::PathLossModel;
use crate::traces::PathLossSample;

pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("percentile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "quantile must be in [0, 1], got {q}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_percentile(&sorted, q))
}

fn sorted_percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileBin {
    pub centre: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileCurve {
    pub bin_width: f64,
    pub bins: Vec<PercentileBin>,
}

pub const CURVE_HEADER: &str = "bin_m,p25,p50,p75,count";

impl PercentileCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CURVE_HEADER}")?;
        for b in &self.bins {
            writeln!(w, "{},{},{},{},{}", b.centre, b.p25, b.p50, b.p75, b.count)?;
        }
        w.flush()
    }
}

/// Quartiles of path loss per distance bin `[k w, (k+1) w)`; empty bins are
/// left out.
pub fn percentile_curve(samples: &[PathLossSample], bin_width: f64) -> Result<PercentileCurve> {
    if samples.is_empty() {
        return Err(Error::Degenerate("no samples for percentile curve".into()));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Validation(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for s in samples {
        groups
            .entry((s.distance / bin_width).floor() as i64)
            .or_default()
            .push(s.path_loss);
    }
    let bins = groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            PercentileBin {
                centre: (k as f64 + 0.5) * bin_width,
                p25: sorted_percentile(&v, 0.25),
                p50: sorted_percentile(&v, 0.50),
                p75: sorted_percentile(&v, 0.75),
                count: v.len(),
            }
        })
        .collect();
    Ok(PercentileCurve { bin_width, bins })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileDiff {
    pub centre: f64,
    pub d25: f64,
    pub d50: f64,
    pub d75: f64,
}

pub const DIFF_HEADER: &str = "bin_m,d25,d50,d75";

pub fn write_diff_csv<W: Write>(mut w: W, diff: &[PercentileDiff]) -> std::io::Result<()> {
    writeln!(w, "{DIFF_HEADER}")?;
    for d in diff {
        writeln!(w, "{},{},{},{}", d.centre, d.d25, d.d50, d.d75)?;
    }
    w.flush()
}

/// Absolute quartile differences over the bins both curves share.
pub fn percentile_diff(
    model: &PercentileCurve,
    real: &PercentileCurve,
) -> Result<Vec<PercentileDiff>> {
    if model.bin_width != real.bin_width {
        return Err(Error::Validation(format!(
            "curves use different bin widths ({} vs {})",
            model.bin_width, real.bin_width
        )));
    }
    let key = |c: f64| (c / model.bin_width).floor() as i64;
    let real_bins: BTreeMap<i64, &PercentileBin> =
        real.bins.iter().map(|b| (key(b.centre), b)).collect();
    let out: Vec<PercentileDiff> = model
        .bins
        .iter()
        .filter_map(|m| {
            real_bins.get(&key(m.centre)).map(|r| PercentileDiff {
                centre: m.centre,
                d25: (m.p25 - r.p25).abs(),
                d50: (m.p50 - r.p50).abs(),
                d75: (m.p75 - r.p75).abs(),
            })
        })
        .collect();
    if out.is_empty() {
        log::warn!("percentile curves share no distance bins");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub const BOX_HEADER: &str = "source,q1,median,q3,whisker_low,whisker_high,outliers";

impl BoxStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    /// `(low fence, high fence)` at 1.5 IQR beyond the quartiles.
    pub fn fences(&self) -> (f64, f64) {
        (self.q1 - 1.5 * self.iqr(), self.q3 + 1.5 * self.iqr())
    }

    /// One CSV row; outliers are `;`-joined in the last column.
    pub fn csv_row(&self, source: &str) -> String {
        let outliers: Vec<String> = self.outliers.iter().map(|v| v.to_string()).collect();
        format!(
            "{source},{},{},{},{},{},{}",
            self.q1,
            self.median,
            self.q3,
            self.whisker_low,
            self.whisker_high,
            outliers.join(";")
        )
    }
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.len() < 4 {
        return Err(Error::Degenerate(format!(
            "box statistics need at least 4 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = sorted_percentile(&sorted, 0.25);
    let median = sorted_percentile(&sorted, 0.5);
    let q3 = sorted_percentile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |v: &f64| *v >= lo && *v <= hi;
    // the quartiles lie inside the fences, so at least one value does too
    let whisker_low = *sorted
        .iter()
        .find(|v| inside(v))
        .expect("value within fences");
    let whisker_high = *sorted
        .iter()
        .rev()
        .find(|v| inside(v))
        .expect("value within fences");
    let outliers = sorted.iter().copied().filter(|v| !inside(v)).collect();
    Ok(BoxStats {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Train below 10 m, test on the rest.
    Extrapolation,
    /// Train below 5 m, within [10, 15] m and above 20 m; test in the gaps.
    Interpolation,
    /// Train on everything.
    FullSet,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Extrapolation => "extrapolation",
            Scenario::Interpolation => "interpolation",
            Scenario::FullSet => "full-set",
        }
    }

    /// Whether a sample at distance `d` belongs to the training partition.
    pub fn trains_on(self, d: f64) -> bool {
        match self {
            Scenario::Extrapolation => d < 10.0,
            Scenario::Interpolation => d < 5.0 || (10.0..=15.0).contains(&d) || d > 20.0,
            Scenario::FullSet => true,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "extrapolation" => Ok(Scenario::Extrapolation),
            "interpolation" => Ok(Scenario::Interpolation),
            "full-set" | "fullset" | "full" => Ok(Scenario::FullSet),
            other => Err(Error::Validation(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSplit {
    pub scenario: Scenario,
    pub train: Vec<PathLossSample>,
    pub test: Vec<PathLossSample>,
}

/// Splits `samples` by distance. For `FullSet` the test partition is the
/// whole set as well; callers with a separate held-out run replace it.
pub fn make_split(samples: &[PathLossSample], scenario: Scenario) -> Result<ScenarioSplit> {
    if samples.is_empty() {
        return Err(Error::Degenerate(format!(
            "{}: no samples",
            scenario.name()
        )));
    }
    let (train, test) = match scenario {
        Scenario::FullSet => (samples.to_vec(), samples.to_vec()),
        _ => samples.iter().partition(|s| scenario.trains_on(s.distance)),
    };
    for (part, name) in [(&train, "training"), (&test, "test")] {
        if part.is_empty() {
            return Err(Error::Degenerate(format!(
                "{}: empty {name} partition",
                scenario.name()
            )));
        }
    }
    Ok(ScenarioSplit {
        scenario,
        train,
        test,
    })
}

/// Root-mean-square error of `model` against observed samples.
pub fn rmse(model: &PathLossModel, samples: &[PathLossSample]) -> Result<f64> {
    rmse_against(samples, |d| model.predict(d))
}

/// RMSE of `f(distance)` against each sample's path loss.
pub fn rmse_against(samples: &[PathLossSample], f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Degenerate("rmse of an empty set".into()));
    }
    let mut ss = 0.0;
    for s in samples {
        ss += (f(s.distance)? - s.path_loss).powi(2);
    }
    Ok((ss / samples.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(d: f64, pl: f64) -> PathLossSample {
        PathLossSample::new(d, pl).unwrap()
    }

    #[test]
    fn percentile_values() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5).unwrap(), 2.5);
        assert_eq!(percentile(&v, 0.25).unwrap(), 1.75);
        assert_eq!(percentile(&[7.0], 0.9).unwrap(), 7.0);
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn curve_values() {
        let one_bin: Vec<_> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| s(3.2, v)).collect();
        let c = percentile_curve(&one_bin, 1.0).unwrap();
        assert_eq!(c.bins.len(), 1);
        let b = c.bins[0];
        assert_eq!(
            (b.centre, b.p25, b.p50, b.p75, b.count),
            (3.5, 1.75, 2.5, 3.25, 4)
        );

        let spread: Vec<_> = (1..10)
            .map(|i| s(i as f64 + 0.5, 40.0 + i as f64))
            .collect();
        let c = percentile_curve(&spread, 1.0).unwrap();
        assert!(c.bins.iter().all(|b| b.p25 == b.p50 && b.p50 == b.p75));
        assert!(percentile_curve(&spread, 0.0).is_err());
    }

    #[test]
    fn diffs() {
        let a: Vec<_> = (0..200)
            .map(|i| s(1.0 + 0.1 * i as f64, (i % 13) as f64))
            .collect();
        let b: Vec<_> = a.iter().map(|x| s(x.distance, x.path_loss + 3.0)).collect();
        let ca = percentile_curve(&a, 1.0).unwrap();
        let cb = percentile_curve(&b, 1.0).unwrap();
        assert!(percentile_diff(&ca, &ca)
            .unwrap()
            .iter()
            .all(|d| d.d25 == 0.0 && d.d50 == 0.0 && d.d75 == 0.0));
        for d in percentile_diff(&cb, &ca).unwrap() {
            for v in [d.d25, d.d50, d.d75] {
                assert!((v - 3.0).abs() < 1e-12);
            }
        }
        let far: Vec<_> = a
            .iter()
            .map(|x| s(x.distance + 100.0, x.path_loss))
            .collect();
        let cf = percentile_curve(&far, 1.0).unwrap();
        assert!(percentile_diff(&cf, &ca).unwrap().is_empty());
    }

    #[test]
    fn box_values() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        let b = box_stats(&v).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (3.0, 5.0, 7.0));
        assert!(b.outliers.is_empty());
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 9.0));

        let mut v = v;
        v.push(100.0);
        let b = box_stats(&v).unwrap();
        assert_eq!((b.q1, b.q3), (3.25, 7.75));
        assert_eq!(b.fences().1, 14.5);
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_high, 9.0);
        assert_eq!(b.csv_row("x"), "x,3.25,5.5,7.75,1,9,100");

        let b = box_stats(&[2.0; 6]).unwrap();
        assert_eq!(b.iqr(), 0.0);
        assert!(b.outliers.is_empty());
        assert_eq!((b.whisker_low, b.whisker_high), (2.0, 2.0));
        assert!(box_stats(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn split_boundaries() {
        assert!(Scenario::Extrapolation.trains_on(9.99));
        assert!(!Scenario::Extrapolation.trains_on(10.0));
        assert!(!Scenario::Interpolation.trains_on(7.0));
        assert!(Scenario::Interpolation.trains_on(12.0));
        assert!(Scenario::Interpolation.trains_on(10.0));
        assert!(Scenario::Interpolation.trains_on(15.0));
        assert!(!Scenario::Interpolation.trains_on(5.0));
        assert!(!Scenario::Interpolation.trains_on(20.0));
        assert!(Scenario::Interpolation.trains_on(4.99));
        assert!(Scenario::Interpolation.trains_on(20.01));

        let only_near = vec![s(1.0, 40.0), s(2.0, 45.0)];
        let err = make_split(&only_near, Scenario::Extrapolation).unwrap_err();
        assert!(err.to_string().contains("extrapolation"));
        let full = make_split(&only_near, Scenario::FullSet).unwrap();
        assert_eq!(full.train, only_near);
    }

    proptest! {
        #[test]
        fn percentile_matches_oracle(v in prop::collection::vec(-1e3..1e3f64, 1..50), q in 0.0..=1.0f64) {
            // independent oracle: insertion sort + explicit interpolation
            let mut sorted: Vec<f64> = Vec::new();
            for &x in &v {
                let pos = sorted.iter().position(|&y| y > x).unwrap_or(sorted.len());
                sorted.insert(pos, x);
            }
            let h = q * (sorted.len() as f64 - 1.0);
            let i = h as usize;
            let frac = h - i as f64;
            let want = if i + 1 < sorted.len() { sorted[i] * (1.0 - frac) + sorted[i + 1] * frac } else { sorted[i] };
            prop_assert!((percentile(&v, q).unwrap() - want).abs() <= 1e-9);
        }

        #[test]
        fn box_partition(v in prop::collection::vec(-100.0..100.0f64, 4..60)) {
            let b = box_stats(&v).unwrap();
            let (lo, hi) = b.fences();
            let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
            prop_assert_eq!(inside.len() + b.outliers.len(), v.len());
            prop_assert!(b.outliers.iter().all(|x| *x < lo || *x > hi));
            prop_assert!(b.whisker_low >= lo && b.whisker_high <= hi);
        }

        #[test]
        fn split_partitions(ds in prop::collection::vec(0.1..30.0f64, 1..100)) {
            let samples: Vec<_> = ds.iter().map(|&d| s(d, 50.0)).collect();
            for sc in [Scenario::Extrapolation, Scenario::Interpolation] {
                if let Ok(split) = make_split(&samples, sc) {
                    prop_assert_eq!(split.train.len() + split.test.len(), samples.len());
                    prop_assert!(split.train.iter().all(|x| sc.trains_on(x.distance)));
                    prop_assert!(split.test.iter().all(|x| !sc.trains_on(x.distance)));
                }
            }
        }
    }
}
