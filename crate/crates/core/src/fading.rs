//! Fast-fading extraction, distribution fitting and CDF export.
//!
//! Residuals are what is left of each path-loss sample after subtracting the
//! mean loss of its one-metre distance bin. Three families are fitted to the
//! pooled residuals by maximum likelihood:
//!
//! | family   | parameters              | support        |
//! |----------|-------------------------|----------------|
//! | Normal   | mean, std               | all reals      |
//! | Rayleigh | location, scale         | `x > location` |
//! | Rician   | shape b, location, scale| `x > location` |
//!
//! Rayleigh and Rician carry a location shift because residuals are signed.
//! The family whose density best matches a density-normalised histogram of
//! the residuals (least sum of squared error at bin centres) is selected and
//! exported as a `(loss, cumulative probability)` table.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::traces::{read_table, PathLossSample};

/// Smallest sample count accepted by [`select_fading`].
pub const MIN_SELECT_SAMPLES: usize = 30;
pub const DEFAULT_HIST_BINS: usize = 100;
pub const DEFAULT_CDF_POINTS: usize = 1000;
/// Tail probability at which exported tables are truncated.
pub const CDF_TAIL: f64 = 1e-4;
/// Relative SSE gap below which two candidates are considered tied. The
/// Rician family contains Rayleigh (shape 0) and approaches Normal at large
/// shape, so on data from either it matches the true family to within the
/// histogram's sampling noise.
pub const SSE_TIE_RTOL: f64 = 0.05;
pub const CDF_HEADER: [&str; 2] = ["loss_db", "cum_prob"];

// ---------------------------------------------------------------------------
// Residual extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// One residual per input sample, in input order.
    pub values: Vec<f64>,
    /// Mean path loss keyed by `floor(distance)`.
    pub per_metre_mean: BTreeMap<i64, f64>,
}

fn metre_bin(d: f64) -> i64 {
    d.floor() as i64
}

pub fn extract_residuals(samples: &[PathLossSample]) -> Result<Residuals> {
    if samples.is_empty() {
        return Err(Error::Degenerate(
            "no samples to extract residuals from".into(),
        ));
    }
    let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for s in samples {
        let e = acc.entry(metre_bin(s.distance)).or_default();
        e.0 += s.path_loss;
        e.1 += 1;
    }
    let per_metre_mean: BTreeMap<i64, f64> = acc
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    let values = samples
        .iter()
        .map(|s| s.path_loss - per_metre_mean[&metre_bin(s.distance)])
        .collect();
    Ok(Residuals {
        values,
        per_metre_mean,
    })
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FadingFamily {
    Normal,
    Rayleigh,
    Rician,
}

impl FadingFamily {
    pub const ALL: [FadingFamily; 3] = [Self::Normal, Self::Rayleigh, Self::Rician];

    pub fn name(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Rayleigh => "rayleigh",
            Self::Rician => "rician",
        }
    }
}

impl std::fmt::Display for FadingFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FadingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Self::Normal),
            "rayleigh" => Ok(Self::Rayleigh),
            "rician" | "rice" => Ok(Self::Rician),
            other => Err(Error::Validation(format!(
                "unknown fading family `{other}`"
            ))),
        }
    }
}

/// A fully parameterised fading distribution (values in dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingDist {
    Normal { mean: f64, std: f64 },
    Rayleigh { loc: f64, scale: f64 },
    Rician { shape: f64, loc: f64, scale: f64 },
}

impl FadingDist {
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::Normal { mean, std }.validated()
    }

    pub fn rayleigh(loc: f64, scale: f64) -> Result<Self> {
        Self::Rayleigh { loc, scale }.validated()
    }

    pub fn rician(shape: f64, loc: f64, scale: f64) -> Result<Self> {
        Self::Rician { shape, loc, scale }.validated()
    }

    fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Normal { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            Self::Rayleigh { loc, scale } => loc.is_finite() && scale > 0.0 && scale.is_finite(),
            Self::Rician { shape, loc, scale } => {
                shape >= 0.0
                    && shape.is_finite()
                    && loc.is_finite()
                    && scale > 0.0
                    && scale.is_finite()
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::Validation(format!(
                "invalid distribution parameters {self:?}"
            )))
        }
    }

    pub fn family(&self) -> FadingFamily {
        match self {
            Self::Normal { .. } => FadingFamily::Normal,
            Self::Rayleigh { .. } => FadingFamily::Rayleigh,
            Self::Rician { .. } => FadingFamily::Rician,
        }
    }

    /// Parameters in declaration order, for reports.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Self::Normal { mean, std } => vec![("mean", mean), ("std", std)],
            Self::Rayleigh { loc, scale } => vec![("loc", loc), ("scale", scale)],
            Self::Rician { shape, loc, scale } => {
                vec![("shape", shape), ("loc", loc), ("scale", scale)]
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Self::Rayleigh { loc, scale } => {
                let y = (x - loc) / scale;
                if y <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                y.ln() - 0.5 * y * y - scale.ln()
            }
            Self::Rician { shape, loc, scale } => {
                let y = (x - loc) / scale;
                if y <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                // exp(-(y^2 + b^2)/2) I0(by) = exp(-(y - b)^2/2) I0e(by)
                y.ln() - 0.5 * (y - shape) * (y - shape) + ln_i0e(shape * y) - scale.ln()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, std } => standard_normal().cdf((x - mean) / std),
            Self::Rayleigh { loc, scale } => {
                let y = (x - loc) / scale;
                if y <= 0.0 {
                    0.0
                } else {
                    -(-0.5 * y * y).exp_m1()
                }
            }
            Self::Rician { shape, loc, scale } => rician_cdf_std((x - loc) / scale, shape),
        }
    }

    /// Inverse CDF for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Normal { mean, std } => mean + std * standard_normal().inverse_cdf(p),
            Self::Rayleigh { loc, scale } => loc + scale * (-2.0 * (-p).ln_1p()).sqrt(),
            Self::Rician { shape, loc, scale } => loc + scale * rician_quantile_std(p, shape),
        }
    }

    /// Negative log-likelihood of `values`.
    pub fn nll(&self, values: &[f64]) -> f64 {
        -values.iter().map(|&x| self.ln_pdf(x)).sum::<f64>()
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `1 / (k!)^2` for the I0 power series.
const I0_SERIES: [f64; 48] = {
    let mut c = [0.0; 48];
    c[0] = 1.0;
    let mut k = 1;
    while k < 48 {
        c[k] = c[k - 1] / ((k * k) as f64);
        k += 1;
    }
    c
};

/// Boundary between the power series and the asymptotic expansion.
const I0_SERIES_MAX: f64 = 20.0;

/// `ln(I0(z) e^{-|z|})`: power series for small arguments, Hankel
/// asymptotic expansion for large ones.
pub fn ln_i0e(z: f64) -> f64 {
    let z = z.abs();
    if z <= I0_SERIES_MAX {
        // sum_k (z^2/4)^k / (k!)^2, truncated where the tail is below 1e-17
        let q = 0.25 * z * z;
        let terms = if q < 1.0 {
            14
        } else if q < 10.0 {
            26
        } else {
            48
        };
        let sum = I0_SERIES[..terms]
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * q + c);
        sum.ln() - z
    } else {
        // I0(z) ~ e^z / sqrt(2 pi z) * sum_k ((2k-1)!!)^2 / (k! (8z)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * z);
            if next > term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * z).ln()
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(z: f64) -> f64 {
    (ln_i0e(z) + z.abs()).exp()
}

/// CDF of a unit-scale Rician with shape `b` at `y`. `(y)^2` is noncentral
/// chi-square with two degrees of freedom and noncentrality `b^2`, so the CDF
/// is a Poisson mixture of regularised lower incomplete gamma functions.
fn rician_cdf_std(y: f64, b: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let half_y2 = 0.5 * y * y;
    let lam = 0.5 * b * b;
    if lam == 0.0 {
        return -(-half_y2).exp_m1();
    }
    let centre = lam.floor();
    let width = (10.0 * lam.sqrt() + 20.0).ceil();
    let lo = (centre - width).max(0.0) as u64;
    let hi = (centre + width) as u64;
    let ln_lam = lam.ln();
    let mut acc = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let w = (-lam + jf * ln_lam - ln_gamma(jf + 1.0)).exp();
        if w == 0.0 {
            continue;
        }
        acc += w * gamma_lr(jf + 1.0, half_y2);
    }
    acc.clamp(0.0, 1.0)
}

fn rician_quantile_std(p: f64, b: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = b + 10.0;
    while rician_cdf_std(hi, b) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rician_cdf_std(mid, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingFit {
    pub dist: FadingDist,
    /// Histogram-vs-density squared error; zero until scored by [`select_fading`].
    pub sse: f64,
}

impl FadingFit {
    pub fn family(&self) -> FadingFamily {
        self.dist.family()
    }
}

struct Summary {
    n: f64,
    min: f64,
    max: f64,
    mean: f64,
    var: f64,
}

fn summarise(values: &[f64]) -> Result<Summary> {
    if values.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two values to fit, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(
            "non-finite value in fitting input".into(),
        ));
    }
    let n = values.len() as f64;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if min == max {
        return Err(Error::Degenerate("all values are equal".into()));
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary {
        n,
        min,
        max,
        mean,
        var,
    })
}

/// Gap between the smallest value and the initial location guess of the
/// shifted families.
fn location_margin(s: &Summary) -> f64 {
    1e-2 * (s.max - s.min)
}

pub fn fit_normal(values: &[f64]) -> Result<FadingFit> {
    let s = summarise(values)?;
    Ok(FadingFit {
        dist: FadingDist::normal(s.mean, s.var.sqrt())?,
        sse: 0.0,
    })
}

pub fn fit_rayleigh(values: &[f64]) -> Result<FadingFit> {
    let s = summarise(values)?;
    let loc0 = s.min - location_margin(&s);
    let scale0 = (values.iter().map(|x| (x - loc0).powi(2)).sum::<f64>() / (2.0 * s.n)).sqrt();

    let min = s.min;
    let nll = |p: &[f64]| {
        let (loc, scale) = (p[0], p[1]);
        if !(scale > 0.0) || loc >= min {
            return f64::INFINITY;
        }
        FadingDist::Rayleigh { loc, scale }.nll(values)
    };
    let m = NelderMead::default().minimize(nll, &[loc0, scale0], &[-0.1 * scale0, 0.1 * scale0]);
    if !m.converged {
        return Err(Error::NoConvergence {
            family: "rayleigh",
            iterations: m.iterations,
            best: m.x,
            best_value: m.value,
        });
    }
    Ok(FadingFit {
        dist: FadingDist::rayleigh(m.x[0], m.x[1])?,
        sse: 0.0,
    })
}

pub fn fit_rician(values: &[f64]) -> Result<FadingFit> {
    let s = summarise(values)?;
    let loc0 = s.min - location_margin(&s);

    // Moments of R = x - loc: 2 E[R^2]^2 - E[R^4] = nu^4, E[R^2] = 2 sigma^2 + nu^2.
    let m2 = values.iter().map(|x| (x - loc0).powi(2)).sum::<f64>() / s.n;
    let m4 = values.iter().map(|x| (x - loc0).powi(4)).sum::<f64>() / s.n;
    let nu2 = (2.0 * m2 * m2 - m4).max(0.0).sqrt();
    let mut sigma2 = 0.5 * (m2 - nu2);
    if !(sigma2 > 0.0) {
        sigma2 = 0.5 * s.var.max(f64::MIN_POSITIVE);
    }
    let scale0 = sigma2.sqrt();
    let shape0 = (nu2.sqrt() / scale0).max(0.1);

    let min = s.min;
    let nll = |p: &[f64]| {
        let (shape, loc, scale) = (p[0].abs(), p[1], p[2]);
        if !(scale > 0.0) || loc >= min {
            return f64::INFINITY;
        }
        FadingDist::Rician { shape, loc, scale }.nll(values)
    };
    let m = NelderMead::default().minimize(
        nll,
        &[shape0, loc0, scale0],
        &[0.1 * shape0.max(1.0), -0.1 * scale0, 0.1 * scale0],
    );
    if !m.converged {
        return Err(Error::NoConvergence {
            family: "rician",
            iterations: m.iterations,
            best: m.x,
            best_value: m.value,
        });
    }
    Ok(FadingFit {
        dist: FadingDist::rician(m.x[0].abs(), m.x[1], m.x[2])?,
        sse: 0.0,
    })
}

pub fn fit_family(family: FadingFamily, values: &[f64]) -> Result<FadingFit> {
    match family {
        FadingFamily::Normal => fit_normal(values),
        FadingFamily::Rayleigh => fit_rayleigh(values),
        FadingFamily::Rician => fit_rician(values),
    }
}

/// Equal-width histogram over `[min, max]`, normalised to unit area.
/// Returns `(bin centre, density)` pairs.
pub fn density_histogram(values: &[f64], n_bins: usize) -> Vec<(f64, f64)> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = (max - min) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let i = (((v - min) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    let norm = values.len() as f64 * width;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (min + (i as f64 + 0.5) * width, c as f64 / norm))
        .collect()
}

pub fn histogram_sse(hist: &[(f64, f64)], dist: &FadingDist) -> f64 {
    hist.iter().map(|&(x, h)| (h - dist.pdf(x)).powi(2)).sum()
}

/// Every candidate family with its fit (scored) or the reason it failed.
pub fn fit_candidates(
    values: &[f64],
    n_bins: usize,
) -> Result<Vec<(FadingFamily, Result<FadingFit>)>> {
    if values.len() < MIN_SELECT_SAMPLES {
        return Err(Error::Degenerate(format!(
            "need at least {MIN_SELECT_SAMPLES} residuals to select a fading model, got {}",
            values.len()
        )));
    }
    if n_bins < 1 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    summarise(values)?;
    let hist = density_histogram(values, n_bins);
    Ok(FadingFamily::ALL
        .iter()
        .map(|&family| {
            let fit = fit_family(family, values).map(|mut f| {
                f.sse = histogram_sse(&hist, &f.dist);
                f
            });
            (family, fit)
        })
        .collect())
}

/// Picks the family with the least histogram SSE. A later family only
/// displaces an earlier one when its SSE is lower by more than
/// [`SSE_TIE_RTOL`]; closer scores are ties and go to the earlier family.
/// Families whose fit fails are skipped.
pub fn select_fading(values: &[f64], n_bins: usize) -> Result<FadingFit> {
    choose_fading(&fit_candidates(values, n_bins)?)
}

/// The selection rule of [`select_fading`] applied to precomputed candidates.
pub fn choose_fading(candidates: &[(FadingFamily, Result<FadingFit>)]) -> Result<FadingFit> {
    let mut best: Option<FadingFit> = None;
    for (family, fit) in candidates {
        match fit {
            Ok(fit) => {
                if best.is_none_or(|b| fit.sse < b.sse * (1.0 - SSE_TIE_RTOL)) {
                    best = Some(*fit);
                }
            }
            Err(e) => log::warn!("{family} fit skipped: {e}"),
        }
    }
    best.ok_or_else(|| Error::Degenerate("no candidate distribution could be fitted".into()))
}

// ---------------------------------------------------------------------------
// CDF tables
// ---------------------------------------------------------------------------

/// Piecewise-linear CDF: `(loss dB, cumulative probability)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    points: Vec<(f64, f64)>,
}

impl CdfTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let invalid = |msg: &str| Err(Error::Validation(format!("cdf table: {msg}")));
        if points.len() < 2 {
            return invalid("needs at least two points");
        }
        if points
            .iter()
            .any(|(l, p)| !l.is_finite() || !(0.0..=1.0).contains(p))
        {
            return invalid("losses must be finite and probabilities in [0, 1]");
        }
        if points.first().unwrap().1 != 0.0 || points.last().unwrap().1 != 1.0 {
            return invalid("first probability must be 0 and last 1");
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return invalid("losses must be strictly increasing");
            }
            if w[1].1 < w[0].1 {
                return invalid("probabilities must be non-decreasing");
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn min_loss(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_loss(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Linear-interpolated inverse of the table at `u` in [0, 1).
    pub fn invert(&self, u: f64) -> f64 {
        let pts = &self.points;
        if u < pts[0].1 {
            return pts[0].0;
        }
        // first point with probability > u
        let j = pts.partition_point(|&(_, p)| p <= u);
        if j >= pts.len() {
            return pts[pts.len() - 1].0;
        }
        let (l1, p1) = pts[j - 1];
        let (l2, p2) = pts[j];
        l1 + (u - p1) * (l2 - l1) / (p2 - p1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", CDF_HEADER.join(","))?;
        for (l, p) in &self.points {
            writeln!(w, "{l},{p}")?;
        }
        w.flush()
    }

    pub fn read_csv<R: Read>(reader: R, label: &Path) -> Result<Self> {
        let points = read_table(reader, label, &CDF_HEADER, |_, v| Ok((v[0], v[1])))?;
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

/// Tabulates `dist` at `n_points` equally spaced probabilities. The end
/// points sit at the `CDF_TAIL` and `1 - CDF_TAIL` quantiles but are labelled
/// 0 and 1 so the table covers the whole unit interval.
pub fn to_cdf_table(dist: &FadingDist, n_points: usize) -> Result<CdfTable> {
    if n_points < 2 {
        return Err(Error::Validation(
            "cdf table needs at least two points".into(),
        ));
    }
    let max_points = (1.0 / CDF_TAIL) as usize;
    if n_points > max_points {
        return Err(Error::Validation(format!(
            "cdf table resolution is limited to {max_points} points"
        )));
    }
    let last = n_points - 1;
    let points = (0..n_points)
        .map(|i| {
            let (q, p) = match i {
                0 => (CDF_TAIL, 0.0),
                i if i == last => (1.0 - CDF_TAIL, 1.0),
                i => {
                    let p = i as f64 / last as f64;
                    (p, p)
                }
            };
            (dist.quantile(q), p)
        })
        .collect();
    CdfTable::new(points)
}
