//! Closed-form reference models: free-space (Friis) and log-distance.

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDistanceParams {
    pub ref_distance: f64,
    pub ref_loss: f64,
    pub exponent: f64,
}

impl LogDistanceParams {
    pub fn new(ref_distance: f64, ref_loss: f64, exponent: f64) -> Result<Self> {
        if !(ref_distance > 0.0) || !(exponent > 0.0) || !ref_loss.is_finite() {
            return Err(Error::Validation(format!(
                "log-distance parameters need d0 > 0 and n > 0 (d0={ref_distance}, n={exponent})"
            )));
        }
        Ok(Self {
            ref_distance,
            ref_loss,
            exponent,
        })
    }

    /// Indoor default anchored to free space at 1 m: `n = 3`.
    pub fn indoor_default(freq_mhz: f64) -> Result<Self> {
        Self::new(1.0, friis_loss(1.0, freq_mhz)?, 3.0)
    }
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("distance must be positive, got {d}")))
    }
}

/// Free-space loss `20 log10(4 pi d f / c)` with unit system loss.
pub fn friis_loss(d: f64, freq_mhz: f64) -> Result<f64> {
    check_distance(d)?;
    if !(freq_mhz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {freq_mhz}"
        )));
    }
    let f_hz = freq_mhz * 1e6;
    Ok(20.0 * (4.0 * std::f64::consts::PI * d * f_hz / SPEED_OF_LIGHT).log10())
}

pub fn log_distance_loss(d: f64, p: &LogDistanceParams) -> Result<f64> {
    check_distance(d)?;
    Ok(p.ref_loss + 10.0 * p.exponent * (d / p.ref_distance).log10())
}
