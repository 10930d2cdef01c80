//! Total propagation loss: a deterministic path-loss term plus an optional
//! fast-fading draw, and the received power that results.

use crate::baselines::{friis_loss, log_distance_loss, LogDistanceParams};
use crate::error::{Error, Result};
use crate::fading::CdfTable;
use crate::pathloss_ml::PathLossModel;
use crate::randvar::{sample_fading, RngStream};

/// Source of the deterministic component.
#[derive(Debug, Clone, PartialEq)]
pub enum PathLossVariant {
    Mlpl(PathLossModel),
    Friis { freq_mhz: f64 },
    LogDistance(LogDistanceParams),
}

impl PathLossVariant {
    pub fn path_loss(&self, d: f64) -> Result<f64> {
        match self {
            PathLossVariant::Mlpl(m) => m.predict(d),
            PathLossVariant::Friis { freq_mhz } => friis_loss(d, *freq_mhz),
            PathLossVariant::LogDistance(p) => log_distance_loss(d, p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PathLossVariant::Mlpl(_) => "mlpl",
            PathLossVariant::Friis { .. } => "friis",
            PathLossVariant::LogDistance(_) => "log-distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fading {
    pub table: CdfTable,
    pub rng: RngStream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationEngine {
    pub variant: PathLossVariant,
    pub fading: Option<Fading>,
}

impl PropagationEngine {
    pub fn deterministic(variant: PathLossVariant) -> Self {
        Self {
            variant,
            fading: None,
        }
    }

    pub fn with_fading(variant: PathLossVariant, table: CdfTable, rng: RngStream) -> Self {
        Self {
            variant,
            fading: Some(Fading { table, rng }),
        }
    }

    /// Path loss at `d` plus one fading draw when fading is configured.
    /// The result may be negative under a deep enough fading draw.
    pub fn total_loss(&mut self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("distance must be positive, got {d}")));
        }
        let pl = self.variant.path_loss(d)?;
        let ff = match &mut self.fading {
            Some(f) => sample_fading(&f.table, &mut f.rng),
            None => 0.0,
        };
        Ok(pl + ff)
    }
}

/// Transmit side of a link: power and both antenna gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl LinkBudget {
    /// 7 dBm, -7 dBi at each end (10 dB in-line attenuators on 3 dBi antennas).
    pub const WAREHOUSE: LinkBudget = LinkBudget {
        tx_power: 7.0,
        tx_gain: -7.0,
        rx_gain: -7.0,
    };
}

pub fn rx_power(budget: &LinkBudget, loss: f64) -> f64 {
    budget.tx_power + budget.tx_gain + budget.rx_gain - loss
}
