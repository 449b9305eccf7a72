//! Grid entities and per-period ground truth.
//!
//! A region holds a fixed set of consumers. Each period every consumer draws
//! an actual usage and, depending on its behavior, reports that usage or a
//! falsified value to the region's aggregator.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub type ConsumerId = u32;

pub const DEFAULT_USAGE_MIN: f64 = 0.5;
pub const DEFAULT_USAGE_MAX: f64 = 1.5;
/// 15-minute periods.
pub const DEFAULT_PERIODS_PER_DAY: u32 = 96;
/// Days per billing/measurement month.
pub const DAYS_PER_MONTH: u32 = 30;

/// Whether an offset attacker lowers or raises its report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Subtract,
    Add,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Subtract => "subtract",
            Direction::Add => "add",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a consumer turns its actual usage into a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorModel {
    Benign,
    /// Reports `alpha * actual`. `alpha == 1` is behaviorally benign.
    Multiplicative {
        alpha: f64,
    },
    /// Adds or subtracts a fixed `eta`, clipping at zero.
    FixedOffset {
        eta: f64,
        direction: Direction,
    },
    /// Adds or subtracts `theta ~ U(0, theta_max)`, drawn independently of the
    /// actual usage, clipping at zero.
    RandomOffset {
        theta_max: f64,
        direction: Direction,
    },
}

impl BehaviorModel {
    pub fn is_benign(&self) -> bool {
        matches!(self, BehaviorModel::Benign)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BehaviorModel::Benign => Ok(()),
            BehaviorModel::Multiplicative { alpha } => {
                if alpha.is_finite() && alpha > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("alpha", format!("must be > 0, got {alpha}")))
                }
            }
            BehaviorModel::FixedOffset { eta, .. } => {
                if eta.is_finite() && eta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("eta", format!("must be > 0, got {eta}")))
                }
            }
            BehaviorModel::RandomOffset { theta_max, .. } => {
                if theta_max.is_finite() && theta_max > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(
                        "theta_max",
                        format!("must be > 0, got {theta_max}"),
                    ))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerProfile {
    pub id: ConsumerId,
    pub usage_min: f64,
    pub usage_max: f64,
    pub behavior: BehaviorModel,
}

impl ConsumerProfile {
    pub fn benign(id: ConsumerId) -> Self {
        Self {
            id,
            usage_min: DEFAULT_USAGE_MIN,
            usage_max: DEFAULT_USAGE_MAX,
            behavior: BehaviorModel::Benign,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.usage_min.is_finite() && self.usage_min >= 0.0) {
            return Err(Error::config(
                "usage_min",
                format!("consumer {}: must be >= 0, got {}", self.id, self.usage_min),
            ));
        }
        if !(self.usage_max.is_finite() && self.usage_max > self.usage_min) {
            return Err(Error::config(
                "usage_max",
                format!(
                    "consumer {}: must exceed usage_min {}, got {}",
                    self.id, self.usage_min, self.usage_max
                ),
            ));
        }
        self.behavior.validate()
    }

    pub fn mean_usage(&self) -> f64 {
        0.5 * (self.usage_min + self.usage_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionConfig {
    pub region_id: u32,
    pub consumers: Vec<ConsumerProfile>,
    pub periods_per_day: u32,
    pub num_days: u32,
}

impl RegionConfig {
    /// `n` default-profile benign consumers with ids `0..n`.
    pub fn uniform(n: u32, num_days: u32) -> Self {
        Self {
            region_id: 0,
            consumers: (0..n).map(ConsumerProfile::benign).collect(),
            periods_per_day: DEFAULT_PERIODS_PER_DAY,
            num_days,
        }
    }

    pub fn total_periods(&self) -> u64 {
        u64::from(self.periods_per_day) * u64::from(self.num_days)
    }

    pub fn validate(&self) -> Result<()> {
        if self.consumers.len() < 2 {
            return Err(Error::config(
                "region.consumers",
                format!(
                    "at least 2 consumers required, got {}",
                    self.consumers.len()
                ),
            ));
        }
        if self.periods_per_day == 0 {
            return Err(Error::config("region.periods_per_day", "must be > 0"));
        }
        if self.num_days == 0 {
            return Err(Error::config("region.num_days", "must be > 0"));
        }
        let mut ids = HashSet::with_capacity(self.consumers.len());
        for c in &self.consumers {
            if !ids.insert(c.id) {
                return Err(Error::config(
                    "region.consumers",
                    format!("duplicate consumer id {}", c.id),
                ));
            }
            c.validate()?;
        }
        Ok(())
    }

    pub fn position(&self, id: ConsumerId) -> Option<usize> {
        self.consumers.iter().position(|c| c.id == id)
    }
}

/// Draws one period's actual usage, uniform on the profile's usage interval.
pub fn draw_usage<R: Rng + ?Sized>(profile: &ConsumerProfile, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    profile.usage_min + (profile.usage_max - profile.usage_min) * u
}

/// Maps an actual usage to the reported value. Reports are never negative.
///
/// Only `RandomOffset` consumes randomness (one draw per call).
pub fn apply_behavior<R: Rng + ?Sized>(behavior: &BehaviorModel, actual: f64, rng: &mut R) -> f64 {
    match *behavior {
        BehaviorModel::Benign => actual,
        BehaviorModel::Multiplicative { alpha } => alpha * actual,
        BehaviorModel::FixedOffset { eta, direction } => offset(actual, eta, direction),
        BehaviorModel::RandomOffset {
            theta_max,
            direction,
        } => {
            let theta = theta_max * rng.random::<f64>();
            offset(actual, theta, direction)
        }
    }
}

fn offset(actual: f64, delta: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Subtract => (actual - delta).max(0.0),
        Direction::Add => actual + delta,
    }
}
