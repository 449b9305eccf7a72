//! Aggregator-side billing.
//!
//! Every period the aggregator prices each consumer's report at the current
//! tariff and adds it to that consumer's running cost. At the end of the
//! window the ledger issues one statement per consumer and starts the next
//! window. Billing only ever sees reports, never actual usage.

use crate::error::{Error, Result};
use crate::grid::{ConsumerId, ConsumerProfile};

pub const DEFAULT_FLAT_TARIFF: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TariffSchedule {
    Flat(f64),
    /// One price per simulated period.
    PerPeriod(Vec<f64>),
}

impl Default for TariffSchedule {
    fn default() -> Self {
        TariffSchedule::Flat(DEFAULT_FLAT_TARIFF)
    }
}

impl TariffSchedule {
    pub fn validate(&self, total_periods: u64) -> Result<()> {
        let check = |p: f64| {
            if p.is_finite() && p >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    "billing.tariff",
                    format!("prices must be >= 0, got {p}"),
                ))
            }
        };
        match self {
            TariffSchedule::Flat(p) => check(*p),
            TariffSchedule::PerPeriod(prices) => {
                if prices.len() as u64 != total_periods {
                    return Err(Error::config(
                        "billing.tariff",
                        format!(
                            "per-period tariff has {} entries, simulation has {total_periods} periods",
                            prices.len()
                        ),
                    ));
                }
                prices.iter().try_for_each(|&p| check(p))
            }
        }
    }

    /// Price in effect at `period`. Per-period schedules are validated to
    /// cover every simulated period.
    pub fn at(&self, period: u64) -> f64 {
        match self {
            TariffSchedule::Flat(p) => *p,
            TariffSchedule::PerPeriod(prices) => prices[period as usize],
        }
    }
}

/// Optional demand response: while the tariff is above `trigger_price`,
/// consumers draw usage from `[usage_min, usage_factor * usage_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elasticity {
    pub trigger_price: f64,
    pub usage_factor: f64,
}

impl Elasticity {
    pub fn validate(&self, consumers: &[ConsumerProfile]) -> Result<()> {
        if !(self.trigger_price.is_finite() && self.trigger_price >= 0.0) {
            return Err(Error::config(
                "billing.elasticity_trigger",
                format!("must be >= 0, got {}", self.trigger_price),
            ));
        }
        if !(self.usage_factor.is_finite() && self.usage_factor > 0.0) {
            return Err(Error::config(
                "billing.elasticity_factor",
                format!("must be > 0, got {}", self.usage_factor),
            ));
        }
        for c in consumers {
            if c.usage_max * self.usage_factor <= c.usage_min {
                return Err(Error::config(
                    "billing.elasticity_factor",
                    format!(
                        "consumer {}: scaled usage_max {} no longer exceeds usage_min {}",
                        c.id,
                        c.usage_max * self.usage_factor,
                        c.usage_min
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn applies(&self, price: f64) -> bool {
        price > self.trigger_price
    }

    pub fn adjust(&self, profile: &ConsumerProfile) -> ConsumerProfile {
        ConsumerProfile {
            usage_max: profile.usage_max * self.usage_factor,
            ..profile.clone()
        }
    }
}

/// One consumer's statement for a closed window `[window_start, window_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bill {
    pub consumer_id: ConsumerId,
    pub window_start: u64,
    pub window_end: u64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BillingLedger {
    ids: Vec<ConsumerId>,
    costs: Vec<f64>,
    window_start: u64,
    window_end: u64,
    accrued: Vec<bool>,
}

impl BillingLedger {
    /// Ledger for the half-open window `[start, start + len)`. `ids` fixes the
    /// consumer order expected by [`BillingLedger::accrue`].
    pub fn new(ids: Vec<ConsumerId>, start: u64, len: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::config(
                "billing.window_days",
                "window must span >= 1 period",
            ));
        }
        let n = ids.len();
        Ok(Self {
            ids,
            costs: vec![0.0; n],
            window_start: start,
            window_end: start + len,
            accrued: vec![false; len as usize],
        })
    }

    pub fn window(&self) -> (u64, u64) {
        (self.window_start, self.window_end)
    }

    pub fn is_complete(&self) -> bool {
        self.accrued.iter().all(|&a| a)
    }

    pub fn cost_of(&self, id: ConsumerId) -> Option<f64> {
        self.ids
            .iter()
            .position(|&i| i == id)
            .map(|p| self.costs[p])
    }

    /// Adds `price * report` to each consumer's running cost. Each period of
    /// the window may be accrued once, in any order.
    pub fn accrue(&mut self, period: u64, reports: &[f64], price: f64) -> Result<()> {
        if period < self.window_start || period >= self.window_end {
            return Err(Error::Input(format!(
                "period {period} outside billing window [{}, {})",
                self.window_start, self.window_end
            )));
        }
        if reports.len() != self.ids.len() {
            return Err(Error::Input(format!(
                "{} reports for {} consumers",
                reports.len(),
                self.ids.len()
            )));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::Input(format!("tariff must be >= 0, got {price}")));
        }
        let slot = &mut self.accrued[(period - self.window_start) as usize];
        if *slot {
            return Err(Error::Input(format!("period {period} already accrued")));
        }
        *slot = true;
        for (cost, &r) in self.costs.iter_mut().zip(reports) {
            *cost += price * r;
        }
        Ok(())
    }

    /// Emits one bill per consumer and resets the ledger to the next window
    /// of the same length.
    pub fn issue_bills(&mut self) -> Result<Vec<Bill>> {
        if !self.is_complete() {
            let missing = self.accrued.iter().filter(|a| !**a).count();
            return Err(Error::State(format!(
                "billing window [{}, {}) has {missing} periods not yet accrued",
                self.window_start, self.window_end
            )));
        }
        let bills = self
            .ids
            .iter()
            .zip(&self.costs)
            .map(|(&consumer_id, &amount)| Bill {
                consumer_id,
                window_start: self.window_start,
                window_end: self.window_end,
                amount,
            })
            .collect();
        let len = self.window_end - self.window_start;
        self.window_start = self.window_end;
        self.window_end += len;
        self.costs.iter_mut().for_each(|c| *c = 0.0);
        self.accrued.iter_mut().for_each(|a| *a = false);
        Ok(bills)
    }
}
