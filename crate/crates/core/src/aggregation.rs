//! Per-period aggregation at the region's data aggregator.
//!
//! Each period the aggregator sums all reports, compares the sum with the
//! region's actual consumption to obtain the leakage, and forwards exactly one
//! uniformly chosen consumer's `(id, report)` pair. Over a measurement window
//! those pairs, together with the leakage of the same period, form each
//! consumer's sample series.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::ConsumerId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    pub period_index: u64,
    pub actual_total: f64,
    pub reported_total: f64,
    /// `actual_total - reported_total`.
    pub leakage: f64,
    pub sampled_id: ConsumerId,
    pub sampled_report: f64,
}

/// Aggregates one period.
///
/// `ids`, `actuals`, and `reports` are parallel slices over the region's
/// consumers. Exactly one `random_range` draw is taken from `rng`.
pub fn aggregate_period<R: Rng + ?Sized>(
    ids: &[ConsumerId],
    actuals: &[f64],
    reports: &[f64],
    period_index: u64,
    rng: &mut R,
) -> Result<PeriodRecord> {
    let n = ids.len();
    if actuals.len() != n || reports.len() != n {
        return Err(Error::config(
            "region.consumers",
            format!(
                "length mismatch: {} ids, {} actuals, {} reports",
                n,
                actuals.len(),
                reports.len()
            ),
        ));
    }
    if n < 2 {
        return Err(Error::config(
            "region.consumers",
            format!("at least 2 consumers required, got {n}"),
        ));
    }
    let actual_total = lane_sum(actuals);
    let reported_total = lane_sum(reports);
    let pick = rng.random_range(0..n);
    Ok(PeriodRecord {
        period_index,
        actual_total,
        reported_total,
        leakage: actual_total - reported_total,
        sampled_id: ids[pick],
        sampled_report: reports[pick],
    })
}

/// Sum with four interleaved accumulators combined as `(a0 + a1) + (a2 + a3)`.
/// The order is fixed, so results are bit-reproducible.
fn lane_sum(values: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = values.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    for (a, v) in acc.iter_mut().zip(tail) {
        *a += v;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Paired observations for one consumer: the report it sent in each period it
/// was sampled, and that period's leakage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsumerSeries {
    pub reports: Vec<f64>,
    pub leakages: Vec<f64>,
}

impl ConsumerSeries {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn push(&mut self, report: f64, leakage: f64) {
        self.reports.push(report);
        self.leakages.push(leakage);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSeries {
    series: BTreeMap<ConsumerId, ConsumerSeries>,
    total_periods: u64,
}

impl SampleSeries {
    /// Empty series for every consumer in `ids`.
    pub fn new(ids: impl IntoIterator<Item = ConsumerId>) -> Self {
        Self {
            series: ids
                .into_iter()
                .map(|id| (id, ConsumerSeries::default()))
                .collect(),
            total_periods: 0,
        }
    }

    /// Appends one record's sampled pair. The record's period must not have
    /// been pushed before; [`accumulate_samples`] checks that, this does not.
    pub fn push(&mut self, record: &PeriodRecord) -> Result<()> {
        let entry = self.series.get_mut(&record.sampled_id).ok_or_else(|| {
            Error::Input(format!(
                "period {} samples unknown consumer {}",
                record.period_index, record.sampled_id
            ))
        })?;
        entry.push(record.sampled_report, record.leakage);
        self.total_periods += 1;
        Ok(())
    }

    pub fn get(&self, id: ConsumerId) -> Option<&ConsumerSeries> {
        self.series.get(&id)
    }

    /// Consumers in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (ConsumerId, &ConsumerSeries)> {
        self.series.iter().map(|(id, s)| (*id, s))
    }

    pub fn consumer_count(&self) -> usize {
        self.series.len()
    }

    pub fn total_periods(&self) -> u64 {
        self.total_periods
    }

    pub fn sample_counts(&self) -> Vec<(ConsumerId, usize)> {
        self.iter().map(|(id, s)| (id, s.len())).collect()
    }
}

/// Builds the per-consumer sample series from a window of period records.
pub fn accumulate_samples<'a>(
    ids: impl IntoIterator<Item = ConsumerId>,
    records: impl IntoIterator<Item = &'a PeriodRecord>,
) -> Result<SampleSeries> {
    let mut series = SampleSeries::new(ids);
    let mut seen = HashSet::new();
    for record in records {
        if !seen.insert(record.period_index) {
            return Err(Error::Input(format!(
                "duplicate period index {}",
                record.period_index
            )));
        }
        series.push(record)?;
    }
    Ok(series)
}
