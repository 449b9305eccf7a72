//! Correlation-based detection of falsified reports.
//!
//! For every consumer the aggregator correlates the reports it sampled from
//! that consumer with the region's leakage in the same periods. A truthful
//! consumer's reports are independent of the leakage, so its coefficient
//! scatters around zero. An under-reporting consumer (`r = a*c`, `0 < a < 1`)
//! produces leakage `(1 - a) * c`, perfectly correlated with its reports, while
//! an over-reporter (`a > 1`) is perfectly anti-correlated.

use std::fmt;

use crate::aggregation::{ConsumerSeries, SampleSeries};
use crate::error::{Error, Result};
use crate::grid::ConsumerId;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MIN_SAMPLES: usize = 5;
pub const DEFAULT_FILTER_QUANTILE: f64 = 0.25;

/// Centered norms at or below this fraction of the vector's RMS magnitude are
/// treated as zero variance. Summation rounding in the leakage of a region
/// whose only attacker subtracts a constant sits many orders below this.
const RELATIVE_VARIANCE_FLOOR: f64 = 1e-10;

/// Pearson correlation of two paired vectors, computed on mean-centered
/// copies as `x'y / (|x| |y|)`.
///
/// Returns `Ok(None)` when fewer than two pairs exist or either vector has no
/// variance. The result is clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Ok(None);
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let (mut dot, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    let (mut raw_xx, mut raw_yy) = (0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        dot += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
        raw_xx += a * a;
        raw_yy += b * b;
    }
    let norm_x = sxx.sqrt();
    let norm_y = syy.sqrt();
    if is_flat(norm_x, raw_xx) || is_flat(norm_y, raw_yy) {
        return Ok(None);
    }
    Ok(Some((dot / (norm_x * norm_y)).clamp(-1.0, 1.0)))
}

fn is_flat(centered_norm: f64, raw_sq_sum: f64) -> bool {
    centered_norm == 0.0 || centered_norm <= RELATIVE_VARIANCE_FLOOR * raw_sq_sum.sqrt()
}

/// Decision threshold on `|corr|`, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(th: f64) -> Result<Self> {
        if th > 0.0 && th <= 1.0 {
            Ok(Self(th))
        } else {
            Err(Error::config(
                "detection.threshold",
                format!("must lie in (0, 1], got {th}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self(DEFAULT_THRESHOLD)
    }
}

/// Quantile in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Quantile(f64);

impl Quantile {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::config(
                "detection.filter_quantile",
                format!("must lie in (0, 1), got {q}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Quantile {
    fn default() -> Self {
        Self(DEFAULT_FILTER_QUANTILE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Benign,
    /// Correlation at or above `th`: reports less than it uses.
    MaliciousUnder,
    /// Correlation at or below `-th`: reports more than it uses.
    MaliciousOver,
    InsufficientData,
}

impl Label {
    pub fn is_malicious(self) -> bool {
        matches!(self, Label::MaliciousUnder | Label::MaliciousOver)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::MaliciousUnder => "malicious_under",
            Label::MaliciousOver => "malicious_over",
            Label::InsufficientData => "insufficient_data",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Three-branch threshold rule; both `±th` boundaries count as malicious.
pub fn classify(corr: Option<f64>, th: Threshold) -> Label {
    match corr {
        None => Label::InsufficientData,
        Some(c) if c >= th.0 => Label::MaliciousUnder,
        Some(c) if c <= -th.0 => Label::MaliciousOver,
        Some(_) => Label::Benign,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub threshold: Threshold,
    pub min_samples: usize,
    /// When set, correlations use only the pairs whose report lies at or
    /// below this quantile of the consumer's reports.
    pub low_report_filter: Option<Quantile>,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            threshold: Threshold::default(),
            min_samples: DEFAULT_MIN_SAMPLES,
            low_report_filter: None,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples < 2 {
            return Err(Error::config(
                "detection.min_samples",
                format!("must be >= 2, got {}", self.min_samples),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumerDetection {
    pub consumer_id: ConsumerId,
    pub sample_count: usize,
    pub corr: Option<f64>,
    pub label: Label,
}

/// Per-consumer detection outcome, ordered by ascending consumer id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionReport {
    pub entries: Vec<ConsumerDetection>,
}

impl DetectionReport {
    pub fn get(&self, id: ConsumerId) -> Option<&ConsumerDetection> {
        self.entries
            .binary_search_by_key(&id, |e| e.consumer_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn malicious_ids(&self) -> Vec<ConsumerId> {
        self.entries
            .iter()
            .filter(|e| e.label.is_malicious())
            .map(|e| e.consumer_id)
            .collect()
    }

    /// Consumer with the smallest defined correlation; lowest id on ties.
    pub fn most_negative(&self) -> Option<ConsumerId> {
        self.arg_best(|c| -c)
    }

    /// Consumer with the largest defined `|corr|`; lowest id on ties.
    pub fn most_extreme(&self) -> Option<ConsumerId> {
        self.arg_best(f64::abs)
    }

    fn arg_best(&self, score: impl Fn(f64) -> f64) -> Option<ConsumerId> {
        let mut best: Option<(ConsumerId, f64)> = None;
        for e in &self.entries {
            if let Some(c) = e.corr {
                let s = score(c);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((e.consumer_id, s));
                }
            }
        }
        best.map(|(id, _)| id)
    }
}

fn consumer_corr(series: &ConsumerSeries, filter: Option<Quantile>) -> Result<Option<f64>> {
    match filter {
        Some(q) => {
            let kept = low_report_filter(series, q);
            pearson(&kept.reports, &kept.leakages)
        }
        None => pearson(&series.reports, &series.leakages),
    }
}

/// Correlates and labels every consumer in the series.
pub fn detect_region(series: &SampleSeries, params: &DetectionParams) -> Result<DetectionReport> {
    params.validate()?;
    let entries = series
        .iter()
        .map(|(id, s)| {
            let sample_count = s.len();
            let corr = if sample_count >= params.min_samples {
                consumer_corr(s, params.low_report_filter)?
            } else {
                None
            };
            Ok(ConsumerDetection {
                consumer_id: id,
                sample_count,
                corr,
                label: classify(corr, params.threshold),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionReport { entries })
}

/// Selects the consumer whose correlation is the most negative. Used against
/// attackers that add independent random offsets: their coefficient is
/// pushed below zero while truthful consumers stay centered on it.
pub fn most_negative(series: &SampleSeries, min_samples: usize) -> Result<ConsumerId> {
    let mut best: Option<(ConsumerId, f64)> = None;
    let mut eligible = 0usize;
    for (id, s) in series.iter() {
        if s.len() < min_samples.max(2) {
            continue;
        }
        eligible += 1;
        if let Some(c) = pearson(&s.reports, &s.leakages)? {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((id, c));
            }
        }
    }
    best.map(|(id, _)| id).ok_or_else(|| {
        Error::InsufficientData(format!(
            "{eligible} consumers have >= {min_samples} samples and none has a defined correlation"
        ))
    })
}

/// Keeps the pairs whose report is at or below the `q`-quantile of the
/// consumer's reports (lower nearest-rank definition). Pairing is preserved.
pub fn low_report_filter(series: &ConsumerSeries, q: Quantile) -> ConsumerSeries {
    if series.is_empty() {
        return ConsumerSeries::default();
    }
    let mut sorted = series.reports.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let cut = sorted[rank - 1];
    let mut kept = ConsumerSeries::default();
    for (&r, &l) in series.reports.iter().zip(&series.leakages) {
        if r <= cut {
            kept.push(r, l);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::PeriodRecord;
    use proptest::prelude::*;

    /// Independent evaluation of cov / sqrt(var * var) using the n-1
    /// normalised sample moments.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / (n - 1.0);
        let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
        let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0);
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn pearson_examples() {
        let p = |x: &[f64], y: &[f64]| pearson(x, y).unwrap().unwrap();
        assert!((p(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((p(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]) + 1.0).abs() < 1e-12);
        // centered dot 4 over sqrt(5) * sqrt(5)
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert!((oracle(&x, &y) - 0.8).abs() < 1e-12);
        assert!((p(&x, &y) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_undefined_cases() {
        assert_eq!(pearson(&[], &[]).unwrap(), None);
        assert_eq!(pearson(&[1.0], &[2.0]).unwrap(), None);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert!(matches!(pearson(&[1.0], &[]), Err(Error::Input(_))));
    }

    #[test]
    fn rounding_jitter_counts_as_flat() {
        let y: Vec<f64> = (0..50)
            .map(|i| 0.5 + if i % 2 == 0 { 1e-15 } else { 0.0 })
            .collect();
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(pearson(&x, &y).unwrap(), None);
    }

    #[test]
    fn classify_examples() {
        let th = Threshold::new(0.5).unwrap();
        assert_eq!(classify(Some(1.0), th), Label::MaliciousUnder);
        assert_eq!(classify(Some(-1.0), th), Label::MaliciousOver);
        assert_eq!(classify(Some(0.49), th), Label::Benign);
        assert_eq!(classify(Some(-0.49), th), Label::Benign);
        assert_eq!(classify(Some(0.5), th), Label::MaliciousUnder);
        assert_eq!(classify(Some(-0.5), th), Label::MaliciousOver);
        assert_eq!(classify(None, th), Label::InsufficientData);
    }

    #[test]
    fn threshold_domain() {
        assert!(Threshold::new(0.0).is_err());
        assert!(Threshold::new(1.01).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert!(Threshold::new(1.0).is_ok());
        assert!(Quantile::new(0.0).is_err());
        assert!(Quantile::new(1.0).is_err());
    }

    fn series_from(pairs: &[(ConsumerId, &[f64], &[f64])]) -> SampleSeries {
        let mut s = SampleSeries::new(pairs.iter().map(|p| p.0));
        let mut t = 0;
        for (id, reports, leaks) in pairs {
            for (&r, &l) in reports.iter().zip(leaks.iter()) {
                s.push(&PeriodRecord {
                    period_index: t,
                    actual_total: 0.0,
                    reported_total: 0.0,
                    leakage: l,
                    sampled_id: *id,
                    sampled_report: r,
                })
                .unwrap();
                t += 1;
            }
        }
        s
    }

    #[test]
    fn most_negative_examples() {
        // corr(1) = -1, corr(2) = +1, corr(3) = -1 -> lowest id among the ties
        let s = series_from(&[
            (3, &[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]),
            (1, &[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]),
            (2, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
        ]);
        assert_eq!(most_negative(&s, 2).unwrap(), 1);

        // argmin over clearly separated coefficients
        let s = series_from(&[
            (1, &[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 1.0, 2.0]),
            (2, &[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]),
            (3, &[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 3.0, 2.0]),
        ]);
        assert_eq!(most_negative(&s, 2).unwrap(), 1);

        assert!(matches!(
            most_negative(&s, 10),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn detect_region_respects_min_samples() {
        let s = series_from(&[
            (0, &[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0]),
            (1, &[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]),
            (2, &[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 2.0, 2.0, 2.0, 2.0]),
        ]);
        let report = detect_region(&s, &DetectionParams::default()).unwrap();
        assert_eq!(report.get(0).unwrap().label, Label::MaliciousUnder);
        assert_eq!(report.get(1).unwrap().label, Label::InsufficientData);
        assert_eq!(report.get(1).unwrap().sample_count, 4);
        assert_eq!(report.get(2).unwrap().label, Label::InsufficientData);
        assert_eq!(report.malicious_ids(), vec![0]);

        let bad = DetectionParams {
            min_samples: 1,
            ..DetectionParams::default()
        };
        assert!(detect_region(&s, &bad).is_err());
    }

    #[test]
    fn low_report_filter_examples() {
        let q = Quantile::new(0.5).unwrap();
        let s = ConsumerSeries {
            reports: vec![0.0, 5.0, 0.0, 6.0],
            leakages: vec![1.0, 2.0, 3.0, 4.0],
        };
        let kept = low_report_filter(&s, q);
        assert_eq!(kept.reports, vec![0.0, 0.0]);
        assert_eq!(kept.leakages, vec![1.0, 3.0]);

        let flat = ConsumerSeries {
            reports: vec![2.0; 5],
            leakages: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        };
        assert_eq!(low_report_filter(&flat, Quantile::default()), flat);
        assert!(low_report_filter(&ConsumerSeries::default(), q).is_empty());
    }

    fn spread_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len).prop_filter("needs spread", |v| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo > 1.0
        })
    }

    fn paired(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2..=max_len).prop_flat_map(|n| (spread_vec(n), spread_vec(n)))
    }

    proptest! {
        #[test]
        fn matches_moment_oracle((x, y) in paired(10)) {
            let got = pearson(&x, &y).unwrap().unwrap();
            prop_assert!((got - oracle(&x, &y)).abs() <= 1e-12);
        }

        #[test]
        fn symmetric((x, y) in paired(50)) {
            prop_assert_eq!(pearson(&x, &y).unwrap(), pearson(&y, &x).unwrap());
        }

        #[test]
        fn affine_invariance((x, y) in paired(50), a in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], b in -100.0f64..100.0) {
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let lhs = pearson(&ax, &y).unwrap().unwrap();
            let rhs = a.signum() * pearson(&x, &y).unwrap().unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }

        #[test]
        fn bounded((x, y) in paired(50)) {
            let c = pearson(&x, &y).unwrap().unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn multiplicative_sign(c in spread_vec(30).prop_map(|v| v.iter().map(|x| x + 11.0).collect::<Vec<_>>()),
                               alpha in prop_oneof![0.01f64..0.99, 1.01f64..20.0]) {
            let r: Vec<f64> = c.iter().map(|v| alpha * v).collect();
            let l: Vec<f64> = c.iter().map(|v| (1.0 - alpha) * v).collect();
            let got = pearson(&r, &l).unwrap().unwrap();
            let expected = (alpha * (1.0 - alpha)).signum();
            prop_assert!((got - expected).abs() <= 1e-9);
        }

        #[test]
        fn filter_preserves_pairing(reports in prop::collection::vec(0.0f64..5.0, 1..60), q in 0.01f64..0.99) {
            let leakages: Vec<f64> = reports.iter().map(|r| r * 3.0 + 1.0).collect();
            let s = ConsumerSeries { reports, leakages };
            let kept = low_report_filter(&s, Quantile::new(q).unwrap());
            prop_assert!(!kept.is_empty());
            for (r, l) in kept.reports.iter().zip(&kept.leakages) {
                prop_assert_eq!(*l, r * 3.0 + 1.0);
            }
        }
    }
}
