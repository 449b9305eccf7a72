//! End-to-end scenario runs and Monte-Carlo experiments.
//!
//! A trial simulates one measurement window period by period: usage draws,
//! falsified reports, aggregation with random sampling, and billing. It then
//! runs the configured detector and scores it against the known attackers.
//! Trials are independent given their seed, so repetitions run on a rayon
//! pool and are reduced in trial-index order.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;

use crate::aggregation::{aggregate_period, PeriodRecord, SampleSeries};
use crate::billing::{Bill, BillingLedger, Elasticity, TariffSchedule};
use crate::detection::{self, detect_region, DetectionParams, DetectionReport, Label};
use crate::error::{Error, Result};
use crate::grid::{
    apply_behavior, draw_usage, BehaviorModel, ConsumerId, ConsumerProfile, Direction,
    RegionConfig, DAYS_PER_MONTH,
};
use crate::rng::{derive_seed, stream};

pub const DEFAULT_MASTER_SEED: u64 = 42;
pub const TABLE_REPETITIONS: u32 = 1000;
pub const SWEEP_REPETITIONS: u32 = 100;
pub const TABLE_MONTHS: [f64; 4] = [1.0, 3.0, 6.0, 12.0];
/// Attacker id used by the standard single-attacker scenarios.
pub const STANDARD_ATTACKER: ConsumerId = 25;
pub const STANDARD_CONSUMERS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionMode {
    /// Label by `|corr| >= th`.
    Threshold,
    /// Pick the single consumer with the lowest correlation.
    MostNegative,
}

impl DetectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMode::Threshold => "threshold",
            DetectionMode::MostNegative => "most_negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BillingConfig {
    pub tariff: TariffSchedule,
    pub window_days: u32,
    pub elasticity: Option<Elasticity>,
}

impl Default for BillingConfig {
    fn default() -> Self {
        Self {
            tariff: TariffSchedule::default(),
            window_days: DAYS_PER_MONTH,
            elasticity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Consumers carry their own behavior; non-benign ones are the attackers.
    pub region: RegionConfig,
    pub detection: DetectionParams,
    pub mode: DetectionMode,
    pub billing: BillingConfig,
    pub master_seed: u64,
    pub repetitions: u32,
    /// Worker threads for repetitions; 0 means one per core. Results do not
    /// depend on this value.
    pub threads: usize,
    /// Measurement durations in months for sweeps and tables.
    pub durations: Vec<f64>,
}

impl ScenarioConfig {
    /// `consumers` benign default-profile consumers measured for `months`.
    pub fn standard(consumers: u32, months: f64) -> Self {
        let mut cfg = Self {
            region: RegionConfig::uniform(consumers, DAYS_PER_MONTH),
            detection: DetectionParams::default(),
            mode: DetectionMode::Threshold,
            billing: BillingConfig::default(),
            master_seed: DEFAULT_MASTER_SEED,
            repetitions: TABLE_REPETITIONS,
            threads: 0,
            durations: TABLE_MONTHS.to_vec(),
        };
        cfg.set_months(months);
        cfg
    }

    /// Measurement window length in 30-day months.
    pub fn months(&self) -> f64 {
        f64::from(self.region.num_days) / f64::from(DAYS_PER_MONTH)
    }

    pub fn set_months(&mut self, months: f64) {
        self.region.num_days = months_to_days(months);
    }

    pub fn with_months(&self, months: f64) -> Self {
        let mut c = self.clone();
        c.set_months(months);
        c
    }

    pub fn with_attacker(mut self, id: ConsumerId, behavior: BehaviorModel) -> Self {
        if let Some(c) = self.region.consumers.iter_mut().find(|c| c.id == id) {
            c.behavior = behavior;
        } else {
            // surfaced by validate()
            self.region.consumers.push(ConsumerProfile {
                behavior,
                ..ConsumerProfile::benign(id)
            });
        }
        self
    }

    pub fn total_periods(&self) -> u64 {
        self.region.total_periods()
    }

    pub fn window_periods(&self) -> u64 {
        u64::from(self.billing.window_days) * u64::from(self.region.periods_per_day)
    }

    /// Ids of consumers whose behavior is not benign, ascending.
    pub fn attackers(&self) -> Vec<ConsumerId> {
        let set: BTreeSet<ConsumerId> = self
            .region
            .consumers
            .iter()
            .filter(|c| !c.behavior.is_benign())
            .map(|c| c.id)
            .collect();
        set.into_iter().collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        self.detection.validate()?;
        if self.repetitions == 0 {
            return Err(Error::config("experiment.repetitions", "must be >= 1"));
        }
        if let Some(&m) = self.durations.iter().find(|&&m| months_to_days(m) == 0) {
            return Err(Error::config(
                "experiment.durations",
                format!("duration {m} months is shorter than one day"),
            ));
        }
        if self.billing.window_days == 0 {
            return Err(Error::config("billing.window_days", "must be >= 1"));
        }
        self.billing.tariff.validate(self.total_periods())?;
        if let Some(e) = &self.billing.elasticity {
            e.validate(&self.region.consumers)?;
        }
        Ok(())
    }
}

pub fn months_to_days(months: f64) -> u32 {
    (months * f64::from(DAYS_PER_MONTH)).round().max(0.0) as u32
}

/// Fig.-3-style outcome classes for threshold detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeClass {
    /// Labeled set equals the attacker set.
    ExactMatch,
    /// Every attacker found, plus some truthful consumers.
    ExtraBenign,
    /// At least one attacker not labeled.
    Missed,
}

impl OutcomeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::ExactMatch => "exact_match",
            OutcomeClass::ExtraBenign => "extra_benign",
            OutcomeClass::Missed => "missed",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_seed: u64,
    pub report: DetectionReport,
    pub true_malicious: Vec<ConsumerId>,
    pub labeled_malicious: Vec<ConsumerId>,
    /// Per attacker: labeled malicious or not.
    pub attacker_found: Vec<(ConsumerId, bool)>,
    pub exact_match: bool,
    pub false_positive_count: usize,
    pub missed_count: usize,
    pub class: OutcomeClass,
    /// Single-consumer pick: the most negative correlation in
    /// `MostNegative` mode, the largest `|corr|` in `Threshold` mode.
    pub selected: Option<ConsumerId>,
    /// Whether the trial counts as a correct detection; see [`score`].
    pub correct: bool,
}

impl TrialOutcome {
    pub fn precision(&self) -> f64 {
        if self.labeled_malicious.is_empty() {
            return 1.0;
        }
        let hits = self.labeled_malicious.len() - self.false_positive_count;
        hits as f64 / self.labeled_malicious.len() as f64
    }

    pub fn recall(&self) -> f64 {
        if self.true_malicious.is_empty() {
            return 1.0;
        }
        let found = self.true_malicious.len() - self.missed_count;
        found as f64 / self.true_malicious.len() as f64
    }
}

/// Everything a single simulated window produces.
#[derive(Debug, Clone)]
pub struct TrialRun {
    /// Empty unless requested in [`SimOptions`].
    pub records: Vec<PeriodRecord>,
    pub series: SampleSeries,
    pub bills: Vec<Bill>,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub keep_records: bool,
    pub billing: bool,
}

impl SimOptions {
    pub const FULL: SimOptions = SimOptions {
        keep_records: true,
        billing: true,
    };
    /// What Monte-Carlo repetitions need. Billing consumes no randomness, so
    /// turning it off leaves detection results unchanged.
    pub const DETECTION_ONLY: SimOptions = SimOptions {
        keep_records: false,
        billing: false,
    };
}

/// Simulates one window and scores detection. Deterministic in `trial_seed`.
pub fn simulate(config: &ScenarioConfig, trial_seed: u64, opts: SimOptions) -> Result<TrialRun> {
    config.validate()?;
    let region = &config.region;
    let ids: Vec<ConsumerId> = region.consumers.iter().map(|c| c.id).collect();
    let n = ids.len();
    let total = config.total_periods();
    let window = config.window_periods();
    let elastic_profiles: Option<Vec<ConsumerProfile>> = config
        .billing
        .elasticity
        .map(|e| region.consumers.iter().map(|c| e.adjust(c)).collect());

    let mut rng = stream(trial_seed);
    let mut actuals = vec![0.0; n];
    let mut reports = vec![0.0; n];
    let mut series = SampleSeries::new(ids.iter().copied());
    let mut records = Vec::with_capacity(if opts.keep_records { total as usize } else { 0 });
    let mut bills = Vec::new();
    let mut ledger: Option<BillingLedger> = None;

    for t in 0..total {
        let price = config.billing.tariff.at(t);
        let profiles = match (&config.billing.elasticity, &elastic_profiles) {
            (Some(e), Some(p)) if e.applies(price) => p,
            _ => &region.consumers,
        };
        for (i, profile) in profiles.iter().enumerate() {
            let c = draw_usage(profile, &mut rng);
            actuals[i] = c;
            reports[i] = apply_behavior(&profile.behavior, c, &mut rng);
        }
        let record = aggregate_period(&ids, &actuals, &reports, t, &mut rng)?;
        series.push(&record)?;
        if opts.keep_records {
            records.push(record);
        }
        if opts.billing {
            let l = match ledger.as_mut() {
                Some(l) => l,
                None => ledger.insert(BillingLedger::new(ids.clone(), t, window.min(total - t))?),
            };
            l.accrue(t, &reports, price)?;
            if l.is_complete() {
                bills.extend(l.issue_bills()?);
                ledger = None;
            }
        }
    }

    let report = detect_region(&series, &config.detection)?;
    let selected = match config.mode {
        DetectionMode::Threshold => report.most_extreme(),
        DetectionMode::MostNegative => {
            match detection::most_negative(&series, config.detection.min_samples) {
                Ok(id) => Some(id),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            }
        }
    };
    let outcome = score(config, trial_seed, report, selected);
    Ok(TrialRun {
        records,
        series,
        bills,
        outcome,
    })
}

/// Runs one trial and returns only its scored outcome.
pub fn run_trial(config: &ScenarioConfig, trial_seed: u64) -> Result<TrialOutcome> {
    simulate(config, trial_seed, SimOptions::DETECTION_ONLY).map(|r| r.outcome)
}

/// Scores a detection report against the configured attackers.
///
/// Correctness for single-attacker scenarios means identifying that attacker:
/// in `MostNegative` mode the selected consumer is the attacker; in
/// `Threshold` mode the attacker is labeled malicious and has the largest
/// `|corr|` in the region. Scenarios with several attackers, or none, count as
/// correct only on an exact labeled-set match.
pub fn score(
    config: &ScenarioConfig,
    trial_seed: u64,
    report: DetectionReport,
    selected: Option<ConsumerId>,
) -> TrialOutcome {
    let truth: BTreeSet<ConsumerId> = config.attackers().into_iter().collect();
    let labeled: BTreeSet<ConsumerId> = report.malicious_ids().into_iter().collect();
    let attacker_found: Vec<(ConsumerId, bool)> =
        truth.iter().map(|id| (*id, labeled.contains(id))).collect();
    let false_positive_count = labeled.difference(&truth).count();
    let missed_count = truth.difference(&labeled).count();
    let exact_match = labeled == truth;
    let class = if missed_count > 0 {
        OutcomeClass::Missed
    } else if false_positive_count > 0 {
        OutcomeClass::ExtraBenign
    } else {
        OutcomeClass::ExactMatch
    };
    let correct = match (truth.len(), config.mode) {
        (1, DetectionMode::MostNegative) => selected.is_some_and(|s| truth.contains(&s)),
        (1, DetectionMode::Threshold) => {
            let attacker = *truth.iter().next().expect("one attacker");
            labeled.contains(&attacker) && selected == Some(attacker)
        }
        _ => exact_match,
    };
    TrialOutcome {
        trial_seed,
        report,
        true_malicious: truth.into_iter().collect(),
        labeled_malicious: labeled.into_iter().collect(),
        attacker_found,
        exact_match,
        false_positive_count,
        missed_count,
        class,
        selected,
        correct,
    }
}

/// Seed of trial `index` under the config's master seed.
pub fn trial_seed(config: &ScenarioConfig, index: u64) -> u64 {
    derive_seed(config.master_seed, index)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))
}

/// Runs `config.repetitions` trials and maps each outcome through `f`,
/// returning results in trial-index order.
pub fn map_trials<T, F>(config: &ScenarioConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(TrialOutcome) -> T + Sync,
{
    config.validate()?;
    pool(config.threads)?.install(|| {
        (0..u64::from(config.repetitions))
            .into_par_iter()
            .map(|i| run_trial(config, trial_seed(config, i)).map(&f))
            .collect()
    })
}

pub fn run_trials(config: &ScenarioConfig) -> Result<Vec<TrialOutcome>> {
    map_trials(config, |o| o)
}

/// Monte-Carlo estimate of the probability of correct detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub probability: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub stderr: f64,
    pub reps: u32,
    pub exact_match_rate: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Counts of exact-match, extra-benign, and missed outcomes.
    pub class_counts: [u32; 3],
}

#[derive(Debug, Clone, Copy)]
struct TrialScore {
    correct: bool,
    exact: bool,
    precision: f64,
    recall: f64,
    class: OutcomeClass,
}

pub fn estimate_detection_probability(config: &ScenarioConfig) -> Result<Estimate> {
    let scores = map_trials(config, |o| TrialScore {
        correct: o.correct,
        exact: o.exact_match,
        precision: o.precision(),
        recall: o.recall(),
        class: o.class,
    })?;
    let n = scores.len() as f64;
    let p = scores.iter().filter(|s| s.correct).count() as f64 / n;
    let mut class_counts = [0u32; 3];
    for s in &scores {
        class_counts[s.class as usize] += 1;
    }
    Ok(Estimate {
        probability: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        reps: config.repetitions,
        exact_match_rate: scores.iter().filter(|s| s.exact).count() as f64 / n,
        mean_precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        mean_recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        class_counts,
    })
}

/// Correlations observed at one measurement duration.
#[derive(Debug, Clone)]
pub struct ConcentrationPoint {
    pub months: f64,
    pub report: DetectionReport,
    /// Sample standard deviation of the defined benign correlations.
    pub benign_std: f64,
}

/// One trial per duration, all under trial seed 0 of the master seed.
pub fn concentration_experiment(
    config: &ScenarioConfig,
    durations: &[f64],
) -> Result<Vec<ConcentrationPoint>> {
    let seed = trial_seed(config, 0);
    durations
        .iter()
        .map(|&months| {
            let cfg = config.with_months(months);
            if cfg.region.num_days == 0 {
                return Err(Error::config(
                    "experiment.durations",
                    format!("duration {months} months is shorter than one day"),
                ));
            }
            let outcome = run_trial(&cfg, seed)?;
            let attackers = cfg.attackers();
            let benign: Vec<f64> = outcome
                .report
                .entries
                .iter()
                .filter(|e| !attackers.contains(&e.consumer_id))
                .filter_map(|e| e.corr)
                .collect();
            Ok(ConcentrationPoint {
                months,
                benign_std: sample_std(&benign),
                report: outcome.report,
            })
        })
        .collect()
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Detection probability at each duration. Duration `i` runs under master
/// seed `derive_seed(master_seed, i)`.
pub fn duration_sweep(config: &ScenarioConfig, months: &[f64]) -> Result<Vec<(f64, Estimate)>> {
    months
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut cfg = config.with_months(m);
            cfg.master_seed = derive_seed(config.master_seed, i as u64);
            estimate_detection_probability(&cfg).map(|e| (m, e))
        })
        .collect()
}

/// The three single-attacker falsification strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackCase {
    /// Reports a tenth of actual usage.
    Scaled,
    /// Subtracts a fixed amount, clipping at zero.
    FixedOffset,
    /// Subtracts an independent random amount, clipping at zero.
    RandomOffset,
}

impl AttackCase {
    pub const ALL: [AttackCase; 3] = [
        AttackCase::Scaled,
        AttackCase::FixedOffset,
        AttackCase::RandomOffset,
    ];

    /// Row label in exported tables.
    pub fn label(self) -> &'static str {
        match self {
            AttackCase::Scaled => "I",
            AttackCase::FixedOffset => "II",
            AttackCase::RandomOffset => "III",
        }
    }

    /// Default behavior for an attacker whose usage profile is `profile`.
    ///
    /// Offsets are set to the attacker's mean usage: a fixed offset then clips
    /// about half of its reports to zero, and a random offset drawn from
    /// `U(0, mean)` is large enough to separate the attacker within a month.
    pub fn behavior(self, profile: &ConsumerProfile) -> BehaviorModel {
        match self {
            AttackCase::Scaled => BehaviorModel::Multiplicative { alpha: 0.1 },
            AttackCase::FixedOffset => BehaviorModel::FixedOffset {
                eta: profile.mean_usage(),
                direction: Direction::Subtract,
            },
            AttackCase::RandomOffset => BehaviorModel::RandomOffset {
                theta_max: profile.mean_usage(),
                direction: Direction::Subtract,
            },
        }
    }

    pub fn mode(self) -> DetectionMode {
        match self {
            AttackCase::RandomOffset => DetectionMode::MostNegative,
            _ => DetectionMode::Threshold,
        }
    }

    /// `base` with every consumer benign except `attacker`, which follows this
    /// case's default behavior, and the matching detection mode.
    pub fn scenario(self, base: &ScenarioConfig, attacker: ConsumerId) -> ScenarioConfig {
        let mut cfg = base.clone();
        for c in &mut cfg.region.consumers {
            c.behavior = if c.id == attacker {
                self.behavior(c)
            } else {
                BehaviorModel::Benign
            };
        }
        cfg.mode = self.mode();
        cfg
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TableCell {
    pub case: AttackCase,
    pub months: f64,
    pub estimate: Estimate,
}

/// Probability of correct detection for every case and duration. The
/// attacker is the base config's first attacker, or consumer 25 when the
/// base config has none.
pub fn detection_table(base: &ScenarioConfig, months: &[f64]) -> Result<Vec<TableCell>> {
    let attacker = base
        .attackers()
        .first()
        .copied()
        .unwrap_or(STANDARD_ATTACKER);
    if base.region.position(attacker).is_none() {
        return Err(Error::config(
            "attackers.id",
            format!("attacker {attacker} is not a consumer of the region"),
        ));
    }
    let mut cells = Vec::new();
    for (ci, case) in AttackCase::ALL.into_iter().enumerate() {
        let scenario = case.scenario(base, attacker);
        for (mi, &m) in months.iter().enumerate() {
            let mut cfg = scenario.with_months(m);
            cfg.master_seed = derive_seed(base.master_seed, (ci * months.len() + mi) as u64);
            let estimate = estimate_detection_probability(&cfg)?;
            cells.push(TableCell {
                case,
                months: m,
                estimate,
            });
        }
    }
    Ok(cells)
}

/// Fraction of repetitions in which each label was assigned to `id`.
pub fn label_frequencies(outcomes: &[TrialOutcome], id: ConsumerId) -> [(Label, f64); 4] {
    let n = outcomes.len().max(1) as f64;
    let count = |l: Label| {
        outcomes
            .iter()
            .filter(|o| o.report.get(id).is_some_and(|e| e.label == l))
            .count() as f64
            / n
    };
    [
        Label::Benign,
        Label::MaliciousUnder,
        Label::MaliciousOver,
        Label::InsufficientData,
    ]
    .map(|l| (l, count(l)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1(alpha: f64) -> ScenarioConfig {
        ScenarioConfig::standard(100, 1.0)
            .with_attacker(25, BehaviorModel::Multiplicative { alpha })
    }

    #[test]
    fn month_is_2880_periods() {
        let cfg = ScenarioConfig::standard(100, 1.0);
        assert_eq!(cfg.total_periods(), 2880);
        assert_eq!(cfg.with_months(12.0).total_periods(), 34_560);
        assert_eq!(cfg.months(), 1.0);
    }

    #[test]
    fn under_reporter_correlates_at_plus_one() {
        let out = run_trial(&case1(0.1), 7).unwrap();
        let e = out.report.get(25).unwrap();
        assert!((e.corr.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(e.label, Label::MaliciousUnder);
        assert!(out.correct);
        assert_eq!(out.selected, Some(25));
    }

    #[test]
    fn over_reporter_correlates_at_minus_one() {
        let out = run_trial(&case1(10.0), 7).unwrap();
        let e = out.report.get(25).unwrap();
        assert!((e.corr.unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(e.label, Label::MaliciousOver);
        assert!(out.correct);
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = case1(0.1);
        let a = simulate(&cfg, 99, SimOptions::FULL).unwrap();
        let b = simulate(&cfg, 99, SimOptions::FULL).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.bills, b.bills);
    }

    #[test]
    fn billing_does_not_change_detection() {
        let cfg = case1(0.1);
        let full = simulate(&cfg, 5, SimOptions::FULL).unwrap();
        let lean = simulate(&cfg, 5, SimOptions::DETECTION_ONLY).unwrap();
        assert_eq!(full.outcome, lean.outcome);
        assert!(lean.records.is_empty() && lean.bills.is_empty());
    }

    #[test]
    fn bills_cover_every_window() {
        let mut cfg = ScenarioConfig::standard(3, 1.0);
        cfg.region.num_days = 45;
        let run = simulate(&cfg, 1, SimOptions::FULL).unwrap();
        let windows: BTreeSet<(u64, u64)> = run
            .bills
            .iter()
            .map(|b| (b.window_start, b.window_end))
            .collect();
        assert_eq!(
            windows.into_iter().collect::<Vec<_>>(),
            vec![(0, 2880), (2880, 4320)]
        );
        assert_eq!(run.bills.len(), 6);
    }

    #[test]
    fn elasticity_lowers_usage_above_trigger() {
        let mut cfg = ScenarioConfig::standard(4, 1.0);
        cfg.billing.tariff = TariffSchedule::Flat(2.0);
        cfg.billing.elasticity = Some(Elasticity {
            trigger_price: 1.0,
            usage_factor: 0.5,
        });
        let run = simulate(&cfg, 3, SimOptions::FULL).unwrap();
        // usage capped at 0.75 per consumer
        assert!(run.records.iter().all(|r| r.actual_total <= 4.0 * 0.75));
    }

    #[test]
    fn scoring_classes() {
        let cfg = ScenarioConfig::standard(4, 1.0)
            .with_attacker(1, BehaviorModel::Multiplicative { alpha: 0.1 })
            .with_attacker(2, BehaviorModel::Multiplicative { alpha: 10.0 });
        let entry = |id, label| crate::detection::ConsumerDetection {
            consumer_id: id,
            sample_count: 10,
            corr: Some(0.0),
            label,
        };
        let report = |labels: [Label; 4]| DetectionReport {
            entries: (0..4).map(|i| entry(i, labels[i as usize])).collect(),
        };
        use Label::*;
        let o = score(
            &cfg,
            0,
            report([Benign, MaliciousUnder, MaliciousOver, Benign]),
            None,
        );
        assert_eq!(o.class, OutcomeClass::ExactMatch);
        assert!(o.correct && o.exact_match);
        let o = score(
            &cfg,
            0,
            report([MaliciousUnder, MaliciousUnder, MaliciousOver, Benign]),
            None,
        );
        assert_eq!(o.class, OutcomeClass::ExtraBenign);
        assert_eq!(o.false_positive_count, 1);
        assert!((o.precision() - 2.0 / 3.0).abs() < 1e-12);
        let o = score(
            &cfg,
            0,
            report([MaliciousUnder, Benign, MaliciousOver, Benign]),
            None,
        );
        assert_eq!(o.class, OutcomeClass::Missed);
        assert_eq!((o.missed_count, o.false_positive_count), (1, 1));
        assert_eq!(o.recall(), 0.5);
        assert!(!o.correct);
    }

    #[test]
    fn invalid_attacker_id_is_rejected() {
        let mut cfg = ScenarioConfig::standard(100, 1.0);
        cfg.region.consumers.push(ConsumerProfile::benign(25));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn standard_cases_configure_single_attacker() {
        let base = ScenarioConfig::standard(100, 1.0);
        for case in AttackCase::ALL {
            let cfg = case.scenario(&base, 25);
            assert_eq!(cfg.attackers(), vec![25]);
            assert_eq!(cfg.mode, case.mode());
        }
        let c2 = AttackCase::FixedOffset.scenario(&base, 25);
        assert_eq!(
            c2.region.consumers[25].behavior,
            BehaviorModel::FixedOffset {
                eta: 1.0,
                direction: Direction::Subtract
            }
        );
    }

    #[test]
    fn results_independent_of_thread_count() {
        let mut cfg = AttackCase::RandomOffset.scenario(&ScenarioConfig::standard(20, 0.25), 3);
        cfg.repetitions = 12;
        cfg.threads = 1;
        let one = run_trials(&cfg).unwrap();
        cfg.threads = 3;
        let three = run_trials(&cfg).unwrap();
        assert_eq!(one, three);
    }
}
