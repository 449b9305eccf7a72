//! Scenario configuration files.
//!
//! Configs are TOML documents with `[region]`, `[[consumers]]`,
//! `[[attackers]]`, `[detection]`, `[billing]` and `[experiment]` sections.
//! Only `region.consumers` is required; everything else has a default.
//! Unknown keys are rejected.
//!
//! ```toml
//! [region]
//! consumers = 100
//!
//! [[attackers]]
//! id = 25
//! behavior = "multiplicative"
//! alpha = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::billing::{Elasticity, TariffSchedule};
use crate::detection::{DetectionParams, Quantile, Threshold, DEFAULT_FILTER_QUANTILE};
use crate::error::{Error, Result};
use crate::grid::{
    BehaviorModel, ConsumerId, ConsumerProfile, Direction, RegionConfig, DEFAULT_PERIODS_PER_DAY,
    DEFAULT_USAGE_MAX, DEFAULT_USAGE_MIN,
};
use crate::harness::{
    months_to_days, BillingConfig, DetectionMode, ScenarioConfig, DEFAULT_MASTER_SEED,
    TABLE_MONTHS, TABLE_REPETITIONS,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    region: RawRegion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    consumers: Vec<RawConsumer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    attackers: Vec<RawAttacker>,
    #[serde(default)]
    detection: RawDetection,
    #[serde(default)]
    billing: RawBilling,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    #[serde(default)]
    region_id: u32,
    consumers: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    periods_per_day: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    usage_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    usage_max: Option<f64>,
}

/// Per-consumer usage override.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConsumer {
    id: ConsumerId,
    #[serde(skip_serializing_if = "Option::is_none")]
    usage_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    usage_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttacker {
    id: ConsumerId,
    behavior: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    low_report_filter: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_quantile: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawTariff {
    Flat(f64),
    PerPeriod(Vec<f64>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBilling {
    #[serde(skip_serializing_if = "Option::is_none")]
    tariff: Option<RawTariff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_days: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elasticity_trigger: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elasticity_factor: Option<f64>,
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` travel as strings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawSeed {
    Int(i64),
    Text(String),
}

impl RawSeed {
    fn from_seed(seed: u64) -> Self {
        match i64::try_from(seed) {
            Ok(v) => RawSeed::Int(v),
            Err(_) => RawSeed::Text(seed.to_string()),
        }
    }

    fn resolve(&self) -> Result<u64> {
        match self {
            RawSeed::Int(v) => u64::try_from(*v).map_err(|_| {
                Error::config("experiment.master_seed", format!("must be >= 0, got {v}"))
            }),
            RawSeed::Text(s) => s.parse().map_err(|_| {
                Error::config(
                    "experiment.master_seed",
                    format!("expected an unsigned 64-bit integer, got {s:?}"),
                )
            }),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    #[serde(skip_serializing_if = "Option::is_none")]
    months: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    master_seed: Option<RawSeed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repetitions: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    durations: Option<Vec<f64>>,
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse { reason, .. } => Error::Parse {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Parses config text, filling defaults and validating every constraint.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<config>".into(),
        reason: e.message().to_string(),
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig> {
    let n = raw.region.consumers;
    if n < 2 {
        return Err(Error::config(
            "region.consumers",
            format!("at least 2 consumers required, got {n}"),
        ));
    }
    let in_region = |key: &str, id: ConsumerId| {
        if id < n {
            Ok(id as usize)
        } else {
            Err(Error::config(
                key,
                format!("consumer id {id} is outside the region (ids 0..{})", n - 1),
            ))
        }
    };

    let usage_min = raw.region.usage_min.unwrap_or(DEFAULT_USAGE_MIN);
    let usage_max = raw.region.usage_max.unwrap_or(DEFAULT_USAGE_MAX);
    let mut consumers: Vec<ConsumerProfile> = (0..n)
        .map(|id| ConsumerProfile {
            id,
            usage_min,
            usage_max,
            behavior: BehaviorModel::Benign,
        })
        .collect();
    for o in &raw.consumers {
        let c = &mut consumers[in_region("consumers.id", o.id)?];
        if let Some(v) = o.usage_min {
            c.usage_min = v;
        }
        if let Some(v) = o.usage_max {
            c.usage_max = v;
        }
    }
    let mut assigned = vec![false; n as usize];
    for a in &raw.attackers {
        let pos = in_region("attackers.id", a.id)?;
        if std::mem::replace(&mut assigned[pos], true) {
            return Err(Error::config(
                "attackers.id",
                format!("consumer {} listed as attacker twice", a.id),
            ));
        }
        consumers[pos].behavior = behavior_of(a)?;
    }

    let periods_per_day = raw
        .region
        .periods_per_day
        .unwrap_or(DEFAULT_PERIODS_PER_DAY);
    let months = raw.experiment.months.unwrap_or(1.0);
    if !(months.is_finite() && months > 0.0) || months_to_days(months) == 0 {
        return Err(Error::config(
            "experiment.months",
            format!("must cover at least one day, got {months}"),
        ));
    }

    let threshold = Threshold::new(raw.detection.threshold.unwrap_or(0.5))?;
    let quantile = Quantile::new(
        raw.detection
            .filter_quantile
            .unwrap_or(DEFAULT_FILTER_QUANTILE),
    )?;
    let detection = DetectionParams {
        threshold,
        min_samples: raw
            .detection
            .min_samples
            .unwrap_or(crate::detection::DEFAULT_MIN_SAMPLES),
        low_report_filter: raw
            .detection
            .low_report_filter
            .unwrap_or(false)
            .then_some(quantile),
    };
    let mode = match raw.detection.mode.as_deref() {
        None | Some("threshold") => DetectionMode::Threshold,
        Some("most_negative") => DetectionMode::MostNegative,
        Some(other) => {
            return Err(Error::config(
                "detection.mode",
                format!("expected \"threshold\" or \"most_negative\", got {other:?}"),
            ))
        }
    };

    let elasticity = match (
        raw.billing.elasticity_trigger,
        raw.billing.elasticity_factor,
    ) {
        (None, None) => None,
        (Some(trigger_price), Some(usage_factor)) => Some(Elasticity {
            trigger_price,
            usage_factor,
        }),
        (Some(_), None) => {
            return Err(Error::config(
                "billing.elasticity_factor",
                "required when billing.elasticity_trigger is set",
            ))
        }
        (None, Some(_)) => {
            return Err(Error::config(
                "billing.elasticity_trigger",
                "required when billing.elasticity_factor is set",
            ))
        }
    };
    let billing = BillingConfig {
        tariff: match raw.billing.tariff {
            None => TariffSchedule::default(),
            Some(RawTariff::Flat(p)) => TariffSchedule::Flat(p),
            Some(RawTariff::PerPeriod(v)) => TariffSchedule::PerPeriod(v),
        },
        window_days: raw
            .billing
            .window_days
            .unwrap_or(crate::grid::DAYS_PER_MONTH),
        elasticity,
    };

    let cfg = ScenarioConfig {
        region: RegionConfig {
            region_id: raw.region.region_id,
            consumers,
            periods_per_day,
            num_days: months_to_days(months),
        },
        detection,
        mode,
        billing,
        master_seed: match &raw.experiment.master_seed {
            Some(s) => s.resolve()?,
            None => DEFAULT_MASTER_SEED,
        },
        repetitions: raw.experiment.repetitions.unwrap_or(TABLE_REPETITIONS),
        threads: raw.experiment.threads.unwrap_or(0),
        durations: raw
            .experiment
            .durations
            .unwrap_or_else(|| TABLE_MONTHS.to_vec()),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn behavior_of(a: &RawAttacker) -> Result<BehaviorModel> {
    let forbid = |key: &str, present: bool| {
        if present {
            Err(Error::config(
                format!("attackers.{key}"),
                format!("not used by behavior {:?} (consumer {})", a.behavior, a.id),
            ))
        } else {
            Ok(())
        }
    };
    let require = |key: &str, v: Option<f64>| {
        v.ok_or_else(|| {
            Error::config(
                format!("attackers.{key}"),
                format!("required for behavior {:?} (consumer {})", a.behavior, a.id),
            )
        })
    };
    let direction = || -> Result<Direction> {
        match a.direction.as_deref() {
            None | Some("subtract") => Ok(Direction::Subtract),
            Some("add") => Ok(Direction::Add),
            Some(other) => Err(Error::config(
                "attackers.direction",
                format!("expected \"subtract\" or \"add\", got {other:?}"),
            )),
        }
    };
    let behavior = match a.behavior.as_str() {
        "benign" => {
            forbid("alpha", a.alpha.is_some())?;
            forbid("eta", a.eta.is_some())?;
            forbid("theta_max", a.theta_max.is_some())?;
            forbid("direction", a.direction.is_some())?;
            BehaviorModel::Benign
        }
        "multiplicative" => {
            forbid("eta", a.eta.is_some())?;
            forbid("theta_max", a.theta_max.is_some())?;
            forbid("direction", a.direction.is_some())?;
            BehaviorModel::Multiplicative {
                alpha: require("alpha", a.alpha)?,
            }
        }
        "fixed_offset" => {
            forbid("alpha", a.alpha.is_some())?;
            forbid("theta_max", a.theta_max.is_some())?;
            BehaviorModel::FixedOffset {
                eta: require("eta", a.eta)?,
                direction: direction()?,
            }
        }
        "random_offset" => {
            forbid("alpha", a.alpha.is_some())?;
            forbid("eta", a.eta.is_some())?;
            BehaviorModel::RandomOffset {
                theta_max: require("theta_max", a.theta_max)?,
                direction: direction()?,
            }
        }
        other => {
            return Err(Error::config(
                "attackers.behavior",
                format!(
                    "unknown behavior {other:?} for consumer {} (expected benign, multiplicative, fixed_offset, random_offset)",
                    a.id
                ),
            ))
        }
    };
    behavior.validate().map_err(|e| match e {
        Error::Config { key, reason } => Error::config(
            format!("attackers.{key}"),
            format!("consumer {}: {reason}", a.id),
        ),
        other => other,
    })?;
    Ok(behavior)
}

/// Serializes a config with every default made explicit, such that
/// `parse_config(&write_config(c)?)` reproduces `c`.
///
/// Consumer ids must be `0..n` in order, which is what configs loaded from
/// files always have.
pub fn write_config(cfg: &ScenarioConfig) -> Result<String> {
    let consumers = &cfg.region.consumers;
    if consumers
        .iter()
        .enumerate()
        .any(|(i, c)| c.id as usize != i)
    {
        return Err(Error::config(
            "region.consumers",
            "consumer ids must be 0..n in order to be written as a config",
        ));
    }
    let base = consumers
        .first()
        .ok_or_else(|| Error::config("region.consumers", "at least 2 consumers required, got 0"))?;
    let overrides = consumers
        .iter()
        .filter(|c| c.usage_min != base.usage_min || c.usage_max != base.usage_max)
        .map(|c| RawConsumer {
            id: c.id,
            usage_min: Some(c.usage_min),
            usage_max: Some(c.usage_max),
        })
        .collect();
    let attackers = consumers
        .iter()
        .filter(|c| !c.behavior.is_benign())
        .map(|c| {
            let mut a = RawAttacker {
                id: c.id,
                behavior: String::new(),
                alpha: None,
                eta: None,
                theta_max: None,
                direction: None,
            };
            match c.behavior {
                BehaviorModel::Benign => unreachable!("filtered above"),
                BehaviorModel::Multiplicative { alpha } => {
                    a.behavior = "multiplicative".into();
                    a.alpha = Some(alpha);
                }
                BehaviorModel::FixedOffset { eta, direction } => {
                    a.behavior = "fixed_offset".into();
                    a.eta = Some(eta);
                    a.direction = Some(direction.as_str().into());
                }
                BehaviorModel::RandomOffset {
                    theta_max,
                    direction,
                } => {
                    a.behavior = "random_offset".into();
                    a.theta_max = Some(theta_max);
                    a.direction = Some(direction.as_str().into());
                }
            }
            a
        })
        .collect();
    let raw = RawConfig {
        region: RawRegion {
            region_id: cfg.region.region_id,
            consumers: consumers.len() as u32,
            periods_per_day: Some(cfg.region.periods_per_day),
            usage_min: Some(base.usage_min),
            usage_max: Some(base.usage_max),
        },
        consumers: overrides,
        attackers,
        detection: RawDetection {
            threshold: Some(cfg.detection.threshold.get()),
            min_samples: Some(cfg.detection.min_samples),
            mode: Some(cfg.mode.as_str().into()),
            low_report_filter: Some(cfg.detection.low_report_filter.is_some()),
            filter_quantile: Some(
                cfg.detection
                    .low_report_filter
                    .map_or(DEFAULT_FILTER_QUANTILE, Quantile::get),
            ),
        },
        billing: RawBilling {
            tariff: Some(match &cfg.billing.tariff {
                TariffSchedule::Flat(p) => RawTariff::Flat(*p),
                TariffSchedule::PerPeriod(v) => RawTariff::PerPeriod(v.clone()),
            }),
            window_days: Some(cfg.billing.window_days),
            elasticity_trigger: cfg.billing.elasticity.map(|e| e.trigger_price),
            elasticity_factor: cfg.billing.elasticity.map(|e| e.usage_factor),
        },
        experiment: RawExperiment {
            months: Some(cfg.months()),
            master_seed: Some(RawSeed::from_seed(cfg.master_seed)),
            repetitions: Some(cfg.repetitions),
            threads: Some(cfg.threads),
            durations: Some(cfg.durations.clone()),
        },
    };
    toml::to_string(&raw).map_err(|e| Error::State(format!("cannot serialize config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(
            r#"
            [region]
            consumers = 100

            [[attackers]]
            id = 25
            behavior = "multiplicative"
            alpha = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.region.periods_per_day, 96);
        assert_eq!(cfg.detection.threshold.get(), 0.5);
        assert_eq!(cfg.detection.min_samples, 5);
        assert_eq!(cfg.region.consumers[3].usage_min, 0.5);
        assert_eq!(cfg.region.consumers[3].usage_max, 1.5);
        assert_eq!(cfg.total_periods(), 2880);
        assert_eq!(cfg.attackers(), vec![25]);
        assert_eq!(cfg.mode, DetectionMode::Threshold);
        assert_eq!(cfg.billing.window_days, 30);
        assert_eq!(cfg.master_seed, DEFAULT_MASTER_SEED);
    }

    fn config_error_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn attacker_outside_region_names_the_id() {
        let err = parse_config(
            "[region]\nconsumers = 100\n[[attackers]]\nid = 200\nbehavior = \"multiplicative\"\nalpha = 0.1\n",
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "attackers.id"));
        assert!(err.to_string().contains("200"));
    }

    #[test]
    fn zero_threshold_is_rejected() {
        assert_eq!(
            config_error_key("[region]\nconsumers = 10\n[detection]\nthreshold = 0.0\n"),
            "detection.threshold"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "[region]\nconsumers = 10\ncolour = 1\n",
            "[region]\nconsumers = 10\n[detection]\nthresh = 0.4\n",
            "[region]\nconsumers = 10\n[surprise]\nx = 1\n",
        ] {
            assert!(
                matches!(parse_config(text), Err(Error::Parse { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn behavior_parameters_are_checked() {
        let base = "[region]\nconsumers = 10\n[[attackers]]\nid = 1\n";
        assert_eq!(
            config_error_key(&format!("{base}behavior = \"fixed_offset\"\n")),
            "attackers.eta"
        );
        assert_eq!(
            config_error_key(&format!(
                "{base}behavior = \"multiplicative\"\nalpha = 0.5\neta = 1.0\n"
            )),
            "attackers.eta"
        );
        assert_eq!(
            config_error_key(&format!(
                "{base}behavior = \"multiplicative\"\nalpha = -0.5\n"
            )),
            "attackers.alpha"
        );
        assert_eq!(
            config_error_key(&format!(
                "{base}behavior = \"random_offset\"\ntheta_max = 1.0\ndirection = \"up\"\n"
            )),
            "attackers.direction"
        );
        assert_eq!(
            config_error_key(&format!("{base}behavior = \"sneaky\"\n")),
            "attackers.behavior"
        );
    }

    #[test]
    fn other_validation_errors() {
        assert_eq!(
            config_error_key("[region]\nconsumers = 1\n"),
            "region.consumers"
        );
        assert_eq!(
            config_error_key("[region]\nconsumers = 4\nusage_min = 2.0\nusage_max = 1.0\n"),
            "usage_max"
        );
        assert_eq!(
            config_error_key("[region]\nconsumers = 4\n[detection]\nmin_samples = 1\n"),
            "detection.min_samples"
        );
        assert_eq!(
            config_error_key("[region]\nconsumers = 4\n[billing]\ntariff = [1.0, 2.0]\n"),
            "billing.tariff"
        );
        assert_eq!(
            config_error_key("[region]\nconsumers = 4\n[experiment]\nrepetitions = 0\n"),
            "experiment.repetitions"
        );
        assert_eq!(
            config_error_key("[region]\nconsumers = 4\n[billing]\nelasticity_trigger = 1.0\n"),
            "billing.elasticity_factor"
        );
    }

    #[test]
    fn large_seeds_survive_as_strings() {
        let mut cfg = parse_config("[region]\nconsumers = 3\n").unwrap();
        cfg.master_seed = u64::MAX;
        let text = write_config(&cfg).unwrap();
        assert!(text.contains(&u64::MAX.to_string()));
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    fn behavior() -> impl Strategy<Value = BehaviorModel> {
        let dir = prop_oneof![Just(Direction::Subtract), Just(Direction::Add)];
        prop_oneof![
            (0.01f64..20.0).prop_map(|alpha| BehaviorModel::Multiplicative { alpha }),
            (0.01f64..5.0, dir.clone())
                .prop_map(|(eta, direction)| BehaviorModel::FixedOffset { eta, direction }),
            (0.01f64..5.0, dir).prop_map(|(theta_max, direction)| BehaviorModel::RandomOffset {
                theta_max,
                direction
            }),
        ]
    }

    prop_compose! {
        fn scenario()(
            n in 2u32..40,
            ppd in 1u32..200,
            days in 1u32..400,
            lo in 0.0f64..2.0,
            width in 0.01f64..3.0,
            attackers in prop::collection::vec((0u32..40, behavior()), 0..4),
            overrides in prop::collection::vec((0u32..40, 0.0f64..1.0, 1.0f64..4.0), 0..3),
            th in 0.01f64..1.0,
            min_samples in 2usize..20,
            filter in prop::option::of(0.05f64..0.95),
            most_negative: bool,
            price in 0.0f64..3.0,
            window_days in 1u32..60,
            seed: u64,
            reps in 1u32..5000,
            threads in 0usize..8,
            durations in prop::collection::vec(0.1f64..24.0, 1..5),
        ) -> ScenarioConfig {
            let mut cfg = ScenarioConfig::standard(n, 1.0);
            cfg.region.periods_per_day = ppd;
            cfg.region.num_days = days;
            for c in &mut cfg.region.consumers {
                c.usage_min = lo;
                c.usage_max = lo + width;
            }
            for (id, min, max) in overrides {
                if let Some(c) = cfg.region.consumers.get_mut((id % n) as usize) {
                    c.usage_min = min;
                    c.usage_max = max;
                }
            }
            for (id, b) in attackers {
                cfg.region.consumers[(id % n) as usize].behavior = b;
            }
            cfg.detection = DetectionParams {
                threshold: Threshold::new(th).unwrap(),
                min_samples,
                low_report_filter: filter.map(|q| Quantile::new(q).unwrap()),
            };
            cfg.mode = if most_negative { DetectionMode::MostNegative } else { DetectionMode::Threshold };
            cfg.billing.tariff = TariffSchedule::Flat(price);
            cfg.billing.window_days = window_days;
            cfg.master_seed = seed;
            cfg.repetitions = reps;
            cfg.threads = threads;
            cfg.durations = durations;
            cfg
        }
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(cfg in scenario()) {
            let text = write_config(&cfg).unwrap();
            prop_assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
