//! Command-line entry points.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::aggregation::accumulate_samples;
use crate::config::load_config;
use crate::detection::{detect_region, Threshold};
use crate::error::{Error, Result};
use crate::export;
use crate::grid::BehaviorModel;
use crate::harness::{
    concentration_experiment, detection_table, duration_sweep, run_trials, simulate, trial_seed,
    AttackCase, ScenarioConfig, SimOptions, STANDARD_ATTACKER,
};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sbpp",
    version,
    about = "Sampled smart-grid aggregation simulator and theft detector"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one window; write period records, detection report and bills.
    Simulate(RunArgs),
    /// Detect malicious consumers from a simulated window or a records CSV.
    Detect(DetectArgs),
    /// Simulate one window and write the bills only.
    Bill(RunArgs),
    /// Detection probability for the three attack cases over several durations.
    Table1(RunArgs),
    /// Per-consumer correlations of one trial plus per-trial outcome classes.
    FigCorr(RunArgs),
    /// Benign correlation spread at several measurement durations.
    FigConcentration(RunArgs),
    /// Detection probability of the configured scenario versus duration.
    FigDurationSweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo repetitions (overrides the config).
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Detection threshold in (0, 1] (overrides the config).
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated durations in months (overrides the config).
    #[arg(long, value_delimiter = ',')]
    months: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Records CSV from `simulate`; when absent a window is simulated.
    #[arg(long)]
    records: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn resolve(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = if args.config.extension().is_some_and(|e| e == "json") {
        RunManifest::read(&args.config)?.scenario()?
    } else {
        load_config(&args.config)?
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.repetitions = reps;
    }
    if let Some(th) = args.threshold {
        cfg.detection.threshold = Threshold::new(th)?;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(m) = &args.months {
        cfg.durations = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Output {
    fn new(command: &str, dir: &Path, cfg: &ScenarioConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command, cfg)?,
            started: Instant::now(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = self.dir.join(MANIFEST_FILE);
        self.manifest.write(&path)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn describe(b: &BehaviorModel) -> String {
    match b {
        BehaviorModel::Benign => "benign".into(),
        BehaviorModel::Multiplicative { alpha } => format!("multiplicative alpha={alpha}"),
        BehaviorModel::FixedOffset { eta, direction } => {
            format!("fixed_offset eta={eta} direction={direction}")
        }
        BehaviorModel::RandomOffset {
            theta_max,
            direction,
        } => format!("random_offset theta_max={theta_max} direction={direction}"),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("simulate", &args.out_dir, &cfg)?;
            let run = simulate(&cfg, trial_seed(&cfg, 0), SimOptions::FULL)?;
            export::write_records(&out.file("records.csv"), &run.records)?;
            export::write_detection(&out.file("detection.csv"), &run.outcome.report)?;
            export::write_bills(&out.file("bills.csv"), &run.bills)?;
            println!(
                "{} periods, labeled malicious: {:?}",
                run.records.len(),
                run.outcome.labeled_malicious
            );
            out.finish()
        }
        Command::Detect(DetectArgs { run: args, records }) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("detect", &args.out_dir, &cfg)?;
            let report = match &records {
                Some(path) => {
                    let recs = export::read_records(path)?;
                    let ids = cfg.region.consumers.iter().map(|c| c.id);
                    let series = accumulate_samples(ids, &recs)?;
                    out.manifest
                        .parameters
                        .push(format!("records={}", path.display()));
                    detect_region(&series, &cfg.detection)?
                }
                None => {
                    simulate(&cfg, trial_seed(&cfg, 0), SimOptions::DETECTION_ONLY)?
                        .outcome
                        .report
                }
            };
            export::write_detection(&out.file("detection.csv"), &report)?;
            println!("labeled malicious: {:?}", report.malicious_ids());
            out.finish()
        }
        Command::Bill(args) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("bill", &args.out_dir, &cfg)?;
            let run = simulate(
                &cfg,
                trial_seed(&cfg, 0),
                SimOptions {
                    keep_records: false,
                    billing: true,
                },
            )?;
            export::write_bills(&out.file("bills.csv"), &run.bills)?;
            println!("{} bills", run.bills.len());
            out.finish()
        }
        Command::Table1(args) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("table1", &args.out_dir, &cfg)?;
            let attacker = cfg
                .attackers()
                .first()
                .copied()
                .unwrap_or(STANDARD_ATTACKER);
            if let Some(profile) = cfg
                .region
                .position(attacker)
                .map(|p| &cfg.region.consumers[p])
            {
                for case in AttackCase::ALL {
                    out.manifest.parameters.push(format!(
                        "case {}: consumer {attacker} {} mode={}",
                        case.label(),
                        describe(&case.behavior(profile)),
                        case.mode().as_str()
                    ));
                }
            }
            let cells = detection_table(&cfg, &cfg.durations)?;
            export::write_table(&out.file("table1.csv"), &cells)?;
            export::write_table_wide(&out.file("table1_wide.csv"), &cells)?;
            for c in &cells {
                println!(
                    "case {:>3} {:>5} months: p = {:.3} ± {:.3}",
                    c.case.label(),
                    c.months,
                    c.estimate.probability,
                    c.estimate.stderr
                );
            }
            out.finish()
        }
        Command::FigCorr(args) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("fig-corr", &args.out_dir, &cfg)?;
            let outcomes = run_trials(&cfg)?;
            export::write_detection(&out.file("detection.csv"), &outcomes[0].report)?;
            export::write_outcomes(&out.file("outcomes.csv"), &outcomes)?;
            let mut counts = [0usize; 3];
            for o in &outcomes {
                counts[o.class as usize] += 1;
            }
            println!(
                "{} trials: exact_match {}, extra_benign {}, missed {}",
                outcomes.len(),
                counts[0],
                counts[1],
                counts[2]
            );
            out.finish()
        }
        Command::FigConcentration(args) => {
            let mut cfg = resolve(&args)?;
            if args.months.is_none() {
                cfg.durations = vec![1.0, 12.0];
            }
            let mut out = Output::new("fig-concentration", &args.out_dir, &cfg)?;
            let points = concentration_experiment(&cfg, &cfg.durations)?;
            export::write_concentration(&out.file("concentration.csv"), &points)?;
            export::write_concentration_summary(&out.file("concentration_summary.csv"), &points)?;
            for p in &points {
                println!(
                    "{:>5} months: benign corr std = {:.4}",
                    p.months, p.benign_std
                );
            }
            out.finish()
        }
        Command::FigDurationSweep(args) => {
            let cfg = resolve(&args)?;
            let mut out = Output::new("fig-duration-sweep", &args.out_dir, &cfg)?;
            let label = scenario_label(&cfg);
            let points = duration_sweep(&cfg, &cfg.durations)?;
            export::write_sweep(&out.file("duration_sweep.csv"), &label, &points)?;
            for (m, e) in &points {
                println!("{m:>5} months: p = {:.3} ± {:.3}", e.probability, e.stderr);
            }
            out.finish()
        }
    }
}

/// Table row label for a config: the attack case of its single attacker.
fn scenario_label(cfg: &ScenarioConfig) -> String {
    let attackers = cfg.attackers();
    match attackers.as_slice() {
        [id] => {
            let pos = cfg.region.position(*id).expect("attacker is a consumer");
            match cfg.region.consumers[pos].behavior {
                BehaviorModel::Multiplicative { .. } => "I".into(),
                BehaviorModel::FixedOffset { .. } => "II".into(),
                BehaviorModel::RandomOffset { .. } => "III".into(),
                BehaviorModel::Benign => "benign".into(),
            }
        }
        [] => "benign".into(),
        _ => "multi".into(),
    }
}
