//! Strategy-matrix execution: runs every (strategy, seed) pair as an
//! independent deterministic simulation and emits the metrics CSV, the
//! per-node energy series CSV, and optional event traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::EventLog;
use crate::metrics::{
    compute_metrics, per_node_energy_series, MetricsReport, DEFAULT_SERIES_STEP_S,
};
use crate::ranking::{RankMethod, ReliabilityMode};
use crate::scenario::{load_scenario, parse_priority_profile, Scenario};
use crate::sim::{RunStrategy, SimConfig, Simulation};

pub const METRICS_CSV_HEADER: &str =
    "strategy,method,reliability_mode,seed,simulation_time_min,total_price_eur,avg_deployment_time_min,total_energy_kwh";

pub const ENERGY_CSV_HEADER: &str =
    "strategy,method,reliability_mode,seed,node_id,time_s,cumulative_kwh";

/// Full configuration of a scenario execution.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub infra_path: PathBuf,
    pub apps_path: PathBuf,
    pub strategies: Vec<RunStrategy>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub trace: bool,
    pub combination_guard: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.strategies.is_empty() {
            violations.push("at least one strategy is required".to_string());
        }
        if self.seeds.is_empty() {
            violations.push("at least one seed is required".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::validation("scenario config", violations))
        }
    }
}

/// Expands priority profiles and methods into the strategy matrix. The
/// "random" profile ignores priorities and methods and collapses into a
/// single random-ranking entry.
pub fn expand_strategies(
    profiles: &[String],
    methods: &[RankMethod],
    reliability: ReliabilityMode,
) -> Result<Vec<RunStrategy>> {
    let mut out = Vec::new();
    for profile in profiles {
        if profile == "random" {
            out.push(RunStrategy::new(
                "random",
                parse_priority_profile(profile)?,
                RankMethod::Random,
                ReliabilityMode::None,
            ));
            continue;
        }
        let priorities = parse_priority_profile(profile)?;
        for method in methods {
            out.push(RunStrategy::new(
                profile.clone(),
                priorities,
                *method,
                reliability,
            ));
        }
    }
    Ok(out)
}

/// Outcome of one (strategy, seed) run.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub strategy: String,
    pub method: RankMethod,
    pub reliability: ReliabilityMode,
    pub seed: u64,
    pub report: MetricsReport,
}

impl RunRow {
    pub fn run_id(&self) -> String {
        format!(
            "{}/{}/{}/seed{}",
            self.strategy,
            self.method.name(),
            self.reliability.name(),
            self.seed
        )
    }
}

/// Runs one (strategy, seed) pair against a scenario and returns the metrics
/// row together with the event log.
pub fn run_once(
    scenario: &Scenario,
    strategy: &RunStrategy,
    seed: u64,
    combination_guard: u64,
) -> Result<(RunRow, EventLog)> {
    let mut sim = Simulation::new(
        scenario,
        SimConfig {
            strategy: strategy.clone(),
            seed,
            combination_guard,
        },
    )?;
    sim.run_until_idle()?;
    let log = sim.into_log();
    let report = compute_metrics(&log, scenario);
    Ok((
        RunRow {
            strategy: strategy.profile.clone(),
            method: strategy.method,
            reliability: strategy.reliability,
            seed,
            report,
        },
        log,
    ))
}

/// Runs the full matrix in memory, strategy-major then seed order.
pub fn run_matrix(
    scenario: &Scenario,
    strategies: &[RunStrategy],
    seeds: &[u64],
    combination_guard: u64,
) -> Result<Vec<(RunRow, EventLog)>> {
    let mut out = Vec::with_capacity(strategies.len() * seeds.len());
    for strategy in strategies {
        for &seed in seeds {
            out.push(run_once(scenario, strategy, seed, combination_guard)?);
        }
    }
    Ok(out)
}

fn push_metrics_row(csv: &mut String, row: &RunRow) {
    writeln!(
        csv,
        "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
        row.strategy,
        row.method.name(),
        row.reliability.name(),
        row.seed,
        row.report.simulation_time_min,
        row.report.total_price_eur,
        row.report.avg_deployment_time_min,
        row.report.total_energy_kwh,
    )
    .expect("write to string");
}

pub fn metrics_csv(rows: &[RunRow]) -> String {
    let mut csv = String::from(METRICS_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        push_metrics_row(&mut csv, row);
    }
    csv
}

pub fn energy_series_csv(runs: &[(RunRow, EventLog)], scenario: &Scenario) -> Result<String> {
    let mut csv = String::from(ENERGY_CSV_HEADER);
    csv.push('\n');
    for (row, log) in runs {
        let series = per_node_energy_series(log, &scenario.capacities, DEFAULT_SERIES_STEP_S)?;
        for (node, samples) in series {
            for (time_s, kwh) in samples {
                writeln!(
                    csv,
                    "{},{},{},{},{},{:.3},{:.9}",
                    row.strategy,
                    row.method.name(),
                    row.reliability.name(),
                    row.seed,
                    node,
                    time_s,
                    kwh,
                )
                .expect("write to string");
            }
        }
    }
    Ok(csv)
}

fn write_out(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Summary of a scenario execution: successful rows plus per-run failures.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<RunRow>,
    pub failures: Vec<(String, String)>,
    pub metrics_path: PathBuf,
    pub energy_path: PathBuf,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loads the scenario, executes every (strategy, seed) run, writes the CSVs
/// (and traces when requested), and prints one status line per run.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary> {
    config.validate()?;
    let scenario = load_scenario(&config.infra_path, &config.apps_path)?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for strategy in &config.strategies {
        for &seed in &config.seeds {
            match run_once(&scenario, strategy, seed, config.combination_guard) {
                Ok((row, log)) => {
                    println!(
                        "run {} ok: sim_time={:.3} min price={:.6} EUR deploy={:.3} min energy={:.6} kWh",
                        row.run_id(),
                        row.report.simulation_time_min,
                        row.report.total_price_eur,
                        row.report.avg_deployment_time_min,
                        row.report.total_energy_kwh,
                    );
                    if config.trace {
                        let name = format!(
                            "trace_{}_{}_{}_{}.ndjson",
                            strategy.profile,
                            strategy.method.name(),
                            strategy.reliability.name(),
                            seed
                        );
                        write_out(&config.out_dir.join(name), &log.to_ndjson())?;
                    }
                    rows.push(row);
                    runs.push((rows.last().unwrap().clone(), log));
                }
                Err(err) => {
                    let run_id = format!(
                        "{}/{}/{}/seed{}",
                        strategy.profile,
                        strategy.method.name(),
                        strategy.reliability.name(),
                        seed
                    );
                    println!("run {run_id} FAILED: {err}");
                    failures.push((run_id, err.to_string()));
                }
            }
        }
    }

    let metrics_path = config.out_dir.join("metrics.csv");
    write_out(&metrics_path, &metrics_csv(&rows))?;
    let energy_path = config.out_dir.join("energy_series.csv");
    write_out(&energy_path, &energy_series_csv(&runs, &scenario)?)?;

    Ok(RunSummary {
        rows,
        failures,
        metrics_path,
        energy_path,
    })
}
