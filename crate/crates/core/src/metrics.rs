//! Report metrics derived from a completed event log: simulation time, total
//! price, average deployment time, and per-node energy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::models::integrate_energy_kwh;
use crate::kernel::{accumulate_energy, DeployStep, EventLog, EventPayload};
use crate::model::Capacity;
use crate::scenario::Scenario;
use crate::Scalar;

/// Sampling step of the exported energy series, seconds.
pub const DEFAULT_SERIES_STEP_S: Scalar = 60.0;

/// The four report metrics plus their per-application and per-node detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub simulation_time_min: Scalar,
    pub total_price_eur: Scalar,
    pub avg_deployment_time_min: Scalar,
    pub total_energy_kwh: Scalar,
    pub per_application_min: BTreeMap<String, Scalar>,
    pub per_node_energy_kwh: BTreeMap<String, Scalar>,
}

impl MetricsReport {
    pub fn zero() -> Self {
        Self {
            simulation_time_min: 0.0,
            total_price_eur: 0.0,
            avg_deployment_time_min: 0.0,
            total_energy_kwh: 0.0,
            per_application_min: BTreeMap::new(),
            per_node_energy_kwh: BTreeMap::new(),
        }
    }
}

/// Unit allocations extracted from the log: (application, component,
/// instance) -> (capacity, time).
fn allocations(log: &EventLog) -> BTreeMap<(String, String, u32), (String, Scalar)> {
    let mut out = BTreeMap::new();
    for event in &log.entries {
        match &event.payload {
            EventPayload::TransferComplete {
                application,
                component,
                instance,
                capacity,
            } => {
                out.insert(
                    (application.clone(), component.clone(), *instance),
                    (capacity.clone(), event.time),
                );
            }
            EventPayload::DeployStep {
                application,
                step:
                    DeployStep::UnitAllocated {
                        component,
                        instance,
                        capacity,
                    },
            } => {
                out.insert(
                    (application.clone(), component.clone(), *instance),
                    (capacity.clone(), event.time),
                );
            }
            _ => {}
        }
    }
    out
}

fn rejected_applications(log: &EventLog) -> BTreeSet<String> {
    log.entries
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::DeployStep {
                application,
                step: DeployStep::Rejected { .. },
            } => Some(application.clone()),
            _ => None,
        })
        .collect()
}

/// Derives the report from a completed log. Metrics are a pure function of
/// the log and the scenario; a log with no submissions yields the zero
/// report.
pub fn compute_metrics(log: &EventLog, scenario: &Scenario) -> MetricsReport {
    let Some(first_submit) = log.first_submission() else {
        return MetricsReport::zero();
    };
    let window_end = log.last_task_completion();
    let allocs = allocations(log);
    let rejected = rejected_applications(log);

    // average deployment time: per application first, then across applications
    let mut per_application_min = BTreeMap::new();
    for app in &scenario.applications {
        if rejected.contains(&app.id) {
            continue;
        }
        let times: Vec<Scalar> = allocs
            .iter()
            .filter(|((a, _, _), _)| *a == app.id)
            .map(|(_, (_, t))| t - app.submit_time)
            .collect();
        if !times.is_empty() {
            let mean = times.iter().sum::<Scalar>() / times.len() as Scalar;
            per_application_min.insert(app.id.clone(), mean / 60.0);
        }
    }
    let avg_deployment_time_min = if per_application_min.is_empty() {
        0.0
    } else {
        per_application_min.values().sum::<Scalar>() / per_application_min.len() as Scalar
    };

    // price: each capacity bills its hourly rate from its first allocation to
    // the end of the simulation window
    let mut first_allocation: BTreeMap<&str, Scalar> = BTreeMap::new();
    for (capacity, time) in allocs.values() {
        first_allocation
            .entry(capacity)
            .and_modify(|t| *t = t.min(*time))
            .or_insert(*time);
    }
    let mut total_price_eur = 0.0;
    for cap in &scenario.capacities {
        if let Some(&start) = first_allocation.get(cap.id.as_str()) {
            let hours = (window_end - start).max(0.0) / 3600.0;
            total_price_eur += cap.price_per_hour * hours;
        }
    }

    let per_node_energy_kwh = accumulate_energy(log, &scenario.capacities);
    let total_energy_kwh = per_node_energy_kwh.values().sum();

    MetricsReport {
        simulation_time_min: (window_end - first_submit) / 60.0,
        total_price_eur,
        avg_deployment_time_min,
        total_energy_kwh,
        per_application_min,
        per_node_energy_kwh,
    }
}

/// Cumulative per-node energy sampled every `step` seconds from the first
/// submission to the last task completion. Sample times are offsets from the
/// window start; the final sample always lands on the window end.
pub fn per_node_energy_series(
    log: &EventLog,
    capacities: &[Capacity],
    step: Scalar,
) -> Result<BTreeMap<String, Vec<(Scalar, Scalar)>>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Domain("series step must be > 0".into()));
    }
    let mut out = BTreeMap::new();
    let Some(start) = log.first_submission() else {
        return Ok(out);
    };
    let end = log.last_task_completion();
    let window = end - start;

    let mut sample_offsets = Vec::new();
    let mut t = 0.0;
    while t < window {
        sample_offsets.push(t);
        t += step;
    }
    sample_offsets.push(window);

    for cap in capacities {
        let intervals: Vec<(Scalar, Scalar, Scalar)> = log
            .utilisation
            .iter()
            .filter(|u| u.capacity_id == cap.id)
            .map(|u| (u.start, u.end, u.cpu_cores as Scalar))
            .collect();
        let series = sample_offsets
            .iter()
            .map(|&offset| {
                let kwh = integrate_energy_kwh(
                    cap.idle_power,
                    cap.max_power,
                    cap.cpu_total as Scalar,
                    &intervals,
                    start,
                    start + offset,
                );
                (offset, kwh)
            })
            .collect();
        out.insert(cap.id.clone(), series);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Event;
    use crate::kernel::UtilisationInterval;
    use crate::model::{validate_application, ApplicationDoc, ComponentDoc, PriorityVector};

    fn capacity(id: &str, price: Scalar, idle: Scalar, max: Scalar, cores: u32) -> Capacity {
        Capacity {
            id: id.to_string(),
            provider: "AWS".to_string(),
            location: "EU".to_string(),
            cpu_total: cores,
            ram_total: 32,
            storage_total: 32,
            idle_power: idle,
            max_power: max,
            latency: 15.0,
            bandwidth: 1000.0,
            price_per_hour: price,
            reliability: 0.9,
        }
    }

    fn one_app_scenario(caps: Vec<Capacity>) -> Scenario {
        let app = validate_application(&ApplicationDoc {
            id: Some("app1".to_string()),
            components: vec![ComponentDoc {
                id: Some("c1".to_string()),
                kind: Some("compute".to_string()),
                cpu: Some(2),
                ram: Some(2),
                image_size: Some(100),
                instances: Some(1),
                ..ComponentDoc::default()
            }],
            priorities: Some(PriorityVector::equal()),
            submit_time: Some(0.0),
        })
        .unwrap();
        Scenario {
            capacities: caps,
            applications: vec![app],
            seed: 1,
            unavailable_capacities: Default::default(),
            registry_bandwidth: 1000.0,
            registry_latency: 0.0,
        }
    }

    fn log_with(entries: Vec<(Scalar, EventPayload)>) -> EventLog {
        let mut log = EventLog::default();
        for (seq, (time, payload)) in entries.into_iter().enumerate() {
            log.push(Event {
                time,
                seq: seq as u64,
                payload,
            });
        }
        log
    }

    fn submitted(app: &str) -> EventPayload {
        EventPayload::AppSubmitted {
            application: app.to_string(),
        }
    }

    fn transfer(app: &str, comp: &str, cap: &str) -> EventPayload {
        EventPayload::TransferComplete {
            application: app.to_string(),
            component: comp.to_string(),
            instance: 0,
            capacity: cap.to_string(),
        }
    }

    fn task(app: &str, comp: &str, cap: &str) -> EventPayload {
        EventPayload::TaskComplete {
            application: app.to_string(),
            component: comp.to_string(),
            instance: 0,
            capacity: cap.to_string(),
        }
    }

    #[test]
    fn simulation_time_converts_to_minutes() {
        let scenario = one_app_scenario(vec![capacity("cap1", 0.1, 150.0, 500.0, 16)]);
        let log = log_with(vec![
            (0.0, submitted("app1")),
            (264.0, transfer("app1", "c1", "cap1")),
            (2064.0, task("app1", "c1", "cap1")),
        ]);
        let report = compute_metrics(&log, &scenario);
        assert!((report.simulation_time_min - 34.4).abs() < 1e-9);
    }

    #[test]
    fn price_prorates_linearly_per_second() {
        // capacity at 0.10 EUR/h allocated for 30 minutes
        let scenario = one_app_scenario(vec![capacity("cap1", 0.1, 150.0, 500.0, 16)]);
        let log = log_with(vec![
            (0.0, submitted("app1")),
            (0.0, transfer("app1", "c1", "cap1")),
            (1800.0, task("app1", "c1", "cap1")),
        ]);
        let report = compute_metrics(&log, &scenario);
        assert!((report.total_price_eur - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_log_yields_zero_report() {
        let scenario = one_app_scenario(vec![capacity("cap1", 0.1, 150.0, 500.0, 16)]);
        let report = compute_metrics(&EventLog::default(), &scenario);
        assert_eq!(report, MetricsReport::zero());
    }

    #[test]
    fn total_energy_is_sum_of_per_node_energy() {
        let scenario = one_app_scenario(vec![
            capacity("cap1", 0.1, 150.0, 500.0, 16),
            capacity("cap2", 0.2, 200.0, 1000.0, 32),
        ]);
        let mut log = log_with(vec![
            (0.0, submitted("app1")),
            (10.0, transfer("app1", "c1", "cap1")),
            (1810.0, task("app1", "c1", "cap1")),
        ]);
        log.record_utilisation(UtilisationInterval {
            capacity_id: "cap1".to_string(),
            start: 10.0,
            end: 1810.0,
            cpu_cores: 2,
        });
        let report = compute_metrics(&log, &scenario);
        let sum: Scalar = report.per_node_energy_kwh.values().sum();
        assert!((report.total_energy_kwh - sum).abs() < 1e-15);
        // idle node still accrues idle energy over the window
        assert!(report.per_node_energy_kwh["cap2"] > 0.0);
    }

    #[test]
    fn constant_idle_series_is_linear() {
        let caps = vec![capacity("cap1", 0.1, 150.0, 500.0, 16)];
        let log = log_with(vec![
            (0.0, submitted("app1")),
            (600.0, task("app1", "c1", "cap1")),
        ]);
        let series = per_node_energy_series(&log, &caps, 60.0).unwrap();
        let samples = &series["cap1"];
        assert_eq!(samples.len(), 11);
        assert!((samples[10].1 - 0.025).abs() < 1e-12);
        // linear growth
        for window in samples.windows(2) {
            let delta = window[1].1 - window[0].1;
            assert!((delta - 150.0 * 60.0 / 3.6e6).abs() < 1e-12);
        }
    }

    #[test]
    fn series_slope_increases_at_task_start() {
        let caps = vec![capacity("cap1", 0.1, 150.0, 500.0, 16)];
        let mut log = log_with(vec![
            (0.0, submitted("app1")),
            (300.0, transfer("app1", "c1", "cap1")),
            (600.0, task("app1", "c1", "cap1")),
        ]);
        log.record_utilisation(UtilisationInterval {
            capacity_id: "cap1".to_string(),
            start: 300.0,
            end: 600.0,
            cpu_cores: 8,
        });
        let series = per_node_energy_series(&log, &caps, 60.0).unwrap();
        let samples = &series["cap1"];
        let slope_before = samples[5].1 - samples[4].1; // 240..300
        let slope_after = samples[6].1 - samples[5].1; // 300..360
        assert!(slope_after > slope_before);
    }

    #[test]
    fn zero_length_window_yields_single_zero_sample() {
        let caps = vec![capacity("cap1", 0.1, 150.0, 500.0, 16)];
        let log = log_with(vec![(0.0, submitted("app1"))]);
        let series = per_node_energy_series(&log, &caps, 60.0).unwrap();
        assert_eq!(series["cap1"], vec![(0.0, 0.0)]);
    }

    #[test]
    fn series_final_sample_matches_report_energy() {
        let caps = vec![capacity("cap1", 0.1, 150.0, 500.0, 16)];
        let scenario = one_app_scenario(caps.clone());
        let mut log = log_with(vec![
            (0.0, submitted("app1")),
            (33.0, transfer("app1", "c1", "cap1")),
            (1833.0, task("app1", "c1", "cap1")),
        ]);
        log.record_utilisation(UtilisationInterval {
            capacity_id: "cap1".to_string(),
            start: 33.0,
            end: 1833.0,
            cpu_cores: 2,
        });
        let report = compute_metrics(&log, &scenario);
        let series = per_node_energy_series(&log, &caps, 60.0).unwrap();
        let last = series["cap1"].last().unwrap().1;
        let expected = report.per_node_energy_kwh["cap1"];
        assert!((last - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn invalid_step_errors() {
        let caps = vec![capacity("cap1", 0.1, 150.0, 500.0, 16)];
        let log = EventLog::default();
        assert!(per_node_energy_series(&log, &caps, 0.0).is_err());
        assert!(per_node_energy_series(&log, &caps, -1.0).is_err());
    }

    #[test]
    fn metrics_are_pure_and_reproducible_from_saved_logs() {
        let scenario = one_app_scenario(vec![capacity("cap1", 0.1, 150.0, 500.0, 16)]);
        let mut log = log_with(vec![
            (0.0, submitted("app1")),
            (12.5, transfer("app1", "c1", "cap1")),
            (1812.5, task("app1", "c1", "cap1")),
        ]);
        log.record_utilisation(UtilisationInterval {
            capacity_id: "cap1".to_string(),
            start: 12.5,
            end: 1812.5,
            cpu_cores: 2,
        });
        let report = compute_metrics(&log, &scenario);
        let reloaded = EventLog::from_ndjson(&log.to_ndjson()).unwrap();
        let report2 = compute_metrics(&reloaded, &scenario);
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&report2).unwrap()
        );
    }
}
