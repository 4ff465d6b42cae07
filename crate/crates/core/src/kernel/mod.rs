//! Deterministic discrete-event engine: the event queue, the append-only
//! event log, and the network/energy models.

pub mod models;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Capacity;
use crate::offers::{Coverage, OfferPair};
use crate::Scalar;

/// Broadcast and response message kinds exchanged during offer collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "message", rename_all = "snake_case")]
pub enum MessageKind {
    OfferRequest,
    OfferResponse {
        coverage: Coverage,
        pairs: Vec<OfferPair>,
    },
}

/// Deployment-phase sub-steps recorded as events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum DeployStep {
    WinnerSelected {
        rank: usize,
        score: Scalar,
        capacities: Vec<String>,
        lead: String,
    },
    LeadLaunch {
        capacity: String,
    },
    UnitAllocated {
        component: String,
        instance: u32,
        capacity: String,
    },
    Rejected {
        reason: String,
    },
}

/// Kind-specific event payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    AppSubmitted {
        application: String,
    },
    MessageArrival {
        application: String,
        agent: String,
        #[serde(flatten)]
        message: MessageKind,
    },
    DeployStep {
        application: String,
        #[serde(flatten)]
        step: DeployStep,
    },
    TransferComplete {
        application: String,
        component: String,
        instance: u32,
        capacity: String,
    },
    TaskComplete {
        application: String,
        component: String,
        instance: u32,
        capacity: String,
    },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::AppSubmitted { .. } => "app_submitted",
            EventPayload::MessageArrival { .. } => "message_arrival",
            EventPayload::DeployStep { .. } => "deploy_step",
            EventPayload::TransferComplete { .. } => "transfer_complete",
            EventPayload::TaskComplete { .. } => "task_complete",
        }
    }
}

/// A scheduled simulation event. `(time, seq)` is a strict total order; the
/// sequence counter is assigned at scheduling time and breaks time ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: Scalar,
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug)]
struct QueuedEvent(Event);

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.0.time == other.0.time && self.0.seq == other.0.seq
    }
}
impl Eq for QueuedEvent {}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want earliest (time, seq) first
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future-event queue with a monotone clock.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<QueuedEvent>,
    next_seq: u64,
    now: Scalar,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Scalar {
        self.now
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues an event at absolute time `at`. Scheduling in the past is a
    /// kernel error and aborts the run.
    pub fn schedule(&mut self, at: Scalar, payload: EventPayload) -> Result<u64> {
        if !at.is_finite() || at < self.now {
            return Err(Error::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(QueuedEvent(Event {
            time: at,
            seq,
            payload,
        }));
        Ok(seq)
    }

    /// Removes and returns the next event in (time, seq) order, advancing the
    /// clock to its timestamp.
    pub fn pop(&mut self) -> Option<Event> {
        let QueuedEvent(event) = self.heap.pop()?;
        self.now = event.time;
        Some(event)
    }
}

/// One busy interval of a node: `cpu_cores` cores occupied on `capacity_id`
/// from `start` to `end` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilisationInterval {
    pub capacity_id: String,
    pub start: Scalar,
    pub end: Scalar,
    pub cpu_cores: u32,
}

/// Append-only record of executed events plus per-node utilisation intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub entries: Vec<Event>,
    pub utilisation: Vec<UtilisationInterval>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum UtilLine {
    Utilisation {
        capacity_id: String,
        start: Scalar,
        end: Scalar,
        cpu_cores: u32,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TraceLine {
    Event(Event),
    Util(UtilLine),
}

impl EventLog {
    pub fn push(&mut self, event: Event) {
        debug_assert!(
            self.entries.last().is_none_or(|e| e.time <= event.time),
            "event log times must be non-decreasing"
        );
        self.entries.push(event);
    }

    pub fn record_utilisation(&mut self, interval: UtilisationInterval) {
        self.utilisation.push(interval);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Final clock value: the time of the last executed event, 0 when empty.
    pub fn final_time(&self) -> Scalar {
        self.entries.last().map_or(0.0, |e| e.time)
    }

    pub fn first_submission(&self) -> Option<Scalar> {
        self.entries
            .iter()
            .find(|e| matches!(e.payload, EventPayload::AppSubmitted { .. }))
            .map(|e| e.time)
    }

    /// Time of the last task completion, falling back to the final clock
    /// value when the scenario ran no tasks.
    pub fn last_task_completion(&self) -> Scalar {
        self.entries
            .iter()
            .rev()
            .find(|e| matches!(e.payload, EventPayload::TaskComplete { .. }))
            .map_or_else(|| self.final_time(), |e| e.time)
    }

    /// Serialises the log as newline-delimited JSON: one object per executed
    /// event followed by one per utilisation interval.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for event in &self.entries {
            out.push_str(&serde_json::to_string(event).expect("event serialises"));
            out.push('\n');
        }
        for u in &self.utilisation {
            let line = UtilLine::Utilisation {
                capacity_id: u.capacity_id.clone(),
                start: u.start,
                end: u.end,
                cpu_cores: u.cpu_cores,
            };
            out.push_str(&serde_json::to_string(&line).expect("interval serialises"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut log = EventLog::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parsed: TraceLine = serde_json::from_str(line).map_err(|source| Error::Parse {
                path: "<trace>".to_string(),
                source,
            })?;
            match parsed {
                TraceLine::Event(event) => log.entries.push(event),
                TraceLine::Util(UtilLine::Utilisation {
                    capacity_id,
                    start,
                    end,
                    cpu_cores,
                }) => log.utilisation.push(UtilisationInterval {
                    capacity_id,
                    start,
                    end,
                    cpu_cores,
                }),
            }
        }
        Ok(log)
    }
}

/// Power draw of a capacity at the given utilisation, watts.
pub fn capacity_power(capacity: &Capacity, utilisation: Scalar) -> Result<Scalar> {
    models::node_power(capacity.idle_power, capacity.max_power, utilisation)
}

/// Aggregated energy per node in kWh over the window from the first
/// application submission to the last task completion. Nodes idle for the
/// whole window contribute idle power times the window length.
pub fn accumulate_energy(log: &EventLog, capacities: &[Capacity]) -> BTreeMap<String, Scalar> {
    let mut out = BTreeMap::new();
    if log.is_empty() {
        return out;
    }
    let window = log
        .first_submission()
        .map(|start| (start, log.last_task_completion()));
    for cap in capacities {
        let energy = match window {
            None => 0.0,
            Some((start, end)) => {
                let intervals: Vec<(Scalar, Scalar, Scalar)> = log
                    .utilisation
                    .iter()
                    .filter(|u| u.capacity_id == cap.id)
                    .map(|u| (u.start, u.end, u.cpu_cores as Scalar))
                    .collect();
                models::integrate_energy_kwh(
                    cap.idle_power,
                    cap.max_power,
                    cap.cpu_total as Scalar,
                    &intervals,
                    start,
                    end,
                )
            }
        };
        out.insert(cap.id.clone(), energy);
    }
    out
}
