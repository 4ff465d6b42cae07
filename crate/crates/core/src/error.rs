use thiserror::Error;

/// Errors produced by scenario validation, the event kernel, and the
/// deployment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A descriptor failed validation. Every violated field is listed.
    #[error("validation failed for {subject}: {}", violations.join("; "))]
    Validation {
        subject: String,
        violations: Vec<String>,
    },

    /// Attempt to schedule an event before the current simulation time.
    #[error("cannot schedule event at {at} s: clock is already at {now} s")]
    ScheduleInPast { at: f64, now: f64 },

    /// Illegal capacity-slice lifecycle transition.
    #[error("illegal slice transition {from:?} -> {to:?} on capacity {capacity}")]
    IllegalTransition {
        capacity: String,
        from: crate::model::SliceState,
        to: crate::model::SliceState,
    },

    /// Reference to a slice that does not exist (or was already released).
    #[error("unknown slice {slice_id} on capacity {capacity}")]
    UnknownSlice { capacity: String, slice_id: u64 },

    /// Reference to a capacity that is not registered.
    #[error("unknown capacity {0}")]
    UnknownCapacity(String),

    /// Reference to a component/instance the application does not contain.
    #[error(
        "offer pair references unknown unit {component}#{instance} of application {application}"
    )]
    UnknownUnit {
        application: String,
        component: String,
        instance: u32,
    },

    /// Combination enumeration would exceed the configured guard.
    #[error("combination count {count} exceeds guard {guard}")]
    CombinationOverflow { count: u128, guard: u64 },

    /// An operation that requires at least one element received none.
    #[error("{0} requires a non-empty input")]
    EmptyInput(&'static str),

    /// Capacity totals fall outside the configured tier-classification bounds.
    #[error("capacity {capacity} lies outside tier bounds: {detail}")]
    TierOutOfBounds { capacity: String, detail: String },

    /// Numeric argument outside its legal domain.
    #[error("{0}")]
    Domain(String),

    /// No ranked offer was available; the application is rejected.
    #[error("no available offer for application {0}")]
    NoAvailableOffer(String),

    /// A simulation run aborted inside an event handler.
    #[error("run aborted at t={time} s during {kind}: {source}")]
    Aborted {
        time: f64,
        kind: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn validation(subject: impl Into<String>, violations: Vec<String>) -> Self {
        Error::Validation {
            subject: subject.into(),
            violations,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
