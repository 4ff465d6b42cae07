//! Network-transfer and energy math, generic over the scalar type.

use num_traits::Float;

use crate::error::{Error, Result};

fn cast<S: Float>(v: f64) -> S {
    S::from(v).expect("constant representable in scalar type")
}

/// Duration of transferring `size_mb` megabytes over a path, in seconds:
/// latency/1000 + size * 8 / bandwidth.
pub fn transfer_duration<S: Float>(size_mb: S, bandwidth_mbps: S, latency_ms: S) -> Result<S> {
    if size_mb < S::zero() {
        return Err(Error::Domain("transfer size must be >= 0".into()));
    }
    if bandwidth_mbps <= S::zero() {
        return Err(Error::Domain("path bandwidth must be > 0".into()));
    }
    if latency_ms < S::zero() {
        return Err(Error::Domain("path latency must be >= 0".into()));
    }
    Ok(latency_ms / cast(1000.0) + size_mb * cast(8.0) / bandwidth_mbps)
}

/// Bottleneck bandwidth of a two-endpoint path.
pub fn path_bandwidth<S: Float>(a: S, b: S) -> S {
    a.min(b)
}

/// End-to-end latency of a two-endpoint path.
pub fn path_latency<S: Float>(a: S, b: S) -> S {
    a + b
}

/// Linear power model: idle + (max - idle) * utilisation, in watts.
pub fn node_power<S: Float>(idle_w: S, max_w: S, utilisation: S) -> Result<S> {
    if utilisation < S::zero() || utilisation > S::one() {
        return Err(Error::Domain(format!(
            "utilisation must lie in [0, 1], got {}",
            utilisation.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(idle_w + (max_w - idle_w) * utilisation)
}

/// Energy in kWh drawn by a node over `[window_start, window_end]` under the
/// linear power model, given busy-core intervals `(start, end, cores)`.
/// Power is linear in busy cores, so the integral reduces to idle energy plus
/// the per-core slope times total core-seconds overlapping the window.
pub fn integrate_energy_kwh<S: Float>(
    idle_w: S,
    max_w: S,
    cpu_total: S,
    intervals: &[(S, S, S)],
    window_start: S,
    window_end: S,
) -> S {
    if window_end <= window_start {
        return S::zero();
    }
    let mut core_seconds = S::zero();
    for &(start, end, cores) in intervals {
        let s = start.max(window_start);
        let e = end.min(window_end);
        if e > s {
            core_seconds = core_seconds + cores * (e - s);
        }
    }
    let joules = idle_w * (window_end - window_start) + (max_w - idle_w) / cpu_total * core_seconds;
    joules / cast(3.6e6)
}
