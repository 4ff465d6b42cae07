//! Winner confirmation with next-ranked fallback, lead-resource selection,
//! image-transfer planning, and workload constants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::models::{path_bandwidth, path_latency, transfer_duration};
use crate::model::RegisteredCapacity;
use crate::offers::{OfferCombination, PlacementUnit, UnitDemand};
use crate::ranking::RankedOffers;
use crate::Scalar;

/// Length of the CPU-saturating task run by every deployed compute unit.
pub const TASK_DURATION_S: Scalar = 1800.0;

/// Central registry holding component container images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRegistry {
    /// Registry link bandwidth, Mbps.
    pub bandwidth: Scalar,
    /// Registry-side latency, milliseconds.
    pub latency: Scalar,
    /// (application id, component id) -> image size MB.
    pub images: BTreeMap<(String, String), u32>,
}

impl ImageRegistry {
    pub fn new(bandwidth: Scalar, latency: Scalar) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Domain("registry bandwidth must be > 0".into()));
        }
        if !(latency.is_finite() && latency >= 0.0) {
            return Err(Error::Domain("registry latency must be >= 0".into()));
        }
        Ok(Self {
            bandwidth,
            latency,
            images: BTreeMap::new(),
        })
    }

    pub fn publish(&mut self, application_id: &str, component_id: &str, size_mb: u32) {
        self.images.insert(
            (application_id.to_string(), component_id.to_string()),
            size_mb,
        );
    }

    pub fn image_size(&self, application_id: &str, component_id: &str) -> Option<u32> {
        self.images
            .get(&(application_id.to_string(), component_id.to_string()))
            .copied()
    }
}

/// The selected and configured set of resources serving one application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swarm {
    pub application_id: String,
    pub lead_capacity: String,
    /// (capacity id, component id, instance index) for every placement unit.
    pub members: Vec<(String, String, u32)>,
    /// Allocation instant per (component id, instance index).
    pub deployed_at: BTreeMap<(String, u32), Scalar>,
}

/// Picks the first ranked offer whose availability flag is true. The caller
/// releases the reservations of every pair outside the winner.
pub fn select_winner<'a>(
    ranked: &'a RankedOffers,
    availability: &[bool],
) -> Result<(usize, &'a OfferCombination)> {
    if ranked.entries.is_empty() {
        return Err(Error::EmptyInput("select_winner"));
    }
    for (rank, (combo, _)) in ranked.entries.iter().enumerate() {
        if availability.get(rank).copied().unwrap_or(true) {
            return Ok((rank, combo));
        }
    }
    Err(Error::NoAvailableOffer(String::new()))
}

/// Among the distinct capacities of the winning combination, the one with the
/// most CPU cores hosts the lead agent; ties break by capacity id ascending.
pub fn select_lead_resource(
    winner: &OfferCombination,
    capacities: &BTreeMap<String, RegisteredCapacity>,
) -> Result<String> {
    let mut best: Option<(u32, &str)> = None;
    for id in winner.capacity_ids() {
        let cap = capacities
            .get(id)
            .ok_or_else(|| Error::UnknownCapacity(id.to_string()))?;
        let cores = cap.spec.cpu_total;
        best = match best {
            None => Some((cores, id)),
            Some((b_cores, b_id)) => {
                if cores > b_cores || (cores == b_cores && id < b_id) {
                    Some((cores, id))
                } else {
                    Some((b_cores, b_id))
                }
            }
        };
    }
    best.map(|(_, id)| id.to_string())
        .ok_or(Error::EmptyInput("select_lead_resource"))
}

/// One scheduled image transfer: the unit's image arrives at its hosting
/// capacity `completes_after` seconds after deployment start.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTransfer {
    pub component_id: String,
    pub instance: u32,
    pub capacity_id: String,
    pub completes_after: Scalar,
}

/// Plans the image transfers of a winning combination. Transfers to distinct
/// capacities run concurrently; transfers to the same capacity run serially
/// in unit order. Storage units need no image and are not planned here.
pub fn plan_transfers(
    winner: &OfferCombination,
    units: &[PlacementUnit],
    registry: &ImageRegistry,
    capacities: &BTreeMap<String, RegisteredCapacity>,
) -> Result<Vec<PlannedTransfer>> {
    let host_of: BTreeMap<(&str, u32), &str> = winner
        .pairs
        .iter()
        .map(|p| {
            (
                (p.component_id.as_str(), p.instance),
                p.slice.capacity_id.as_str(),
            )
        })
        .collect();

    let mut chain_end: BTreeMap<&str, Scalar> = BTreeMap::new();
    let mut planned = Vec::new();
    for unit in units {
        let UnitDemand::Compute { .. } = unit.demand else {
            continue;
        };
        let capacity_id = host_of
            .get(&(unit.component_id.as_str(), unit.instance))
            .ok_or_else(|| Error::UnknownUnit {
                application: String::new(),
                component: unit.component_id.clone(),
                instance: unit.instance,
            })?;
        let cap = capacities
            .get(*capacity_id)
            .ok_or_else(|| Error::UnknownCapacity(capacity_id.to_string()))?;
        let size = unit.image_size.unwrap_or(0) as Scalar;
        let duration = transfer_duration(
            size,
            path_bandwidth(registry.bandwidth, cap.spec.bandwidth),
            path_latency(registry.latency, cap.spec.latency),
        )?;
        let start = chain_end.get(*capacity_id).copied().unwrap_or(0.0);
        let done = start + duration;
        chain_end.insert(capacity_id, done);
        planned.push(PlannedTransfer {
            component_id: unit.component_id.clone(),
            instance: unit.instance,
            capacity_id: capacity_id.to_string(),
            completes_after: done,
        });
    }
    Ok(planned)
}
