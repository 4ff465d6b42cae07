//! Domain types for applications, infrastructure, QoS priorities, and the
//! capacity-slice lifecycle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Resource bundle in the units used throughout: CPU cores, RAM GB, storage GB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: u32,
    pub ram: u32,
    pub storage: u32,
}

impl Resources {
    pub fn new(cpu: u32, ram: u32, storage: u32) -> Self {
        Self { cpu, ram, storage }
    }

    pub fn fits_in(&self, other: &Resources) -> bool {
        self.cpu <= other.cpu && self.ram <= other.ram && self.storage <= other.storage
    }

    pub fn checked_add(&self, other: &Resources) -> Resources {
        Resources {
            cpu: self.cpu + other.cpu,
            ram: self.ram + other.ram,
            storage: self.storage + other.storage,
        }
    }

    pub fn checked_sub(&self, other: &Resources) -> Option<Resources> {
        Some(Resources {
            cpu: self.cpu.checked_sub(other.cpu)?,
            ram: self.ram.checked_sub(other.ram)?,
            storage: self.storage.checked_sub(other.storage)?,
        })
    }
}

/// Kind-specific requirements of an application component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSpec {
    Compute {
        /// CPU cores.
        cpu: u32,
        /// Memory in GB.
        ram: u32,
        /// Container image size in MB.
        image_size: u32,
        /// Number of identical instances to place.
        #[serde(default = "default_instances")]
        instances: u32,
    },
    Storage {
        /// Allocated partition size in GB.
        storage_size: u32,
    },
}

fn default_instances() -> u32 {
    1
}

impl ComponentSpec {
    pub fn is_compute(&self) -> bool {
        matches!(self, ComponentSpec::Compute { .. })
    }

    pub fn instances(&self) -> u32 {
        match self {
            ComponentSpec::Compute { instances, .. } => *instances,
            ComponentSpec::Storage { .. } => 1,
        }
    }
}

/// One microservice or storage component of an application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    #[serde(flatten)]
    pub spec: ComponentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

/// Per-application QoS priority weights. At least one weight must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector {
    pub latency: Scalar,
    pub price: Scalar,
    pub bandwidth: Scalar,
    pub energy: Scalar,
}

impl PriorityVector {
    pub fn new(latency: Scalar, price: Scalar, bandwidth: Scalar, energy: Scalar) -> Self {
        Self {
            latency,
            price,
            bandwidth,
            energy,
        }
    }

    pub fn equal() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0)
    }

    /// Weights in canonical attribute order: latency, price, bandwidth, energy.
    pub fn as_array(&self) -> [Scalar; 4] {
        [self.latency, self.price, self.bandwidth, self.energy]
    }

    fn violations(&self, out: &mut Vec<String>) {
        for (name, w) in [
            ("latency", self.latency),
            ("price", self.price),
            ("bandwidth", self.bandwidth),
            ("energy", self.energy),
        ] {
            if !w.is_finite() || w < 0.0 {
                out.push(format!("priority {name} must be a finite weight >= 0"));
            }
        }
        if self.as_array().iter().all(|w| *w <= 0.0) {
            out.push("at least one priority weight must be > 0".to_string());
        }
    }
}

/// A submitted workload: an ordered list of components plus QoS priorities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub id: String,
    pub components: Vec<Component>,
    pub priorities: PriorityVector,
    /// Submission instant in simulation seconds.
    #[serde(default)]
    pub submit_time: Scalar,
}

/// Permissive component document as read from an application descriptor file.
/// All fields optional so validation can report every violation at once.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComponentDoc {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ram: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_size: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

/// Permissive application document as read from a descriptor file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ApplicationDoc {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub components: Vec<ComponentDoc>,
    #[serde(default)]
    pub priorities: Option<PriorityVector>,
    #[serde(default)]
    pub submit_time: Option<Scalar>,
}

impl From<&Application> for ApplicationDoc {
    fn from(app: &Application) -> Self {
        ApplicationDoc {
            id: Some(app.id.clone()),
            components: app
                .components
                .iter()
                .map(|c| {
                    let mut doc = ComponentDoc {
                        id: Some(c.id.clone()),
                        provider: c.provider.clone(),
                        location: c.location.clone(),
                        ..ComponentDoc::default()
                    };
                    match c.spec {
                        ComponentSpec::Compute {
                            cpu,
                            ram,
                            image_size,
                            instances,
                        } => {
                            doc.kind = Some("compute".to_string());
                            doc.cpu = Some(cpu as i64);
                            doc.ram = Some(ram as i64);
                            doc.image_size = Some(image_size as i64);
                            doc.instances = Some(instances as i64);
                        }
                        ComponentSpec::Storage { storage_size } => {
                            doc.kind = Some("storage".to_string());
                            doc.storage_size = Some(storage_size as i64);
                        }
                    }
                    doc
                })
                .collect(),
            priorities: Some(app.priorities),
            submit_time: Some(app.submit_time),
        }
    }
}

/// Validates a parsed application document, returning a well-formed
/// [`Application`] or an error listing every violated field.
pub fn validate_application(doc: &ApplicationDoc) -> Result<Application> {
    let mut violations = Vec::new();
    let app_id = match &doc.id {
        Some(id) if !id.is_empty() => id.clone(),
        _ => {
            violations.push("application id is mandatory".to_string());
            String::new()
        }
    };

    if doc.components.is_empty() {
        violations.push("application must contain at least one component".to_string());
    }

    let mut seen = BTreeMap::new();
    let mut components = Vec::with_capacity(doc.components.len());
    for (idx, comp) in doc.components.iter().enumerate() {
        let label = comp
            .id
            .clone()
            .unwrap_or_else(|| format!("component #{idx}"));
        if let Some(id) = &comp.id {
            if *seen.entry(id.clone()).or_insert(0u32) == 1 {
                violations.push(format!("duplicate component id {id}"));
            }
            *seen.get_mut(id).unwrap() += 1;
        } else {
            violations.push(format!("{label}: id is mandatory"));
        }

        match comp.kind.as_deref() {
            Some("compute") => {
                let mut field = |name: &str, value: Option<i64>| -> u32 {
                    match value {
                        Some(v) if v >= 1 => v as u32,
                        Some(_) => {
                            violations.push(format!("{label}: {name} >= 1 violated"));
                            0
                        }
                        None => {
                            violations.push(format!("{label}: {name} is mandatory for compute"));
                            0
                        }
                    }
                };
                let cpu = field("cpu", comp.cpu);
                let ram = field("ram", comp.ram);
                let image_size = field("image_size", comp.image_size);
                let instances = match comp.instances {
                    None => 1,
                    Some(v) if v >= 1 => v as u32,
                    Some(_) => {
                        violations.push(format!("{label}: instances >= 1 violated"));
                        0
                    }
                };
                if comp.storage_size.is_some() {
                    violations.push(format!("{label}: compute carries no storage_size"));
                }
                components.push(Component {
                    id: comp.id.clone().unwrap_or(label),
                    spec: ComponentSpec::Compute {
                        cpu,
                        ram,
                        image_size,
                        instances,
                    },
                    provider: comp.provider.clone(),
                    location: comp.location.clone(),
                });
            }
            Some("storage") => {
                let storage_size = match comp.storage_size {
                    Some(v) if v >= 1 => v as u32,
                    Some(_) => {
                        violations.push(format!("{label}: storage_size >= 1 violated"));
                        0
                    }
                    None => {
                        violations.push(format!("{label}: storage_size is mandatory for storage"));
                        0
                    }
                };
                for (name, present) in [
                    ("cpu", comp.cpu.is_some()),
                    ("ram", comp.ram.is_some()),
                    ("image_size", comp.image_size.is_some()),
                    ("instances", comp.instances.is_some()),
                ] {
                    if present {
                        violations.push(format!("{label}: storage carries no {name}"));
                    }
                }
                components.push(Component {
                    id: comp.id.clone().unwrap_or(label),
                    spec: ComponentSpec::Storage { storage_size },
                    provider: comp.provider.clone(),
                    location: comp.location.clone(),
                });
            }
            Some(other) => violations.push(format!("{label}: unknown component kind {other}")),
            None => violations.push(format!("{label}: kind is mandatory")),
        }
    }

    let priorities = match doc.priorities {
        Some(p) => {
            p.violations(&mut violations);
            p
        }
        None => {
            violations.push("priorities are mandatory".to_string());
            PriorityVector::equal()
        }
    };

    let submit_time = doc.submit_time.unwrap_or(0.0);
    if !submit_time.is_finite() || submit_time < 0.0 {
        violations.push("submit_time must be finite and >= 0".to_string());
    }

    if violations.is_empty() {
        Ok(Application {
            id: app_id,
            components,
            priorities,
            submit_time,
        })
    } else {
        Err(Error::validation(
            format!("application {}", doc.id.as_deref().unwrap_or("<unnamed>")),
            violations,
        ))
    }
}

/// A provider node's offerable resource pool with network, power, price, and
/// reliability attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub id: String,
    pub provider: String,
    pub location: String,
    pub cpu_total: u32,
    pub ram_total: u32,
    pub storage_total: u32,
    /// Power draw at zero utilisation, watts.
    pub idle_power: Scalar,
    /// Power draw at full utilisation, watts.
    pub max_power: Scalar,
    /// One-way network latency, milliseconds.
    pub latency: Scalar,
    /// Link bandwidth, Mbps.
    pub bandwidth: Scalar,
    /// Pay-as-you-go rate, EUR per hour.
    pub price_per_hour: Scalar,
    /// Expected fulfilment of advertised performance, in [0, 1].
    pub reliability: Scalar,
}

impl Capacity {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.id.is_empty() {
            violations.push("id is mandatory".to_string());
        }
        if self.cpu_total == 0 || self.ram_total == 0 || self.storage_total == 0 {
            violations.push("all resource totals must be > 0".to_string());
        }
        if !(self.idle_power.is_finite() && self.max_power.is_finite())
            || self.idle_power <= 0.0
            || self.idle_power >= self.max_power
        {
            violations.push("idle_power must satisfy 0 < idle_power < max_power".to_string());
        }
        if !self.latency.is_finite() || self.latency < 0.0 {
            violations.push("latency must be finite and >= 0".to_string());
        }
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 {
            violations.push("bandwidth must be > 0".to_string());
        }
        if !self.price_per_hour.is_finite() || self.price_per_hour < 0.0 {
            violations.push("price_per_hour must be finite and >= 0".to_string());
        }
        if !self.reliability.is_finite() || !(0.0..=1.0).contains(&self.reliability) {
            violations.push("reliability must lie in [0, 1]".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(
                format!("capacity {}", self.id),
                violations,
            ))
        }
    }
}

/// Lifecycle state of a capacity slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceState {
    Free,
    Reserved,
    Assigned,
    Allocated,
}

impl SliceState {
    /// Legal transitions: free->reserved, reserved->free, reserved->assigned,
    /// assigned->allocated. Allocated is terminal within a scenario.
    pub fn can_transition(from: SliceState, to: SliceState) -> bool {
        use SliceState::*;
        matches!(
            (from, to),
            (Free, Reserved) | (Reserved, Free) | (Reserved, Assigned) | (Assigned, Allocated)
        )
    }
}

/// The placement unit a slice is bound to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundComponent {
    pub application_id: String,
    pub component_id: String,
    pub instance: u32,
}

/// A carved sub-portion of a capacity bound to one placement unit.
/// Slices in the free state are not materialised; their resources live in the
/// capacity's free pool, so every stored slice carries its binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacitySlice {
    pub resources: Resources,
    pub state: SliceState,
    pub bound: BoundComponent,
}

/// Identifier of a slice within its capacity.
pub type SliceId = u64;

/// A capacity registered with the simulation: the static descriptor plus the
/// live slice bookkeeping. Registration deducts the agent footprint
/// (1 CPU core, 1 GB RAM) from the offerable pool.
#[derive(Debug, Clone)]
pub struct RegisteredCapacity {
    pub spec: Capacity,
    /// Pool offered to applications: totals minus the agent footprint.
    pub offerable: Resources,
    /// Currently unbound portion of the offerable pool.
    pub free: Resources,
    slices: BTreeMap<SliceId, CapacitySlice>,
    next_slice_id: SliceId,
}

pub const AGENT_FOOTPRINT_CPU: u32 = 1;
pub const AGENT_FOOTPRINT_RAM: u32 = 1;

impl RegisteredCapacity {
    pub fn register(spec: Capacity) -> Result<Self> {
        spec.validate()?;
        let offerable = Resources {
            cpu: spec.cpu_total - AGENT_FOOTPRINT_CPU,
            ram: spec.ram_total - AGENT_FOOTPRINT_RAM,
            storage: spec.storage_total,
        };
        Ok(Self {
            spec,
            offerable,
            free: offerable,
            slices: BTreeMap::new(),
            next_slice_id: 0,
        })
    }

    pub fn slices(&self) -> impl Iterator<Item = (&SliceId, &CapacitySlice)> {
        self.slices.iter()
    }

    pub fn slice(&self, id: SliceId) -> Option<&CapacitySlice> {
        self.slices.get(&id)
    }

    /// Carves a reserved slice out of the free pool (free -> reserved).
    pub fn reserve(&mut self, resources: Resources, bound: BoundComponent) -> Result<SliceId> {
        let remaining = self.free.checked_sub(&resources).ok_or_else(|| {
            Error::Domain(format!(
                "capacity {} cannot reserve {:?}: free pool {:?}",
                self.spec.id, resources, self.free
            ))
        })?;
        self.free = remaining;
        let id = self.next_slice_id;
        self.next_slice_id += 1;
        self.slices.insert(
            id,
            CapacitySlice {
                resources,
                state: SliceState::Reserved,
                bound,
            },
        );
        Ok(id)
    }

    /// Transitions a slice to a new state, enforcing the legal transition set.
    /// A transition to free merges the slice back into the free pool; any
    /// illegal request errors and leaves the slice unchanged.
    pub fn transition(&mut self, id: SliceId, to: SliceState) -> Result<()> {
        let slice = self.slices.get(&id).ok_or(Error::UnknownSlice {
            capacity: self.spec.id.clone(),
            slice_id: id,
        })?;
        if !SliceState::can_transition(slice.state, to) {
            return Err(Error::IllegalTransition {
                capacity: self.spec.id.clone(),
                from: slice.state,
                to,
            });
        }
        if to == SliceState::Free {
            let slice = self.slices.remove(&id).unwrap();
            self.free = self.free.checked_add(&slice.resources);
        } else {
            self.slices.get_mut(&id).unwrap().state = to;
        }
        Ok(())
    }

    /// Releases a reserved slice back to the free pool (reserved -> free).
    pub fn release(&mut self, id: SliceId) -> Result<()> {
        self.transition(id, SliceState::Free)
    }

    /// Conservation check: free pool plus all carved slices must equal the
    /// registered offerable total in every dimension.
    pub fn balanced(&self) -> bool {
        let mut sum = self.free;
        for slice in self.slices.values() {
            sum = sum.checked_add(&slice.resources);
        }
        sum == self.offerable
    }

    pub fn count_in_state(&self, state: SliceState) -> usize {
        self.slices.values().filter(|s| s.state == state).count()
    }
}

/// First-fit sort direction of a resource agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDirection {
    Ascending,
    Descending,
}

/// Lightweight agent bound to exactly one capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceAgent {
    pub id: String,
    pub capacity_id: String,
    pub sort_direction: SortDirection,
}

/// Assigns one agent per capacity with half the population sorting ascending
/// and half descending (odd populations round in favour of ascending). Which
/// capacities get which direction is drawn from the given generator.
pub fn assign_agents(capacities: &[Capacity], rng: &mut impl rand::Rng) -> Vec<ResourceAgent> {
    use rand::seq::SliceRandom;
    let n = capacities.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let ascending_count = n.div_ceil(2);
    let mut directions = vec![SortDirection::Descending; n];
    for &idx in order.iter().take(ascending_count) {
        directions[idx] = SortDirection::Ascending;
    }
    capacities
        .iter()
        .zip(directions)
        .map(|(cap, dir)| ResourceAgent {
            id: format!("ra-{}", cap.id),
            capacity_id: cap.id.clone(),
            sort_direction: dir,
        })
        .collect()
}

/// Aggregated QoS attributes of an offer: latency ms, price EUR/h,
/// bandwidth Mbps, energy W (max-power proxy).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QosVector {
    pub latency: Scalar,
    pub price: Scalar,
    pub bandwidth: Scalar,
    pub energy: Scalar,
}

impl QosVector {
    /// Values in canonical attribute order: latency, price, bandwidth, energy.
    pub fn as_array(&self) -> [Scalar; 4] {
        [self.latency, self.price, self.bandwidth, self.energy]
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Infrastructure tier of a capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Cloud,
    Edge,
}

/// Min/max bounds used for tier classification, one interval per resource
/// dimension. Bounds must be strictly ordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierBounds {
    pub cpu: (u32, u32),
    pub ram: (u32, u32),
    pub storage: (u32, u32),
}

impl Default for TierBounds {
    fn default() -> Self {
        Self {
            cpu: (16, 100),
            ram: (16, 100),
            storage: (16, 100),
        }
    }
}

impl TierBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("cpu", self.cpu),
            ("ram", self.ram),
            ("storage", self.storage),
        ] {
            if lo >= hi {
                return Err(Error::Domain(format!(
                    "tier bounds for {name} must satisfy min < max (got {lo}..{hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Classifies a capacity as cloud or edge: the mean of the min-max-normalised
/// resource totals decides, with values >= 0.5 counting as cloud.
pub fn classify_tier(capacity: &Capacity, bounds: &TierBounds) -> Result<Tier> {
    bounds.validate()?;
    let dims = [
        ("cpu_total", capacity.cpu_total, bounds.cpu),
        ("ram_total", capacity.ram_total, bounds.ram),
        ("storage_total", capacity.storage_total, bounds.storage),
    ];
    let mut sum = 0.0;
    for (name, value, (lo, hi)) in dims {
        if value < lo || value > hi {
            return Err(Error::TierOutOfBounds {
                capacity: capacity.id.clone(),
                detail: format!("{name}={value} outside [{lo}, {hi}]"),
            });
        }
        sum += (value - lo) as Scalar / (hi - lo) as Scalar;
    }
    if sum / 3.0 >= 0.5 {
        Ok(Tier::Cloud)
    } else {
        Ok(Tier::Edge)
    }
}
