//! Scenario descriptors: loading and saving the infrastructure and
//! application files, random scenario generation from interval-based
//! parameter ranges, and the priority-profile presets.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_application, Application, ApplicationDoc, Capacity, ComponentDoc, PriorityVector,
};
use crate::rng::{substream, STREAM_SCENARIO};
use crate::Scalar;

/// A fully loaded and validated simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub capacities: Vec<Capacity>,
    pub applications: Vec<Application>,
    /// Default run seed carried by the infrastructure descriptor.
    pub seed: u64,
    /// Capacities whose offers fail availability confirmation at winner
    /// selection, exercising the next-ranked fallback.
    pub unavailable_capacities: BTreeSet<String>,
    pub registry_bandwidth: Scalar,
    pub registry_latency: Scalar,
}

fn default_registry_bandwidth() -> Scalar {
    1000.0
}

/// Infrastructure descriptor file: the capacity records plus the global seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfrastructureDoc {
    pub seed: u64,
    pub capacities: Vec<Capacity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unavailable_capacities: Vec<String>,
    #[serde(default = "default_registry_bandwidth")]
    pub registry_bandwidth: Scalar,
    #[serde(default)]
    pub registry_latency: Scalar,
}

/// Applications descriptor file: a scenario-level list of applications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplicationsDoc {
    pub applications: Vec<ApplicationDoc>,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
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

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(infra_path: &Path, apps_path: &Path) -> Result<Scenario> {
    let infra: InfrastructureDoc = parse(infra_path, &read_file(infra_path)?)?;
    let apps: ApplicationsDoc = parse(apps_path, &read_file(apps_path)?)?;
    scenario_from_docs(infra, apps)
}

pub fn scenario_from_docs(infra: InfrastructureDoc, apps: ApplicationsDoc) -> Result<Scenario> {
    let mut violations = Vec::new();
    if infra.capacities.is_empty() {
        violations.push("at least one capacity is required".to_string());
    }
    let mut ids = BTreeSet::new();
    for cap in &infra.capacities {
        cap.validate()?;
        if !ids.insert(cap.id.clone()) {
            violations.push(format!("duplicate capacity id {}", cap.id));
        }
    }
    for id in &infra.unavailable_capacities {
        if !ids.contains(id) {
            violations.push(format!("unavailable capacity {id} is not defined"));
        }
    }
    if !(infra.registry_bandwidth.is_finite() && infra.registry_bandwidth > 0.0) {
        violations.push("registry_bandwidth must be > 0".to_string());
    }
    if !(infra.registry_latency.is_finite() && infra.registry_latency >= 0.0) {
        violations.push("registry_latency must be >= 0".to_string());
    }
    if !violations.is_empty() {
        return Err(Error::validation("infrastructure", violations));
    }

    let mut applications = Vec::with_capacity(apps.applications.len());
    let mut app_ids = BTreeSet::new();
    for doc in &apps.applications {
        let app = validate_application(doc)?;
        if !app_ids.insert(app.id.clone()) {
            return Err(Error::validation(
                "applications",
                vec![format!("duplicate application id {}", app.id)],
            ));
        }
        applications.push(app);
    }
    if applications.is_empty() {
        return Err(Error::validation(
            "applications",
            vec!["at least one application is required".to_string()],
        ));
    }

    Ok(Scenario {
        capacities: infra.capacities,
        applications,
        seed: infra.seed,
        unavailable_capacities: infra.unavailable_capacities.into_iter().collect(),
        registry_bandwidth: infra.registry_bandwidth,
        registry_latency: infra.registry_latency,
    })
}

impl Scenario {
    pub fn infrastructure_doc(&self) -> InfrastructureDoc {
        InfrastructureDoc {
            seed: self.seed,
            capacities: self.capacities.clone(),
            unavailable_capacities: self.unavailable_capacities.iter().cloned().collect(),
            registry_bandwidth: self.registry_bandwidth,
            registry_latency: self.registry_latency,
        }
    }

    pub fn applications_doc(&self) -> ApplicationsDoc {
        ApplicationsDoc {
            applications: self.applications.iter().map(ApplicationDoc::from).collect(),
        }
    }

    /// Writes the two descriptor files; byte-identical for identical content.
    pub fn save(&self, infra_path: &Path, apps_path: &Path) -> Result<()> {
        let infra = serde_json::to_string_pretty(&self.infrastructure_doc()).expect("serialises");
        let apps = serde_json::to_string_pretty(&self.applications_doc()).expect("serialises");
        write_file(infra_path, &(infra + "\n"))?;
        write_file(apps_path, &(apps + "\n"))
    }
}

/// How many applications and capacities to generate.
#[derive(Debug, Clone, Copy)]
pub struct GenCounts {
    pub applications: u32,
    pub capacities: u32,
}

impl Default for GenCounts {
    fn default() -> Self {
        Self {
            applications: 6,
            capacities: 8,
        }
    }
}

/// Interval-based generation parameters. Integer fields draw uniform
/// integers, power/price/latency/bandwidth draw uniform reals.
#[derive(Debug, Clone)]
pub struct GenRanges {
    pub compute_components: u32,
    pub storage_components: u32,
    pub cpu: (u32, u32),
    pub ram: (u32, u32),
    pub storage: (u32, u32),
    pub image_size: (u32, u32),
    pub instances: (u32, u32),
    pub cap_cpu: (u32, u32),
    pub cap_ram: (u32, u32),
    pub cap_storage: (u32, u32),
    pub idle_power: (Scalar, Scalar),
    pub max_power: (Scalar, Scalar),
    pub latency: (Scalar, Scalar),
    pub bandwidth: (Scalar, Scalar),
    pub price: (Scalar, Scalar),
    pub reliability: (Scalar, Scalar),
    pub providers: Vec<String>,
    pub locations: Vec<String>,
}

impl Default for GenRanges {
    fn default() -> Self {
        Self {
            compute_components: 3,
            storage_components: 1,
            cpu: (1, 6),
            ram: (1, 6),
            storage: (1, 10),
            image_size: (1, 500),
            instances: (1, 3),
            cap_cpu: (16, 100),
            cap_ram: (16, 100),
            cap_storage: (16, 100),
            idle_power: (150.0, 225.0),
            max_power: (500.0, 3500.0),
            latency: (15.0, 100.0),
            bandwidth: (50.0, 1200.0),
            price: (0.025, 25.0),
            reliability: (0.5, 1.0),
            providers: vec!["AWS".to_string(), "Azure".to_string()],
            locations: vec!["EU".to_string(), "US".to_string()],
        }
    }
}

impl GenRanges {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (name, (lo, hi)) in [
            ("cpu", self.cpu),
            ("ram", self.ram),
            ("storage", self.storage),
            ("image_size", self.image_size),
            ("instances", self.instances),
            ("cap_cpu", self.cap_cpu),
            ("cap_ram", self.cap_ram),
            ("cap_storage", self.cap_storage),
        ] {
            if lo > hi {
                violations.push(format!("range {name}: min {lo} > max {hi}"));
            }
        }
        for (name, (lo, hi)) in [
            ("idle_power", self.idle_power),
            ("max_power", self.max_power),
            ("latency", self.latency),
            ("bandwidth", self.bandwidth),
            ("price", self.price),
            ("reliability", self.reliability),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                violations.push(format!("range {name}: min {lo} > max {hi}"));
            }
        }
        if self.providers.is_empty() || self.locations.is_empty() {
            violations.push("providers and locations must be non-empty".to_string());
        }
        if self.compute_components + self.storage_components == 0 {
            violations.push("at least one component per application".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::validation("generation ranges", violations))
        }
    }
}

fn draw_int(rng: &mut impl Rng, (lo, hi): (u32, u32)) -> u32 {
    rng.gen_range(lo..=hi)
}

fn draw_real(rng: &mut impl Rng, (lo, hi): (Scalar, Scalar)) -> Scalar {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Generates a scenario with every field drawn uniformly from its configured
/// interval. All applications are submitted simultaneously at t = 0.
pub fn generate_random_scenario(
    seed: u64,
    counts: &GenCounts,
    ranges: &GenRanges,
) -> Result<Scenario> {
    ranges.validate()?;
    if counts.applications == 0 || counts.capacities == 0 {
        return Err(Error::validation(
            "generation counts",
            vec!["counts must be >= 1".to_string()],
        ));
    }
    let mut rng = substream(seed, STREAM_SCENARIO);

    let mut applications = Vec::new();
    for a in 1..=counts.applications {
        let mut components = Vec::new();
        for c in 1..=ranges.compute_components {
            components.push(ComponentDoc {
                id: Some(format!("c{c}")),
                kind: Some("compute".to_string()),
                cpu: Some(draw_int(&mut rng, ranges.cpu) as i64),
                ram: Some(draw_int(&mut rng, ranges.ram) as i64),
                image_size: Some(draw_int(&mut rng, ranges.image_size) as i64),
                instances: Some(draw_int(&mut rng, ranges.instances) as i64),
                ..ComponentDoc::default()
            });
        }
        for s in 1..=ranges.storage_components {
            components.push(ComponentDoc {
                id: Some(format!("s{s}")),
                kind: Some("storage".to_string()),
                storage_size: Some(draw_int(&mut rng, ranges.storage) as i64),
                ..ComponentDoc::default()
            });
        }
        let doc = ApplicationDoc {
            id: Some(format!("app{a}")),
            components,
            priorities: Some(PriorityVector::equal()),
            submit_time: Some(0.0),
        };
        applications.push(validate_application(&doc)?);
    }

    let mut capacities = Vec::new();
    for n in 1..=counts.capacities {
        let provider = ranges.providers[rng.gen_range(0..ranges.providers.len())].clone();
        let location = ranges.locations[rng.gen_range(0..ranges.locations.len())].clone();
        let cap = Capacity {
            id: format!("cap{n}"),
            provider,
            location,
            cpu_total: draw_int(&mut rng, ranges.cap_cpu),
            ram_total: draw_int(&mut rng, ranges.cap_ram),
            storage_total: draw_int(&mut rng, ranges.cap_storage),
            idle_power: draw_real(&mut rng, ranges.idle_power),
            max_power: draw_real(&mut rng, ranges.max_power),
            latency: draw_real(&mut rng, ranges.latency),
            bandwidth: draw_real(&mut rng, ranges.bandwidth),
            price_per_hour: draw_real(&mut rng, ranges.price),
            reliability: draw_real(&mut rng, ranges.reliability),
        };
        cap.validate()?;
        capacities.push(cap);
    }

    Ok(Scenario {
        capacities,
        applications,
        seed,
        unavailable_capacities: BTreeSet::new(),
        registry_bandwidth: 1000.0,
        registry_latency: 0.0,
    })
}

/// Expands a named priority preset. The single-attribute presets weight that
/// attribute 1.0 and the others 0.1; "equal" weights everything 1.0.
pub fn priority_preset(name: &str) -> Option<PriorityVector> {
    match name {
        "latency" => Some(PriorityVector::new(1.0, 0.1, 0.1, 0.1)),
        "price" => Some(PriorityVector::new(0.1, 1.0, 0.1, 0.1)),
        "bandwidth" => Some(PriorityVector::new(0.1, 0.1, 1.0, 0.1)),
        "energy" => Some(PriorityVector::new(0.1, 0.1, 0.1, 1.0)),
        "equal" => Some(PriorityVector::equal()),
        _ => None,
    }
}

/// Parses a priority profile: a preset name, "random", or an explicit
/// latency:price:bandwidth:energy weight vector.
pub fn parse_priority_profile(profile: &str) -> Result<PriorityVector> {
    if profile == "random" {
        // priorities are ignored by the random method
        return Ok(PriorityVector::equal());
    }
    if let Some(p) = priority_preset(profile) {
        return Ok(p);
    }
    let parts: Vec<&str> = profile.split(':').collect();
    if parts.len() == 4 {
        let mut weights = [0.0; 4];
        for (w, part) in weights.iter_mut().zip(&parts) {
            *w = part.parse::<Scalar>().map_err(|_| {
                Error::validation(
                    "strategy",
                    vec![format!("invalid priority weight {part} in {profile}")],
                )
            })?;
        }
        let p = PriorityVector::new(weights[0], weights[1], weights[2], weights[3]);
        if p.as_array().iter().any(|w| !w.is_finite() || *w < 0.0)
            || p.as_array().iter().all(|w| *w <= 0.0)
        {
            return Err(Error::validation(
                "strategy",
                vec![format!(
                    "priority vector {profile} needs finite weights >= 0, one > 0"
                )],
            ));
        }
        return Ok(p);
    }
    Err(Error::validation(
        "strategy",
        vec![format!(
            "unknown priority profile {profile}; use a preset, random, or w:w:w:w"
        )],
    ))
}
