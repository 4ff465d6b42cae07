//! Offer-collection protocol: gateway selection, first-fit matchmaking with
//! reservation, coverage classification, combination generation, and QoS
//! aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Application, BoundComponent, ComponentSpec, QosVector, RegisteredCapacity, ResourceAgent,
    Resources, SliceId, SortDirection,
};
use crate::Scalar;

/// Broadcast request and response message size (2 KB) in MB.
pub const MESSAGE_SIZE_MB: Scalar = 0.002;

/// Resource demand of one placement unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitDemand {
    Compute { cpu: u32, ram: u32 },
    Storage { storage: u32 },
}

impl UnitDemand {
    pub fn cpu(&self) -> u32 {
        match self {
            UnitDemand::Compute { cpu, .. } => *cpu,
            UnitDemand::Storage { .. } => 0,
        }
    }

    pub fn resources(&self) -> Resources {
        match *self {
            UnitDemand::Compute { cpu, ram } => Resources::new(cpu, ram, 0),
            UnitDemand::Storage { storage } => Resources::new(0, 0, storage),
        }
    }
}

/// One instance of a compute component (or one storage component) after
/// instance expansion: the atomic matchmaking item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementUnit {
    pub component_id: String,
    pub instance: u32,
    pub demand: UnitDemand,
    pub provider: Option<String>,
    pub location: Option<String>,
    /// Image size in MB; compute units only.
    pub image_size: Option<u32>,
}

/// Expands an application's components into placement units: a compute
/// component with k instances yields k units sharing its requirements.
pub fn expand_units(app: &Application) -> Vec<PlacementUnit> {
    let mut units = Vec::new();
    for comp in &app.components {
        match comp.spec {
            ComponentSpec::Compute {
                cpu,
                ram,
                image_size,
                instances,
            } => {
                for instance in 0..instances {
                    units.push(PlacementUnit {
                        component_id: comp.id.clone(),
                        instance,
                        demand: UnitDemand::Compute { cpu, ram },
                        provider: comp.provider.clone(),
                        location: comp.location.clone(),
                        image_size: Some(image_size),
                    });
                }
            }
            ComponentSpec::Storage { storage_size } => {
                units.push(PlacementUnit {
                    component_id: comp.id.clone(),
                    instance: 0,
                    demand: UnitDemand::Storage {
                        storage: storage_size,
                    },
                    provider: comp.provider.clone(),
                    location: comp.location.clone(),
                    image_size: None,
                });
            }
        }
    }
    units
}

/// Reference to a reserved slice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SliceRef {
    pub capacity_id: String,
    pub slice_id: SliceId,
}

/// An agent's offer to host one placement unit on a reserved slice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OfferPair {
    pub agent_id: String,
    pub component_id: String,
    pub instance: u32,
    pub slice: SliceRef,
}

/// Coverage of an agent's response relative to the application's units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Full,
    Partial,
    Zero,
}

/// A set of offer pairs covering every placement unit exactly once, plus the
/// aggregated QoS vector and reliability of the participating capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferCombination {
    pub pairs: Vec<OfferPair>,
    pub qos: QosVector,
    pub reliability: Scalar,
}

impl OfferCombination {
    /// Distinct capacities participating in this combination.
    pub fn capacity_ids(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .map(|p| p.slice.capacity_id.as_str())
            .collect()
    }
}

/// Draws the gateway agent managing a deployment round uniformly at random.
pub fn select_gateway(agents: &[ResourceAgent], rng: &mut impl rand::Rng) -> Result<usize> {
    if agents.is_empty() {
        return Err(Error::EmptyInput("select_gateway"));
    }
    Ok(rng.gen_range(0..agents.len()))
}

fn unit_admissible(unit: &PlacementUnit, capacity: &RegisteredCapacity) -> bool {
    let provider_ok = unit
        .provider
        .as_deref()
        .is_none_or(|p| p == capacity.spec.provider);
    let location_ok = unit
        .location
        .as_deref()
        .is_none_or(|l| l == capacity.spec.location);
    provider_ok && location_ok
}

/// First-fit matchmaking of an application's placement units against one
/// agent's capacity. Units are sorted by CPU requirement in the agent's
/// direction (storage units sort with cpu = 0, ties by component id then
/// instance); each unit that fits reserves a slice. A multi-instance
/// component is all-or-nothing: if any instance fails, the component's
/// reservations are rolled back. An empty result is a valid zero-coverage
/// response.
pub fn first_fit_match(
    agent: &ResourceAgent,
    app_id: &str,
    units: &[PlacementUnit],
    capacity: &mut RegisteredCapacity,
) -> Vec<OfferPair> {
    let mut order: Vec<&PlacementUnit> = units.iter().collect();
    order.sort_by(|a, b| {
        let key = a.demand.cpu().cmp(&b.demand.cpu());
        let key = match agent.sort_direction {
            SortDirection::Ascending => key,
            SortDirection::Descending => key.reverse(),
        };
        key.then_with(|| a.component_id.cmp(&b.component_id))
            .then_with(|| a.instance.cmp(&b.instance))
    });

    let mut pairs = Vec::new();
    let mut idx = 0;
    while idx < order.len() {
        let component_id = order[idx].component_id.clone();
        let group_end = order[idx..]
            .iter()
            .position(|u| u.component_id != component_id)
            .map_or(order.len(), |off| idx + off);

        let mut reserved: Vec<(SliceId, &PlacementUnit)> = Vec::new();
        let mut complete = true;
        for unit in &order[idx..group_end] {
            if !unit_admissible(unit, capacity) {
                complete = false;
                break;
            }
            let bound = BoundComponent {
                application_id: app_id.to_string(),
                component_id: unit.component_id.clone(),
                instance: unit.instance,
            };
            match capacity.reserve(unit.demand.resources(), bound) {
                Ok(id) => reserved.push((id, unit)),
                Err(_) => {
                    complete = false;
                    break;
                }
            }
        }

        if complete {
            for (slice_id, unit) in reserved {
                pairs.push(OfferPair {
                    agent_id: agent.id.clone(),
                    component_id: unit.component_id.clone(),
                    instance: unit.instance,
                    slice: SliceRef {
                        capacity_id: capacity.spec.id.clone(),
                        slice_id,
                    },
                });
            }
        } else {
            for (slice_id, _) in reserved {
                capacity
                    .release(slice_id)
                    .expect("rollback of a fresh reservation");
            }
        }
        idx = group_end;
    }
    pairs
}

/// Classifies a response: full when every unit is covered, zero when empty,
/// partial otherwise. A pair referencing an unknown unit is an error.
pub fn classify_coverage(
    app_id: &str,
    response: &[OfferPair],
    units: &[PlacementUnit],
) -> Result<Coverage> {
    let known: BTreeSet<(&str, u32)> = units
        .iter()
        .map(|u| (u.component_id.as_str(), u.instance))
        .collect();
    let mut covered = BTreeSet::new();
    for pair in response {
        let key = (pair.component_id.as_str(), pair.instance);
        if !known.contains(&key) {
            return Err(Error::UnknownUnit {
                application: app_id.to_string(),
                component: pair.component_id.clone(),
                instance: pair.instance,
            });
        }
        covered.insert(key);
    }
    Ok(if covered.len() == known.len() {
        Coverage::Full
    } else if covered.is_empty() {
        Coverage::Zero
    } else {
        Coverage::Partial
    })
}

/// Generates every combination that covers each placement unit exactly once.
///
/// Instances of a component always travel together: the all-or-nothing
/// matchmaking rule means an agent offering a component holds a reserved
/// slice for each of its instances, so a combination picks one offering agent
/// per component and inherits all its instance pairs. The combination count
/// is the product over components of their offering-agent counts; exceeding
/// `guard` is an explicit error rather than unbounded enumeration. An empty
/// list is returned iff some unit has no offer.
pub fn generate_combinations(
    pairs: &[OfferPair],
    units: &[PlacementUnit],
    guard: u64,
) -> Result<Vec<OfferCombination>> {
    // component order follows the application
    let mut component_order: Vec<&str> = Vec::new();
    let mut instances_of: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for unit in units {
        if !instances_of.contains_key(unit.component_id.as_str()) {
            component_order.push(unit.component_id.as_str());
        }
        instances_of
            .entry(unit.component_id.as_str())
            .or_default()
            .insert(unit.instance);
    }

    // (agent, component) -> instance -> pair
    let mut by_agent_component: BTreeMap<(&str, &str), BTreeMap<u32, &OfferPair>> = BTreeMap::new();
    for pair in pairs {
        by_agent_component
            .entry((pair.agent_id.as_str(), pair.component_id.as_str()))
            .or_default()
            .insert(pair.instance, pair);
    }

    // agents offering every instance of a component, in sorted agent order
    let mut offering: Vec<Vec<&str>> = Vec::with_capacity(component_order.len());
    for comp in &component_order {
        let wanted = &instances_of[comp];
        let agents: Vec<&str> = by_agent_component
            .iter()
            .filter(|((_, c), covered)| c == comp && covered.len() == wanted.len())
            .map(|((agent, _), _)| *agent)
            .collect();
        if agents.is_empty() {
            return Ok(Vec::new());
        }
        offering.push(agents);
    }

    let count: u128 = offering.iter().map(|a| a.len() as u128).product();
    if count > guard as u128 {
        return Err(Error::CombinationOverflow { count, guard });
    }

    let mut combos = Vec::with_capacity(count as usize);
    let mut choice = vec![0usize; offering.len()];
    loop {
        let mut combo_pairs = Vec::new();
        for (ci, comp) in component_order.iter().enumerate() {
            let agent = offering[ci][choice[ci]];
            for pair in by_agent_component[&(agent, *comp)].values() {
                combo_pairs.push((*pair).clone());
            }
        }
        combos.push(OfferCombination {
            pairs: combo_pairs,
            qos: QosVector::default(),
            reliability: 0.0,
        });

        // odometer increment
        let mut pos = offering.len();
        loop {
            if pos == 0 {
                return Ok(combos);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < offering[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Sums latency, price, max power, and bandwidth over the distinct capacities
/// participating in a combination. A capacity hosting several pairs counts
/// once.
pub fn aggregate_offer_qos(
    combo: &OfferCombination,
    capacities: &BTreeMap<String, RegisteredCapacity>,
) -> Result<QosVector> {
    let mut qos = QosVector::default();
    for id in combo.capacity_ids() {
        let cap = capacities
            .get(id)
            .ok_or_else(|| Error::UnknownCapacity(id.to_string()))?;
        qos.latency += cap.spec.latency;
        qos.price += cap.spec.price_per_hour;
        qos.energy += cap.spec.max_power;
        qos.bandwidth += cap.spec.bandwidth;
    }
    Ok(qos)
}

/// Arithmetic mean of the distinct participating capacities' reliability.
pub fn offer_reliability(
    combo: &OfferCombination,
    capacities: &BTreeMap<String, RegisteredCapacity>,
) -> Result<Scalar> {
    let ids = combo.capacity_ids();
    if ids.is_empty() {
        return Err(Error::EmptyInput("offer_reliability"));
    }
    let mut sum = 0.0;
    for id in &ids {
        let cap = capacities
            .get(*id)
            .ok_or_else(|| Error::UnknownCapacity(id.to_string()))?;
        sum += cap.spec.reliability;
    }
    Ok(sum / ids.len() as Scalar)
}

/// Returns every losing slice to the free pool. Winning slices are untouched
/// by construction (callers pass only pairs outside the winner).
pub fn release_reservations(
    losing_pairs: &[OfferPair],
    capacities: &mut BTreeMap<String, RegisteredCapacity>,
) -> Result<()> {
    for pair in losing_pairs {
        let cap = capacities
            .get_mut(&pair.slice.capacity_id)
            .ok_or_else(|| Error::UnknownCapacity(pair.slice.capacity_id.clone()))?;
        cap.release(pair.slice.slice_id)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capacity, SliceState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn capacity(id: &str, cpu: u32, ram: u32, storage: u32) -> RegisteredCapacity {
        RegisteredCapacity::register(Capacity {
            id: id.to_string(),
            provider: "AWS".to_string(),
            location: "EU".to_string(),
            // register() deducts the 1 CPU / 1 GB agent footprint
            cpu_total: cpu + 1,
            ram_total: ram + 1,
            storage_total: storage.max(1),
            idle_power: 150.0,
            max_power: 500.0,
            latency: 20.0,
            bandwidth: 200.0,
            price_per_hour: 0.1,
            reliability: 0.9,
        })
        .unwrap()
    }

    fn agent(id: &str, cap: &str, dir: SortDirection) -> ResourceAgent {
        ResourceAgent {
            id: id.to_string(),
            capacity_id: cap.to_string(),
            sort_direction: dir,
        }
    }

    fn compute_unit(comp: &str, instance: u32, cpu: u32, ram: u32) -> PlacementUnit {
        PlacementUnit {
            component_id: comp.to_string(),
            instance,
            demand: UnitDemand::Compute { cpu, ram },
            provider: None,
            location: None,
            image_size: Some(100),
        }
    }

    fn pair(agent: &str, comp: &str, instance: u32) -> OfferPair {
        OfferPair {
            agent_id: agent.to_string(),
            component_id: comp.to_string(),
            instance,
            slice: SliceRef {
                capacity_id: format!("cap-{agent}"),
                slice_id: instance as u64,
            },
        }
    }

    #[test]
    fn gateway_single_agent() {
        let agents = vec![agent("ra1", "cap1", SortDirection::Ascending)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_gateway(&agents, &mut rng).unwrap(), 0);
    }

    #[test]
    fn gateway_empty_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(select_gateway(&[], &mut rng).is_err());
    }

    #[test]
    fn gateway_deterministic_per_seed() {
        let agents: Vec<ResourceAgent> = (0..8)
            .map(|i| {
                agent(
                    &format!("ra{i}"),
                    &format!("cap{i}"),
                    SortDirection::Ascending,
                )
            })
            .collect();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            select_gateway(&agents, &mut rng).unwrap()
        };
        assert_eq!(draw(99), draw(99));
    }

    #[test]
    fn gateway_is_uniform() {
        let agents: Vec<ResourceAgent> = (0..8)
            .map(|i| {
                agent(
                    &format!("ra{i}"),
                    &format!("cap{i}"),
                    SortDirection::Ascending,
                )
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 8];
        for _ in 0..10_000 {
            counts[select_gateway(&agents, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.125).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn first_fit_ascending_reserves_smaller_component() {
        let mut cap = capacity("cap1", 4, 8, 0);
        let units = vec![compute_unit("c1", 0, 2, 2), compute_unit("c2", 0, 3, 3)];
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        let pairs = first_fit_match(&ra, "app1", &units, &mut cap);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].component_id, "c1");
        assert!(cap.balanced());
    }

    #[test]
    fn first_fit_descending_reserves_larger_component() {
        let mut cap = capacity("cap1", 4, 8, 0);
        let units = vec![compute_unit("c1", 0, 2, 2), compute_unit("c2", 0, 3, 3)];
        let ra = agent("ra1", "cap1", SortDirection::Descending);
        let pairs = first_fit_match(&ra, "app1", &units, &mut cap);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].component_id, "c2");
    }

    #[test]
    fn multi_instance_rolls_back_all_or_nothing() {
        let mut cap = capacity("cap1", 4, 16, 0);
        let units = vec![compute_unit("c1", 0, 3, 1), compute_unit("c1", 1, 3, 1)];
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        let pairs = first_fit_match(&ra, "app1", &units, &mut cap);
        assert!(pairs.is_empty());
        assert_eq!(cap.free, cap.offerable);
        assert_eq!(cap.count_in_state(SliceState::Reserved), 0);
    }

    #[test]
    fn storage_units_sort_with_zero_cpu_and_fit_storage_only() {
        let mut cap = capacity("cap1", 2, 2, 10);
        let units = vec![
            compute_unit("c1", 0, 2, 2),
            PlacementUnit {
                component_id: "s1".to_string(),
                instance: 0,
                demand: UnitDemand::Storage { storage: 5 },
                provider: None,
                location: None,
                image_size: None,
            },
        ];
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        let pairs = first_fit_match(&ra, "app1", &units, &mut cap);
        // storage sorts first (cpu 0) and both fit
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].component_id, "s1");
        assert_eq!(cap.free, Resources::new(0, 0, 5));
    }

    #[test]
    fn provider_filter_blocks_mismatched_units() {
        let mut cap = capacity("cap1", 8, 8, 0);
        let mut unit = compute_unit("c1", 0, 1, 1);
        unit.provider = Some("Azure".to_string());
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        assert!(first_fit_match(&ra, "app1", &[unit], &mut cap).is_empty());

        let mut matching = compute_unit("c2", 0, 1, 1);
        matching.provider = Some("AWS".to_string());
        matching.location = Some("EU".to_string());
        assert_eq!(first_fit_match(&ra, "app1", &[matching], &mut cap).len(), 1);
    }

    #[test]
    fn coverage_classification() {
        let units: Vec<PlacementUnit> = (0..4)
            .map(|i| compute_unit(&format!("c{i}"), 0, 1, 1))
            .collect();
        let full: Vec<OfferPair> = (0..4).map(|i| pair("ra1", &format!("c{i}"), 0)).collect();
        assert_eq!(
            classify_coverage("app1", &full, &units).unwrap(),
            Coverage::Full
        );
        assert_eq!(
            classify_coverage("app1", &[], &units).unwrap(),
            Coverage::Zero
        );
        assert_eq!(
            classify_coverage("app1", &full[..2], &units).unwrap(),
            Coverage::Partial
        );
        let unknown = vec![pair("ra1", "nope", 0)];
        assert!(classify_coverage("app1", &unknown, &units).is_err());
    }

    #[test]
    fn combinations_follow_exactly_once_rule() {
        let units = vec![compute_unit("c1", 0, 1, 1), compute_unit("c2", 0, 1, 1)];
        let pairs = vec![
            pair("ra1", "c1", 0),
            pair("ra2", "c1", 0),
            pair("ra1", "c2", 0),
        ];
        let combos = generate_combinations(&pairs, &units, 1_000_000).unwrap();
        assert_eq!(combos.len(), 2);
        for combo in &combos {
            assert_eq!(combo.pairs.len(), 2);
            let comps: BTreeSet<&str> = combo
                .pairs
                .iter()
                .map(|p| p.component_id.as_str())
                .collect();
            assert_eq!(comps.len(), 2);
        }
    }

    #[test]
    fn combinations_empty_when_unit_unoffered() {
        let units = vec![compute_unit("c1", 0, 1, 1), compute_unit("c2", 0, 1, 1)];
        let pairs = vec![pair("ra1", "c1", 0)];
        assert!(generate_combinations(&pairs, &units, 1_000_000)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn combination_count_matches_product_formula() {
        let units: Vec<PlacementUnit> = (0..4)
            .map(|i| compute_unit(&format!("c{i}"), 0, 1, 1))
            .collect();
        let mut pairs = Vec::new();
        for a in 0..3 {
            for c in 0..4 {
                pairs.push(pair(&format!("ra{a}"), &format!("c{c}"), 0));
            }
        }
        let combos = generate_combinations(&pairs, &units, 1_000_000).unwrap();
        assert_eq!(combos.len(), 81);
        // no two combinations are equal as sets
        let sets: BTreeSet<Vec<&OfferPair>> = combos
            .iter()
            .map(|c| {
                let mut v: Vec<&OfferPair> = c.pairs.iter().collect();
                v.sort();
                v
            })
            .collect();
        assert_eq!(sets.len(), combos.len());
    }

    #[test]
    fn combination_guard_overflows_explicitly() {
        let units: Vec<PlacementUnit> = (0..4)
            .map(|i| compute_unit(&format!("c{i}"), 0, 1, 1))
            .collect();
        let mut pairs = Vec::new();
        for a in 0..3 {
            for c in 0..4 {
                pairs.push(pair(&format!("ra{a}"), &format!("c{c}"), 0));
            }
        }
        let err = generate_combinations(&pairs, &units, 80).unwrap_err();
        assert!(matches!(
            err,
            Error::CombinationOverflow {
                count: 81,
                guard: 80
            }
        ));
    }

    #[test]
    fn instances_of_a_component_follow_its_agent() {
        let units = vec![
            compute_unit("c1", 0, 1, 1),
            compute_unit("c1", 1, 1, 1),
            compute_unit("c2", 0, 1, 1),
        ];
        let pairs = vec![
            pair("ra1", "c1", 0),
            pair("ra1", "c1", 1),
            pair("ra2", "c1", 0),
            pair("ra2", "c1", 1),
            pair("ra1", "c2", 0),
        ];
        let combos = generate_combinations(&pairs, &units, 1_000_000).unwrap();
        assert_eq!(combos.len(), 2);
        for combo in &combos {
            assert_eq!(combo.pairs.len(), 3);
            let c1_agents: BTreeSet<&str> = combo
                .pairs
                .iter()
                .filter(|p| p.component_id == "c1")
                .map(|p| p.agent_id.as_str())
                .collect();
            assert_eq!(c1_agents.len(), 1);
        }
    }

    #[test]
    fn agent_offering_only_some_instances_is_excluded() {
        let units = vec![compute_unit("c1", 0, 1, 1), compute_unit("c1", 1, 1, 1)];
        let pairs = vec![
            pair("ra1", "c1", 0),
            pair("ra1", "c1", 1),
            pair("ra2", "c1", 0), // ra2 lacks instance 1
        ];
        let combos = generate_combinations(&pairs, &units, 1_000_000).unwrap();
        assert_eq!(combos.len(), 1);
        assert!(combos[0].pairs.iter().all(|p| p.agent_id == "ra1"));
    }

    fn registry(
        specs: &[(&str, Scalar, Scalar, Scalar, Scalar, Scalar)],
    ) -> BTreeMap<String, RegisteredCapacity> {
        specs
            .iter()
            .map(|(id, lat, price, maxp, bw, rel)| {
                let mut cap = capacity(id, 8, 8, 8);
                cap.spec.latency = *lat;
                cap.spec.price_per_hour = *price;
                cap.spec.max_power = *maxp;
                cap.spec.bandwidth = *bw;
                cap.spec.reliability = *rel;
                (id.to_string(), cap)
            })
            .collect()
    }

    fn combo_on(caps: &[&str]) -> OfferCombination {
        OfferCombination {
            pairs: caps
                .iter()
                .enumerate()
                .map(|(i, cap)| OfferPair {
                    agent_id: format!("ra-{cap}"),
                    component_id: format!("c{i}"),
                    instance: 0,
                    slice: SliceRef {
                        capacity_id: cap.to_string(),
                        slice_id: i as u64,
                    },
                })
                .collect(),
            qos: QosVector::default(),
            reliability: 0.0,
        }
    }

    #[test]
    fn qos_aggregation_sums_distinct_capacities() {
        let caps = registry(&[
            ("cap1", 20.0, 0.1, 500.0, 200.0, 0.8),
            ("cap2", 30.0, 0.2, 1000.0, 100.0, 0.4),
        ]);
        let single = aggregate_offer_qos(&combo_on(&["cap1"]), &caps).unwrap();
        assert_eq!(single.as_array(), [20.0, 0.1, 200.0, 500.0]);

        let both = aggregate_offer_qos(&combo_on(&["cap1", "cap2"]), &caps).unwrap();
        assert_eq!(both.latency, 50.0);
        assert!((both.price - 0.3).abs() < 1e-12);
        assert_eq!(both.energy, 1500.0);
        assert_eq!(both.bandwidth, 300.0);

        // capacity appearing in two pairs counts once
        let repeated = aggregate_offer_qos(&combo_on(&["cap1", "cap1"]), &caps).unwrap();
        assert_eq!(repeated.latency, 20.0);
    }

    #[test]
    fn qos_aggregation_unknown_capacity_errors() {
        let caps = registry(&[("cap1", 20.0, 0.1, 500.0, 200.0, 0.8)]);
        assert!(aggregate_offer_qos(&combo_on(&["nope"]), &caps).is_err());
    }

    #[test]
    fn reliability_is_mean_over_distinct_capacities() {
        let caps = registry(&[
            ("cap1", 20.0, 0.1, 500.0, 200.0, 0.8),
            ("cap2", 30.0, 0.2, 1000.0, 0.4, 0.4),
        ]);
        assert!(
            (offer_reliability(&combo_on(&["cap1", "cap2"]), &caps).unwrap() - 0.6).abs() < 1e-12
        );
        assert!((offer_reliability(&combo_on(&["cap1"]), &caps).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn release_returns_losing_slices_to_free() {
        let mut caps = BTreeMap::new();
        caps.insert("cap1".to_string(), capacity("cap1", 8, 8, 8));
        let cap = caps.get_mut("cap1").unwrap();
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        let units = vec![compute_unit("c1", 0, 2, 2)];
        let pairs = first_fit_match(&ra, "app1", &units, cap);
        assert_eq!(pairs.len(), 1);

        // empty losing set is a no-op
        release_reservations(&[], &mut caps).unwrap();

        release_reservations(&pairs, &mut caps).unwrap();
        let cap = caps.get("cap1").unwrap();
        assert_eq!(cap.free, cap.offerable);

        // releasing an already-released (unknown) slice errors
        assert!(release_reservations(&pairs, &mut caps).is_err());
    }

    #[test]
    fn release_of_allocated_slice_is_a_state_machine_error() {
        let mut caps = BTreeMap::new();
        caps.insert("cap1".to_string(), capacity("cap1", 8, 8, 8));
        let ra = agent("ra1", "cap1", SortDirection::Ascending);
        let units = vec![compute_unit("c1", 0, 2, 2)];
        let pairs = first_fit_match(&ra, "app1", &units, caps.get_mut("cap1").unwrap());
        let slice_id = pairs[0].slice.slice_id;
        {
            let cap = caps.get_mut("cap1").unwrap();
            cap.transition(slice_id, SliceState::Assigned).unwrap();
            cap.transition(slice_id, SliceState::Allocated).unwrap();
        }
        let err = release_reservations(&pairs, &mut caps).unwrap_err();
        assert!(matches!(err, Error::IllegalTransition { .. }));
    }

    proptest::proptest! {
        /// First-fit never over-reserves and always leaves the capacity balanced.
        #[test]
        fn first_fit_conserves_resources(
            cpu in 1u32..32,
            ram in 1u32..32,
            storage in 0u32..32,
            demands in proptest::collection::vec((1u32..8, 1u32..8, 1u32..4), 1..8),
            descending in proptest::bool::ANY,
        ) {
            let mut cap = capacity("cap1", cpu, ram, storage);
            let mut units = Vec::new();
            for (i, (dc, dr, inst)) in demands.iter().enumerate() {
                for k in 0..*inst {
                    units.push(compute_unit(&format!("c{i}"), k, *dc, *dr));
                }
            }
            let dir = if descending { SortDirection::Descending } else { SortDirection::Ascending };
            let ra = agent("ra1", "cap1", dir);
            let pairs = first_fit_match(&ra, "app1", &units, &mut cap);
            proptest::prop_assert!(cap.balanced());
            proptest::prop_assert_eq!(cap.count_in_state(SliceState::Reserved), pairs.len());
            // all-or-nothing: per component, either all instances or none
            for (i, (_, _, inst)) in demands.iter().enumerate() {
                let got = pairs.iter().filter(|p| p.component_id == format!("c{i}")).count();
                proptest::prop_assert!(got == 0 || got == *inst as usize);
            }
        }
    }
}
