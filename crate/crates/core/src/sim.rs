//! The single-threaded simulation driver: wires offer collection, ranking,
//! and deployment into the event kernel and enforces capacity conservation
//! after every executed event in test builds.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use crate::deployment::{
    plan_transfers, select_lead_resource, select_winner, ImageRegistry, Swarm, TASK_DURATION_S,
};
use crate::error::{Error, Result};
use crate::kernel::models::{path_bandwidth, path_latency, transfer_duration};
use crate::kernel::{
    DeployStep, Event, EventLog, EventPayload, EventQueue, MessageKind, UtilisationInterval,
};
use crate::model::{
    assign_agents, Application, PriorityVector, RegisteredCapacity, ResourceAgent, SliceState,
};
use crate::offers::{
    aggregate_offer_qos, classify_coverage, expand_units, first_fit_match, generate_combinations,
    offer_reliability, release_reservations, select_gateway, OfferPair, PlacementUnit, UnitDemand,
    MESSAGE_SIZE_MB,
};
use crate::ranking::{
    borda_rank, cost_rank, random_rank, RankMethod, RankedOffers, ReliabilityMode,
};
use crate::rng::{substream, STREAM_GATEWAY, STREAM_RANKING, STREAM_SORT_DIRECTION};
use crate::scenario::Scenario;
use crate::Scalar;

/// One entry of the strategy matrix: a priority profile, a ranking method,
/// and a reliability mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStrategy {
    pub profile: String,
    pub priorities: PriorityVector,
    pub method: RankMethod,
    pub reliability: ReliabilityMode,
}

impl RunStrategy {
    pub fn new(
        profile: impl Into<String>,
        priorities: PriorityVector,
        method: RankMethod,
        reliability: ReliabilityMode,
    ) -> Self {
        Self {
            profile: profile.into(),
            priorities,
            method,
            reliability,
        }
    }
}

/// Per-run configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub strategy: RunStrategy,
    pub seed: u64,
    pub combination_guard: u64,
}

pub const DEFAULT_COMBINATION_GUARD: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppStatus {
    Pending,
    Deployed,
    Rejected,
}

struct AppRun {
    app: Application,
    units: Vec<PlacementUnit>,
    gateway: Option<usize>,
    pending_responses: usize,
    collected: Vec<OfferPair>,
    status: AppStatus,
    swarm: Option<Swarm>,
}

/// A deterministic single-scenario run. `(scenario, seed)` fully determines
/// the event log.
pub struct Simulation {
    cfg: SimConfig,
    queue: EventQueue,
    log: EventLog,
    capacities: BTreeMap<String, RegisteredCapacity>,
    agents: Vec<ResourceAgent>,
    apps: Vec<AppRun>,
    registry: ImageRegistry,
    unavailable: BTreeSet<String>,
    rng_gateway: ChaCha8Rng,
    rng_ranking: ChaCha8Rng,
}

impl Simulation {
    pub fn new(scenario: &Scenario, cfg: SimConfig) -> Result<Self> {
        let mut capacities = BTreeMap::new();
        for cap in &scenario.capacities {
            let registered = RegisteredCapacity::register(cap.clone())?;
            if capacities.insert(cap.id.clone(), registered).is_some() {
                return Err(Error::validation(
                    "infrastructure",
                    vec![format!("duplicate capacity id {}", cap.id)],
                ));
            }
        }

        let mut direction_rng = substream(cfg.seed, STREAM_SORT_DIRECTION);
        let agents = assign_agents(&scenario.capacities, &mut direction_rng);

        let mut registry =
            ImageRegistry::new(scenario.registry_bandwidth, scenario.registry_latency)?;
        let mut queue = EventQueue::new();
        let mut apps = Vec::with_capacity(scenario.applications.len());
        for app in &scenario.applications {
            for comp in &app.components {
                if let crate::model::ComponentSpec::Compute { image_size, .. } = comp.spec {
                    registry.publish(&app.id, &comp.id, image_size);
                }
            }
            queue.schedule(
                app.submit_time,
                EventPayload::AppSubmitted {
                    application: app.id.clone(),
                },
            )?;
            apps.push(AppRun {
                units: expand_units(app),
                app: app.clone(),
                gateway: None,
                pending_responses: 0,
                collected: Vec::new(),
                status: AppStatus::Pending,
                swarm: None,
            });
        }

        Ok(Self {
            rng_gateway: substream(cfg.seed, STREAM_GATEWAY),
            rng_ranking: substream(cfg.seed, STREAM_RANKING),
            cfg,
            queue,
            log: EventLog::default(),
            capacities,
            agents,
            apps,
            registry,
            unavailable: scenario.unavailable_capacities.clone(),
        })
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn capacities(&self) -> &BTreeMap<String, RegisteredCapacity> {
        &self.capacities
    }

    pub fn agents(&self) -> &[ResourceAgent] {
        &self.agents
    }

    pub fn status(&self, application_id: &str) -> Option<AppStatus> {
        self.app_index(application_id).map(|i| self.apps[i].status)
    }

    pub fn swarm(&self, application_id: &str) -> Option<&Swarm> {
        self.app_index(application_id)
            .and_then(|i| self.apps[i].swarm.as_ref())
    }

    /// Slices still reserved or assigned; must be zero once the queue drains.
    pub fn residual_slices(&self) -> usize {
        self.capacities
            .values()
            .map(|c| {
                c.count_in_state(SliceState::Reserved) + c.count_in_state(SliceState::Assigned)
            })
            .sum()
    }

    fn app_index(&self, application_id: &str) -> Option<usize> {
        self.apps.iter().position(|a| a.app.id == application_id)
    }

    fn agent_index(&self, agent_id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id == agent_id)
    }

    /// Executes events until the queue is empty. A domain error inside a
    /// handler aborts the run; the partial log stays available on `self`.
    pub fn run_until_idle(&mut self) -> Result<()> {
        while let Some(event) = self.queue.pop() {
            self.log.push(event.clone());
            let time = event.time;
            let kind = event.payload.kind();
            if let Err(source) = self.handle(event) {
                return Err(Error::Aborted {
                    time,
                    kind,
                    source: Box::new(source),
                });
            }
            #[cfg(debug_assertions)]
            self.assert_conserved();
        }
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn assert_conserved(&self) {
        for cap in self.capacities.values() {
            assert!(
                cap.balanced(),
                "capacity {} out of balance at t={}",
                cap.spec.id,
                self.queue.now()
            );
        }
    }

    fn handle(&mut self, event: Event) -> Result<()> {
        match event.payload {
            EventPayload::AppSubmitted { application } => self.on_submitted(&application),
            EventPayload::MessageArrival {
                application,
                agent,
                message: MessageKind::OfferRequest,
            } => self.on_request(&application, &agent),
            EventPayload::MessageArrival {
                application,
                message: MessageKind::OfferResponse { pairs, .. },
                ..
            } => self.on_response(&application, pairs),
            EventPayload::TransferComplete {
                application,
                component,
                instance,
                capacity,
            } => self.on_transfer_complete(&application, &component, instance, &capacity),
            // informational records; their state effects happen at decision time
            EventPayload::DeployStep { .. } | EventPayload::TaskComplete { .. } => Ok(()),
        }
    }

    /// Network delay of one broadcast message between two agents' capacities.
    /// The gateway talking to itself costs nothing.
    fn message_delay(&self, from: usize, to: usize) -> Result<Scalar> {
        if from == to {
            return Ok(0.0);
        }
        let a = &self.capacities[&self.agents[from].capacity_id].spec;
        let b = &self.capacities[&self.agents[to].capacity_id].spec;
        transfer_duration(
            MESSAGE_SIZE_MB,
            path_bandwidth(a.bandwidth, b.bandwidth),
            path_latency(a.latency, b.latency),
        )
    }

    fn on_submitted(&mut self, application: &str) -> Result<()> {
        let app_idx = self
            .app_index(application)
            .ok_or_else(|| Error::UnknownCapacity(application.to_string()))?;
        let gateway = select_gateway(&self.agents, &mut self.rng_gateway)?;
        self.apps[app_idx].gateway = Some(gateway);
        self.apps[app_idx].pending_responses = self.agents.len();
        let now = self.queue.now();
        for agent_idx in 0..self.agents.len() {
            let delay = self.message_delay(gateway, agent_idx)?;
            self.queue.schedule(
                now + delay,
                EventPayload::MessageArrival {
                    application: application.to_string(),
                    agent: self.agents[agent_idx].id.clone(),
                    message: MessageKind::OfferRequest,
                },
            )?;
        }
        Ok(())
    }

    fn on_request(&mut self, application: &str, agent_id: &str) -> Result<()> {
        let app_idx = self
            .app_index(application)
            .ok_or_else(|| Error::UnknownCapacity(application.to_string()))?;
        let agent_idx = self
            .agent_index(agent_id)
            .ok_or_else(|| Error::UnknownCapacity(agent_id.to_string()))?;
        let agent = self.agents[agent_idx].clone();
        let capacity = self
            .capacities
            .get_mut(&agent.capacity_id)
            .ok_or_else(|| Error::UnknownCapacity(agent.capacity_id.clone()))?;
        let pairs = first_fit_match(
            &agent,
            &self.apps[app_idx].app.id,
            &self.apps[app_idx].units,
            capacity,
        );
        let coverage = classify_coverage(application, &pairs, &self.apps[app_idx].units)?;
        let gateway = self.apps[app_idx].gateway.expect("gateway chosen");
        let delay = self.message_delay(agent_idx, gateway)?;
        let now = self.queue.now();
        self.queue.schedule(
            now + delay,
            EventPayload::MessageArrival {
                application: application.to_string(),
                agent: agent.id,
                message: MessageKind::OfferResponse { coverage, pairs },
            },
        )?;
        Ok(())
    }

    fn on_response(&mut self, application: &str, pairs: Vec<OfferPair>) -> Result<()> {
        let app_idx = self
            .app_index(application)
            .ok_or_else(|| Error::UnknownCapacity(application.to_string()))?;
        self.apps[app_idx].collected.extend(pairs);
        self.apps[app_idx].pending_responses -= 1;
        if self.apps[app_idx].pending_responses == 0 {
            self.process_offers(app_idx)?;
        }
        Ok(())
    }

    fn rank_offers(&mut self, offers: &[crate::offers::OfferCombination]) -> Result<RankedOffers> {
        match self.cfg.strategy.method {
            RankMethod::Cost => cost_rank(
                offers,
                &self.cfg.strategy.priorities,
                self.cfg.strategy.reliability,
            ),
            RankMethod::Borda => borda_rank(
                offers,
                &self.cfg.strategy.priorities,
                self.cfg.strategy.reliability,
            ),
            RankMethod::Random => random_rank(offers, &mut self.rng_ranking),
        }
    }

    fn reject(&mut self, app_idx: usize, reason: String) -> Result<()> {
        let collected = std::mem::take(&mut self.apps[app_idx].collected);
        release_reservations(&collected, &mut self.capacities)?;
        self.apps[app_idx].status = AppStatus::Rejected;
        let now = self.queue.now();
        self.queue.schedule(
            now,
            EventPayload::DeployStep {
                application: self.apps[app_idx].app.id.clone(),
                step: DeployStep::Rejected { reason },
            },
        )?;
        Ok(())
    }

    /// All responses are in: build combinations, rank, confirm the winner
    /// with next-ranked fallback, release losing reservations, and schedule
    /// the deployment.
    fn process_offers(&mut self, app_idx: usize) -> Result<()> {
        let combos = {
            let run = &self.apps[app_idx];
            generate_combinations(&run.collected, &run.units, self.cfg.combination_guard)?
        };
        if combos.is_empty() {
            return self.reject(app_idx, "no full-coverage combination".to_string());
        }

        let mut combos = combos;
        for combo in &mut combos {
            combo.qos = aggregate_offer_qos(combo, &self.capacities)?;
            combo.reliability = offer_reliability(combo, &self.capacities)?;
        }

        let ranked = self.rank_offers(&combos)?;
        let availability: Vec<bool> = ranked
            .entries
            .iter()
            .map(|(combo, _)| {
                combo
                    .capacity_ids()
                    .iter()
                    .all(|id| !self.unavailable.contains(*id))
            })
            .collect();

        let (rank, winner, score) = match select_winner(&ranked, &availability) {
            Ok((rank, winner)) => (rank, winner.clone(), ranked.entries[rank].1),
            Err(Error::NoAvailableOffer(_)) => {
                return self.reject(app_idx, "no available offer".to_string());
            }
            Err(other) => return Err(other),
        };

        // release everything outside the winner, then move the winner to assigned
        let winner_slices: BTreeSet<(String, u64)> = winner
            .pairs
            .iter()
            .map(|p| (p.slice.capacity_id.clone(), p.slice.slice_id))
            .collect();
        let collected = std::mem::take(&mut self.apps[app_idx].collected);
        let losing: Vec<OfferPair> = collected
            .into_iter()
            .filter(|p| !winner_slices.contains(&(p.slice.capacity_id.clone(), p.slice.slice_id)))
            .collect();
        release_reservations(&losing, &mut self.capacities)?;
        for pair in &winner.pairs {
            self.capacities
                .get_mut(&pair.slice.capacity_id)
                .ok_or_else(|| Error::UnknownCapacity(pair.slice.capacity_id.clone()))?
                .transition(pair.slice.slice_id, SliceState::Assigned)?;
        }

        let lead = select_lead_resource(&winner, &self.capacities)?;
        let application = self.apps[app_idx].app.id.clone();
        let now = self.queue.now();
        self.queue.schedule(
            now,
            EventPayload::DeployStep {
                application: application.clone(),
                step: DeployStep::WinnerSelected {
                    rank,
                    score,
                    capacities: winner
                        .capacity_ids()
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                    lead: lead.clone(),
                },
            },
        )?;
        self.queue.schedule(
            now,
            EventPayload::DeployStep {
                application: application.clone(),
                step: DeployStep::LeadLaunch {
                    capacity: lead.clone(),
                },
            },
        )?;

        let mut swarm = Swarm {
            application_id: application.clone(),
            lead_capacity: lead,
            members: winner
                .pairs
                .iter()
                .map(|p| {
                    (
                        p.slice.capacity_id.clone(),
                        p.component_id.clone(),
                        p.instance,
                    )
                })
                .collect(),
            deployed_at: BTreeMap::new(),
        };

        // storage units carry no image: they allocate at deployment start
        let storage_units: Vec<(String, u32)> = self.apps[app_idx]
            .units
            .iter()
            .filter(|u| matches!(u.demand, UnitDemand::Storage { .. }))
            .map(|u| (u.component_id.clone(), u.instance))
            .collect();
        for (component, instance) in storage_units {
            let pair = winner
                .pairs
                .iter()
                .find(|p| p.component_id == component && p.instance == instance)
                .expect("winner covers every unit");
            let capacity_id = pair.slice.capacity_id.clone();
            self.capacities
                .get_mut(&capacity_id)
                .unwrap()
                .transition(pair.slice.slice_id, SliceState::Allocated)?;
            swarm.deployed_at.insert((component.clone(), instance), now);
            self.queue.schedule(
                now,
                EventPayload::DeployStep {
                    application: application.clone(),
                    step: DeployStep::UnitAllocated {
                        component,
                        instance,
                        capacity: capacity_id,
                    },
                },
            )?;
        }

        let planned = plan_transfers(
            &winner,
            &self.apps[app_idx].units,
            &self.registry,
            &self.capacities,
        )?;
        for transfer in &planned {
            self.queue.schedule(
                now + transfer.completes_after,
                EventPayload::TransferComplete {
                    application: application.clone(),
                    component: transfer.component_id.clone(),
                    instance: transfer.instance,
                    capacity: transfer.capacity_id.clone(),
                },
            )?;
        }

        if swarm.deployed_at.len() == self.apps[app_idx].units.len() {
            self.apps[app_idx].status = AppStatus::Deployed;
        }
        self.apps[app_idx].swarm = Some(swarm);
        Ok(())
    }

    /// An image arrived: the unit's slice becomes allocated and its
    /// CPU-saturating task starts immediately.
    fn on_transfer_complete(
        &mut self,
        application: &str,
        component: &str,
        instance: u32,
        capacity_id: &str,
    ) -> Result<()> {
        let app_idx = self
            .app_index(application)
            .ok_or_else(|| Error::UnknownCapacity(application.to_string()))?;
        let now = self.queue.now();

        let swarm = self.apps[app_idx].swarm.as_mut().expect("swarm exists");
        swarm
            .deployed_at
            .insert((component.to_string(), instance), now);
        let slice_id = self
            .capacities
            .get(capacity_id)
            .ok_or_else(|| Error::UnknownCapacity(capacity_id.to_string()))?
            .slices()
            .find(|(_, s)| {
                s.bound.application_id == application
                    && s.bound.component_id == component
                    && s.bound.instance == instance
            })
            .map(|(id, _)| *id)
            .ok_or_else(|| Error::UnknownUnit {
                application: application.to_string(),
                component: component.to_string(),
                instance,
            })?;
        self.capacities
            .get_mut(capacity_id)
            .unwrap()
            .transition(slice_id, SliceState::Allocated)?;

        let unit = self.apps[app_idx]
            .units
            .iter()
            .find(|u| u.component_id == component && u.instance == instance)
            .expect("unit exists");
        let UnitDemand::Compute { cpu, .. } = unit.demand else {
            unreachable!("transfers target compute units only")
        };
        self.log.record_utilisation(UtilisationInterval {
            capacity_id: capacity_id.to_string(),
            start: now,
            end: now + TASK_DURATION_S,
            cpu_cores: cpu,
        });
        self.queue.schedule(
            now + TASK_DURATION_S,
            EventPayload::TaskComplete {
                application: application.to_string(),
                component: component.to_string(),
                instance,
                capacity: capacity_id.to_string(),
            },
        )?;

        let deployed = self.apps[app_idx]
            .swarm
            .as_ref()
            .map(|s| s.deployed_at.len())
            .unwrap_or(0);
        if deployed == self.apps[app_idx].units.len() {
            self.apps[app_idx].status = AppStatus::Deployed;
        }
        Ok(())
    }
}
