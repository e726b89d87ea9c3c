//! Initialization and the per-step update pipeline.
//!
//! Each step runs these passes in a fixed order:
//!
//! 1. MAV mode maintenance on the pre-step state: docking aborts, couplings,
//!    then docking triggers once the run is past `t_dock_start`.
//! 2. Lane changes: conventional and independent-MAV decisions plus train
//!    detachments, all read from the frozen state and applied together;
//!    trains that lost a module are reorganized and any docking follower
//!    whose target is no longer directly ahead falls back to independent.
//! 3. Speeds on the post-lane-change layout: conventional vehicles with the
//!    stochastic step, independent MAVs and train leaders deterministically,
//!    train members copy their leader, and docking followers last so they
//!    can use the committed speed of their target.
//! 4. Synchronous position update.
//! 5. Structural checks.
//!
//! Random draws are consumed in a fixed order (lane changes by vehicle id,
//! detachments by train id then member, stochastic deceleration by vehicle
//! id), so a seed fully determines a run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{InvariantViolation, SimError};
use crate::lanechange::{self, LaneChangeDecision};
use crate::mav::{self, TrainRegistry};
use crate::metrics::{self, FundamentalPoint, StepRecord, TrainHistogram};
use crate::params::SimParams;
use crate::road::{Mode, RoadState, Vehicle, VehicleId, VehicleKind};
use crate::tsm::{self, Following};

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioPhase {
    /// Before `t_dock_start`: every MAV moves independently.
    WarmupIndependent,
    /// Docking allowed (in the collective scenario), not yet measuring.
    Operational,
    /// Inside the measuring window.
    Measuring,
}

impl ScenarioPhase {
    pub fn at(t: u32, params: &SimParams) -> Self {
        if t >= params.t_measure_start && t >= params.t_dock_start {
            ScenarioPhase::Measuring
        } else if t >= params.t_dock_start {
            ScenarioPhase::Operational
        } else {
            ScenarioPhase::WarmupIndependent
        }
    }
}

/// Places vehicles on both lanes: `round(density · km)` per lane, of which
/// `round(p_mav · N)` are MAVs in shuffled order. Free cells are split into
/// uniformly random gaps, and the whole lane is rotated by a random offset.
pub fn init_state<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<RoadState, SimError> {
    params.validate()?;
    let n = params.vehicles_per_lane();
    let n_mav = params.mavs_per_lane();
    let road = params.road_length;
    let mut vehicles = Vec::with_capacity(2 * n);
    for lane in 0..params.lanes {
        let mut kinds: Vec<VehicleKind> = std::iter::repeat_n(VehicleKind::Mav, n_mav)
            .chain(std::iter::repeat_n(VehicleKind::Conventional, n - n_mav))
            .collect();
        kinds.shuffle(rng);
        let length_of = |k: VehicleKind| match k {
            VehicleKind::Conventional => params.veh_length,
            VehicleKind::Mav => params.mav_length,
        };
        let occupied: i32 = kinds.iter().map(|&k| length_of(k)).sum();
        let free = road - occupied;
        let mut cuts: Vec<i32> = (0..n).map(|_| rng.gen_range(0..=free)).collect();
        cuts.sort_unstable();
        let offset = rng.gen_range(0..road.max(1));
        let mut used = 0;
        for (k, kind) in kinds.into_iter().enumerate() {
            let len = length_of(kind);
            let rear = cuts[k] + used;
            used += len;
            let front = (rear + len - 1 + offset).rem_euclid(road);
            let id = VehicleId(vehicles.len() as u32);
            vehicles.push(match kind {
                VehicleKind::Conventional => Vehicle::conventional(id, lane, front, len),
                VehicleKind::Mav => Vehicle::mav(id, lane, front, len),
            });
        }
    }
    Ok(RoadState::new(road, vehicles)?)
}

/// One simulation: state, trains and the random stream.
#[derive(Clone, Debug)]
pub struct Simulation {
    params: SimParams,
    state: RoadState,
    trains: TrainRegistry,
    rng: SimRng,
    next_speed: Vec<i32>,
    mav_count: usize,
    clamps: u64,
}

impl Simulation {
    pub fn new(params: SimParams) -> Result<Self, SimError> {
        let mut rng = SimRng::seed_from_u64(params.seed);
        let state = init_state(&params, &mut rng)?;
        Ok(Self::assemble(params, state, TrainRegistry::default(), rng))
    }

    /// Starts from a hand-built state with no trains. The state's vehicles
    /// must be consistent with `params` (lengths, ring size).
    pub fn from_state(params: SimParams, state: RoadState) -> Result<Self, SimError> {
        params.validate()?;
        let rng = SimRng::seed_from_u64(params.seed);
        Ok(Self::assemble(params, state, TrainRegistry::default(), rng))
    }

    fn assemble(params: SimParams, state: RoadState, trains: TrainRegistry, rng: SimRng) -> Self {
        let mav_count = state.vehicles().iter().filter(|v| v.is_mav()).count();
        Simulation {
            next_speed: vec![0; state.len()],
            params,
            state,
            trains,
            rng,
            mav_count,
            clamps: 0,
        }
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn state(&self) -> &RoadState {
        &self.state
    }

    pub fn trains(&self) -> &TrainRegistry {
        &self.trains
    }

    pub fn time(&self) -> u32 {
        self.state.time
    }

    pub fn phase(&self) -> ScenarioPhase {
        ScenarioPhase::at(self.state.time, &self.params)
    }

    pub fn mav_count(&self) -> usize {
        self.mav_count
    }

    /// Speed caps applied by the no-overtake clamp so far.
    pub fn safety_clamps(&self) -> u64 {
        self.clamps
    }

    fn docking_active(&self) -> bool {
        self.params.docking_enabled() && self.state.time >= self.params.t_dock_start
    }

    /// Advances the simulation by one second.
    pub fn step(&mut self) -> Result<(), InvariantViolation> {
        let docking_active = self.docking_active();
        if self.mav_count > 0 {
            self.maintain_modes(docking_active)?;
        }
        self.change_lanes(docking_active)?;
        self.update_speeds();
        self.move_vehicles();
        self.check_invariants()
    }

    fn docking_vehicles(&self) -> Vec<VehicleId> {
        self.state
            .vehicles()
            .iter()
            .filter(|v| v.mode == Mode::Docking)
            .map(|v| v.id)
            .collect()
    }

    fn abort_stale_docking(&mut self, docking_active: bool) {
        for id in self.docking_vehicles() {
            if mav::docking_abort_check(
                self.state.vehicle(id),
                &self.state,
                &self.trains,
                self.params.l_max,
                docking_active,
            ) {
                mav::abort_docking(&mut self.state, id);
            }
        }
    }

    fn maintain_modes(&mut self, docking_active: bool) -> Result<(), InvariantViolation> {
        self.abort_stale_docking(docking_active);

        // Couple front to back within each lane.
        let mut ready: Vec<VehicleId> = self
            .docking_vehicles()
            .into_iter()
            .filter(|&id| {
                let f = self.state.vehicle(id);
                let target = self.state.vehicle(f.docking_target.expect("docking has a target"));
                mav::docking_complete_check(f, target, self.state.gap_ahead(id), self.params.d_intra)
            })
            .collect();
        ready.sort_by_key(|&id| {
            let v = self.state.vehicle(id);
            (v.lane, std::cmp::Reverse(v.position))
        });
        for id in ready {
            mav::couple(&mut self.state, &mut self.trains, id, self.params.l_max)?;
        }

        if !docking_active {
            return Ok(());
        }
        let candidates: Vec<(VehicleId, VehicleId)> = self
            .state
            .vehicles()
            .iter()
            .filter(|v| v.mode == Mode::Independent)
            .filter_map(|v| {
                let leader = self.state.leader_of(v.id);
                let info = self.state.neighbor_info(&self.trains, leader);
                let is_tail = info.train.is_some_and(|t| self.trains.tail(t) == leader);
                mav::docking_trigger(v, &info, is_tail, self.params.l_max, true).then_some((v.id, leader))
            })
            .collect();
        let mut triggering = vec![false; self.state.len()];
        for &(id, _) in &candidates {
            triggering[id.index()] = true;
        }
        // A module cannot dock onto one that starts docking in the same pass,
        // nor onto one that is itself waiting behind a docking module.
        for &(id, leader) in &candidates {
            if triggering[leader.index()] || self.waits_behind_docking(leader) {
                continue;
            }
            let v = self.state.vehicle_mut(id);
            v.mode = Mode::Docking;
            v.docking_target = Some(leader);
        }
        // Followers whose target just started docking fall back.
        for id in self.docking_vehicles() {
            let target = self.state.vehicle(id).docking_target.expect("docking has a target");
            if self.state.vehicle(target).mode == Mode::Docking {
                mav::abort_docking(&mut self.state, id);
            }
        }
        Ok(())
    }

    fn waits_behind_docking(&self, id: VehicleId) -> bool {
        let ahead = self.state.leader_of(id);
        self.state.vehicle(id).mode == Mode::Independent
            && ahead != id
            && self.state.vehicle(ahead).mode == Mode::Docking
    }

    fn change_lanes(&mut self, docking_active: bool) -> Result<(), InvariantViolation> {
        let mut decisions: Vec<LaneChangeDecision> =
            lanechange::collect_decisions(&self.state, &self.params, &mut self.rng, docking_active);
        let detachments = if !self.trains.is_empty() && self.state.time.is_multiple_of(self.params.detach_interval) {
            mav::detachment_decisions(&self.state, &self.trains, &mut self.rng, &self.params)
        } else {
            Vec::new()
        };
        if decisions.is_empty() && detachments.is_empty() {
            return Ok(());
        }
        decisions.extend(detachments.iter().map(|d| d.decision));
        lanechange::apply_decisions(&mut self.state, &decisions)?;
        for d in &detachments {
            mav::reorganize_after_detach(&mut self.state, &mut self.trains, d.train, d.index);
        }
        if self.mav_count > 0 {
            self.abort_stale_docking(docking_active);
        }
        Ok(())
    }

    fn following(&self, id: VehicleId) -> Following {
        let leader = self.state.leader_of(id);
        let gap = self.state.gap_between(id, leader);
        Following {
            speed: self.state.vehicle(id).speed,
            gap,
            leader_speed: self.state.vehicle(leader).speed,
            leader_gap: match self.state.vehicle(leader).train {
                _ if leader == id => gap,
                Some(t) => self.state.gap_ahead(self.trains.leader(t)),
                None => self.state.gap_ahead(leader),
            },
        }
    }

    fn update_speeds(&mut self) {
        let params = &self.params;
        let mut has_docking = false;
        for i in 0..self.state.len() {
            let id = VehicleId(i as u32);
            let v = self.state.vehicle(id);
            match (v.kind, v.mode) {
                (VehicleKind::Conventional, _) => {
                    let draw: f64 = self.rng.gen();
                    self.next_speed[i] = tsm::stochastic_update(self.following(id), params.v_max, params, draw).v_final;
                }
                (VehicleKind::Mav, Mode::Independent) => {
                    self.next_speed[i] = tsm::deterministic_update(self.following(id), params.v_max_mav, params).0;
                }
                (VehicleKind::Mav, Mode::Collective) => {
                    let train = self
                        .trains
                        .get(v.train.expect("collective modules belong to a train"))
                        .expect("registered");
                    if train.leader() == id {
                        let speed = mav::collective_speed(self.following(id), params);
                        for &m in &train.members {
                            self.next_speed[m.index()] = speed;
                        }
                    }
                }
                (VehicleKind::Mav, Mode::Docking) => has_docking = true,
                (VehicleKind::Mav, Mode::NotApplicable) => unreachable!("MAVs always have a mode"),
            }
        }
        if has_docking {
            self.update_docking_speeds();
        }
        self.clamp_to_leaders();
    }

    fn update_docking_speeds(&mut self) {
        let params = &self.params;
        for i in 0..self.state.len() {
            let v = &self.state.vehicles()[i];
            if v.mode != Mode::Docking {
                continue;
            }
            let target = v.docking_target.expect("docking has a target");
            // The target's speed for this step is already fixed, so the
            // room available after both move is the current gap plus it.
            let room = self.state.gap_between(v.id, target) + self.next_speed[target.index()];
            self.next_speed[i] = mav::docking_speed(v.speed, params.a_p, params.v_max, room, params.d_intra);
        }
    }

    /// Caps every unit (a free vehicle or a whole train) at the room its
    /// leader leaves after moving, `gap + v_leader'`. The car-following rules
    /// anticipate the leader's motion, and after a lane change the leader
    /// can brake by more than the safety margin covers; this is the last
    /// line that keeps the lattice free of overlaps. Caps propagate
    /// backwards, so passes repeat until nothing changes.
    fn clamp_to_leaders(&mut self) {
        loop {
            let mut changed = false;
            for lane in 0..2 {
                let order = self.state.lane_order(lane);
                for &id in order.iter().rev() {
                    let v = self.state.vehicle(id);
                    let members = match v.train {
                        Some(t) => {
                            let train = self.trains.get(t).expect("registered");
                            if train.leader() != id {
                                continue;
                            }
                            Some(&train.members)
                        }
                        None => None,
                    };
                    let leader = self.state.leader_of(id);
                    if leader == id {
                        continue;
                    }
                    let room = self.state.gap_between(id, leader) + self.next_speed[leader.index()];
                    if self.next_speed[id.index()] <= room {
                        continue;
                    }
                    changed = true;
                    self.clamps += 1;
                    match members {
                        Some(members) => {
                            for m in members {
                                self.next_speed[m.index()] = room;
                            }
                        }
                        None => self.next_speed[id.index()] = room,
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn move_vehicles(&mut self) {
        let road = self.params.road_length;
        for i in 0..self.state.len() {
            let speed = self.next_speed[i];
            let v = self.state.vehicle_mut(VehicleId(i as u32));
            v.position = tsm::advance_position(v.position, speed, road);
            v.speed = speed;
        }
        self.state.reindex_after_move();
        self.state.time += 1;
    }

    fn check_invariants(&self) -> Result<(), InvariantViolation> {
        self.state.check_no_overlap()?;
        mav::check_trains(&self.state, &self.trains, &self.params)?;
        let before_docking = self.state.time <= self.params.t_dock_start;
        for v in self.state.vehicles() {
            let limit = match (v.kind, v.mode) {
                (VehicleKind::Conventional, Mode::NotApplicable) => self.params.v_max,
                (VehicleKind::Mav, Mode::Independent | Mode::Collective) => self.params.v_max_mav,
                (VehicleKind::Mav, Mode::Docking) => self.params.v_max,
                _ => {
                    return Err(self
                        .state
                        .violation(format!("{} has kind {:?} in mode {:?}", v.id, v.kind, v.mode)))
                }
            };
            // Modes never change after the speed pass, so each speed was
            // computed under the mode checked here.
            if v.speed < 0 || v.speed > limit {
                return Err(self
                    .state
                    .violation(format!("{} moves at {} in mode {:?}", v.id, v.speed, v.mode)));
            }
            if before_docking && matches!(v.mode, Mode::Docking | Mode::Collective) {
                return Err(self
                    .state
                    .violation(format!("{} is {:?} before docking starts", v.id, v.mode)));
            }
            if (v.mode == Mode::Collective) != v.train.is_some()
                || (v.mode == Mode::Docking) != v.docking_target.is_some()
            {
                return Err(self
                    .state
                    .violation(format!("{} has inconsistent mode bookkeeping", v.id)));
            }
        }
        Ok(())
    }

    /// Aggregate counts and speeds of the current state.
    pub fn record(&self) -> StepRecord {
        metrics::step_record(&self.state, &self.params, self.state.time.saturating_sub(1))
    }
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub params: SimParams,
    /// One record per step, `series[t]` measured after step `t`.
    pub series: Vec<StepRecord>,
    pub histogram: TrainHistogram,
    pub summary: FundamentalPoint,
    pub final_vehicles: Vec<Vehicle>,
    pub final_trains: Vec<mav::Train>,
    /// Times the no-overtake clamp had to cap a speed.
    pub safety_clamps: u64,
}

/// Runs `t_total` steps from a fresh initial state.
pub fn run(params: &SimParams) -> Result<RunOutput, SimError> {
    run_observed(params, |_| {})
}

/// Like [`run`], calling `observe` after every step.
pub fn run_observed(params: &SimParams, mut observe: impl FnMut(&Simulation)) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(params.clone())?;
    let mut series = Vec::with_capacity(params.t_total as usize);
    let mut histogram = TrainHistogram::new(params.l_max);
    for _ in 0..params.t_total {
        sim.step()?;
        series.push(sim.record());
        let now = sim.time();
        if now >= params.t_measure_start && (now - params.t_measure_start).is_multiple_of(params.histogram_interval) {
            metrics::sample_train_histogram(sim.trains(), sim.mav_count(), &mut histogram);
        }
        observe(&sim);
    }
    let summary = metrics::summarize_run(&series, params)?;
    Ok(RunOutput {
        params: params.clone(),
        series,
        histogram,
        summary,
        final_vehicles: sim.state().vehicles().to_vec(),
        final_trains: sim.trains().iter().cloned().collect(),
        safety_clamps: sim.safety_clamps(),
    })
}
