//! MAV operating modes: docking, collective moving and detachment, plus the
//! registry of trains.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::InvariantViolation;
use crate::lanechange::{LaneChangeDecision, LaneChangeReason};
use crate::params::SimParams;
use crate::road::{Mode, NeighborInfo, RoadState, Vehicle, VehicleId, VehicleKind};
use crate::tsm::{self, Following};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainId(pub u32);

impl fmt::Display for TrainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "train{}", self.0)
    }
}

/// Coupled modules, front to back. `members[0]` leads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Train {
    pub id: TrainId,
    pub members: Vec<VehicleId>,
    pub lane: usize,
}

impl Train {
    pub fn leader(&self) -> VehicleId {
        self.members[0]
    }

    pub fn tail(&self) -> VehicleId {
        *self.members.last().expect("trains are never empty")
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// A follower catching up with the MAV (or train tail) directly ahead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DockingLink {
    pub follower: VehicleId,
    pub target: VehicleId,
}

/// Live trains, indexed by id. Ids of dissolved trains are reused, lowest
/// first, so iteration stays proportional to the number of live trains.
#[derive(Clone, Debug, Default)]
pub struct TrainRegistry {
    slots: Vec<Option<Train>>,
    free: BinaryHeap<Reverse<u32>>,
    live: usize,
}

impl TrainRegistry {
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn get(&self, id: TrainId) -> Option<&Train> {
        self.slots.get(id.0 as usize).and_then(Option::as_ref)
    }

    /// Trains in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Train> {
        self.slots.iter().flatten()
    }

    pub fn size(&self, id: TrainId) -> usize {
        self.train(id).size()
    }

    pub fn leader(&self, id: TrainId) -> VehicleId {
        self.train(id).leader()
    }

    pub fn tail(&self, id: TrainId) -> VehicleId {
        self.train(id).tail()
    }

    /// Modules currently coupled in some train.
    pub fn coupled_modules(&self) -> usize {
        self.iter().map(Train::size).sum()
    }

    fn train(&self, id: TrainId) -> &Train {
        self.get(id).expect("registered train")
    }

    fn train_mut(&mut self, id: TrainId) -> &mut Train {
        self.slots[id.0 as usize].as_mut().expect("registered train")
    }

    fn insert(&mut self, members: Vec<VehicleId>, lane: usize) -> TrainId {
        let id = match self.free.pop() {
            Some(Reverse(id)) => id,
            None => {
                self.slots.push(None);
                (self.slots.len() - 1) as u32
            }
        };
        let id = TrainId(id);
        self.put(Train { id, members, lane });
        id
    }

    /// Removes a train but keeps its id reserved until [`Self::release`].
    fn take(&mut self, id: TrainId) -> Train {
        self.live -= 1;
        self.slots[id.0 as usize].take().expect("registered train")
    }

    fn put(&mut self, train: Train) {
        let slot = &mut self.slots[train.id.0 as usize];
        debug_assert!(slot.is_none());
        *slot = Some(train);
        self.live += 1;
    }

    fn release(&mut self, id: TrainId) {
        self.free.push(Reverse(id.0));
    }
}

/// Whether an independent MAV should start docking onto its leader.
///
/// The leader must be a MAV that is not itself docking, and the coupled
/// result must not exceed `l_max`. A train can only be joined at its tail.
pub fn docking_trigger(
    follower: &Vehicle,
    leader: &NeighborInfo,
    leader_is_tail: bool,
    l_max: usize,
    docking_enabled: bool,
) -> bool {
    if !docking_enabled || follower.mode != Mode::Independent || leader.id == follower.id {
        return false;
    }
    if leader.kind != VehicleKind::Mav {
        return false;
    }
    match leader.mode {
        Mode::Independent => 2 <= l_max,
        Mode::Collective => leader_is_tail && leader.train_size < l_max,
        Mode::Docking | Mode::NotApplicable => false,
    }
}

/// Speed while docking: `min(v + a_p, v_max, d - d_intra)`, where `v_max`
/// is the global limit so a docking module can close on a train running at
/// the MAV operational limit.
#[inline]
pub fn docking_speed(speed: i32, a_p: i32, v_max: i32, gap: i32, d_intra: i32) -> i32 {
    (speed + a_p).min(v_max).min(gap - d_intra).max(0)
}

/// Whether a docking follower has to fall back to independent mode: its
/// immediate leader is no longer the target, the target cannot be joined
/// any more, or docking has been switched off.
pub fn docking_abort_check(
    follower: &Vehicle,
    state: &RoadState,
    trains: &TrainRegistry,
    l_max: usize,
    docking_enabled: bool,
) -> bool {
    let Some(target) = follower.docking_target else {
        return true;
    };
    if !docking_enabled || state.leader_of(follower.id) != target || target == follower.id {
        return true;
    }
    let t = state.vehicle(target);
    match t.mode {
        Mode::Independent => false,
        Mode::Collective => {
            let train = t.train.expect("collective modules belong to a train");
            trains.size(train) >= l_max || trains.tail(train) != target
        }
        Mode::Docking | Mode::NotApplicable => true,
    }
}

/// Coupling happens once the gap equals `d_intra` and the follower already
/// moves at the target's speed, so the train is rigid from the next step.
#[inline]
pub fn docking_complete_check(follower: &Vehicle, target: &Vehicle, gap: i32, d_intra: i32) -> bool {
    gap == d_intra && follower.speed == target.speed
}

pub(crate) fn abort_docking(state: &mut RoadState, id: VehicleId) {
    let v = state.vehicle_mut(id);
    v.mode = Mode::Independent;
    v.docking_target = None;
}

/// Couples a docking follower to its target: a new two-module train when
/// the target was independent, otherwise the follower becomes the new tail.
pub fn couple(
    state: &mut RoadState,
    trains: &mut TrainRegistry,
    follower: VehicleId,
    l_max: usize,
) -> Result<TrainId, InvariantViolation> {
    let f = state.vehicle(follower);
    let target = f
        .docking_target
        .ok_or_else(|| state.violation(format!("{follower} couples without a target")))?;
    let lane = f.lane;
    let t = state.vehicle(target);
    let train = match (t.mode, t.train) {
        (Mode::Independent, None) => {
            let id = trains.insert(vec![target, follower], lane);
            let tv = state.vehicle_mut(target);
            tv.mode = Mode::Collective;
            tv.train = Some(id);
            id
        }
        (Mode::Collective, Some(id)) => {
            let train = trains.train_mut(id);
            if train.size() >= l_max {
                return Err(state.violation(format!("{follower} would grow {id} beyond {l_max} modules")));
            }
            if train.tail() != target {
                return Err(state.violation(format!("{follower} couples to {target}, which is not the tail of {id}")));
            }
            train.members.push(follower);
            id
        }
        _ => {
            return Err(state.violation(format!("{follower} couples to {target} in mode {:?}", t.mode)));
        }
    };
    let fv = state.vehicle_mut(follower);
    fv.mode = Mode::Collective;
    fv.train = Some(train);
    fv.docking_target = None;
    Ok(train)
}

/// The leader's deterministic speed under the MAV operational limit, with
/// no stochastic step. Every member of the train moves at this speed.
pub fn collective_speed(leader: Following, params: &SimParams) -> i32 {
    tsm::deterministic_update(leader, params.v_max_mav, params).0
}

/// Per-member speeds for a train: the leader's speed copied to everyone.
pub fn collective_speeds(train: &Train, leader: Following, params: &SimParams) -> Vec<(VehicleId, i32)> {
    let v = collective_speed(leader, params);
    train.members.iter().map(|&m| (m, v)).collect()
}

/// A module leaving its train by changing lanes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Detachment {
    pub train: TrainId,
    /// Position of the module within the train, 0 = leader.
    pub index: usize,
    pub decision: LaneChangeDecision,
}

/// Draws one uniform number per coupled module (trains in id order, members
/// front to back) and picks, per train, the front-most module whose draw is
/// below `p_d`, whose target-lane back gap exceeds `v_max` and which has
/// room on the target lane.
pub fn detachment_decisions<R: Rng + ?Sized>(
    state: &RoadState,
    trains: &TrainRegistry,
    rng: &mut R,
    params: &SimParams,
) -> Vec<Detachment> {
    let mut out = Vec::new();
    for train in trains.iter() {
        let mut chosen = None;
        for (index, &m) in train.members.iter().enumerate() {
            let draw: f64 = rng.gen();
            if chosen.is_some() || draw >= params.p_d {
                continue;
            }
            let from = state.vehicle(m).lane;
            let to = 1 - from;
            let clear = state
                .side_gaps(m, to)
                .is_none_or(|side| side.back > params.v_max && side.front >= 0);
            if clear {
                chosen = Some(Detachment {
                    train: train.id,
                    index,
                    decision: LaneChangeDecision {
                        vehicle: m,
                        from_lane: from,
                        to_lane: to,
                        reason: LaneChangeReason::Detachment,
                    },
                });
            }
        }
        out.extend(chosen);
    }
    out
}

/// Splits a train around a module that has left it. Segments of two or
/// more modules stay trains (the front segment keeps the original id), a
/// single remaining module becomes independent, and so does the module
/// that left.
pub fn reorganize_after_detach(
    state: &mut RoadState,
    trains: &mut TrainRegistry,
    train: TrainId,
    detached_index: usize,
) -> Vec<TrainId> {
    let old = trains.take(train);
    let detached = old.members[detached_index];
    let front = &old.members[..detached_index];
    let rear = &old.members[detached_index + 1..];
    let mut surviving = Vec::new();

    let release = |state: &mut RoadState, id: VehicleId| {
        let v = state.vehicle_mut(id);
        v.mode = Mode::Independent;
        v.train = None;
        v.docking_target = None;
    };
    release(state, detached);

    let mut keep_id = Some(train);
    for segment in [front, rear] {
        match segment.len() {
            0 => {}
            1 => release(state, segment[0]),
            _ => {
                let id = match keep_id.take() {
                    Some(id) => {
                        trains.put(Train {
                            id,
                            members: segment.to_vec(),
                            lane: old.lane,
                        });
                        id
                    }
                    None => trains.insert(segment.to_vec(), old.lane),
                };
                for &m in segment {
                    state.vehicle_mut(m).train = Some(id);
                }
                surviving.push(id);
            }
        }
    }
    if let Some(id) = keep_id {
        trains.release(id);
    }
    surviving
}

/// Structural check of every train: size bounds, a single lane, members
/// contiguous at exactly `d_intra`, uniform speed, consistent modes.
pub fn check_trains(state: &RoadState, trains: &TrainRegistry, params: &SimParams) -> Result<(), InvariantViolation> {
    for train in trains.iter() {
        let n = train.size();
        if n < 2 || n > params.l_max {
            return Err(state.violation(format!("{} has {n} modules", train.id)));
        }
        let speed = state.vehicle(train.leader()).speed;
        for (k, &m) in train.members.iter().enumerate() {
            let v = state.vehicle(m);
            if v.mode != Mode::Collective || v.train != Some(train.id) || v.lane != train.lane {
                return Err(state.violation(format!("{m} is inconsistent with {}", train.id)));
            }
            if v.speed != speed {
                return Err(state.violation(format!("{} members move at different speeds", train.id)));
            }
            if k > 0 {
                let ahead = train.members[k - 1];
                if state.leader_of(m) != ahead || state.gap_between(m, ahead) != params.d_intra {
                    return Err(state.violation(format!(
                        "{} is not contiguous between {ahead} and {m} (gap {})",
                        train.id,
                        state.gap_between(m, ahead)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mav(id: u32, pos: i32) -> Vehicle {
        Vehicle::mav(VehicleId(id), 0, pos, 7)
    }

    fn info(v: &Vehicle, size: usize) -> NeighborInfo {
        NeighborInfo {
            id: v.id,
            kind: v.kind,
            mode: v.mode,
            train: v.train,
            speed: v.speed,
            train_size: size,
        }
    }

    #[test]
    fn trigger_conditions() {
        let f = mav(0, 100);
        let lead = mav(1, 200);
        assert!(docking_trigger(&f, &info(&lead, 1), false, 5, true));
        assert!(!docking_trigger(&f, &info(&lead, 1), false, 5, false));

        let mut tail = mav(2, 200);
        tail.mode = Mode::Collective;
        tail.train = Some(TrainId(0));
        assert!(!docking_trigger(&f, &info(&tail, 5), true, 5, true));
        assert!(docking_trigger(&f, &info(&tail, 4), true, 5, true));

        let car = Vehicle::conventional(VehicleId(3), 0, 200, 10);
        assert!(!docking_trigger(&f, &info(&car, 1), false, 5, true));

        let mut docking = mav(4, 200);
        docking.mode = Mode::Docking;
        assert!(!docking_trigger(&f, &info(&docking, 1), false, 5, true));
    }

    #[test]
    fn docking_speed_branches() {
        assert_eq!(docking_speed(60, 2, 66, 200, 0), 62);
        assert_eq!(docking_speed(66, 2, 66, 200, 0), 66);
        assert_eq!(docking_speed(10, 2, 66, 0, 0), 0);
    }

    #[test]
    fn completion_needs_matching_speed() {
        let f = mav(0, 100).with_speed(30);
        let t = mav(1, 107).with_speed(30);
        assert!(docking_complete_check(&f, &t, 0, 0));
        let slow = mav(0, 100).with_speed(28);
        assert!(!docking_complete_check(&slow, &t, 0, 0));
        assert!(!docking_complete_check(&f, &t, 3, 0));
    }

    fn train_of(n: usize) -> (RoadState, TrainRegistry, TrainId) {
        let vehicles: Vec<Vehicle> = (0..n as u32)
            .map(|i| {
                let mut v = mav(i, 1000 - 7 * i as i32);
                v.mode = Mode::Collective;
                v.train = Some(TrainId(0));
                v
            })
            .collect();
        let mut trains = TrainRegistry::default();
        let id = trains.insert((0..n as u32).map(VehicleId).collect(), 0);
        (RoadState::new(20_000, vehicles).unwrap(), trains, id)
    }

    #[test]
    fn leader_leaving_promotes_second() {
        let (mut s, mut trains, id) = train_of(5);
        let out = reorganize_after_detach(&mut s, &mut trains, id, 0);
        assert_eq!(out, vec![id]);
        assert_eq!(
            trains.get(id).unwrap().members,
            (1..5).map(VehicleId).collect::<Vec<_>>()
        );
        assert_eq!(s.vehicle(VehicleId(0)).mode, Mode::Independent);
        assert_eq!(s.vehicle(VehicleId(1)).train, Some(id));
    }

    #[test]
    fn two_train_dissolves() {
        let (mut s, mut trains, id) = train_of(2);
        let out = reorganize_after_detach(&mut s, &mut trains, id, 1);
        assert!(out.is_empty());
        assert!(trains.is_empty());
        for i in 0..2 {
            let v = s.vehicle(VehicleId(i));
            assert_eq!(v.mode, Mode::Independent);
            assert_eq!(v.train, None);
        }
    }

    #[test]
    fn middle_module_splits_train() {
        let (mut s, mut trains, id) = train_of(5);
        let out = reorganize_after_detach(&mut s, &mut trains, id, 2);
        assert_eq!(out.len(), 2);
        assert_eq!(trains.get(out[0]).unwrap().members, vec![VehicleId(0), VehicleId(1)]);
        assert_eq!(trains.get(out[1]).unwrap().members, vec![VehicleId(3), VehicleId(4)]);
        assert_eq!(s.vehicle(VehicleId(3)).train, Some(out[1]));
    }

    #[test]
    fn tail_leaving_keeps_front() {
        let (mut s, mut trains, id) = train_of(3);
        reorganize_after_detach(&mut s, &mut trains, id, 2);
        assert_eq!(trains.get(id).unwrap().members, vec![VehicleId(0), VehicleId(1)]);
        let (mut s, mut trains, id) = train_of(3);
        reorganize_after_detach(&mut s, &mut trains, id, 1);
        assert!(trains.is_empty());
        assert!(s.vehicles().iter().all(|v| v.mode == Mode::Independent));
    }

    #[test]
    fn collective_speed_is_copied() {
        let (_, trains, id) = train_of(3);
        let p = SimParams::default();
        let free = Following {
            speed: 61,
            gap: 5_000,
            leader_speed: 61,
            leader_gap: 5_000,
        };
        let speeds = collective_speeds(trains.get(id).unwrap(), free, &p);
        assert!(speeds.iter().all(|&(_, v)| v == 61));
        let blocked = Following {
            speed: 10,
            gap: 0,
            leader_speed: 0,
            leader_gap: 0,
        };
        assert_eq!(collective_speed(blocked, &p), 0);
        let limited = Following {
            speed: 30,
            gap: 25,
            leader_speed: 30,
            leader_gap: 0,
        };
        // min(32, 61, d_anti = 25, v_safe = round(-6 + sqrt(1236)) = 29)
        assert_eq!(collective_speed(limited, &p), 25);
    }
}
