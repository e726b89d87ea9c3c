//! Vehicles on a two-lane ring and the per-lane ordering used for neighbor
//! lookups.
//!
//! A vehicle's `position` is its front-bumper cell; it occupies
//! `[position - length + 1, position]` modulo the ring length. Each lane
//! keeps its vehicle ids sorted by position, plus every vehicle's rank in
//! that list, so the same-lane leader and follower are O(1) and adjacent-lane
//! neighbors are a binary search.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::InvariantViolation;
use crate::mav::{TrainId, TrainRegistry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl VehicleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    Conventional,
    Mav,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Conventional vehicles have no operating mode.
    NotApplicable,
    Independent,
    Docking,
    Collective,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub mode: Mode,
    pub lane: usize,
    /// Front-bumper cell.
    pub position: i32,
    /// Cells per step.
    pub speed: i32,
    pub length: i32,
    pub train: Option<TrainId>,
    pub docking_target: Option<VehicleId>,
}

impl Vehicle {
    pub fn conventional(id: VehicleId, lane: usize, position: i32, length: i32) -> Self {
        Vehicle {
            id,
            kind: VehicleKind::Conventional,
            mode: Mode::NotApplicable,
            lane,
            position,
            speed: 0,
            length,
            train: None,
            docking_target: None,
        }
    }

    pub fn mav(id: VehicleId, lane: usize, position: i32, length: i32) -> Self {
        Vehicle {
            id,
            kind: VehicleKind::Mav,
            mode: Mode::Independent,
            lane,
            position,
            speed: 0,
            length,
            train: None,
            docking_target: None,
        }
    }

    pub fn with_speed(mut self, speed: i32) -> Self {
        self.speed = speed;
        self
    }

    pub fn is_mav(&self) -> bool {
        self.kind == VehicleKind::Mav
    }
}

/// Attributes of a neighboring vehicle as seen by the vehicle being updated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborInfo {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub mode: Mode,
    pub train: Option<TrainId>,
    pub speed: i32,
    /// 1 for anything not in a train.
    pub train_size: usize,
}

/// Neighbors and gaps on the adjacent lane, see [`RoadState::side_gaps`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideGaps {
    pub leader: VehicleId,
    pub follower: VehicleId,
    pub front: i32,
    pub back: i32,
}

/// Adjacent-lane leader of every vehicle, valid until the state changes.
#[derive(Clone, Debug)]
pub struct SideIndex {
    leader_rank: Vec<u32>,
}

/// Gaps and neighbor attributes for one vehicle.
///
/// Same-lane gaps are never negative. Adjacent-lane gaps are negative when a
/// vehicle on that lane overlaps this vehicle's longitudinal span; such a
/// lane is blocked. An empty adjacent lane reports both gaps as the ring
/// length and no neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborView {
    /// Gap to the same-lane leader (`d`).
    pub gap: i32,
    pub leader: NeighborInfo,
    /// The leader's own gap (`d_l`). A train moves as one rigid body, so for
    /// a leader that belongs to a train this is the gap ahead of the train's
    /// front module.
    pub leader_gap: i32,
    pub target_lane: usize,
    /// Gap to the leader on the target lane (`d_other`).
    pub other_gap: i32,
    /// Gap between the target-lane follower and this vehicle (`d_back`).
    pub back_gap: i32,
    pub target_leader: Option<NeighborInfo>,
    pub target_follower: Option<VehicleId>,
}

#[derive(Clone, Debug)]
pub struct RoadState {
    road_length: i32,
    vehicles: Vec<Vehicle>,
    lanes: [Vec<VehicleId>; 2],
    rank: Vec<u32>,
    pub time: u32,
}

impl RoadState {
    /// Builds a state from vehicles whose ids must equal their index.
    pub fn new(road_length: i32, vehicles: Vec<Vehicle>) -> Result<Self, InvariantViolation> {
        for (i, v) in vehicles.iter().enumerate() {
            let bad = if v.id.index() != i {
                Some(format!("vehicle at index {i} has id {}", v.id))
            } else if v.lane > 1 {
                Some(format!("{} on lane {}", v.id, v.lane))
            } else if !(0..road_length).contains(&v.position) {
                Some(format!("{} at position {} outside the ring", v.id, v.position))
            } else {
                None
            };
            if let Some(message) = bad {
                return Err(InvariantViolation { time: 0, message });
            }
        }
        let mut state = RoadState {
            road_length,
            rank: vec![0; vehicles.len()],
            vehicles,
            lanes: [Vec::new(), Vec::new()],
            time: 0,
        };
        state.rebuild_index();
        state.check_no_overlap()?;
        Ok(state)
    }

    #[inline]
    pub fn road_length(&self) -> i32 {
        self.road_length
    }

    #[inline]
    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    #[inline]
    pub fn vehicle(&self, id: VehicleId) -> &Vehicle {
        &self.vehicles[id.index()]
    }

    #[inline]
    pub(crate) fn vehicle_mut(&mut self, id: VehicleId) -> &mut Vehicle {
        &mut self.vehicles[id.index()]
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Vehicle ids on a lane in ascending position order.
    pub fn lane_order(&self, lane: usize) -> &[VehicleId] {
        &self.lanes[lane]
    }

    /// Sorts both lanes from scratch.
    pub fn rebuild_index(&mut self) {
        for lane in 0..2 {
            let mut order: Vec<VehicleId> = self.vehicles.iter().filter(|v| v.lane == lane).map(|v| v.id).collect();
            order.sort_unstable_by_key(|id| (self.vehicles[id.index()].position, *id));
            self.lanes[lane] = order;
        }
        self.refresh_ranks();
    }

    /// Moves the listed vehicles to their (already updated) lanes by merging
    /// them into the sorted lane orders.
    pub(crate) fn reindex_after_lane_change(&mut self, changed: &[VehicleId]) {
        let vehicles = &self.vehicles;
        let key = |id: &VehicleId| (vehicles[id.index()].position, *id);
        for lane in 0..2 {
            let mut incoming: Vec<VehicleId> = changed
                .iter()
                .copied()
                .filter(|id| vehicles[id.index()].lane == lane)
                .collect();
            incoming.sort_unstable_by_key(key);
            let staying = self.lanes[lane]
                .iter()
                .copied()
                .filter(|id| vehicles[id.index()].lane == lane);
            let mut merged = Vec::with_capacity(self.lanes[lane].len() + incoming.len());
            let mut inc = incoming.into_iter().peekable();
            for id in staying {
                while let Some(&next) = inc.peek() {
                    if key(&next) < key(&id) {
                        merged.push(next);
                        inc.next();
                    } else {
                        break;
                    }
                }
                merged.push(id);
            }
            merged.extend(inc);
            self.lanes[lane] = merged;
        }
        self.refresh_ranks();
    }

    /// Re-sorts lanes after a synchronous position update. Vehicles never
    /// pass each other within a lane, so the only disorder is the block of
    /// vehicles that wrapped past the end of the ring; rotating it to the
    /// front restores order without a full sort.
    pub(crate) fn reindex_after_move(&mut self) {
        for lane in 0..2 {
            let order = &mut self.lanes[lane];
            let vehicles = &self.vehicles;
            let pos = |id: &VehicleId| vehicles[id.index()].position;
            if let Some(cut) = order.windows(2).position(|w| pos(&w[0]) > pos(&w[1])) {
                order.rotate_left(cut + 1);
                if !order.windows(2).all(|w| pos(&w[0]) <= pos(&w[1])) {
                    order.sort_unstable_by_key(|id| (vehicles[id.index()].position, *id));
                }
            }
        }
        self.refresh_ranks();
    }

    fn refresh_ranks(&mut self) {
        for order in &self.lanes {
            for (r, id) in order.iter().enumerate() {
                self.rank[id.index()] = r as u32;
            }
        }
    }

    /// Forward ring distance from cell `from` to cell `to`, in `[0, L)`.
    #[inline]
    pub fn forward_distance(&self, from: i32, to: i32) -> i32 {
        (to - from).rem_euclid(self.road_length)
    }

    /// Same-lane leader. A vehicle alone on its lane leads itself.
    #[inline]
    pub fn leader_of(&self, id: VehicleId) -> VehicleId {
        let v = &self.vehicles[id.index()];
        let order = &self.lanes[v.lane];
        let r = self.rank[id.index()] as usize;
        order[(r + 1) % order.len()]
    }

    /// Same-lane follower. A vehicle alone on its lane follows itself.
    #[inline]
    pub fn follower_of(&self, id: VehicleId) -> VehicleId {
        let v = &self.vehicles[id.index()];
        let order = &self.lanes[v.lane];
        let r = self.rank[id.index()] as usize;
        order[(r + order.len() - 1) % order.len()]
    }

    /// Bumper-to-bumper gap to the same-lane leader, `d = x_l - x - L_l`.
    #[inline]
    pub fn gap_ahead(&self, id: VehicleId) -> i32 {
        let leader = self.leader_of(id);
        self.gap_between(id, leader)
    }

    /// Gap from `follower` to `leader` when `leader` is ahead on the ring.
    #[inline]
    pub fn gap_between(&self, follower: VehicleId, leader: VehicleId) -> i32 {
        let f = &self.vehicles[follower.index()];
        if follower == leader {
            return self.road_length - f.length;
        }
        let l = &self.vehicles[leader.index()];
        self.forward_distance(f.position, l.position) - l.length
    }

    /// Leader and follower a vehicle with front at `position` would have on
    /// `lane`. The leader is the first vehicle whose front is at or ahead of
    /// `position`.
    pub fn locate(&self, lane: usize, position: i32) -> Option<(VehicleId, VehicleId)> {
        let order = &self.lanes[lane];
        if order.is_empty() {
            return None;
        }
        let idx = order.partition_point(|id| self.vehicles[id.index()].position < position);
        let leader = order[idx % order.len()];
        let follower = order[(idx + order.len() - 1) % order.len()];
        Some((leader, follower))
    }

    /// Leader and follower on `lane` for vehicle `id` together with the
    /// front and back gaps it would have there. Negative gaps mean the cells
    /// are taken.
    pub fn side_gaps(&self, id: VehicleId, lane: usize) -> Option<SideGaps> {
        let v = &self.vehicles[id.index()];
        let (l, f) = self.locate(lane, v.position)?;
        let lv = &self.vehicles[l.index()];
        let fv = &self.vehicles[f.index()];
        Some(SideGaps {
            leader: l,
            follower: f,
            front: self.forward_distance(v.position, lv.position) - lv.length,
            back: self.forward_distance(fv.position, v.position) - v.length,
        })
    }

    /// [`side_gaps`](Self::side_gaps) for every vehicle at once, by merging
    /// the two sorted lanes.
    pub fn side_index(&self) -> SideIndex {
        let mut leader_rank = vec![u32::MAX; self.vehicles.len()];
        for lane in 0..2 {
            let other = &self.lanes[1 - lane];
            if other.is_empty() {
                continue;
            }
            let mut k = 0;
            for &id in &self.lanes[lane] {
                let p = self.vehicles[id.index()].position;
                while k < other.len() && self.vehicles[other[k].index()].position < p {
                    k += 1;
                }
                leader_rank[id.index()] = (k % other.len()) as u32;
            }
        }
        SideIndex { leader_rank }
    }

    /// Adjacent-lane gaps for `id` from a precomputed [`SideIndex`].
    pub fn side_gaps_indexed(&self, index: &SideIndex, id: VehicleId) -> Option<SideGaps> {
        let r = index.leader_rank[id.index()];
        if r == u32::MAX {
            return None;
        }
        let v = &self.vehicles[id.index()];
        let other = &self.lanes[1 - v.lane];
        let r = r as usize;
        let l = other[r];
        let f = other[(r + other.len() - 1) % other.len()];
        let lv = &self.vehicles[l.index()];
        let fv = &self.vehicles[f.index()];
        Some(SideGaps {
            leader: l,
            follower: f,
            front: self.forward_distance(v.position, lv.position) - lv.length,
            back: self.forward_distance(fv.position, v.position) - v.length,
        })
    }

    pub fn neighbor_info(&self, trains: &TrainRegistry, id: VehicleId) -> NeighborInfo {
        let v = &self.vehicles[id.index()];
        NeighborInfo {
            id,
            kind: v.kind,
            mode: v.mode,
            train: v.train,
            speed: v.speed,
            train_size: v.train.map_or(1, |t| trains.size(t)),
        }
    }

    /// The leader's own gap under the rigid-train convention.
    pub fn effective_leader_gap(&self, trains: &TrainRegistry, leader: VehicleId) -> i32 {
        match self.vehicles[leader.index()].train {
            Some(t) => self.gap_ahead(trains.leader(t)),
            None => self.gap_ahead(leader),
        }
    }

    pub fn neighbor_view(&self, trains: &TrainRegistry, id: VehicleId, target_lane: usize) -> NeighborView {
        let v = &self.vehicles[id.index()];
        let leader = self.leader_of(id);
        let mut view = NeighborView {
            gap: self.gap_between(id, leader),
            leader: self.neighbor_info(trains, leader),
            leader_gap: self.effective_leader_gap(trains, leader),
            target_lane,
            other_gap: self.road_length,
            back_gap: self.road_length,
            target_leader: None,
            target_follower: None,
        };
        if target_lane == v.lane {
            let follower = self.follower_of(id);
            view.other_gap = view.gap;
            view.back_gap = self.gap_between(follower, id);
            view.target_leader = Some(view.leader);
            view.target_follower = Some(follower);
            return view;
        }
        if let Some(side) = self.side_gaps(id, target_lane) {
            view.other_gap = side.front;
            view.back_gap = side.back;
            view.target_leader = Some(self.neighbor_info(trains, side.leader));
            view.target_follower = Some(side.follower);
        }
        view
    }

    /// Overlap check in O(n): with each lane sorted by front position, two
    /// vehicles overlap iff some consecutive pair has a negative gap.
    pub fn check_no_overlap(&self) -> Result<(), InvariantViolation> {
        for (lane, order) in self.lanes.iter().enumerate() {
            if order.len() == 1 {
                let v = &self.vehicles[order[0].index()];
                if v.length > self.road_length {
                    return Err(self.violation(format!("{} longer than the ring", v.id)));
                }
                continue;
            }
            for (k, &id) in order.iter().enumerate() {
                let leader = order[(k + 1) % order.len()];
                let gap = self.gap_between(id, leader);
                if gap < 0 {
                    return Err(self.violation(format!(
                        "overlap on lane {lane}: {id} at {} and {leader} at {} (gap {gap})",
                        self.vehicles[id.index()].position,
                        self.vehicles[leader.index()].position
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cell-level occupancy rebuilt from the vehicle list, one grid per lane.
    /// Fails on the first doubly-occupied cell.
    pub fn occupancy_grid(&self) -> Result<[Vec<Option<VehicleId>>; 2], InvariantViolation> {
        let l = self.road_length as usize;
        let mut grid = [vec![None; l], vec![None; l]];
        for v in &self.vehicles {
            for k in 0..v.length {
                let cell = (v.position - k).rem_euclid(self.road_length) as usize;
                if let Some(other) = grid[v.lane][cell].replace(v.id) {
                    return Err(self.violation(format!(
                        "cell {cell} on lane {} held by both {other} and {}",
                        v.lane, v.id
                    )));
                }
            }
        }
        Ok(grid)
    }

    /// Full consistency check: the index matches the vehicle list and the
    /// cell grid has no double occupancy. O(road_length); meant for tests.
    pub fn check_consistency(&self) -> Result<(), InvariantViolation> {
        let mut seen = vec![false; self.vehicles.len()];
        for (lane, order) in self.lanes.iter().enumerate() {
            for (r, id) in order.iter().enumerate() {
                let v = &self.vehicles[id.index()];
                if v.lane != lane || self.rank[id.index()] as usize != r || seen[id.index()] {
                    return Err(self.violation(format!("index entry for {id} is stale")));
                }
                seen[id.index()] = true;
            }
            if !order
                .windows(2)
                .all(|w| self.vehicles[w[0].index()].position <= self.vehicles[w[1].index()].position)
            {
                return Err(self.violation(format!("lane {lane} order is not sorted")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(self.violation(format!("v{i} missing from the lane index")));
        }
        self.occupancy_grid()?;
        Ok(())
    }

    pub(crate) fn violation(&self, message: String) -> InvariantViolation {
        InvariantViolation {
            time: self.time,
            message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(id: u32, lane: usize, pos: i32) -> Vehicle {
        Vehicle::conventional(VehicleId(id), lane, pos, 10)
    }

    #[test]
    fn gap_to_leader() {
        let s = RoadState::new(20_000, vec![conv(0, 0, 100), conv(1, 0, 150)]).unwrap();
        assert_eq!(s.gap_ahead(VehicleId(0)), 40);
    }

    #[test]
    fn gap_wraps_around_the_ring() {
        let s = RoadState::new(20_000, vec![conv(0, 0, 19_990), conv(1, 0, 30)]).unwrap();
        assert_eq!(s.leader_of(VehicleId(0)), VehicleId(1));
        assert_eq!(s.gap_ahead(VehicleId(0)), 30);
    }

    #[test]
    fn lone_vehicle_leads_itself() {
        let s = RoadState::new(20_000, vec![conv(0, 0, 500)]).unwrap();
        assert_eq!(s.leader_of(VehicleId(0)), VehicleId(0));
        assert_eq!(s.gap_ahead(VehicleId(0)), 19_990);
    }

    #[test]
    fn empty_target_lane_reports_ring_length() {
        let s = RoadState::new(20_000, vec![conv(0, 0, 500)]).unwrap();
        let view = s.neighbor_view(&TrainRegistry::default(), VehicleId(0), 1);
        assert_eq!(view.other_gap, 20_000);
        assert_eq!(view.back_gap, 20_000);
        assert!(view.target_leader.is_none());
    }

    #[test]
    fn side_by_side_vehicle_blocks_target_lane() {
        let s = RoadState::new(1_000, vec![conv(0, 0, 500), conv(1, 1, 505)]).unwrap();
        let view = s.neighbor_view(&TrainRegistry::default(), VehicleId(0), 1);
        assert_eq!(view.other_gap, -5);
        assert_eq!(view.back_gap, 1_000 - 5 - 10);
    }

    #[test]
    fn overlap_is_rejected() {
        let err = RoadState::new(1_000, vec![conv(0, 0, 100), conv(1, 0, 105)]).unwrap_err();
        assert!(err.message.contains("overlap"));
    }

    #[test]
    fn reindex_handles_wrap() {
        let mut s = RoadState::new(1_000, vec![conv(0, 0, 900), conv(1, 0, 990), conv(2, 0, 100)]).unwrap();
        s.vehicle_mut(VehicleId(1)).position = 20;
        s.reindex_after_move();
        assert_eq!(s.lane_order(0), &[VehicleId(1), VehicleId(2), VehicleId(0)]);
        s.check_consistency().unwrap();
    }
}
