//! Symmetric two-lane lane changing.
//!
//! Decisions are collected against the frozen pre-step state and applied
//! together. A lane change moves a vehicle sideways only, so it keeps the
//! exact longitudinal cells it had; since every changer checked that the
//! target lane was clear at those cells, simultaneous changes cannot overlap.

use rand::Rng;

use crate::error::InvariantViolation;
use crate::params::SimParams;
use crate::road::{Mode, RoadState, VehicleId, VehicleKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneChangeReason {
    GapIncentive,
    MavJoinIncentive,
    Detachment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LaneChangeDecision {
    pub vehicle: VehicleId,
    pub from_lane: usize,
    pub to_lane: usize,
    pub reason: LaneChangeReason,
}

/// The current lane constrains the vehicle and the other lane does not:
/// `d < min(v + a, v_eff_max)` and `d_other > min(v + a, v_eff_max)`.
#[inline]
pub fn incentive_gap(gap: i32, other_gap: i32, speed: i32, accel: i32, v_eff_max: i32) -> bool {
    let bound = (speed + accel).min(v_eff_max);
    gap < bound && other_gap > bound
}

/// An independent MAV stuck behind a conventional vehicle wants to move
/// behind a MAV on the other lane.
#[inline]
pub fn incentive_mav_join(current_leader: VehicleKind, target_leader: VehicleKind) -> bool {
    current_leader == VehicleKind::Conventional && target_leader == VehicleKind::Mav
}

/// `d_back > v_max`, always against the global limit.
#[inline]
pub fn safety_back(back_gap: i32, v_max: i32) -> bool {
    back_gap > v_max
}

/// Lane-change decisions for conventional vehicles and independent MAVs.
///
/// Docking MAVs and train members never appear here. One uniform draw is
/// consumed per vehicle whose incentive and safety criteria both hold, in
/// ascending id order; the change happens when the draw is below `p_lc`.
/// The MAV join incentive is only active while docking is.
pub fn collect_decisions<R: Rng + ?Sized>(
    state: &RoadState,
    params: &SimParams,
    rng: &mut R,
    docking_active: bool,
) -> Vec<LaneChangeDecision> {
    let mut out = Vec::new();
    let side = state.side_index();
    for v in state.vehicles() {
        let v_eff_max = match (v.kind, v.mode) {
            (VehicleKind::Conventional, _) => params.v_max,
            (VehicleKind::Mav, Mode::Independent) => params.v_max_mav,
            _ => continue,
        };
        let leader = state.leader_of(v.id);
        let gap = state.gap_between(v.id, leader);
        let bound = (v.speed + params.accel).min(v_eff_max);
        let gap_wanted = gap < bound;
        let join_wanted =
            v.is_mav() && docking_active && leader != v.id && state.vehicle(leader).kind == VehicleKind::Conventional;
        if !gap_wanted && !join_wanted {
            continue;
        }
        let to_lane = 1 - v.lane;
        let (other_gap, back_gap, target_leader) = match state.side_gaps_indexed(&side, v.id) {
            Some(side) => (side.front, side.back, Some(state.vehicle(side.leader).kind)),
            None => (state.road_length(), state.road_length(), None),
        };
        let by_gap = gap_wanted && incentive_gap(gap, other_gap, v.speed, params.accel, v_eff_max);
        let by_join = join_wanted
            && other_gap >= 0
            && target_leader.is_some_and(|t| incentive_mav_join(state.vehicle(leader).kind, t));
        if !(by_gap || by_join) || !safety_back(back_gap, params.v_max) {
            continue;
        }
        let draw: f64 = rng.gen();
        if draw < params.p_lc {
            out.push(LaneChangeDecision {
                vehicle: v.id,
                from_lane: v.lane,
                to_lane,
                reason: if by_gap {
                    LaneChangeReason::GapIncentive
                } else {
                    LaneChangeReason::MavJoinIncentive
                },
            });
        }
    }
    out
}

/// Applies decisions simultaneously by flipping lanes, then re-indexes.
pub fn apply_decisions(state: &mut RoadState, decisions: &[LaneChangeDecision]) -> Result<(), InvariantViolation> {
    if decisions.is_empty() {
        return Ok(());
    }
    for d in decisions {
        let v = state.vehicle_mut(d.vehicle);
        if v.lane != d.from_lane {
            return Err(state.violation(format!("{} is not on lane {}", d.vehicle, d.from_lane)));
        }
        v.lane = d.to_lane;
    }
    let changed: Vec<VehicleId> = decisions.iter().map(|d| d.vehicle).collect();
    state.reindex_after_lane_change(&changed);
    state.check_no_overlap()
}
