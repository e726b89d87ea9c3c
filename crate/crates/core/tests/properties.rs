use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mavsim::lanechange::{collect_decisions, LaneChangeDecision};
use mavsim::tsm::*;
use mavsim::{RoadState, Scenario, SimParams, Simulation, TrainRegistry, Vehicle, VehicleId};

const RING: i32 = 400;

/// Per lane: (spacing before the vehicle, is_mav, speed).
fn lanes_strategy() -> impl Strategy<Value = [Vec<(i32, bool, i32)>; 2]> {
    let lane = prop::collection::vec((0..30i32, any::<bool>(), 0..=66i32), 0..25);
    [lane.clone(), lane]
}

fn build(lanes: &[Vec<(i32, bool, i32)>; 2], offset: i32) -> RoadState {
    let mut vehicles = Vec::new();
    for (lane, layout) in lanes.iter().enumerate() {
        let mut x = offset + lane as i32 * 3;
        for &(space, mav, speed) in layout {
            let len = if mav { 7 } else { 10 };
            let pos = x + space + len;
            if pos - offset - lane as i32 * 3 >= RING {
                break;
            }
            let id = VehicleId(vehicles.len() as u32);
            let v = if mav {
                Vehicle::mav(id, lane, pos.rem_euclid(RING), len)
            } else {
                Vehicle::conventional(id, lane, pos.rem_euclid(RING), len)
            };
            vehicles.push(v.with_speed(speed));
            x = pos;
        }
    }
    RoadState::new(RING, vehicles).expect("strategy builds valid states")
}

fn fd(from: i32, to: i32) -> i32 {
    (to - from).rem_euclid(RING)
}

/// O(n) scans per query, no index.
fn brute_leader(state: &RoadState, id: VehicleId) -> VehicleId {
    let v = state.vehicle(id);
    state
        .vehicles()
        .iter()
        .filter(|o| o.lane == v.lane && o.id != id)
        .min_by_key(|o| fd(v.position, o.position))
        .map_or(id, |o| o.id)
}

fn brute_follower(state: &RoadState, id: VehicleId) -> VehicleId {
    let v = state.vehicle(id);
    state
        .vehicles()
        .iter()
        .filter(|o| o.lane == v.lane && o.id != id)
        .min_by_key(|o| fd(o.position, v.position))
        .map_or(id, |o| o.id)
}

fn brute_side(state: &RoadState, id: VehicleId, lane: usize) -> Option<(VehicleId, VehicleId, i32, i32)> {
    let v = state.vehicle(id);
    let others: Vec<&Vehicle> = state.vehicles().iter().filter(|o| o.lane == lane).collect();
    let l = others.iter().min_by_key(|o| fd(v.position, o.position))?;
    let f = others.iter().max_by_key(|o| fd(v.position, o.position))?;
    Some((
        l.id,
        f.id,
        fd(v.position, l.position) - l.length,
        fd(f.position, v.position) - v.length,
    ))
}

fn mirror(state: &RoadState) -> RoadState {
    let vehicles = state
        .vehicles()
        .iter()
        .map(|v| Vehicle {
            lane: 1 - v.lane,
            ..v.clone()
        })
        .collect();
    RoadState::new(state.road_length(), vehicles).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn neighbor_view_matches_brute_force(lanes in lanes_strategy(), offset in 0..RING) {
        let state = build(&lanes, offset);
        let trains = TrainRegistry::default();
        for v in state.vehicles() {
            let leader = brute_leader(&state, v.id);
            prop_assert_eq!(state.leader_of(v.id), leader);
            prop_assert_eq!(state.follower_of(v.id), brute_follower(&state, v.id));
            let gap = if leader == v.id {
                RING - v.length
            } else {
                fd(v.position, state.vehicle(leader).position) - state.vehicle(leader).length
            };
            let own = state.neighbor_view(&trains, v.id, v.lane);
            prop_assert_eq!(own.gap, gap);
            prop_assert!(own.gap >= 0);

            let other = 1 - v.lane;
            let view = state.neighbor_view(&trains, v.id, other);
            match brute_side(&state, v.id, other) {
                Some((l, f, front, back)) => {
                    prop_assert_eq!(view.target_leader.map(|n| n.id), Some(l));
                    prop_assert_eq!(view.target_follower, Some(f));
                    prop_assert_eq!(view.other_gap, front);
                    prop_assert_eq!(view.back_gap, back);
                }
                None => {
                    prop_assert!(view.target_leader.is_none());
                    prop_assert_eq!(view.other_gap, RING);
                    prop_assert_eq!(view.back_gap, RING);
                }
            }
        }
    }

    #[test]
    fn side_index_agrees_with_direct_lookup(lanes in lanes_strategy(), offset in 0..RING) {
        let state = build(&lanes, offset);
        let index = state.side_index();
        for v in state.vehicles() {
            prop_assert_eq!(state.side_gaps_indexed(&index, v.id), state.side_gaps(v.id, 1 - v.lane));
        }
    }

    #[test]
    fn built_states_are_consistent(lanes in lanes_strategy(), offset in 0..RING) {
        let state = build(&lanes, offset);
        prop_assert!(state.check_consistency().is_ok());
        let grid = state.occupancy_grid().unwrap();
        let occupied: usize = grid.iter().flatten().filter(|c| c.is_some()).count();
        let cells: i32 = state.vehicles().iter().map(|v| v.length).sum();
        prop_assert_eq!(occupied as i32, cells);
    }

    #[test]
    fn lane_change_decisions_are_lane_symmetric(lanes in lanes_strategy(), offset in 0..RING, seed in any::<u64>(), docking in any::<bool>()) {
        let state = build(&lanes, offset);
        let params = SimParams { road_length: RING, p_lc: 0.7, ..SimParams::default() };
        let a = collect_decisions(&state, &params, &mut ChaCha8Rng::seed_from_u64(seed), docking);
        let b = collect_decisions(&mirror(&state), &params, &mut ChaCha8Rng::seed_from_u64(seed), docking);
        let flipped: Vec<LaneChangeDecision> = a
            .iter()
            .map(|d| LaneChangeDecision { from_lane: 1 - d.from_lane, to_lane: 1 - d.to_lane, ..*d })
            .collect();
        prop_assert_eq!(flipped, b);
    }

    #[test]
    fn zero_lane_change_probability_freezes_lanes(lanes in lanes_strategy(), offset in 0..RING, seed in any::<u64>()) {
        let state = build(&lanes, offset);
        let params = SimParams { road_length: RING, p_lc: 0.0, ..SimParams::default() };
        prop_assert!(collect_decisions(&state, &params, &mut ChaCha8Rng::seed_from_u64(seed), true).is_empty());
    }

    #[test]
    fn safe_speed_is_monotone(v_l in 0..200i32, d in 0..2000i32, b in 1..12i32) {
        let s = safe_speed(v_l, d, b);
        prop_assert!(safe_speed(v_l + 1, d, b) >= s);
        prop_assert!(safe_speed(v_l, d + 1, b) >= s);
        prop_assert!(s >= 0);
    }

    #[test]
    fn deterministic_speed_is_bounded(v in 0..100i32, a in 0..5i32, v_eff in 0..100i32, d_anti in 0..500i32, v_safe in 0..200i32) {
        let s = deterministic_speed(v, a, v_eff, d_anti, v_safe);
        prop_assert!(s <= v_eff.min(d_anti));
        prop_assert!(s <= v + a);
        prop_assert!(s <= v_safe);
    }

    #[test]
    fn speed_decision_invariants(speed in 0..=66i32, gap in 0..400i32, v_l in 0..=66i32, d_l in 0..400i32, draw in 0.0..1.0f64) {
        let params = SimParams::default();
        let f = Following { speed, gap, leader_speed: v_l, leader_gap: d_l };
        let s = stochastic_update(f, params.v_max, &params, draw);
        prop_assert!(0 <= s.v_final && s.v_final <= s.v_det && s.v_det <= params.v_max);
        prop_assert!(s.v_det - s.v_final == 0 || s.v_det - s.v_final <= s.b_rand);
        if speed == 0 {
            prop_assert_eq!(s.p, params.p_b);
        } else if s.p != params.p_c {
            prop_assert!(s.p > params.p_c && s.p <= params.p_c + params.p_a);
        }
    }

    #[test]
    fn zero_probability_is_identity(v_det in 0..100i32, b in 0..10i32, draw in 0.0..1.0f64) {
        prop_assert_eq!(apply_stochastic_deceleration(v_det, b, 0.0, draw), v_det);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn engine_keeps_state_consistent(density in 20.0..140.0f64, p_mav in 0.0..1.0f64, seed in any::<u64>(), collective in any::<bool>()) {
        let params = SimParams {
            road_length: 2000,
            density: density.round(),
            p_mav,
            seed,
            scenario: if collective { Scenario::Collective } else { Scenario::IndependentOnly },
            t_total: 400,
            t_dock_start: 50,
            t_measure_start: 300,
            ..SimParams::default()
        };
        let mut sim = Simulation::new(params.clone()).unwrap();
        let n = sim.state().len();
        for _ in 0..params.t_total {
            sim.step().unwrap();
            prop_assert!(sim.state().check_consistency().is_ok());
            prop_assert_eq!(sim.state().len(), n);
            for t in sim.trains().iter() {
                prop_assert!(t.size() >= 2 && t.size() <= params.l_max);
                let lead = sim.state().vehicle(t.leader());
                for w in t.members.windows(2) {
                    let (a, b) = (sim.state().vehicle(w[0]), sim.state().vehicle(w[1]));
                    prop_assert_eq!(sim.state().gap_between(b.id, a.id), params.d_intra);
                    prop_assert_eq!(b.lane, lead.lane);
                    prop_assert_eq!(b.speed, lead.speed);
                }
            }
        }
    }
}
