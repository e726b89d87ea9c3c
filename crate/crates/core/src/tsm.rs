//! Two-state safe-speed car following.
//!
//! All functions are pure; randomness enters only as an explicit uniform
//! draw in `[0, 1)`. Speeds are cells/s, gaps cells, the time gap `T` is an
//! exact number of milliseconds.

use crate::params::SimParams;

/// Expected speed of the leader over the next step: `min(d_l, v_l + a, v_max)`.
#[inline]
pub fn anticipated_leader_speed(leader_gap: i32, leader_speed: i32, accel: i32, v_max: i32) -> i32 {
    leader_gap.min(leader_speed + accel).min(v_max)
}

/// `d + max(v_anti - g_safety, 0)`.
#[inline]
pub fn anticipated_gap(gap: i32, v_anti: i32, g_safety: i32) -> i32 {
    gap + (v_anti - g_safety).max(0)
}

/// Gipps safe speed `round(-b + sqrt(b² + v_l² + 2·b·d))`.
///
/// The argument of the root is an integer, so `-b + sqrt(n)` can never sit
/// exactly on a half and `f64::round` gives the nearest integer.
#[inline]
pub fn safe_speed(leader_speed: i32, gap: i32, b_max: i32) -> i32 {
    let b = i64::from(b_max);
    let v = i64::from(leader_speed);
    let n = b * b + v * v + 2 * b * i64::from(gap);
    (-(b as f64) + (n as f64).sqrt()).round() as i32
}

/// `min(v + a, v_eff_max, d_anti, v_safe)`.
#[inline]
pub fn deterministic_speed(speed: i32, accel: i32, v_eff_max: i32, d_anti: i32, v_safe: i32) -> i32 {
    (speed + accel).min(v_eff_max).min(d_anti).min(v_safe)
}

/// `floor(d_anti / T)` with `T` in milliseconds.
#[inline]
fn floor_gap_over_time(d_anti: i32, time_gap_ms: i64) -> i64 {
    (i64::from(d_anti) * 1000).div_euclid(time_gap_ms)
}

/// Randomization deceleration: `a` in the normal state
/// (`v < b_defense + floor(d_anti / T)`), otherwise `b_defense`.
#[inline]
pub fn randomization_deceleration(speed: i32, d_anti: i32, time_gap_ms: i64, accel: i32, b_defense: i32) -> i32 {
    if i64::from(speed) < i64::from(b_defense) + floor_gap_over_time(d_anti, time_gap_ms) {
        accel
    } else {
        b_defense
    }
}

/// Randomization probability: `p_b` when stopped, `p_c` while
/// `v <= d_anti / T` (compared exactly), otherwise the logistic
/// `p_c + p_a / (1 + exp(alpha (v_c - v)))`.
#[inline]
pub fn randomization_probability(speed: i32, d_anti: i32, time_gap_ms: i64, params: &SimParams) -> f64 {
    if speed == 0 {
        params.p_b
    } else if i64::from(speed) * time_gap_ms <= i64::from(d_anti) * 1000 {
        params.p_c
    } else {
        params.p_c + params.p_a / (1.0 + (params.alpha * (params.v_c - f64::from(speed))).exp())
    }
}

/// `max(v_det - b_rand, 0)` when `draw < p`, else `v_det`.
#[inline]
pub fn apply_stochastic_deceleration(v_det: i32, b_rand: i32, p: f64, draw: f64) -> i32 {
    if draw < p {
        (v_det - b_rand).max(0)
    } else {
        v_det
    }
}

/// `(x + v) mod L`.
#[inline]
pub fn advance_position(position: i32, speed: i32, road_length: i32) -> i32 {
    (position + speed).rem_euclid(road_length)
}

/// What a following vehicle knows about itself and its leader at the start
/// of the speed update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Following {
    pub speed: i32,
    pub gap: i32,
    pub leader_speed: i32,
    pub leader_gap: i32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedDecision {
    pub v_det: i32,
    pub b_rand: i32,
    pub p: f64,
    pub v_final: i32,
}

/// Deterministic speed and the anticipated gap it was derived from.
#[inline]
pub fn deterministic_update(f: Following, v_eff_max: i32, params: &SimParams) -> (i32, i32) {
    let v_anti = anticipated_leader_speed(f.leader_gap, f.leader_speed, params.accel, params.v_max);
    let d_anti = anticipated_gap(f.gap, v_anti, params.g_safety);
    let v_safe = safe_speed(f.leader_speed, f.gap, params.b_max);
    let v_det = deterministic_speed(f.speed, params.accel, v_eff_max, d_anti, v_safe);
    (v_det, d_anti)
}

/// Full update for a conventional vehicle: deterministic step followed by
/// stochastic deceleration with the given draw.
pub fn stochastic_update(f: Following, v_eff_max: i32, params: &SimParams, draw: f64) -> SpeedDecision {
    let (v_det, d_anti) = deterministic_update(f, v_eff_max, params);
    let b_rand = randomization_deceleration(f.speed, d_anti, params.time_gap_ms, params.accel, params.b_defense);
    let p = randomization_probability(f.speed, d_anti, params.time_gap_ms, params);
    SpeedDecision {
        v_det,
        b_rand,
        p,
        v_final: apply_stochastic_deceleration(v_det, b_rand, p, draw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leader_speed_branches() {
        assert_eq!(anticipated_leader_speed(200, 64, 2, 66), 66);
        assert_eq!(anticipated_leader_speed(0, 30, 2, 66), 0);
        assert_eq!(anticipated_leader_speed(10, 30, 2, 66), 10);
    }

    #[test]
    fn anticipated_gap_clamps() {
        assert_eq!(anticipated_gap(40, 10, 20), 40);
        assert_eq!(anticipated_gap(40, 66, 20), 86);
        assert_eq!(anticipated_gap(0, 20, 20), 0);
    }

    #[test]
    fn safe_speed_values() {
        assert_eq!(safe_speed(0, 0, 6), 0);
        assert_eq!(safe_speed(0, 6, 6), 4);
        assert_eq!(safe_speed(20, 50, 6), 26);
    }

    #[test]
    fn deterministic_speed_branches() {
        assert_eq!(deterministic_speed(64, 2, 66, 200, 100), 66);
        assert_eq!(deterministic_speed(0, 2, 66, 0, 0), 0);
        assert_eq!(deterministic_speed(30, 2, 66, 25, 40), 25);
    }

    #[test]
    fn randomization_deceleration_branches() {
        assert_eq!(randomization_deceleration(10, 100, 1800, 2, 2), 2);
        assert_eq!(randomization_deceleration(60, 20, 1800, 2, 2), 2);
        assert_eq!(randomization_deceleration(0, 0, 1800, 2, 2), 2);
        // a != b_defense separates the branches
        assert_eq!(randomization_deceleration(10, 100, 1800, 3, 1), 3);
        assert_eq!(randomization_deceleration(60, 20, 1800, 3, 1), 1);
    }

    #[test]
    fn randomization_probability_branches() {
        let p = SimParams::default();
        assert_eq!(randomization_probability(0, 500, 1800, &p), 0.52);
        assert_eq!(randomization_probability(10, 100, 1800, &p), 0.1);
        let defensive = randomization_probability(60, 20, 1800, &p);
        assert!((defensive - 0.95).abs() < 1e-12);
        // v*T == d_anti exactly stays on the normal branch: 10 * 1.8 = 18
        assert_eq!(randomization_probability(10, 18, 1800, &p), 0.1);
        assert!(randomization_probability(28, 18, 1800, &p) > 0.1);
        assert!(randomization_probability(30, 18, 1800, &p) == 0.1 + 0.85 / 2.0);
    }

    #[test]
    fn stochastic_step() {
        assert_eq!(apply_stochastic_deceleration(66, 2, 0.95, 0.5), 64);
        assert_eq!(apply_stochastic_deceleration(1, 2, 1.0, 0.0), 0);
        assert_eq!(apply_stochastic_deceleration(40, 2, 0.1, 0.9), 40);
    }

    #[test]
    fn position_wraps() {
        assert_eq!(advance_position(100, 66, 20_000), 166);
        assert_eq!(advance_position(19_990, 30, 20_000), 20);
        assert_eq!(advance_position(0, 0, 20_000), 0);
    }
}
