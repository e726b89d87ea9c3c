//! The car-following and docking rules evaluated by hand.
//!
//! Prints how a car at 30 m/s reacts to a stopped queue as it closes in,
//! and the same approach for a docking module.

use mavsim::lanechange::{incentive_gap, safety_back};
use mavsim::mav::docking_speed;
use mavsim::tsm::{self, Following};
use mavsim::SimParams;

fn main() {
    let p = SimParams::default();

    println!("follower at 60 cells/s, leader stopped");
    println!(
        "{:>5} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "gap", "d_anti", "v_safe", "v_det", "b_rand", "p"
    );
    for gap in [200, 120, 80, 40, 20, 10, 0] {
        let f = Following {
            speed: 60,
            gap,
            leader_speed: 0,
            leader_gap: 0,
        };
        let d = tsm::stochastic_update(f, p.v_max, &p, 1.0);
        let (_, d_anti) = tsm::deterministic_update(f, p.v_max, &p);
        println!(
            "{gap:>5} {d_anti:>6} {:>6} {:>6} {:>6} {:>6.3}",
            tsm::safe_speed(0, gap, p.b_max),
            d.v_det,
            d.b_rand,
            d.p
        );
    }

    // Randomization probability across speeds for a fixed anticipated gap.
    println!("\nrandomization probability, d_anti = 40 cells");
    for v in [0, 10, 20, 25, 28, 30, 32, 35, 66] {
        println!(
            "  v={v:>2}  p={:.4}",
            tsm::randomization_probability(v, 40, p.time_gap_ms, &p)
        );
    }

    println!(
        "\nlane change at v=64: gap 50, other lane 100 -> {}",
        incentive_gap(50, 100, 64, p.accel, p.v_max)
    );
    println!(
        "back gap 66 safe? {}   67? {}",
        safety_back(66, p.v_max),
        safety_back(67, p.v_max)
    );

    println!("\ndocking from 50 cells/s toward a module at 61 cells/s, 120 cells ahead");
    let (mut v, mut gap) = (50, 120);
    let target = p.v_max_mav;
    for t in 1.. {
        v = docking_speed(v, p.a_p, p.v_max, gap + target, p.d_intra);
        gap += target - v;
        println!("  t={t:>2}  v={v:>2}  gap={gap:>3}");
        if gap == p.d_intra && v == target {
            break;
        }
    }
}
