//! Flow before and after docking switches on.
//!
//! Runs density 60, p_mav 0.5 in the collective scenario and prints the
//! flow averaged over 500-step blocks. The onset at t = 5000 shows up as a
//! step change.

use mavsim::metrics::window_mean;
use mavsim::{run, Scenario, SimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let params = SimParams {
        density: 60.0,
        p_mav: 0.5,
        scenario: Scenario::Collective,
        seed,
        ..SimParams::default()
    };
    let out = run(&params)?;
    let flow = |a: usize, b: usize| window_mean(&out.series, a, b, |r| r.flow);

    let block = 500;
    let top = (0..out.series.len())
        .step_by(block)
        .map(|a| flow(a, a + block))
        .fold(0.0, f64::max);
    for a in (0..out.series.len()).step_by(block) {
        let q = flow(a, a + block);
        let bar = "#".repeat((q / top * 50.0) as usize);
        let mark = if a == params.t_dock_start as usize {
            " <- docking on"
        } else {
            ""
        };
        println!("{a:>6} {q:7.0} {bar}{mark}");
    }

    let before = flow(3000, 5000);
    let after = flow(6000, 8000);
    println!("\nsteps 3000-5000: {before:.0} veh/h/lane");
    println!(
        "steps 6000-8000: {after:.0} veh/h/lane ({:+.1}%)",
        (after / before - 1.0) * 100.0
    );
    let coupled = window_mean(&out.series, 10_000, 12_000, |r| r.frac_collective);
    println!("coupled share of MAVs, last 2000 steps: {coupled:.2}");
    Ok(())
}
