//! One run at the default operating point: 60 veh/km/lane, half the fleet
//! MAVs, docking from t = 5000.
//!
//! ```text
//! cargo run --release --example single_run -- [density] [p_mav] [seed]
//! ```

use mavsim::{run, SimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut params = SimParams::default();
    if let Some(d) = args.next() {
        params.density = d.parse()?;
    }
    if let Some(p) = args.next() {
        params.p_mav = p.parse()?;
    }
    if let Some(s) = args.next() {
        params.seed = s.parse()?;
    }

    let out = run(&params)?;
    let s = &out.summary;
    println!(
        "{} vehicles per lane ({} MAVs), {} steps",
        params.vehicles_per_lane(),
        params.mavs_per_lane(),
        params.t_total
    );
    println!("mean flow   {:8.1} veh/h/lane", s.mean_flow);
    println!("mean speed  {:8.2} m/s", s.mean_speed);

    let last = out.series.last().expect("non-empty run");
    println!(
        "at the end: {} independent, {} docking, {} coupled in {} trains",
        last.independent,
        last.docking,
        last.collective,
        out.final_trains.len()
    );
    for size in 1..=params.l_max {
        println!("  size {size}: {}", out.histogram.count(size));
    }
    println!("no-overtake clamp fired {} times", out.safety_clamps);
    Ok(())
}
