//! Flow-density and speed-density curves for one penetration rate, with the
//! conventional-only curve for reference. Writes `fundamental_diagram.svg`
//! to the current directory.
//!
//! ```text
//! cargo run --release --example fundamental_diagram -- 0.75
//! ```

use rayon::prelude::*;

use mavsim::svg::{fundamental_chart, Measure};
use mavsim::sweep::FundamentalRow;
use mavsim::{run, Scenario, SimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p_mav: f64 = std::env::args().nth(1).map_or(Ok(0.75), |s| s.parse())?;
    let mut jobs = Vec::new();
    for density in (5..=140).step_by(15) {
        jobs.push((Scenario::Base, 0.0, f64::from(density)));
        jobs.push((Scenario::Collective, p_mav, f64::from(density)));
    }

    let rows: Vec<FundamentalRow> = jobs
        .par_iter()
        .map(|&(scenario, p_mav, density)| {
            let params = SimParams {
                scenario,
                p_mav,
                density,
                seed: 3,
                ..SimParams::default()
            };
            let s = run(&params).expect("default parameters are valid").summary;
            FundamentalRow {
                scenario,
                p_mav,
                density_veh_per_km_per_lane: density,
                seed: params.seed,
                mean_flow_veh_per_h_per_lane: s.mean_flow,
                mean_speed_m_per_s: s.mean_speed,
            }
        })
        .collect();

    println!("{:>8} {:>14} {:>14}", "density", "base", format!("collective {p_mav}"));
    for pair in rows.chunks(2) {
        println!(
            "{:>8} {:>8.0} {:>5.1} {:>8.0} {:>5.1}",
            pair[0].density_veh_per_km_per_lane,
            pair[0].mean_flow_veh_per_h_per_lane,
            pair[0].mean_speed_m_per_s,
            pair[1].mean_flow_veh_per_h_per_lane,
            pair[1].mean_speed_m_per_s
        );
    }
    let cap = |sc: Scenario| {
        rows.iter()
            .filter(|r| r.scenario == sc)
            .map(|r| r.mean_flow_veh_per_h_per_lane)
            .fold(0.0, f64::max)
    };
    println!("capacity ratio {:.2}", cap(Scenario::Collective) / cap(Scenario::Base));

    std::fs::write("fundamental_diagram.svg", fundamental_chart(&rows, Measure::Flow))?;
    println!("wrote fundamental_diagram.svg");
    Ok(())
}
