//! Base, independent-only and collective traffic side by side near capacity.

use mavsim::{run, Scenario, SimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p_mav = 0.5;
    println!("p_mav = {p_mav}, 2 seeds per cell, flow in veh/h/lane");
    println!(
        "{:>8} {:>10} {:>17} {:>11}",
        "density", "base", "independent-only", "collective"
    );
    for density in [20.0, 30.0, 40.0, 50.0, 60.0] {
        let mut row = Vec::new();
        for scenario in Scenario::ALL {
            let mut total = 0.0;
            for seed in 1..=2 {
                let params = SimParams {
                    density,
                    p_mav,
                    scenario,
                    seed,
                    ..SimParams::default()
                };
                total += run(&params)?.summary.mean_flow;
            }
            row.push(total / 2.0);
        }
        println!("{density:>8} {:>10.0} {:>17.0} {:>11.0}", row[0], row[1], row[2]);
    }
    Ok(())
}
