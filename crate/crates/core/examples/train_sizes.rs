//! Train-size distribution at three densities and two penetration rates.

use mavsim::{run, Scenario, SimParams, TrainHistogram};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p_mav in [0.25, 0.75] {
        println!("p_mav = {p_mav}");
        for density in [30.0, 60.0, 90.0] {
            let mut hist = TrainHistogram::new(5);
            for seed in 1..=3 {
                let params = SimParams {
                    density,
                    p_mav,
                    scenario: Scenario::Collective,
                    seed,
                    ..SimParams::default()
                };
                hist.merge(&run(&params)?.histogram);
            }
            let trains: u64 = (2..=5).map(|s| hist.count(s)).sum();
            print!("  {density:>3} veh/km  loose={:<6}", hist.count(1));
            for size in 2..=5 {
                let share = hist.count(size) as f64 / trains.max(1) as f64;
                print!("  {size}:{:5.1}%", share * 100.0);
            }
            println!("  modal={:?}", hist.modal_train_size());
        }
    }
    Ok(())
}
