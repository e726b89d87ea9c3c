//! Five modules on an otherwise quiet lane coupling one after another.
//!
//! Each line shows, front to back, mode / speed / gap ahead. Modules join the
//! front of the string first; the ones behind wait until the module ahead has
//! coupled.

use mavsim::{Mode, RoadState, SimParams, Simulation, Vehicle, VehicleId};

fn tag(mode: Mode) -> char {
    match mode {
        Mode::Independent => 'I',
        Mode::Docking => 'D',
        Mode::Collective => 'C',
        Mode::NotApplicable => '-',
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SimParams {
        road_length: 4000,
        t_dock_start: 0,
        p_lc: 0.0,
        p_d: 0.0,
        ..SimParams::default()
    };
    let mut vehicles: Vec<Vehicle> = (0..5)
        .map(|k| Vehicle::mav(VehicleId(k), 0, 1000 - 47 * k as i32, 7).with_speed(61))
        .collect();
    // A car far ahead keeps the string from seeing its own tail.
    vehicles.push(Vehicle::conventional(VehicleId(5), 0, 3000, 10).with_speed(66));
    let state = RoadState::new(params.road_length, vehicles)?;
    let mut sim = Simulation::from_state(params, state)?;

    loop {
        sim.step()?;
        let s = sim.state();
        let cells: Vec<String> = (0..5)
            .map(|k| {
                let v = s.vehicle(VehicleId(k));
                format!("{}/{:>2}/{:>3}", tag(v.mode), v.speed, s.gap_ahead(v.id))
            })
            .collect();
        println!("t={:>3}  {}", sim.time(), cells.join("  "));
        if sim.trains().iter().any(|t| t.size() == 5) {
            break;
        }
    }
    println!("one train of 5 after {} steps", sim.time());
    Ok(())
}
