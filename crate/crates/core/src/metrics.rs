//! Flow, speed, composition and train-size measurements.
//!
//! Flow on the closed ring is the density-speed product `q = k · v̄`, with
//! `k` in vehicles per km per lane and `v̄` the space-mean speed over every
//! vehicle. Speeds leave cell units only here.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mav::TrainRegistry;
use crate::params::{Scenario, SimParams};
use crate::road::{Mode, RoadState};

/// km/h per m/s, and the veh/km · m/s → veh/h factor.
const KMH_PER_MS: f64 = 3.6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    /// veh/h/lane
    pub flow: f64,
    /// m/s
    pub mean_speed: f64,
    pub frac_independent_or_docking: f64,
    pub frac_collective: f64,
    pub independent: u32,
    pub docking: u32,
    pub collective: u32,
}

/// Vehicles per km per lane currently on the road.
pub fn density_per_lane(state: &RoadState, params: &SimParams) -> f64 {
    state.len() as f64 / (params.road_km() * params.lanes as f64)
}

/// Space-mean speed in m/s; 0 on an empty road.
pub fn mean_speed(state: &RoadState, params: &SimParams) -> f64 {
    if state.is_empty() {
        return 0.0;
    }
    let total: i64 = state.vehicles().iter().map(|v| i64::from(v.speed)).sum();
    total as f64 / state.len() as f64 * params.cell_length
}

/// `q = k · v̄ · 3.6` in veh/h/lane.
pub fn instantaneous_flow(state: &RoadState, params: &SimParams) -> f64 {
    density_per_lane(state, params) * mean_speed(state, params) * KMH_PER_MS
}

/// MAV population split by mode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Composition {
    pub independent: u32,
    pub docking: u32,
    pub collective: u32,
    /// Fraction of MAVs that are independent or docking.
    pub frac_independent_or_docking: f64,
    pub frac_collective: f64,
    /// False when there are no MAVs; both fractions are then 0.
    pub has_mavs: bool,
}

impl Composition {
    fn from_counts(independent: u32, docking: u32, collective: u32) -> Self {
        let total = independent + docking + collective;
        if total == 0 {
            return Composition::default();
        }
        let total = f64::from(total);
        Composition {
            independent,
            docking,
            collective,
            frac_independent_or_docking: f64::from(independent + docking) / total,
            frac_collective: f64::from(collective) / total,
            has_mavs: true,
        }
    }
}

pub fn composition_ratios(state: &RoadState) -> Composition {
    let (mut ind, mut dock, mut coll) = (0, 0, 0);
    for v in state.vehicles() {
        match v.mode {
            Mode::Independent => ind += 1,
            Mode::Docking => dock += 1,
            Mode::Collective => coll += 1,
            Mode::NotApplicable => {}
        }
    }
    Composition::from_counts(ind, dock, coll)
}

/// All per-step measurements in one pass over the vehicles.
pub fn step_record(state: &RoadState, params: &SimParams, t: u32) -> StepRecord {
    let (mut ind, mut dock, mut coll) = (0, 0, 0);
    let mut total_speed: i64 = 0;
    for v in state.vehicles() {
        total_speed += i64::from(v.speed);
        match v.mode {
            Mode::Independent => ind += 1,
            Mode::Docking => dock += 1,
            Mode::Collective => coll += 1,
            Mode::NotApplicable => {}
        }
    }
    let mean_speed = if state.is_empty() {
        0.0
    } else {
        total_speed as f64 / state.len() as f64 * params.cell_length
    };
    let comp = Composition::from_counts(ind, dock, coll);
    StepRecord {
        t,
        flow: density_per_lane(state, params) * mean_speed * KMH_PER_MS,
        mean_speed,
        frac_independent_or_docking: comp.frac_independent_or_docking,
        frac_collective: comp.frac_collective,
        independent: ind,
        docking: dock,
        collective: coll,
    }
}

/// Train-size counts. Bin 1 holds uncoupled modules (independent or
/// docking); bins `2..=l_max` count trains of that size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainHistogram {
    counts: Vec<u64>,
    pub samples: u32,
}

impl TrainHistogram {
    pub fn new(l_max: usize) -> Self {
        TrainHistogram {
            counts: vec![0; l_max + 1],
            samples: 0,
        }
    }

    pub fn l_max(&self) -> usize {
        self.counts.len() - 1
    }

    /// Count in bin `size` (1-based). Sizes outside `1..=l_max` are 0.
    pub fn count(&self, size: usize) -> u64 {
        if size == 0 {
            0
        } else {
            self.counts.get(size).copied().unwrap_or(0)
        }
    }

    pub fn add(&mut self, size: usize, count: u64) {
        assert!(
            (1..=self.l_max()).contains(&size),
            "train size {size} outside 1..={}",
            self.l_max()
        );
        self.counts[size] += count;
    }

    /// Most frequent train size among bins `2..=l_max`, ties to the larger
    /// size. `None` when no train was ever observed.
    pub fn modal_train_size(&self) -> Option<usize> {
        (2..=self.l_max())
            .filter(|&s| self.counts[s] > 0)
            .max_by_key(|&s| (self.counts[s], s))
    }

    pub fn merge(&mut self, other: &TrainHistogram) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
    }

    /// Modules represented: bin 1 plus size times count for trains.
    pub fn modules(&self) -> u64 {
        (1..=self.l_max()).map(|s| s as u64 * self.counts[s]).sum()
    }
}

/// Adds the current train sizes, and the number of uncoupled MAVs to bin 1.
pub fn sample_train_histogram(trains: &TrainRegistry, mav_count: usize, hist: &mut TrainHistogram) {
    for t in trains.iter() {
        hist.add(t.size(), 1);
    }
    let loose = mav_count - trains.coupled_modules();
    if loose > 0 {
        hist.add(1, loose as u64);
    }
    hist.samples += 1;
}

/// One point of a fundamental diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPoint {
    /// veh/km/lane
    pub density: f64,
    /// veh/h/lane
    pub mean_flow: f64,
    /// m/s
    pub mean_speed: f64,
    pub p_mav: f64,
    pub scenario: Scenario,
    pub seed: u64,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// Averages flow and speed over steps `[t_measure_start, t_total)`.
pub fn summarize_run(series: &[StepRecord], params: &SimParams) -> Result<FundamentalPoint, ConfigError> {
    if params.t_measure_start >= params.t_total {
        return Err(ConfigError::Invalid {
            field: "t_measure_start",
            reason: format!("{} is not before t_total {}", params.t_measure_start, params.t_total),
        });
    }
    let lo = params.t_measure_start as usize;
    let hi = (params.t_total as usize).min(series.len());
    let window = &series[lo.min(hi)..hi];
    let mean_speed = mean(window.iter().map(|r| r.mean_speed));
    let vehicles = params.vehicles_per_lane() as f64 * params.lanes as f64;
    let density = vehicles / (params.road_km() * params.lanes as f64);
    Ok(FundamentalPoint {
        density,
        mean_flow: mean(window.iter().map(|r| r.flow)),
        mean_speed,
        p_mav: params.effective_p_mav(),
        scenario: params.scenario,
        seed: params.seed,
    })
}

/// Mean of a per-step quantity over `[from, to)`.
pub fn window_mean(series: &[StepRecord], from: usize, to: usize, f: impl Fn(&StepRecord) -> f64) -> f64 {
    let to = to.min(series.len());
    let from = from.min(to);
    mean(series[from..to].iter().map(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::{Vehicle, VehicleId};

    fn record(t: u32, flow: f64, speed: f64) -> StepRecord {
        StepRecord {
            t,
            flow,
            mean_speed: speed,
            frac_independent_or_docking: 0.0,
            frac_collective: 0.0,
            independent: 0,
            docking: 0,
            collective: 0,
        }
    }

    #[test]
    fn flow_is_density_times_speed() {
        // 1,200 vehicles on 10 km x 2 lanes at 15 m/s (30 cells/s).
        let vehicles: Vec<Vehicle> = (0..1200u32)
            .map(|i| {
                let lane = (i % 2) as usize;
                let slot = (i / 2) as i32;
                Vehicle::conventional(VehicleId(i), lane, slot * 30 + 9, 10).with_speed(30)
            })
            .collect();
        let s = RoadState::new(20_000, vehicles).unwrap();
        let p = SimParams::default();
        assert!((instantaneous_flow(&s, &p) - 3240.0).abs() < 1e-9);
        assert!((step_record(&s, &p, 0).flow - 3240.0).abs() < 1e-9);
    }

    #[test]
    fn zero_speed_and_empty_road() {
        let p = SimParams::default();
        let s = RoadState::new(20_000, vec![Vehicle::conventional(VehicleId(0), 0, 50, 10)]).unwrap();
        assert_eq!(instantaneous_flow(&s, &p), 0.0);
        let empty = RoadState::new(20_000, vec![]).unwrap();
        assert_eq!(instantaneous_flow(&empty, &p), 0.0);
        assert_eq!(step_record(&empty, &p, 0).flow, 0.0);
    }

    #[test]
    fn composition_counts() {
        let c = Composition::from_counts(3, 1, 6);
        assert!((c.frac_independent_or_docking - 0.4).abs() < 1e-12);
        assert!((c.frac_collective - 0.6).abs() < 1e-12);
        let none = Composition::from_counts(0, 0, 0);
        assert!(!none.has_mavs);
        assert_eq!(none.frac_collective, 0.0);
    }

    #[test]
    fn histogram_bins() {
        let mut h = TrainHistogram::new(5);
        for s in [5, 5, 2] {
            h.add(s, 1);
        }
        assert_eq!(h.count(2), 1);
        assert_eq!(h.count(5), 2);
        assert_eq!(h.modal_train_size(), Some(5));
        let mut loose = TrainHistogram::new(5);
        loose.add(1, 10);
        assert_eq!(loose.count(1), 10);
        assert_eq!(loose.modal_train_size(), None);
        assert_eq!(h.modules(), 12);
    }

    #[test]
    fn summary_uses_measuring_window() {
        let p = SimParams {
            t_total: 100,
            t_dock_start: 20,
            t_measure_start: 50,
            ..SimParams::default()
        };
        let constant: Vec<_> = (0..100).map(|t| record(t, 1000.0, 10.0)).collect();
        let s = summarize_run(&constant, &p).unwrap();
        assert_eq!(s.mean_flow, 1000.0);
        assert_eq!(s.mean_speed, 10.0);

        // Surge at t = 20: the window mean sees only the high level.
        let surge: Vec<_> = (0..100)
            .map(|t| record(t, if t < 20 { 500.0 } else { 1500.0 }, 0.0))
            .collect();
        let s = summarize_run(&surge, &p).unwrap();
        assert_eq!(s.mean_flow, 1500.0);
        assert_eq!(window_mean(&surge, 0, 100, |r| r.flow), 1300.0);

        let bad = SimParams {
            t_measure_start: 100,
            ..p
        };
        assert!(summarize_run(&constant, &bad).is_err());
    }
}
