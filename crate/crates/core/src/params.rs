//! Model constants and scenario controls, in internal cell units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Which operating regime the MAV population runs under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Conventional traffic only; the penetration rate is forced to zero.
    Base,
    /// MAVs present but never dock.
    IndependentOnly,
    /// MAVs dock into trains, move collectively and detach.
    Collective,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Base, Scenario::IndependentOnly, Scenario::Collective];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Base => "base",
            Scenario::IndependentOnly => "independent-only",
            Scenario::Collective => "collective",
        }
    }

    pub fn docking_enabled(self) -> bool {
        self == Scenario::Collective
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected base, independent-only or collective)"))
    }
}

/// All parameters of one simulation run. Lengths are in cells, speeds in
/// cells/s and accelerations in cells/s²; the time step is 1 s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Meters per cell.
    pub cell_length: f64,
    pub veh_length: i32,
    pub mav_length: i32,
    /// Global speed limit; also the cap while docking.
    pub v_max: i32,
    /// Operational limit of MAVs outside docking.
    pub v_max_mav: i32,
    /// Effective safe time gap in milliseconds.
    pub time_gap_ms: i64,
    pub accel: i32,
    /// Magnitude of the maximum deceleration.
    pub b_max: i32,
    pub b_defense: i32,
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub g_safety: i32,
    /// Logistic midpoint speed, cells/s.
    pub v_c: f64,
    /// Logistic steepness, s/cell.
    pub alpha: f64,
    pub p_lc: f64,
    /// Acceleration while docking.
    pub a_p: i32,
    /// Spacing between coupled modules.
    pub d_intra: i32,
    pub p_d: f64,
    pub l_max: usize,
    pub road_length: i32,
    pub lanes: usize,
    pub p_mav: f64,
    /// Vehicles per km per lane.
    pub density: f64,
    pub t_total: u32,
    pub t_dock_start: u32,
    pub t_measure_start: u32,
    pub scenario: Scenario,
    pub seed: u64,
    /// Detachment draws happen on steps that are multiples of this.
    pub detach_interval: u32,
    /// Train-size histogram cadence within the measuring window.
    pub histogram_interval: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            cell_length: 0.5,
            veh_length: 10,
            mav_length: 7,
            v_max: 66,
            v_max_mav: 61,
            time_gap_ms: 1800,
            accel: 2,
            b_max: 6,
            b_defense: 2,
            p_a: 0.85,
            p_b: 0.52,
            p_c: 0.1,
            g_safety: 20,
            v_c: 30.0,
            alpha: 10.0,
            p_lc: 0.2,
            a_p: 2,
            d_intra: 0,
            p_d: 0.2,
            l_max: 5,
            road_length: 20_000,
            lanes: 2,
            p_mav: 0.5,
            density: 60.0,
            t_total: 12_000,
            t_dock_start: 5_000,
            t_measure_start: 10_000,
            scenario: Scenario::Collective,
            seed: 42,
            detach_interval: 1,
            histogram_interval: 100,
        }
    }
}

fn check_probability(field: &'static str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            reason: format!("probability must lie in [0, 1], got {p}"),
        })
    }
}

fn check_non_negative(field: &'static str, v: i32) -> Result<(), ConfigError> {
    if v >= 0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            reason: format!("must be non-negative, got {v}"),
        })
    }
}

impl SimParams {
    /// Penetration rate actually used, after the scenario override.
    pub fn effective_p_mav(&self) -> f64 {
        match self.scenario {
            Scenario::Base => 0.0,
            _ => self.p_mav,
        }
    }

    pub fn docking_enabled(&self) -> bool {
        self.scenario.docking_enabled()
    }

    /// Road length in km.
    pub fn road_km(&self) -> f64 {
        f64::from(self.road_length) * self.cell_length / 1000.0
    }

    /// Vehicles placed on each lane at initialization.
    pub fn vehicles_per_lane(&self) -> usize {
        (self.density * self.road_km()).round() as usize
    }

    /// MAVs placed on each lane at initialization.
    pub fn mavs_per_lane(&self) -> usize {
        (self.effective_p_mav() * self.vehicles_per_lane() as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("veh_length", self.veh_length),
            ("mav_length", self.mav_length),
            ("v_max", self.v_max),
            ("v_max_mav", self.v_max_mav),
            ("a", self.accel),
            ("b_max", self.b_max),
            ("b_defense", self.b_defense),
            ("g_safety", self.g_safety),
            ("a_p", self.a_p),
            ("d_intra", self.d_intra),
            ("road_length", self.road_length),
        ] {
            check_non_negative(field, v)?;
        }
        if self.veh_length == 0 || self.mav_length == 0 {
            return Err(ConfigError::Invalid {
                field: "veh_length",
                reason: "vehicle lengths must be at least one cell".into(),
            });
        }
        if self.b_max == 0 {
            return Err(ConfigError::Invalid {
                field: "b_max",
                reason: "maximum deceleration must be positive".into(),
            });
        }
        if self.time_gap_ms <= 0 {
            return Err(ConfigError::Invalid {
                field: "T",
                reason: "safe time gap must be positive".into(),
            });
        }
        if self.g_safety < self.b_defense || self.g_safety < self.accel {
            return Err(ConfigError::Invalid {
                field: "g_safety",
                reason: format!(
                    "must be at least both randomization decelerations (b_defense={}, a={}), got {}",
                    self.b_defense, self.accel, self.g_safety
                ),
            });
        }
        if self.v_max <= self.v_max_mav {
            return Err(ConfigError::Invalid {
                field: "v_max_mav",
                reason: format!(
                    "MAV operational limit {} must be below the global limit {} so docking can catch up",
                    self.v_max_mav, self.v_max
                ),
            });
        }
        if self.l_max < 2 {
            return Err(ConfigError::Invalid {
                field: "l_max",
                reason: format!("trains need at least two modules, got {}", self.l_max),
            });
        }
        if self.lanes != 2 {
            return Err(ConfigError::Invalid {
                field: "lanes",
                reason: format!("only two-lane roads are supported, got {}", self.lanes),
            });
        }
        for (field, p) in [
            ("p_a", self.p_a),
            ("p_b", self.p_b),
            ("p_c", self.p_c),
            ("p_lc", self.p_lc),
            ("p_d", self.p_d),
            ("p_mav", self.p_mav),
        ] {
            check_probability(field, p)?;
        }
        if self.p_c + self.p_a > 1.0 {
            return Err(ConfigError::Invalid {
                field: "p_a",
                reason: format!("p_c + p_a = {} exceeds 1", self.p_c + self.p_a),
            });
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "density",
                reason: format!("must be a non-negative number, got {}", self.density),
            });
        }
        if !(self.v_c.is_finite() && self.alpha.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "alpha",
                reason: "logistic parameters must be finite".into(),
            });
        }
        if self.t_measure_start >= self.t_total {
            return Err(ConfigError::Invalid {
                field: "t_measure_start",
                reason: format!(
                    "measuring window starts at {} but the run ends at {}",
                    self.t_measure_start, self.t_total
                ),
            });
        }
        if self.detach_interval == 0 || self.histogram_interval == 0 {
            return Err(ConfigError::Invalid {
                field: "detach_interval",
                reason: "cadences must be at least one step".into(),
            });
        }
        let n = self.vehicles_per_lane() as i64;
        let n_mav = self.mavs_per_lane() as i64;
        let needed = (n - n_mav) * i64::from(self.veh_length) + n_mav * i64::from(self.mav_length);
        if needed > i64::from(self.road_length) {
            return Err(ConfigError::Infeasible {
                needed,
                available: i64::from(self.road_length),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimParams::default().validate().unwrap();
    }

    #[test]
    fn placement_counts() {
        let p = SimParams {
            density: 60.0,
            p_mav: 0.5,
            ..SimParams::default()
        };
        assert_eq!(p.vehicles_per_lane(), 600);
        assert_eq!(p.mavs_per_lane(), 300);
        let base = SimParams {
            scenario: Scenario::Base,
            ..p
        };
        assert_eq!(base.mavs_per_lane(), 0);
    }

    #[test]
    fn rejects_bad_constraints() {
        let mut p = SimParams {
            g_safety: 1,
            ..SimParams::default()
        };
        assert!(p.validate().is_err());
        p = SimParams {
            v_max_mav: 66,
            ..SimParams::default()
        };
        assert!(p.validate().is_err());
        p = SimParams {
            l_max: 1,
            ..SimParams::default()
        };
        assert!(p.validate().is_err());
        p = SimParams {
            density: 250.0,
            p_mav: 0.0,
            ..SimParams::default()
        };
        assert!(matches!(p.validate(), Err(ConfigError::Infeasible { .. })));
        p = SimParams {
            t_measure_start: 12_000,
            ..SimParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.as_str().parse::<Scenario>().unwrap(), sc);
        }
        assert!("train".parse::<Scenario>().is_err());
    }
}
