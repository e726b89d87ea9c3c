//! JSON configuration in physical units.
//!
//! A config is one flat JSON object. Model constants use the units of the
//! parameter tables: lengths in m, speeds in m/s, accelerations in m/s², the
//! time gap in s, while `veh_length`, `mav_length` and `g_safety` are given
//! in cells, `v_c` in cells/s and `alpha` in s/cell. Every omitted key takes
//! its default, so `{}` (or an empty file) is the full default sweep.
//!
//! ```json
//! { "density": 60, "p_mav": 0.5, "seed": 42 }
//! ```
//!
//! Sweep keys: `densities`, `p_mavs`, `scenarios`, `seeds_per_point`,
//! `workers`. For a sweep `seed` is the master seed from which every point
//! seed is derived. A `manifest.json` written by a sweep is accepted as a
//! config too; its resolved `config` object is used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, HarnessError};
use crate::params::{Scenario, SimParams};
use crate::units::{self, Dimension};

/// Everything a sweep needs besides the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Model constants plus the single-run point (`density`, `p_mav`,
    /// `scenario`, `seed`) used by `simulate run`.
    pub base: SimParams,
    /// veh/km/lane
    pub densities: Vec<f64>,
    pub p_mavs: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub seeds_per_point: u32,
    /// Worker threads; `None` lets the pool pick.
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: SimParams::default(),
            densities: (1..=28).map(|i| f64::from(i * 5)).collect(),
            p_mavs: vec![0.0, 0.25, 0.5, 0.75],
            scenarios: vec![Scenario::IndependentOnly, Scenario::Collective],
            seeds_per_point: 3,
            workers: None,
        }
    }
}

impl SweepConfig {
    pub fn master_seed(&self) -> u64 {
        self.base.seed
    }

    /// Number of runs in the grid.
    pub fn run_count(&self) -> usize {
        self.densities.len() * self.p_mavs.len() * self.scenarios.len() * self.seeds_per_point as usize
    }

    /// The fully resolved config in the same physical-unit format it was
    /// read from. Parsing the result gives back an equal config.
    pub fn to_physical(&self) -> RawConfig {
        let p = &self.base;
        let m = |cells: i32| units::to_physical(cells, p.cell_length);
        RawConfig {
            density: Some(p.density),
            p_mav: Some(p.p_mav),
            seed: Some(p.seed),
            scenario: Some(p.scenario),
            cell_length: Some(p.cell_length),
            veh_length: Some(p.veh_length as f64),
            mav_length: Some(p.mav_length as f64),
            v_max: Some(m(p.v_max)),
            v_max_mav: Some(m(p.v_max_mav)),
            time_gap: Some(p.time_gap_ms as f64 / 1000.0),
            a: Some(m(p.accel)),
            b_max: Some(m(p.b_max)),
            b_defense: Some(m(p.b_defense)),
            p_a: Some(p.p_a),
            p_b: Some(p.p_b),
            p_c: Some(p.p_c),
            g_safety: Some(p.g_safety as f64),
            v_c: Some(p.v_c),
            alpha: Some(p.alpha),
            p_lc: Some(p.p_lc),
            a_p: Some(m(p.a_p)),
            d_intra: Some(m(p.d_intra)),
            p_d: Some(p.p_d),
            l_max: Some(p.l_max),
            road_length: Some(m(p.road_length)),
            lanes: Some(p.lanes),
            t_total: Some(p.t_total),
            t_dock_start: Some(p.t_dock_start),
            t_measure_start: Some(p.t_measure_start),
            detach_interval: Some(p.detach_interval),
            histogram_interval: Some(p.histogram_interval),
            densities: Some(self.densities.clone()),
            p_mavs: Some(self.p_mavs.clone()),
            scenarios: Some(self.scenarios.clone()),
            seeds_per_point: Some(self.seeds_per_point),
            workers: self.workers,
        }
    }
}

/// The on-disk shape of a config. All keys are optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mav: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_length: Option<f64>,
    /// cells
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub veh_length: Option<f64>,
    /// cells
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mav_length: Option<f64>,
    /// m/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// m/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max_mav: Option<f64>,
    /// s
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub time_gap: Option<f64>,
    /// m/s²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// m/s², either sign
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<f64>,
    /// m/s²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_defense: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_c: Option<f64>,
    /// cells
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_safety: Option<f64>,
    /// cells/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_c: Option<f64>,
    /// s/cell
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_lc: Option<f64>,
    /// m/s²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_p: Option<f64>,
    /// m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_intra: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    /// m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_dock_start: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_measure_start: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detach_interval: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_interval: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub densities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mavs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Scenario>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds_per_point: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Line (1-based) of the first `"key":` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    let mut from = 0;
    while let Some(i) = text[from..].find(&quoted) {
        let at = from + i;
        let rest = text[at + quoted.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(text[..at].matches('\n').count() + 1);
        }
        from = at + quoted.len();
    }
    None
}

fn located(text: &str, err: ConfigError) -> ConfigError {
    let field = match &err {
        ConfigError::NonExact { field, .. } | ConfigError::Invalid { field, .. } => *field,
        ConfigError::Infeasible { .. } => "density",
        _ => return err,
    };
    let key = match field {
        "time_gap_ms" => "T",
        "accel" => "a",
        other => other,
    };
    match line_of(text, key) {
        Some(line) => ConfigError::Located {
            line,
            source: Box::new(err),
        },
        None => err,
    }
}

fn whole_cells(field: &'static str, value: f64) -> Result<i32, ConfigError> {
    if value.fract() != 0.0 || !(0.0..=f64::from(i32::MAX)).contains(&value) {
        return Err(ConfigError::Invalid {
            field,
            reason: format!("must be a whole number of cells, got {value}"),
        });
    }
    Ok(value as i32)
}

fn non_empty<T>(field: &'static str, list: &[T]) -> Result<(), ConfigError> {
    if list.is_empty() {
        Err(ConfigError::Invalid {
            field,
            reason: "list must not be empty".into(),
        })
    } else {
        Ok(())
    }
}

impl RawConfig {
    /// Converts to cell units and validates, without line information.
    pub fn resolve(&self) -> Result<SweepConfig, ConfigError> {
        let defaults = SweepConfig::default();
        let d = &defaults.base;
        let cell = self.cell_length.unwrap_or(d.cell_length);
        if !(cell.is_finite() && cell > 0.0) {
            return Err(ConfigError::Invalid {
                field: "cell_length",
                reason: format!("must be positive, got {cell}"),
            });
        }
        let length = |field, v: Option<f64>, default: i32| match v {
            Some(v) => units::to_cells(field, v, Dimension::Length, cell),
            None => Ok(default),
        };
        let speed = |field, v: Option<f64>, default: i32| match v {
            Some(v) => units::to_cells(field, v, Dimension::Speed, cell),
            None => Ok(default),
        };
        let accel = |field, v: Option<f64>, default: i32| match v {
            Some(v) => units::to_cells(field, v, Dimension::Acceleration, cell),
            None => Ok(default),
        };
        let cells = |field, v: Option<f64>, default: i32| match v {
            Some(v) => whole_cells(field, v),
            None => Ok(default),
        };
        let base = SimParams {
            cell_length: cell,
            veh_length: cells("veh_length", self.veh_length, d.veh_length)?,
            mav_length: cells("mav_length", self.mav_length, d.mav_length)?,
            v_max: speed("v_max", self.v_max, d.v_max)?,
            v_max_mav: speed("v_max_mav", self.v_max_mav, d.v_max_mav)?,
            time_gap_ms: match self.time_gap {
                Some(t) => units::seconds_to_millis("T", t)?,
                None => d.time_gap_ms,
            },
            accel: accel("a", self.a, d.accel)?,
            b_max: accel("b_max", self.b_max.map(f64::abs), d.b_max)?,
            b_defense: accel("b_defense", self.b_defense, d.b_defense)?,
            p_a: self.p_a.unwrap_or(d.p_a),
            p_b: self.p_b.unwrap_or(d.p_b),
            p_c: self.p_c.unwrap_or(d.p_c),
            g_safety: cells("g_safety", self.g_safety, d.g_safety)?,
            v_c: self.v_c.unwrap_or(d.v_c),
            alpha: self.alpha.unwrap_or(d.alpha),
            p_lc: self.p_lc.unwrap_or(d.p_lc),
            a_p: accel("a_p", self.a_p, d.a_p)?,
            d_intra: length("d_intra", self.d_intra, d.d_intra)?,
            p_d: self.p_d.unwrap_or(d.p_d),
            l_max: self.l_max.unwrap_or(d.l_max),
            road_length: length("road_length", self.road_length, d.road_length)?,
            lanes: self.lanes.unwrap_or(d.lanes),
            p_mav: self.p_mav.unwrap_or(d.p_mav),
            density: self.density.unwrap_or(d.density),
            t_total: self.t_total.unwrap_or(d.t_total),
            t_dock_start: self.t_dock_start.unwrap_or(d.t_dock_start),
            t_measure_start: self.t_measure_start.unwrap_or(d.t_measure_start),
            scenario: self.scenario.unwrap_or(d.scenario),
            seed: self.seed.unwrap_or(d.seed),
            detach_interval: self.detach_interval.unwrap_or(d.detach_interval),
            histogram_interval: self.histogram_interval.unwrap_or(d.histogram_interval),
        };
        base.validate()?;

        let config = SweepConfig {
            base,
            densities: self.densities.clone().unwrap_or(defaults.densities),
            p_mavs: self.p_mavs.clone().unwrap_or(defaults.p_mavs),
            scenarios: self.scenarios.clone().unwrap_or(defaults.scenarios),
            seeds_per_point: self.seeds_per_point.unwrap_or(defaults.seeds_per_point),
            workers: self.workers,
        };
        non_empty("densities", &config.densities)?;
        non_empty("p_mavs", &config.p_mavs)?;
        non_empty("scenarios", &config.scenarios)?;
        if config.seeds_per_point == 0 {
            return Err(ConfigError::Invalid {
                field: "seeds_per_point",
                reason: "must be at least 1".into(),
            });
        }
        if config.workers == Some(0) {
            return Err(ConfigError::Invalid {
                field: "workers",
                reason: "must be at least 1".into(),
            });
        }
        for &density in &config.densities {
            SimParams {
                density,
                ..config.base.clone()
            }
            .validate()
            .map_err(|e| match e {
                ConfigError::Invalid { reason, .. } => ConfigError::Invalid {
                    field: "densities",
                    reason,
                },
                ConfigError::Infeasible { needed, available } => ConfigError::Invalid {
                    field: "densities",
                    reason: format!("density {density} needs {needed} occupied cells on a lane of {available} cells"),
                },
                other => other,
            })?;
        }
        for &p_mav in &config.p_mavs {
            SimParams {
                p_mav,
                ..config.base.clone()
            }
            .validate()
            .map_err(|e| match e {
                ConfigError::Invalid { reason, .. } => ConfigError::Invalid {
                    field: "p_mavs",
                    reason,
                },
                other => other,
            })?;
        }
        Ok(config)
    }
}

/// Parses config text. Errors carry the offending field and, when it can be
/// found, its line.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    if text.trim().is_empty() {
        return Ok(SweepConfig::default());
    }
    let parse_err = |e: serde_json::Error| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let raw: RawConfig = match value.get("manifest_version") {
        Some(_) => {
            let inner = value.get("config").cloned().ok_or_else(|| ConfigError::Invalid {
                field: "config",
                reason: "manifest has no `config` object".into(),
            })?;
            serde_json::from_value(inner).map_err(|e| ConfigError::Invalid {
                field: "config",
                reason: e.to_string(),
            })?
        }
        None => serde_json::from_str(text).map_err(parse_err)?,
    };
    raw.resolve().map_err(|e| located(text, e))
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<SweepConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text).map_err(|source| HarnessError::ConfigFile {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(r#"{"density": 60, "p_mav": 0.5, "seed": 42}"#).unwrap();
        assert_eq!(c.base, SimParams::default());
        assert_eq!(c.base.v_max, 66);
        assert_eq!(c.base.v_max_mav, 61);
        assert_eq!(c.base.b_max, 6);
        assert_eq!(c.base.time_gap_ms, 1800);
    }

    #[test]
    fn empty_config_is_the_default_sweep() {
        for text in ["", "  \n", "{}"] {
            let c = parse_config(text).unwrap();
            assert_eq!(c, SweepConfig::default());
            assert_eq!(c.densities.len(), 28);
            assert_eq!(c.run_count(), 672);
        }
    }

    #[test]
    fn table_values_in_physical_units() {
        let text = r#"{
            "cell_length": 0.5, "veh_length": 10, "v_max": 33, "T": 1.8, "a": 1,
            "b_max": -3, "b_defense": 1, "p_a": 0.85, "p_b": 0.52, "p_c": 0.1,
            "g_safety": 20, "v_c": 30, "alpha": 10, "p_lc": 0.2,
            "mav_length": 7, "v_max_mav": 30.5, "a_p": 1, "d_intra": 0, "p_d": 0.2, "l_max": 5
        }"#;
        assert_eq!(parse_config(text).unwrap().base, SimParams::default());
    }

    #[test]
    fn inexact_speed_names_field_and_line() {
        let text = "{\n  \"density\": 60,\n  \"v_max\": 33.3\n}";
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("v_max"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(matches!(err, ConfigError::Located { line: 3, .. }));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_config("{\n\"density\": 60,\n\"vmax\": 33}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vmax") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn infeasible_density_is_rejected() {
        let err = parse_config("{\"densities\": [10, 250]}").unwrap_err();
        assert!(err.to_string().contains("densities"), "{err}");
        let err = parse_config("{\"density\": 250}").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn round_trips_through_physical_form() {
        let c =
            parse_config(r#"{"density": 35, "p_mav": 0.25, "scenario": "independent-only", "densities": [10, 20]}"#)
                .unwrap();
        let text = serde_json::to_string_pretty(&c.to_physical()).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn empty_lists_are_rejected() {
        assert!(parse_config(r#"{"p_mavs": []}"#).is_err());
        assert!(parse_config(r#"{"seeds_per_point": 0}"#).is_err());
    }
}
