//! Conversion between physical units and the integer cell lattice.
//!
//! The lattice has a fixed cell length and a 1 s time step, so a length in
//! meters becomes a cell count, a speed in m/s becomes cells per step and an
//! acceleration in m/s² becomes cells per step². Every conversion must be
//! exact: `33.3 m/s` on a `0.5 m` lattice is rejected rather than rounded.

use crate::error::ConfigError;

const EXACTNESS_TOLERANCE: f64 = 1e-9;

/// Physical dimension of a configured quantity. Only the length exponent
/// matters for conversion because the time step is one second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    /// m
    Length,
    /// m/s
    Speed,
    /// m/s²
    Acceleration,
}

impl Dimension {
    fn unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Speed => "m/s",
            Dimension::Acceleration => "m/s^2",
        }
    }
}

/// Converts a physical quantity to integer cell units, rejecting values
/// that do not land exactly on the lattice.
pub fn to_cells(field: &'static str, value: f64, dimension: Dimension, cell_length: f64) -> Result<i32, ConfigError> {
    if !(cell_length.is_finite() && cell_length > 0.0) {
        return Err(ConfigError::Invalid {
            field: "cell_length",
            reason: format!("must be positive, got {cell_length}"),
        });
    }
    if !value.is_finite() {
        return Err(ConfigError::Invalid {
            field,
            reason: format!("must be finite, got {value}"),
        });
    }
    let cells = value / cell_length;
    let rounded = cells.round();
    if (cells - rounded).abs() > EXACTNESS_TOLERANCE * rounded.abs().max(1.0) {
        return Err(ConfigError::NonExact {
            field,
            value,
            quantum: cell_length,
            unit: dimension.unit(),
        });
    }
    if rounded.abs() > i32::MAX as f64 {
        return Err(ConfigError::Invalid {
            field,
            reason: format!("{value} {} overflows the cell range", dimension.unit()),
        });
    }
    Ok(rounded as i32)
}

/// Inverse of [`to_cells`].
pub fn to_physical(cells: i32, cell_length: f64) -> f64 {
    f64::from(cells) * cell_length
}

/// Converts a duration in seconds to whole milliseconds, rejecting
/// sub-millisecond precision. Time gaps are kept as exact rationals so the
/// floor and comparison tests in the randomization rules stay exact.
pub fn seconds_to_millis(field: &'static str, seconds: f64) -> Result<i64, ConfigError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(ConfigError::Invalid {
            field,
            reason: format!("must be a positive duration, got {seconds}"),
        });
    }
    let ms = seconds * 1000.0;
    let rounded = ms.round();
    if (ms - rounded).abs() > EXACTNESS_TOLERANCE * rounded.max(1.0) {
        return Err(ConfigError::NonExact {
            field,
            value: seconds,
            quantum: 0.001,
            unit: "s",
        });
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values_convert_exactly() {
        assert_eq!(to_cells("v_max", 33.0, Dimension::Speed, 0.5).unwrap(), 66);
        assert_eq!(to_cells("v_max_mav", 30.5, Dimension::Speed, 0.5).unwrap(), 61);
        assert_eq!(to_cells("d_intra", 0.0, Dimension::Length, 0.5).unwrap(), 0);
        assert_eq!(to_cells("a", 1.0, Dimension::Acceleration, 0.5).unwrap(), 2);
        assert_eq!(to_cells("b_max", 3.0, Dimension::Acceleration, 0.5).unwrap(), 6);
        assert_eq!(
            to_cells("road_length", 10_000.0, Dimension::Length, 0.5).unwrap(),
            20_000
        );
    }

    #[test]
    fn round_trip_reproduces_physical_values() {
        for (value, dim) in [
            (33.0, Dimension::Speed),
            (30.5, Dimension::Speed),
            (1.0, Dimension::Acceleration),
            (3.0, Dimension::Acceleration),
            (0.0, Dimension::Length),
            (5.0, Dimension::Length),
            (3.5, Dimension::Length),
            (10_000.0, Dimension::Length),
        ] {
            let cells = to_cells("x", value, dim, 0.5).unwrap();
            assert_eq!(to_physical(cells, 0.5), value);
        }
    }

    #[test]
    fn inexact_values_name_the_field() {
        let err = to_cells("v_max", 33.3, Dimension::Speed, 0.5).unwrap_err();
        assert!(matches!(err, ConfigError::NonExact { field: "v_max", .. }));
        assert!(err.to_string().contains("v_max"));
    }

    #[test]
    fn time_gap_is_exact_in_millis() {
        assert_eq!(seconds_to_millis("T", 1.8).unwrap(), 1800);
        assert!(seconds_to_millis("T", 1.8005).is_err());
        assert!(seconds_to_millis("T", 0.0).is_err());
    }
}
