//! Two-lane cellular-automata simulation of mixed traffic with modular
//! autonomous vehicles (MAVs).
//!
//! Conventional vehicles follow a two-state safe-speed car-following model
//! with symmetric lane changing. MAVs follow the same rules without random
//! slowdowns, and in the collective scenario they dock onto the MAV ahead,
//! run as rigid trains of up to `l_max` modules and detach again by
//! changing lanes.
//!
//! The simulation runs on a 10 km ring of 0.5 m cells with a 1 s step.
//! Everything inside the update rules is integer cell arithmetic.
//!
//! Runnable examples live in `crates/core/examples/`:
//!
//! ```text
//! cargo run --release --example single_run
//! cargo run --release --example rule_functions
//! cargo run --release --example flow_surge
//! cargo run --release --example train_sizes
//! cargo run --release --example fundamental_diagram
//! cargo run --release --example scenario_comparison
//! cargo run --release --example docking_trace
//! ```
//!
//! Batch experiments go through the `simulate` binary (`run`, `sweep`,
//! `check`, `render`).

pub mod config;
pub mod engine;
pub mod error;
pub mod lanechange;
pub mod mav;
pub mod metrics;
pub mod params;
pub mod road;
pub mod svg;
pub mod sweep;
pub mod tsm;
pub mod units;

pub use config::{parse_config, SweepConfig};
pub use engine::{init_state, run, RunOutput, ScenarioPhase, Simulation};
pub use error::{ConfigError, HarnessError, InvariantViolation, SimError};
pub use mav::{Train, TrainId, TrainRegistry};
pub use metrics::{FundamentalPoint, StepRecord, TrainHistogram};
pub use params::{Scenario, SimParams};
pub use road::{Mode, NeighborView, RoadState, Vehicle, VehicleId, VehicleKind};
