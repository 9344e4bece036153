//! Pure-inertial dead reckoning for slow pedestrian-scale robots.
//!
//! The crate covers IMU log ingestion, stationary calibration, strapdown
//! mechanization (3D and yaw-only 2D), a periodic-motion step-length
//! estimator, analytic error models and a synthetic trajectory generator.

pub mod calib;
pub mod errmodel;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod kv;
pub mod morpi;
pub mod signal;
pub mod simgen;
pub mod strapdown;
pub mod types;

pub use error::{Error, ErrorClass, Result};
pub use types::{ImuSample, ImuSequence, NavState, SensorSpec, DEFAULT_GRAVITY, STANDARD_GRAVITY};
