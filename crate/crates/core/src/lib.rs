//! Quadrotor position tracking from vector measurements and biased gyro rates,
//! with the attitude loop closed on alignment errors rather than a
//! reconstructed attitude.

pub mod analysis;
pub mod attitude;
pub mod attitude_reference;
pub mod config;
pub mod error;
pub mod geometry;
pub mod observer;
pub mod plant;
pub mod position;
pub mod sensing;
pub mod simulation;
pub mod telemetry;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
