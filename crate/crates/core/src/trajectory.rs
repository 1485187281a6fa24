//! Desired position and heading generators.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::position::TrajectoryPoint;

/// Heading `psi_d(t) = initial + rate * t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YawSpec {
    pub initial: f64,
    pub rate: f64,
}

impl Default for YawSpec {
    fn default() -> Self {
        Self {
            initial: FRAC_PI_4,
            rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryKind {
    /// `[ax cos(wt), ay sin(wt) cos(wt), altitude]` with `w = 2 pi / period`.
    Lemniscate {
        amplitude_x: f64,
        amplitude_y: f64,
        altitude: f64,
        period: f64,
    },
    Hover { position: Vec3 },
    /// Rest-to-rest quintic segments through `(time, position)` knots.
    Waypoints { knots: Vec<(f64, Vec3)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub yaw: YawSpec,
}

impl TrajectorySpec {
    pub fn lemniscate() -> Self {
        Self {
            kind: TrajectoryKind::Lemniscate {
                amplitude_x: 2.5,
                amplitude_y: 3.0,
                altitude: 3.0,
                period: 60.0,
            },
            yaw: YawSpec::default(),
        }
    }

    pub fn hover(position: Vec3) -> Self {
        Self {
            kind: TrajectoryKind::Hover { position },
            yaw: YawSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            TrajectoryKind::Lemniscate { period, .. } if !(*period > 0.0) => {
                Err(Error::config(format!("lemniscate period must be positive, got {period}")))
            }
            TrajectoryKind::Waypoints { knots } => {
                if knots.is_empty() {
                    return Err(Error::config("waypoint table is empty"));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::config("waypoint times must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, t: f64) -> TrajectoryPoint {
        let (position, velocity, acceleration) = match &self.kind {
            TrajectoryKind::Lemniscate {
                amplitude_x: ax,
                amplitude_y: ay,
                altitude,
                period,
            } => {
                let w = 2.0 * PI / period;
                let (s, c) = (w * t).sin_cos();
                // y = (ay/2) sin(2wt)
                let (s2, c2) = (2.0 * w * t).sin_cos();
                (
                    Vec3::new(ax * c, 0.5 * ay * s2, *altitude),
                    Vec3::new(-ax * w * s, ay * w * c2, 0.0),
                    Vec3::new(-ax * w * w * c, -2.0 * ay * w * w * s2, 0.0),
                )
            }
            TrajectoryKind::Hover { position } => (*position, Vec3::zeros(), Vec3::zeros()),
            TrajectoryKind::Waypoints { knots } => waypoint_sample(knots, t),
        };
        TrajectoryPoint {
            position,
            velocity,
            acceleration,
            yaw: self.yaw.initial + self.yaw.rate * t,
            yaw_rate: self.yaw.rate,
            yaw_accel: 0.0,
        }
    }

    /// Bound on `|x''_d,z|` over all time.
    pub fn vertical_accel_bound(&self) -> f64 {
        match &self.kind {
            TrajectoryKind::Lemniscate { .. } | TrajectoryKind::Hover { .. } => 0.0,
            // peak of |60 s (1-s)(1-2s)| on [0, 1] is 10/sqrt(3)
            TrajectoryKind::Waypoints { knots } => knots
                .windows(2)
                .map(|w| {
                    let h = w[1].0 - w[0].0;
                    10.0 / 3f64.sqrt() * (w[1].1.z - w[0].1.z).abs() / (h * h)
                })
                .fold(0.0, f64::max),
        }
    }
}

fn waypoint_sample(knots: &[(f64, Vec3)], t: f64) -> (Vec3, Vec3, Vec3) {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return (first.1, Vec3::zeros(), Vec3::zeros());
    }
    if t >= last.0 {
        return (last.1, Vec3::zeros(), Vec3::zeros());
    }
    let i = knots.partition_point(|k| k.0 <= t) - 1;
    let (t0, p0) = knots[i];
    let (t1, p1) = knots[i + 1];
    let h = t1 - t0;
    let s = (t - t0) / h;
    let shape = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let d1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    let delta = p1 - p0;
    (p0 + delta * shape, delta * (d1 / h), delta * (d2 / (h * h)))
}
