//! Desired attitude from the thrust vector and yaw, its body rate, and the
//! second-order filter that stands in for the desired angular acceleration.

use crate::error::{Error, Result};
use crate::geometry::{skew_part, vee_unchecked, Mat3, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesiredAttitude {
    pub rotation: Rotation,
    pub omega: Vec3,
    pub omega_dot: Vec3,
}

/// `R_d = [c1 c2 c3]` with `c3 = T/|T|`, `c2 = c3 x c_d / |c3 x c_d|`, `c1 = c2 x c3`.
pub fn desired_rotation(thrust: &Vec3, yaw: f64) -> Result<Rotation> {
    let n = thrust.norm();
    if !(n > 0.0) {
        return Err(Error::ThrustSingularity);
    }
    let c3 = thrust / n;
    let cd = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let c2 = c3.cross(&cd);
    let c2n = c2.norm();
    if c2n <= 1e-9 {
        return Err(Error::YawSingularity);
    }
    let c2 = c2 / c2n;
    let c1 = c2.cross(&c3);
    Ok(Rotation::from_matrix_unchecked(Mat3::from_columns(&[c1, c2, c3])))
}

/// Backward-difference body rate `vee(skew(R_prev^T R_now - I)) / dt`; zero on the first sample.
pub fn desired_omega(prev: Option<&Rotation>, now: &Rotation, dt: f64) -> Vec3 {
    match prev {
        None => Vec3::zeros(),
        Some(p) => {
            let delta = p.transpose().matrix() * now.matrix() - Mat3::identity();
            vee_unchecked(&skew_part(&delta)) / dt
        }
    }
}

/// `th1' = th2`, `th2' = -2 A th2 - A^2 (th1 - w_d)` with diagonal `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceFilter {
    pub theta1: Vec3,
    pub theta2: Vec3,
    pub bandwidth: Vec3,
}

impl ReferenceFilter {
    pub fn new(bandwidth: Vec3) -> Result<Self> {
        if bandwidth.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::config("filter bandwidth A must be diagonal positive"));
        }
        Ok(Self {
            theta1: Vec3::zeros(),
            theta2: Vec3::zeros(),
            bandwidth,
        })
    }

    /// Starts at rest on `omega_d`.
    pub fn reset(&mut self, omega_d: &Vec3) {
        self.theta1 = *omega_d;
        self.theta2 = Vec3::zeros();
    }

    /// Approximation of the desired angular acceleration.
    pub fn omega_dot(&self) -> Vec3 {
        self.theta2
    }

    fn rate(&self, th1: &Vec3, th2: &Vec3, input: &Vec3) -> (Vec3, Vec3) {
        let a = &self.bandwidth;
        let d2 = -th2.component_mul(a) * 2.0 - (th1 - input).component_mul(&a.component_mul(a));
        (*th2, d2)
    }

    /// RK4 step with `omega_d` held over the interval.
    pub fn step(&mut self, omega_d: &Vec3, dt: f64) {
        let (a1, b1) = (self.theta1, self.theta2);
        let (k1a, k1b) = self.rate(&a1, &b1, omega_d);
        let (k2a, k2b) = self.rate(&(a1 + k1a * (dt / 2.0)), &(b1 + k1b * (dt / 2.0)), omega_d);
        let (k3a, k3b) = self.rate(&(a1 + k2a * (dt / 2.0)), &(b1 + k2b * (dt / 2.0)), omega_d);
        let (k4a, k4b) = self.rate(&(a1 + k3a * dt), &(b1 + k3b * dt), omega_d);
        self.theta1 = a1 + (k1a + (k2a + k3a) * 2.0 + k4a) * (dt / 6.0);
        self.theta2 = b1 + (k1b + (k2b + k3b) * 2.0 + k4b) * (dt / 6.0);
    }
}

/// Finite-difference generator of the desired attitude sequence.
#[derive(Clone, Debug)]
pub struct AttitudeReference {
    pub filter: ReferenceFilter,
    previous: Option<Rotation>,
}

impl AttitudeReference {
    pub fn new(filter: ReferenceFilter) -> Self {
        Self {
            filter,
            previous: None,
        }
    }

    /// Builds `R_d`, differentiates it against the previous sample and reads the filter.
    /// The filter is initialised on the first call.
    pub fn update(&mut self, thrust: &Vec3, yaw: f64, dt: f64) -> Result<DesiredAttitude> {
        let rotation = desired_rotation(thrust, yaw)?;
        let omega = desired_omega(self.previous.as_ref(), &rotation, dt);
        if self.previous.is_none() {
            self.filter.reset(&omega);
        }
        Ok(DesiredAttitude {
            rotation,
            omega,
            omega_dot: self.filter.omega_dot(),
        })
    }

    /// Commits the sample and advances the filter over the control period.
    pub fn advance(&mut self, desired: &DesiredAttitude, dt: f64) {
        self.previous = Some(desired.rotation);
        self.filter.step(&desired.omega, dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{e_z, so3_exp};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    const MG: f64 = 0.467 * 9.81;

    #[test]
    fn vertical_thrust_zero_yaw_is_identity() {
        let r = desired_rotation(&Vec3::new(0.0, 0.0, MG), 0.0).unwrap();
        assert_abs_diff_eq!(*r.matrix(), Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn vertical_thrust_quarter_yaw() {
        let r = desired_rotation(&Vec3::new(0.0, 0.0, MG), FRAC_PI_4).unwrap();
        let s = FRAC_PI_4.sin();
        let expected = Mat3::new(s, -s, 0.0, s, s, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(*r.matrix(), *so3_exp(&(e_z() * FRAC_PI_4)).matrix(), epsilon = 1e-15);
    }

    #[test]
    fn singularities() {
        assert!(matches!(desired_rotation(&Vec3::zeros(), 0.0), Err(Error::ThrustSingularity)));
        assert!(matches!(
            desired_rotation(&Vec3::new(1.0, 0.0, 0.0), 0.0),
            Err(Error::YawSingularity)
        ));
    }

    #[test]
    fn constant_attitude_has_zero_rate() {
        let r = so3_exp(&Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(desired_omega(None, &r, 1e-3), Vec3::zeros());
        assert_abs_diff_eq!(desired_omega(Some(&r), &r, 1e-3), Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn yaw_spin_rate_is_second_order_accurate() {
        let rate = 0.3;
        for dt in [1e-2, 1e-3] {
            let a = so3_exp(&(e_z() * (rate * 2.0)));
            let b = so3_exp(&(e_z() * (rate * (2.0 + dt))));
            let w = desired_omega(Some(&a), &b, dt);
            // closed form: sin(rate dt)/dt
            assert_abs_diff_eq!(w, Vec3::new(0.0, 0.0, (rate * dt).sin() / dt), epsilon = 1e-12);
            assert!((w.z - rate).abs() <= rate.powi(3) * dt * dt / 6.0 * 1.01);
        }
    }

    #[test]
    fn yaw_spin_through_thrust_construction() {
        let rate = 0.3;
        let dt = 1e-3;
        let t = Vec3::new(0.0, 0.0, MG);
        let a = desired_rotation(&t, rate * 1.0).unwrap();
        let b = desired_rotation(&t, rate * (1.0 + dt)).unwrap();
        assert_abs_diff_eq!(desired_omega(Some(&a), &b, dt), Vec3::new(0.0, 0.0, rate), epsilon = 1e-7);
    }

    #[test]
    fn filter_equilibrium() {
        let c = Vec3::new(0.1, -0.2, 0.3);
        let mut f = ReferenceFilter::new(Vec3::repeat(20.0)).unwrap();
        f.reset(&c);
        for _ in 0..100 {
            f.step(&c, 1e-3);
        }
        assert_abs_diff_eq!(f.theta1, c, epsilon = 1e-15);
        assert_eq!(f.theta2, Vec3::zeros());
    }

    #[test]
    fn filter_differentiates_a_sinusoid() {
        let mut f = ReferenceFilter::new(Vec3::repeat(20.0)).unwrap();
        let dt = 1e-3;
        let mut peak: f64 = 0.0;
        for n in 0..30_000 {
            let t = n as f64 * dt;
            f.step(&Vec3::new(t.sin(), 0.0, 0.0), dt);
            if t > 20.0 {
                peak = peak.max(f.theta2.x.abs());
            }
        }
        // |H(j1)| = a^2 / (a^2 + 1) for the double pole at -a
        assert_abs_diff_eq!(peak, 400.0 / 401.0, epsilon = 1e-4);
        assert!((peak - 1.0).abs() < 0.01);
    }

    #[test]
    fn filter_step_is_critically_damped() {
        let a = 20.0;
        let mut f = ReferenceFilter::new(Vec3::repeat(a)).unwrap();
        let dt = 1e-3;
        let mut max: f64 = 0.0;
        for n in 1..=2000 {
            f.step(&Vec3::repeat(1.0), dt);
            let t = n as f64 * dt;
            let closed = 1.0 - (1.0 + a * t) * (-a * t).exp();
            assert_abs_diff_eq!(f.theta1.x, closed, epsilon = 1e-3);
            max = max.max(f.theta1.x);
        }
        assert!(max <= 1.0 + 1e-3);
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(ReferenceFilter::new(Vec3::new(20.0, 0.0, 20.0)).is_err());
    }

    proptest! {
        #[test]
        fn construction_is_orthonormal(
            tx in -3.0f64..3.0, ty in -3.0f64..3.0, tz in 0.5f64..8.0, yaw in -6.0f64..6.0
        ) {
            let t = Vec3::new(tx, ty, tz);
            let r = desired_rotation(&t, yaw).unwrap();
            let m = r.matrix();
            prop_assert!((m.transpose() * m - Mat3::identity()).abs().max() < 1e-12);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
            prop_assert!((r.apply(&e_z()).dot(&t) - t.norm()).abs() < 1e-12);
        }

        #[test]
        fn yaw_equivariance_for_vertical_thrust(yaw in -3.0f64..3.0, delta in -3.0f64..3.0) {
            let t = Vec3::new(0.0, 0.0, MG);
            let a = desired_rotation(&t, yaw).unwrap();
            let b = desired_rotation(&t, yaw + delta).unwrap();
            let expected = so3_exp(&(e_z() * delta)).compose(&a);
            prop_assert!((b.matrix() - expected.matrix()).abs().max() < 1e-12);
        }
    }
}
