//! Attitude loop driven directly by vector alignment errors; no attitude is
//! ever reconstructed from the measurements.

use crate::error::{Error, Result};
use crate::geometry::{hat, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentErrors {
    pub epsilon: f64,
    pub z: Vec3,
    pub j: Mat3,
}

/// `eps = sum k (1 - v.v_d)`, `z = sum k v x v_d`, `J = sum k hat(v_d)^T hat(v)`.
pub fn alignment(measured: &[Vec3], desired: &[Vec3], weights: &[f64]) -> Result<AlignmentErrors> {
    if measured.len() != desired.len() || measured.len() != weights.len() {
        return Err(Error::config(format!(
            "alignment inputs disagree in length: {} measured, {} desired, {} weights",
            measured.len(),
            desired.len(),
            weights.len()
        )));
    }
    let mut epsilon = 0.0;
    let mut z = Vec3::zeros();
    let mut j = Mat3::zeros();
    for ((v, vd), k) in measured.iter().zip(desired).zip(weights) {
        epsilon += k * (1.0 - v.dot(vd));
        z += v.cross(vd) * *k;
        j += hat(vd).transpose() * hat(v) * *k;
    }
    Ok(AlignmentErrors { epsilon, z, j })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttitudeGains {
    pub k_c: Mat3,
    pub lambda_c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl AttitudeGains {
    pub fn new(k_c: Mat3, lambda_c: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        if (k_c - k_c.transpose()).abs().max() > 1e-12 || k_c.cholesky().is_none() {
            return Err(Error::config("K_c must be symmetric positive definite"));
        }
        if !(lambda_c > 0.0) || !(alpha1 > 0.0) || !(alpha2 > 0.0) {
            return Err(Error::config(format!(
                "lambda_c, alpha1, alpha2 must be positive, got {lambda_c}, {alpha1}, {alpha2}"
            )));
        }
        Ok(Self {
            k_c,
            lambda_c,
            alpha1,
            alpha2,
        })
    }

    pub fn reference() -> Self {
        Self::new(Mat3::identity(), 1.0, 1.0, 0.01).expect("reference gains are valid")
    }

    /// `alpha1 - alpha2 * sum k_i`.
    pub fn lambda_a(&self, weight_sum: f64) -> f64 {
        self.alpha1 - self.alpha2 * weight_sum
    }
}

/// `w_r = -lambda_c z + w_d`.
pub fn omega_r(z: &Vec3, omega_d: &Vec3, lambda_c: f64) -> Vec3 {
    omega_d - z * lambda_c
}

/// `-lambda_c J (w_hat - w_d) - lambda_c z x w_d + w_d'`.
pub fn omega_r_hat_rate(
    omega_hat: &Vec3,
    omega_d: &Vec3,
    omega_d_dot: &Vec3,
    ae: &AlignmentErrors,
    lambda_c: f64,
) -> Vec3 {
    -(ae.j * (omega_hat - omega_d)) * lambda_c - ae.z.cross(omega_d) * lambda_c + omega_d_dot
}

/// `tau = M w_r_hat' - (M w_hat) x w_r - K_c (w_hat - w_r) - (alpha1 I + alpha2 J^T) z`.
pub fn torque(
    omega_hat: &Vec3,
    omega_r_hat_dot: &Vec3,
    omega_r: &Vec3,
    ae: &AlignmentErrors,
    inertia: &Mat3,
    gains: &AttitudeGains,
) -> Vec3 {
    inertia * omega_r_hat_dot
        - (inertia * omega_hat).cross(omega_r)
        - gains.k_c * (omega_hat - omega_r)
        - (Mat3::identity() * gains.alpha1 + ae.j.transpose() * gains.alpha2) * ae.z
}

/// Integrated reference rate. Not fed back into the torque, which uses the
/// instantaneous rate; kept for continuity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AttitudeCtrlMemory {
    pub omega_r_hat: Option<Vec3>,
}

impl AttitudeCtrlMemory {
    pub fn advance(&mut self, omega_r: &Vec3, rate: &Vec3, dt: f64) {
        let current = self.omega_r_hat.unwrap_or(*omega_r);
        self.omega_r_hat = Some(current + rate * dt);
    }
}
