//! Gyro-bias observer built on low-pass filtered copies of the vector measurements.
//!
//! Between control ticks the measurements are held, which makes the filter a
//! scalar linear lag per sensor. The filter and the `b_bar` integrator are
//! therefore advanced in closed form, so `gamma_f * dt >> 1` is not a
//! stability problem.

use crate::error::{Error, Result};
use crate::geometry::{hat, Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverGains {
    pub lambda: Vec<Mat3>,
    pub gamma_f: f64,
}

impl ObserverGains {
    pub fn new(lambda: Vec<Mat3>, gamma_f: f64) -> Result<Self> {
        for (i, l) in lambda.iter().enumerate() {
            if (l - l.transpose()).abs().max() > 1e-12 || l.cholesky().is_none() {
                return Err(Error::config(format!(
                    "observer gain Lambda_{} must be symmetric positive definite",
                    i + 1
                )));
            }
        }
        if !(gamma_f > 0.0) {
            return Err(Error::config(format!("gamma_f must be positive, got {gamma_f}")));
        }
        Ok(Self { lambda, gamma_f })
    }

    /// `Lambda_i = 10 I` for `n` sensors, `gamma_f = 1e4`.
    pub fn reference(n: usize) -> Self {
        Self::new(vec![Mat3::identity() * 10.0; n], 1e4).expect("reference gains are valid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverMemory {
    pub b_bar: Vec3,
    /// Empty until the first measurement arrives; then `v_f(0) = v(0)`.
    pub v_f: Vec<Vec3>,
}

impl ObserverMemory {
    pub fn new(b_bar: Vec3) -> Self {
        Self {
            b_bar,
            v_f: Vec::new(),
        }
    }

    pub fn init_if_empty(&mut self, v: &[Vec3]) {
        if self.v_f.is_empty() {
            self.v_f = v.to_vec();
        }
    }

    /// Closed-form advance over `dt` with `v` and `omega_hat` held.
    pub fn advance(
        &mut self,
        v: &[Vec3],
        omega_hat: &Vec3,
        gains: &ObserverGains,
        weights: &[f64],
        dt: f64,
    ) {
        self.init_if_empty(v);
        let decay = (-gains.gamma_f * dt).exp();
        let mean_factor = (1.0 - decay) / (gains.gamma_f * dt);
        let mut kv_mean = Mat3::zeros();
        let mut drive = Vec3::zeros();
        for (((vi, vf), l), k) in v.iter().zip(self.v_f.iter_mut()).zip(&gains.lambda).zip(weights) {
            let lag = *vf - vi;
            let vf_mean = vi + lag * mean_factor;
            let vf_new = vi + lag * decay;
            kv_mean += hat(&vf_mean).transpose() * l * hat(vi) * *k;
            // integral of gamma_f (L v) x (v - v_f) over the step
            drive += (l * vi).cross(&(vf_new - *vf)) * *k;
            *vf = vf_new;
        }
        self.b_bar += kv_mean * omega_hat * dt + drive;
    }
}

/// `b_hat = b_bar - sum k hat(v_f)^T Lambda v`.
pub fn bias_estimate(mem: &ObserverMemory, v: &[Vec3], gains: &ObserverGains, weights: &[f64]) -> Vec3 {
    let v_f: &[Vec3] = if mem.v_f.is_empty() { v } else { &mem.v_f };
    let mut correction = Vec3::zeros();
    for (((vf, vi), l), k) in v_f.iter().zip(v).zip(&gains.lambda).zip(weights) {
        correction += hat(vf).transpose() * (l * vi) * *k;
    }
    mem.b_bar - correction
}

/// `K_v = sum k hat(v_f)^T Lambda hat(v)`.
pub fn kv_matrix(v_f: &[Vec3], v: &[Vec3], lambda: &[Mat3], weights: &[f64]) -> Mat3 {
    v_f.iter()
        .zip(v)
        .zip(lambda)
        .zip(weights)
        .fold(Mat3::zeros(), |acc, (((vf, vi), l), k)| {
            acc + hat(vf).transpose() * l * hat(vi) * *k
        })
}

/// `K_o`, i.e. `K_v` with the filter converged.
pub fn ko_matrix(v: &[Vec3], lambda: &[Mat3], weights: &[f64]) -> Mat3 {
    kv_matrix(v, v, lambda, weights)
}

/// `b_bar' = K_v w_hat + gamma_f sum k (Lambda v) x (v - v_f)`.
pub fn bbar_rate(
    omega_hat: &Vec3,
    v: &[Vec3],
    v_f: &[Vec3],
    gains: &ObserverGains,
    weights: &[f64],
) -> Vec3 {
    let kv = kv_matrix(v_f, v, &gains.lambda, weights);
    let drive = v
        .iter()
        .zip(v_f)
        .zip(&gains.lambda)
        .zip(weights)
        .fold(Vec3::zeros(), |acc, (((vi, vf), l), k)| {
            acc + (l * vi).cross(&(vi - vf)) * *k
        });
    kv * omega_hat + drive * gains.gamma_f
}

/// `v_f' = gamma_f (v - v_f)` per sensor.
pub fn vector_filter_rate(v: &[Vec3], v_f: &[Vec3], gamma_f: f64) -> Vec<Vec3> {
    v.iter().zip(v_f).map(|(vi, vf)| (vi - vf) * gamma_f).collect()
}
