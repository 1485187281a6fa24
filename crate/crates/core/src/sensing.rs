//! Measurement models: GPS-like position/velocity, biased gyro rate and body-frame
//! unit-vector observations of known inertial directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{e_z, Vec3};
use crate::plant::RigidBodyState;

/// Minimum cross-product norm for two reference directions to count as non-collinear.
pub const COLLINEAR_TOL: f64 = 1e-6;
const UNIT_TOL: f64 = 1e-12;
const ZERO_NORM_TOL: f64 = 1e-9;

/// Known inertial directions with their confidence weights.
#[derive(Clone, Debug, PartialEq)]
pub struct InertialReferenceSet {
    directions: Vec<Vec3>,
    weights: Vec<f64>,
}

impl InertialReferenceSet {
    pub fn new(directions: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if directions.len() != weights.len() {
            return Err(Error::config(format!(
                "{} reference directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        if directions.len() < 2 {
            return Err(Error::AssumptionViolation(format!(
                "need at least two reference directions, got {}",
                directions.len()
            )));
        }
        for (i, r) in directions.iter().enumerate() {
            if (r.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::config(format!(
                    "reference direction {} is not unit length (|r| = {})",
                    i + 1,
                    r.norm()
                )));
            }
        }
        if let Some(k) = weights.iter().find(|k| !(**k > 0.0)) {
            return Err(Error::config(format!("sensor weights must be positive, got {k}")));
        }
        let spans_plane = directions.iter().enumerate().any(|(i, a)| {
            directions[i + 1..]
                .iter()
                .any(|b| a.cross(b).norm() > COLLINEAR_TOL)
        });
        if !spans_plane {
            return Err(Error::AssumptionViolation(
                "all reference directions are collinear".into(),
            ));
        }
        Ok(Self { directions, weights })
    }

    /// `r1 = e_z`, `r2 = [1,1,1]/sqrt(3)`, `r3 = r1 x r2 / |r1 x r2|`, all weights 0.1.
    pub fn reference() -> Self {
        let r1 = e_z();
        let r2 = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        let r3 = r1.cross(&r2).normalize();
        Self::new(vec![r1, r2, r3], vec![0.1; 3]).expect("reference set is valid")
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroBias {
    pub bias: Vec3,
    pub bound: f64,
}

impl GyroBias {
    pub fn new(bias: Vec3, bound: f64) -> Result<Self> {
        if !(bias.norm() <= bound) {
            return Err(Error::config(format!(
                "gyro bias norm {:.4} exceeds declared bound {bound}",
                bias.norm()
            )));
        }
        Ok(Self { bias, bound })
    }

    pub fn reference() -> Self {
        Self::new(Vec3::new(0.2, 0.1, -0.1), 0.5).expect("reference bias is valid")
    }
}

/// How a channel's level scales its unit Gaussian draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseModel {
    /// `sigma * rho` with `rho` standard normal: the level is a standard deviation.
    #[default]
    Gaussian,
    /// `nu * rho` with a fresh `nu ~ U(0, sigma)` per sample and channel.
    UniformAmplitude,
}

/// Per-channel noise levels. Their meaning depends on `model`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub position: f64,
    pub velocity: f64,
    pub gyro: f64,
    pub vector: f64,
    pub model: NoiseModel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            position: 0.0,
            velocity: 0.0,
            gyro: 0.0,
            vector: 0.0,
            model: NoiseModel::Gaussian,
            seed: 0,
        }
    }

    /// Noise levels of the noisy-measurement scenario, with a uniformly
    /// distributed amplitude multiplying each Gaussian draw.
    pub fn noisy(seed: u64) -> Self {
        Self {
            position: 0.05,
            velocity: 0.05,
            gyro: 0.1,
            vector: 0.1,
            model: NoiseModel::UniformAmplitude,
            seed,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.position == 0.0 && self.velocity == 0.0 && self.gyro == 0.0 && self.vector == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("position", self.position),
            ("velocity", self.velocity),
            ("gyro", self.gyro),
            ("vector", self.vector),
        ] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::config(format!(
                    "noise level for {name} must be finite and >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Counter-based Gaussian source: every draw is a pure function of
/// `(seed, channel, tick)`, so runs replay identically regardless of how
/// simulations are scheduled.
#[derive(Clone, Copy, Debug)]
pub struct NoiseStream {
    seed: u64,
}

/// ChaCha words reserved per (channel, tick) cell; the second half serves resamples.
const WORDS_PER_TICK: u128 = 1 << 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Position,
    Velocity,
    Gyro,
    Vector(usize),
}

impl Channel {
    fn stream_id(self) -> u64 {
        match self {
            Channel::Position => 0,
            Channel::Velocity => 1,
            Channel::Gyro => 2,
            Channel::Vector(i) => 3 + i as u64,
        }
    }
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Three independent standard normals for `channel` at `tick`; `attempt`
    /// selects a disjoint block for resampling.
    pub fn standard_normal3(&self, channel: Channel, tick: u64, attempt: u32) -> Vec3 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(channel.stream_id());
        let base = tick as u128 * WORDS_PER_TICK + attempt as u128 * (WORDS_PER_TICK / 2);
        rng.set_word_pos(base);
        Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        )
    }

    /// Uniform draw on `[0, 1)` for `channel` at `tick`, disjoint from the normals.
    pub fn unit_uniform(&self, channel: Channel, tick: u64, attempt: u32) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(channel.stream_id());
        let base = tick as u128 * WORDS_PER_TICK + attempt as u128 * (WORDS_PER_TICK / 2) + WORDS_PER_TICK / 4;
        rng.set_word_pos(base);
        rng.random::<f64>()
    }

    /// One noise vector at level `sigma` under `model`.
    pub fn sample(&self, model: NoiseModel, sigma: f64, channel: Channel, tick: u64, attempt: u32) -> Vec3 {
        let amplitude = match model {
            NoiseModel::Gaussian => sigma,
            NoiseModel::UniformAmplitude => sigma * self.unit_uniform(channel, tick, attempt),
        };
        self.standard_normal3(channel, tick, attempt) * amplitude
    }
}

/// Everything the controller is allowed to see at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    pub position: Vec3,
    pub velocity: Vec3,
    pub gyro: Vec3,
    pub vectors: Vec<Vec3>,
}

fn noisy_unit(
    v: &Vec3,
    sigma: f64,
    model: NoiseModel,
    stream: &NoiseStream,
    channel: Channel,
    tick: u64,
) -> Result<Vec3> {
    if sigma == 0.0 {
        return Ok(*v);
    }
    for attempt in 0..2 {
        let u = v + stream.sample(model, sigma, channel, tick, attempt);
        let n = u.norm();
        if n >= ZERO_NORM_TOL {
            return Ok(u / n);
        }
    }
    Err(Error::DegenerateMeasurement)
}

/// Samples all sensors. `directions` are the inertial directions actually
/// observed this tick (normally the reference set, possibly with the
/// apparent-acceleration direction substituted).
pub fn measure(
    s: &RigidBodyState,
    directions: &[Vec3],
    bias: &GyroBias,
    noise: &NoiseSpec,
    tick: u64,
) -> Result<SensorFrame> {
    let stream = NoiseStream::new(noise.seed);
    let draw = |sigma: f64, ch: Channel| -> Vec3 {
        if sigma == 0.0 {
            Vec3::zeros()
        } else {
            stream.sample(noise.model, sigma, ch, tick, 0)
        }
    };
    let rt = s.attitude.transpose();
    let vectors = directions
        .iter()
        .enumerate()
        .map(|(i, r)| noisy_unit(&rt.apply(r), noise.vector, noise.model, &stream, Channel::Vector(i), tick))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensorFrame {
        position: s.position + draw(noise.position, Channel::Position),
        velocity: s.velocity + draw(noise.velocity, Channel::Velocity),
        gyro: s.angular_velocity + bias.bias + draw(noise.gyro, Channel::Gyro),
        vectors,
    })
}

/// Direction of the specific force `(g e_z + a) / |g e_z + a|` seen by an accelerometer.
pub fn apparent_acceleration_reference(acceleration: &Vec3, gravity: f64) -> Result<Vec3> {
    let f = e_z() * gravity + acceleration;
    let n = f.norm();
    if n <= 1e-6 {
        return Err(Error::FreeFallSingularity(n));
    }
    Ok(f / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{so3_exp, Mat3, Rotation};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identity_attitude_sees_inertial_directions() {
        let refs = InertialReferenceSet::reference();
        let f = measure(
            &RigidBodyState::at_rest(),
            refs.directions(),
            &GyroBias::reference(),
            &NoiseSpec::none(),
            0,
        )
        .unwrap();
        assert_eq!(f.vectors[0], e_z());
        assert_eq!(f.gyro, Vec3::new(0.2, 0.1, -0.1));
    }

    #[test]
    fn reference_set_validation() {
        assert!(matches!(
            InertialReferenceSet::new(vec![e_z(), -e_z()], vec![0.1, 0.1]),
            Err(Error::AssumptionViolation(_))
        ));
        assert!(matches!(
            InertialReferenceSet::new(vec![e_z()], vec![0.1]),
            Err(Error::AssumptionViolation(_))
        ));
        assert!(InertialReferenceSet::new(vec![e_z(), Vec3::new(0.0, 1.0, 1.0)], vec![0.1, 0.1])
            .is_err());
        assert!(InertialReferenceSet::new(vec![e_z(), Vec3::x()], vec![0.1, 0.0]).is_err());
        assert!(InertialReferenceSet::new(vec![e_z(), Vec3::x()], vec![0.1]).is_err());
    }

    #[test]
    fn bias_bound_enforced() {
        assert!(GyroBias::new(Vec3::new(1.0, 0.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn apparent_acceleration_examples() {
        assert_eq!(apparent_acceleration_reference(&Vec3::zeros(), 9.81).unwrap(), e_z());
        let r = apparent_acceleration_reference(&Vec3::new(9.81, 0.0, 0.0), 9.81).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(r, Vec3::new(s, 0.0, s), epsilon = 1e-15);
        assert!(matches!(
            apparent_acceleration_reference(&Vec3::new(0.0, 0.0, -9.81), 9.81),
            Err(Error::FreeFallSingularity(_))
        ));
    }

    #[test]
    fn same_seed_same_stream() {
        let s = RigidBodyState::at_rest();
        let refs = InertialReferenceSet::reference();
        let a = measure(&s, refs.directions(), &GyroBias::reference(), &NoiseSpec::noisy(5), 17)
            .unwrap();
        let b = measure(&s, refs.directions(), &GyroBias::reference(), &NoiseSpec::noisy(5), 17)
            .unwrap();
        let c = measure(&s, refs.directions(), &GyroBias::reference(), &NoiseSpec::noisy(6), 17)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let stream = NoiseStream::new(1);
        assert_ne!(
            stream.standard_normal3(Channel::Position, 3, 0),
            stream.standard_normal3(Channel::Velocity, 3, 0)
        );
        assert_ne!(
            stream.standard_normal3(Channel::Position, 3, 0),
            stream.standard_normal3(Channel::Position, 4, 0)
        );
    }

    #[test]
    fn gyro_offset_is_constant_without_noise() {
        let refs = InertialReferenceSet::reference();
        for (tick, w) in [(0u64, 0.0), (10, 1.0), (99, -3.0)] {
            let s = RigidBodyState {
                angular_velocity: Vec3::new(w, 2.0 * w, -w),
                ..RigidBodyState::at_rest()
            };
            let f = measure(&s, refs.directions(), &GyroBias::reference(), &NoiseSpec::none(), tick)
                .unwrap();
            assert_abs_diff_eq!(f.gyro - s.angular_velocity, GyroBias::reference().bias, epsilon = 1e-15);
        }
    }

    // Small-noise prediction: the perpendicular part of an isotropic N(0, s^2 I)
    // perturbation is Rayleigh distributed, mean angle s * sqrt(pi / 2).
    #[test]
    fn vector_noise_angle_statistics() {
        let sigma = 0.1;
        let refs = InertialReferenceSet::reference();
        let noise = NoiseSpec { vector: sigma, ..NoiseSpec::none() };
        let s = RigidBodyState::at_rest();
        let bias = GyroBias::reference();
        let n = 10_000;
        let mut mean = 0.0;
        for tick in 0..n {
            let f = measure(&s, refs.directions(), &bias, &noise, tick).unwrap();
            mean += f.vectors[0].dot(&e_z()).clamp(-1.0, 1.0).acos();
        }
        mean /= n as f64;
        let prediction = sigma * (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean - prediction).abs() < 0.2 * prediction, "{mean} vs {prediction}");

        // independent Monte Carlo with another generator
        let mut rng = rand::rngs::StdRng::seed_from_u64(99);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut oracle = 0.0;
        for _ in 0..n {
            let u = e_z() + Vec3::from_fn(|_, _| normal.sample(&mut rng));
            oracle += u.normalize().dot(&e_z()).clamp(-1.0, 1.0).acos();
        }
        oracle /= n as f64;
        assert!((mean - oracle).abs() < 0.05 * oracle, "{mean} vs {oracle}");
    }

    #[test]
    fn uniform_amplitude_position_noise_statistics() {
        // nu ~ U(0, s) times a unit normal: E[n_i^2] = s^2/3, E|n_i| = (s/2) sqrt(2/pi)
        let s0 = 0.05;
        let noise = NoiseSpec { position: s0, model: NoiseModel::UniformAmplitude, ..NoiseSpec::none() };
        let state = RigidBodyState::at_rest();
        let refs = InertialReferenceSet::reference();
        let n = 20_000;
        let (mut sq, mut abs) = (0.0, 0.0);
        for tick in 0..n {
            let f = measure(&state, refs.directions(), &GyroBias::reference(), &noise, tick).unwrap();
            sq += f.position.norm_squared() / 3.0;
            abs += f.position.abs().sum() / 3.0;
        }
        let (sq, abs) = (sq / n as f64, abs / n as f64);
        assert!((sq - s0 * s0 / 3.0).abs() < 0.03 * s0 * s0 / 3.0, "{sq}");
        let e_abs = 0.5 * s0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((abs - e_abs).abs() < 0.03 * e_abs, "{abs}");
    }

    // Wahba oracle: SVD solution of min sum k |v_i - R^T r_i|^2.
    fn wahba(refs: &InertialReferenceSet, body: &[Vec3]) -> Mat3 {
        let mut b = Mat3::zeros();
        for ((r, v), k) in refs.directions().iter().zip(body).zip(refs.weights()) {
            b += v * r.transpose() * *k;
        }
        let svd = b.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let d = (u * vt).determinant().signum();
        let fix = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d));
        // B = R^T W, so the fitted rotation of body vectors is R^T
        (u * fix * vt).transpose()
    }

    proptest! {
        #[test]
        fn noise_free_measurements_pin_down_attitude(a in prop::array::uniform3(-3.0f64..3.0)) {
            let r = so3_exp(&Vec3::from(a));
            let s = RigidBodyState { attitude: r, ..RigidBodyState::at_rest() };
            let refs = InertialReferenceSet::reference();
            let f = measure(&s, refs.directions(), &GyroBias::reference(), &NoiseSpec::none(), 0).unwrap();
            let fitted = wahba(&refs, &f.vectors);
            prop_assert!((fitted - r.matrix()).abs().max() < 1e-9);
        }

        #[test]
        fn vectors_stay_unit(a in prop::array::uniform3(-3.0f64..3.0), tick in 0u64..1000, sigma in 0.0f64..2.0) {
            let s = RigidBodyState { attitude: Rotation::about_axis(&Vec3::from(a).add_scalar(1e-3), 1.0), ..RigidBodyState::at_rest() };
            let refs = InertialReferenceSet::reference();
            let noise = NoiseSpec { vector: sigma, ..NoiseSpec::noisy(3) };
            let f = measure(&s, refs.directions(), &GyroBias::reference(), &noise, tick).unwrap();
            for v in &f.vectors {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
