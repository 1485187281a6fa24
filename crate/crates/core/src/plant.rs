//! Ground-truth rigid-body quadrotor dynamics.
//!
//! Translational and angular velocity states are advanced with classical RK4;
//! the attitude is advanced on the group as `R * exp(theta)` where `theta` is
//! accumulated with the Munthe-Kaas correction so the whole step stays
//! fourth order.

use crate::error::{Error, Result};
use crate::geometry::{e_z, project_to_so3, Mat3, Rotation, Vec3};

/// Largest integration step the plant accepts.
pub const MAX_DT: f64 = 0.01;
/// Attitude is re-projected onto SO(3) after this many steps.
pub const PROJECTION_INTERVAL: u64 = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub inertia: Mat3,
    pub gravity: f64,
    inertia_inv: Mat3,
}

impl PhysicalParams {
    pub fn new(mass: f64, inertia: Mat3, gravity: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::config(format!("mass must be positive, got {mass}")));
        }
        if !(gravity > 0.0) {
            return Err(Error::config(format!("gravity must be positive, got {gravity}")));
        }
        if (inertia - inertia.transpose()).abs().max() > 1e-12 {
            return Err(Error::config("inertia matrix must be symmetric"));
        }
        if inertia.cholesky().is_none() {
            return Err(Error::config("inertia matrix must be positive definite"));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::config("inertia matrix is singular"))?;
        Ok(Self {
            mass,
            inertia,
            gravity,
            inertia_inv,
        })
    }

    /// Quadrotor used throughout the reference scenarios.
    pub fn reference() -> Self {
        Self::new(
            0.467,
            Mat3::from_diagonal(&Vec3::new(8.28e-3, 8.28e-3, 15.7e-3)),
            9.81,
        )
        .expect("reference parameters are valid")
    }

    /// Same vehicle with the inertia scaled per body axis.
    pub fn with_inertia_scale(&self, scale: &Vec3) -> Result<Self> {
        let s = Mat3::from_diagonal(&scale.map(f64::sqrt));
        Self::new(self.mass, s * self.inertia * s, self.gravity)
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Rotation,
    pub angular_velocity: Vec3,
}

impl RigidBodyState {
    pub fn at_rest() -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Rotation::identity(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
            && self.attitude.matrix().iter().all(|x| x.is_finite())
    }
}

/// Per-axis `offset + amplitude * sin(rate * t + phase)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AxisSinusoid {
    pub offset: Vec3,
    pub amplitude: Vec3,
    /// Angular rate in rad/s.
    pub rate: Vec3,
    pub phase: Vec3,
}

impl AxisSinusoid {
    pub fn eval(&self, t: f64) -> Vec3 {
        Vec3::from_fn(|i, _| {
            self.offset[i] + self.amplitude[i] * (self.rate[i] * t + self.phase[i]).sin()
        })
    }

    /// Upper bound on `|eval(t)|` over all `t`.
    pub fn bound(&self) -> f64 {
        Vec3::from_fn(|i, _| self.offset[i].abs() + self.amplitude[i].abs()).norm()
    }

    pub fn is_zero(&self) -> bool {
        self.offset == Vec3::zeros() && self.amplitude == Vec3::zeros()
    }
}

/// Bounded external force and torque; zero unless configured.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DisturbanceSpec {
    pub force: AxisSinusoid,
    pub torque: AxisSinusoid,
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn force_at(&self, t: f64) -> Vec3 {
        self.force.eval(t)
    }

    pub fn torque_at(&self, t: f64) -> Vec3 {
        self.torque.eval(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    pub thrust: f64,
    pub torque: Vec3,
}

impl ControlInput {
    pub fn hover(params: &PhysicalParams) -> Self {
        Self {
            thrust: params.hover_thrust(),
            torque: Vec3::zeros(),
        }
    }

    pub fn zero() -> Self {
        Self {
            thrust: 0.0,
            torque: Vec3::zeros(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub position_rate: Vec3,
    pub acceleration: Vec3,
    /// Body rate that drives `R' = R hat(omega)`.
    pub body_rate: Vec3,
    pub angular_acceleration: Vec3,
}

pub fn state_derivative(
    s: &RigidBodyState,
    u: &ControlInput,
    d: &DisturbanceSpec,
    t: f64,
    p: &PhysicalParams,
) -> StateDerivative {
    derivative_with(s, u, &d.force_at(t), &d.torque_at(t), p)
}

fn derivative_with(
    s: &RigidBodyState,
    u: &ControlInput,
    force_d: &Vec3,
    torque_d: &Vec3,
    p: &PhysicalParams,
) -> StateDerivative {
    let thrust_axis = s.attitude.apply(&e_z());
    let acceleration =
        (-p.mass * p.gravity * e_z() + u.thrust * thrust_axis + force_d) / p.mass;
    let w = &s.angular_velocity;
    let momentum = p.inertia * w;
    let angular_acceleration = p.inertia_inv * (momentum.cross(w) + u.torque + torque_d);
    StateDerivative {
        position_rate: s.velocity,
        acceleration,
        body_rate: *w,
        angular_acceleration,
    }
}

pub fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::config(format!(
            "integration step must satisfy 0 < dt <= {MAX_DT}, got {dt}"
        )))
    }
}

// Inverse right Jacobian of exp, truncated after the second commutator.
fn dexp_inv(theta: &Vec3, w: &Vec3) -> Vec3 {
    let c = theta.cross(w);
    w + c * 0.5 + theta.cross(&c) / 12.0
}

fn stage(
    base: &RigidBodyState,
    k: &StateDerivative,
    theta_rate: &Vec3,
    h: f64,
) -> (RigidBodyState, Vec3) {
    let theta = theta_rate * h;
    let s = RigidBodyState {
        position: base.position + k.position_rate * h,
        velocity: base.velocity + k.acceleration * h,
        attitude: base.attitude.retract(&theta),
        angular_velocity: base.angular_velocity + k.angular_acceleration * h,
    };
    (s, theta)
}

/// One fixed RK4 step with the control input held over `[t, t + dt]`.
pub fn step(
    s: &RigidBodyState,
    u: &ControlInput,
    d: &DisturbanceSpec,
    t: f64,
    dt: f64,
    p: &PhysicalParams,
) -> Result<RigidBodyState> {
    check_dt(dt)?;
    let half = 0.5 * dt;
    let k1 = state_derivative(s, u, d, t, p);
    let th1 = k1.body_rate;

    let (s2, theta2) = stage(s, &k1, &th1, half);
    let k2 = state_derivative(&s2, u, d, t + half, p);
    let th2 = dexp_inv(&theta2, &k2.body_rate);

    let (s3, theta3) = stage(s, &k2, &th2, half);
    let k3 = state_derivative(&s3, u, d, t + half, p);
    let th3 = dexp_inv(&theta3, &k3.body_rate);

    let (s4, theta4) = stage(s, &k3, &th3, dt);
    let k4 = state_derivative(&s4, u, d, t + dt, p);
    let th4 = dexp_inv(&theta4, &k4.body_rate);

    let w = dt / 6.0;
    let combine = |a: Vec3, b: Vec3, c: Vec3, e: Vec3| (a + (b + c) * 2.0 + e) * w;
    Ok(RigidBodyState {
        position: s.position
            + combine(k1.position_rate, k2.position_rate, k3.position_rate, k4.position_rate),
        velocity: s.velocity
            + combine(k1.acceleration, k2.acceleration, k3.acceleration, k4.acceleration),
        attitude: s.attitude.retract(&combine(th1, th2, th3, th4)),
        angular_velocity: s.angular_velocity
            + combine(
                k1.angular_acceleration,
                k2.angular_acceleration,
                k3.angular_acceleration,
                k4.angular_acceleration,
            ),
    })
}

/// Plant with its disturbance model and the periodic re-projection policy.
#[derive(Clone, Debug)]
pub struct Plant {
    pub params: PhysicalParams,
    pub disturbance: DisturbanceSpec,
    steps: u64,
}

impl Plant {
    pub fn new(params: PhysicalParams, disturbance: DisturbanceSpec) -> Self {
        Self {
            params,
            disturbance,
            steps: 0,
        }
    }

    pub fn derivative(&self, s: &RigidBodyState, u: &ControlInput, t: f64) -> StateDerivative {
        state_derivative(s, u, &self.disturbance, t, &self.params)
    }

    pub fn advance(
        &mut self,
        s: &RigidBodyState,
        u: &ControlInput,
        t: f64,
        dt: f64,
    ) -> Result<RigidBodyState> {
        let mut next = step(s, u, &self.disturbance, t, dt, &self.params)?;
        self.steps += 1;
        if self.steps % PROJECTION_INTERVAL == 0 && next.is_finite() {
            next.attitude = project_to_so3(next.attitude.matrix())?;
        }
        Ok(next)
    }
}
