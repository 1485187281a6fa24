//! Saturated thrust-vector law with its `e_f` integrator, plus the
//! velocity-free variant of the auxiliary signal `y`.

use crate::error::{Error, Result};
use crate::geometry::{e_z, Mat3, Vec3};

/// `|e_f,i|` is clamped here before evaluating `cosh^2`.
pub const EF_CLAMP: f64 = 20.0;

/// Sample of the desired position and yaw trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl TrajectoryPoint {
    pub fn hover_at(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
            yaw,
            yaw_rate: 0.0,
            yaw_accel: 0.0,
        }
    }
}

/// How the `eta` term enters the `e_f` dynamics: `-k eta` as in the control law
/// itself, or `-m k eta` as in the closed-loop `y` dynamics used by the analysis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EtaCoupling {
    #[default]
    Literal,
    MassScaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionGains {
    pub k: f64,
    pub k_x: f64,
    /// Diagonal of `K_f`.
    pub k_f: Vec3,
    /// Bound on `|x''_d,z|`.
    pub mu_d: f64,
    pub coupling: EtaCoupling,
}

impl PositionGains {
    pub fn new(k: f64, k_x: f64, k_f: Vec3, mu_d: f64) -> Result<Self> {
        if !(k > 0.0) || !(k_x > 0.0) {
            return Err(Error::config(format!(
                "position gains k and k_x must be positive, got k = {k}, k_x = {k_x}"
            )));
        }
        if k_f.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("K_f must be diagonal positive"));
        }
        if !(mu_d >= 0.0) {
            return Err(Error::config(format!("mu_d must be >= 0, got {mu_d}")));
        }
        Ok(Self {
            k,
            k_x,
            k_f,
            mu_d,
            coupling: EtaCoupling::Literal,
        })
    }

    pub fn reference() -> Self {
        Self::new(4.0, 0.1, Vec3::new(1.0, 1.0, 1.0), 0.0).expect("reference gains are valid")
    }

    pub fn k_f_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&self.k_f)
    }

    pub fn k_f_min(&self) -> f64 {
        self.k_f.min()
    }

    pub fn k_f_max(&self) -> f64 {
        self.k_f.max()
    }

    fn eta_gain(&self, mass: f64) -> f64 {
        match self.coupling {
            EtaCoupling::Literal => self.k,
            EtaCoupling::MassScaled => mass * self.k,
        }
    }

    /// `(f_min, f_max)` guaranteed by the saturation of `y`.
    pub fn thrust_bounds(&self, mass: f64, gravity: f64) -> (f64, f64) {
        let f_min = mass * (gravity - self.mu_d - (self.k + self.k_x + self.k_f.z));
        let f_max = mass * (gravity + self.mu_d + self.k + self.k_x + self.k_f_max());
        (f_min, f_max)
    }
}

/// Integrator-backed state of the position loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionCtrlMemory {
    pub e_f: Vec3,
    /// Present only in velocity-free mode.
    pub p: Option<Vec3>,
}

impl PositionCtrlMemory {
    pub fn new() -> Self {
        Self {
            e_f: Vec3::zeros(),
            p: None,
        }
    }

    /// Velocity-free memory with `p(0) = k x~(0)` so that `y(0) = 0`.
    pub fn velocity_free(x_err: &Vec3, gains: &PositionGains) -> Self {
        Self {
            e_f: Vec3::zeros(),
            p: Some(x_err * gains.k),
        }
    }

    /// The auxiliary signal `y`.
    pub fn y(&self, x_err: &Vec3, gains: &PositionGains) -> Vec3 {
        match self.p {
            Some(p) => p - x_err * gains.k,
            None => self.e_f.map(f64::tanh),
        }
    }

    /// Advances the memory over one control period with `x~` and `v~` held.
    pub fn advance(
        &mut self,
        x_err: &Vec3,
        v_err: &Vec3,
        gains: &PositionGains,
        mass: f64,
        dt: f64,
    ) {
        match self.p {
            Some(p) => {
                let f = |p: &Vec3| velocity_free_y(x_err, p, gains, mass).1;
                self.p = Some(rk4(&p, dt, f));
            }
            None => {
                let f = |e: &Vec3| {
                    let y = e.map(f64::tanh);
                    let eta_v = eta(x_err, v_err, &y, gains.k_x);
                    ef_rate(e, x_err, &eta_v, gains, mass)
                };
                self.e_f = rk4(&self.e_f, dt, f);
            }
        }
    }
}

impl Default for PositionCtrlMemory {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn rk4(x: &Vec3, h: f64, f: impl Fn(&Vec3) -> Vec3) -> Vec3 {
    let k1 = f(x);
    let k2 = f(&(x + k1 * (h / 2.0)));
    let k3 = f(&(x + k2 * (h / 2.0)));
    let k4 = f(&(x + k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// `T = m g e_z + m x''_d + m ((k + k_x) y + K_f y)`.
pub fn thrust_vector(
    y: &Vec3,
    traj: &TrajectoryPoint,
    gains: &PositionGains,
    mass: f64,
    gravity: f64,
) -> Vec3 {
    let feedback = y * (gains.k + gains.k_x) + y.component_mul(&gains.k_f);
    (e_z() * gravity + traj.acceleration + feedback) * mass
}

/// `e_f' = Cosh^2(e_f) (-K_f y + k_x^2 (1 - 1/m) x~ - k eta)` with `y = Tanh(e_f)`.
pub fn ef_rate(e_f: &Vec3, x_err: &Vec3, eta: &Vec3, gains: &PositionGains, mass: f64) -> Vec3 {
    let clamped = e_f.map(|e| e.clamp(-EF_CLAMP, EF_CLAMP));
    let y = clamped.map(f64::tanh);
    let ydot = y_rate(&y, x_err, eta, gains, mass);
    Vec3::from_fn(|i, _| clamped[i].cosh().powi(2) * ydot[i])
}

/// Closed-loop rate of `y`, identical in both `y` realisations.
pub fn y_rate(y: &Vec3, x_err: &Vec3, eta: &Vec3, gains: &PositionGains, mass: f64) -> Vec3 {
    -y.component_mul(&gains.k_f) + x_err * (gains.k_x.powi(2) * (1.0 - 1.0 / mass))
        - eta * gains.eta_gain(mass)
}

/// `eta = v~ + k_x x~ + y`.
pub fn eta(x_err: &Vec3, v_err: &Vec3, y: &Vec3, k_x: f64) -> Vec3 {
    v_err + x_err * k_x + y
}

/// Velocity-free `y = p - k x~` and the rate of `p`.
pub fn velocity_free_y(x_err: &Vec3, p: &Vec3, gains: &PositionGains, mass: f64) -> (Vec3, Vec3) {
    let k = gains.k;
    let y = p - x_err * k;
    let p_rate = -(x_err * gains.k_x + y) * gains.eta_gain(mass) - y.component_mul(&gains.k_f)
        + x_err * (gains.k_x.powi(2) * (1.0 - 1.0 / mass));
    (y, p_rate)
}
