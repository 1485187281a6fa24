//! Numeric evaluators for the stability argument: Lyapunov functions, alignment
//! constants, condition matrices and the practical-stability bound.
//!
//! Nothing here feeds back into the control path. The constant `c` of `V3`
//! in particular is analysis-only.

use nalgebra::{Matrix2, SMatrix};
use serde::{Deserialize, Serialize};

use crate::attitude::AttitudeGains;
use crate::error::{Error, Result};
use crate::geometry::{
    hat, lambda_max_sym, lambda_min_sym, sorted_symmetric_eigen, spectral_norm, Mat3, Rotation, Vec3,
};
use crate::observer::{ko_matrix, ObserverGains};
use crate::plant::PhysicalParams;
use crate::position::PositionGains;
use crate::sensing::InertialReferenceSet;

/// Default radius of the critical balls around `R_j`.
pub const DEFAULT_CRITICAL_RADIUS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentConstants {
    pub w: Mat3,
    pub w_bar: Mat3,
    /// Descending.
    pub lambda_w: [f64; 3],
    pub v_w: [Vec3; 3],
    pub varpi: f64,
    pub beta: f64,
    pub critical_radius: f64,
}

/// `W = -sum k hat(r)^2`, `W_bar = sum k r r^T`, `varpi = tr(W_bar^-1)` and
/// `beta` at its lower bound `2 lambda_w1 alpha1 / (eps_j^2 lambda_w3^2)`.
pub fn alignment_constants(
    directions: &[Vec3],
    weights: &[f64],
    alpha1: f64,
    critical_radius: f64,
) -> Result<AlignmentConstants> {
    if directions.len() != weights.len() || directions.is_empty() {
        return Err(Error::config("reference directions and weights must be non-empty and match"));
    }
    let mut w = Mat3::zeros();
    let mut w_bar = Mat3::zeros();
    for (r, k) in directions.iter().zip(weights) {
        let h = hat(r);
        w -= h * h * *k;
        w_bar += r * r.transpose() * *k;
    }
    let (lambda_w, v_w) = sorted_symmetric_eigen(&w);
    let scale = weights.iter().sum::<f64>();
    if lambda_w[2] <= 1e-9 * scale || lambda_min_sym(&w_bar) <= 1e-9 * scale {
        return Err(Error::AssumptionViolation(
            "reference directions do not contain two non-collinear vectors".into(),
        ));
    }
    let w_bar_inv = w_bar
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMatrix("W_bar".into()))?;
    if !(critical_radius > 0.0) {
        return Err(Error::config(format!("critical radius must be positive, got {critical_radius}")));
    }
    let beta = 2.0 * lambda_w[0] * alpha1 / (critical_radius.powi(2) * lambda_w[2].powi(2));
    Ok(AlignmentConstants {
        w,
        w_bar,
        lambda_w,
        v_w,
        varpi: w_bar_inv.trace(),
        beta,
        critical_radius,
    })
}

impl AlignmentConstants {
    pub fn for_set(refs: &InertialReferenceSet, alpha1: f64, critical_radius: f64) -> Result<Self> {
        alignment_constants(refs.directions(), refs.weights(), alpha1, critical_radius)
    }

    /// `R_j = I + 2 hat(v_wj)^2`, a half-turn about each eigen-direction of `W`.
    pub fn critical_rotations(&self) -> [Rotation; 3] {
        self.v_w.map(|v| Rotation::about_axis(&v, std::f64::consts::PI))
    }

    /// Index of the critical ball containing `r_tilde`, if any. The ball
    /// parameter `sigma <= eps_j` corresponds to a geodesic distance of
    /// `2 asin(sigma)` from `R_j`.
    pub fn critical_ball(&self, r_tilde: &Rotation) -> Option<usize> {
        let radius = 2.0 * self.critical_radius.min(1.0).asin();
        self.critical_rotations()
            .iter()
            .position(|rj| r_tilde.angle_to(rj) <= radius)
    }

    /// `R - R_d` bound per unit `|z|` outside the critical balls: `sqrt(varpi beta / alpha1)`.
    pub fn gap_per_alignment(&self, alpha1: f64) -> f64 {
        (self.varpi * self.beta / alpha1).sqrt()
    }
}

/// `sqrt(2 eps varpi)`, an upper bound on `|R - R_d|`.
pub fn attitude_gap_bound(epsilon: f64, varpi: f64) -> f64 {
    (2.0 * epsilon.max(0.0) * varpi).sqrt()
}

/// `(beta/2)|z|^2 - alpha1 eps`, non-negative outside the critical balls.
pub fn alignment_inequality_residual(epsilon: f64, z: &Vec3, alpha1: f64, beta: f64) -> f64 {
    0.5 * beta * z.norm_squared() - alpha1 * epsilon
}

pub fn lyapunov_v1(eta: &Vec3, x_err: &Vec3, y: &Vec3, mass: f64, k_x: f64) -> f64 {
    0.5 * (mass * eta.norm_squared() + k_x * k_x * x_err.norm_squared() + y.norm_squared())
}

pub fn lyapunov_v2(z: &Vec3, omega_err: &Vec3, bias_err: &Vec3, epsilon: f64, inertia: &Mat3, alpha1: f64, alpha2: f64) -> f64 {
    0.5 * omega_err.dot(&(inertia * omega_err))
        + 0.5 * bias_err.norm_squared()
        + 0.5 * alpha2 * z.norm_squared()
        + alpha1 * epsilon
}

/// Upper end of the admissible interval `0 < c < alpha1 lambda_c lambda_a (k - k_x) / (m g^2 varpi beta)`.
pub fn admissible_c_limit(
    pos: &PositionGains,
    att: &AttitudeGains,
    params: &PhysicalParams,
    consts: &AlignmentConstants,
    weight_sum: f64,
) -> f64 {
    att.alpha1 * att.lambda_c * att.lambda_a(weight_sum) * (pos.k - pos.k_x)
        / (params.mass * params.gravity.powi(2) * consts.varpi * consts.beta)
}

/// `c V1 + V2`, rejecting `c` outside `(0, c_limit)`.
pub fn lyapunov_v3(v1: f64, v2: f64, c: f64, c_limit: f64) -> Result<f64> {
    if !(c > 0.0 && c < c_limit) {
        return Err(Error::config(format!("c = {c} outside the admissible interval (0, {c_limit})")));
    }
    Ok(c * v1 + v2)
}

/// `(gamma1, gamma2)` with `gamma1 |zeta3|^2 <= V3 <= gamma2 |zeta3|^2` outside the critical balls.
pub fn v3_sandwich(c: f64, mass: f64, k_x: f64, inertia: &Mat3, alpha2: f64, beta: f64) -> (f64, f64) {
    let lo = [c * mass, c * k_x * k_x, c, lambda_min_sym(inertia), 1.0, alpha2];
    let hi = [c * mass, c * k_x * k_x, c, lambda_max_sym(inertia), 1.0, alpha2 + beta];
    (
        0.5 * lo.iter().cloned().fold(f64::INFINITY, f64::min),
        0.5 * hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Exponential rate `k3/(2 k2)` and ultimate bound `(k4 d/2) sqrt(k2/(k1 k3 eps))`.
pub fn practical_stability_bound(k1: f64, k2: f64, k3: f64, k4: f64, margin: f64, d_bar: f64) -> (f64, f64) {
    (k3 / (2.0 * k2), 0.5 * k4 * d_bar * (k2 / (k1 * k3 * margin)).sqrt())
}

/// Number of eigenvalues of symmetric `a` strictly below `sigma`, from the
/// signs of the LDL^T pivots of `a - sigma I` (Sylvester inertia).
fn count_below<const N: usize>(a: &SMatrix<f64, N, N>, sigma: f64) -> usize {
    let mut m = *a;
    for i in 0..N {
        m[(i, i)] -= sigma;
    }
    let scale = a.abs().max().max(1.0);
    let mut negative = 0;
    for k in 0..N {
        let mut pivot = m[(k, k)];
        if pivot.abs() < 1e-300 {
            pivot = -1e-300 * scale;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        for i in k + 1..N {
            let l = m[(i, k)] / pivot;
            for j in k + 1..N {
                m[(i, j)] -= l * m[(k, j)];
            }
        }
    }
    negative
}

/// Smallest eigenvalue of a symmetric matrix by inertia bisection.
pub fn lambda_min_bisection<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    let radius = (0..N)
        .map(|i| (0..N).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(a, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn lambda_min2(a: &Matrix2<f64>) -> f64 {
    a.symmetric_eigenvalues().min()
}

/// Trajectory-dependent quantities the conditions need but the gains do not fix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunExtremes {
    /// `max |G|` with `G = K_c - hat(w_r) M + lambda_c M J`.
    pub g_norm: f64,
    /// `max |v_i - v_f,i|`.
    pub epsilon_v: f64,
    /// `min lambda_min(K_o)`.
    pub ko_lambda_min: f64,
    /// Largest applied thrust magnitude.
    pub thrust_max: f64,
    /// True when taken from a run rather than estimated at hover.
    pub observed: bool,
}

impl RunExtremes {
    /// Estimate at hover: `w_r = 0`, `R = I`, filter converged.
    pub fn at_hover(att: &AttitudeGains, obs: &ObserverGains, params: &PhysicalParams, refs: &InertialReferenceSet) -> Self {
        let v: Vec<Vec3> = refs.directions().to_vec();
        let j = v
            .iter()
            .zip(refs.weights())
            .fold(Mat3::zeros(), |acc, (vi, k)| acc + hat(vi).transpose() * hat(vi) * *k);
        let g = att.k_c + params.inertia * j * att.lambda_c;
        Self {
            g_norm: spectral_norm(&g),
            epsilon_v: 0.0,
            ko_lambda_min: lambda_min_sym(&ko_matrix(&v, &obs.lambda, refs.weights())),
            thrust_max: params.hover_thrust(),
            observed: false,
        }
    }
}

/// `|G|` at one instant.
pub fn g_matrix(att: &AttitudeGains, inertia: &Mat3, omega_r: &Vec3, j: &Mat3) -> Mat3 {
    att.k_c - hat(omega_r) * inertia + inertia * j * att.lambda_c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub satisfied: bool,
    pub margin: f64,
    /// Hard checks gate a run unless forced.
    pub hard: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    pub lambda_min_q1: f64,
    pub lambda_min_q2: f64,
    pub lambda_min_q3: f64,
    pub lambda_min_q4: f64,
    pub lambda_min_q5: f64,
    pub gamma3: f64,
    pub lambda_a: f64,
    pub lambda_o: f64,
    pub varpi: f64,
    pub beta: f64,
    pub critical_radius: f64,
    pub c: f64,
    pub c_limit: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub extremes: RunExtremes,
    /// Cross-check of every `lambda_min` against inertia bisection.
    pub bisection_max_discrepancy: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn hard_failures(&self) -> Vec<&ConditionCheck> {
        self.checks.iter().filter(|c| c.hard && !c.satisfied).collect()
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionMatrices {
    pub q1: Mat3,
    pub q2: Mat3,
    pub q3: Matrix2<f64>,
    pub q4: Matrix2<f64>,
    pub q5: Matrix2<f64>,
}

/// Builds `Q1..Q5` and grades every gain condition. `c = None` picks half the admissible limit.
#[allow(clippy::too_many_arguments)]
pub fn condition_matrices(
    pos: &PositionGains,
    att: &AttitudeGains,
    obs: &ObserverGains,
    params: &PhysicalParams,
    refs: &InertialReferenceSet,
    extremes: &RunExtremes,
    critical_radius: f64,
    c: Option<f64>,
) -> Result<(ConditionMatrices, ConditionReport)> {
    let m = params.mass;
    let g = params.gravity;
    let weight_sum = refs.weight_sum();
    let consts = AlignmentConstants::for_set(refs, att.alpha1, critical_radius)?;
    let lambda_a = att.lambda_a(weight_sum);
    let kc_min = lambda_min_sym(&att.k_c);
    let lambda_max_sum: f64 = obs
        .lambda
        .iter()
        .zip(refs.weights())
        .map(|(l, k)| k * lambda_max_sym(l))
        .sum();
    let lambda_o = extremes.ko_lambda_min - extremes.epsilon_v * lambda_max_sum;
    let (f_min, f_max) = pos.thrust_bounds(m, g);
    let c_limit = admissible_c_limit(pos, att, params, &consts, weight_sum);
    let c = c.unwrap_or(0.5 * c_limit);
    let gn = extremes.g_norm;
    let kx = pos.k_x;
    let gap = consts.gap_per_alignment(att.alpha1);

    let q1 = Mat3::new(
        m * (pos.k - kx), 0.0, 0.0,
        0.0, kx.powi(3), -kx * kx / (2.0 * m),
        0.0, -kx * kx / (2.0 * m), pos.k_f_min(),
    );
    let q2 = Mat3::new(
        att.lambda_c * lambda_a, 0.0, 0.0,
        0.0, kc_min, -0.5 * gn,
        0.0, -0.5 * gn, lambda_o,
    );
    let q3 = Matrix2::new(
        att.lambda_c * lambda_a, -0.5 * c * f_max * gap,
        -0.5 * c * f_max * gap, c * m * (pos.k - kx),
    );
    let q4 = Matrix2::new(kc_min, -0.5 * gn, -0.5 * gn, lambda_o);
    let q5 = Matrix2::new(
        c * kx.powi(3), -c * kx * kx / (2.0 * m),
        -c * kx * kx / (2.0 * m), c * pos.k_f_min(),
    );
    let l = [
        lambda_min_sym(&q1),
        lambda_min_sym(&q2),
        lambda_min2(&q3),
        lambda_min2(&q4),
        lambda_min2(&q5),
    ];
    let bisected = [
        lambda_min_bisection(&q1),
        lambda_min_bisection(&q2),
        lambda_min_bisection(&q3),
        lambda_min_bisection(&q4),
        lambda_min_bisection(&q5),
    ];
    let discrepancy = l
        .iter()
        .zip(&bisected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gamma3 = l[2].min(l[3]).min(l[4]);

    let mut checks = Vec::new();
    let mut push = |name: &str, margin: f64, hard: bool| {
        checks.push(ConditionCheck {
            name: name.into(),
            satisfied: margin > 0.0,
            margin,
            hard,
        })
    };
    push("position.k_x_in_range", kx.min(g - pos.mu_d - kx), true);
    push("position.k_above_k_x", pos.k - kx, true);
    push("position.k_f_min", pos.k_f_min() - kx / (4.0 * m * m), true);
    push("position.thrust_feasible", g - pos.mu_d - (pos.k + kx + pos.k_f.z), true);
    push("position.q1_positive_definite", l[0], true);
    push(
        "attitude.gains_positive",
        kc_min.min(att.lambda_c).min(att.alpha1).min(att.alpha2),
        true,
    );
    push("attitude.lambda_a", lambda_a, true);
    push("observer.gains_positive", obs.gamma_f.min(weight_sum), true);
    push("observer.lambda_o", lambda_o - gn * gn / (4.0 * kc_min), true);
    push("attitude.q2_positive_definite", l[1], true);
    push("overall.f_max_below_2mg", 2.0 * m * g - f_max, false);
    push("overall.c_admissible", (c_limit - c).min(c), false);
    push("overall.q3_positive_definite", l[2], false);
    push("overall.q4_positive_definite", l[3], false);
    push("overall.q5_positive_definite", l[4], false);
    push("overall.gamma3", gamma3, false);
    if extremes.observed {
        push("overall.thrust_below_f_max", f_max - extremes.thrust_max, false);
    }

    let mut notes = vec![format!(
        "critical radius eps_j = {critical_radius} sets beta = {:.6e}",
        consts.beta
    )];
    if !extremes.observed {
        notes.push("|G|, eps_v and lambda_min(K_o) estimated at hover; rerun with telemetry extremes".into());
    }
    if 2.0 * m * g <= f_max {
        notes.push("admissible c interval assumes f < 2mg, which f_max does not guarantee here".into());
    }

    let report = ConditionReport {
        checks,
        lambda_min_q1: l[0],
        lambda_min_q2: l[1],
        lambda_min_q3: l[2],
        lambda_min_q4: l[3],
        lambda_min_q5: l[4],
        gamma3,
        lambda_a,
        lambda_o,
        varpi: consts.varpi,
        beta: consts.beta,
        critical_radius,
        c,
        c_limit,
        f_min,
        f_max,
        extremes: *extremes,
        bisection_max_discrepancy: discrepancy,
        notes,
    };
    Ok((ConditionMatrices { q1, q2, q3, q4, q5 }, report))
}
