//! Closed-loop scenario runner.
//!
//! Per control tick `n` (time `t = n dt`): sense, observer estimate, position
//! law, desired attitude, alignment and torque, then integrate every memory
//! with its inputs held and step the plant. The record for tick `n` describes
//! the state at `t` before the step, so a run of `N` steps yields `N + 1` rows.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    alignment_inequality_residual, attitude_gap_bound, condition_matrices, g_matrix, lyapunov_v1,
    lyapunov_v2, ConditionReport, AlignmentConstants, RunExtremes,
};
use crate::attitude::{alignment, omega_r, omega_r_hat_rate, torque, AttitudeCtrlMemory};
use crate::attitude_reference::{AttitudeReference, ReferenceFilter};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{e_z, lambda_min_sym, spectral_norm, Vec3};
use crate::observer::{bias_estimate, ko_matrix, ObserverMemory};
use crate::plant::{ControlInput, PhysicalParams, Plant, RigidBodyState};
use crate::position::{eta, thrust_vector, PositionCtrlMemory};
use crate::sensing::{apparent_acceleration_reference, measure};
use crate::telemetry::TelemetryRecord;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug)]
struct Extremes {
    g_norm: f64,
    filter_lag: f64,
    ko_min: f64,
    thrust_max: f64,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    plant: Plant,
    state: RigidBodyState,
    tick: u64,
    position_mem: Option<PositionCtrlMemory>,
    observer_mem: ObserverMemory,
    reference: AttitudeReference,
    attitude_mem: AttitudeCtrlMemory,
    last_input: ControlInput,
    consts: AlignmentConstants,
    c: f64,
    thrust_bounds: (f64, f64),
    extremes: Extremes,
    a_priori: ConditionReport,
    diverged: Option<Error>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let plant_params = cfg.plant_params()?;
        let a_priori = a_priori_report(&cfg)?;
        let consts = AlignmentConstants::for_set(&cfg.refs, cfg.attitude_gains.alpha1, cfg.critical_radius)?;
        let thrust_bounds = cfg.position_gains.thrust_bounds(cfg.params.mass, cfg.params.gravity);
        Ok(Self {
            plant: Plant::new(plant_params, cfg.disturbance.clone()),
            state: cfg.initial,
            tick: 0,
            position_mem: None,
            observer_mem: ObserverMemory::new(Vec3::zeros()),
            reference: AttitudeReference::new(ReferenceFilter::new(cfg.filter_bandwidth)?),
            attitude_mem: AttitudeCtrlMemory::default(),
            last_input: ControlInput::hover(&cfg.params),
            consts,
            c: a_priori.c,
            thrust_bounds,
            extremes: Extremes {
                g_norm: 0.0,
                filter_lag: 0.0,
                ko_min: f64::INFINITY,
                thrust_max: 0.0,
            },
            a_priori,
            diverged: None,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn a_priori_report(&self) -> &ConditionReport {
        &self.a_priori
    }

    /// Lyapunov weight `c` used for `V3`.
    pub fn lyapunov_c(&self) -> f64 {
        self.c
    }

    pub fn plant_params(&self) -> &PhysicalParams {
        &self.plant.params
    }

    /// Computes the control for the current tick, records it, and steps the
    /// plant when `advance` is set.
    pub fn tick(&mut self, advance: bool) -> Result<TelemetryRecord> {
        if let Some(e) = self.diverged.take() {
            return Err(e);
        }
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let t = self.time();
        let m = cfg.params.mass;
        let g = cfg.params.gravity;
        let weights = cfg.refs.weights();

        // 1. sense
        let specific_force = self.plant.derivative(&self.state, &self.last_input, t).acceleration;
        let r_a = apparent_acceleration_reference(&specific_force, g)?;
        let mut observed = cfg.refs.directions().to_vec();
        if cfg.apparent_acceleration {
            observed[0] = r_a;
        }
        let frame = measure(&self.state, &observed, &cfg.bias, &cfg.noise, self.tick)?;

        // 2. observer
        self.observer_mem.init_if_empty(&frame.vectors);
        let b_hat = bias_estimate(&self.observer_mem, &frame.vectors, &cfg.observer_gains, weights);
        let omega_hat = frame.gyro - b_hat;

        // 3. position law
        let traj = cfg.trajectory.sample(t);
        let x_err_m = frame.position - traj.position;
        let v_err_m = frame.velocity - traj.velocity;
        let gains = cfg.position_gains;
        let pos_mem = *self.position_mem.get_or_insert_with(|| {
            if cfg.velocity_free {
                PositionCtrlMemory::velocity_free(&x_err_m, &gains)
            } else {
                PositionCtrlMemory::new()
            }
        });
        let y = pos_mem.y(&x_err_m, &gains);
        let thrust = thrust_vector(&y, &traj, &gains, m, g);
        let f = thrust.norm();

        // 4. desired attitude
        let desired = self.reference.update(&thrust, traj.yaw, dt)?;
        let rd = desired.rotation;

        // 5. alignment and torque
        let desired_dirs: Vec<Vec3> = cfg.refs.directions().iter().map(|r| rd.transpose().apply(r)).collect();
        let ae = alignment(&frame.vectors, &desired_dirs, weights)?;
        let ag = &cfg.attitude_gains;
        let w_r = omega_r(&ae.z, &desired.omega, ag.lambda_c);
        let w_r_hat_rate = omega_r_hat_rate(&omega_hat, &desired.omega, &desired.omega_dot, &ae, ag.lambda_c);
        let tau = torque(&omega_hat, &w_r_hat_rate, &w_r, &ae, &cfg.params.inertia, ag);
        let input = ControlInput { thrust: f, torque: tau };

        // telemetry at t, truth-based where the truth is available
        let s = &self.state;
        let x_err = s.position - traj.position;
        let v_err = s.velocity - traj.velocity;
        let eta_true = eta(&x_err, &v_err, &y, gains.k_x);
        let omega_err = s.angular_velocity - w_r;
        let bias_err = b_hat - cfg.bias.bias;
        let r_tilde = s.attitude.compose(&rd.transpose());
        let gap = spectral_norm(&(s.attitude.matrix() - rd.matrix()));
        let v1 = lyapunov_v1(&eta_true, &x_err, &y, m, gains.k_x);
        let v2 = lyapunov_v2(&ae.z, &omega_err, &bias_err, ae.epsilon, &self.plant.params.inertia, ag.alpha1, ag.alpha2);
        let lag = frame
            .vectors
            .iter()
            .zip(&self.observer_mem.v_f)
            .map(|(v, vf)| (v - vf).norm())
            .fold(0.0, f64::max);
        let g_norm = spectral_norm(&g_matrix(ag, &cfg.params.inertia, &w_r, &ae.j));
        let ko_min = lambda_min_sym(&ko_matrix(&frame.vectors, &cfg.observer_gains.lambda, weights));
        let w_r_hat = self.attitude_mem.omega_r_hat.unwrap_or(w_r);
        let zeta3 = (eta_true.norm_squared()
            + x_err.norm_squared()
            + y.norm_squared()
            + ae.z.norm_squared()
            + omega_err.norm_squared()
            + bias_err.norm_squared())
        .sqrt();
        let gap_bound = attitude_gap_bound(ae.epsilon, self.consts.varpi);
        let record = TelemetryRecord {
            t,
            attitude_error: 0.5 * (3.0 - r_tilde.matrix().trace()),
            z_norm: ae.z.norm(),
            omega_err_norm: omega_err.norm(),
            bias_err_norm: bias_err.norm(),
            x_err_norm: x_err.norm(),
            eta_norm: eta_true.norm(),
            tanh_ef_norm: y.norm(),
            thrust: f,
            tau_x: tau.x,
            tau_y: tau.y,
            tau_z: tau.z,
            tau_norm: tau.norm(),
            v1,
            v2,
            v3: self.c * v1 + v2,
            epsilon: ae.epsilon,
            j_norm: spectral_norm(&ae.j),
            gap,
            gap_bound,
            thrust_margin_low: f - self.thrust_bounds.0,
            thrust_margin_high: self.thrust_bounds.1 - f,
            alignment_residual: alignment_inequality_residual(ae.epsilon, &ae.z, ag.alpha1, self.consts.beta),
            critical_ball: if self.consts.critical_ball(&r_tilde).is_some() { 1.0 } else { 0.0 },
            bias_hat_x: b_hat.x,
            bias_hat_y: b_hat.y,
            bias_hat_z: b_hat.z,
            x_err_x: x_err.x,
            x_err_y: x_err.y,
            x_err_z: x_err.z,
            zeta3_norm: zeta3,
            filter_lag: lag,
            g_norm,
            ko_lambda_min: ko_min,
            omega_r_hat_err: (w_r_hat - w_r).norm(),
            ra_deviation: (r_a - e_z()).norm(),
            omega_d_x: desired.omega.x,
            omega_d_y: desired.omega.y,
            omega_d_z: desired.omega.z,
            theta2_x: desired.omega_dot.x,
            theta2_y: desired.omega_dot.y,
            theta2_z: desired.omega_dot.z,
        };
        let ex = &mut self.extremes;
        ex.g_norm = ex.g_norm.max(g_norm);
        ex.filter_lag = ex.filter_lag.max(lag);
        ex.ko_min = ex.ko_min.min(ko_min);
        ex.thrust_max = ex.thrust_max.max(f);

        if advance {
            // 6. integrate memories with inputs held, then the plant
            let mut pm = pos_mem;
            pm.advance(&x_err_m, &v_err_m, &gains, m, dt);
            self.position_mem = Some(pm);
            self.observer_mem
                .advance(&frame.vectors, &omega_hat, &cfg.observer_gains, weights, dt);
            self.attitude_mem.advance(&w_r, &w_r_hat_rate, dt);
            self.reference.advance(&desired, dt);
            let next = self.plant.advance(&self.state, &input, t, dt)?;
            self.last_input = input;
            self.tick += 1;
            // the record for this tick is still valid; report on the next call
            match check_finite(&next, self.time()) {
                Ok(()) => self.state = next,
                Err(e) => self.diverged = Some(e),
            }
        }
        Ok(record)
    }

    /// Extremes seen so far, in the form the condition report consumes.
    pub fn run_extremes(&self) -> RunExtremes {
        RunExtremes {
            g_norm: self.extremes.g_norm,
            epsilon_v: self.extremes.filter_lag,
            ko_lambda_min: self.extremes.ko_min,
            thrust_max: self.extremes.thrust_max,
            observed: true,
        }
    }

    pub fn observed_report(&self) -> Result<ConditionReport> {
        let cfg = &self.cfg;
        let (_, mut report) = condition_matrices(
            &cfg.position_gains,
            &cfg.attitude_gains,
            &cfg.observer_gains,
            &cfg.params,
            &cfg.refs,
            &self.run_extremes(),
            cfg.critical_radius,
            Some(self.c),
        )?;
        if self.extremes.thrust_max > report.f_max {
            report.notes.push(format!(
                "thrust reached {:.6} N above the vertical-saturation bound f_max = {:.6} N",
                self.extremes.thrust_max, report.f_max
            ));
        }
        Ok(report)
    }
}

fn check_finite(s: &RigidBodyState, t: f64) -> Result<()> {
    let parts = [
        ("position", s.position.amax()),
        ("velocity", s.velocity.amax()),
        ("attitude", s.attitude.matrix().amax()),
        ("angular velocity", s.angular_velocity.amax()),
    ];
    for (what, v) in parts {
        if !v.is_finite() || v > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                t,
                what: format!("{what} left the finite range ({v:e})"),
            });
        }
    }
    Ok(())
}

/// Gain report with trajectory-dependent terms estimated at hover.
pub fn a_priori_report(cfg: &ScenarioConfig) -> Result<ConditionReport> {
    let extremes = RunExtremes::at_hover(&cfg.attitude_gains, &cfg.observer_gains, &cfg.params, &cfg.refs);
    let (_, report) = condition_matrices(
        &cfg.position_gains,
        &cfg.attitude_gains,
        &cfg.observer_gains,
        &cfg.params,
        &cfg.refs,
        &extremes,
        cfg.critical_radius,
        cfg.lyapunov_c,
    )?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: u8,
    pub seed: u64,
    pub steps: u64,
    pub records: usize,
    pub wall_seconds: f64,
    pub diverged: Option<String>,
    pub anomalies: Vec<String>,
}

/// JSON document written next to the telemetry.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub summary: RunSummary,
    pub a_priori: ConditionReport,
    pub observed: Option<ConditionReport>,
}

pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub report: RunReport,
    /// Set when the run stopped early; `records` holds everything up to that point.
    pub divergence: Option<Error>,
}

/// Runs a full scenario. Hard gain-condition failures refuse to start unless `force`.
pub fn run_scenario(cfg: &ScenarioConfig, force: bool) -> Result<RunOutput> {
    let started = Instant::now();
    let mut sim = Simulation::new(cfg.clone())?;
    let failures = sim.a_priori.hard_failures();
    if !failures.is_empty() && !force {
        let names: Vec<&str> = failures.iter().map(|c| c.name.as_str()).collect();
        return Err(Error::config(format!(
            "gain conditions fail: {} (use --force to run anyway)",
            names.join(", ")
        )));
    }
    let had_hard_failure = !failures.is_empty();
    let steps = cfg.steps();
    let mut records = Vec::with_capacity(steps as usize + 1);
    let mut divergence = None;
    for n in 0..=steps {
        match sim.tick(n < steps) {
            Ok(r) => records.push(r),
            Err(e) => {
                divergence = Some(e);
                break;
            }
        }
    }
    let mut anomalies = Vec::new();
    if had_hard_failure && divergence.is_none() {
        if let Some(last) = records.last() {
            if last.x_err_norm < 1e-2 && last.z_norm < 1e-2 {
                anomalies.push("run converged although a hard gain condition failed".into());
            }
        }
    }
    let observed = if records.is_empty() { None } else { Some(sim.observed_report()?) };
    let report = RunReport {
        summary: RunSummary {
            scenario: cfg.scenario,
            seed: cfg.seed(),
            steps,
            records: records.len(),
            wall_seconds: started.elapsed().as_secs_f64(),
            diverged: divergence.as_ref().map(|e| e.to_string()),
            anomalies,
        },
        a_priori: sim.a_priori.clone(),
        observed,
    };
    Ok(RunOutput {
        records,
        report,
        divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(scenario: u8, seconds: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(scenario).unwrap();
        cfg.duration = seconds;
        cfg
    }

    #[test]
    fn fencepost_and_first_record() {
        let out = run_scenario(&short(1, 0.05), false).unwrap();
        assert_eq!(out.records.len(), 51);
        let r0 = out.records[0];
        assert_eq!(r0.t, 0.0);
        assert!((r0.bias_err_norm - Vec3::new(0.2, 0.1, -0.1).norm()).abs() < 1e-12);
        assert_eq!(r0.tanh_ef_norm, 0.0);
        assert!(out.divergence.is_none());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = short(2, 0.2).with_seed(11);
        let a = run_scenario(&cfg, false).unwrap().records;
        let b = run_scenario(&cfg, false).unwrap().records;
        assert_eq!(a, b);
        let c = run_scenario(&cfg.clone().with_seed(12), false).unwrap().records;
        assert_ne!(a, c);
    }

    #[test]
    fn hard_failure_refuses_without_force() {
        let mut cfg = short(1, 0.01);
        cfg.position_gains.k_x = 12.0;
        cfg.position_gains.k = 13.0;
        assert!(matches!(run_scenario(&cfg, false), Err(Error::Config(_))));
        assert!(run_scenario(&cfg, true).is_ok());
    }

    #[test]
    fn divergence_keeps_partial_telemetry() {
        let mut cfg = short(1, 2.0);
        // a torque disturbance far beyond anything the loop can reject
        cfg.disturbance.torque.offset = Vec3::new(1e9, 0.0, 0.0);
        let out = run_scenario(&cfg, false).unwrap();
        assert!(out.divergence.is_some());
        assert!(!out.records.is_empty() && out.records.len() < 2001);
        assert!(out.report.summary.diverged.is_some());
    }
}
