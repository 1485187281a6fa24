use quadtrack::analysis::lyapunov_v1;
use quadtrack::attitude::{alignment, omega_r, omega_r_hat_rate};
use quadtrack::config::ScenarioConfig;
use quadtrack::geometry::{e_z, so3_exp, Vec3};
use quadtrack::position::{eta, thrust_vector, EtaCoupling, PositionCtrlMemory, PositionGains};
use quadtrack::sensing::InertialReferenceSet;
use quadtrack::simulation::run_scenario;
use quadtrack::telemetry::TelemetryRecord;
use quadtrack::trajectory::TrajectorySpec;
use quadtrack::verify::verify;

const M: f64 = 0.467;
const G: f64 = 9.81;

/// Translational loop with the attitude forced onto R_d, so the thrust vector acts directly.
fn reduced_loop_v1(coupling: EtaCoupling) -> Vec<f64> {
    let mut gains = PositionGains::reference();
    gains.coupling = coupling;
    let traj = TrajectorySpec::lemniscate();
    let dt = 1e-3;
    let (mut x, mut v) = (Vec3::zeros(), Vec3::zeros());
    let mut mem = PositionCtrlMemory::new();
    let mut out = Vec::new();
    for n in 0..20_000 {
        let t = n as f64 * dt;
        let p = traj.sample(t);
        let (x_err, v_err) = (x - p.position, v - p.velocity);
        let y = mem.y(&x_err, &gains);
        out.push(lyapunov_v1(&eta(&x_err, &v_err, &y, gains.k_x), &x_err, &y, M, gains.k_x));
        let a = thrust_vector(&y, &p, &gains, M, G) / M - e_z() * G;
        mem.advance(&x_err, &v_err, &gains, M, dt);
        x += v * dt + a * (0.5 * dt * dt);
        v += a * dt;
    }
    out
}

#[test]
fn v1_non_increasing_on_the_reduced_loop() {
    let dt = 1e-3;
    for coupling in [EtaCoupling::Literal, EtaCoupling::MassScaled] {
        let v1 = reduced_loop_v1(coupling);
        let worst = v1.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-8 * dt, "{coupling:?}: largest per-step increase {worst:e}");
        assert!(v1.last().unwrap() < &v1[0]);
    }
}

fn scenario(cfg: &ScenarioConfig) -> Vec<TelemetryRecord> {
    let out = run_scenario(cfg, false).unwrap();
    assert!(out.divergence.is_none());
    out.records
}

#[test]
fn v2_decreases_after_the_transient() {
    let r = scenario(&ScenarioConfig::preset(1).unwrap());
    let increases = r.windows(2).filter(|w| w[1].t > 1.0 && w[1].v2 - w[0].v2 > 1e-8).count();
    assert_eq!(increases, 0);
    assert!(r.last().unwrap().v2 < 1e-3 * r[1000].v2);
}

/// Largest V3 over `[from, to]`.
fn v3_max(r: &[TelemetryRecord], from: f64, to: f64) -> f64 {
    r.iter().filter(|r| r.t >= from && r.t <= to).map(|r| r.v3).fold(0.0, f64::max)
}

#[test]
fn injected_torque_disturbance_leaves_v3_ultimately_bounded() {
    let run = |amp: f64| {
        let mut cfg = ScenarioConfig::preset(1).unwrap();
        cfg.disturbance.torque.amplitude = Vec3::new(amp, amp, 0.5 * amp);
        cfg.disturbance.torque.rate = Vec3::new(1.0, 0.7, 1.3);
        scenario(&cfg)
    };
    let small = run(1e-3);
    let large = run(2e-3);
    for r in [&small, &large] {
        // enters a ball and stays: the tail never exceeds what was seen just before it
        assert!(v3_max(r, 40.0, 60.0) <= 1.1 * v3_max(r, 20.0, 40.0));
        assert!(v3_max(r, 40.0, 60.0) < 1e-2 * r[0].v3);
    }
    // the residual ball scales with the disturbance bound (quadratically in V)
    let ratio = v3_max(&large, 40.0, 60.0) / v3_max(&small, 40.0, 60.0);
    assert!((2.0..8.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn integrated_reference_rate_reproduces_omega_r_with_exact_signals() {
    // R(t) = exp(t a), R_d(t) = exp(s(t) b) with s = 0.3 sin t: omega = a, omega_d = s' b
    let refs = InertialReferenceSet::reference();
    let (a, b) = (Vec3::new(0.05, -0.03, 0.08), Vec3::new(0.0, 0.6, 0.8));
    let lambda_c = 1.0;
    let signals = |t: f64| {
        let r = so3_exp(&(a * t));
        let rd = so3_exp(&(b * (0.3 * t.sin())));
        let measured: Vec<Vec3> = refs.directions().iter().map(|d| r.transpose().apply(d)).collect();
        let desired: Vec<Vec3> = refs.directions().iter().map(|d| rd.transpose().apply(d)).collect();
        let ae = alignment(&measured, &desired, refs.weights()).unwrap();
        (ae, b * (0.3 * t.cos()), b * (-0.3 * t.sin()))
    };
    let rate = |t: f64| {
        let (ae, wd, wd_dot) = signals(t);
        omega_r_hat_rate(&a, &wd, &wd_dot, &ae, lambda_c)
    };
    let dt = 1e-3;
    let (ae0, wd0, _) = signals(0.0);
    let mut w_hat = omega_r(&ae0.z, &wd0, lambda_c);
    let mut worst = 0.0f64;
    for n in 0..10_000 {
        let t = n as f64 * dt;
        let (k1, k2, k4) = (rate(t), rate(t + 0.5 * dt), rate(t + dt));
        w_hat += (k1 + k2 * 4.0 + k4) * (dt / 6.0);
        let (ae, wd, _) = signals(t + dt);
        worst = worst.max((w_hat - omega_r(&ae.z, &wd, lambda_c)).norm());
    }
    assert!(worst < 1e-3, "max |omega_r_hat - omega_r| = {worst:e}");
}

#[test]
fn offline_verification_of_scenario1() {
    let cfg = ScenarioConfig::preset(1).unwrap();
    let report = verify(&scenario(&cfg), &cfg).unwrap();
    assert_eq!(report.rows, 60_001);
    for c in &report.checks {
        assert!(c.passed(), "{c:?}");
    }
    // filtered desired angular acceleration: deviation recorded, finite and bounded
    let theta = report.check("theta2_minus_omega_d_dot").unwrap();
    assert!(theta.informational && theta.worst_margin.is_finite());
}

#[test]
fn offline_verification_under_noise_keeps_the_measured_bounds() {
    let cfg = ScenarioConfig {
        duration: 20.0,
        ..ScenarioConfig::preset(2).unwrap().with_seed(4)
    };
    let report = verify(&scenario(&cfg), &cfg).unwrap();
    // eps and J come from the noisy vectors; the gap uses the true attitude, so
    // its bound is not expected to survive noise
    for name in ["epsilon_range", "j_norm_bound"] {
        assert!(report.check(name).unwrap().passed(), "{name}");
    }
}
