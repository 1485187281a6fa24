//! Acceptance criteria evaluated on full scenario runs. Each check returns
//! an [`Outcome`]; the `acceptance` test target prints and gates on them.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadtrack::analysis::{attitude_gap_bound, practical_stability_bound, AlignmentConstants};
use quadtrack::attitude::alignment;
use quadtrack::config::ScenarioConfig;
use quadtrack::geometry::{so3_exp, spectral_norm, Mat3, Vec3};
use quadtrack::plant::{step, ControlInput, DisturbanceSpec, PhysicalParams, RigidBodyState};
use quadtrack::sensing::InertialReferenceSet;
use quadtrack::simulation::{a_priori_report, run_scenario, RunOutput};
use quadtrack::telemetry::TelemetryRecord;

const CONVERGENCE_THRESHOLD: f64 = 1e-2;
const RUNTIME_LIMIT_S: f64 = 10.0;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(cfg: &ScenarioConfig) -> RunOutput {
    let out = run_scenario(cfg, false).expect("scenario runs");
    assert!(out.divergence.is_none(), "scenario {} diverged", cfg.scenario);
    out
}

fn scenario1() -> &'static RunOutput {
    static S1: OnceLock<RunOutput> = OnceLock::new();
    S1.get_or_init(|| run(&ScenarioConfig::preset(1).unwrap()))
}

fn window(records: &[TelemetryRecord], from: f64, to: f64) -> impl Iterator<Item = &TelemetryRecord> {
    records.iter().filter(move |r| r.t >= from - 1e-9 && r.t <= to + 1e-9)
}

fn max_over(records: &[TelemetryRecord], from: f64, to: f64, f: impl Fn(&TelemetryRecord) -> f64) -> f64 {
    window(records, from, to).map(f).fold(f64::NEG_INFINITY, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const NORMS: [(&str, fn(&TelemetryRecord) -> f64); 6] = [
    ("x_err", |r| r.x_err_norm),
    ("z", |r| r.z_norm),
    ("omega_err", |r| r.omega_err_norm),
    ("b_err", |r| r.bias_err_norm),
    ("eta", |r| r.eta_norm),
    ("tanh_ef", |r| r.tanh_ef_norm),
];

/// Worst of the six convergence norms over `[from, 60]`, with per-norm detail.
fn convergence(records: &[TelemetryRecord], from: f64) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f) in NORMS {
        let m = max_over(records, from, 60.0, f);
        pass &= m < CONVERGENCE_THRESHOLD;
        parts.push(format!("{name} {m:.3e}"));
    }
    (pass, format!("max over [{from}, 60] s: {}", parts.join(", ")))
}

fn criterion_1() -> Outcome {
    let out = scenario1();
    let (ok, detail) = convergence(&out.records, 10.0);
    let wall = out.report.summary.wall_seconds;
    outcome(
        ok && wall <= RUNTIME_LIMIT_S,
        format!("{detail}; runtime {wall:.2} s (limit {RUNTIME_LIMIT_S} s)"),
    )
}

fn criterion_2() -> Outcome {
    let r = &scenario1().records;
    let lo = -max_over(r, 20.0, 60.0, |r| -r.thrust);
    let hi = max_over(r, 20.0, 60.0, |r| r.thrust);
    outcome(lo >= 4.45 && hi <= 4.75, format!("thrust over [20, 60] s in [{lo:.5}, {hi:.5}] N, required [4.45, 4.75]"))
}

fn criterion_3() -> Outcome {
    let m = max_over(&scenario1().records, 10.0, 60.0, |r| r.tau_norm);
    outcome(m < 0.01, format!("max |tau| over [10, 60] s = {m:.3e} N m, required < 0.01"))
}

fn criterion_4() -> Outcome {
    let m = max_over(&scenario1().records, 10.0, 60.0, |r| r.bias_err_norm);
    outcome(m < 1e-3, format!("max |b_hat - b| for t >= 10 s = {m:.3e} rad/s, required < 1e-3"))
}

fn criterion_5() -> Outcome {
    let r = &scenario1().records;
    let step_violations = r.iter().filter(|r| r.gap > r.gap_bound + 1e-12).count();

    let refs = InertialReferenceSet::reference();
    let consts = AlignmentConstants::for_set(&refs, 1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let random_rot = |rng: &mut ChaCha8Rng| loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            break so3_exp(&(v * std::f64::consts::PI));
        }
    };
    let pairs = 10_000;
    let mut pair_violations = 0;
    for _ in 0..pairs {
        let (a, b) = (random_rot(&mut rng), random_rot(&mut rng));
        let measured: Vec<Vec3> = refs.directions().iter().map(|d| a.transpose().apply(d)).collect();
        let desired: Vec<Vec3> = refs.directions().iter().map(|d| b.transpose().apply(d)).collect();
        let ae = alignment(&measured, &desired, refs.weights()).unwrap();
        let gap = spectral_norm(&(a.matrix() - b.matrix()));
        if gap > attitude_gap_bound(ae.epsilon, consts.varpi) + 1e-12 {
            pair_violations += 1;
        }
    }
    outcome(
        step_violations == 0 && pair_violations == 0 && r.len() >= 60_000,
        format!(
            "{step_violations} violations over {} steps, {pair_violations} over {pairs} random pairs",
            r.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let r = &scenario1().records;
    let eps_bad = r.iter().filter(|r| !(r.epsilon >= 0.0 && r.epsilon <= 0.6)).count();
    let j_bad = r.iter().filter(|r| r.j_norm > 0.3).count();
    let eps_max = r.iter().map(|r| r.epsilon).fold(0.0, f64::max);
    let j_max = r.iter().map(|r| r.j_norm).fold(0.0, f64::max);
    outcome(
        eps_bad == 0 && j_bad == 0,
        format!("eps max {eps_max:.4} ({eps_bad} outside [0, 0.6]), |J| max {j_max:.4} ({j_bad} above 0.3)"),
    )
}

fn criterion_7() -> Outcome {
    let r = &scenario1().records;
    let mut increases = 0;
    let mut worst = 0.0f64;
    for w in r.windows(2) {
        if w[1].t > 1.0 {
            let d = w[1].v3 - w[0].v3;
            worst = worst.max(d);
            if d > 1e-8 {
                increases += 1;
            }
        }
    }
    // least-squares slope of log|zeta3| on [1, 5] s
    let pts: Vec<(f64, f64)> = window(r, 1.0, 5.0).map(|r| (r.t, r.zeta3_norm.ln())).collect();
    let n = pts.len() as f64;
    let (mt, ml) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    outcome(
        increases == 0 && slope < 0.0,
        format!("{increases} per-step V3 increases above 1e-8 after 1 s (largest {worst:.2e}); log|zeta3| slope on [1, 5] s = {slope:.4} 1/s"),
    )
}

fn criterion_8() -> Outcome {
    let report = a_priori_report(&ScenarioConfig::preset(1).unwrap()).unwrap();
    let hard: Vec<_> = report.checks.iter().filter(|c| c.hard).collect();
    let hard_ok = hard.iter().all(|c| c.satisfied && c.margin > 0.0);
    let feasible = report.check("position.thrust_feasible").is_some_and(|c| c.satisfied && c.margin > 0.0);
    let mut broken = ScenarioConfig::preset(1).unwrap();
    broken.position_gains.k_x = 12.0;
    let flagged = a_priori_report(&broken)
        .map(|r| r.hard_failures().iter().any(|c| c.name == "position.k_x_in_range"))
        .unwrap_or(false);
    outcome(
        hard_ok && feasible && flagged,
        format!(
            "{} hard checks positive: {hard_ok}; f_min = {:.4} N > 0: {feasible}; k_x = 12 flagged: {flagged}",
            hard.len(),
            report.f_min
        ),
    )
}

/// Post-transient samples of the ten noisy runs: (|z|, |b_err|, |x_err|) per row.
fn noisy_runs() -> &'static Vec<Vec<[f64; 3]>> {
    static RUNS: OnceLock<Vec<Vec<[f64; 3]>>> = OnceLock::new();
    RUNS.get_or_init(|| {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..10u64)
                .map(|seed| {
                    s.spawn(move || {
                        let out = run(&ScenarioConfig::preset(2).unwrap().with_seed(seed));
                        window(&out.records, 10.0, 60.0)
                            .map(|r| [r.z_norm, r.bias_err_norm, r.x_err_norm])
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

fn criterion_9() -> Outcome {
    let medians: Vec<[f64; 3]> = noisy_runs()
        .iter()
        .map(|rows| std::array::from_fn(|i| median(rows.iter().map(|r| r[i]).collect())))
        .collect();
    let limits = [0.05, 0.3, 0.15];
    let pass = medians.iter().all(|m| m.iter().zip(&limits).all(|(v, l)| v <= l));
    let worst = |i: usize| medians.iter().map(|m| m[i]).fold(0.0, f64::max);
    outcome(
        pass,
        format!(
            "worst per-seed medians over [10, 60] s: |z| {:.4} (<= 0.05), |b_err| {:.4} (<= 0.3), |x_err| {:.4} (<= 0.15)",
            worst(0),
            worst(1),
            worst(2)
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for scale in [0.7, 1.3] {
        let mut cfg = ScenarioConfig::preset(3).unwrap();
        cfg.inertia_scale = Vec3::repeat(scale);
        let (ok, detail) = convergence(&run(&cfg).records, 12.0);
        pass &= ok;
        parts.push(format!("scale {scale}: {detail}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_11() -> Outcome {
    let (ok, detail) = convergence(&run(&ScenarioConfig::preset(4).unwrap()).records, 12.0);
    outcome(ok, detail)
}

fn criterion_12() -> Outcome {
    let params = PhysicalParams::new(0.467, Mat3::from_diagonal(&Vec3::new(0.00828, 0.0123, 0.0157)), 9.81).unwrap();
    let s0 = RigidBodyState {
        angular_velocity: Vec3::new(3.0, -2.0, 5.0),
        ..RigidBodyState::at_rest()
    };
    let u = ControlInput { thrust: 0.0, torque: Vec3::zeros() };
    let horizon = 2.0;
    let integrate = |h: f64| {
        let n = (horizon / h).round() as usize;
        let mut s = s0;
        for i in 0..n {
            s = step(&s, &u, &DisturbanceSpec::none(), i as f64 * h, h, &params).unwrap();
        }
        s
    };
    let sols: Vec<RigidBodyState> = [0.01, 0.005, 0.0025].iter().map(|&h| integrate(h)).collect();
    let diff = |a: &RigidBodyState, b: &RigidBodyState| {
        (a.attitude.matrix() - b.attitude.matrix()).norm() + (a.angular_velocity - b.angular_velocity).norm()
    };
    let order = (diff(&sols[0], &sols[1]) / diff(&sols[1], &sols[2])).log2();
    outcome(order >= 3.5, format!("observed order {order:.3} on free rotation (required >= 3.5)"))
}

fn criterion_13() -> Outcome {
    // x' = -x + d(t), V = x^2/2: k1 = k2 = 1/2, k3 = 1/2 with margin 1/2, k4 = 1
    let (k1, k2, k3, k4, margin) = (0.5, 0.5, 0.5, 1.0, 0.5);
    let mut pass = true;
    let mut parts = Vec::new();
    for d_bar in [0.1, 1.0, 10.0] {
        let (rate, bound) = practical_stability_bound(k1, k2, k3, k4, margin, d_bar);
        let disturbances: [Box<dyn Fn(f64, f64) -> f64>; 2] = [
            Box::new(move |_t, x: f64| d_bar * x.signum()),
            Box::new(move |t: f64, _x| d_bar * (3.0 * t).sin()),
        ];
        let mut worst_tail = 0.0f64;
        let mut envelope_ok = true;
        for d in &disturbances {
            let x0 = 5.0 * d_bar;
            let (mut x, h) = (x0, 1e-3);
            for i in 0..40_000 {
                let t = i as f64 * h;
                let f = |t: f64, x: f64| -x + d(t, x);
                let a = f(t, x);
                let b = f(t + h / 2.0, x + a * h / 2.0);
                let c = f(t + h / 2.0, x + b * h / 2.0);
                let e = f(t + h, x + c * h);
                x += (a + 2.0 * b + 2.0 * c + e) * h / 6.0;
                let tn = t + h;
                let env = (k2 / k1).sqrt() * x0 * (-rate * tn).exp() + bound;
                envelope_ok &= x.abs() <= env * (1.0 + 1e-9);
                if tn >= 30.0 {
                    worst_tail = worst_tail.max(x.abs());
                }
            }
        }
        let ok = envelope_ok && worst_tail <= bound * (1.0 + 1e-9) && (bound - d_bar).abs() < 1e-12;
        pass &= ok;
        parts.push(format!("d {d_bar}: bound {bound:.4}, tail max {worst_tail:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn noisy_envelope_fraction() -> Outcome {
    let rows: Vec<&[f64; 3]> = noisy_runs().iter().flatten().collect();
    let frac = |i: usize, l: f64| rows.iter().filter(|r| r[i] <= l).count() as f64 / rows.len() as f64;
    let (z, b) = (frac(0, 0.05), frac(1, 0.3));
    outcome(
        z >= 0.99 && b >= 0.99,
        format!("fraction of post-transient samples over 10 seeds with |z| <= 0.05: {z:.4}, |b_err| <= 0.3: {b:.4} (required >= 0.99)"),
    )
}

fn velocity_free_consistency() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for velocity_free in [false, true] {
        let mut cfg = ScenarioConfig::preset(1).unwrap();
        cfg.velocity_free = velocity_free;
        let out = run(&cfg);
        let m = max_over(&out.records, 10.0, 60.0, |r| r.x_err_norm);
        pass &= m < CONVERGENCE_THRESHOLD;
        parts.push(format!("velocity_free = {velocity_free}: max |x_err| over [10, 60] s = {m:.3e}"));
    }
    outcome(pass, parts.join("; "))
}

fn alignment_inequality_outside_balls() -> Outcome {
    use quadtrack::analysis::alignment_inequality_residual;
    let refs = InertialReferenceSet::reference();
    let consts = AlignmentConstants::for_set(&refs, 1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut tested, mut violations, mut farthest) = (0, 0, 0.0f64);
    while tested < 200_000 {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() > 1.0 {
            continue;
        }
        let r = so3_exp(&(v * std::f64::consts::PI));
        if consts.critical_ball(&r).is_some() {
            continue;
        }
        tested += 1;
        let measured: Vec<Vec3> = refs.directions().iter().map(|d| r.transpose().apply(d)).collect();
        let ae = alignment(&measured, refs.directions(), refs.weights()).unwrap();
        if alignment_inequality_residual(ae.epsilon, &ae.z, 1.0, consts.beta) < -1e-12 {
            violations += 1;
            let d = consts.critical_rotations().iter().map(|rj| r.angle_to(rj)).fold(f64::INFINITY, f64::min);
            farthest = farthest.max(d);
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations} of {tested} rotations outside the balls (radius {:.4} rad) violate alpha1 eps <= (beta/2)|z|^2 with beta = {:.1}; farthest violation {farthest:.4} rad from a critical rotation",
            2.0 * 0.1f64.asin(),
            consts.beta
        ),
    )
}

pub const CRITERIA: [(&str, fn() -> Outcome); 13] = [
    ("scenario 1 convergence and runtime", criterion_1),
    ("steady thrust", criterion_2),
    ("torque envelope", criterion_3),
    ("bias recovery", criterion_4),
    ("alignment gap bound", criterion_5),
    ("epsilon and J bounds", criterion_6),
    ("Lyapunov decrease", criterion_7),
    ("gain-condition report", criterion_8),
    ("noise robustness", criterion_9),
    ("inertia uncertainty", criterion_10),
    ("apparent-acceleration reference", criterion_11),
    ("integrator order", criterion_12),
    ("practical-stability oracle", criterion_13),
];
/// Operation-level examples and invariants checked on the same runs.
pub const SUPPLEMENTS: [(&str, fn() -> Outcome); 3] = [
    ("noisy envelopes for 99% of samples", noisy_envelope_fraction),
    ("velocity-free and integrator forms track by 10 s", velocity_free_consistency),
    ("alignment inequality outside the critical balls", alignment_inequality_outside_balls),
];
