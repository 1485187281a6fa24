//! Offline re-check of the analysis inequalities on recorded telemetry.

use serde::Serialize;

use crate::analysis::v3_sandwich;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::simulation::a_priori_report;
use crate::telemetry::TelemetryRecord;

/// Relative slack absorbing the 9-digit rounding of the text format.
const TEXT_RTOL: f64 = 1e-8;
const TEXT_ATOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest signed margin seen (negative means violated).
    pub worst_margin: f64,
    /// Rows excluded by the check's own domain (e.g. inside a critical ball).
    pub skipped: usize,
    /// Recorded but never counted as failure.
    pub informational: bool,
}

impl VerifyCheck {
    pub fn passed(&self) -> bool {
        self.informational || self.violations == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub rows: usize,
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(VerifyCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&VerifyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    check: VerifyCheck,
}

impl Tally {
    fn new(name: &str, informational: bool) -> Self {
        Self {
            check: VerifyCheck {
                name: name.into(),
                samples: 0,
                violations: 0,
                worst_margin: f64::INFINITY,
                skipped: 0,
                informational,
            },
        }
    }

    /// `margin >= -slack` passes.
    fn add(&mut self, margin: f64, slack: f64) {
        self.check.samples += 1;
        self.check.worst_margin = self.check.worst_margin.min(margin);
        if !(margin >= -slack) {
            self.check.violations += 1;
        }
    }

    fn skip(&mut self) {
        self.check.skipped += 1;
    }
}

fn slack(scale: f64) -> f64 {
    TEXT_RTOL * scale.abs() + TEXT_ATOL
}

/// Checks every row against the configuration's constants.
pub fn verify(records: &[TelemetryRecord], cfg: &ScenarioConfig) -> Result<VerifyReport> {
    let report = a_priori_report(cfg)?;
    let k_sum = cfg.refs.weight_sum();
    let (gamma1, gamma2) = v3_sandwich(
        report.c,
        cfg.params.mass,
        cfg.position_gains.k_x,
        &cfg.plant_params()?.inertia,
        cfg.attitude_gains.alpha2,
        report.beta,
    );

    let mut gap = Tally::new("alignment_gap_bound", false);
    let mut eps = Tally::new("epsilon_range", false);
    let mut j = Tally::new("j_norm_bound", false);
    let mut thrust = Tally::new("thrust_within_bounds", false);
    let mut inequality = Tally::new("alignment_inequality_outside_balls", false);
    let mut sandwich = Tally::new("v3_sandwich", false);
    let mut monotone = Tally::new("v3_nonincreasing_after_1s", false);
    let mut theta = Tally::new("theta2_minus_omega_d_dot", true);

    for (i, r) in records.iter().enumerate() {
        gap.add(r.gap_bound - r.gap, slack(r.gap_bound));
        eps.add(r.epsilon.min(2.0 * k_sum - r.epsilon), slack(2.0 * k_sum));
        j.add(k_sum - r.j_norm, slack(k_sum));
        thrust.add(r.thrust_margin_low.min(r.thrust_margin_high), slack(r.thrust));
        if r.critical_ball != 0.0 {
            inequality.skip();
            sandwich.skip();
        } else {
            inequality.add(r.alignment_residual, slack(report.beta * r.z_norm * r.z_norm));
            let z2 = r.zeta3_norm * r.zeta3_norm;
            sandwich.add((r.v3 - gamma1 * z2).min(gamma2 * z2 - r.v3), slack(gamma2 * z2));
        }
        if i > 0 && r.t > 1.0 {
            let prev = &records[i - 1];
            monotone.add(prev.v3 - r.v3, 1e-8);
        }
        if i > 0 && i + 1 < records.len() {
            let (a, b) = (&records[i - 1], &records[i + 1]);
            let h = b.t - a.t;
            let d = [
                (b.omega_d_x - a.omega_d_x) / h - r.theta2_x,
                (b.omega_d_y - a.omega_d_y) / h - r.theta2_y,
                (b.omega_d_z - a.omega_d_z) / h - r.theta2_z,
            ];
            theta.add(-(d.iter().map(|x| x * x).sum::<f64>().sqrt()), 0.0);
        }
    }
    let checks = [gap, eps, j, thrust, inequality, sandwich, monotone, theta]
        .into_iter()
        .map(|t| t.check)
        .collect();
    Ok(VerifyReport {
        rows: records.len(),
        checks,
    })
}
