//! Per-step telemetry records and their CSV form (9 significant digits).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

macro_rules! telemetry_record {
    ($($(#[$doc:meta])* $name:ident),* $(,)?) => {
        /// One row per control step.
        #[derive(Clone, Copy, Debug, Default, PartialEq)]
        pub struct TelemetryRecord {
            $($(#[$doc])* pub $name: f64,)*
        }

        impl TelemetryRecord {
            pub const COLUMNS: &'static [&'static str] = &[$(stringify!($name)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$name),*]
            }

            pub fn from_values(v: &[f64]) -> Option<Self> {
                let mut it = v.iter().copied();
                let r = Self { $($name: it.next()?,)* };
                if it.next().is_some() { None } else { Some(r) }
            }
        }
    };
}

telemetry_record! {
    t,
    /// `tr(I - R R_d^T) / 2`
    attitude_error,
    z_norm,
    /// `|w - w_r|` with the true rate
    omega_err_norm,
    bias_err_norm,
    x_err_norm,
    eta_norm,
    tanh_ef_norm,
    thrust,
    tau_x,
    tau_y,
    tau_z,
    tau_norm,
    v1,
    v2,
    v3,
    epsilon,
    j_norm,
    /// `|R - R_d|` (spectral)
    gap,
    /// `sqrt(2 eps varpi)`
    gap_bound,
    thrust_margin_low,
    thrust_margin_high,
    /// `(beta/2)|z|^2 - alpha1 eps`
    alignment_residual,
    /// 1 inside a critical ball, else 0
    critical_ball,
    bias_hat_x,
    bias_hat_y,
    bias_hat_z,
    x_err_x,
    x_err_y,
    x_err_z,
    zeta3_norm,
    /// `max_i |v_i - v_f,i|`
    filter_lag,
    g_norm,
    ko_lambda_min,
    /// `|w_hat_r - w_r|`, integrated against direct
    omega_r_hat_err,
    /// `|r_a - e_z|` of the apparent-acceleration direction
    ra_deviation,
    omega_d_x,
    omega_d_y,
    omega_d_z,
    theta2_x,
    theta2_y,
    theta2_z,
}

pub fn format_value(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn header_line() -> String {
    TelemetryRecord::COLUMNS.join(",")
}

pub fn format_row(r: &TelemetryRecord) -> String {
    r.values().into_iter().map(format_value).collect::<Vec<_>>().join(",")
}

/// Whole file as text: header then one row per record.
pub fn to_csv_string(records: &[TelemetryRecord]) -> String {
    let mut s = header_line();
    s.push('\n');
    for r in records {
        s.push_str(&format_row(r));
        s.push('\n');
    }
    s
}

pub fn write_telemetry(records: &[TelemetryRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(TelemetryRecord::COLUMNS).map_err(io)?;
    for r in records {
        w.write_record(r.values().into_iter().map(format_value)).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = r.headers().map_err(|e| Error::io(path, e.into()))?.clone();
    if header.iter().ne(TelemetryRecord::COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "unexpected telemetry header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i + 2;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let values = row
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("bad number '{f}'"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(TelemetryRecord::from_values(&values).ok_or_else(|| bad("wrong column count".into()))?);
    }
    Ok(out)
}
