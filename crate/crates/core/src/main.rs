use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quadtrack::config::ScenarioConfig;
use quadtrack::simulation::{a_priori_report, run_scenario, RunReport};
use quadtrack::telemetry::{read_telemetry, write_telemetry};
use quadtrack::verify::verify;
use quadtrack::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_CONDITION: u8 = 4;

#[derive(Parser)]
#[command(name = "quadtrack", version, about = "Perception-feedback quadrotor tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write telemetry plus a JSON report.
    Run(RunArgs),
    /// Evaluate the gain conditions for a configuration.
    CheckGains {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Re-check the analysis inequalities on a telemetry file.
    Verify {
        #[arg(long)]
        telemetry: PathBuf,
        /// Defaults to the `.cfg` file written next to the telemetry by `run`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Print the fully resolved configuration of a preset.
    ShowConfig {
        #[arg(long)]
        scenario: u8,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: u8,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run this many consecutive seeds in parallel, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    velocity_free: bool,
    #[arg(long)]
    apparent_accel: bool,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::CheckGains { config, strict } => cmd_check_gains(&config, strict),
        Command::Verify {
            telemetry,
            config,
            strict,
        } => cmd_verify(&telemetry, config.as_deref(), strict),
        Command::ShowConfig { scenario } => ScenarioConfig::preset(scenario).map(|c| {
            print!("{}", c.to_text());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_CONFIG,
            })
        }
    }
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn resolve(args: &RunArgs) -> quadtrack::Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let cfg = ScenarioConfig::parse(&text, path, Some(args.scenario))?;
            if cfg.scenario != args.scenario {
                return Err(Error::Config(format!(
                    "--scenario {} disagrees with scenario = {} in {}",
                    args.scenario,
                    cfg.scenario,
                    path.display()
                )));
            }
            cfg
        }
        None => ScenarioConfig::preset(args.scenario)?,
    };
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    if let Some(h) = args.dt {
        cfg.dt = h;
    }
    cfg.velocity_free |= args.velocity_free;
    cfg.apparent_acceleration |= args.apparent_accel;
    cfg.validate()?;
    Ok(cfg)
}

struct Job {
    cfg: ScenarioConfig,
    out: PathBuf,
}

fn jobs(args: &RunArgs, base: &ScenarioConfig) -> Vec<Job> {
    let scales: Vec<Option<f64>> = if base.inertia_sweep.is_empty() {
        vec![None]
    } else {
        base.inertia_sweep.iter().copied().map(Some).collect()
    };
    let many_seeds = args.seeds > 1;
    let mut out = Vec::new();
    for scale in &scales {
        for i in 0..args.seeds.max(1) {
            let mut cfg = base.clone();
            let mut suffix = String::new();
            if let Some(s) = scale {
                cfg.inertia_scale = quadtrack::geometry::Vec3::repeat(*s);
                suffix.push_str(&format!(".inertia{s}"));
            }
            if many_seeds {
                let seed = base.seed() + i;
                cfg = cfg.with_seed(seed);
                suffix.push_str(&format!(".seed{seed}"));
            }
            let path = if suffix.is_empty() {
                args.out.clone()
            } else {
                with_suffix(&args.out, &suffix, "csv")
            };
            out.push(Job { cfg, out: path });
        }
    }
    out
}

/// Outcome of one job: exit code contribution and a one-line summary.
fn execute(job: &Job, force: bool, strict: bool) -> quadtrack::Result<(u8, String)> {
    let out = run_scenario(&job.cfg, force)?;
    write_telemetry(&out.records, &job.out)?;
    write_report(&out.report, &with_suffix(&job.out, "", "json"))?;
    let cfg_path = with_suffix(&job.out, "", "cfg");
    std::fs::write(&cfg_path, job.cfg.to_text()).map_err(|e| Error::Io {
        path: cfg_path.clone(),
        source: e,
    })?;
    let last = out.records.last();
    let mut line = format!(
        "{}: {} rows, {:.2} s wall",
        job.out.display(),
        out.records.len(),
        out.report.summary.wall_seconds
    );
    if let Some(r) = last {
        line.push_str(&format!(
            ", final |x_err| {:.3e} |z| {:.3e} |b_err| {:.3e}",
            r.x_err_norm, r.z_norm, r.bias_err_norm
        ));
    }
    for a in &out.report.summary.anomalies {
        line.push_str(&format!("\n  anomaly: {a}"));
    }
    if let Some(e) = &out.divergence {
        line.push_str(&format!("\n  diverged: {e}"));
        return Ok((EXIT_DIVERGENCE, line));
    }
    if strict {
        let observed_ok = out.report.observed.as_ref().is_none_or(|r| r.all_satisfied());
        if !out.report.a_priori.all_satisfied() || !observed_ok {
            line.push_str("\n  condition checks failed");
            return Ok((EXIT_CONDITION, line));
        }
    }
    Ok((0, line))
}

fn write_report(report: &RunReport, path: &Path) -> quadtrack::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_run(args: RunArgs) -> quadtrack::Result<u8> {
    let base = resolve(&args)?;
    let jobs = jobs(&args, &base);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let results: Vec<quadtrack::Result<(u8, String)>> = if workers <= 1 {
        jobs.iter().map(|j| execute(j, args.force, args.strict)).collect()
    } else {
        let mut slots: Vec<Option<quadtrack::Result<(u8, String)>>> = (0..jobs.len()).map(|_| None).collect();
        let chunk = jobs.len().div_ceil(workers);
        std::thread::scope(|s| {
            for (js, out) in jobs.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                s.spawn(|| {
                    for (j, o) in js.iter().zip(out.iter_mut()) {
                        *o = Some(execute(j, args.force, args.strict));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every job ran")).collect()
    };
    let mut code = 0;
    for r in results {
        let (c, line) = r?;
        println!("{line}");
        code = code.max(c);
    }
    Ok(code)
}

fn cmd_check_gains(path: &Path, strict: bool) -> quadtrack::Result<u8> {
    let cfg = ScenarioConfig::load(path)?;
    let report = a_priori_report(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    for c in &report.checks {
        let tag = match (c.satisfied, c.hard) {
            (true, _) => "ok  ",
            (false, true) => "FAIL",
            (false, false) => "warn",
        };
        eprintln!("{tag} {:<36} margin {:+.6e}", c.name, c.margin);
    }
    Ok(if strict && !report.all_satisfied() { EXIT_CONDITION } else { 0 })
}

fn cmd_verify(telemetry: &Path, config: Option<&Path>, strict: bool) -> quadtrack::Result<u8> {
    let cfg_path = config.map_or_else(|| with_suffix(telemetry, "", "cfg"), Path::to_path_buf);
    let cfg = ScenarioConfig::load(&cfg_path)?;
    let records = read_telemetry(telemetry)?;
    let report = verify(&records, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    for c in &report.checks {
        let tag = if c.informational {
            "info"
        } else if c.passed() {
            "ok  "
        } else {
            "FAIL"
        };
        eprintln!(
            "{tag} {:<36} {} samples, {} violations, {} skipped, worst margin {:+.3e}",
            c.name, c.samples, c.violations, c.skipped, c.worst_margin
        );
    }
    Ok(if strict && !report.passed() { EXIT_CONDITION } else { 0 })
}
