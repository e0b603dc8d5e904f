//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 results emitted but some rows
//! unconverged or divergent (or no result could be formed), 4 budget exceeded.

pub mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, OutputFormat};
use crate::ergodic_opt::endpoints;
use crate::error::{Error, Result};
use crate::riesz::{autocorrelation_check, lq_direct, masses_at_depth};
use crate::scan::{focused_grid, scan_endpoints, scan_pressure, semicontinuity_report, FOCUS_LEVELS};
use crate::spectra::{birkhoff_spectrum, lq_via_pressure};
use crate::symbolic::TorusPoint;
use crate::transfer::{pressure, pressure_curve, PressureEstimate};
use format::{opt, sig, Csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "THERMOSCOPE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "thermoscope", version, about = "Pressure, spectra and Riesz products for psi_c = 2 log|sin(pi(x-c))|")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "csv|json")]
    format: Option<String>,
    #[arg(long, global = true)]
    depth_min: Option<u32>,
    #[arg(long, global = true)]
    depth_max: Option<u32>,
    #[arg(long, global = true)]
    bracket_tol: Option<f64>,
    #[arg(long, global = true)]
    power_iter_tol: Option<f64>,
    #[arg(long, global = true)]
    power_iter_cap: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pressure bracket at one (c, t).
    #[command(allow_negative_numbers = true)]
    Pressure {
        #[arg(long)]
        c: String,
        #[arg(long)]
        t: f64,
    },
    /// Pressure on an equally spaced t grid.
    #[command(allow_negative_numbers = true)]
    Curve {
        #[arg(long)]
        c: String,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 33)]
        t_steps: usize,
    },
    /// Brackets for alpha(c) and beta(c).
    #[command(allow_negative_numbers = true)]
    Endpoints {
        #[arg(long)]
        c: String,
        /// Defaults to the configured endpoint depth.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Birkhoff spectrum on an equally spaced beta grid.
    #[command(allow_negative_numbers = true)]
    Birkhoff {
        #[arg(long)]
        c: String,
        #[arg(long)]
        beta_min: f64,
        #[arg(long)]
        beta_max: f64,
        #[arg(long, default_value_t = 17)]
        steps: usize,
    },
    /// L^q spectrum of mu_c at q through the pressure.
    #[command(allow_negative_numbers = true)]
    Lq {
        #[arg(long)]
        c: String,
        #[arg(long)]
        q: f64,
    },
    /// L^q spectrum of mu_c at q from partition sums of cell masses.
    #[command(allow_negative_numbers = true)]
    LqDirect {
        #[arg(long)]
        c: String,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 10)]
        n_min: u32,
        #[arg(long, default_value_t = 16)]
        n_max: u32,
    },
    /// Cell masses of mu_c at a depth.
    #[command(allow_negative_numbers = true)]
    Masses {
        #[arg(long)]
        c: String,
        #[arg(long)]
        depth: u32,
    },
    /// Pressure (or endpoints) over a grid of c.
    #[command(allow_negative_numbers = true)]
    Scan {
        /// Required unless --endpoints is given.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        grid: usize,
        /// Refine the grid around these points; repeatable.
        #[arg(long)]
        focus: Vec<String>,
        #[arg(long, default_value_t = FOCUS_LEVELS)]
        levels: u32,
        /// Scan the endpoint brackets instead of the pressure.
        #[arg(long)]
        endpoints: bool,
        /// Two columns `c midpoint`, NaN for presumed-infinite rows.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Autocorrelation of the Thue-Morse type sequence against the Riesz density.
    #[command(allow_negative_numbers = true)]
    Diffcheck {
        #[arg(long)]
        c: String,
        #[arg(long)]
        lags: usize,
        #[arg(long, default_value_t = 1 << 16)]
        length: usize,
        /// Number of Riesz factors.
        #[arg(long, default_value_t = 16)]
        truncation: u32,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_)
        | Error::DomainError(_)
        | Error::InsufficientCurve { .. }
        | Error::MassFloorViolation { .. } => EXIT_USAGE,
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        Error::DegenerateGraph { .. } | Error::NonConvergence(_) | Error::SingularCylinder { .. } => EXIT_FLAGGED,
    }
}

fn build_config(g: &Global, env_workers: Option<String>) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &g.config {
        cfg.apply_file(path)?;
    }
    if let Some(w) = env_workers {
        cfg.set("workers", &w)?;
    }
    if let Some(f) = &g.format {
        cfg.output_format = f.parse()?;
    }
    let flags: [(&str, Option<String>); 6] = [
        ("depth_min", g.depth_min.map(|v| v.to_string())),
        ("depth_max", g.depth_max.map(|v| v.to_string())),
        ("bracket_tol", g.bracket_tol.map(|v| v.to_string())),
        ("power_iter_tol", g.power_iter_tol.map(|v| v.to_string())),
        ("power_iter_cap", g.power_iter_cap.map(|v| v.to_string())),
        ("workers", g.workers.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects key=value, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Rendered output plus whether any row was flagged.
struct Output {
    text: String,
    flagged: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    notes: &'a [String],
    result: T,
}

fn json<T: Serialize>(command: &str, notes: &[String], result: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { command, notes, result })
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn parse_c(s: &str, notes: &mut Vec<String>) -> Result<TorusPoint> {
    let (c, note) = TorusPoint::parse_with_note(s)?;
    notes.extend(note);
    Ok(c)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || n == 0 || (n == 1 && lo != hi) || hi < lo {
        return Err(Error::InvalidArgument(format!("bad grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

const PRESSURE_HEADER: [&str; 8] = ["c", "t", "depth", "lower", "upper", "midpoint", "converged", "divergent"];

fn pressure_fields(e: &PressureEstimate) -> Vec<String> {
    let finite = !e.divergent;
    vec![
        sig(e.c.value()),
        sig(e.t),
        e.depth.to_string(),
        sig(e.lower),
        if finite { sig(e.upper) } else { String::new() },
        if finite { sig(e.midpoint()) } else { String::new() },
        e.converged.to_string(),
        e.divergent.to_string(),
    ]
}

fn execute(command: &Command, cfg: &Config, notes: &mut Vec<String>) -> Result<Output> {
    let as_json = cfg.output_format == OutputFormat::Json;
    match command {
        Command::Pressure { c, t } => {
            let c = parse_c(c, notes)?;
            let e = pressure(&c, *t, cfg)?;
            let flagged = !e.converged || e.divergent;
            let text = if as_json {
                json("pressure", notes, &e)?
            } else {
                let mut csv = Csv::new(&PRESSURE_HEADER);
                csv.row(&pressure_fields(&e));
                csv.finish()
            };
            Ok(Output { text, flagged })
        }
        Command::Curve { c, t_min, t_max, t_steps } => {
            let c = parse_c(c, notes)?;
            let curve = pressure_curve(&c, &linspace(*t_min, *t_max, *t_steps)?, cfg)?;
            let flagged = curve.samples.iter().any(|(_, e)| !e.converged || e.divergent);
            let text = if as_json {
                json("curve", notes, &curve)?
            } else {
                let mut csv = Csv::new(&PRESSURE_HEADER);
                for (_, e) in &curve.samples {
                    csv.row(&pressure_fields(e));
                }
                csv.finish()
            };
            Ok(Output { text, flagged })
        }
        Command::Endpoints { c, depth } => {
            let c = parse_c(c, notes)?;
            let e = endpoints(&c, depth.unwrap_or(cfg.endpoint_depth), cfg)?;
            let text = if as_json {
                json("endpoints", notes, &e)?
            } else {
                let mut csv =
                    Csv::new(&["c", "depth", "alpha_lo", "alpha_hi", "beta_lo", "beta_hi", "alpha_divergent"]);
                csv.row(&[
                    sig(e.c.value()),
                    e.depth.to_string(),
                    sig(e.alpha_bracket.0),
                    sig(e.alpha_bracket.1),
                    sig(e.beta_bracket.0),
                    sig(e.beta_bracket.1),
                    e.alpha_divergent.to_string(),
                ]);
                csv.finish()
            };
            Ok(Output { text, flagged: e.alpha_divergent })
        }
        Command::Birkhoff { c, beta_min, beta_max, steps } => {
            let c = parse_c(c, notes)?;
            let curve = birkhoff_spectrum(&c, &linspace(*beta_min, *beta_max, *steps)?, cfg)?;
            let text = if as_json {
                json("birkhoff", notes, &curve)?
            } else {
                let mut csv = Csv::new(&["argument", "value", "bracket_width", "flag"]);
                for s in &curve.samples {
                    csv.row(&[
                        sig(s.argument),
                        opt(s.value),
                        sig(s.bracket_width),
                        s.flag.map(|f| f.as_str().to_string()).unwrap_or_default(),
                    ]);
                }
                csv.finish()
            };
            Ok(Output { text, flagged: false })
        }
        Command::Lq { c, q } => {
            let c = parse_c(c, notes)?;
            let v = lq_via_pressure(&c, *q, cfg)?;
            let text = if as_json {
                json("lq", notes, &v)?
            } else {
                let mut csv = Csv::new(&["c", "q", "value", "bracket_width", "converged", "divergent"]);
                csv.row(&[
                    sig(v.c.value()),
                    sig(v.q),
                    opt(v.value),
                    sig(v.bracket_width),
                    v.converged.to_string(),
                    v.divergent.to_string(),
                ]);
                csv.finish()
            };
            Ok(Output { text, flagged: !v.converged || v.divergent })
        }
        Command::LqDirect { c, q, n_min, n_max } => {
            let cp = parse_c(c, notes)?;
            let fit = lq_direct(&cp, *q, *n_min, *n_max, cfg)?;
            let text = if as_json {
                json("lq-direct", notes, &fit)?
            } else {
                let mut csv = Csv::new(&["c", "q", "n_min", "n_max", "slope", "intercept", "residual"]);
                csv.row(&[
                    sig(cp.value()),
                    sig(fit.q),
                    n_min.to_string(),
                    n_max.to_string(),
                    sig(fit.slope),
                    sig(fit.intercept),
                    sig(fit.residual),
                ]);
                csv.finish()
            };
            Ok(Output { text, flagged: false })
        }
        Command::Masses { c, depth } => {
            let c = parse_c(c, notes)?;
            let table = masses_at_depth(&c, *depth, cfg)?;
            let text = if as_json {
                json("masses", notes, &table)?
            } else {
                let mut csv = Csv::new(&["depth", "index", "left_endpoint", "mass"]);
                for (k, &m) in table.masses.iter().enumerate() {
                    csv.row(&[table.depth.to_string(), k.to_string(), sig(table.left_endpoint(k)), sig(m)]);
                }
                csv.finish()
            };
            Ok(Output { text, flagged: false })
        }
        Command::Scan { t, grid, focus, levels, endpoints, gnuplot } => {
            let focus: Vec<TorusPoint> = focus.iter().map(|f| parse_c(f, notes)).collect::<Result<_>>()?;
            let grid = focused_grid(*grid, &focus, *levels)?;
            if *endpoints {
                let table = scan_endpoints(&grid, cfg)?;
                let flagged = table.diagnostics.divergent_count > 0 || table.diagnostics.error_count > 0;
                let text = if as_json {
                    json("scan", notes, &table)?
                } else if *gnuplot {
                    let mut s = String::from("# c beta_hi\n");
                    for (c, b) in table.c_grid.iter().zip(table.beta_values()) {
                        s.push_str(&format!("{} {}\n", sig(c.value()), b.map(sig).unwrap_or_else(|| "NaN".into())));
                    }
                    s
                } else {
                    let mut csv =
                        Csv::new(&["c", "depth", "alpha_lo", "alpha_hi", "beta_lo", "beta_hi", "alpha_divergent"]);
                    for row in &table.rows {
                        csv.row(&match &row.estimate {
                            Some(e) => vec![
                                sig(row.c.value()),
                                e.depth.to_string(),
                                sig(e.alpha_bracket.0),
                                sig(e.alpha_bracket.1),
                                sig(e.beta_bracket.0),
                                sig(e.beta_bracket.1),
                                e.alpha_divergent.to_string(),
                            ],
                            None => vec![sig(row.c.value()), String::new(), String::new(), String::new(), String::new(), String::new(), "false".into()],
                        });
                    }
                    csv.finish()
                };
                return Ok(Output { text, flagged });
            }
            let t = t.ok_or_else(|| Error::InvalidArgument("scan needs --t (or --endpoints)".into()))?;
            let table = scan_pressure(t, &grid, cfg)?;
            let flagged = table.rows.iter().any(|r| r.estimate.as_ref().map_or(true, |e| !e.converged || e.divergent));
            let text = if as_json {
                #[derive(Serialize)]
                struct WithReport<'a> {
                    table: &'a crate::scan::PressureScan,
                    semicontinuity: crate::scan::SemicontinuityReport,
                }
                json("scan", notes, WithReport { table: &table, semicontinuity: semicontinuity_report(&table) })?
            } else if *gnuplot {
                let mut s = String::from("# c midpoint\n");
                for (c, v) in table.c_grid.iter().zip(table.values()) {
                    s.push_str(&format!("{} {}\n", sig(c.value()), v.map(sig).unwrap_or_else(|| "NaN".into())));
                }
                s
            } else {
                let mut csv = Csv::new(&["c", "t", "depth", "lower", "upper", "converged", "divergent"]);
                for row in &table.rows {
                    csv.row(&match &row.estimate {
                        Some(e) => {
                            let mut f = pressure_fields(e);
                            f.remove(5);
                            f
                        }
                        None => vec![sig(row.c.value()), sig(t), String::new(), String::new(), String::new(), "false".into(), "false".into()],
                    });
                }
                csv.finish()
            };
            Ok(Output { text, flagged })
        }
        Command::Diffcheck { c, lags, length, truncation } => {
            let c = parse_c(c, notes)?;
            let r = autocorrelation_check(&c, *lags, *length, *truncation, cfg)?;
            let text = if as_json {
                json("diffcheck", notes, &r)?
            } else {
                let mut csv = Csv::new(&[
                    "lag",
                    "empirical_re",
                    "empirical_im",
                    "coefficient_re",
                    "coefficient_im",
                    "discrepancy",
                ]);
                for (k, (a, b)) in r.empirical.iter().zip(&r.coefficients).enumerate() {
                    csv.row(&[k.to_string(), sig(a.re), sig(a.im), sig(b.re), sig(b.im), sig((a - b).norm())]);
                }
                csv.finish()
            };
            Ok(Output { text, flagged: false })
        }
    }
}

/// Runs the command line with explicit streams and environment lookup; returns the exit code.
pub fn run_with<I, T>(argv: I, env_workers: Option<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let cfg = match build_config(&cli.global, env_workers) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start {} workers: {e}", cfg.workers);
            return EXIT_USAGE;
        }
    };
    let mut notes = Vec::new();
    let result = pool.install(|| execute(&cli.command, &cfg, &mut notes));
    if cfg.output_format == OutputFormat::Csv {
        for n in &notes {
            let _ = writeln!(stderr, "note: {n}");
        }
    }
    match result {
        Ok(out) => {
            let written = match &cli.global.out {
                Some(path) => std::fs::write(path, &out.text),
                None => stdout.write_all(out.text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: cannot write output: {e}");
                return EXIT_USAGE;
            }
            if out.flagged {
                let _ = writeln!(stderr, "warning: some results are unconverged or divergent");
                EXIT_FLAGGED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs with the process streams and environment.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env = std::env::var(WORKERS_ENV).ok();
    run_with(argv, env, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
