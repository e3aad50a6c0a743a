//! `orlicz` — command-line front end for the Orlicz-ball volumetrics
//! library.
//!
//! Every subcommand prints a machine-readable report to stdout:
//! `{"tool_version", "subcommand", "inputs", "results", "provenance"}` in
//! JSON mode (the default), a formatted listing in human mode, and CSV for
//! phase sweeps only. All floats carry 17 significant digits, seeds default
//! to 0, and identical invocations produce byte-identical JSON.
//!
//! Exit codes: 0 success, 1 computation error (the structured error is the
//! report), 2 usage error (diagnostic on stderr).

use clap::{Parser, Subcommand, ValueEnum};
use orlicz_core::intersections::{
    intersection_verdict_with, phase_sweep_with, ss_constant, ss_threshold_via_gibbs_with,
    sweep_to_csv,
};
use orlicz_core::montecarlo::{
    clt_diagnostic_with, estimate_intersection_ratio_with, estimate_log_volume_with,
    marginal_diagnostic_with, sample_gibbs_with,
};
use orlicz_core::numerics::Tolerances;
use orlicz_core::tilt::solve_tilt_with;
use orlicz_core::verify::{core_check_registry, Check};
use orlicz_core::volume_ratio::asymptotic_volume_ratio_with;
use orlicz_core::volumetrics::{exact_lp_log_volume, precise_log_volume_with};
use orlicz_core::{parse_orlicz, Error as CoreError, McEstimate, OrliczFunction};
use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;
use std::process::ExitCode;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Parser)]
#[command(
    name = "orlicz",
    version = TOOL_VERSION,
    about = "Asymptotic volumetrics of Orlicz balls: tilts, phase transitions, volume ratios, \
             and tilted Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format (csv is available for phase sweeps only)
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// RNG seed for sampling subcommands
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for Monte Carlo (default: ORLICZ_THREADS or all cores);
    /// never changes results, only wall time
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Relative tolerance override for quadrature
    #[arg(long = "quad-tol", global = true)]
    quad_tol: Option<f64>,

    /// Relative tolerance override for root finding
    #[arg(long = "root-tol", global = true)]
    root_tol: Option<f64>,
}

fn parse_extended(s: &str) -> Result<f64, String> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|e| format!("{e} (use a decimal number, or \"inf\")"))
}

#[derive(Subcommand)]
enum Command {
    /// Log-volume of B_M^d(dR): growth rate, prefactor, and total
    Volume {
        /// Orlicz function, e.g. "t^2", "abs(t)^1.5", "cosh(t)-1"
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: u64,
        /// Compare against the exact power-ball formula, e.g. --oracle p=2
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Solve the tilt: alpha*, phi(alpha*), sigma*^2, rate
    Tilt {
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
    },
    /// ZERO/ONE/CRITICAL verdict for a pair of balls
    Intersect {
        #[arg(long = "M1")]
        m1: String,
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "M2")]
        m2: String,
        #[arg(long = "R2")]
        r2: f64,
        /// Width of the CRITICAL band around the threshold
        #[arg(long = "tol-band")]
        tol_band: Option<f64>,
    },
    /// Verdict sweep over an R2 grid, with the transition located
    Phase {
        #[arg(long = "M1")]
        m1: String,
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "M2")]
        m2: String,
        /// Grid as start:stop:count, e.g. 0.5:1.5:21
        #[arg(long = "R2-grid")]
        r2_grid: String,
    },
    /// The l_p vs l_q intersection constant and its tilt-side cross-check
    Ss {
        /// p in (0, inf]; spell infinity as "inf"
        #[arg(long, value_parser = parse_extended)]
        p: f64,
        /// q in (0, inf)
        #[arg(long, value_parser = parse_extended)]
        q: f64,
    },
    /// Asymptotic volume ratio of B_M^d(d) (requires 2-concave M)
    Vr {
        #[arg(long = "M")]
        m: String,
    },
    /// Draw from the Gibbs density of the solved tilt
    Sample {
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long, default_value_t = 16)]
        n: u64,
        /// Emit the draws themselves instead of summary statistics
        #[arg(long)]
        raw: bool,
    },
    /// Monte Carlo log-volume estimate
    McVolume {
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Lift the 1e9 coordinate-draw resource cap
        #[arg(long)]
        allow_large: bool,
    },
    /// Monte Carlo intersection-ratio estimate
    McIntersect {
        #[arg(long = "M1")]
        m1: String,
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "M2")]
        m2: String,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long)]
        allow_large: bool,
    },
    /// TV distance of the in-ball coordinate marginal from the Gibbs law
    DiagMarginal {
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        allow_large: bool,
    },
    /// KS statistic of normalized sums against the predicted normal law
    DiagClt {
        #[arg(long = "M")]
        m: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long)]
        allow_large: bool,
    },
    /// Run the oracle suite and print a pass/fail table
    Verify {
        /// Comma-separated check ids to run, e.g. C03 or C01,C04
        #[arg(long)]
        only: Option<String>,
    },
}

enum CliError {
    Usage(String),
    Computation(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Computation(e)
    }
}

/// serde_json formatter writing every float with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn jf(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(
            if x.is_nan() {
                "nan"
            } else if x > 0.0 {
                "inf"
            } else {
                "-inf"
            }
            .to_string(),
        ),
    }
}

fn obj(entries: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in entries {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

struct Report {
    subcommand: &'static str,
    inputs: Value,
    results: Value,
}

fn envelope(report: &Report, seed: u64, tols: Tolerances, error: Option<&CoreError>) -> Value {
    let mut entries = vec![
        ("tool_version", Value::String(TOOL_VERSION.to_string())),
        ("subcommand", Value::String(report.subcommand.to_string())),
        ("inputs", report.inputs.clone()),
    ];
    match error {
        None => entries.push(("results", report.results.clone())),
        Some(e) => entries.push((
            "error",
            obj(vec![
                ("kind", Value::String(e.kind().to_string())),
                ("message", Value::String(e.to_string())),
            ]),
        )),
    }
    entries.push((
        "provenance",
        obj(vec![
            ("seed", Value::from(seed)),
            (
                "tolerances",
                obj(vec![
                    ("quad_rel_tol", jf(tols.quad_rel_tol)),
                    ("root_rel_tol", jf(tols.root_rel_tol)),
                ]),
            ),
        ]),
    ));
    obj(entries)
}

fn to_json_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser).expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    out
}

fn print_human(value: &Value, indent: usize) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) | Value::Array(_) => {
                        println!("{:indent$}{k}:", "");
                        print_human(v, indent + 2);
                    }
                    _ => println!("{:indent$}{k} = {}", "", scalar_human(v)),
                }
            }
        }
        Value::Array(items) => {
            for v in items {
                match v {
                    Value::Object(_) | Value::Array(_) => print_human(v, indent + 2),
                    _ => println!("{:indent$}- {}", "", scalar_human(v)),
                }
            }
        }
        _ => println!("{:indent$}{}", "", scalar_human(value)),
    }
}

fn scalar_human(value: &Value) -> String {
    match value {
        Value::Number(n) if n.is_f64() => format!("{:.16e}", n.as_f64().unwrap()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_function(src: &str) -> Result<OrliczFunction, CliError> {
    Ok(parse_orlicz(src)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let usage = || {
        CliError::Usage(format!(
            "--R2-grid expects start:stop:count (e.g. 0.5:1.5:21), got {text:?}"
        ))
    };
    if parts.len() != 3 {
        return Err(usage());
    }
    let start: f64 = parts[0].parse().map_err(|_| usage())?;
    let stop: f64 = parts[1].parse().map_err(|_| usage())?;
    let count: usize = parts[2].parse().map_err(|_| usage())?;
    if !(start > 0.0) || !(stop > start) || count < 2 {
        return Err(CliError::Usage(format!(
            "--R2-grid needs 0 < start < stop and count >= 2, got {text:?}"
        )));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn parse_oracle(text: &str) -> Result<f64, CliError> {
    let rest = text.strip_prefix("p=").ok_or_else(|| {
        CliError::Usage(format!("--oracle expects p=<positive number>, got {text:?}"))
    })?;
    rest.parse::<f64>()
        .ok()
        .filter(|p| *p > 0.0 && p.is_finite())
        .ok_or_else(|| CliError::Usage(format!("--oracle expects p=<positive number>, got {text:?}")))
}

fn mc_results(est: &McEstimate) -> Value {
    obj(vec![
        ("point", jf(est.point)),
        ("std_err", jf(est.std_err)),
        ("n_effective", jf(est.n_effective)),
        ("n", Value::from(est.n)),
        ("seed", Value::from(est.seed)),
    ])
}

fn check_row(check: &Check) -> Value {
    obj(vec![
        ("id", Value::String(check.id.to_string())),
        ("name", Value::String(check.name.to_string())),
        ("passed", Value::Bool(check.passed)),
        ("detail", Value::String(check.detail.clone())),
    ])
}

/// Re-runs every seeded subcommand twice through the installed binary and
/// compares output bytes; the library cannot test the executable surface,
/// so `verify` does it for itself.
fn byte_identity_check() -> Check {
    let make = |passed: bool, detail: String| Check {
        id: "C11",
        name: "seeded subcommands byte-identical",
        passed,
        detail,
    };
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => return make(false, format!("cannot locate own binary: {e}")),
    };
    let invocations: Vec<Vec<&str>> = vec![
        vec!["sample", "--M", "t^2", "--R", "1", "--n", "64", "--seed", "7", "--raw"],
        vec!["mc-volume", "--M", "t^2", "--R", "1", "--d", "5", "--n", "2000", "--seed", "3"],
        vec![
            "mc-intersect",
            "--M1",
            "t^2",
            "--R1",
            "1",
            "--M2",
            "abs(t)",
            "--R2",
            "0.9",
            "--d",
            "5",
            "--n",
            "2000",
            "--seed",
            "3",
        ],
        vec![
            "diag-marginal",
            "--M",
            "t^2",
            "--R",
            "1",
            "--d",
            "4",
            "--n",
            "2000",
            "--bins",
            "12",
            "--seed",
            "3",
        ],
        vec!["diag-clt", "--M", "t^2", "--R", "1", "--d", "4", "--n", "1000", "--seed", "3"],
    ];
    for args in &invocations {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            match std::process::Command::new(&exe).args(args).output() {
                Ok(out) if out.status.success() => outputs.push(out.stdout),
                Ok(out) => {
                    return make(
                        false,
                        format!("`{}` exited with {}", args.join(" "), out.status),
                    )
                }
                Err(e) => return make(false, format!("`{}` failed to spawn: {e}", args.join(" "))),
            }
        }
        if outputs[0] != outputs[1] {
            return make(false, format!("`{}` produced different bytes on rerun", args.join(" ")));
        }
    }
    make(true, format!("{} seeded invocations byte-identical on rerun", invocations.len()))
}

fn run_verify(only: Option<&str>, format: Format, seed: u64, tols: Tolerances) -> Result<u8, CliError> {
    let mut registry = core_check_registry();
    registry.push(("C11", byte_identity_check as fn() -> Check));
    if let Some(filter) = only {
        let wanted: Vec<String> =
            filter.split(',').map(|s| s.trim().to_ascii_uppercase()).collect();
        for id in &wanted {
            if !registry.iter().any(|(rid, _)| rid == id) {
                return Err(CliError::Usage(format!(
                    "unknown check id {id:?}; available: {}",
                    registry.iter().map(|(rid, _)| *rid).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        registry.retain(|(rid, _)| wanted.iter().any(|id| id == rid));
    }
    let checks: Vec<Check> = registry.into_iter().map(|(_, runner)| runner()).collect();
    let all_passed = checks.iter().all(|c| c.passed);
    match format {
        Format::Json => {
            let report = Report {
                subcommand: "verify",
                inputs: obj(vec![(
                    "only",
                    only.map(|s| Value::String(s.to_string())).unwrap_or(Value::Null),
                )]),
                results: obj(vec![
                    ("all_passed", Value::Bool(all_passed)),
                    ("checks", Value::Array(checks.iter().map(check_row).collect())),
                ]),
            };
            let value = envelope(&report, seed, tols, None);
            std::io::stdout().write_all(&to_json_bytes(&value)).ok();
        }
        _ => {
            for check in &checks {
                println!("{check}");
            }
            println!("{}", if all_passed { "all checks passed" } else { "CHECKS FAILED" });
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn dispatch(cli: &Cli, tols: Tolerances) -> Result<Report, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Volume { m, r, d, oracle } => {
            let func = parse_function(m)?;
            let oracle_p = oracle.as_deref().map(parse_oracle).transpose()?;
            let lv = precise_log_volume_with(&func, *r, *d, tols)?;
            let mut results = vec![
                ("d", Value::from(lv.d)),
                ("rate", jf(lv.rate)),
                ("prefactor_log", jf(lv.prefactor_log)),
                ("total_log", jf(lv.total_log)),
            ];
            let oracle_value = match oracle_p {
                Some(p) => {
                    let exact = exact_lp_log_volume(p, *r, *d)?;
                    Some(obj(vec![
                        ("p", jf(p)),
                        ("exact_log_volume", jf(exact)),
                        ("gap", jf(lv.total_log - exact)),
                    ]))
                }
                None => None,
            };
            if let Some(v) = oracle_value {
                results.push(("oracle", v));
            }
            Ok(Report {
                subcommand: "volume",
                inputs: obj(vec![
                    ("M", Value::String(m.clone())),
                    ("R", jf(*r)),
                    ("d", Value::from(*d)),
                    (
                        "oracle",
                        oracle.clone().map(Value::String).unwrap_or(Value::Null),
                    ),
                ]),
                results: obj(results),
            })
        }
        Command::Tilt { m, r } => {
            let func = parse_function(m)?;
            let tilt = solve_tilt_with(&func, *r, tols)?;
            Ok(Report {
                subcommand: "tilt",
                inputs: obj(vec![("M", Value::String(m.clone())), ("R", jf(*r))]),
                results: obj(vec![
                    ("alpha_star", jf(tilt.alpha_star)),
                    ("phi_at", jf(tilt.phi_at)),
                    ("sigma_sq", jf(tilt.sigma_sq)),
                    ("rate", jf(tilt.rate)),
                ]),
            })
        }
        Command::Intersect { m1, r1, m2, r2, tol_band } => {
            let f1 = parse_function(m1)?;
            let f2 = parse_function(m2)?;
            let v = intersection_verdict_with(&f1, *r1, &f2, *r2, *tol_band, tols)?;
            Ok(Report {
                subcommand: "intersect",
                inputs: obj(vec![
                    ("M1", Value::String(m1.clone())),
                    ("R1", jf(*r1)),
                    ("M2", Value::String(m2.clone())),
                    ("R2", jf(*r2)),
                    (
                        "tol_band",
                        tol_band.map(jf).unwrap_or(Value::Null),
                    ),
                ]),
                results: obj(vec![
                    ("verdict", Value::String(v.verdict.to_string())),
                    ("threshold_moment", jf(v.threshold_moment)),
                    ("R2", jf(v.r2)),
                    ("margin", jf(v.margin)),
                    ("tol_band", jf(v.tol_band)),
                ]),
            })
        }
        Command::Phase { m1, r1, m2, r2_grid } => {
            let f1 = parse_function(m1)?;
            let f2 = parse_function(m2)?;
            let grid = parse_grid(r2_grid)?;
            let sweep = phase_sweep_with(&f1, *r1, &f2, &grid, tols)?;
            if cli.format == Format::Csv {
                print!("{}", sweep_to_csv(&sweep));
                match sweep.critical_r2 {
                    Some(c) => eprintln!("threshold={c:.16e}"),
                    None => eprintln!("threshold=none"),
                }
                // Sentinel report: CSV already written, envelope suppressed.
                return Ok(Report {
                    subcommand: "phase",
                    inputs: Value::Null,
                    results: Value::Null,
                });
            }
            let rows: Vec<Value> = sweep
                .rows
                .iter()
                .map(|row| {
                    obj(vec![
                        ("R2", jf(row.r2)),
                        ("verdict", Value::String(row.verdict.to_string())),
                        ("margin", jf(row.margin)),
                    ])
                })
                .collect();
            Ok(Report {
                subcommand: "phase",
                inputs: obj(vec![
                    ("M1", Value::String(m1.clone())),
                    ("R1", jf(*r1)),
                    ("M2", Value::String(m2.clone())),
                    ("R2_grid", Value::String(r2_grid.clone())),
                ]),
                results: obj(vec![
                    ("threshold_moment", jf(sweep.threshold_moment)),
                    (
                        "critical_r2",
                        sweep.critical_r2.map(jf).unwrap_or(Value::Null),
                    ),
                    ("rows", Value::Array(rows)),
                ]),
            })
        }
        Command::Ss { p, q } => {
            let a = ss_constant(*p, *q)?;
            let (t_star, bridge_gap) = if p.is_finite() {
                let t = ss_threshold_via_gibbs_with(*p, *q, tols)?;
                (Some(t), Some(t * a - 1.0))
            } else {
                (None, None)
            };
            Ok(Report {
                subcommand: "ss",
                inputs: obj(vec![("p", jf(*p)), ("q", jf(*q))]),
                results: obj(vec![
                    ("constant", jf(a)),
                    ("t_star", t_star.map(jf).unwrap_or(Value::Null)),
                    ("bridge_gap", bridge_gap.map(jf).unwrap_or(Value::Null)),
                ]),
            })
        }
        Command::Vr { m } => {
            let func = parse_function(m)?;
            let res = asymptotic_volume_ratio_with(&func, tols)?;
            Ok(Report {
                subcommand: "vr",
                inputs: obj(vec![("M", Value::String(m.clone()))]),
                results: obj(vec![
                    ("vr_limit", jf(res.vr_limit)),
                    ("alpha_star", jf(res.alpha_star)),
                    ("m_inv_one", jf(res.m_inv_one)),
                    (
                        "two_concave",
                        obj(vec![
                            ("holds", Value::Bool(res.two_concave.holds)),
                            (
                                "witness",
                                res.two_concave
                                    .witness
                                    .map(|w| Value::Array(w.iter().map(|&x| jf(x)).collect()))
                                    .unwrap_or(Value::Null),
                            ),
                            ("residual", jf(res.two_concave.residual)),
                        ]),
                    ),
                    ("flagged", Value::Bool(res.flagged)),
                ]),
            })
        }
        Command::Sample { m, r, n, raw } => {
            let func = parse_function(m)?;
            let tilt = solve_tilt_with(&func, *r, tols)?;
            let draws = sample_gibbs_with(&tilt, *n, seed, tols)?;
            let results = if *raw {
                obj(vec![(
                    "draws",
                    Value::Array(draws.iter().map(|&z| jf(z)).collect()),
                )])
            } else {
                let nf = draws.len() as f64;
                let mean = draws.iter().sum::<f64>() / nf;
                let mean_abs = draws.iter().map(|z| z.abs()).sum::<f64>() / nf;
                let mean_m = draws.iter().map(|&z| func.eval_unchecked(z)).sum::<f64>() / nf;
                let max_abs = draws.iter().fold(0.0_f64, |acc, z| acc.max(z.abs()));
                obj(vec![
                    ("n", Value::from(*n)),
                    ("mean", jf(mean)),
                    ("mean_abs", jf(mean_abs)),
                    ("mean_m", jf(mean_m)),
                    ("max_abs", jf(max_abs)),
                ])
            };
            Ok(Report {
                subcommand: "sample",
                inputs: obj(vec![
                    ("M", Value::String(m.clone())),
                    ("R", jf(*r)),
                    ("n", Value::from(*n)),
                    ("raw", Value::Bool(*raw)),
                ]),
                results,
            })
        }
        Command::McVolume { m, r, d, n, allow_large } => {
            let func = parse_function(m)?;
            let est = estimate_log_volume_with(&func, *r, *d, *n, seed, *allow_large, tols)?;
            Ok(Report {
                subcommand: "mc-volume",
                inputs: obj(vec![
                    ("M", Value::String(m.clone())),
                    ("R", jf(*r)),
                    ("d", Value::from(*d)),
                    ("n", Value::from(*n)),
                    ("allow_large", Value::Bool(*allow_large)),
                ]),
                results: mc_results(&est),
            })
        }
        Command::McIntersect { m1, r1, m2, r2, d, n, allow_large } => {
            let f1 = parse_function(m1)?;
            let f2 = parse_function(m2)?;
            let est = estimate_intersection_ratio_with(
                &f1,
                *r1,
                &f2,
                *r2,
                *d,
                *n,
                seed,
                *allow_large,
                tols,
            )?;
            Ok(Report {
                subcommand: "mc-intersect",
                inputs: obj(vec![
                    ("M1", Value::String(m1.clone())),
                    ("R1", jf(*r1)),
                    ("M2", Value::String(m2.clone())),
                    ("R2", jf(*r2)),
                    ("d", Value::from(*d)),
                    ("n", Value::from(*n)),
                    ("allow_large", Value::Bool(*allow_large)),
                ]),
                results: mc_results(&est),
            })
        }
        Command::DiagMarginal { m, r, d, n, bins, allow_large } => {
            let func = parse_function(m)?;
            let tv = marginal_diagnostic_with(&func, *r, *d, *n, *bins, seed, *allow_large, tols)?;
            Ok(Report {
                subcommand: "diag-marginal",
                inputs: obj(vec![
                    ("M", Value::String(m.clone())),
                    ("R", jf(*r)),
                    ("d", Value::from(*d)),
                    ("n", Value::from(*n)),
                    ("bins", Value::from(*bins as u64)),
                    ("allow_large", Value::Bool(*allow_large)),
                ]),
                results: obj(vec![("tv_distance", jf(tv))]),
            })
        }
        Command::DiagClt { m, r, d, n, allow_large } => {
            let func = parse_function(m)?;
            let ks = clt_diagnostic_with(&func, *r, *d, *n, seed, *allow_large, tols)?;
            Ok(Report {
                subcommand: "diag-clt",
                inputs: obj(vec![
                    ("M", Value::String(m.clone())),
                    ("R", jf(*r)),
                    ("d", Value::from(*d)),
                    ("n", Value::from(*n)),
                    ("allow_large", Value::Bool(*allow_large)),
                ]),
                results: obj(vec![("ks_statistic", jf(ks))]),
            })
        }
        Command::Verify { .. } => unreachable!("verify is dispatched separately"),
    }
}

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Volume { .. } => "volume",
        Command::Tilt { .. } => "tilt",
        Command::Intersect { .. } => "intersect",
        Command::Phase { .. } => "phase",
        Command::Ss { .. } => "ss",
        Command::Vr { .. } => "vr",
        Command::Sample { .. } => "sample",
        Command::McVolume { .. } => "mc-volume",
        Command::McIntersect { .. } => "mc-intersect",
        Command::DiagMarginal { .. } => "diag-marginal",
        Command::DiagClt { .. } => "diag-clt",
        Command::Verify { .. } => "verify",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("ORLICZ_THREADS").ok().and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(t) = threads {
        if t > 0 {
            // Ignore the error from double initialization (tests may share a
            // process); the estimators are thread-count independent anyway.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }

    let mut tols = Tolerances::default();
    if let Some(q) = cli.quad_tol {
        tols.quad_rel_tol = q;
    }
    if let Some(r) = cli.root_tol {
        tols.root_rel_tol = r;
    }
    for (name, v) in [("--quad-tol", tols.quad_rel_tol), ("--root-tol", tols.root_rel_tol)] {
        if !(v > 0.0 && v < 1.0) {
            eprintln!("error: {name} must lie strictly between 0 and 1, got {v:e}");
            return ExitCode::from(2);
        }
    }

    if cli.format == Format::Csv && !matches!(cli.command, Command::Phase { .. }) {
        eprintln!("error: --format csv is only available for the phase sweep");
        return ExitCode::from(2);
    }

    if let Command::Verify { only } = &cli.command {
        return match run_verify(only.as_deref(), cli.format, cli.seed, tols) {
            Ok(code) => ExitCode::from(code),
            Err(CliError::Usage(msg)) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Err(CliError::Computation(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    match dispatch(&cli, tols) {
        Ok(report) => {
            if report.inputs == Value::Null {
                // CSV sweep already streamed its output.
                return ExitCode::SUCCESS;
            }
            let value = envelope(&report, cli.seed, tols, None);
            match cli.format {
                Format::Json | Format::Csv => {
                    std::io::stdout().write_all(&to_json_bytes(&value)).ok();
                }
                Format::Human => print_human(&value, 0),
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Computation(e)) => {
            let report = Report {
                subcommand: subcommand_name(&cli.command),
                inputs: Value::Null,
                results: Value::Null,
            };
            let value = envelope(&report, cli.seed, tols, Some(&e));
            match cli.format {
                Format::Json | Format::Csv => {
                    std::io::stdout().write_all(&to_json_bytes(&value)).ok();
                }
                Format::Human => {
                    eprintln!("error [{}]: {e}", e.kind());
                }
            }
            ExitCode::from(1)
        }
    }
}
