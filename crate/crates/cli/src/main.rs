//! `coadj`: reproducible runs over the coadjoint toolkit.
//!
//! Every output starts with the fully resolved configuration. Exit status is
//! 0 on success, 1 when a check fails and 2 on a configuration error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coadj_core::acceptance::{self, AcceptanceConfig, CriterionResult, Status};
use coadj_core::circlefield::CircleField;
use coadj_core::dirac;
use coadj_core::dynamics::{self, KdvCoefficients, PhasePoint, ReducedSystem};
use coadj_core::transverse::{self, Gauge, Theory};
use coadj_core::wilson::{self, Operator, WilsonConfig};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Serialize, Debug)]
#[command(name = "coadj", version, about = "Coadjoint-orbit toolkit: monodromies, constraint chains, reductions, acceptance checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Debug)]
struct Global {
    /// Pass/fail tolerance for commands that check something.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of Fourier modes kept per field (64; 16 for check-all).
    #[arg(long, global = true)]
    bandlimit: Option<usize>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 20_240_917)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug)]
#[serde(rename_all = "lowercase")]
enum OperatorArg {
    Hill,
    Nabla3,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug)]
#[serde(rename_all = "lowercase")]
enum TheoryArg {
    Full,
    Blry,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug)]
#[serde(rename_all = "kebab-case")]
enum GaugeArg {
    None,
    Temporal,
    FullTemporal,
    Chiral,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug)]
#[serde(rename_all = "kebab-case")]
enum EmitArg {
    Momentum,
    Lagrangian,
    FieldEquations,
}

#[derive(Subcommand, Serialize, Debug)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Classify the coadjoint orbit of a constant element.
    Orbit {
        #[arg(long = "constant-D", allow_negative_numbers = true)]
        constant_d: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        q: f64,
    },
    /// Monodromy matrix of the Hill operator or of the third-order operator.
    Monodromy {
        #[arg(long, value_enum, default_value_t = OperatorArg::Nabla3)]
        operator: OperatorArg,
        /// Constant potential.
        #[arg(long = "constant-D", allow_negative_numbers = true, conflicts_with = "input")]
        constant_d: Option<f64>,
        /// Field JSON (`{"bandlimit": N, "modes": [[re, im], ...]}`).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        q: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
    },
    /// Dirac consistency chain for a built-in or user-supplied theory.
    Constraints {
        /// dxn, frozen, alternative or maxwell.
        #[arg(long, conflicts_with = "input")]
        case: Option<String>,
        /// Case JSON with hamiltonian, pairs, primaries, multipliers.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Momenta, Lagrangian or field equations of the flat transverse theories.
    Transverse {
        #[arg(long, value_enum, default_value_t = TheoryArg::Full)]
        theory: TheoryArg,
        #[arg(long, value_enum, default_value_t = GaugeArg::None)]
        gauge: GaugeArg,
        #[arg(long, value_enum, default_value_t = EmitArg::FieldEquations)]
        emit: EmitArg,
    },
    /// Integrate the reduced (Q, P) system.
    Reduce {
        #[arg(long, default_value_t = 3.0)]
        q0: f64,
        #[arg(long, default_value_t = -0.1, allow_negative_numbers = true)]
        p0: f64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Pseudo-spectral KdV evolution.
    Kdv {
        /// Soliton speed for the default initial condition.
        #[arg(long, default_value_t = 36.0, conflicts_with = "input")]
        speed: f64,
        /// Initial field JSON instead of a soliton.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Use the Euler-Poincare form with this charge instead of standard KdV.
        #[arg(long, allow_negative_numbers = true)]
        euler_poincare: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        t_end: f64,
        #[arg(long, default_value_t = 2.5e-5)]
        dt: f64,
        /// Record every n-th step.
        #[arg(long, default_value_t = 100)]
        every: usize,
        /// Sample count per frame in the output.
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Residuals of the closed-form solutions.
    Verify {
        /// A case name or `all`.
        #[arg(long, default_value = "all")]
        case: String,
    },
    /// Run the acceptance suite.
    CheckAll {
        /// Comma-separated criterion ids; default all.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
        /// Exit 0 when the only failures are the recorded ones.
        #[arg(long)]
        allow_documented: bool,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

enum Failure {
    Config(String),
    Check(String),
}

/// Output body plus an optional failed-check message.
struct Outcome {
    body: Body,
    failed: Option<String>,
}

enum Body {
    Json(Value),
    Csv(String),
    Text(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COADJ_LOG", "warn")).init();
    let mut cli = Cli::parse();
    resolve(&mut cli);
    let config = serde_json::to_value(&cli).expect("config serializes");
    log::info!("resolved config: {config}");
    match run(&cli) {
        Ok(out) => {
            let text = render(&config, out.body);
            if let Err(e) = emit(&cli.global, &text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            match out.failed {
                Some(msg) => {
                    eprintln!("check failed: {msg}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Fills per-subcommand defaults so the recorded config is the one used.
fn resolve(cli: &mut Cli) {
    let (tol, bandlimit) = match cli.command {
        Command::CheckAll { .. } => (None, AcceptanceConfig::default().bandlimit),
        Command::Monodromy { .. } | Command::Verify { .. } => (Some(1e-8), 64),
        Command::Reduce { .. } => (Some(1e-8), 64),
        Command::Kdv { .. } => (Some(1e-6), 96),
        _ => (None, 64),
    };
    if cli.global.tol.is_none() {
        cli.global.tol = tol;
    }
    cli.global.bandlimit.get_or_insert(bandlimit);
}

fn render(config: &Value, body: Body) -> String {
    match body {
        Body::Json(v) => {
            let mut obj = serde_json::Map::new();
            obj.insert("config".into(), config.clone());
            match v {
                Value::Object(m) => obj.extend(m),
                other => {
                    obj.insert("result".into(), other);
                }
            }
            serde_json::to_string_pretty(&Value::Object(obj)).expect("json") + "\n"
        }
        Body::Csv(s) | Body::Text(s) => format!("# config: {config}\n{s}"),
    }
}

fn emit(g: &Global, text: &str) -> std::io::Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, text),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(text.as_bytes())
        }
    }
}

fn ok(body: Body) -> Result<Outcome, Failure> {
    Ok(Outcome { body, failed: None })
}

fn read_field(path: &PathBuf) -> Result<CircleField, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: not a field record: {e}", path.display())))
}

fn need_format(g: &Global, allowed: &[Format]) -> Result<(), Failure> {
    if allowed.contains(&g.format) {
        Ok(())
    } else {
        Err(Failure::Config(format!("format {:?} is not available for this subcommand", g.format)))
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let g = &cli.global;
    let bandlimit = g.bandlimit.expect("resolved");
    match &cli.command {
        Command::Orbit { constant_d, q } => {
            need_format(g, &[Format::Json])?;
            let c = wilson::classify_orbit(*constant_d, *q).map_err(|e| Failure::Config(e.to_string()))?;
            ok(Body::Json(json!({ "orbit": c })))
        }
        Command::Monodromy { operator, constant_d, input, q, rtol } => {
            need_format(g, &[Format::Json])?;
            let d = match (constant_d, input) {
                (Some(c), None) => CircleField::constant(*c, bandlimit),
                (None, Some(p)) => read_field(p)?,
                _ => return Err(Failure::Config("give exactly one of --constant-D or --input".into())),
            };
            let op = match operator {
                OperatorArg::Hill => Operator::Hill,
                OperatorArg::Nabla3 => Operator::Nabla3,
            };
            let m = wilson::monodromy(op, &d, *q, &WilsonConfig { rtol: *rtol }).map_err(|e| Failure::Config(e.to_string()))?;
            let det = m.det();
            let tol = g.tol.unwrap_or_default();
            let mut out = json!({ "monodromy": m, "det": det });
            if let (Operator::Nabla3, Some(c)) = (op, constant_d) {
                if *c * *q > 0.0 {
                    let omega = (2.0 * c / q).sqrt();
                    let cf = wilson::first_type_closed_form(omega).map_err(|e| Failure::Config(e.to_string()))?;
                    out["omega"] = json!(omega);
                    out["closed_form_distance"] = json!(m.distance(&cf));
                    out["closed_form"] = json!(cf.matrix);
                }
            }
            let failed = ((det - 1.0).abs() >= tol).then(|| format!("invariant det M = 1 violated: |det - 1| = {:.3e}", (det - 1.0).abs()));
            Ok(Outcome { body: Body::Json(out), failed })
        }
        Command::Constraints { case, input } => {
            need_format(g, &[Format::Json, Format::Text])?;
            let study = match (case, input) {
                (Some(name), None) => dirac::case_by_name(name)
                    .ok_or_else(|| Failure::Config(format!("unknown case {name:?}; expected dxn, frozen, alternative or maxwell")))?,
                (None, Some(p)) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
                    dirac::custom_case(&text).map_err(|e| Failure::Config(e.to_string()))?
                }
                _ => return Err(Failure::Config("give exactly one of --case or --input".into())),
            };
            let report = study.run().map_err(|e| Failure::Config(e.to_string()))?;
            let failed = report.inconsistent.then(|| "the constraint chain is inconsistent".to_string());
            let body = match g.format {
                Format::Text => Body::Text(report.to_table()),
                _ => Body::Json(json!({ "case": study.name, "report": report.to_json() })),
            };
            Ok(Outcome { body, failed })
        }
        Command::Transverse { theory, gauge, emit } => {
            need_format(g, &[Format::Json])?;
            let theory = match theory {
                TheoryArg::Full => Theory::Full,
                TheoryArg::Blry => Theory::Blry,
            };
            let gauge = match gauge {
                GaugeArg::None => Gauge::None,
                GaugeArg::Temporal => Gauge::Temporal,
                GaugeArg::FullTemporal => Gauge::FullTemporal,
                GaugeArg::Chiral => Gauge::Chiral,
            };
            let what = match emit {
                EmitArg::Momentum => "momentum",
                EmitArg::Lagrangian => "lagrangian",
                EmitArg::FieldEquations => "field-equations",
            };
            let v = transverse::emit(theory, gauge, what).map_err(|e| Failure::Config(e.to_string()))?;
            ok(Body::Json(v))
        }
        Command::Reduce { q0, p0, t_end, dt, c } => {
            need_format(g, &[Format::Json, Format::Csv])?;
            let sys = ReducedSystem::with_c(*c);
            let tr = dynamics::integrate_reduced(PhasePoint { q: *q0, p: *p0 }, &sys, *t_end, *dt)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let tol = g.tol.unwrap_or_default();
            let drift = tr.relative_h_drift();
            let failed = (drift >= tol).then(|| format!("energy conservation violated: relative H drift {drift:.3e}"));
            let body = match g.format {
                Format::Csv => Body::Csv(tr.to_csv()),
                _ => Body::Json(json!({ "relative_h_drift": drift, "trajectory": tr })),
            };
            Ok(Outcome { body, failed })
        }
        Command::Kdv { speed, input, euler_poincare, t_end, dt, every, grid } => {
            need_format(g, &[Format::Json, Format::Csv])?;
            let coeff = match euler_poincare {
                Some(q) => KdvCoefficients::euler_poincare(*q),
                None => KdvCoefficients::STANDARD,
            };
            let d0 = match input {
                Some(p) => read_field(p)?,
                None => {
                    let cfg = coadj_core::circlefield::FieldConfig::with_bandlimit(bandlimit);
                    CircleField::from_fn(|th| dynamics::soliton(*speed, std::f64::consts::PI, 0.0, th), &cfg)
                        .map_err(|e| Failure::Config(e.to_string()))?
                        .0
                }
            };
            let run = dynamics::kdv_evolve(&d0, coeff, *t_end, *dt, *every).map_err(|e| Failure::Check(e.to_string()))?;
            let tol = g.tol.unwrap_or_default();
            let failed = (run.mean_drift >= tol).then(|| format!("mean conservation violated: drift {:.3e}", run.mean_drift));
            let body = match g.format {
                Format::Csv => Body::Csv(run.to_csv(*grid)),
                _ => Body::Json(run.to_json(*grid)),
            };
            Ok(Outcome { body, failed })
        }
        Command::Verify { case } => {
            need_format(g, &[Format::Json, Format::Text])?;
            let names: Vec<&str> = if case == "all" {
                dynamics::CLOSED_FORM_CASES.iter().chain(&dynamics::CORRECTED_CASES).copied().collect()
            } else {
                vec![case.as_str()]
            };
            let tol = g.tol.unwrap_or_default();
            let mut reports = Vec::new();
            let mut bad = Vec::new();
            for n in names {
                let r = dynamics::verify_closed_form(n).map_err(|e| Failure::Config(e.to_string()))?;
                if !r.passes(tol) {
                    bad.push(format!("{n} (residual {:.3e})", r.max_residual()));
                }
                reports.push(r);
            }
            let failed = (!bad.is_empty()).then(|| format!("closed-form residual above {tol:e}: {}", bad.join(", ")));
            let body = match g.format {
                Format::Text => {
                    let mut s = String::new();
                    for r in &reports {
                        let _ = writeln!(s, "{:<26} {:>10.3e} {}", r.case, r.max_residual(), if r.passes(tol) { "PASS" } else { "FAIL" });
                    }
                    Body::Text(s)
                }
                _ => Body::Json(json!({ "tolerance": tol, "cases": reports })),
            };
            Ok(Outcome { body, failed })
        }
        Command::CheckAll { criteria, allow_documented, jobs } => {
            need_format(g, &[Format::Json, Format::Text])?;
            let ids: Vec<u32> = if criteria.is_empty() { acceptance::CRITERIA.iter().map(|c| c.0).collect() } else { criteria.clone() };
            if let Some(bad) = ids.iter().find(|i| !acceptance::CRITERIA.iter().any(|c| c.0 == **i)) {
                return Err(Failure::Config(format!("no acceptance criterion {bad}; valid ids are 1 to 14")));
            }
            let cfg = AcceptanceConfig { seed: g.seed, bandlimit };
            let results = run_criteria(&ids, &cfg, (*jobs).max(1));
            let hard: Vec<u32> = results.iter().filter(|r| r.status() == Status::Fail).map(|r| r.id).collect();
            let documented: Vec<u32> = results.iter().filter(|r| r.status() == Status::DocumentedFail).map(|r| r.id).collect();
            let failed = if !hard.is_empty() {
                Some(format!("criteria {hard:?} failed"))
            } else if !documented.is_empty() && !allow_documented {
                Some(format!("criteria {documented:?} fail as documented (pass --allow-documented to accept)"))
            } else {
                None
            };
            let body = match g.format {
                Format::Text => Body::Text(acceptance::summary(&results) + "\n"),
                _ => Body::Json(json!({
                    "summary": results.iter().map(|r| json!({"id": r.id, "name": r.name, "status": r.status()})).collect::<Vec<_>>(),
                    "criteria": results.iter().map(CriterionResult::to_json).collect::<Vec<_>>(),
                })),
            };
            Ok(Outcome { body, failed })
        }
    }
}

/// Runs the selected criteria on `jobs` threads; output order follows `ids`.
fn run_criteria(ids: &[u32], cfg: &AcceptanceConfig, jobs: usize) -> Vec<CriterionResult> {
    let mut slots: Vec<Option<CriterionResult>> = vec![None; ids.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let done = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(ids.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k >= ids.len() {
                    break;
                }
                let r = acceptance::run_criterion(ids[k], cfg).expect("ids validated");
                log::info!("criterion {} finished in {:.2}s", r.id, r.seconds);
                done.lock().expect("no poisoning")[k] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}
