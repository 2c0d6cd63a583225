//! Command-line surface: invariance sweeps, prolongation and flow queries,
//! volume-form evaluation, triviality probes, and rotational averaging.
//!
//! Exit codes: 0 success / smooth-evidence, 1 input error, 2 residual above
//! tolerance, 3 divergence-evidence, 4 inconclusive.

use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use losik::checks::{
    check_canonicity, check_cocycle, check_flow_consistency, check_lie, plain, CanonKind,
};
use losik::error::Result;
use losik::expr::{parse as parse_expr, Env, VectorFieldSpec};
use losik::forms::gvl_form;
use losik::jets::{Bundle, ChartLayout};
use losik::prolong::{rk4_trajectory, ProlongedField};
use losik::taylor::TaylorValue;
use losik::triviality::{
    blowup_probe_with_r, example2_check, forced_r, rot_average, ChartScalar, RadialProfile,
    Verdict,
};

#[derive(Parser)]
#[command(name = "losik", version, about = "Desk toolkit for Losik characteristic classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct Common {
    /// base dimension
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// random seed; a fixed seed reproduces the report byte for byte
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// number of random trials
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// residual tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// integration step size
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Cocycle,
    Canonicity,
    Lie,
    FlowConsistency,
}

#[derive(Subcommand)]
enum Command {
    /// Run a property sweep and report the worst residual.
    Check {
        kind: CheckKind,
        /// restrict to one bundle chart (cocycle / flow-consistency)
        #[arg(long)]
        bundle: Option<String>,
        /// restrict to one named form (canonicity / lie), e.g. `gamma1@s2`
        #[arg(long)]
        form: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the prolonged components of a field at a chart point.
    Prolong {
        #[arg(long)]
        bundle: String,
        #[arg(long)]
        field: String,
        /// comma-separated chart coordinates
        #[arg(long)]
        point: String,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the prolonged flow from a chart point.
    Flow {
        #[arg(long)]
        bundle: String,
        #[arg(long)]
        field: String,
        #[arg(long)]
        point: String,
        /// total flow time
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the volume form of the class on argument vectors at a point.
    GvlEval {
        #[arg(long)]
        bundle: String,
        #[arg(long)]
        point: String,
        /// semicolon-separated argument vectors, each comma-separated
        #[arg(long)]
        vectors: String,
        #[command(flatten)]
        common: Common,
    },
    /// Probe the radial primitive of the first Chern-Losik class for blow-up.
    ClTrivial {
        /// radial profile, e.g. "1 + r2"
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0.5)]
        r0: f64,
        #[arg(long, default_value_t = 1e-6)]
        rmin: f64,
        /// check the rotational field instead (explicit solution, residual)
        #[arg(long)]
        rotational: bool,
        /// override the forced constant R (exploration only)
        #[arg(long)]
        r_override: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Average a scalar on the 2-disc chart over the fiber rotation flow.
    RotAverage {
        /// scalar in y1, y2 (base) and y3, y4 (fiber coordinates)
        #[arg(long)]
        expr: String,
        /// comma-separated 4-component point
        #[arg(long)]
        point: String,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                losik::error::Error::InvalidInput(format!("bad coordinate `{t}`"))
            })
        })
        .collect()
}

fn config_json(c: &Common) -> serde_json::Value {
    json!({"n": c.n, "seed": c.seed, "samples": c.samples, "tol": c.tol, "step": c.step})
}

fn emit(envelope: &serde_json::Value, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(envelope).unwrap()),
        Format::Text | Format::Csv => {
            // compact text rendering of the envelope
            println!("{envelope}");
        }
    }
}

fn run_check(
    kind: CheckKind,
    bundle: Option<String>,
    form: Option<String>,
    c: &Common,
) -> Result<(serde_json::Value, f64)> {
    let mut results = Vec::new();
    let mut worst: f64 = 0.0;
    match kind {
        CheckKind::Cocycle => {
            let bundles: Vec<Bundle> = match &bundle {
                Some(b) => vec![Bundle::parse(b)?],
                None => vec![Bundle::S2, Bundle::O, Bundle::Sl, Bundle::A, Bundle::B],
            };
            for b in bundles {
                let r = check_cocycle(b, c.n, c.samples, c.seed)?;
                worst = worst.max(r);
                results.push(json!({"target": b.name(), "max_residual": r}));
            }
        }
        CheckKind::Canonicity | CheckKind::Lie => {
            let kinds: Vec<CanonKind> = match &form {
                Some(f) => vec![CanonKind::parse(f)?],
                None => match &bundle {
                    Some(b) => {
                        let bu = Bundle::parse(b)?;
                        CanonKind::ALL.into_iter().filter(|k| k.bundle() == bu).collect()
                    }
                    None => CanonKind::ALL.to_vec(),
                },
            };
            for k in kinds {
                let r = match kind {
                    CheckKind::Canonicity => check_canonicity(k, c.n, c.samples, c.seed)?,
                    _ => check_lie(k, c.n, c.samples, c.seed)?,
                };
                worst = worst.max(r);
                results.push(json!({"target": k.name(), "max_residual": r}));
            }
        }
        CheckKind::FlowConsistency => {
            let bundles: Vec<Bundle> = match &bundle {
                Some(b) => vec![Bundle::parse(b)?],
                None => vec![Bundle::S2, Bundle::Gl, Bundle::O, Bundle::Sl, Bundle::A, Bundle::B],
            };
            let steps = (0.1 / c.step).round().max(1.0) as usize;
            for b in bundles {
                let r = check_flow_consistency(b, c.n, c.samples.min(10), 0.1, steps, c.seed)?;
                worst = worst.max(r);
                results.push(json!({"target": b.name(), "max_residual": r}));
            }
        }
    }
    let name = match kind {
        CheckKind::Cocycle => "check cocycle",
        CheckKind::Canonicity => "check canonicity",
        CheckKind::Lie => "check lie",
        CheckKind::FlowConsistency => "check flow-consistency",
    };
    let verdict = if worst <= c.tol { "pass" } else { "residual-breach" };
    Ok((
        json!({
            "command": name,
            "config": config_json(c),
            "results": results,
            "max_residual": worst,
            "verdict": verdict,
        }),
        worst,
    ))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check { kind, bundle, form, common } => {
            let (envelope, worst) = run_check(kind, bundle, form, &common)?;
            emit(&envelope, common.format);
            Ok(if worst <= common.tol {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Prolong { bundle, field, point, common } => {
            let b = Bundle::parse(&bundle)?;
            let v = VectorFieldSpec::parse(&field, common.n)?;
            let p = parse_point(&point)?;
            let layout = ChartLayout::new(b, common.n);
            if p.len() != layout.dim() {
                return Err(losik::error::Error::DimensionMismatch(format!(
                    "{} chart needs {} coordinates, got {}",
                    b.name(),
                    layout.dim(),
                    p.len()
                )));
            }
            let pf = ProlongedField::new(b, Arc::new(v));
            let out = pf.eval(&plain(&p))?;
            let comps: Vec<f64> = out.iter().map(|t| t.value()).collect();
            let envelope = json!({
                "command": "prolong",
                "config": config_json(&common),
                "results": {"bundle": b.name(), "point": p, "components": comps},
                "max_residual": 0.0,
                "verdict": "pass",
            });
            emit(&envelope, common.format);
            Ok(ExitCode::SUCCESS)
        }
        Command::Flow { bundle, field, point, t, common } => {
            let b = Bundle::parse(&bundle)?;
            let v = VectorFieldSpec::parse(&field, common.n)?;
            let p = parse_point(&point)?;
            let layout = ChartLayout::new(b, common.n);
            if p.len() != layout.dim() {
                return Err(losik::error::Error::DimensionMismatch(format!(
                    "{} chart needs {} coordinates, got {}",
                    b.name(),
                    layout.dim(),
                    p.len()
                )));
            }
            let pf = ProlongedField::new(b, Arc::new(v));
            let steps = (t.abs() / common.step).ceil().max(1.0) as usize;
            let traj = rk4_trajectory(
                &|y: &[TaylorValue]| pf.eval(y),
                &p,
                t,
                steps,
            )?;
            if matches!(common.format, Format::Csv) {
                print!("{}", traj.to_csv());
                return Ok(ExitCode::SUCCESS);
            }
            let envelope = json!({
                "command": "flow",
                "config": config_json(&common),
                "results": {"bundle": b.name(), "t": t, "steps": steps,
                            "final": traj.final_state()},
                "max_residual": 0.0,
                "verdict": "pass",
            });
            emit(&envelope, common.format);
            Ok(ExitCode::SUCCESS)
        }
        Command::GvlEval { bundle, point, vectors, common } => {
            let b = Bundle::parse(&bundle)?;
            let form = gvl_form(b, common.n)?;
            let p = parse_point(&point)?;
            let vs: Vec<Vec<f64>> = vectors
                .split(';')
                .map(parse_point)
                .collect::<Result<_>>()?;
            if vs.len() != form.degree {
                return Err(losik::error::Error::DimensionMismatch(format!(
                    "form of degree {} needs {} vectors, got {}",
                    form.degree,
                    form.degree,
                    vs.len()
                )));
            }
            let value = form.eval_plain(&p, &vs)?;
            let envelope = json!({
                "command": "gvl-eval",
                "config": config_json(&common),
                "results": {"bundle": b.name(), "point": p, "value": value},
                "max_residual": 0.0,
                "verdict": "pass",
            });
            emit(&envelope, common.format);
            Ok(ExitCode::SUCCESS)
        }
        Command::ClTrivial { profile, r0, rmin, rotational, r_override, common } => {
            let prof = RadialProfile::parse(&profile)?;
            if rotational {
                let residual = example2_check(&prof, common.samples.max(100), common.seed)?;
                let pass = residual <= common.tol.max(1e-10);
                let envelope = json!({
                    "command": "cl-trivial",
                    "config": config_json(&common),
                    "results": {"profile": profile, "mode": "rotational",
                                "R": 0.0, "residual": residual},
                    "max_residual": residual,
                    "verdict": if pass { "pass" } else { "residual-breach" },
                });
                emit(&envelope, common.format);
                return Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) });
            }
            let r_const = match r_override {
                Some(r) => r,
                None => forced_r(&prof)?,
            };
            let report = blowup_probe_with_r(&prof, r0, rmin, r_const)?;
            if matches!(common.format, Format::Csv) {
                print!("{}", report.samples_csv());
            } else {
                let envelope = json!({
                    "command": "cl-trivial",
                    "config": config_json(&common),
                    "results": report,
                    "max_residual": 0.0,
                    "verdict": match report.verdict {
                        Verdict::SmoothEvidence => "smooth-evidence",
                        Verdict::DivergenceEvidence => "divergence-evidence",
                        Verdict::Inconclusive => "inconclusive",
                    },
                });
                emit(&envelope, common.format);
            }
            Ok(match report.verdict {
                Verdict::SmoothEvidence => ExitCode::SUCCESS,
                Verdict::DivergenceEvidence => ExitCode::from(3),
                Verdict::Inconclusive => ExitCode::from(4),
            })
        }
        Command::RotAverage { expr, point, common } => {
            let e = parse_expr(&expr, 4)?;
            let g: ChartScalar = Arc::new(move |p: &[TaylorValue]| {
                let env = Env { vars: p, r2_override: None, r_override: None };
                losik::expr::eval(&e, &env)
            });
            let p = parse_point(&point)?;
            if p.len() != 4 {
                return Err(losik::error::Error::DimensionMismatch(
                    "rot-average needs a 4-component point".into(),
                ));
            }
            let q = rot_average(g);
            let value = q(&plain(&p))?.value();
            let envelope = json!({
                "command": "rot-average",
                "config": config_json(&common),
                "results": {"expr": expr, "point": p, "value": value},
                "max_residual": 0.0,
                "verdict": "pass",
            });
            emit(&envelope, common.format);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
