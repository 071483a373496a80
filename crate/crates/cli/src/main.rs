use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use chowkit::bracket_closure::{closure, lie_rank_at_f64, FieldFamily};
use chowkit::convex::{
    cone_extremal_point, mackey_cauchy_diagnostic, points_from_csv, separate, ConvexBody, Region,
};
use chowkit::flows::{
    apply_word_traced, commutator_flow_residual_with, resolve_label, CircleDiffeo, FieldRef, FlowWord, Integrator,
    StepSpec, DEFAULT_GRID, DEFAULT_RTOL,
};
use chowkit::poly_field::PolyField;
use chowkit::steering::{steer, trajectory, trajectory_csv, SteeringProblem};
use chowkit::trig_fields::TrigPoly;

/// Experiment runner for bracket generation, circle flows, steering and convex constructions.
#[derive(Parser)]
#[command(name = "chowkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Input file (JSON unless noted).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Artifact path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bracket of two circle fields; input `{"x": field, "y": field}` (fields inline or as labels).
    Bracket {
        #[command(flatten)]
        io: Io,
    },
    /// Bracket closure of a circle family, or the pointwise rank of a polynomial family with `--point`.
    Closure {
        #[command(flatten)]
        io: Io,
        /// Largest Fourier mode kept.
        #[arg(long, default_value_t = 8)]
        cap: usize,
        /// Largest bracket word length.
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Evaluation point `x1,x2,...` for a polynomial family.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
    },
    /// Applies a flow word (input) to a diffeomorphism; writes the result as CSV.
    Flow {
        #[command(flatten)]
        io: Io,
        /// Starting diffeomorphism as `theta,lift` CSV; the identity when omitted.
        #[arg(long)]
        diffeo: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Family file resolving the word's labels.
        #[arg(long)]
        family: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RTOL)]
        tol: f64,
        /// CSV of the sup-displacement after each step.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Commutator-flow residuals; input `{"x", "y", "theta", "t": [..]}`.
    Residual {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_RTOL)]
        tol: f64,
    },
    /// Plans a flow word toward a target; input is a steering problem, or use `--target`.
    Steer {
        #[command(flatten)]
        io: Io,
        /// Target diffeomorphism as `theta,lift` CSV.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Family file overriding the problem's (low-mode generators with `--target`).
        #[arg(long)]
        family: Option<PathBuf>,
        /// Target sup-distance (1e-2 with `--target`).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Largest number of flow steps (400 with `--target`).
        #[arg(long)]
        budget: Option<usize>,
        /// Largest nesting of commutator primitives.
        #[arg(long)]
        depth: Option<usize>,
        /// CSV of the distance to the target after each step.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Gauge values of a body (input) at the points of a CSV file.
    Minkowski {
        #[command(flatten)]
        io: Io,
        /// Points as CSV, one per line.
        #[arg(long)]
        points: PathBuf,
        /// Use `D ∩ −D` instead of `D`.
        #[arg(long)]
        symmetrize: bool,
    },
    /// Separating functional; input `{"a": [[..]], "b": body or [[..]]}`.
    Separate {
        #[command(flatten)]
        io: Io,
    },
    /// Nested-cone extremal point; input `{"b": [[..]], "a1": [..], "x0": [..], "gauge": body}`.
    Cone {
        #[command(flatten)]
        io: Io,
        /// Symmetrize the gauge body first.
        #[arg(long)]
        symmetrize: bool,
    },
    /// Mackey–Cauchy diagnostic; input `{"prefix": [[..]], "body": body}`.
    Mackey {
        #[command(flatten)]
        io: Io,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn input(io: &Io) -> anyhow::Result<String> {
    match &io.input {
        Some(p) => read(p),
        None => bail!("--input is required"),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> anyhow::Result<T> {
    serde_json::from_str(text).with_context(|| format!("parsing {what}"))
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes the artifact and the one-line summary.
fn emit(io: &Io, artifact: &str, summary: &str) -> anyhow::Result<()> {
    match &io.output {
        Some(p) => {
            fs::write(p, artifact).with_context(|| format!("writing {}", p.display()))?;
            println!("{summary}");
        }
        None => {
            std::io::stdout().write_all(artifact.as_bytes())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn load_family(path: &Option<PathBuf>) -> anyhow::Result<Option<FieldFamily<TrigPoly>>> {
    path.as_ref().map(|p| parse(&read(p)?, "family")).transpose()
}

fn resolve(f: &FieldRef, family: Option<&FieldFamily<TrigPoly>>) -> anyhow::Result<TrigPoly> {
    Ok(match f {
        FieldRef::Inline(p) => p.clone(),
        FieldRef::Label(l) => resolve_label(l, family)?,
    })
}

#[derive(Deserialize)]
struct PairInput {
    x: FieldRef,
    y: FieldRef,
}

#[derive(Serialize)]
struct BracketOutput {
    x: TrigPoly,
    y: TrigPoly,
    bracket: TrigPoly,
}

#[derive(Serialize)]
struct RankOutput {
    point: Vec<f64>,
    depth: usize,
    rank: usize,
    dim: usize,
}

#[derive(Deserialize)]
struct ResidualInput {
    x: FieldRef,
    y: FieldRef,
    theta: f64,
    t: Vec<f64>,
}

#[derive(Serialize)]
struct ResidualRow {
    t: f64,
    residual: f64,
    error: f64,
}

#[derive(Serialize)]
struct ResidualOutput {
    theta: f64,
    bracket_value: f64,
    rows: Vec<ResidualRow>,
}

#[derive(Serialize)]
struct GaugeOutput {
    symmetric: bool,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct SeparateInput {
    a: Vec<Vec<f64>>,
    b: Region,
}

#[derive(Deserialize)]
struct ConeInput {
    b: Vec<Vec<f64>>,
    a1: Vec<f64>,
    x0: Vec<f64>,
    gauge: ConvexBody,
}

#[derive(Deserialize)]
struct MackeyInput {
    prefix: Vec<Vec<f64>>,
    body: ConvexBody,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bracket { io } => {
            let p: PairInput = parse(&input(&io)?, "bracket input")?;
            let (x, y) = (resolve(&p.x, None)?, resolve(&p.y, None)?);
            let bracket = x.bracket(&y);
            let summary = format!("bracket: {bracket}");
            emit(&io, &json(&BracketOutput { x, y, bracket })?, &summary)
        }
        Command::Closure { io, cap, depth, point } => {
            let text = input(&io)?;
            if let Some(point) = point {
                let fam: FieldFamily<PolyField> = parse(&text, "polynomial family")?;
                let rank = lie_rank_at_f64(&fam, &point, depth)?;
                let dim = fam.fields()[0].dim();
                let summary = format!("closure: rank {rank} of {dim} at depth {depth}");
                return emit(&io, &json(&RankOutput { point, depth, rank, dim })?, &summary);
            }
            let fam: FieldFamily<TrigPoly> = parse(&text, "circle family")?;
            let report = closure(&fam, depth, cap)?;
            let summary = format!(
                "closure: rank {} (depth used {}, fixed point {}), spanning modes 0..={cap}: {}",
                report.rank, report.depth_used, report.fixed_point, report.spanning
            );
            emit(&io, &json(&report)?, &summary)
        }
        Command::Flow { io, diffeo, grid, family, tol, trace } => {
            let fam = load_family(&family)?;
            let spec: Vec<StepSpec> = parse(&input(&io)?, "flow word")?;
            let word = FlowWord::from_spec(&spec, fam.as_ref())?;
            let phi = match &diffeo {
                Some(p) => CircleDiffeo::from_csv(&read(p)?)?,
                None => CircleDiffeo::identity(grid),
            };
            let steps = apply_word_traced(&word, &phi, &Integrator::with_tolerance(tol))?;
            let out = steps.last().cloned().unwrap_or_else(|| phi.clone());
            if let Some(path) = trace {
                let mut csv = String::from("step,sup_displacement\n");
                for (i, s) in std::iter::once(&phi).chain(&steps).enumerate() {
                    let d = s.displacement().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    csv.push_str(&format!("{i},{d}\n"));
                }
                fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            let summary = format!("flow: applied {} steps on a {}-point grid", word.len(), out.grid_size());
            emit(&io, &out.to_csv(), &summary)
        }
        Command::Residual { io, tol } => {
            let r: ResidualInput = parse(&input(&io)?, "residual input")?;
            let (x, y) = (resolve(&r.x, None)?, resolve(&r.y, None)?);
            let bracket_value = x.bracket(&y).evaluate(r.theta);
            let integ = Integrator::with_tolerance(tol);
            let rows = r
                .t
                .iter()
                .map(|&t| {
                    let residual = commutator_flow_residual_with(&x, &y, r.theta, t, &integ)?;
                    Ok(ResidualRow { t, residual, error: (residual - bracket_value).abs() })
                })
                .collect::<chowkit::Result<Vec<_>>>()?;
            let summary = format!("residual: bracket value {bracket_value}, {} times", rows.len());
            emit(&io, &json(&ResidualOutput { theta: r.theta, bracket_value, rows })?, &summary)
        }
        Command::Steer { io, target, family, epsilon, budget, depth, trace } => {
            let mut problem: SteeringProblem = match (&io.input, &target) {
                (Some(p), _) => parse(&read(p)?, "steering problem")?,
                (None, Some(t)) => SteeringProblem::new(CircleDiffeo::from_csv(&read(t)?)?, 1e-2, 400),
                (None, None) => bail!("steer needs --input or --target"),
            };
            if let Some(f) = load_family(&family)? {
                problem.family = f;
            }
            if let Some(e) = epsilon {
                problem.epsilon = e;
            }
            if let Some(b) = budget {
                problem.budget = b;
            }
            if let Some(d) = depth {
                problem.primitive_depth = d;
            }
            let result = steer(&problem)?;
            if let Some(path) = trace {
                let errs = trajectory(&result.word, &problem.start(), &problem.target)?;
                fs::write(&path, trajectory_csv(&errs)).with_context(|| format!("writing {}", path.display()))?;
            }
            let summary = format!(
                "steer: {} steps, error {:e} (epsilon {:e}), converged {}",
                result.word.len(),
                result.achieved_error,
                problem.epsilon,
                result.converged
            );
            emit(&io, &json(&result)?, &summary)?;
            result.require_converged(problem.epsilon)?;
            Ok(())
        }
        Command::Minkowski { io, points, symmetrize } => {
            let mut body: ConvexBody = parse(&input(&io)?, "convex body")?;
            if symmetrize {
                body = body.symmetrize();
            }
            let pts = points_from_csv(&read(&points)?)?;
            let values = pts.iter().map(|p| body.minkowski(p)).collect::<chowkit::Result<Vec<_>>>()?;
            let summary = format!("minkowski: {} points, max gauge {}", values.len(), values.iter().fold(0.0f64, |a, b| a.max(*b)));
            emit(&io, &json(&GaugeOutput { symmetric: body.is_symmetric(), values })?, &summary)
        }
        Command::Separate { io } => {
            let s: SeparateInput = parse(&input(&io)?, "separation input")?;
            let cert = separate(&s.a, &s.b)?;
            let summary = format!("separate: alpha {} < beta {} (distance {})", cert.alpha, cert.beta, cert.distance);
            emit(&io, &json(&cert)?, &summary)
        }
        Command::Cone { io, symmetrize } => {
            let c: ConeInput = parse(&input(&io)?, "cone input")?;
            let gauge = if symmetrize { c.gauge.symmetrize() } else { c.gauge };
            let res = cone_extremal_point(&c.b, &c.a1, &c.x0, &gauge)?;
            let summary = format!("cone: vertex {:?} after {} iterates, level {}", res.vertex, res.iterates.len(), res.level);
            emit(&io, &json(&res)?, &summary)
        }
        Command::Mackey { io } => {
            let m: MackeyInput = parse(&input(&io)?, "mackey input")?;
            let rep = mackey_cauchy_diagnostic(&m.prefix, &m.body)?;
            let summary = format!("mackey: cauchy prefix {} (max mu {})", rep.is_cauchy_prefix, rep.max_mu);
            emit(&io, &json(&rep)?, &summary)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let domain = e.downcast_ref::<chowkit::Error>().is_some_and(|e| e.is_domain());
            ExitCode::from(if domain { 2 } else { 1 })
        }
    }
}
