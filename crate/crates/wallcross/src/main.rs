use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use wallcross::broken::{self, EnumOptions};
use wallcross::consistency::{self, CheckOptions, CheckerRegistry};
use wallcross::geometry::{build_complex, ConeComplex, GeometryInput, PointInChart};
use wallcross::json::{parse_vector, SCHEMA};
use wallcross::linalg::fmt_q;
use wallcross::render::render_svg;
use wallcross::ring::Truncation;
use wallcross::tropical::{self, BendConfig, Gluing, TropicalType};
use wallcross::walls::{self, CountEntry, GradingData, WallStructure};

#[derive(Parser)]
#[command(name = "wallcross", version, about = "Canonical wall structures, broken lines and theta functions")]
struct Cli {
    /// Seed for generic point choices.
    #[arg(long, global = true, env = "WALLCROSS_SEED", default_value_t = 0)]
    seed: u64,
    /// Bound on broken-line search steps.
    #[arg(long, global = true, default_value_t = 200_000)]
    max_steps: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Geo {
    /// Geometry JSON.
    #[arg(short, long)]
    geometry: PathBuf,
    /// Truncation JSON; defaults to the one recorded in the walls file.
    #[arg(short, long)]
    truncation: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WithWalls {
    #[command(flatten)]
    geo: Geo,
    /// Wall structure JSON.
    #[arg(short, long)]
    walls: PathBuf,
}

#[derive(Args)]
struct Endpoint {
    /// Asymptotic monomial in global divisor coordinates.
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    /// Endpoint in the chart of `--cone`.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, default_value_t = 0)]
    cone: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check a geometry and, optionally, walls, counts and grading data.
    Validate {
        #[command(flatten)]
        geo: Geo,
        #[arg(short, long)]
        walls: Option<PathBuf>,
        #[arg(short, long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        grading: Option<PathBuf>,
    },
    /// Assemble the wall structure from counts.
    Walls {
        #[command(flatten)]
        geo: Geo,
        #[arg(short, long)]
        counts: PathBuf,
        /// Keep one wall per count entry instead of one per support.
        #[arg(long)]
        unmerged: bool,
    },
    /// Theta function at an endpoint, with the broken lines used.
    Theta {
        #[command(flatten)]
        w: WithWalls,
        #[command(flatten)]
        at: Endpoint,
    },
    /// Structure constant α^trop(p₁, p₂, r).
    Alpha {
        #[command(flatten)]
        w: WithWalls,
        #[arg(long, allow_hyphen_values = true)]
        p1: String,
        #[arg(long, allow_hyphen_values = true)]
        p2: String,
        /// Target in global divisor coordinates.
        #[arg(long, allow_hyphen_values = true)]
        r: String,
    },
    /// Broken lines at an endpoint, decorated with their tropical types.
    BrokenLines {
        #[command(flatten)]
        w: WithWalls,
        #[command(flatten)]
        at: Endpoint,
        #[arg(long)]
        decorated: bool,
    },
    /// Joint-by-joint consistency report.
    Consistency {
        #[command(flatten)]
        w: WithWalls,
        #[arg(long, default_value = "all", value_parser = ["0", "1", "2", "boundary", "all"])]
        level: String,
        /// Also run the global patching check.
        #[arg(long)]
        patching: bool,
    },
    /// Complete the walls through a codimension-zero joint.
    Scatter {
        #[command(flatten)]
        w: WithWalls,
        #[arg(long, default_value_t = 0)]
        cone: usize,
        /// Joint rays in the chart of `--cone`, separated by ';'.
        #[arg(long, allow_hyphen_values = true)]
        joint: String,
        #[arg(long)]
        max_weight: i64,
    },
    /// SVG picture of a planar structure or of a localized joint.
    Render {
        #[command(flatten)]
        w: WithWalls,
        /// Localize at this joint of the refined structure first.
        #[arg(long)]
        joint: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, default_value_t = 0)]
        cone: usize,
    },
    /// Tropical types and multiplicities.
    #[command(subcommand)]
    Tropical(Tropical),
}

#[derive(Subcommand)]
enum Tropical {
    /// Classify a type.
    Classify {
        #[arg(short, long)]
        geometry: PathBuf,
        #[arg(long = "type")]
        ty: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Splitting multiplicity of a gluing or a bend configuration.
    Multiplicity {
        /// Gluing JSON or bend configuration JSON.
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Invalid(wallcross::Error),
    /// The run completed but a check failed.
    Verdict,
}

impl From<wallcross::Error> for Failure {
    fn from(e: wallcross::Error) -> Self {
        Failure::Invalid(e)
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn read_json(path: &Path) -> Run<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(wallcross::Error::InvalidInput(format!("{}: {e}", path.display()))))
}

fn parse_as<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Run<T> {
    serde_json::from_value(v).map_err(|e| Failure::Invalid(wallcross::Error::InvalidInput(format!("{what}: {e}"))))
}

fn complex(path: &Path) -> Run<Arc<ConeComplex>> {
    let g: GeometryInput = parse_as(read_json(path)?, "geometry")?;
    Ok(Arc::new(build_complex(&g)?))
}

fn truncation(path: Option<&Path>, fallback: Option<&Value>) -> Run<Truncation> {
    match (path, fallback) {
        (Some(p), _) => Ok(Truncation::from_json(&read_json(p)?)?),
        (None, Some(v)) => Ok(Truncation::from_json(v)?),
        (None, None) => Err(Failure::Usage("no truncation given and none recorded in the walls file".into())),
    }
}

fn structure(w: &WithWalls) -> Run<WallStructure> {
    let cx = complex(&w.geo.geometry)?;
    let v = read_json(&w.walls)?;
    let tr = truncation(w.geo.truncation.as_deref(), v.get("truncation"))?;
    Ok(WallStructure::from_json(cx, &v, &tr)?)
}

fn ints(s: &str, what: &str) -> Run<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("{what}: expected comma-separated integers, got {s:?}")))
}

fn point(s: &str, cone: usize) -> Run<PointInChart> {
    let coords = parse_vector(s).ok_or_else(|| Failure::Usage(format!("x: expected comma-separated rationals, got {s:?}")))?;
    Ok(PointInChart::new(cone, coords))
}

fn emit(out: Option<&Path>, text: &str) -> Run<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, mut v: Value, seed: u64) -> Run<()> {
    v["schema"] = json!(SCHEMA);
    v["seed"] = json!(seed);
    emit(out, &serde_json::to_string_pretty(&v).expect("json"))
}

fn run(cli: Cli) -> Run<()> {
    let seed = cli.seed;
    let opts = EnumOptions { decorated: false, seed, max_steps: cli.max_steps };
    match cli.command {
        Command::Validate { geo, walls: wpath, counts, grading } => {
            let cx = complex(&geo.geometry)?;
            let mut report = json!({
                "valid": true,
                "n": cx.dim(),
                "divisors": cx.num_divisors(),
                "maximal_cones": cx.maximal_cones(),
                "interior_facets": cx.facets().iter().filter(|f| f.is_interior()).count(),
            });
            let mut s = None;
            if let Some(p) = &counts {
                let tr = truncation(geo.truncation.as_deref(), None)?;
                let entries: Vec<CountEntry> = parse_as(read_json(p)?, "counts")?;
                s = Some(walls::assemble_canonical(cx.clone(), &entries, &tr)?.consolidate()?);
            }
            if let Some(p) = &wpath {
                let v = read_json(p)?;
                let tr = truncation(geo.truncation.as_deref(), v.get("truncation"))?;
                s = Some(WallStructure::from_json(cx.clone(), &v, &tr)?);
            }
            if let Some(s) = &s {
                report["walls"] = json!(s.walls.len());
                report["admissible"] = json!(true);
                if let Some(g) = &grading {
                    let gd: GradingData = parse_as(read_json(g)?, "grading")?;
                    let bad = walls::grading_check(s, &gd)?;
                    report["homogeneous"] = json!(bad.is_empty());
                    report["inhomogeneous_walls"] = json!(bad);
                    if !bad.is_empty() {
                        report["valid"] = json!(false);
                        emit_json(geo.output.as_deref(), report, seed)?;
                        return Err(Failure::Verdict);
                    }
                }
            }
            emit_json(geo.output.as_deref(), report, seed)
        }
        Command::Walls { geo, counts, unmerged } => {
            let cx = complex(&geo.geometry)?;
            let tr = truncation(geo.truncation.as_deref(), None)?;
            let entries: Vec<CountEntry> = parse_as(read_json(&counts)?, "counts")?;
            let mut s = walls::assemble_canonical(cx, &entries, &tr)?;
            if !unmerged {
                s = s.consolidate()?;
            }
            emit_json(geo.output.as_deref(), s.to_json(), seed)
        }
        Command::Theta { w, at } => {
            let s = structure(&w)?;
            let p = ints(&at.p, "p")?;
            let x = point(&at.x, at.cone)?;
            let lines = broken::enumerate(&s, &p, &x, &opts)?;
            emit_json(w.geo.output.as_deref(), broken::lines_json(&s, &p, &x, &lines), seed)
        }
        Command::Alpha { w, p1, p2, r } => {
            let s = structure(&w)?;
            let (p1, p2, r) = (ints(&p1, "p1")?, ints(&p2, "p2")?, ints(&r, "r")?);
            let (value, x) = broken::alpha_trop(&s, &p1, &p2, &r, &opts)?;
            let v = json!({
                "p1": p1, "p2": p2, "r": r,
                "endpoint": {"cone": x.cone, "coords": x.coords.iter().map(fmt_q).collect::<Vec<_>>()},
                "alpha": value.terms_json(),
            });
            emit_json(w.geo.output.as_deref(), v, seed)
        }
        Command::BrokenLines { w, at, decorated } => {
            let s = structure(&w)?;
            let p = ints(&at.p, "p")?;
            let x = point(&at.x, at.cone)?;
            let o = EnumOptions { decorated, ..opts };
            let lines = broken::enumerate(&s, &p, &x, &o)?;
            let mut v = broken::lines_json(&s, &p, &x, &lines);
            if decorated {
                let types = lines
                    .iter()
                    .map(|l| tropical::decorated_to_type(&s, l).map(|t| t.to_json()))
                    .collect::<wallcross::Result<Vec<_>>>()?;
                v["types"] = json!(types);
            }
            emit_json(w.geo.output.as_deref(), v, seed)
        }
        Command::Consistency { w, level, patching } => {
            let s = structure(&w)?;
            let r = walls::refine(&s)?;
            let copts = CheckOptions { seed, max_steps: cli.max_steps, pset: None };
            let reports = CheckerRegistry::default().check_all(&r, &level, &copts)?;
            let mut v = consistency::reports_json(&reports);
            let mut pass = reports.iter().all(|r| r.pass);
            if patching {
                let pr = consistency::patching_check(&r, &consistency::default_pset(r.complex()), &copts)?;
                pass &= pr.passed();
                v["patching"] = pr.to_json();
            }
            v["pass"] = json!(pass);
            emit_json(w.geo.output.as_deref(), v, seed)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Verdict)
            }
        }
        Command::Scatter { w, cone, joint, max_weight } => {
            let s = structure(&w)?;
            let rays = joint.split(';').map(|r| ints(r, "joint")).collect::<Run<Vec<_>>>()?;
            let done = consistency::complete_codim0(&s, cone, &rays, max_weight)?;
            let added: Vec<Value> = done.walls[s.walls.len().min(done.walls.len())..].iter().map(|w| w.to_json()).collect();
            let mut v = done.to_json();
            v["added"] = json!(added);
            v["joint"] = consistency::joint_json(&done, cone, &rays);
            emit_json(w.geo.output.as_deref(), v, seed)
        }
        Command::Render { w, joint, p, x, cone } => {
            let s = structure(&w)?;
            let s = match joint {
                Some(j) => {
                    let r = walls::refine(&s)?;
                    if j >= r.joints.len() {
                        return Err(Failure::Usage(format!("joint {j} does not exist")));
                    }
                    consistency::localize_at_joint(&r, j)?
                }
                None => s,
            };
            let lines = match (p, x) {
                (Some(p), Some(x)) => broken::enumerate(&s, &ints(&p, "p")?, &point(&x, cone)?, &opts)?,
                (None, None) => Vec::new(),
                _ => return Err(Failure::Usage("--p and --x go together".into())),
            };
            emit(w.geo.output.as_deref(), &render_svg(&s, &lines)?)
        }
        Command::Tropical(Tropical::Classify { geometry, ty, output }) => {
            let cx = complex(&geometry)?;
            let t = TropicalType::from_json(&read_json(&ty)?)?;
            let c = tropical::classify(&t, &cx)?;
            emit_json(output.as_deref(), c.to_json(), seed)
        }
        Command::Tropical(Tropical::Multiplicity { input, output }) => {
            let v = read_json(&input)?;
            let mut body = v.clone();
            if let Some(o) = body.as_object_mut() {
                o.remove("schema");
            }
            if v.get("delta").is_some() {
                let cfg: BendConfig = parse_as(body, "bend configuration")?;
                emit_json(output.as_deref(), tropical::multiplicity_json(&cfg)?, seed)
            } else {
                let g: Gluing = parse_as(body, "gluing")?;
                let m = tropical::splitting_multiplicity(&g)?;
                let out = json!({
                    "index": m.index.to_string(),
                    "dim_tau": m.dim_tau,
                    "dimension_formula": m.dimension_formula,
                    "multiplicity": if m.dimension_formula { json!(m.index.to_string()) } else { json!("0") },
                });
                emit_json(output.as_deref(), out, seed)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", json!({"schema": SCHEMA, "error": "usage", "message": msg}));
            ExitCode::from(2)
        }
        Err(Failure::Invalid(e)) => {
            let kind = format!("{e:?}");
            let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
            eprintln!("{}", json!({"schema": SCHEMA, "error": kind, "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}
