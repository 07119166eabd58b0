use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use lsnav::bounds::{ls_upper_bound, product_spheres_bound, unit_tangent_bound, BoundInput, BoundResult};
use lsnav::embed::{ConstraintField, ManifoldSpec};
use lsnav::fiber::{sigma_u_planner, FiberTuple, UtField};
use lsnav::flow::{detect_critical, CriticalComponent, FlowConfig, HeightField, ScalarField, SearchMode};
use lsnav::navfun::{classify_sphere_critical, find_parallel_pairs, Classification, NavField, NavTuple, PairCensus, PairSearch};
use lsnav::planner::{plan_product_odd_spheres, PathSpec};
use lsnav::verify::{run_criterion, CriterionReport, CRITERIA};

#[derive(Parser, Debug)]
#[command(name = "lsnav", version, about = "Pseudo-gradient flows, navigation functions and motion planners on embedded manifolds")]
struct Cli {
    /// RNG seed for seed sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Locate critical values of a function by multistart pseudo-gradient
    /// flow: the navigation function F_r on M^r, f(x1, x2) = <x2, i x1> on
    /// the unit tangent bundle, or a height function.
    Critfind(CritfindArgs),
    /// Build a motion planner section through a critical tuple: the explicit
    /// planner on a product of odd spheres, or the fibrewise planner on the
    /// unit tangent bundle.
    Plan(PlanArgs),
    /// Count parallel critical pairs (x, y) of a hypersurface, where the
    /// chord x - y is normal at both ends.
    Pairs(PairsArgs),
    /// Aggregate critical values and subspace complexities into an upper
    /// bound for sequential topological complexity.
    Bound(BoundArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldKind {
    Nav,
    UtF,
    Height,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Search {
    Descent,
    Stationary,
    Both,
}

#[derive(Args, Debug)]
struct CritfindArgs {
    #[arg(long, value_enum)]
    field: FieldKind,
    /// sphere:N, product:a,b,.., ellipsoid:a,b,c, torus:R,r, stiefel:2n,
    /// inline JSON or @file.
    #[arg(long)]
    manifold: Option<String>,
    /// Number of slots for the navigation function.
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Half the ambient dimension for ut-f when no manifold is given.
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    seeds: usize,
    #[arg(long, value_enum, default_value_t = Search::Both)]
    search: Search,
    #[arg(long, default_value_t = 1e-2)]
    step: f64,
    #[arg(long, default_value_t = 200.0)]
    max_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlannerKind {
    Product,
    SigmaU,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// JSON array of coordinate arrays, one per slot.
    #[arg(long)]
    tuple: PathBuf,
    /// Base manifold of the tuple; required for the product planner.
    #[arg(long)]
    manifold: Option<String>,
    /// Defaults to sigma-u for 2-frames and product otherwise.
    #[arg(long, value_enum)]
    planner: Option<PlannerKind>,
    /// Samples per unit time in CSV output.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Tolerance for reading off the sign pattern of the tuple.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug)]
struct PairsArgs {
    /// Semiaxes a,b,c,..
    #[arg(long, conflicts_with = "manifold")]
    ellipsoid: Option<String>,
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    seeds: usize,
    #[arg(long, default_value_t = 1e-3)]
    dedup_tol: f64,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["unit_tangent", "product", "input"]))]
struct BoundArgs {
    /// Closed form for the unit tangent bundle of S^(4m-1).
    #[arg(long, requires = "m")]
    unit_tangent: bool,
    /// Closed form for a product of k odd spheres.
    #[arg(long, requires = "k")]
    product: bool,
    /// BoundInput JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Only critical values up to this level count.
    #[arg(long, default_value_t = f64::INFINITY)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Criterion ids to run (default all).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<usize>,
}

enum CliError {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

struct Rendered {
    json: Value,
    csv: Option<String>,
    text: String,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", <Cli as clap::CommandFactory>::command().render_usage());
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("LSNAV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("LSNAV_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("LSNAV_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> CliResult<bool> {
    let out = match &cli.command {
        Command::Critfind(a) => critfind(a, cli.seed)?,
        Command::Plan(a) => plan(a)?,
        Command::Pairs(a) => pairs(a, cli.seed)?,
        Command::Bound(a) => bound(a)?,
        Command::Verify(a) => verify(a)?,
    };
    let body = match cli.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&out.json).map_err(|e| CliError::Domain(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => out.csv.ok_or_else(|| CliError::Usage("csv output is not available for this subcommand".into()))?,
        Format::Text => out.text,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Domain(format!("IoError: {}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    Ok(out.ok)
}

fn envelope<T: Serialize>(command: &str, payload: &T) -> CliResult<Value> {
    let mut v = serde_json::to_value(payload).map_err(|e| CliError::Domain(e.to_string()))?;
    let mut obj = serde_json::Map::new();
    obj.insert("schema".into(), json!("v1"));
    obj.insert("command".into(), json!(command));
    match v.take() {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Ok(Value::Object(obj))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} list {s:?}"))))
        .collect()
}

/// Parse a manifold argument.
fn parse_manifold(s: &str) -> CliResult<ManifoldSpec> {
    let s = s.trim();
    let spec = if let Some(path) = s.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
        ManifoldSpec::from_json(&text)?
    } else if s.starts_with('{') {
        ManifoldSpec::from_json(s)?
    } else {
        let (head, arg) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("unrecognised manifold {s:?}")))?;
        match head {
            "sphere" => ManifoldSpec::sphere(parse_list::<usize>(arg, "dimension")?[0]),
            "product" => ManifoldSpec::product(&parse_list::<usize>(arg, "dimension")?),
            "ellipsoid" => ManifoldSpec::ellipsoid(&parse_list::<f64>(arg, "semiaxis")?),
            "torus" => match parse_list::<f64>(arg, "radius")?[..] {
                [major, minor] => ManifoldSpec::Hypersurface { field: ConstraintField::Torus { major }, level: minor * minor },
                _ => return Err(CliError::Usage("torus takes R,r".into())),
            },
            "stiefel" => ManifoldSpec::StiefelV2 { ambient: parse_list::<usize>(arg, "dimension")?[0] },
            _ => return Err(CliError::Usage(format!("unrecognised manifold kind {head:?}"))),
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn require_manifold(m: &Option<String>, cmd: &str) -> CliResult<ManifoldSpec> {
    match m {
        Some(s) => parse_manifold(s),
        None => Err(CliError::Usage(format!("{cmd} needs --manifold"))),
    }
}

#[derive(Serialize)]
struct CritfindReport<'a> {
    field: &'static str,
    manifold: &'a ManifoldSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    seeds: usize,
    seed: u64,
    values: Vec<f64>,
    components: &'a [CriticalComponent],
}

fn critfind(a: &CritfindArgs, seed: u64) -> CliResult<Rendered> {
    let cfg = FlowConfig {
        step: a.step,
        max_time: a.max_time,
        search: match a.search {
            Search::Descent => SearchMode::Descent,
            Search::Stationary => SearchMode::Stationary,
            Search::Both => SearchMode::Both,
        },
        ..FlowConfig::default()
    };
    cfg.validate()?;
    let (field, name, r): (Box<dyn ScalarField>, &str, Option<usize>) = match a.field {
        FieldKind::Nav => {
            let base = require_manifold(&a.manifold, "critfind --field nav")?;
            (Box::new(NavField::new(base, a.r)?), "nav", Some(a.r))
        }
        FieldKind::UtF => {
            let n = match &a.manifold {
                Some(s) => match parse_manifold(s)? {
                    ManifoldSpec::StiefelV2 { ambient } => ambient / 2,
                    other => return Err(CliError::Domain(format!("WrongSpec: ut-f lives on stiefel:2n, got {other:?}"))),
                },
                None => a.n,
            };
            (Box::new(UtField::new(n)), "ut-f", None)
        }
        FieldKind::Height => {
            let spec = require_manifold(&a.manifold, "critfind --field height")?;
            (Box::new(HeightField { spec }), "height", None)
        }
    };
    let spec = field.manifold().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Vec<f64>> = (0..a.seeds).map(|_| spec.random_point(&mut rng)).collect();
    let comps = detect_critical(field.as_ref(), &seeds, &cfg)?;
    let mut values: Vec<f64> = comps.iter().map(|c| c.value).collect();
    values.dedup_by(|x, y| (*x - *y).abs() <= 10.0 * cfg.cluster_tol);
    let report = CritfindReport { field: name, manifold: &spec, r, seeds: a.seeds, seed, values: values.clone(), components: &comps };
    let mut csv = String::from("component,value,label,representatives");
    for k in 0..spec.ambient_dim() * r.unwrap_or(1) {
        let _ = write!(csv, ",x{k}");
    }
    csv.push('\n');
    for (i, c) in comps.iter().enumerate() {
        let label = serde_json::to_string(&c.label).unwrap_or_default().replace('"', "'");
        let coords: Vec<String> = c.representatives[0].iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(csv, "{i},{:.12e},\"{label}\",{},{}", c.value, c.representatives.len(), coords.join(","));
    }
    let mut text = format!("{name}: {} components from {} seeds\n", comps.len(), a.seeds);
    for c in &comps {
        let _ = writeln!(text, "  value {:>12.6}  representatives {}", c.value, c.representatives.len());
    }
    let _ = writeln!(text, "critical values: {values:?}");
    Ok(Rendered { json: envelope("critfind", &report)?, csv: Some(csv), text, ok: true })
}

fn read_tuple(path: &PathBuf) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: expected a JSON array of coordinate arrays: {e}", path.display())))
}

fn plan(a: &PlanArgs) -> CliResult<Rendered> {
    let points = read_tuple(&a.tuple)?;
    let manifold = a.manifold.as_deref().map(parse_manifold).transpose()?;
    let kind = a.planner.unwrap_or(match manifold {
        Some(ManifoldSpec::StiefelV2 { .. }) => PlannerKind::SigmaU,
        _ => PlannerKind::Product,
    });
    let r = points.len();
    let path: PathSpec = match kind {
        PlannerKind::SigmaU => sigma_u_planner(&FiberTuple::new(points)?)?,
        PlannerKind::Product => {
            let base = manifold.ok_or_else(|| CliError::Usage("the product planner needs --manifold".into()))?;
            let t = NavTuple::new(base, points)?;
            match classify_sphere_critical(&t, a.tol)? {
                Classification::Critical { pattern } => plan_product_odd_spheres(&t, &pattern)?,
                Classification::Rejected { slope, .. } => {
                    return Err(CliError::Domain(format!("NotCritical: tuple is not a sign-pattern tuple (gradient norm {slope:.3e})")))
                }
            }
        }
    };
    let csv = path.to_csv(a.samples)?;
    let segments: usize = path.blocks.iter().map(|b| b.segments.len()).sum();
    let text = format!("planner section with {} blocks and {segments} segments over {r} slots\n", path.blocks.len());
    let planner = match kind {
        PlannerKind::Product => "product",
        PlannerKind::SigmaU => "sigma-u",
    };
    Ok(Rendered { json: envelope("plan", &json!({ "planner": planner, "r": r, "path": path }))?, csv: Some(csv), text, ok: true })
}

fn pairs(a: &PairsArgs, seed: u64) -> CliResult<Rendered> {
    let spec = match (&a.ellipsoid, &a.manifold) {
        (Some(axes), _) => {
            let spec = ManifoldSpec::ellipsoid(&parse_list::<f64>(axes, "semiaxis")?);
            spec.validate()?;
            spec
        }
        (None, m) => require_manifold(m, "pairs")?,
    };
    let search = PairSearch { seeds: a.seeds, seed, dedup_tol: a.dedup_tol, ..PairSearch::default() };
    let census: PairCensus = find_parallel_pairs(&spec, &search)?;
    let mut csv = String::from("pair,value,alignment_residual");
    let d = spec.ambient_dim();
    for k in 0..d {
        let _ = write!(csv, ",x{k}");
    }
    for k in 0..d {
        let _ = write!(csv, ",y{k}");
    }
    csv.push('\n');
    for (i, p) in census.pairs.iter().enumerate() {
        let coords: Vec<String> = p.x.iter().chain(&p.y).map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(csv, "{i},{:.12e},{:.3e},{}", p.value, p.alignment_residual, coords.join(","));
    }
    let alpha = serde_json::to_string(&census.alpha).unwrap_or_default();
    let text = format!(
        "alpha = {alpha} ({:?}); {} seeds, {} converged, {} distinct\n",
        census.status, census.stats.seeds, census.stats.converged, census.stats.distinct
    );
    Ok(Rendered { json: envelope("pairs", &json!({ "manifold": spec, "census": &census, "alpha": census.alpha }))?, csv: Some(csv), text, ok: true })
}

fn bound(a: &BoundArgs) -> CliResult<Rendered> {
    let result: BoundResult = if a.unit_tangent {
        unit_tangent_bound(a.m.unwrap_or(1), a.r)?
    } else if a.product {
        product_spheres_bound(a.k.unwrap_or(1), a.r)?
    } else {
        let path = a.input.as_ref().ok_or_else(|| CliError::Usage("bound needs a mode".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let input: BoundInput = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a BoundInput: {e}", path.display())))?;
        ls_upper_bound(&input, a.lambda)?
    };
    let mut csv = String::from("value,components,contribution\n");
    for e in &result.breakdown {
        let _ = writeln!(csv, "{},{},{}", e.value, e.components, e.contribution);
    }
    Ok(Rendered { json: envelope("bound", &result)?, csv: Some(csv), text: result.table(), ok: true })
}

fn verify(a: &VerifyArgs) -> CliResult<Rendered> {
    let ids: Vec<usize> = if a.criteria.is_empty() { (1..=CRITERIA).collect() } else { a.criteria.clone() };
    if let Some(bad) = ids.iter().find(|i| !(1..=CRITERIA).contains(*i)) {
        return Err(CliError::Usage(format!("criterion ids are 1..={CRITERIA}, got {bad}")));
    }
    let reports: Vec<CriterionReport> = ids.iter().map(|&i| run_criterion(i)).collect();
    let ok = reports.iter().all(|r| r.passed);
    let mut text = String::new();
    let mut csv = String::from("id,name,passed,elapsed_secs,detail\n");
    for r in &reports {
        let _ = writeln!(text, "{}", r.line());
        let _ = writeln!(csv, "{},\"{}\",{},{:.3},\"{}\"", r.id, r.name, r.passed, r.elapsed_secs, r.detail.replace('"', "'"));
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    let _ = writeln!(text, "{passed}/{} criteria passed", reports.len());
    Ok(Rendered { json: envelope("verify", &json!({ "passed": ok, "criteria": reports }))?, csv: Some(csv), text, ok })
}
