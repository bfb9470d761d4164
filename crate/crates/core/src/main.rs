use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use orthomotion::harness::{run_suite, streams::fold_paths, SuiteConfig, TestReport};
use orthomotion::pdecheck::{
    convergence_order, reference_case, reference_rate, PDEKind, Perturbed,
};
use orthomotion::planar::{
    boundary_density, diagonal_density, l1_distance_density, marginal_singular, singular_masses,
    DecompositionSampler, Endpoint, JointDensity, MarginalDensity, MarginalSampler, MotionSpec,
    PathRecord, PlanarSampler, Variant,
};
use orthomotion::rates::RateFunction;
use orthomotion::telegraph::telegraph_density_const;
use orthomotion::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_SEED: u64 = 2026;

#[derive(Parser, Debug)]
#[command(
    name = "orthomotion",
    version,
    about = "Planar random motions with orthogonal directions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed.
    #[arg(long, global = true, env = "ORTHOMOTION_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample endpoints or full paths.
    Simulate(SimulateArgs),
    /// Tabulate a closed-form law on a grid.
    Density(DensityArgs),
    /// Run the validation battery.
    Validate(ValidateArgs),
    /// Finite-difference convergence checks of the governing equations.
    PdeCheck(PdeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MotionArgs {
    /// standard, reflecting, uniform, q-standard or q-reflecting.
    #[arg(long, default_value = "standard")]
    variant: String,
    /// Rate, e.g. const:1, tanh:2, coth:1.5, foong:1.
    #[arg(long, default_value = "const:1")]
    rate: String,
    /// Common speed.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Horizontal speed (overrides --c).
    #[arg(long)]
    cx: Option<f64>,
    /// Vertical speed (overrides --c).
    #[arg(long)]
    cy: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Switching probability of the q-variants.
    #[arg(long)]
    q: Option<f64>,
}

impl MotionArgs {
    fn spec(&self) -> orthomotion::Result<MotionSpec> {
        let variant = Variant::parse(&self.variant, self.q)?;
        let rate: RateFunction = self.rate.parse()?;
        MotionSpec::new(
            variant,
            self.cx.unwrap_or(self.c),
            self.cy.unwrap_or(self.c),
            rate,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Direct,
    Decomposition,
    Marginal,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    motion: MotionArgs,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    method: Method,
    /// Write every switching event instead of endpoints (direct method).
    #[arg(long)]
    paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Law {
    Joint,
    Boundary,
    Diagonal,
    L1,
    Marginal,
    Telegraph,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    motion: MotionArgs,
    #[arg(long, value_enum, default_value_t = Law::Joint)]
    law: Law,
    /// Grid points per axis. Planar grids are nodes over [-ct, ct]; line
    /// grids are cell midpoints.
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ValidateArgs {
    /// 10^5 paths per sample instead of 10^6.
    #[arg(long)]
    quick: bool,
    /// Test names or group prefixes, comma separated.
    #[arg(long, value_delimiter = ',')]
    tests: Option<Vec<String>>,
    /// Paths per sample (overrides the mode default).
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PdeArgs {
    /// Equation kinds, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    kind: Option<Vec<String>>,
    /// Constant rate (default: per-kind reference rate).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Grid spacings, a geometric sequence of at least three terms.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.01, 0.005])]
    h: Vec<f64>,
    /// Add 0.01 x^2 to each field as a negative control.
    #[arg(long)]
    perturbed: bool,
    /// Smallest accepted order.
    #[arg(long, default_value_t = 1.8)]
    min_order: f64,
}

/// Failure with its exit code: 2 for usage errors, 1 otherwise.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 2,
            Error::Test { source, .. } if matches!(**source, Error::Config(_)) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Density(a) => density(cli, a),
        Command::Validate(a) => validate(cli, a),
        Command::PdeCheck(a) => pde_check(cli, a),
    }
}

fn header(command: &str, config: &impl Serialize, seed: Option<u64>, format: Format) -> Value {
    let mut h = json!({
        "program": "orthomotion",
        "version": VERSION,
        "command": command,
        "config": config,
        "format": format,
    });
    if let Some(s) = seed {
        h["seed"] = json!(s);
    }
    h
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// CSV output starts with the header as one `#` comment line.
fn write_csv_header(w: &mut dyn Write, header: &Value) -> io::Result<()> {
    writeln!(
        w,
        "# {}",
        serde_json::to_string(header).expect("serializable header")
    )
}

fn write_json(w: &mut dyn Write, doc: &Value) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *w, doc)?;
    writeln!(w)?;
    Ok(())
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let spec = a.motion.spec()?;
    let t = a.motion.t;
    let hdr = header("simulate", a, Some(cli.seed), cli.format);
    let mut w = open_output(cli.output.as_deref())?;
    if a.paths {
        let sampler = PlanarSampler::new(&spec, t)?;
        let paths = collect(a.n, cli.seed, |rng| sampler.path(rng))?;
        match cli.format {
            Format::Csv => {
                write_csv_header(&mut *w, &hdr)?;
                PathRecord::write_csv(&paths, &mut w)?;
            }
            Format::Json => write_json(&mut *w, &json!({ "header": hdr, "paths": paths }))?,
        }
    } else if a.method == Method::Marginal {
        let sampler = MarginalSampler::new(&spec, t)?;
        let draws = collect(a.n, cli.seed, |rng| sampler.sample(rng))?;
        match cli.format {
            Format::Csv => {
                write_csv_header(&mut *w, &hdr)?;
                writeln!(w, "path_id,x,velocity,events")?;
                for (i, s) in draws.iter().enumerate() {
                    writeln!(w, "{i},{},{},{}", s.position, s.velocity, s.events)?;
                }
            }
            Format::Json => write_json(&mut *w, &json!({ "header": hdr, "samples": draws }))?,
        }
    } else {
        let ends: Vec<Endpoint> = match a.method {
            Method::Direct => {
                let s = PlanarSampler::new(&spec, t)?;
                collect(a.n, cli.seed, |rng| s.endpoint(rng))?
            }
            _ => {
                let s = DecompositionSampler::new(&spec, t)?;
                collect(a.n, cli.seed, |rng| s.endpoint(rng))?
            }
        };
        match cli.format {
            Format::Csv => {
                write_csv_header(&mut *w, &hdr)?;
                writeln!(w, "path_id,x,y,direction,region,events")?;
                for (i, e) in ends.iter().enumerate() {
                    let s = e.state;
                    writeln!(
                        w,
                        "{i},{},{},{},{},{}",
                        s.x,
                        s.y,
                        s.direction,
                        e.region.label(),
                        e.events
                    )?;
                }
            }
            Format::Json => write_json(&mut *w, &json!({ "header": hdr, "endpoints": ends }))?,
        }
    }
    w.flush()?;
    Ok(true)
}

/// Draws `n` items, path i from stream i.
fn collect<T, F>(n: u64, seed: u64, draw: F) -> orthomotion::Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> orthomotion::Result<T> + Sync,
{
    fold_paths(
        n,
        seed,
        Vec::new,
        |v, rng| {
            v.push(draw(rng)?);
            Ok(())
        },
        |a, b| a.extend(b),
    )
}

fn density(cli: &Cli, a: &DensityArgs) -> Outcome {
    if a.grid < 2 {
        return Err(Error::Config("--grid needs at least 2 points".into()).into());
    }
    let spec = a.motion.spec()?;
    let t = a.motion.t;
    let n = a.grid;
    let mut columns = vec!["x", "density"];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut masses = json!({});
    let line = |lo: f64, hi: f64| (0..n).map(move |i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64);
    match a.law {
        Law::Joint => {
            let d = JointDensity::new(&spec, t)?;
            columns = vec!["x", "y", "density"];
            let (xt, yt) = (spec.c_x * t, spec.c_y * t);
            for i in 0..n {
                let x = -xt + 2.0 * xt * i as f64 / (n - 1) as f64;
                for j in 0..n {
                    let y = -yt + 2.0 * yt * j as f64 / (n - 1) as f64;
                    let inside = x.abs() / xt + y.abs() / yt < 1.0;
                    rows.push(vec![x, y, if inside { d.eval(x, y)? } else { 0.0 }]);
                }
            }
            masses = json!(singular_masses(&spec, t));
        }
        Law::Boundary | Law::Diagonal => {
            let ct = spec.speed()? * t;
            columns = vec![if a.law == Law::Boundary { "eta" } else { "x" }, "density"];
            for x in line(-ct, ct) {
                let v = if a.law == Law::Boundary {
                    boundary_density(&spec, x, t)?
                } else {
                    diagonal_density(&spec, x, t)?
                };
                rows.push(vec![x, v]);
            }
            masses = json!(singular_masses(&spec, t));
        }
        Law::L1 => {
            let ct = spec.speed()? * t;
            columns = vec!["z", "density"];
            for z in line(0.0, ct) {
                rows.push(vec![z, l1_distance_density(&spec, z, t)?]);
            }
            masses = json!(singular_masses(&spec, t));
        }
        Law::Marginal => {
            let ct = spec.speed()? * t;
            let d = MarginalDensity::new(&spec, t)?;
            for x in line(-ct, ct) {
                rows.push(vec![x, if x == 0.0 { f64::NAN } else { d.eval(x)? }]);
            }
            masses = json!(marginal_singular(&spec, t));
        }
        Law::Telegraph => {
            let c = spec.speed()?;
            let lambda = spec
                .rate
                .as_constant()
                .ok_or_else(|| Error::UnsupportedRate(spec.rate.to_string()))?;
            let d = telegraph_density_const(lambda, c, t)?;
            for x in line(-c * t, c * t) {
                rows.push(vec![x, d.ac(x)?]);
            }
            masses = json!({ "atoms": d.atoms });
        }
    }
    let mut hdr = header("density", a, None, cli.format);
    hdr["singular"] = masses.clone();
    if let Some(p) = &cli.output {
        let mut side = p.clone().into_os_string();
        side.push(".masses.json");
        let mut f = BufWriter::new(File::create(PathBuf::from(side))?);
        write_json(
            &mut f,
            &json!({ "header": header("density", a, None, Format::Json), "singular": masses }),
        )?;
        f.flush()?;
    }
    let mut w = open_output(cli.output.as_deref())?;
    match cli.format {
        Format::Csv => {
            write_csv_header(&mut *w, &hdr)?;
            writeln!(w, "{}", columns.join(","))?;
            for r in &rows {
                let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let points: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        columns
                            .iter()
                            .zip(r)
                            .map(|(k, v)| (k.to_string(), json!(v)))
                            .collect(),
                    )
                })
                .collect();
            write_json(&mut *w, &json!({ "header": hdr, "points": points }))?;
        }
    }
    w.flush()?;
    Ok(true)
}

fn validate(cli: &Cli, a: &ValidateArgs) -> Outcome {
    let mut config = SuiteConfig::new(cli.seed, a.quick);
    config.tests = a.tests.clone();
    if let Some(n) = a.n {
        config.paths = n;
    }
    let reports = run_suite(&config)?;
    let all_pass = reports
        .iter()
        .all(|r| r.pass || r.kind == orthomotion::harness::TestKind::Report);
    let asserted = reports
        .iter()
        .filter(|r| r.kind != orthomotion::harness::TestKind::Report)
        .count();
    let mut hdr = header("validate", &config, Some(cli.seed), cli.format);
    hdr["p_threshold"] = json!(orthomotion::harness::P_THRESHOLD);
    hdr["z_threshold"] = json!(orthomotion::harness::Z_THRESHOLD);
    hdr["note"] = json!(format!(
        "each test is run at its own level; a Bonferroni bound over {asserted} asserted tests gives a family-wise level of {:.3}",
        orthomotion::harness::P_THRESHOLD * asserted as f64
    ));
    hdr["all_pass"] = json!(all_pass);
    let mut w = open_output(cli.output.as_deref())?;
    match cli.format {
        Format::Json => write_json(&mut *w, &json!({ "header": hdr, "reports": reports }))?,
        Format::Csv => {
            write_csv_header(&mut *w, &hdr)?;
            write_reports_csv(&mut *w, &reports)?;
        }
    }
    w.flush()?;
    Ok(all_pass)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn write_reports_csv(w: &mut dyn Write, reports: &[TestReport]) -> io::Result<()> {
    writeln!(
        w,
        "name,kind,statistic,dof,p_value,z_score,threshold,pass,seed,n,bins"
    )?;
    for r in reports {
        let kind = serde_json::to_value(r.kind).expect("serializable kind");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            kind.as_str().unwrap_or_default(),
            r.statistic,
            opt(&r.dof),
            opt(&r.p_value),
            opt(&r.z_score),
            r.threshold,
            r.pass,
            r.seed,
            r.n,
            opt(&r.bins)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PdeRow {
    kind: String,
    lambda: f64,
    h_list: Vec<f64>,
    residuals: Vec<f64>,
    fitted_order: f64,
    monotone: bool,
    pass: bool,
}

fn pde_check(cli: &Cli, a: &PdeArgs) -> Outcome {
    let kinds: Vec<PDEKind> = match &a.kind {
        None => PDEKind::ALL.to_vec(),
        Some(names) => names
            .iter()
            .map(|s| s.parse())
            .collect::<orthomotion::Result<_>>()?,
    };
    let mut rows = Vec::new();
    for kind in kinds {
        let lambda = a.lambda.unwrap_or_else(|| reference_rate(kind));
        let case = reference_case(kind, lambda, a.c)?;
        let result = if a.perturbed {
            convergence_order(
                &case.form,
                &Perturbed {
                    inner: case.field,
                    eps: 0.01,
                },
                &case.bx,
                &a.h,
            )
        } else {
            convergence_order(&case.form, case.field.as_ref(), &case.bx, &a.h)
        };
        let row = match result {
            Ok(r) => PdeRow {
                kind: kind.to_string(),
                lambda,
                pass: r.fitted_order >= a.min_order,
                h_list: r.h_list,
                residuals: r.residuals,
                fitted_order: r.fitted_order,
                monotone: true,
            },
            Err(Error::NonMonotone {
                h_list,
                residuals,
                fitted_order,
            }) => PdeRow {
                kind: kind.to_string(),
                lambda,
                h_list,
                residuals,
                fitted_order,
                monotone: false,
                pass: false,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    let all_pass = rows.iter().all(|r| r.pass);
    let mut hdr = header("pde-check", a, None, cli.format);
    hdr["all_pass"] = json!(all_pass);
    let mut w = open_output(cli.output.as_deref())?;
    match cli.format {
        Format::Json => write_json(&mut *w, &json!({ "header": hdr, "checks": rows }))?,
        Format::Csv => {
            write_csv_header(&mut *w, &hdr)?;
            writeln!(w, "kind,lambda,h,residual,fitted_order,monotone,pass")?;
            for r in &rows {
                for (h, res) in r.h_list.iter().zip(&r.residuals) {
                    writeln!(
                        w,
                        "{},{},{h},{res},{},{},{}",
                        r.kind, r.lambda, r.fitted_order, r.monotone, r.pass
                    )?;
                }
            }
        }
    }
    w.flush()?;
    Ok(all_pass)
}
