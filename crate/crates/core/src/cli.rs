//! Command-line front end.
//!
//! Exit codes: 0 when every asserted margin passes, 1 when a margin fails or
//! a computation errors, 2 when `ζ` is closer than [`REFUSAL_RADIUS`] to
//! `σ(u) ∩ 𝕋`, 64 on usage and parse errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::clark::{ClarkMeasure, Window};
use crate::error::MslabError;
use crate::format::{sig17, to_json_string};
use crate::inner::{parse_complex, BoundaryPoint, InnerFunction};
use crate::modelspace::{clark_onb, tm_basis, CircleQuadrature};
use crate::qop::{q_matrix_clark, q_matrix_quadrature, OperatorMatrix};
use crate::verify::{
    bound_report, run_all, run_lower_bound_suite, run_suite, theta_grid, truncation_study, Suite, SuiteReport,
    VerifyOptions, DEFAULT_SCHEDULE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SPECTRUM: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
/// Minimum distance between `ζ` and `σ(u) ∩ 𝕋`.
pub const REFUSAL_RADIUS: f64 = 1e-6;
pub const DEFAULT_SINGULAR_WINDOW: usize = 16;
const DEFAULT_QUAD_NODES: usize = 4096;
const DEFAULT_SCAN_POINTS: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "mslab", version, about = "Difference quotients on model spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Inner function, e.g. "blaschke:0.5,0.2+0.1i;factor=i" or "singular:xi=0,s=1"
    #[arg(long, global = true)]
    pub inner: Option<String>,
    /// Base point angle in radians
    #[arg(long, global = true, allow_hyphen_values = true, conflicts_with = "zeta_deg")]
    pub zeta_rad: Option<f64>,
    /// Base point angle in degrees
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub zeta_deg: Option<f64>,
    /// Circle quadrature nodes (power of two in [256, 65536])
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
    /// Symmetric atom window K for the singular family
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Comma-separated, strictly increasing window schedule
    #[arg(long, global = true)]
    pub schedule: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads
    #[arg(long, global = true, env = "MSLAB_THREADS")]
    pub threads: Option<usize>,
    /// JSON file mirroring these flags; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProvenanceChoice {
    Lemma,
    Quadrature,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisChoice {
    Clark,
    Tm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted spectrum of Q checked against the matrix
    Spectrum,
    /// Clark atoms for α = u(ζ)
    Clark,
    /// Dump the matrix of Q
    Qmatrix {
        #[arg(long, value_enum, default_value = "both")]
        provenance: ProvenanceChoice,
        /// Basis for the quadrature route
        #[arg(long, value_enum, default_value = "clark")]
        basis: BasisChoice,
    },
    /// ‖Q‖ with its lower bounds; the norm is on the first line
    Norm,
    /// Run a verification suite, or all that apply
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Bound reports over a uniform θ grid
    Scan {
        #[arg(long, default_value_t = DEFAULT_SCAN_POINTS)]
        points: usize,
    },
    /// ‖Q_K‖ along the window schedule
    Truncation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    inner: Option<String>,
    zeta_rad: Option<f64>,
    zeta_deg: Option<f64>,
    quad_nodes: Option<usize>,
    window: Option<usize>,
    schedule: Option<ScheduleValue>,
    format: Option<Format>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScheduleValue {
    List(Vec<usize>),
    Text(String),
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub inner: Option<InnerFunction>,
    pub zeta: Option<BoundaryPoint>,
    pub quad_nodes: usize,
    pub window: Option<usize>,
    pub schedule: Vec<usize>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Outcome of a command before it is mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Spectrum(String),
    Error(MslabError),
}

impl From<MslabError> for Failure {
    fn from(e: MslabError) -> Self {
        match e {
            MslabError::Parse(_) | MslabError::Argument(_) => Failure::Usage(e.to_string()),
            other => Failure::Error(other),
        }
    }
}

type CmdResult = std::result::Result<bool, Failure>;

fn parse_schedule(s: &str) -> std::result::Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Failure::Usage(format!("bad schedule entry '{t}'")))
        })
        .collect()
}

fn resolve(args: &CommonArgs) -> std::result::Result<CliConfig, Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let inner = match args.inner.clone().or(file.inner) {
        Some(s) => Some(s.parse::<InnerFunction>()?),
        None => None,
    };
    // a command-line angle in either unit overrides both file angles
    let (rad, deg) = if args.zeta_rad.is_some() || args.zeta_deg.is_some() {
        (args.zeta_rad, args.zeta_deg)
    } else {
        (file.zeta_rad, file.zeta_deg)
    };
    let zeta = match (rad, deg) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give ζ in radians or degrees, not both".into())),
        (Some(r), None) => Some(r),
        (None, Some(d)) => Some(d.to_radians()),
        (None, None) => None,
    };
    if let Some(z) = zeta {
        if !z.is_finite() {
            return Err(Failure::Usage(format!("ζ angle {z} is not finite")));
        }
    }
    let quad_nodes = args.quad_nodes.or(file.quad_nodes).unwrap_or(DEFAULT_QUAD_NODES);
    if !quad_nodes.is_power_of_two() || !(256..=65536).contains(&quad_nodes) {
        return Err(Failure::Usage(format!(
            "--quad-nodes {quad_nodes} must be a power of two in [256, 65536]"
        )));
    }
    let schedule = match (&args.schedule, file.schedule) {
        (Some(s), _) => parse_schedule(s)?,
        (None, Some(ScheduleValue::Text(s))) => parse_schedule(&s)?,
        (None, Some(ScheduleValue::List(v))) => v,
        (None, None) => DEFAULT_SCHEDULE.to_vec(),
    };
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Usage("schedule must be non-empty and strictly increasing".into()));
    }
    Ok(CliConfig {
        inner,
        zeta: zeta.map(BoundaryPoint::new),
        quad_nodes,
        window: args.window.or(file.window),
        schedule,
        format: args.format.or(file.format),
        output: args.output.clone().or(file.output),
        seed: args.seed.or(file.seed).unwrap_or(1),
        threads: args.threads.or(file.threads),
    })
}

impl CliConfig {
    fn inner(&self) -> std::result::Result<&InnerFunction, Failure> {
        self.inner.as_ref().ok_or_else(|| Failure::Usage("--inner is required".into()))
    }

    /// `ζ`, refused when it lies within [`REFUSAL_RADIUS`] of `σ(u) ∩ 𝕋`.
    fn zeta(&self, u: &InnerFunction) -> std::result::Result<BoundaryPoint, Failure> {
        let z = self
            .zeta
            .ok_or_else(|| Failure::Usage("--zeta-rad or --zeta-deg is required".into()))?;
        let d = u.dist_to_boundary_spectrum(&z);
        if d < REFUSAL_RADIUS {
            return Err(Failure::Spectrum(format!(
                "ζ = e^(i·{}) is at distance {d:e} from the boundary spectrum (minimum {REFUSAL_RADIUS:e})",
                sig17(z.theta())
            )));
        }
        Ok(z)
    }

    fn clark_window(&self, u: &InnerFunction) -> Window {
        if u.is_finite_blaschke() {
            Window::Full
        } else {
            Window::Symmetric(self.window.unwrap_or(DEFAULT_SINGULAR_WINDOW))
        }
    }

    fn options(&self) -> VerifyOptions {
        VerifyOptions {
            quad_nodes: self.quad_nodes,
            schedule: self.schedule.clone(),
            seed: self.seed,
            ..VerifyOptions::default()
        }
    }
}

/// Output sink: buffered stdout text, or files next to `--output`.
struct Sink {
    buf: String,
    path: Option<PathBuf>,
}

impl Sink {
    fn emit(&mut self, text: &str) -> std::result::Result<(), Failure> {
        match &self.path {
            Some(p) => write_file(p, text),
            None => {
                self.buf.push_str(text);
                Ok(())
            }
        }
    }

    /// Writes `<stem><suffix>.<ext>` next to `--output`, or to stdout.
    fn emit_named(&mut self, suffix: &str, ext: &str, text: &str) -> std::result::Result<(), Failure> {
        match &self.path {
            Some(p) => write_file(&sibling(p, suffix, ext), text),
            None => self.emit(text),
        }
    }
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Error(MslabError::Internal(format!("{}: {e}", path.display()))))
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn emit_report(sink: &mut Sink, report: &SuiteReport, format: Format) -> std::result::Result<(), Failure> {
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json | Format::Text => with_newline(report.to_json()),
    };
    sink.emit(&text)
}

#[derive(Serialize)]
struct AtomView {
    index: usize,
    theta: f64,
    mass: f64,
    branch: i64,
}

#[derive(Serialize)]
struct ClarkView {
    alpha: [f64; 2],
    ell: Option<usize>,
    window: Option<usize>,
    total_mass: f64,
    atoms: Vec<AtomView>,
}

impl ClarkView {
    fn new(mu: &ClarkMeasure) -> Self {
        Self {
            alpha: [mu.alpha.re, mu.alpha.im],
            ell: mu.ell,
            window: mu.window,
            total_mass: mu.total_mass(),
            atoms: mu
                .atoms
                .iter()
                .enumerate()
                .map(|(index, a)| AtomView {
                    index,
                    theta: a.point.theta(),
                    mass: a.mass,
                    branch: a.branch,
                })
                .collect(),
        }
    }
}

fn cmd_clark(cfg: &CliConfig, sink: &mut Sink) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let mu = ClarkMeasure::for_base_point(u, &zeta, cfg.clark_window(u))?;
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv | Format::Text => sink.emit(&mu.to_csv(u)?)?,
        Format::Json => sink.emit(&with_newline(to_json_string(&ClarkView::new(&mu))))?,
    }
    Ok(true)
}

fn dump_matrix(sink: &mut Sink, q: &OperatorMatrix, suffix: &str, format: Format) -> std::result::Result<(), Failure> {
    match format {
        Format::Json => sink.emit_named(suffix, "json", &with_newline(q.sidecar_json())),
        Format::Csv | Format::Text => {
            sink.emit_named(suffix, "csv", &q.to_csv())?;
            sink.emit_named(suffix, "json", &with_newline(q.sidecar_json()))
        }
    }
}

fn cmd_qmatrix(cfg: &CliConfig, sink: &mut Sink, provenance: ProvenanceChoice, basis: BasisChoice) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let format = cfg.format.unwrap_or(Format::Csv);
    let (mu, lemma) = q_matrix_clark(u, &zeta, cfg.clark_window(u))?;
    if matches!(provenance, ProvenanceChoice::Lemma | ProvenanceChoice::Both) {
        dump_matrix(sink, &lemma, "-lemma", format)?;
    }
    if matches!(provenance, ProvenanceChoice::Quadrature | ProvenanceChoice::Both) {
        let b = match basis {
            BasisChoice::Clark => clark_onb(u, &mu)?,
            BasisChoice::Tm => tm_basis(u)?,
        };
        let q = CircleQuadrature::for_model_space(cfg.quad_nodes, u, &zeta)?;
        let m = q_matrix_quadrature(u, &zeta, &b, &q)?;
        dump_matrix(sink, &m, "-quadrature", format)?;
    }
    Ok(true)
}

fn cmd_norm(cfg: &CliConfig, sink: &mut Sink) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let schedule = match cfg.window {
        Some(k) if !u.is_finite_blaschke() => vec![k],
        _ => cfg.schedule.clone(),
    };
    let r = bound_report(u, &zeta, &schedule)?;
    let pass = r.margin >= -crate::verify::MARGIN_SLACK;
    match cfg.format.unwrap_or(Format::Text) {
        Format::Json => sink.emit(&with_newline(to_json_string(&r)))?,
        Format::Csv => {
            let rep = SuiteReport::new(Suite::LowerBounds, u, Some(&zeta)).rows(std::slice::from_ref(&r));
            sink.emit(&rep.to_csv())?
        }
        Format::Text => {
            let window = r.window.map_or_else(|| "full".to_string(), |k| k.to_string());
            let text = format!(
                "{}\nexact {}\nwindow {}\nstabilized {}\ndist_bound {}\nsecond_deriv_bound {}\nabs_u_prime {}\nupper_ratio {}\naleksandrov_ratio {}\nmargin {}\n",
                sig17(r.norm_q),
                r.exact,
                window,
                r.stabilized,
                sig17(r.dist_bound),
                sig17(r.second_deriv_bound),
                sig17(r.abs_u_prime),
                sig17(r.upper_ratio),
                sig17(r.aleksandrov_ratio),
                sig17(r.margin),
            );
            sink.emit(&text)?
        }
    }
    Ok(pass)
}

fn cmd_verify(cfg: &CliConfig, sink: &mut Sink, suite: &str) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let opts = cfg.options();
    let reports = if suite == "all" {
        run_all(u, &zeta, &opts)?
    } else {
        vec![run_suite(suite.parse::<Suite>()?, u, &zeta, &opts)?]
    };
    let format = cfg.format.unwrap_or(Format::Json);
    let mut text = String::new();
    for r in &reports {
        match format {
            Format::Csv => {
                text.push_str(&format!("# {} pass={}\n", r.suite, r.pass));
                text.push_str(&r.to_csv());
            }
            Format::Json | Format::Text => {
                text.push_str(&r.to_json());
                text.push('\n');
            }
        }
    }
    sink.emit(&text)?;
    Ok(reports.iter().all(|r| r.pass))
}

fn cmd_scan(cfg: &CliConfig, sink: &mut Sink, points: usize) -> CmdResult {
    let u = cfg.inner()?;
    if points == 0 {
        return Err(Failure::Usage("--points must be positive".into()));
    }
    let grid = theta_grid(u, points, REFUSAL_RADIUS);
    let report = run_lower_bound_suite(u, &grid, &cfg.schedule)?;
    emit_report(sink, &report, cfg.format.unwrap_or(Format::Csv))?;
    Ok(report.pass)
}

fn cmd_truncation(cfg: &CliConfig, sink: &mut Sink) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let (_, report) = truncation_study(u, &zeta, &cfg.schedule)?;
    emit_report(sink, &report, cfg.format.unwrap_or(Format::Csv))?;
    Ok(report.pass)
}

fn cmd_spectrum(cfg: &CliConfig, sink: &mut Sink) -> CmdResult {
    let u = cfg.inner()?;
    let zeta = cfg.zeta(u)?;
    let report = run_suite(Suite::Spectrum, u, &zeta, &cfg.options())?;
    emit_report(sink, &report, cfg.format.unwrap_or(Format::Json))?;
    Ok(report.pass)
}

fn dispatch(cli: &Cli, cfg: &CliConfig, sink: &mut Sink) -> CmdResult {
    match &cli.command {
        Command::Spectrum => cmd_spectrum(cfg, sink),
        Command::Clark => cmd_clark(cfg, sink),
        Command::Qmatrix { provenance, basis } => cmd_qmatrix(cfg, sink, *provenance, *basis),
        Command::Norm => cmd_norm(cfg, sink),
        Command::Verify { suite } => cmd_verify(cfg, sink, suite),
        Command::Scan { points } => cmd_scan(cfg, sink, *points),
        Command::Truncation => cmd_truncation(cfg, sink),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut sink = Sink {
        buf: String::new(),
        path: None,
    };
    let result = resolve(&cli.common).and_then(|cfg| {
        sink.path = cfg.output.clone();
        match cfg.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Usage(format!("--threads {n}: {e}")))?
                .install(|| dispatch(&cli, &cfg, &mut sink)),
            None => dispatch(&cli, &cfg, &mut sink),
        }
    });
    if out.write_all(sink.buf.as_bytes()).and_then(|_| out.flush()).is_err() {
        return EXIT_FAIL;
    }
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let _ = writeln!(err, "mslab: one or more margins failed");
            EXIT_FAIL
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "mslab: {m}");
            EXIT_USAGE
        }
        Err(Failure::Spectrum(m)) => {
            let _ = writeln!(err, "mslab: {m}");
            EXIT_SPECTRUM
        }
        Err(Failure::Error(e)) => {
            let _ = writeln!(err, "mslab: {e}");
            EXIT_FAIL
        }
    }
}

/// Parses coefficient lists such as `"1,0.5-0.5i"`.
pub fn parse_coefficients(s: &str) -> crate::Result<Vec<num_complex::Complex64>> {
    s.split(',').map(|t| parse_complex(t.trim())).collect()
}
