//! Command-line front end. Every setting can come from flags or from a JSON
//! config file whose keys are the flag names in snake_case; flags win.
//!
//! Exit codes: 0 success, 1 malformed config or arguments, 2 validation
//! failure, 3 assertion or invariant failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::advtrain::{adv2_convergence_probe, train_adv2, StepRule, TrainConfig};
use crate::filters::{
    adv_inf_branch, adv_inf_filter, apply_filter, denoiser_lambda, mse_filter, pseudo_inverse, tikhonov, tsvd,
    AdvBranch, FilterFamily, FilterSpec,
};
use crate::frames::{
    build_dfd, dual_identity_residual, frame_bounds, parse_frame_csv, synthesis_bound_check, FrameSystem,
};
use crate::laws::{law_from_decay, white_noise, CoeffDist, DataLaw, NoiseLaw};
use crate::operators::{from_matrix, make_synthetic, parse_matrix_csv, Decay, SingularSystem};
use crate::output::{fmt_f64, json_document, sha256_hex, Header, Table};
use crate::pnp::{pnp_fixed_point, pnp_iterate, DenoiserSpec};
use crate::ratelab::{lemma_a_sweep, lemma_b_sweep, run_rate_experiment, DeltaGrid, RateKind};
use crate::risk::{
    analytic_risk, generic_risk, monte_carlo_risk, risk_bounds, worst_case_l2, worst_case_sinf,
};
use crate::seqspace::{CoefficientVector, SpaceTag};
use crate::Error;

/// Slope tolerance used by `rates --assert`.
const RATE_SLOPE_TOL: f64 = 0.1;
/// Invariant tolerance for frames and PnP checks.
const CHECK_TOL: f64 = 1e-8;
const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Compute a spectral filter.
    Filter,
    /// Evaluate a risk functional.
    Risk,
    /// Reproduce a convergence rate.
    Rates,
    /// Train the 2-adversarial filter.
    Advtrain,
    /// Frame diagnostics and DFD construction.
    Frames,
    /// Plug-and-play iteration.
    Pnp,
    /// Randomized checks of the series inequalities.
    ValidateLemmas,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Filter => "filter",
            Command::Risk => "risk",
            Command::Rates => "rates",
            Command::Advtrain => "advtrain",
            Command::Frames => "frames",
            Command::Pnp => "pnp",
            Command::ValidateLemmas => "validate-lemmas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Family {
    Tikhonov,
    Tsvd,
    #[value(alias = "pinv")]
    PseudoInverse,
    Mse,
    AdvInf,
    Adv2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Generic,
    MonteCarlo,
    WorstCaseL2,
    WorstCaseSinf,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    Decay,
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Dist {
    Gaussian,
    Rademacher,
    Uniform,
}

impl From<Dist> for CoeffDist {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Gaussian => CoeffDist::Gaussian,
            Dist::Rademacher => CoeffDist::RademacherScaled,
            Dist::Uniform => CoeffDist::UniformSymmetric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Step {
    Fixed,
    Diminishing,
}

/// Every experiment setting. All optional so that flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Command to run when none is given on the command line (config files only).
    #[arg(skip)]
    pub command: Option<Command>,

    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON summary file (rates).
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    /// Training trace CSV (advtrain).
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Truncation dimension.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Explicit singular values (comma separated).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub sigma: Option<Vec<f64>>,
    /// Synthetic decay `poly:p` or `exp:c`.
    #[arg(long, global = true)]
    pub sigma_decay: Option<String>,
    /// Dense operator as CSV (header "rows,cols").
    #[arg(long, global = true)]
    pub matrix: Option<PathBuf>,
    #[arg(long, global = true)]
    pub null_dim: Option<usize>,

    /// Data decay `Pi_n = n^{-a}`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Noise decay exponent (rates).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Source exponent (rates).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Explicit second moments.
    #[arg(long, global = true, value_delimiter = ',')]
    pub pi: Option<Vec<f64>>,
    /// Explicit absolute first moments.
    #[arg(long, global = true, value_delimiter = ',')]
    pub abs_moment: Option<Vec<f64>>,
    /// Data law as JSON `{pi, abs_moment, dist}`.
    #[arg(long, global = true)]
    pub law: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub dist: Option<Dist>,
    /// Noise level.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Noise coloring `Delta_n = delta^2 gamma_n`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Fixed signal in X-coordinates (worst-case risks).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Measurement in Y-coordinates (pnp).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,

    #[arg(long, global = true, value_enum)]
    pub family: Option<Family>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// Monte-Carlo or training sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Split index for the risk bounds.
    #[arg(long, global = true)]
    pub split: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub kind: Option<Kind>,
    /// Delta grid `hi:lo:points`; rates picks one from the theory if absent.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Repeat the rate fit at 2N.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub doubling: Option<bool>,
    /// Turn tolerance checks into exit code 3.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub assert: Option<bool>,

    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub step: Option<Step>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub project_box: Option<bool>,

    /// `orthonormal`, `mercedes_benz`, `doubled` or a CSV path.
    #[arg(long, global = true)]
    pub frame: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<f64>,

    /// Randomized draws per lemma.
    #[arg(long, global = true)]
    pub draws: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "spectral-reg", version, about = "Data-driven spectral regularization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON config file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SPECTRAL_REG_THREADS")]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Config(String),
    Validation(String),
    Assertion(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Assertion(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Validation(m) | Failure::Assertion(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Failure::Assertion(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses a config file; errors carry `path:line:column`.
pub fn load_config(path: &Path) -> Outcome<Settings> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

fn to_object(s: &Settings) -> serde_json::Map<String, Value> {
    match serde_json::to_value(s).expect("settings serialize") {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => unreachable!("settings are a struct"),
    }
}

/// Overlays `flags` on `file`.
pub fn merge(file: &Settings, flags: &Settings) -> Settings {
    let mut base = to_object(file);
    base.extend(to_object(flags));
    serde_json::from_value(Value::Object(base)).expect("merged settings deserialize")
}

/// Hash of everything that can change results (output paths excluded).
pub fn config_hash(cmd: Command, s: &Settings) -> String {
    let mut m = to_object(s);
    for k in ["out", "summary", "trace", "command"] {
        m.remove(k);
    }
    m.insert("command".into(), Value::String(cmd.name().into()));
    sha256_hex(Value::Object(m).to_string().as_bytes())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

/// Runs the experiment described by a config file alone.
pub fn run(config_file: &Path) -> i32 {
    main_with_args([OsString::from("spectral-reg"), OsString::from("--config"), config_file.as_os_str().to_owned()])
}

fn execute(cli: Cli) -> Outcome<()> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => Settings::default(),
    };
    let settings = merge(&file, &cli.settings);
    let cmd = match (cli.command, settings.command) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => {
            return Err(Failure::Config(match &cli.config {
                Some(p) => format!("{}:1:1: missing \"command\"", p.display()),
                None => "no command given".into(),
            }))
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Validation("threads must be >= 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    let ctx = Context { hash: config_hash(cmd, &settings), s: settings, cmd };
    pool.install(|| match cmd {
        Command::Filter => cmd_filter(&ctx),
        Command::Risk => cmd_risk(&ctx),
        Command::Rates => cmd_rates(&ctx),
        Command::Advtrain => cmd_advtrain(&ctx),
        Command::Frames => cmd_frames(&ctx),
        Command::Pnp => cmd_pnp(&ctx),
        Command::ValidateLemmas => cmd_lemmas(&ctx),
    })
}

struct Context {
    s: Settings,
    cmd: Command,
    hash: String,
}

impl Context {
    fn seed(&self) -> u64 {
        self.s.seed.unwrap_or(0)
    }

    fn format(&self) -> Format {
        self.s.format.unwrap_or(Format::Csv)
    }

    fn assert(&self) -> bool {
        self.s.assert.unwrap_or(false)
    }

    fn header(&self, n: usize) -> Header {
        Header::new(self.cmd.name(), &self.hash, self.seed(), n)
    }

    fn emit(&self, text: &str) -> Outcome<()> {
        match &self.s.out {
            Some(p) => write_file(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_result<T: Serialize>(&self, n: usize, table: &Table, json: &T) -> Outcome<()> {
        let h = self.header(n);
        match self.format() {
            Format::Csv => self.emit(&table.render(&h)),
            Format::Json => self.emit(&json_document(&h, json)),
        }
    }
}

fn write_file(p: &Path, text: &str) -> Outcome<()> {
    fs::write(p, text).map_err(|e| Failure::Validation(format!("cannot write {}: {e}", p.display())))
}

fn read_file(p: &Path) -> Outcome<String> {
    fs::read_to_string(p).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", p.display())))
}

fn parse_decay(text: &str) -> Outcome<Decay> {
    let bad = || Failure::Validation(format!("sigma_decay '{text}' must be poly:<p> or exp:<c>"));
    let (kind, val) = text.split_once(':').ok_or_else(bad)?;
    let v: f64 = val.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "poly" => Ok(Decay::Polynomial(v)),
        "exp" => Ok(Decay::Exponential(v)),
        _ => Err(bad()),
    }
}

struct Instance {
    system: SingularSystem,
    data: DataLaw,
    noise: NoiseLaw,
}

fn build_system(s: &Settings) -> Outcome<SingularSystem> {
    let null = s.null_dim.unwrap_or(0);
    if let Some(sig) = &s.sigma {
        return Ok(SingularSystem::from_singular_values(sig.clone(), null)?);
    }
    if let Some(p) = &s.matrix {
        return Ok(from_matrix(&parse_matrix_csv(&read_file(p)?)?)?);
    }
    let decay = parse_decay(s.sigma_decay.as_deref().unwrap_or("poly:1"))?;
    Ok(make_synthetic(s.n.unwrap_or(32), decay, null)?)
}

fn build_data(s: &Settings, n: usize) -> Outcome<DataLaw> {
    let dist: CoeffDist = s.dist.unwrap_or(Dist::Gaussian).into();
    if let Some(p) = &s.law {
        let text = read_file(p)?;
        return serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(format!("{}:{}:{}: {e}", p.display(), e.line(), e.column())));
    }
    if let Some(pi) = &s.pi {
        return Ok(match &s.abs_moment {
            Some(m) => DataLaw::with_abs_moment(pi.clone(), m.clone(), dist)?,
            None => DataLaw::from_moments(pi.clone(), dist)?,
        });
    }
    Ok(law_from_decay(n, s.a.unwrap_or(2.0), 1.0, dist)?)
}

fn build_noise(s: &Settings, n: usize) -> Outcome<NoiseLaw> {
    let delta = s.delta.unwrap_or(0.01);
    Ok(match &s.gamma {
        Some(g) => NoiseLaw::colored(delta, g, CoeffDist::Gaussian)?,
        None => white_noise(n, delta)?,
    })
}

fn build_instance(s: &Settings) -> Outcome<Instance> {
    let system = build_system(s)?;
    let n = system.len();
    let data = build_data(s, n)?;
    let noise = build_noise(s, n)?;
    for (what, len) in [("data law", data.len()), ("noise law", noise.len())] {
        if len != n {
            return Err(Failure::Validation(format!("{what} has {len} coefficients, operator has {n}")));
        }
    }
    Ok(Instance { system, data, noise })
}

fn train_config(s: &Settings) -> TrainConfig {
    let eta = s.eta.unwrap_or(0.5);
    let d = TrainConfig::default();
    TrainConfig {
        sample_count: s.samples.unwrap_or(d.sample_count),
        max_iters: s.iters.unwrap_or(d.max_iters),
        step_rule: match s.step.unwrap_or(Step::Fixed) {
            Step::Fixed => StepRule::Fixed { eta },
            Step::Diminishing => StepRule::Diminishing { eta0: eta },
        },
        project_box: s.project_box.unwrap_or(true),
        seed: s.seed.unwrap_or(0),
        tolerance: d.tolerance,
    }
}

fn delta_or(s: &Settings, what: &str) -> Outcome<f64> {
    s.delta.ok_or_else(|| Failure::Validation(format!("{what} needs --delta")))
}

fn build_filter(ctx: &Context, inst: &Instance) -> Outcome<FilterSpec> {
    let s = &ctx.s;
    Ok(match s.family.unwrap_or(Family::Mse) {
        Family::Tikhonov => tikhonov(&inst.system, s.alpha.unwrap_or(1e-2))?,
        Family::Tsvd => tsvd(&inst.system, s.cutoff.unwrap_or(inst.system.len()))?,
        Family::PseudoInverse => pseudo_inverse(&inst.system)?,
        Family::Mse => mse_filter(&inst.system, &inst.data, &inst.noise)?,
        Family::AdvInf => adv_inf_filter(&inst.system, &inst.data, delta_or(s, "adv_inf")?)?,
        Family::Adv2 => train_adv2(&inst.system, &inst.data, delta_or(s, "adv2")?, &train_config(s))?.filter,
    })
}

fn family_name(f: &FilterFamily) -> String {
    match serde_json::to_value(f) {
        Ok(Value::Object(m)) => m.get("family").and_then(Value::as_str).unwrap_or("custom").to_string(),
        _ => "custom".into(),
    }
}

fn signal(ctx: &Context, inst: &Instance) -> Outcome<CoefficientVector> {
    match &ctx.s.x {
        Some(x) => Ok(CoefficientVector::x(x.clone())?),
        None => {
            let mut x = inst.data.sample(1, ctx.seed())?.remove(0).entries().to_vec();
            x.resize(inst.system.x_dim(), 0.0);
            Ok(CoefficientVector::x(x)?)
        }
    }
}

fn cmd_filter(ctx: &Context) -> Outcome<()> {
    let inst = build_instance(&ctx.s)?;
    let f = build_filter(ctx, &inst)?;
    let adv = match f.family {
        FilterFamily::AdvInf { delta } => Some(delta),
        _ => None,
    };
    let mut cols = vec!["n", "sigma", "g"];
    if adv.is_some() {
        cols.push("branch");
    }
    let mut t = Table::new(&cols);
    t.note("family", family_name(&f.family));
    for n in 0..f.len() {
        let sg = inst.system.sigma()[n];
        let mut row = vec![(n + 1).into(), sg.into(), f.g[n].into()];
        if let Some(delta) = adv {
            let b = adv_inf_branch(sg, inst.data.pi()[n], inst.data.abs_moment()[n], delta);
            row.push(match b {
                AdvBranch::Zero => "zero",
                AdvBranch::Interior => "interior",
                AdvBranch::Full => "full",
            }
            .into());
        }
        t.push(row);
    }
    ctx.emit_result(f.len(), &t, &f)
}

#[derive(Serialize)]
struct RiskRow {
    instance_id: String,
    filter_family: String,
    method: String,
    value: f64,
    stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<Value>,
}

fn cmd_risk(ctx: &Context) -> Outcome<()> {
    let inst = build_instance(&ctx.s)?;
    let (sys, data, noise) = (&inst.system, &inst.data, &inst.noise);
    let header = ctx.header(sys.len());
    let id = header.instance_id().to_string();
    let method = ctx.s.method.unwrap_or(Method::Analytic);
    let row = |family: String, method: &str, value: f64, stderr: f64, detail: Option<Value>| RiskRow {
        instance_id: id.clone(),
        filter_family: family,
        method: method.into(),
        value,
        stderr,
        detail,
    };
    let rows: Vec<RiskRow> = match method {
        Method::Analytic => {
            let r = analytic_risk(sys, data, noise)?;
            vec![row("mse".into(), r.method.name(), r.value, 0.0, detail(&r))]
        }
        Method::Generic => {
            let f = build_filter(ctx, &inst)?;
            let r = generic_risk(&f, sys, data, noise)?;
            vec![row(family_name(&f.family), "generic", r.value, 0.0, detail(&r))]
        }
        Method::MonteCarlo => {
            let f = build_filter(ctx, &inst)?;
            let r = monte_carlo_risk(&f, sys, data, noise, ctx.s.samples.unwrap_or(100_000), ctx.seed())?;
            vec![row(family_name(&f.family), r.method.name(), r.value, r.stderr(), detail(&r))]
        }
        Method::WorstCaseL2 | Method::WorstCaseSinf => {
            let f = build_filter(ctx, &inst)?;
            let x = signal(ctx, &inst)?;
            let delta = ctx.s.delta.unwrap_or(0.01);
            let (name, w) = if method == Method::WorstCaseL2 {
                ("worst_case_l2", worst_case_l2(&f, sys, &x, delta)?)
            } else {
                ("worst_case_sinf", worst_case_sinf(&f, sys, &x, delta)?)
            };
            vec![row(family_name(&f.family), name, w.value, 0.0, detail(&w))]
        }
        Method::Bounds => {
            let split = ctx.s.split.unwrap_or(sys.len() / 2);
            let b = risk_bounds(sys, data, noise, split)?;
            let r = analytic_risk(sys, data, noise)?;
            vec![
                row("mse".into(), "analytic", r.value, 0.0, None),
                row("none".into(), "pi_bound", b.pi_bound, 0.0, None),
                row("pinv".into(), "delta_bound", b.delta_bound, 0.0, None),
                row("tsvd".into(), "split_bound", b.split_bound, 0.0, None),
            ]
        }
    };
    let mut t = Table::new(&["instance_id", "filter_family", "method", "value", "stderr"]);
    for r in &rows {
        t.push(vec![
            r.instance_id.clone().into(),
            r.filter_family.clone().into(),
            r.method.clone().into(),
            r.value.into(),
            r.stderr.into(),
        ]);
    }
    ctx.emit_result(sys.len(), &t, &rows)
}

fn detail<T: Serialize>(v: &T) -> Option<Value> {
    Some(serde_json::to_value(v).expect("serializable"))
}

#[derive(Serialize)]
struct RateSummary<'a> {
    slope: f64,
    ci_low: f64,
    ci_high: f64,
    stderr: f64,
    theoretical_slope: f64,
    n: usize,
    seed: u64,
    experiment: &'a crate::ratelab::RateExperiment,
}

fn cmd_rates(ctx: &Context) -> Outcome<()> {
    let s = &ctx.s;
    let n = s.n.unwrap_or(10_000);
    let (kind, grid) = match s.kind.unwrap_or(Kind::Decay) {
        Kind::Decay => {
            let (a, b) = (s.a.unwrap_or(2.0), s.b.unwrap_or(0.0));
            let grid = match &s.grid {
                Some(g) => DeltaGrid::parse(g)?,
                None => DeltaGrid::for_decay(a, b, n, 3.0, 10)?,
            };
            (RateKind::decay(a, b), grid)
        }
        Kind::Source => {
            let grid = match &s.grid {
                Some(g) => DeltaGrid::parse(g)?,
                None => DeltaGrid::new(1e-1, 1e-4, 10)?,
            };
            (RateKind::source(s.mu.unwrap_or(1.0)), grid)
        }
    };
    let exp = run_rate_experiment(kind, n, grid, s.doubling.unwrap_or(true))?;
    let mut t = Table::new(&["delta", "risk", "bound_split", "theory_exponent"]);
    t.note("fitted_slope", fmt_f64(exp.fit.slope));
    t.note("ci95", format!("{},{}", fmt_f64(exp.fit.ci_low), fmt_f64(exp.fit.ci_high)));
    t.note("theory_slope", fmt_f64(exp.theoretical_slope));
    t.note("split_slope", fmt_f64(exp.split_fit.slope));
    t.note("dropped_largest", exp.fit.dropped_largest);
    if let Some(d) = &exp.doubling {
        t.note("doubling", format!("N={} slope={} shift={}", d.n, fmt_f64(d.slope), fmt_f64(d.shift)));
    }
    if let Some(tf) = exp.tail_fraction {
        t.note("tail_fraction", fmt_f64(tf));
    }
    for p in &exp.measured {
        t.push(vec![p.delta.into(), p.risk.into(), p.bound_split.into(), exp.theoretical_slope.into()]);
    }
    let summary = RateSummary {
        slope: exp.fit.slope,
        ci_low: exp.fit.ci_low,
        ci_high: exp.fit.ci_high,
        stderr: exp.fit.stderr,
        theoretical_slope: exp.theoretical_slope,
        n,
        seed: ctx.seed(),
        experiment: &exp,
    };
    ctx.emit_result(n, &t, &summary)?;
    if let Some(p) = &s.summary {
        write_file(p, &json_document(&ctx.header(n), &summary))?;
    }
    if ctx.assert() {
        if exp.slope_error() > RATE_SLOPE_TOL {
            return Err(Failure::Assertion(format!(
                "slope {} differs from theory {} by more than {RATE_SLOPE_TOL}",
                exp.fit.slope, exp.theoretical_slope
            )));
        }
        if let Some(d) = exp.doubling.filter(|d| !d.ok) {
            return Err(Failure::Assertion(format!("slope shifts by {} under N-doubling", d.shift)));
        }
    }
    Ok(())
}

fn cmd_advtrain(ctx: &Context) -> Outcome<()> {
    let s = &ctx.s;
    let inst = build_instance(s)?;
    let cfg = train_config(s);
    let n = inst.system.len();
    if let Some(g) = &s.grid {
        let grid = DeltaGrid::parse(g)?.values();
        let rows = adv2_convergence_probe(&inst.system, &inst.data, &grid, &cfg)?;
        let mut t =
            Table::new(&["delta", "objective", "bound", "bound_unsquared", "prefix_kept", "prefix_ok", "converged"]);
        for r in &rows {
            t.push(vec![
                r.delta.into(),
                r.objective.into(),
                r.bound.into(),
                r.bound_unsquared.into(),
                r.prefix_kept.into(),
                r.prefix_ok.into(),
                r.converged.into(),
            ]);
        }
        ctx.emit_result(n, &t, &rows)?;
        if ctx.assert() {
            if let Some(r) = rows.iter().find(|r| r.objective > r.bound * (1.0 + 1e-9) || !r.prefix_ok) {
                return Err(Failure::Assertion(format!("probe bound violated at delta {}", r.delta)));
            }
        }
        return Ok(());
    }
    let delta = s.delta.unwrap_or(0.1);
    let res = train_adv2(&inst.system, &inst.data, delta, &cfg)?;
    let mut t = Table::new(&["n", "sigma", "g"]);
    t.note("objective", fmt_f64(res.objective));
    t.note("iterations", res.iterations);
    t.note("converged", res.converged);
    for k in 0..n {
        t.push(vec![(k + 1).into(), inst.system.sigma()[k].into(), res.filter.g[k].into()]);
    }
    ctx.emit_result(n, &t, &res)?;
    if let Some(p) = &s.trace {
        let mut text = ctx.header(n).comment_lines();
        text.push_str(&res.trace_csv());
        write_file(p, &text)?;
    }
    if !res.converged {
        eprintln!("warning: training stopped after {} iterations without meeting the tolerance", res.iterations);
    }
    if ctx.assert() && res.trace.windows(2).any(|w| w[1].best_objective > w[0].best_objective) {
        return Err(Failure::Assertion("best objective increased".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct FrameResult {
    bounds: crate::frames::FrameBounds,
    estimated_bounds: crate::frames::FrameBounds,
    synthesis: crate::frames::SynthesisReport,
    dual_residual: f64,
    condition_residual: f64,
    dfd: crate::frames::DfdExport,
}

fn build_frame(s: &Settings) -> Outcome<FrameSystem> {
    let d = s.dim.unwrap_or(3);
    let spec = s.frame.as_deref().unwrap_or("orthonormal");
    Ok(match spec {
        "orthonormal" => FrameSystem::orthonormal(d)?,
        "mercedes_benz" | "mercedes-benz" => FrameSystem::mercedes_benz()?,
        "doubled" => FrameSystem::doubled_basis(d)?,
        path => parse_frame_csv(&read_file(Path::new(path))?)?,
    })
}

fn cmd_frames(ctx: &Context) -> Outcome<()> {
    let s = &ctx.s;
    let phi = build_frame(s)?;
    let d = phi.dim();
    let a = if let Some(p) = &s.matrix {
        parse_matrix_csv(&read_file(p)?)?
    } else {
        let sig = s.sigma.clone().unwrap_or_else(|| (1..=d).map(|k| 1.0 / k as f64).collect());
        if sig.len() != d {
            return Err(Failure::Validation(format!("operator needs {d} singular values, got {}", sig.len())));
        }
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sig))
    };
    let estimated = frame_bounds(&phi, 1000, ctx.seed())?;
    let synthesis = synthesis_bound_check(&phi, 1000, ctx.seed())?;
    let dual_residual = dual_identity_residual(&phi);
    let dfd = build_dfd(&a, &phi)?;
    let result = FrameResult {
        bounds: phi.bounds(),
        estimated_bounds: estimated,
        synthesis,
        dual_residual,
        condition_residual: dfd.condition_residual(),
        dfd: dfd.export(),
    };
    let mut t = Table::new(&["n", "kappa", "phi", "psi"]);
    t.note("frame_bounds", format!("{},{}", fmt_f64(result.bounds.a), fmt_f64(result.bounds.b)));
    t.note("dual_residual", fmt_f64(dual_residual));
    t.note("condition_residual", fmt_f64(result.condition_residual));
    t.note("synthesis_check", synthesis.passed);
    let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
    for k in 0..dfd.len() {
        t.push(vec![
            (k + 1).into(),
            dfd.kappa[k].into(),
            join(&result.dfd.phi[k]).into(),
            join(&result.dfd.psi[k]).into(),
        ]);
    }
    ctx.emit_result(dfd.len(), &t, &result)?;
    let ok = synthesis.passed && dual_residual <= FRAME_TOL && result.condition_residual <= FRAME_TOL;
    if !ok {
        return Err(Failure::Assertion("frame invariants violated".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct PnpResult {
    y: Vec<f64>,
    x_pnp: Vec<f64>,
    x_closed: Vec<f64>,
    x_mse: Vec<f64>,
    iterations: usize,
    converged: bool,
    max_deviation: f64,
}

fn cmd_pnp(ctx: &Context) -> Outcome<()> {
    let s = &ctx.s;
    let inst = build_instance(s)?;
    let sys = &inst.system;
    let n = sys.len();
    let lambda = denoiser_lambda(&inst.data, &inst.noise.clone().in_space(SpaceTag::X))?;
    let dn = DenoiserSpec::new(lambda)?;
    let y = match &s.y {
        Some(y) => CoefficientVector::y(y.clone())?,
        None => {
            let x = inst.data.sample(1, ctx.seed())?.remove(0);
            let e = inst.noise.sample(1, ctx.seed().wrapping_add(1))?.remove(0);
            let v: Vec<f64> = (0..n).map(|k| sys.sigma()[k] * x.entries()[k] + e.entries()[k]).collect();
            CoefficientVector::y(v)?
        }
    };
    let tau = s.tau.unwrap_or(1.0 / (sys.sigma_max() * sys.sigma_max()));
    let rep = pnp_iterate(&dn, sys, &y, tau, s.iters.unwrap_or(1_000_000))?;
    let closed = pnp_fixed_point(&dn, sys, &y)?;
    let mse = apply_filter(&mse_filter(sys, &inst.data, &inst.noise)?, sys, &y)?;
    let dev = rep
        .x
        .entries()
        .iter()
        .zip(closed.entries())
        .zip(mse.entries())
        .map(|((p, c), m)| (p - c).abs().max((p - m).abs()))
        .fold(0.0, f64::max);
    let result = PnpResult {
        y: y.entries().to_vec(),
        x_pnp: rep.x.entries().to_vec(),
        x_closed: closed.entries().to_vec(),
        x_mse: mse.entries().to_vec(),
        iterations: rep.iterations,
        converged: rep.converged,
        max_deviation: dev,
    };
    let mut t = Table::new(&["n", "y", "x_pnp", "x_closed", "x_mse"]);
    t.note("tau", fmt_f64(tau));
    t.note("iterations", rep.iterations);
    t.note("max_deviation", fmt_f64(dev));
    for k in 0..n {
        t.push(vec![(k + 1).into(), result.y[k].into(), result.x_pnp[k].into(), result.x_closed[k].into(), result.x_mse[k].into()]);
    }
    ctx.emit_result(n, &t, &result)?;
    if ctx.assert() && (!rep.converged || dev > CHECK_TOL) {
        return Err(Failure::Assertion(format!("PnP deviates from the closed form by {dev}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct LemmaRow {
    lemma: &'static str,
    checks: usize,
    violations: usize,
    max_ratio: f64,
    examples: Vec<String>,
}

fn cmd_lemmas(ctx: &Context) -> Outcome<()> {
    let draws = ctx.s.draws.unwrap_or(10_000);
    let seed = ctx.seed();
    let reports = [("power_sums", lemma_a_sweep(draws, seed)), ("source_condition", lemma_b_sweep(draws, seed))];
    let rows: Vec<LemmaRow> = reports
        .into_iter()
        .map(|(lemma, r)| LemmaRow { lemma, checks: r.checks, violations: r.violations, max_ratio: r.max_ratio, examples: r.examples })
        .collect();
    let mut t = Table::new(&["lemma", "checks", "violations", "max_ratio"]);
    t.note("draws", draws);
    for r in &rows {
        t.push(vec![r.lemma.into(), r.checks.into(), r.violations.into(), r.max_ratio.into()]);
    }
    ctx.emit_result(draws, &t, &rows)?;
    let bad: usize = rows.iter().map(|r| r.violations).sum();
    if bad > 0 {
        return Err(Failure::Assertion(format!("{bad} lemma violations")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("spectral-reg").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let file = Settings { delta: Some(0.5), n: Some(8), ..Default::default() };
        let cli = parse(&["filter", "--delta", "0.6"]);
        let m = merge(&file, &cli.settings);
        assert_eq!(m.delta, Some(0.6));
        assert_eq!(m.n, Some(8));
    }

    #[test]
    fn hash_ignores_output_paths() {
        let a = Settings { seed: Some(1), out: Some("a.csv".into()), ..Default::default() };
        let b = Settings { seed: Some(1), out: Some("b.csv".into()), ..Default::default() };
        assert_eq!(config_hash(Command::Risk, &a), config_hash(Command::Risk, &b));
        assert_ne!(config_hash(Command::Risk, &a), config_hash(Command::Rates, &a));
    }

    #[test]
    fn config_errors_are_line_anchored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "{\n  \"delta\": 0.1,\n  \"bogus\": 1\n}").unwrap();
        let e = load_config(&p).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.message().contains("c.json:3:"), "{}", e.message());
        fs::write(&p, "").unwrap();
        assert_eq!(run(&p), 1);
    }

    #[test]
    fn negative_values_parse() {
        let cli = parse(&["rates", "--a", "3", "--b", "-0.5"]);
        assert_eq!(cli.settings.b, Some(-0.5));
    }
}
