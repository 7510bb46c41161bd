//! Command-line front end. Every subcommand writes its artifacts and a
//! `manifest.json` into the output directory.
//!
//! Exit codes: 0 success, 1 validation failure, 2 invalid input,
//! 3 numerical failure (a `diagnostics.json` is written).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::censoring_selection::posterior_from_censored_sim;
use crate::chirality::Chirality;
use crate::densities::{
    censored_posterior, esn_ou_params, p_marginal_ou_sknoise, q_class, q_esn_ou, q_ou_h_transform, q_theorem1, q_theorem2,
    DensityGrid,
};
use crate::error::{invalid, Result, SkewError};
use crate::fokker_planck::{l1_error, solve_kfe, FpConfig};
use crate::ou_skew::{
    identity_sides, ou_mixture_probability, repulsive_ou_moments, sigma_ratio,
    stationary_ou_moments, stationary_ou_pdf, OuSkewSpec,
};
use crate::quad::TabulatedCdf;
use crate::sde_engine::{
    init_thread_pool, mixture_probability, simulate, simulate_bivariate_censoring, simulate_mixture, summarize,
    PathEnsemble, Recording, SimConfig, TimeGrid,
};
use crate::skew_family::{family_constant_correlation, family_theorem1, family_theorem2, DriftSpec, SkewFamily};
use crate::validation::criteria::{realized_correlation, run_criterion, SuiteOptions, CRITERIA};
use crate::validation::{ks_statistic, ks_threshold_99, ValidationReport};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A list of reals given as `a:b:step` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Points(pub Vec<f64>);

impl FromStr for Points {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}` in `{s}`"));
        if s.contains(':') {
            let p: Vec<&str> = s.split(':').collect();
            if p.len() != 3 {
                return Err(format!("range `{s}` must be start:stop:step"));
            }
            let (a, b, h) = (num(p[0])?, num(p[1])?, num(p[2])?);
            if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                return Err(format!("range `{s}` needs start ≤ stop and a positive step"));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            if n > 10_000_000 {
                return Err(format!("range `{s}` has too many points"));
            }
            // snap to 12 decimals so 0.05 steps print as 1.85 rather than 1.8499999999999999
            let snap = |v: f64| if v.abs() < 1e3 { (v * 1e12).round() / 1e12 } else { v };
            return Ok(Points((0..=n).map(|i| snap(a + h * i as f64)).collect()));
        }
        let v = s.split(',').filter(|p| !p.trim().is_empty()).map(num).collect::<std::result::Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(Points(v))
    }
}

impl fmt::Display for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(f64::to_string).collect();
        write!(f, "{}", s.join(","))
    }
}

impl Serialize for Points {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) if !v.is_empty() => Ok(Points(v)),
            Raw::List(_) => Err(serde::de::Error::custom("empty list")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// Directory for artifacts and manifest.json.
    #[arg(long, default_value = "skewdiff-out", global = true)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 1, global = true)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// JSON file {command?, parameters?, output_dir?, seed?, format?}; its values override flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Process selection shared by several commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Model {
    /// theorem1 | theorem2 | constant_correlation | brownian | ou_linear | ou_h
    #[arg(long, default_value = "theorem2")]
    pub kind: String,
    /// Horizon of the theorem1 family.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub correlation: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// +1 (right-skewed) or -1 (left-skewed).
    #[arg(long, default_value_t = 1)]
    pub chirality: i64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FamilyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    /// Times at which ψ and α are tabulated.
    #[arg(long, default_value = "0.05:0.95:0.05", allow_hyphen_values = true)]
    pub t: Points,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.0)]
    pub t_start: f64,
    /// End of the grid; defaults to T for theorem1 and 1 otherwise.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Terminal cutoff; defaults to 1e-4 when the grid ends at the horizon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Record every k-th step; defaults to about 100 recorded columns.
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub clamp: f64,
    #[arg(long)]
    pub antithetic: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    /// theorem1 | theorem2 | constant_correlation | censored | esn_ou | ou_h | ou_sknoise
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    /// Correlation for the censored posterior.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub t: Points,
    #[arg(long, default_value = "-5:5:0.01", allow_hyphen_values = true)]
    pub x: Points,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FokkerPlanckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: Model,
    #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 801)]
    pub nx: usize,
    /// Total number of time steps.
    #[arg(long, default_value_t = 2000)]
    pub nt: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Number of equally spaced snapshots in (0, t_end].
    #[arg(long, default_value_t = 4)]
    pub snapshots: usize,
    /// Crank–Nicolson weight.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CensorArgs {
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value = "0.25,0.5")]
    pub t: Points,
    /// KDE bandwidth; Silverman's rule when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value = "-3:4:0.05", allow_hyphen_values = true)]
    pub x: Points,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MixtureArgs {
    /// brownian (± bridge-like pair) or ou (± OU h-transforms)
    #[arg(long, default_value = "brownian")]
    pub kind: String,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Final time of the OU mixture.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OuArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1)]
    pub chirality: i64,
    #[arg(long, default_value = "0.25,0.5,1")]
    pub t: Points,
    #[arg(long, default_value = "-4:4:0.02", allow_hyphen_values = true)]
    pub x: Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Full-size acceptance suite.
    Core,
    /// Same checks with fewer paths.
    Quick,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = Suite::Core)]
    pub suite: Suite,
    /// Comma-separated criterion names; all when absent.
    #[arg(long)]
    pub only: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate ψ_t, α_t and the validity horizon of a drift family.
    Family(FamilyArgs),
    /// Euler–Maruyama ensemble with summary statistics.
    Simulate(SimulateArgs),
    /// Closed-form transition densities on an (x, t) grid.
    Density(DensityArgs),
    /// Finite-volume forward-equation solve, compared with closed forms where known.
    FokkerPlanck(FokkerPlanckArgs),
    /// Brownian paths conditioned on a correlated partner staying positive.
    Censor(CensorArgs),
    /// Two-chirality mixtures that reproduce Gaussian laws.
    Mixture(MixtureArgs),
    /// OU h-transform densities and the mixture identity.
    Ou(OuArgs),
    /// Run the acceptance checks and write a JSON report.
    Validate(ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Family(_) => "family",
            Command::Simulate(_) => "simulate",
            Command::Density(_) => "density",
            Command::FokkerPlanck(_) => "fokker-planck",
            Command::Censor(_) => "censor",
            Command::Mixture(_) => "mixture",
            Command::Ou(_) => "ou",
            Command::Validate(_) => "validate",
        }
    }

    fn parameters(&self) -> Value {
        let v = match self {
            Command::Family(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::Density(a) => serde_json::to_value(a),
            Command::FokkerPlanck(a) => serde_json::to_value(a),
            Command::Censor(a) => serde_json::to_value(a),
            Command::Mixture(a) => serde_json::to_value(a),
            Command::Ou(a) => serde_json::to_value(a),
            Command::Validate(a) => serde_json::to_value(a),
        };
        v.unwrap_or(Value::Null)
    }

    fn with_parameters(&self, v: Value) -> Result<Command> {
        Ok(match self {
            Command::Family(_) => Command::Family(serde_json::from_value(v)?),
            Command::Simulate(_) => Command::Simulate(serde_json::from_value(v)?),
            Command::Density(_) => Command::Density(serde_json::from_value(v)?),
            Command::FokkerPlanck(_) => Command::FokkerPlanck(serde_json::from_value(v)?),
            Command::Censor(_) => Command::Censor(serde_json::from_value(v)?),
            Command::Mixture(_) => Command::Mixture(serde_json::from_value(v)?),
            Command::Ou(_) => Command::Ou(serde_json::from_value(v)?),
            Command::Validate(_) => Command::Validate(serde_json::from_value(v)?),
        })
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "skewdiff", version, about = "Skew-Normal diffusions: densities, simulation, PDE solves and checks")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<String>,
    #[serde(default)]
    parameters: Map<String, Value>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<Format>,
}

/// Overlays a config file on the parsed flags. Unknown keys are errors.
fn apply_config(cli: Cli) -> Result<Cli> {
    let Some(path) = cli.common.config.clone() else {
        return Ok(cli);
    };
    let text = fs::read_to_string(&path)?;
    let cfg: ConfigFile = serde_json::from_str(&text)?;
    if let Some(c) = &cfg.command {
        if c != cli.command.name() {
            return Err(invalid("command", format!("config is for `{c}`, invoked `{}`", cli.command.name())));
        }
    }
    let mut params = cli.command.parameters();
    let obj = params.as_object_mut().expect("parameters serialize to an object");
    for (k, v) in cfg.parameters {
        if !obj.contains_key(&k) {
            return Err(SkewError::Format(format!("unknown parameter `{k}` for `{}`", cli.command.name())));
        }
        obj.insert(k, v);
    }
    let command = cli.command.with_parameters(params)?;
    let mut common = cli.common;
    if let Some(d) = cfg.output_dir {
        common.output_dir = d;
    }
    if let Some(s) = cfg.seed {
        common.seed = s;
    }
    if let Some(f) = cfg.format {
        common.format = f;
    }
    Ok(Cli { common, command })
}

/// Exit code for an error.
pub fn exit_code(e: &SkewError) -> i32 {
    match e {
        SkewError::InvalidParameter { .. }
        | SkewError::HorizonViolation { .. }
        | SkewError::Unsupported(_)
        | SkewError::Format(_)
        | SkewError::Json(_) => 2,
        SkewError::NonFinite { .. }
        | SkewError::Quadrature { .. }
        | SkewError::Instability { .. }
        | SkewError::TooFewSamples { .. }
        | SkewError::Io(_) => 3,
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> Result<fs::File> {
        self.written.push(name.to_string());
        Ok(fs::File::create(self.dir.join(name))?)
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, v)?;
        writeln!(f)?;
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        self.file(name)?.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_thread_pool();
    let cli = match apply_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let started = Instant::now();
    let mut out = match Outputs::new(&cli.common.output_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: output directory: {e}");
            return 2;
        }
    };
    let result = dispatch(&cli, &mut out);
    let code = match &result {
        Ok(passed) => i32::from(!passed),
        Err(e) => {
            eprintln!("error: {e}");
            let c = exit_code(e);
            if c == 3 {
                let _ = out.json(
                    "diagnostics.json",
                    &json!({ "command": cli.command.name(), "parameters": cli.command.parameters(), "error": e.to_string() }),
                );
            }
            c
        }
    };
    if code != 2 {
        let manifest = json!({
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "command": cli.command.name(),
            "parameters": cli.command.parameters(),
            "seed": cli.common.seed,
            "format": cli.common.format,
            "output_dir": cli.common.output_dir,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": started.elapsed().as_secs_f64(),
            "exit_code": code,
            "artifacts": out.written,
        });
        if let Err(e) = out.json("manifest.json", &manifest) {
            eprintln!("error: manifest: {e}");
            return 3;
        }
    }
    code
}

/// `Ok(false)` signals a validation failure.
fn dispatch(cli: &Cli, out: &mut Outputs) -> Result<bool> {
    let c = &cli.common;
    match &cli.command {
        Command::Family(a) => cmd_family(a, c, out),
        Command::Simulate(a) => cmd_simulate(a, c, out),
        Command::Density(a) => cmd_density(a, c, out),
        Command::FokkerPlanck(a) => cmd_fokker_planck(a, c, out),
        Command::Censor(a) => cmd_censor(a, c, out),
        Command::Mixture(a) => cmd_mixture(a, c, out),
        Command::Ou(a) => cmd_ou(a, c, out),
        Command::Validate(a) => return cmd_validate(a, c, out),
    }?;
    Ok(true)
}

fn chirality(s: i64) -> Result<Chirality> {
    Chirality::from_sign(s)
}

fn need(v: Option<f64>, name: &'static str, kind: &str) -> Result<f64> {
    v.ok_or_else(|| invalid(name, format!("required for kind `{kind}`")))
}

fn build_family(m: &Model) -> Result<SkewFamily> {
    let c = chirality(m.chirality)?;
    match m.kind.as_str() {
        "theorem1" => family_theorem1(need(m.horizon, "T", &m.kind)?, c),
        "theorem2" => family_theorem2(need(m.alpha, "alpha", &m.kind)?, c),
        "constant_correlation" => family_constant_correlation(need(m.correlation, "correlation", &m.kind)?, c),
        k => Err(invalid("kind", format!("`{k}` is not a drift family"))),
    }
}

fn build_drift(m: &Model) -> Result<DriftSpec> {
    Ok(match m.kind.as_str() {
        "theorem1" => DriftSpec::theorem1(build_family(m)?),
        "theorem2" => DriftSpec::theorem2(build_family(m)?).with_shift(m.x0),
        "constant_correlation" => DriftSpec::general_class(build_family(m)?).with_shift(m.x0),
        "brownian" => DriftSpec::zero(),
        "ou_linear" => DriftSpec::linear(need(m.lambda, "lambda", &m.kind)?),
        "ou_h" => DriftSpec::ou_h_transform(OuSkewSpec::new(
            need(m.lambda, "lambda", &m.kind)?,
            chirality(m.chirality)?,
            m.x0,
        )?),
        k => Err(invalid("kind", format!("unknown process kind `{k}`")))?,
    })
}

fn check_positive_times(t: &Points) -> Result<()> {
    if t.0.iter().any(|&s| !(s > 0.0)) || t.0.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("t", "times must be positive and increasing"));
    }
    Ok(())
}

fn cmd_family(a: &FamilyArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    let f = build_family(&a.model)?;
    let h = f.validity_horizon();
    if let Some(&bad) = a.t.0.iter().find(|&&t| !(t > 0.0 && t < h)) {
        return Err(SkewError::HorizonViolation { t: bad, horizon: h });
    }
    let rows: Vec<[f64; 5]> =
        a.t.0.iter().map(|&t| [t, f.psi(t), f.alpha(t), f.alpha_dot(t), f.lambda(t)]).collect();
    let meta = json!({
        "family": f.descriptor(),
        "validity_horizon": if h.is_finite() { json!(h) } else { json!("infinite") },
        "constant": f.family_constant(),
    });
    match c.format {
        Format::Csv => {
            let mut s = String::from("t,psi,alpha,alpha_dot,lambda\n");
            for r in &rows {
                s.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", r[0], r[1], r[2], r[3], r[4]));
            }
            out.text("family.csv", &s)?;
            out.json("family.json", &meta)?;
        }
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|r| json!({ "t": r[0], "psi": r[1], "alpha": r[2], "alpha_dot": r[3], "lambda": r[4] }))
                .collect();
            out.json("family.json", &json!({ "meta": meta, "table": table }))?;
        }
        Format::Binary => return Err(SkewError::Unsupported("binary output for `family`".into())),
    }
    Ok(())
}

fn ensemble_json(e: &PathEnsemble) -> Value {
    let paths: Vec<&[f64]> = (0..e.n_paths).map(|i| e.path(i)).collect();
    json!({ "seed": e.seed, "times": e.times(), "labels": e.labels, "clamp_events": e.clamp_events, "paths": paths })
}

fn write_ensemble(e: &PathEnsemble, c: &Common, out: &mut Outputs, stem: &str) -> Result<()> {
    match c.format {
        Format::Csv => e.write_csv(out.file(&format!("{stem}.csv"))?),
        Format::Binary => e.write_binary(std::io::BufWriter::new(out.file(&format!("{stem}.skdf"))?)),
        Format::Json => out.json(&format!("{stem}.json"), &ensemble_json(e)),
    }
}

fn cmd_simulate(a: &SimulateArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    let drift = build_drift(&a.model)?;
    let h = drift.validity_horizon();
    let t_end = a.t_end.unwrap_or(if h.is_finite() { h } else { 1.0 });
    let eps = a.epsilon.unwrap_or(if t_end >= h { 1e-4 } else { 0.0 });
    let grid = TimeGrid::new(a.t_start, t_end, a.steps, eps)?;
    let every = a.record_every.unwrap_or((a.steps / 100).max(1));
    let cfg = SimConfig::new(a.paths, c.seed)
        .with_recording(Recording::Every(every))
        .with_clamp(a.clamp)
        .with_antithetic(a.antithetic);
    let ens = simulate(&drift, a.model.x0, &grid, &cfg)?;
    write_ensemble(&ens, c, out, "ensemble")?;
    out.json(
        "summary.json",
        &json!({
            "drift": drift.descriptor().ok(),
            "grid": grid,
            "n_paths": ens.n_paths,
            "clamp_fraction": ens.clamp_fraction(),
            "columns": summarize(&ens),
        }),
    )
}

type DensityFn = Box<dyn Fn(f64, f64) -> Result<f64> + Sync>;
type ReferenceFn = Box<dyn Fn(f64, f64) -> f64>;

fn density_fn(a: &DensityArgs) -> Result<DensityFn> {
    let m = a.model.clone();
    let c = chirality(m.chirality)?;
    let kind = m.kind.as_str();
    Ok(match kind {
        "theorem1" => {
            let h = need(m.horizon, "T", kind)?;
            Box::new(move |x, t| q_theorem1(x, t, m.x0, h, c))
        }
        "theorem2" => {
            let al = need(m.alpha, "alpha", kind)?;
            Box::new(move |x, t| q_theorem2(x - m.x0, t, al, c))
        }
        "constant_correlation" => {
            let f = build_family(&m)?;
            Box::new(move |x, t| q_class(x, t, &f, m.x0))
        }
        "censored" => {
            let rho = need(a.rho, "rho", kind)?;
            Box::new(move |x, t| censored_posterior(x, t, rho))
        }
        "esn_ou" => {
            let l = need(m.lambda, "lambda", kind)?;
            Box::new(move |x, t| q_esn_ou(x, t, l, m.x0, c))
        }
        "ou_h" => {
            let spec = OuSkewSpec::new(need(m.lambda, "lambda", kind)?, c, m.x0)?;
            Box::new(move |x, t| Ok(q_ou_h_transform(x, t, &spec)))
        }
        "ou_sknoise" => {
            let l = need(m.lambda, "lambda", kind)?;
            let h = need(m.horizon, "T", kind)?;
            Box::new(move |x, t| p_marginal_ou_sknoise(x, t, l, m.x0, h))
        }
        k => return Err(invalid("kind", format!("unknown density kind `{k}`"))),
    })
}

fn cmd_density(a: &DensityArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    check_positive_times(&a.t)?;
    let f = density_fn(a)?;
    let grid = DensityGrid::from_fn(a.x.0.clone(), a.t.0.clone(), f)?;
    match c.format {
        Format::Csv => {
            grid.write_csv(out.file("density.csv")?)?;
            out.json("density_summary.json", &grid.summary_json())
        }
        Format::Json => out.json("density.json", &json!({ "grid": grid, "summary": grid.summary() })),
        Format::Binary => Err(SkewError::Unsupported("binary output for `density`".into())),
    }
}

fn reference_density(m: &Model) -> Result<Option<ReferenceFn>> {
    let c = chirality(m.chirality)?;
    let x0 = m.x0;
    Ok(match m.kind.as_str() {
        "theorem1" => {
            let h = need(m.horizon, "T", &m.kind)?;
            Some(Box::new(move |x, t| q_theorem1(x, t, x0, h, c).unwrap_or(f64::NAN)))
        }
        "theorem2" => {
            let al = need(m.alpha, "alpha", &m.kind)?;
            Some(Box::new(move |x, t| q_theorem2(x - x0, t, al, c).unwrap_or(f64::NAN)))
        }
        "brownian" => Some(Box::new(move |x, t| crate::analytic_dists::normal_pdf(x, x0, t))),
        "ou_linear" => {
            let l = need(m.lambda, "lambda", &m.kind)?;
            Some(Box::new(move |x, t| stationary_ou_pdf(x, t, l, x0)))
        }
        "ou_h" => {
            let spec = OuSkewSpec::new(need(m.lambda, "lambda", &m.kind)?, c, x0)?;
            Some(Box::new(move |x, t| q_ou_h_transform(x, t, &spec)))
        }
        _ => None,
    })
}

fn cmd_fokker_planck(a: &FokkerPlanckArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    let drift = build_drift(&a.model)?;
    let grid = TimeGrid::uniform(a.t_end, a.snapshots)?;
    let mut cfg = FpConfig::new(a.x_min, a.x_max, a.nx, a.nt);
    cfg.theta = a.theta;
    let sol = solve_kfe(&drift, 1.0, a.model.x0, &grid, &cfg)?;
    let reference = reference_density(&a.model)?;
    let rows: Vec<Value> = sol
        .summary()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let l1 = reference
                .as_ref()
                .map(|r| l1_error(sol.row(j), &sol.x_nodes, |x| r(x, sol.t_nodes[j])));
            json!({ "t": s.t, "mass": s.mass, "mean": s.mean, "variance": s.variance, "skewness": s.skewness, "l1_vs_closed_form": l1 })
        })
        .collect();
    match c.format {
        Format::Csv => sol.write_csv(out.file("fokker_planck.csv")?)?,
        Format::Json => out.json("fokker_planck_grid.json", &serde_json::to_value(&sol)?)?,
        Format::Binary => return Err(SkewError::Unsupported("binary output for `fokker-planck`".into())),
    }
    out.json("fokker_planck.json", &json!({ "config": cfg, "rows": rows }))
}

fn cmd_censor(a: &CensorArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    check_positive_times(&a.t)?;
    if a.t.0.iter().any(|&t| t > a.horizon) {
        return Err(invalid("t", "times must not exceed T"));
    }
    let horizon = a.horizon;
    let grid = TimeGrid::uniform(horizon, a.steps)?;
    let cfg = SimConfig::new(a.paths, c.seed).with_recording(Recording::at_times(&grid, &a.t.0));
    let (x, y) = simulate_bivariate_censoring(|s| (s / horizon).sqrt(), &grid, &cfg)?;
    let times = x.times();
    let mut csv = String::from("x,t,kde,reference\n");
    let mut report = Vec::new();
    for (col, &t) in times.iter().enumerate().skip(1) {
        let post = posterior_from_censored_sim(&x, &y, col, a.bandwidth, &a.x.0)?;
        let rho = realized_correlation(t, horizon);
        let sd = t.sqrt();
        let cdf = TabulatedCdf::new(|u| censored_posterior(u, t, rho).unwrap_or(0.0), -12.0 * sd, 12.0 * sd, 4000);
        let ks = ks_statistic(&post.survivors, |u| cdf.eval(u))?;
        for (i, &u) in a.x.0.iter().enumerate() {
            csv.push_str(&format!("{u:?},{t:?},{:?},{:?}\n", post.density[i], censored_posterior(u, t, rho)?));
        }
        report.push(json!({
            "t": t,
            "survivor_fraction": post.survivor_fraction,
            "ks": ks,
            "ks_threshold_99": ks_threshold_99(post.n_effective),
            "n_effective": post.n_effective,
            "bandwidth": post.bandwidth,
            "realized_correlation": rho,
        }));
    }
    match c.format {
        Format::Csv => out.text("censor.csv", &csv)?,
        Format::Json => {}
        Format::Binary => return Err(SkewError::Unsupported("binary output for `censor`".into())),
    }
    out.json("censor.json", &json!(report))
}

fn cmd_mixture(a: &MixtureArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    let (plus, minus, p_plus, grid, target_mean, target_var) = match a.kind.as_str() {
        "brownian" => {
            let grid = TimeGrid::new(0.0, a.horizon, a.steps, a.epsilon)?;
            let (_, p) = mixture_probability(a.x0, a.horizon)?;
            (
                DriftSpec::theorem1(family_theorem1(a.horizon, Chirality::Right)?),
                DriftSpec::theorem1(family_theorem1(a.horizon, Chirality::Left)?),
                p,
                grid,
                a.x0,
                grid.effective_end(),
            )
        }
        "ou" => {
            let grid = TimeGrid::uniform(a.t_end, a.steps)?;
            let (_, p) = ou_mixture_probability(a.lambda, a.x0)?;
            let (m, v) = repulsive_ou_moments(a.lambda, a.x0, a.t_end);
            (
                DriftSpec::ou_h_transform(OuSkewSpec::new(a.lambda, Chirality::Right, a.x0)?),
                DriftSpec::ou_h_transform(OuSkewSpec::new(a.lambda, Chirality::Left, a.x0)?),
                p,
                grid,
                m,
                v,
            )
        }
        k => return Err(invalid("kind", format!("unknown mixture kind `{k}`"))),
    };
    let cfg = SimConfig::new(a.paths, c.seed).with_recording(Recording::Steps(vec![grid.n_steps]));
    let ens = simulate_mixture(&plus, &minus, p_plus, a.x0, &grid, &cfg)?;
    let term = ens.terminal();
    let ks = ks_statistic(&term, |x| crate::analytic_dists::normal_cdf(x, target_mean, target_var))?;
    let labels = ens.labels.clone().unwrap_or_default();
    let n_plus = labels.iter().filter(|&&l| l == 1).count();
    match c.format {
        Format::Csv => {
            let mut s = String::from("value,label\n");
            for (v, l) in term.iter().zip(&labels) {
                s.push_str(&format!("{v:?},{l}\n"));
            }
            out.text("mixture.csv", &s)?;
        }
        Format::Binary => ens.write_binary(std::io::BufWriter::new(out.file("mixture.skdf")?))?,
        Format::Json => out.json("mixture_paths.json", &ensemble_json(&ens))?,
    }
    out.json(
        "mixture.json",
        &json!({
            "kind": a.kind,
            "p_plus": p_plus,
            "plus_fraction": n_plus as f64 / term.len() as f64,
            "t": grid.effective_end(),
            "target": { "mean": target_mean, "variance": target_var },
            "ks": ks,
            "ks_threshold_99": ks_threshold_99(term.len()),
            "clamp_fraction": ens.clamp_fraction(),
        }),
    )
}

fn cmd_ou(a: &OuArgs, c: &Common, out: &mut Outputs) -> Result<()> {
    check_positive_times(&a.t)?;
    let ch = chirality(a.chirality)?;
    let spec = OuSkewSpec::new(a.lambda, ch, a.x0)?;
    let mut csv = String::from("x,t,h_transform,esn,stationary_ou,repulsive_ou,mixture\n");
    let mut per_t = Vec::new();
    for &t in &a.t.0 {
        let mut worst: f64 = 0.0;
        let mut esn_gap: f64 = 0.0;
        for &x in &a.x.0 {
            let q = q_ou_h_transform(x, t, &spec);
            let e = q_esn_ou(x, t, a.lambda, a.x0, ch)?;
            let (lhs, rhs) = identity_sides(a.lambda, a.x0, x, t)?;
            worst = worst.max((lhs - rhs).abs());
            esn_gap = esn_gap.max((q - e).abs());
            csv.push_str(&format!(
                "{x:?},{t:?},{q:?},{e:?},{:?},{rhs:?},{lhs:?}\n",
                stationary_ou_pdf(x, t, a.lambda, a.x0)
            ));
        }
        let (ms, vs) = stationary_ou_moments(a.lambda, a.x0, t);
        let (mr, vr) = repulsive_ou_moments(a.lambda, a.x0, t);
        per_t.push(json!({
            "t": t,
            "esn": esn_ou_params(t, a.lambda, a.x0, ch)?,
            "max_abs_h_transform_minus_esn": esn_gap,
            "max_abs_identity_residual": worst,
            "sigma_ratio": sigma_ratio(a.lambda, t),
            "exp_lambda_t": (a.lambda * t).exp(),
            "stationary": { "mean": ms, "variance": vs },
            "repulsive": { "mean": mr, "variance": vr },
        }));
    }
    let (pm, pp) = ou_mixture_probability(a.lambda, a.x0)?;
    match c.format {
        Format::Csv => out.text("ou.csv", &csv)?,
        Format::Json => {}
        Format::Binary => return Err(SkewError::Unsupported("binary output for `ou`".into())),
    }
    out.json(
        "ou.json",
        &json!({ "lambda": a.lambda, "x0": a.x0, "chirality": ch, "p_minus": pm, "p_plus": pp, "times": per_t }),
    )
}

fn cmd_validate(a: &ValidateArgs, c: &Common, out: &mut Outputs) -> Result<bool> {
    let opts = match a.suite {
        Suite::Core => SuiteOptions::core(c.seed),
        Suite::Quick => SuiteOptions::quick(c.seed),
    };
    let selected: Vec<usize> = match &a.only {
        None => (0..CRITERIA.len()).collect(),
        Some(list) => list
            .split(',')
            .map(|n| {
                CRITERIA
                    .iter()
                    .position(|(name, _)| *name == n.trim())
                    .ok_or_else(|| invalid("only", format!("unknown criterion `{}`", n.trim())))
            })
            .collect::<Result<_>>()?,
    };
    let started = Instant::now();
    let checks = {
        use rayon::prelude::*;
        selected.par_iter().map(|&i| run_criterion(i, &opts)).collect()
    };
    let suite = match a.suite {
        Suite::Core => "core",
        Suite::Quick => "quick",
    };
    let report = ValidationReport::new(suite, c.seed, checks, started);
    for ch in &report.checks {
        println!("{}", ch.summary_line());
    }
    out.text("report.json", &report.to_json()?)?;
    Ok(report.all_pass)
}
