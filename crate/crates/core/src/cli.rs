//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
//! error.

use crate::bound::{expected_bound, ledger, BoundQuery, CurvePoint, Method, QuadOrder};
use crate::channel::{analytic_moments, gamma_fit, ks_distance, sample_a, write_samples, LinkBudget, RisChannelSpec, SampleFormat};
use crate::error::{Error, Result};
use crate::reference_na::{na_error, Averaging, NaQuery};
use crate::spheregeom::solve_alpha1;
use crate::validate::{self, Level};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ris-spb", version, about = "Sphere-packing lower bounds for RIS-aided Rician fading channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected-bound curves over an SNR grid.
    Sweep(SweepArgs),
    /// Run the validation suites.
    Validate(ValidateArgs),
    /// Sample the cascade coefficient.
    Sample(SampleArgs),
    /// Solve for the cone half-angle.
    Alpha1(Alpha1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleFileFormat {
    Csv,
    Binary,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Number of RIS elements.
    #[arg(long)]
    pub nris: Option<u32>,
    /// Rician K-factor of the transmitter-RIS hop.
    #[arg(long)]
    pub k1: Option<f64>,
    /// Rician K-factor of the RIS-receiver hop.
    #[arg(long)]
    pub k2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Blocklengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    /// Rate in bits per channel use.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Transmit SNR grid in dB, `start:stop:step` or a single value.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Chebyshev nodes, or `adaptive`.
    #[arg(long = "quad-order")]
    pub quad_order: Option<String>,
    /// Bound methods, comma separated: exact_2d, wald_1d, chebyshev, closed_form.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    /// Seed for Monte Carlo averaging of the reference curve.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average the reference curve over this many samples instead of by quadrature.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Skip the normal-approximation reference column.
    #[arg(long)]
    pub no_na: bool,
    /// Skip the asymptotic column.
    #[arg(long)]
    pub no_asymptotic: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "fast")]
    pub level: LevelArg,
    /// Shorthand for `--level fast`.
    #[arg(long, conflicts_with_all = ["full", "level"])]
    pub fast: bool,
    /// Shorthand for `--level full`.
    #[arg(long, conflicts_with = "level")]
    pub full: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Fast,
    Full,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the raw samples here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: SampleFileFormat,
}

#[derive(Debug, Args)]
pub struct Alpha1Args {
    /// Blocklengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<u32>,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
}

/// SNR grid in dB, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad SNR value `{t}` in `{s}`")))
        };
        let grid = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                SnrGrid {
                    start: v,
                    stop: v,
                    step: 1.0,
                }
            }
            [a, b, c] => SnrGrid {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            },
            _ => return Err(Error::Usage(format!("SNR grid `{s}` must be `start:stop:step` or one value"))),
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Usage(format!("SNR step {} must be positive", self.step)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop) {
            return Err(Error::Usage(format!("SNR range {}..{} is empty", self.start, self.stop)));
        }
        if (self.stop - self.start) / self.step > 1e5 {
            return Err(Error::Usage("SNR grid has more than 1e5 points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // from the index, so the values do not drift
        (0..count).map(|i| self.start + self.step * i as f64).collect()
    }
}

/// Everything a sweep needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub grid: SnrGrid,
    pub n_list: Vec<u32>,
    pub rate: f64,
    pub spec: RisChannelSpec,
    pub link: LinkBudget,
    pub methods: Vec<Method>,
    pub quad_order: QuadOrder,
    pub include_na: bool,
    pub include_asymptotic: bool,
    pub na_trials: Option<usize>,
    pub seed: u64,
    pub format: Format,
    pub output_path: Option<PathBuf>,
}

impl Default for SweepSpec {
    /// Two blocklengths at rate ½ over the N_ris = 4 crossover region.
    fn default() -> Self {
        SweepSpec {
            grid: SnrGrid {
                start: 27.0,
                stop: 46.0,
                step: 1.0,
            },
            n_list: vec![64, 128],
            rate: 0.5,
            spec: RisChannelSpec::new(4, 1.0, 0.5),
            link: LinkBudget::default(),
            methods: vec![Method::ClosedForm, Method::Chebyshev, Method::Exact2d],
            quad_order: QuadOrder::Adaptive,
            include_na: true,
            include_asymptotic: true,
            na_trials: None,
            seed: 1,
            format: Format::Csv,
            output_path: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_list.is_empty() {
            return Err(Error::Usage("the blocklength list is empty".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::Usage(format!("blocklength {n} must be at least 2")));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Usage(format!("rate {} must be positive", self.rate)));
        }
        if self.methods.contains(&Method::Asymptotic) {
            return Err(Error::Usage("the asymptotic form is a column of its own, not a method".into()));
        }
        if let QuadOrder::Fixed(0) = self.quad_order {
            return Err(Error::Usage("quadrature order must be at least 1".into()));
        }
        if self.na_trials == Some(0) {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        self.spec.validate()?;
        crate::channel::friis(self.link)?;
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    link: LinkSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    n: Option<Vec<u32>>,
    rate: Option<f64>,
    snr_db: Option<String>,
    methods: Option<Vec<String>>,
    quad_order: Option<toml::Value>,
    include_na: Option<bool>,
    include_asymptotic: Option<bool>,
    trials: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    n_ris: Option<u32>,
    k1: Option<f64>,
    k2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    rx_power_db: Option<f64>,
    gain_tx: Option<f64>,
    gain_rx: Option<f64>,
    wavelength: Option<f64>,
    d1: Option<f64>,
    d2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<Format>,
    path: Option<PathBuf>,
}

fn parse_methods(list: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for s in list {
        let m = Method::parse(s.trim()).ok_or_else(|| Error::Usage(format!("unknown method `{s}`")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no bound method selected".into()));
    }
    Ok(out)
}

fn parse_order(s: &str) -> Result<QuadOrder> {
    if s.eq_ignore_ascii_case("adaptive") {
        return Ok(QuadOrder::Adaptive);
    }
    s.parse::<usize>()
        .ok()
        .filter(|&k| k > 0)
        .map(QuadOrder::Fixed)
        .ok_or_else(|| Error::Usage(format!("quadrature order `{s}` must be a positive integer or `adaptive`")))
}

fn apply_channel(spec: &mut RisChannelSpec, nris: Option<u32>, k1: Option<f64>, k2: Option<f64>) {
    let n_ris = nris.unwrap_or(spec.n_ris);
    let k1 = k1.unwrap_or(spec.k_factor_1);
    let k2 = k2.unwrap_or(spec.k_factor_2);
    *spec = RisChannelSpec::new(n_ris, k1, k2);
}

/// Defaults, then the config file, then flags.
pub fn build_sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let mut s = SweepSpec::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(n) = cfg.sweep.n {
            s.n_list = n;
        }
        if let Some(r) = cfg.sweep.rate {
            s.rate = r;
        }
        if let Some(g) = &cfg.sweep.snr_db {
            s.grid = SnrGrid::parse(g)?;
        }
        if let Some(m) = &cfg.sweep.methods {
            s.methods = parse_methods(m)?;
        }
        if let Some(q) = &cfg.sweep.quad_order {
            s.quad_order = match q {
                toml::Value::Integer(k) if *k > 0 => QuadOrder::Fixed(*k as usize),
                toml::Value::String(t) => parse_order(t)?,
                other => return Err(Error::Usage(format!("quad_order = {other} is not valid"))),
            };
        }
        s.include_na = cfg.sweep.include_na.unwrap_or(s.include_na);
        s.include_asymptotic = cfg.sweep.include_asymptotic.unwrap_or(s.include_asymptotic);
        s.na_trials = cfg.sweep.trials.or(s.na_trials);
        s.seed = cfg.sweep.seed.unwrap_or(s.seed);
        apply_channel(&mut s.spec, cfg.channel.n_ris, cfg.channel.k1, cfg.channel.k2);
        let l = &cfg.link;
        if let Some(db) = l.rx_power_db {
            s.link.rx_power = Some(10f64.powf(db / 10.0));
        }
        s.link.gain_tx = l.gain_tx.unwrap_or(s.link.gain_tx);
        s.link.gain_rx = l.gain_rx.unwrap_or(s.link.gain_rx);
        s.link.wavelength = l.wavelength.unwrap_or(s.link.wavelength);
        s.link.d1 = l.d1.unwrap_or(s.link.d1);
        s.link.d2 = l.d2.unwrap_or(s.link.d2);
        s.format = cfg.output.format.unwrap_or(s.format);
        s.output_path = cfg.output.path.or(s.output_path);
    }
    if let Some(n) = &args.n {
        s.n_list = n.clone();
    }
    if let Some(r) = args.rate {
        s.rate = r;
    }
    if let Some(g) = &args.snr_db {
        s.grid = SnrGrid::parse(g)?;
    }
    apply_channel(&mut s.spec, args.channel.nris, args.channel.k1, args.channel.k2);
    if let Some(q) = &args.quad_order {
        s.quad_order = parse_order(q)?;
    }
    if let Some(m) = &args.method {
        s.methods = parse_methods(m)?;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if args.trials.is_some() {
        s.na_trials = args.trials;
    }
    s.include_na &= !args.no_na;
    s.include_asymptotic &= !args.no_asymptotic;
    if let Some(f) = args.format {
        s.format = f;
    }
    if args.out.is_some() {
        s.output_path = args.out.clone();
    }
    s.validate()?;
    Ok(s)
}

/// Short name of an error for row markers.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain { .. } => "domain",
        Error::Convergence { .. } => "convergence",
        Error::Underflow { .. } => "underflow",
        Error::Unsatisfiable(_) => "unsatisfiable",
        Error::Usage(_) => "usage",
        Error::Unsupported(_) => "unsupported",
        Error::Interpretation { .. } => "interpretation",
        Error::UnresolvedFormula { .. } => "unresolved_formula",
        Error::OutOfRegime(_) => "out_of_regime",
        Error::Accuracy { .. } => "accuracy",
    }
}

/// A value cell: a number, not requested, or an explicit marker.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Absent,
    /// The quantity does not exist at this point (closed form out of regime).
    Undefined(&'static str),
    Failed(&'static str),
}

impl Cell {
    fn from_result(r: Result<f64>) -> Cell {
        match r {
            Ok(v) => Cell::Value(v),
            Err(e @ Error::OutOfRegime(_)) => Cell::Undefined(error_kind(&e)),
            Err(e) => Cell::Failed(error_kind(&e)),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Value(v) => format!("{v:e}"),
            Cell::Absent => String::new(),
            Cell::Undefined(k) => format!("undefined:{k}"),
            Cell::Failed(k) => format!("error:{k}"),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Value(v) => json!(v),
            _ => Value::Null,
        }
    }

    fn marker(&self) -> Option<String> {
        match self {
            Cell::Undefined(k) => Some(format!("undefined:{k}")),
            Cell::Failed(k) => Some(format!("error:{k}")),
            _ => None,
        }
    }
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "n",
    "rate",
    "snr_db",
    "alpha1_rad",
    "bound_closed",
    "bound_chebyshev",
    "bound_wald",
    "bound_oracle",
    "asymptotic",
    "na_reference",
    "clamped_flags",
    "quad_order_used",
    "status",
];

const VALUE_COLUMNS: [(&str, Option<Method>); 6] = [
    ("bound_closed", Some(Method::ClosedForm)),
    ("bound_chebyshev", Some(Method::Chebyshev)),
    ("bound_wald", Some(Method::Wald1d)),
    ("bound_oracle", Some(Method::Exact2d)),
    ("asymptotic", None),
    ("na_reference", None),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u32,
    pub rate: f64,
    pub snr_db: f64,
    pub alpha1: Cell,
    /// In [`VALUE_COLUMNS`] order.
    pub values: Vec<Cell>,
    pub clamped: Vec<&'static str>,
    pub quad_orders: Vec<(&'static str, usize)>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        std::iter::once(&self.alpha1)
            .chain(&self.values)
            .any(|c| matches!(c, Cell::Failed(_)))
    }

    fn clamped_text(&self) -> String {
        if self.clamped.is_empty() {
            "none".into()
        } else {
            self.clamped.join(";")
        }
    }

    fn orders_text(&self) -> String {
        if self.quad_orders.is_empty() {
            return "none".into();
        }
        let parts: Vec<String> = self.quad_orders.iter().map(|(m, k)| format!("{m}={k}")).collect();
        parts.join(";")
    }
}

fn sweep_cell(s: &SweepSpec, n: u32, db: f64) -> SweepRow {
    let snr = s.link.rx_snr_from_tx_db(db);
    let mut row = SweepRow {
        n,
        rate: s.rate,
        snr_db: db,
        alpha1: Cell::from_result(solve_alpha1(n, s.rate).map(|c| c.alpha1)),
        values: Vec::new(),
        clamped: Vec::new(),
        quad_orders: Vec::new(),
    };
    let record = |row: &mut SweepRow, r: Result<CurvePoint>| {
        if let Ok(p) = &r {
            if p.clamped {
                row.clamped.push(p.query.method.name());
            }
            if let Some(k) = p.quad_order_used {
                row.quad_orders.push((p.query.method.name(), k));
            }
        }
        Cell::from_result(r.map(|p| p.expected_bound))
    };
    for (col, method) in VALUE_COLUMNS {
        let cell = match (col, method) {
            (_, Some(m)) if s.methods.contains(&m) => {
                let q = BoundQuery::new(n, s.rate, snr, m).with_order(s.quad_order);
                record(&mut row, expected_bound(&q, &s.spec))
            }
            ("asymptotic", None) if s.include_asymptotic => {
                let q = BoundQuery::new(n, s.rate, snr, Method::Asymptotic);
                record(&mut row, expected_bound(&q, &s.spec))
            }
            ("na_reference", None) if s.include_na => {
                let averaging = match s.na_trials {
                    Some(trials) => Averaging::MonteCarlo { trials, seed: s.seed },
                    None => Averaging::Quadrature,
                };
                let q = NaQuery {
                    averaging,
                    ..NaQuery::new(n, s.rate, snr)
                };
                Cell::from_result(na_error(&q, &s.spec).map(|v| v.value))
            }
            _ => Cell::Absent,
        };
        row.values.push(cell);
    }
    row
}

/// Evaluates every `(n, snr)` cell, `n`-major, in parallel.
pub fn run_sweep(s: &SweepSpec) -> Vec<SweepRow> {
    let points = s.grid.points();
    let cells: Vec<(u32, f64)> = s.n_list.iter().flat_map(|&n| points.iter().map(move |&db| (n, db))).collect();
    cells.par_iter().map(|&(n, db)| sweep_cell(s, n, db)).collect()
}

fn method_list(s: &SweepSpec) -> String {
    let names: Vec<&str> = s.methods.iter().map(|m| m.name()).collect();
    names.join(",")
}

/// Run metadata as ordered key/value pairs.
pub fn sweep_metadata(s: &SweepSpec) -> Vec<(&'static str, String)> {
    let moments = analytic_moments(&s.spec).ok();
    let fit = moments.as_ref().and_then(|m| gamma_fit(m).ok());
    let lemma = crate::bound::resolve_lemma_variant().map(|r| r.variant.name()).unwrap_or("unresolved");
    vec![
        ("tool", format!("ris-spb {}", env!("CARGO_PKG_VERSION"))),
        ("seed", s.seed.to_string()),
        ("formula_ledger_sha256", ledger::ledger_sha256()),
        ("n_list", s.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
        ("rate", format!("{}", s.rate)),
        ("snr_db", format!("{}:{}:{}", s.grid.start, s.grid.stop, s.grid.step)),
        ("snr_axis", "transmit P/N0 in dB; bounds use P/N0 times the free-space path gain".into()),
        ("path_gain_db", format!("{}", s.link.path_gain_db())),
        ("n_ris", s.spec.n_ris.to_string()),
        ("k_factors", format!("{},{}", s.spec.k_factor_1, s.spec.k_factor_2)),
        ("omega", format!("{},{}", s.spec.omega_1, s.spec.omega_2)),
        (
            "moments_k1_k2",
            moments.map(|m| format!("{:e},{:e}", m.k1, m.k2)).unwrap_or_else(|| "error".into()),
        ),
        (
            "gamma_fit_a_b",
            fit.map(|f| format!("{:e},{:e}", f.a, f.b)).unwrap_or_else(|| "error".into()),
        ),
        ("methods", method_list(s)),
        (
            "quad_order",
            match s.quad_order {
                QuadOrder::Adaptive => "adaptive".into(),
                QuadOrder::Fixed(k) => k.to_string(),
            },
        ),
        ("lemma_variant", lemma.into()),
        ("variance_interpretation", "conditional (chebyshev, wald_1d, asymptotic); second_moment (closed_form)".into()),
        (
            "na_reference",
            if s.include_na {
                match s.na_trials {
                    Some(t) => format!("normal approximation baseline, not a bound; monte carlo {t} samples"),
                    None => "normal approximation baseline, not a bound; quadrature".into(),
                }
            } else {
                "off".into()
            },
        ),
    ]
}

pub fn render_csv(s: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for (k, v) in sweep_metadata(s) {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(out, "{}", SWEEP_COLUMNS.join(","));
    for r in rows {
        let mut fields = vec![r.n.to_string(), format!("{}", r.rate), format!("{}", r.snr_db), r.alpha1.csv()];
        fields.extend(r.values.iter().map(Cell::csv));
        fields.push(r.clamped_text());
        fields.push(r.orders_text());
        fields.push(if r.failed() { "error".into() } else { "ok".into() });
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn render_json(s: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut meta = Map::new();
    for (k, v) in sweep_metadata(s) {
        meta.insert(k.into(), json!(v));
    }
    meta.insert("columns".into(), json!(SWEEP_COLUMNS));
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut o = Map::new();
            o.insert("n".into(), json!(r.n));
            o.insert("rate".into(), json!(r.rate));
            o.insert("snr_db".into(), json!(r.snr_db));
            o.insert("alpha1_rad".into(), r.alpha1.json());
            let mut markers = Map::new();
            if let Some(m) = r.alpha1.marker() {
                markers.insert("alpha1_rad".into(), json!(m));
            }
            for ((col, _), cell) in VALUE_COLUMNS.iter().zip(&r.values) {
                o.insert((*col).into(), cell.json());
                if let Some(m) = cell.marker() {
                    markers.insert((*col).into(), json!(m));
                }
            }
            o.insert("clamped_flags".into(), json!(r.clamped));
            let orders: Map<String, Value> = r.quad_orders.iter().map(|(m, k)| ((*m).to_string(), json!(k))).collect();
            o.insert("quad_order_used".into(), Value::Object(orders));
            o.insert("status".into(), json!(if r.failed() { "error" } else { "ok" }));
            o.insert("markers".into(), Value::Object(markers));
            Value::Object(o)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({ "meta": meta, "rows": rows })).expect("finite values");
    text.push('\n');
    text
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::Usage(format!("cannot write output: {e}"))),
    }
}

fn exit_for(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_NUMERICAL
    }
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let spec = match build_sweep_spec(args) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "ris-spb sweep: {e}");
            return exit_for(&e);
        }
    };
    let rows = run_sweep(&spec);
    let text = match spec.format {
        Format::Csv => render_csv(&spec, &rows),
        Format::Json => render_json(&spec, &rows),
    };
    if let Err(e) = emit(&text, spec.output_path.as_deref(), stdout) {
        let _ = writeln!(stderr, "ris-spb sweep: {e}");
        return EXIT_USAGE;
    }
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        let _ = writeln!(stderr, "ris-spb sweep: {failed} row(s) failed; see status column");
        return EXIT_NUMERICAL;
    }
    EXIT_OK
}

fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let level = if args.full || (!args.fast && args.level == LevelArg::Full) {
        Level::Full
    } else {
        Level::Fast
    };
    let report = validate::run(level, args.seed);
    let text = report.render();
    if let Err(e) = emit(&text, None, stdout) {
        let _ = writeln!(stderr, "ris-spb validate: {e}");
        return EXIT_USAGE;
    }
    if let Some(p) = &args.out {
        if let Err(e) = emit(&text, Some(p), stdout) {
            let _ = writeln!(stderr, "ris-spb validate: {e}");
            return EXIT_USAGE;
        }
    }
    if report.passed() {
        EXIT_OK
    } else {
        let _ = writeln!(stderr, "ris-spb validate: failing: {}", report.failing().join(", "));
        EXIT_VALIDATION
    }
}

fn cmd_sample(args: &SampleArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let run = || -> Result<String> {
        let mut spec = RisChannelSpec::new(4, 1.0, 0.5);
        apply_channel(&mut spec, args.channel.nris, args.channel.k1, args.channel.k2);
        let m = analytic_moments(&spec)?;
        let fit = gamma_fit(&m)?;
        let s = sample_a(&spec, args.trials, args.seed)?;
        if let Some(p) = &args.out {
            let format = match args.format {
                SampleFileFormat::Csv => SampleFormat::Csv,
                SampleFileFormat::Binary => SampleFormat::Binary,
            };
            write_samples(p, &s.samples, format)
                .map_err(|e| Error::Usage(format!("cannot write {}: {e}", p.display())))?;
        }
        let mut out = String::new();
        let _ = writeln!(out, "n_ris,k1_factor,k2_factor,trials,seed,mean,mean_se,variance,variance_se,k1,k2,gamma_a,gamma_b,ks_distance");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            spec.n_ris,
            spec.k_factor_1,
            spec.k_factor_2,
            args.trials,
            args.seed,
            s.mean.mean,
            s.mean.std_error,
            s.variance,
            s.variance_std_error,
            m.k1,
            m.k2,
            fit.a,
            fit.b,
            ks_distance(&s.samples, &fit)
        );
        Ok(out)
    };
    match run() {
        Ok(text) => match emit(&text, None, stdout) {
            Ok(()) => EXIT_OK,
            Err(_) => EXIT_USAGE,
        },
        Err(e) => {
            let _ = writeln!(stderr, "ris-spb sample: {e}");
            exit_for(&e)
        }
    }
}

fn cmd_alpha1(args: &Alpha1Args, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut out = String::from("n,rate,alpha1_rad,residual\n");
    for &n in &args.n {
        match solve_alpha1(n, args.rate) {
            Ok(c) => {
                let _ = writeln!(out, "{n},{},{:e},{:e}", args.rate, c.alpha1, c.residual);
            }
            Err(e) => {
                let _ = writeln!(stderr, "ris-spb alpha1: n = {n}: {e}");
                return exit_for(&e);
            }
        }
    }
    match emit(&out, None, stdout) {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_USAGE,
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
                return EXIT_OK;
            }
            let _ = stderr.write_all(text.as_bytes());
            return EXIT_USAGE;
        }
    };
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
        Command::Validate(a) => cmd_validate(a, stdout, stderr),
        Command::Sample(a) => cmd_sample(a, stdout, stderr),
        Command::Alpha1(a) => cmd_alpha1(a, stdout, stderr),
    }
}
