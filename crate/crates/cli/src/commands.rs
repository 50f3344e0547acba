//! Subcommand bodies. Each one computes everything first and only then writes files.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use halfplane_core::acceptance::{self, CriterionResult};
use halfplane_core::correspondence::{weyl_map_reported, wigner_map_reported};
use halfplane_core::flow::{compare_flows, evolve_hilbert, FlowParams};
use halfplane_core::gk::{gk_dual_symbol, gk_symbol, gk_wigner, GkParams};
use halfplane_core::io;
use halfplane_core::star::{
    beta_grid_for, star_product_operator_beta, star_product_series, StarConfig, StarMethod,
};
use halfplane_core::wigner::affine_wigner;
use halfplane_core::{BetaSymbol, CalculusError, PhaseSymbol, TimeGrid};

use crate::config::{field_err, report, ConfigError, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Calc(CalculusError),
    /// A selftest criterion missed its tolerance.
    Failed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Calc(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<CalculusError> for CliError {
    fn from(e: CalculusError) -> Self {
        CliError::Calc(e)
    }
}

type Res<T> = Result<T, CliError>;

pub struct Globals {
    pub config: Option<PathBuf>,
    pub serial: bool,
    pub threads: Option<usize>,
}

/// Resolve the configuration, build the thread pool and run `body` inside it.
pub fn run<P>(name: &str, flags: &P, g: &Globals, body: fn(&RunConfig, P) -> Res<()>) -> Res<()>
where
    P: Serialize + DeserializeOwned + Send,
{
    let (cfg, params) = RunConfig::resolve(name, flags, g.serial, g.threads, g.config.as_deref())?;
    let threads = if cfg.serial { Some(1) } else { cfg.threads };
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| field_err("threads", e))?;
    pool.install(|| body(&cfg, params))
}

fn need<'a, T>(v: &'a Option<T>, field: &str) -> Res<&'a T> {
    v.as_ref().ok_or_else(|| field_err(field, "required").into())
}

fn tgrid(tmin: f64, tmax: f64, ntime: usize) -> Res<TimeGrid> {
    TimeGrid::new(tmin, tmax, ntime).map_err(|e| field_err("tmin/tmax/ntime", e).into())
}

/// `dir/stem.csv` -> `dir/stem_report.json`.
fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_report.json"))
}

fn write_report(path: &Path, cfg: &RunConfig, body: Value) -> Res<()> {
    io::write_json(path, &report(cfg, body))?;
    Ok(())
}

fn tmin_default() -> f64 {
    -20.0
}
fn tmax_default() -> f64 {
    20.0
}
fn ntime_default() -> usize {
    256
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerArgs {
    /// Signal CSV (`f,re,im`).
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long, default_value_t = tmin_default(), allow_hyphen_values = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = tmax_default(), allow_hyphen_values = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = ntime_default())]
    pub ntime: usize,
    /// Output symbol CSV; the report goes to `<stem>_report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn wigner(cfg: &RunConfig, a: WignerArgs) -> Res<()> {
    let s = io::read_signal(need(&a.signal, "signal")?)?;
    let out = need(&a.out, "out")?;
    let w = affine_wigner(&s, tgrid(a.tmin, a.tmax, a.ntime)?);
    io::write_symbol(out, &w.symbol)?;
    write_report(&report_path(out), cfg, serde_json::to_value(w.report).unwrap())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolArgs {
    /// Binary kernel file with its JSON sidecar.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long, default_value_t = tmin_default(), allow_hyphen_values = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = tmax_default(), allow_hyphen_values = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = ntime_default())]
    pub ntime: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn symbol(cfg: &RunConfig, a: SymbolArgs) -> Res<()> {
    let k = io::read_kernel(need(&a.kernel, "kernel")?)?;
    let out = need(&a.out, "out")?;
    let (sym, tr) = wigner_map_reported(&k, tgrid(a.tmin, a.tmax, a.ntime)?);
    io::write_symbol(out, &sym)?;
    write_report(&report_path(out), cfg, json!({ "truncation": tr }))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelArgs {
    /// Symbol CSV (`t,f,re,im`) with its JSON sidecar.
    #[arg(long)]
    pub symbol: Option<PathBuf>,
    /// Output binary kernel.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn kernel(cfg: &RunConfig, a: KernelArgs) -> Res<()> {
    let sym = io::read_symbol(need(&a.symbol, "symbol")?)?;
    let out = need(&a.out, "out")?;
    let (k, tr) = weyl_map_reported(&sym);
    io::write_kernel(out, &k)?;
    write_report(
        &report_path(out),
        cfg,
        json!({ "truncation": tr, "hermiticity_residual": k.hermiticity_residual() }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Operator,
    Series,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarArgs {
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Operator)]
    pub method: Method,
    /// Series truncation order.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run both methods and write `{oracle_error, imag_residual}` here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn product(a: &BetaSymbol, b: &BetaSymbol, m: StarMethod, order: usize) -> Res<BetaSymbol> {
    Ok(match m {
        StarMethod::Operator => star_product_operator_beta(a, b)?,
        StarMethod::Series => star_product_series(a, b, &StarConfig { order, ..Default::default() })?,
    })
}

/// `max |Im(A*B + B*A)| / max |A*B + B*A|`, zero for real inputs up to discretization.
fn imag_residual(ab: &BetaSymbol, ba: &BetaSymbol) -> f64 {
    let s = ab.zip_with(ba, |x, y| x + y).expect("same grids");
    let mx = s.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let im = s.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if mx > 0.0 {
        im / mx
    } else {
        0.0
    }
}

pub fn star(cfg: &RunConfig, a: StarArgs) -> Res<()> {
    let sa = io::read_symbol(need(&a.a, "a")?)?;
    let sb = io::read_symbol(need(&a.b, "b")?)?;
    let out = need(&a.out, "out")?;
    sa.check_same(&sb)?;
    let bg = beta_grid_for(&sa.tgrid, &sa.fgrid)?;
    let (ba, bb) = (BetaSymbol::from_phase(&sa, bg), BetaSymbol::from_phase(&sb, bg));
    let method = match a.method {
        Method::Operator => StarMethod::Operator,
        Method::Series => StarMethod::Series,
    };
    let ab = product(&ba, &bb, method, a.order)?;
    let body = match &a.report {
        Some(_) => {
            let other = match method {
                StarMethod::Operator => StarMethod::Series,
                StarMethod::Series => StarMethod::Operator,
            };
            let alt = product(&ba, &bb, other, a.order)?;
            let (series, oracle) = match method {
                StarMethod::Operator => (&alt, &ab),
                StarMethod::Series => (&ab, &alt),
            };
            let err = series.zip_with(oracle, |x, y| x - y)?.l2() / oracle.l2();
            let ba_ab = product(&bb, &ba, method, a.order)?;
            Some(json!({
                "oracle_error": err,
                "imag_residual": imag_residual(&ab, &ba_ab),
                "order": a.order,
            }))
        }
        None => None,
    };
    let result: PhaseSymbol = ab.to_phase(sa.tgrid);
    io::write_symbol(out, &result)?;
    if let (Some(path), Some(body)) = (&a.report, body) {
        write_report(path, cfg, body)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowArgs {
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Comma-separated flow times.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    /// Prefix of the output files, e.g. `out/run_`.
    #[arg(long)]
    pub out_prefix: Option<String>,
    #[arg(long, default_value_t = tmin_default(), allow_hyphen_values = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = tmax_default(), allow_hyphen_values = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = ntime_default())]
    pub ntime: usize,
}

pub fn flow(cfg: &RunConfig, a: FlowArgs) -> Res<()> {
    let s = io::read_signal(need(&a.signal, "signal")?)?;
    let alphas = need(&a.alphas, "alphas")?;
    if alphas.is_empty() {
        return Err(field_err("alphas", "empty").into());
    }
    let prefix = need(&a.out_prefix, "out_prefix")?;
    let tg = tgrid(a.tmin, a.tmax, a.ntime)?;
    let p = FlowParams::new(a.mu, a.nu, a.sigma, 0.0);
    let rep = compare_flows(&s, &p, alphas, tg)?;
    let ws: Vec<PhaseSymbol> =
        alphas.iter().map(|&al| affine_wigner(&evolve_hilbert(&s, &p.at(al)), tg).symbol).collect();
    let mut files = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        let path = PathBuf::from(format!("{prefix}wigner_{i}.csv"));
        io::write_symbol(&path, w)?;
        files.push(path.to_string_lossy().into_owned());
    }
    let mut body = serde_json::to_value(&rep).unwrap();
    body["max_distance"] = json!(rep.max_distance());
    body["files"] = json!(files);
    write_report(&PathBuf::from(format!("{prefix}flow_report.json")), cfg, body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GkMode {
    /// Symbol of a kernel.
    Symbol,
    /// Dual symbol of a kernel.
    Dual,
    /// Wigner function of a signal.
    Wigner,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, conflicts_with = "kernel")]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GkMode::Symbol)]
    pub mode: GkMode,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = tmin_default(), allow_hyphen_values = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = tmax_default(), allow_hyphen_values = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = ntime_default())]
    pub ntime: usize,
}

pub fn gk(cfg: &RunConfig, a: GkArgs) -> Res<()> {
    let k = *need(&a.k, "k")?;
    let p = GkParams::new(k, a.beta0).map_err(|e| match e {
        CalculusError::DegenerateK => {
            field_err("k", "k = 1 is the degenerate member of the family and has no correspondence rule")
        }
        e => field_err("k/beta0", e),
    })?;
    let out = need(&a.out, "out")?;
    let tg = tgrid(a.tmin, a.tmax, a.ntime)?;
    let sym = match a.mode {
        GkMode::Wigner => {
            let s = io::read_signal(need(&a.signal, "signal")?)?;
            gk_wigner(&s, p, tg)?
        }
        GkMode::Symbol | GkMode::Dual => {
            let path = need(&a.kernel, "kernel")?;
            let kern = io::read_kernel(path)?;
            if a.mode == GkMode::Symbol {
                gk_symbol(&kern, p, tg)?
            } else {
                gk_dual_symbol(&kern, p, tg)?
            }
        }
    };
    io::write_symbol(out, &sym)?;
    let mx = sym.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let im = sym.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let body = json!({
        "k": p.k,
        "beta0": p.beta0,
        "l2": sym.l2(),
        "max_imag_residual": if mx > 0.0 { im / mx } else { 0.0 },
    });
    write_report(&report_path(out), cfg, body)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {
    /// Smaller grids where the checks allow it.
    #[arg(long)]
    pub quick: bool,
    /// JSON pass/fail report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit 0 when the only failures are the checks known to be out of reach.
    #[arg(long)]
    pub expect_known_failures: bool,
    /// Comma-separated criterion ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u8>>,
}

pub fn selftest(cfg: &RunConfig, a: SelftestArgs) -> Res<()> {
    let n = acceptance::NAMES.len() as u8;
    let ids: Vec<u8> = a.only.clone().unwrap_or_else(|| (1..=n).collect());
    if let Some(bad) = ids.iter().find(|&&id| id == 0 || id > n) {
        return Err(field_err("only", format!("no criterion {bad}")).into());
    }
    let results: Vec<CriterionResult> = ids
        .into_iter()
        .map(|id| {
            let r = acceptance::run(id, a.quick);
            println!("{r}");
            r
        })
        .collect();
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let known = failed.iter().all(|id| acceptance::UNATTAINABLE.contains(id));
    if let Some(path) = &a.report {
        write_report(
            path,
            cfg,
            json!({
                "passed": failed.is_empty(),
                "failed": failed,
                "known_failures": acceptance::UNATTAINABLE,
                "results": results,
            }),
        )?;
    }
    if failed.is_empty() || (a.expect_known_failures && known) {
        Ok(())
    } else {
        Err(CliError::Failed(format!("selftest: criteria {failed:?} failed")))
    }
}
