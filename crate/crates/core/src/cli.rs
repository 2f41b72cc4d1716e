//! Command-line front end.
//!
//! Potentials are given either by `--N --M --u --v --lambda` or as one
//! whitespace-separated string `--spec "N M u v lambda"`, describing
//! `Π² = u q^N + v q^M + λ`.
//!
//! Exit codes: 0 success, 1 failed verification, 2 bad arguments or input,
//! 3 accuracy not reached (a JSON diagnostic goes to stderr).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::action::{binomial_action, improper_action_with, ActionOptions, ActionValue};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::mellin::{contributing_poles, default_window, enumerate_poles, MellinPole};
use crate::potential::{classify, PotentialSpec, Rho};
use crate::predictions::{
    measure, predict_det_asymptotic, predict_det_ratio_g, predict_det_slope, predict_z1, verify, Family, Measurement,
    PredictionReport, ALL_CRITERIA, DEFAULT_GRID,
};
use crate::spectral::{
    det_ratio, harmonic_det, shooting_det, shooting_log_parts, zeta_from_det, zeta_full, zeta_skew, DetRoute,
    SpectralData, ZetaValue,
};
use crate::spectrum::{eigenvalues, SpectrumResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ACCURACY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "wkbzeta",
    version,
    about = "Spectral zeta functions and determinants of -d²/dq² + u q^N + v q^M"
)]
struct Cli {
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. --set spectrum_tol=1e-8.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Directory for multi-file outputs (default: $WKBZETA_OUT_DIR or .).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// "N M u v lambda".
    #[arg(long, conflicts_with_all = ["n", "m", "u", "v", "lambda"])]
    spec: Option<String>,
    #[arg(long = "N", id = "n")]
    n: Option<u32>,
    #[arg(long = "M", id = "m", default_value_t = 0)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    #[arg(long, default_value_t = 0.0)]
    v: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lambda: f64,
}

impl SpecArgs {
    fn resolve(&self) -> Result<PotentialSpec> {
        match (&self.spec, self.n) {
            (Some(text), _) => parse_spec(text),
            (None, Some(n)) => PotentialSpec::new(n, self.m, self.u, self.v, self.lambda),
            (None, None) => Err(Error::domain("give --spec or --N")),
        }
    }
}

/// Parses `"N M u v lambda"`.
pub fn parse_spec(text: &str) -> Result<PotentialSpec> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(Error::domain(format!(
            "spec needs 5 fields 'N M u v lambda', got '{text}'"
        )));
    }
    let int = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| Error::domain(format!("'{s}' is not an even integer exponent")))
    };
    let real = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::domain(format!("'{s}' is not a number")))
    };
    PotentialSpec::new(
        int(parts[0])?,
        int(parts[1])?,
        real(parts[2])?,
        real(parts[3])?,
        real(parts[4])?,
    )
}

/// Parses `"M,N"` for `q^M + g q^N`.
pub fn parse_family(text: &str) -> Result<Family> {
    let (m, n) = text
        .split_once(',')
        .ok_or_else(|| Error::domain(format!("family must be 'M,N', got '{text}'")))?;
    let p = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::domain(format!("'{s}' is not an integer")))
    };
    Family::new(p(m)?, p(n)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if text == "default" {
        return Ok(DEFAULT_GRID.to_vec());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad grid value '{s}'")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActionMode {
    /// Closed form when λ = 0, numeric regularization otherwise.
    Auto,
    Closed,
    Numeric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DetMode {
    Shooting,
    /// Closed form, harmonic potentials only.
    Closed,
    /// `D(λ)/D(0)` as a product over the computed spectrum.
    Product,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PredictQuantity {
    All,
    Z1,
    Ratio,
    Slope,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lowest eigenvalues.
    Spectrum {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 32)]
        count: usize,
    },
    /// Regularized action ∫_0^∞ Π dq.
    Action {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value_t = ActionMode::Auto)]
        method: ActionMode,
    },
    /// Mellin pole table.
    Poles {
        #[arg(long = "N")]
        n: u32,
        #[arg(long = "M")]
        m: u32,
        /// Window as "lo,hi" (rationals allowed, e.g. -3,7/2).
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
    /// Spectral determinants at the given λ.
    Det {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value_t = DetMode::Shooting)]
        method: DetMode,
        /// Levels used by the product method.
        #[arg(long, default_value_t = 256)]
        count: usize,
    },
    /// Spectral zeta function Z(s; E).
    Zeta {
        #[command(flatten)]
        spec: SpecArgs,
        /// Use the exact spectrum 2k+1 of q².
        #[arg(long, conflicts_with_all = ["spec", "n"])]
        harmonic: bool,
        #[arg(long)]
        s: f64,
        #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
        e: f64,
        /// Alternating (skew) zeta.
        #[arg(long)]
        skew: bool,
        /// Integer s by differentiating the shooting determinant.
        #[arg(long, conflicts_with = "skew")]
        from_det: bool,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Closed-form small-coupling predictions.
    Predict {
        /// "M,N" for q^M + g q^N.
        #[arg(long)]
        family: String,
        #[arg(long)]
        g: f64,
        #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
        e: f64,
        #[arg(long, value_enum, default_value_t = PredictQuantity::All)]
        quantity: PredictQuantity,
    },
    /// Measure and compare against the predictions over a grid of g.
    Verify {
        #[arg(long)]
        family: String,
        /// "default" or comma-separated decreasing g values.
        #[arg(long, default_value = "default")]
        grid: String,
    },
    /// Datasets of the small-coupling zeta behaviour for q² + g q⁴ and q² + g q⁶.
    Fig2 {
        #[arg(long, default_value = "default")]
        grid: String,
    },
}

/// Output record of `spectrum`.
#[derive(Debug, Serialize)]
struct SpectrumOut<'a> {
    spec: PotentialSpec,
    #[serde(flatten)]
    result: &'a SpectrumResult,
}

#[derive(Debug, Serialize)]
struct ActionOut {
    spec: PotentialSpec,
    #[serde(flatten)]
    action: ActionValue,
}

#[derive(Debug, Serialize)]
struct PolesOut {
    n: u32,
    m: u32,
    window: (String, String),
    poles: Vec<MellinPole>,
    leading: MellinPole,
    subleading: MellinPole,
}

#[derive(Debug, Serialize)]
struct DetOut {
    spec: PotentialSpec,
    method: &'static str,
    full: Option<f64>,
    skew: Option<f64>,
    even: Option<f64>,
    odd: Option<f64>,
    log_full: Option<f64>,
    log_skew: Option<f64>,
    /// Set for the product method, whose values are `D(λ)/D(0)`.
    relative_to_lambda0: bool,
    err_est: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ZetaOut {
    kind: &'static str,
    spec: PotentialSpec,
    count: usize,
    #[serde(flatten)]
    zeta: ZetaValue,
}

#[derive(Debug, Serialize)]
struct PredictOut {
    family: (u32, u32),
    g: f64,
    e: f64,
    v: f64,
    z1: Option<f64>,
    log_det_ratio: Option<f64>,
    det_slope: Option<f64>,
    log_prefactor_v_frame: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Fig2Left {
    family: String,
    #[serde(rename = "N")]
    n: u32,
    g: f64,
    v: f64,
    inv_v: f64,
    #[serde(rename = "ZP1")]
    zp1: f64,
    #[serde(rename = "Z2")]
    z2: f64,
    #[serde(rename = "ZP2")]
    zp2: f64,
}

#[derive(Debug, Serialize)]
struct Fig2Right {
    family: String,
    #[serde(rename = "N")]
    n: u32,
    g: f64,
    log_g: f64,
    #[serde(rename = "Z1")]
    z1: f64,
    #[serde(rename = "Z1_predicted")]
    z1_predicted: f64,
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    series: &'a str,
    g: f64,
    predicted: f64,
    measured: f64,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    k: usize,
    parity: &'static str,
    value: f64,
    err_est: f64,
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// What a command produced: the text for stdout (or `--output`) and whether
/// verification passed.
struct Outcome {
    text: String,
    passed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, passed: true }
    }
}

fn log_or_none(x: Option<f64>) -> Option<f64> {
    x.filter(|x| *x > 0.0).map(f64::ln)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::Config(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn report_csv(report: &PredictionReport) -> Result<String> {
    let mut rows = Vec::new();
    for s in &report.series {
        for (i, g) in report.grid.iter().enumerate() {
            rows.push(ReportRow {
                series: &s.name,
                g: *g,
                predicted: s.predicted[i],
                measured: s.measured[i],
                residual: s.residuals[i],
            });
        }
    }
    csv_string(&rows)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    let fmt = cfg.format;
    match &cli.command {
        Command::Spectrum { spec, count } => {
            let spec = spec.resolve()?;
            let result = eigenvalues(&spec, *count, cfg.spectrum_tol)?;
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&SpectrumOut { spec, result: &result }),
                OutputFormat::Csv => csv_string(
                    &result
                        .eigenvalues
                        .iter()
                        .map(|e| SpectrumRow {
                            k: e.k,
                            parity: e.parity.as_str(),
                            value: e.value,
                            err_est: e.err_est,
                        })
                        .collect::<Vec<_>>(),
                )?,
            }))
        }
        Command::Action { spec, method } => {
            let spec = spec.resolve()?;
            let closed = || -> Result<ActionValue> {
                if spec.lambda != 0.0 {
                    return Err(Error::Unsupported("closed forms need λ = 0".into()));
                }
                if spec.v == 0.0 {
                    // a regularized pure power has zero action
                    return Ok(ActionValue {
                        value: 0.0,
                        method: crate::action::ActionMethod::ClosedNormal,
                        residue_used: classify(&spec)?.beta_m1(),
                    });
                }
                binomial_action(spec.u, spec.v, spec.n as f64, spec.m as f64)
            };
            let numeric = || {
                improper_action_with(
                    &spec,
                    ActionOptions {
                        tol: cfg.action_tol,
                        ..Default::default()
                    },
                )
            };
            let action = match method {
                ActionMode::Closed => closed()?,
                ActionMode::Numeric => numeric()?,
                ActionMode::Auto if spec.lambda == 0.0 => closed()?,
                ActionMode::Auto => numeric()?,
            };
            let out = ActionOut { spec, action };
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&out),
                OutputFormat::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        #[serde(rename = "N")]
                        n: u32,
                        #[serde(rename = "M")]
                        m: u32,
                        u: f64,
                        v: f64,
                        lambda: f64,
                        value: f64,
                        method: String,
                    }
                    csv_string(&[Row {
                        n: spec.n,
                        m: spec.m,
                        u: spec.u,
                        v: spec.v,
                        lambda: spec.lambda,
                        value: action.value,
                        method: format!("{:?}", action.method),
                    }])?
                }
            }))
        }
        Command::Poles { n, m, window } => {
            let (lo, hi) = match window {
                None => default_window(),
                Some(w) => {
                    let (a, b) = w
                        .split_once(',')
                        .ok_or_else(|| Error::domain("window must be 'lo,hi'"))?;
                    let p = |s: &str| {
                        s.trim()
                            .parse::<Rho>()
                            .map_err(|_| Error::domain(format!("'{s}' is not a rational")))
                    };
                    (p(a)?, p(b)?)
                }
            };
            let poles = enumerate_poles(*n, *m, lo, hi)?;
            let (leading, subleading) = contributing_poles(*n, *m)?;
            let out = PolesOut {
                n: *n,
                m: *m,
                window: (lo.to_string(), hi.to_string()),
                poles,
                leading,
                subleading,
            };
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&out),
                OutputFormat::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        sigma0: String,
                        source: String,
                        index: u32,
                        mobile: bool,
                        left_of_contour: bool,
                        kept: bool,
                        confluent: bool,
                        d_v: String,
                        d_lambda: String,
                        d_g: String,
                    }
                    csv_string(
                        &out.poles
                            .iter()
                            .map(|p| Row {
                                sigma0: p.sigma0.to_string(),
                                source: format!("{:?}", p.source),
                                index: p.index,
                                mobile: p.mobile,
                                left_of_contour: p.left_of_contour,
                                kept: p.kept,
                                confluent: p.confluent_with.is_some(),
                                d_v: p.d_v.to_string(),
                                d_lambda: p.d_lambda.to_string(),
                                d_g: p.d_g.to_string(),
                            })
                            .collect::<Vec<_>>(),
                    )?
                }
            }))
        }
        Command::Det { spec, method, count } => {
            let spec = spec.resolve()?;
            let out = match method {
                DetMode::Shooting => {
                    let (det, _) = shooting_det(&spec)?;
                    let (even, odd) = shooting_log_parts(&spec)?;
                    DetOut {
                        spec,
                        method: "shooting",
                        full: det.full.filter(|x| x.is_finite() && *x != 0.0),
                        skew: det.skew.filter(|x| x.is_finite() && *x != 0.0),
                        even: det.even.filter(|x| x.is_finite() && *x != 0.0),
                        odd: det.odd.filter(|x| x.is_finite() && *x != 0.0),
                        log_full: (even.sign * odd.sign > 0.0).then_some(even.log_abs + odd.log_abs),
                        log_skew: (even.sign * odd.sign > 0.0).then_some(even.log_abs - odd.log_abs),
                        relative_to_lambda0: false,
                        err_est: None,
                    }
                }
                DetMode::Closed => {
                    if spec.n != 2 {
                        return Err(Error::Unsupported(
                            "closed-form determinants exist only for N = 2".into(),
                        ));
                    }
                    // u q² + v + λ: the constant shifts the spectral parameter
                    let det = harmonic_det(spec.u, spec.v + spec.lambda)?;
                    DetOut {
                        spec,
                        method: "closed_harmonic",
                        full: det.full,
                        skew: det.skew,
                        even: det.even,
                        odd: det.odd,
                        log_full: log_or_none(det.full),
                        log_skew: log_or_none(det.skew),
                        relative_to_lambda0: false,
                        err_est: Some(0.0),
                    }
                }
                DetMode::Product => {
                    let data = SpectralData::compute(&spec.with_lambda(0.0), *count, cfg.spectrum_tol)?;
                    let (full, skew) = det_ratio(&data, spec.lambda)?;
                    DetOut {
                        spec,
                        method: "product",
                        full: Some(full.value()),
                        skew: Some(skew.value()),
                        even: None,
                        odd: None,
                        log_full: (full.sign > 0.0).then_some(full.log_abs),
                        log_skew: (skew.sign > 0.0).then_some(skew.log_abs),
                        relative_to_lambda0: true,
                        err_est: None,
                    }
                }
            };
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&out),
                OutputFormat::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        method: &'static str,
                        full: Option<f64>,
                        skew: Option<f64>,
                        even: Option<f64>,
                        odd: Option<f64>,
                        log_full: Option<f64>,
                        relative_to_lambda0: bool,
                    }
                    csv_string(&[Row {
                        method: out.method,
                        full: out.full,
                        skew: out.skew,
                        even: out.even,
                        odd: out.odd,
                        log_full: out.log_full,
                        relative_to_lambda0: out.relative_to_lambda0,
                    }])?
                }
            }))
        }
        Command::Zeta {
            spec,
            harmonic,
            s,
            e,
            skew,
            from_det,
            count,
        } => {
            let (pspec, kind) = if *harmonic {
                (PotentialSpec::harmonic(), if *skew { "skew" } else { "full" })
            } else {
                (spec.resolve()?, if *skew { "skew" } else { "full" })
            };
            let count = count.unwrap_or(cfg.spectrum_count);
            let zeta = if *from_det {
                if s.fract() != 0.0 || *s < 1.0 {
                    return Err(Error::domain("--from-det needs a positive integer s"));
                }
                let route = if *harmonic {
                    DetRoute::Harmonic { v: 1.0 }
                } else {
                    DetRoute::Shooting(pspec)
                };
                zeta_from_det(&route, *s as u32, *e)?
            } else {
                let data = if *harmonic {
                    SpectralData::harmonic(count)
                } else {
                    SpectralData::compute(&pspec, count, cfg.spectrum_tol)?
                };
                if *skew {
                    zeta_skew(&data, *s, *e)?
                } else {
                    zeta_full(&data, *s, *e)?
                }
            };
            let out = ZetaOut {
                kind,
                spec: pspec,
                count,
                zeta,
            };
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&out),
                OutputFormat::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        kind: &'static str,
                        s: f64,
                        #[serde(rename = "E")]
                        e: f64,
                        value: f64,
                        err_est: f64,
                        tail_fraction: f64,
                    }
                    csv_string(&[Row {
                        kind,
                        s: zeta.s,
                        e: zeta.e,
                        value: zeta.value,
                        err_est: zeta.err_est,
                        tail_fraction: zeta.tail_fraction,
                    }])?
                }
            }))
        }
        Command::Predict { family, g, e, quantity } => {
            let fam = parse_family(family)?;
            let (v, lambda) = crate::potential::symanzik_map(fam.m, fam.n, *g, *e)?;
            let want = |q: PredictQuantity| {
                matches!(quantity, PredictQuantity::All)
                    || std::mem::discriminant(quantity) == std::mem::discriminant(&q)
            };
            let harmonic = fam.m == 2;
            let out = PredictOut {
                family: (fam.m, fam.n),
                g: *g,
                e: *e,
                v,
                z1: if want(PredictQuantity::Z1) && harmonic {
                    Some(predict_z1(fam.n, *g, *e)?)
                } else {
                    None
                },
                log_det_ratio: if want(PredictQuantity::Ratio) {
                    Some(predict_det_ratio_g(fam.n, fam.m, *g, *e)?)
                } else {
                    None
                },
                det_slope: if want(PredictQuantity::Slope) && harmonic {
                    Some(predict_det_slope(fam.n, *g)?)
                } else {
                    None
                },
                log_prefactor_v_frame: if matches!(quantity, PredictQuantity::All) {
                    Some(predict_det_asymptotic(fam.n, fam.m, v, lambda)?)
                } else {
                    None
                },
            };
            Ok(Outcome::ok(match fmt {
                OutputFormat::Json => json_string(&out),
                OutputFormat::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        #[serde(rename = "M")]
                        m: u32,
                        #[serde(rename = "N")]
                        n: u32,
                        g: f64,
                        #[serde(rename = "E")]
                        e: f64,
                        v: f64,
                        z1: Option<f64>,
                        log_det_ratio: Option<f64>,
                        det_slope: Option<f64>,
                        log_prefactor_v_frame: Option<f64>,
                    }
                    csv_string(&[Row {
                        m: fam.m,
                        n: fam.n,
                        g: *g,
                        e: *e,
                        v,
                        z1: out.z1,
                        log_det_ratio: out.log_det_ratio,
                        det_slope: out.det_slope,
                        log_prefactor_v_frame: out.log_prefactor_v_frame,
                    }])?
                }
            }))
        }
        Command::Verify { family, grid } => {
            let fam = parse_family(family)?;
            let grid = parse_grid(grid)?;
            let report = verify(fam, &grid, &ALL_CRITERIA, cfg)?;
            let text = match fmt {
                OutputFormat::Json => json_string(&report),
                OutputFormat::Csv => report_csv(&report)?,
            };
            Ok(Outcome {
                text,
                passed: report.passed(),
            })
        }
        Command::Fig2 { grid } => {
            let grid = parse_grid(grid)?;
            let dir = cfg.resolve_out_dir();
            let mut left = Vec::new();
            let mut right = Vec::new();
            for n in [4u32, 6] {
                let fam = Family::new(2, n)?;
                let label = format!("q2+gq{n}");
                let rows: Vec<Measurement> = fig2_measurements(fam, &grid, cfg)?;
                for x in &rows {
                    left.push(Fig2Left {
                        family: label.clone(),
                        n,
                        g: x.g,
                        v: x.v,
                        inv_v: 1.0 / x.v,
                        zp1: x.zp1.value,
                        z2: x.z2.value,
                        zp2: x.zp2.value,
                    });
                    right.push(Fig2Right {
                        family: label.clone(),
                        n,
                        g: x.g,
                        log_g: x.g.ln(),
                        z1: x.z1.value,
                        z1_predicted: predict_z1(n, x.g, 0.0)?,
                    });
                }
            }
            let lp = dir.join("fig2_left.csv");
            let rp = dir.join("fig2_right.csv");
            write_file(&lp, &csv_string(&left)?)?;
            write_file(&rp, &csv_string(&right)?)?;
            Ok(Outcome::ok(format!("{}\n{}\n", lp.display(), rp.display())))
        }
    }
}

fn fig2_measurements(fam: Family, grid: &[f64], cfg: &RunConfig) -> Result<Vec<Measurement>> {
    use rayon::prelude::*;
    grid.par_iter().map(|&g| measure(fam, g, cfg)).collect()
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        cfg.jobs = Some(j);
    }
    Ok(cfg)
}

fn diagnostic(err: &Error) -> serde_json::Value {
    match err {
        Error::Accuracy {
            message,
            best_estimate,
            err_est,
        } => json!({
            "error": "accuracy",
            "message": message,
            "best_estimate": best_estimate,
            "err_est": err_est,
        }),
        Error::Model(message) => json!({ "error": "model", "message": message }),
        other => json!({ "error": "input", "message": other.to_string() }),
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return EXIT_USAGE;
        }
    };
    let work = || execute(&cli, &cfg);
    let result = match cfg.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => work(),
    };
    match result {
        Ok(outcome) => {
            let written = match &cli.output {
                Some(p) => write_file(p, &outcome.text),
                None => stdout
                    .write_all(outcome.text.as_bytes())
                    .map_err(|e| Error::Config(e.to_string())),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "{e}");
                return EXIT_USAGE;
            }
            if outcome.passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "verification failed");
                EXIT_FAILED
            }
        }
        Err(e) if e.is_accuracy() => {
            let _ = writeln!(stderr, "{}", diagnostic(&e));
            EXIT_ACCURACY
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", diagnostic(&e));
            EXIT_USAGE
        }
    }
}
