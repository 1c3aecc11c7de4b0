use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rigidity_core::analysis::required_order;
use rigidity_core::energy::{log_grid, GROWTH_POINTS, GROWTH_T_MAX, GROWTH_T_MIN};
use rigidity_core::{
    classify_jets, growth_probe, is_configuration, load_surface, AnalysisOptions, ConstraintJets, EnergyModel, Error,
    FlexCertificate, GrowthFit, Surface, TrajectoryJet, DEFAULT_KMAX, TOL_CONFIG,
};
use serde::Serialize;

use crate::exit;
use crate::report::{InputInfo, Provenance, ReportDocument, FORMAT_VERSION};

/// Constant in the derivative oracle bound `dev ≤ C·h²`.
pub const FD_CONSTANT: f64 = 1.0;
pub const DEFAULT_H: f64 = 1e-4;
/// Allowed shortfall of a fitted exponent below its bound.
pub const GROWTH_SLACK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Surface document (JSON).
    pub file: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Absolute singular-value cutoff for numerical rank.
    #[arg(long)]
    pub tol_rank: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finite-difference step (derivs-check) or smallest probe parameter (growth).
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = TOL_CONFIG)]
    pub tol_config: f64,
}

impl CommonArgs {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            tol_rank: self.tol_rank,
            kmax: self.kmax,
            seed: self.seed,
            ..AnalysisOptions::default()
        }
    }
}

/// What a command prints and how the process exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Outcome {
        Outcome {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: String) -> Outcome {
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }

    fn from_error(e: &Error) -> Outcome {
        Outcome::fail(error_code(e), format!("error: {e}\n"))
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => exit::PARSE,
        Error::Validation { .. } => exit::INVALID,
        Error::NotConfiguration { .. } => exit::NOT_CONFIGURATION,
        Error::Unresolvable(_) => exit::UNRESOLVABLE,
        _ => exit::FAILURE,
    }
}

pub fn read_surface(path: &Path) -> Result<Surface, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    load_surface(&text)
}

/// Human name of closure block `b`.
pub fn block_label(surface: &Surface, b: usize) -> String {
    match surface.interior_vertices.get(b) {
        Some(iv) => format!("interior vertex block {b} (vertex {})", iv.vertex),
        None => format!("cycle block {b} (cycle {})", b - surface.interior_vertices.len()),
    }
}

#[derive(Debug, Clone, Serialize)]
struct BlockCheck {
    block: usize,
    label: String,
    deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ValidateReport {
    format_version: u32,
    command: &'static str,
    input: Option<InputInfo>,
    valid: bool,
    configuration: Option<bool>,
    max_residual: Option<f64>,
    blocks: Vec<BlockCheck>,
    violated_block: Option<BlockCheck>,
    error: Option<String>,
}

pub fn validate(args: &CommonArgs) -> Outcome {
    let path = args.file.display().to_string();
    let mut rep = ValidateReport {
        format_version: FORMAT_VERSION,
        command: "validate",
        input: None,
        valid: false,
        configuration: None,
        max_residual: None,
        blocks: vec![],
        violated_block: None,
        error: None,
    };
    let (code, message) = match read_surface(&args.file) {
        Err(e) => (error_code(&e), format!("error: {e}")),
        Ok(s) => {
            rep.input = Some(InputInfo::new(&path, &s));
            rep.valid = true;
            match is_configuration(&s, s.working_state(), args.tol_config) {
                Err(e) => (error_code(&e), format!("error: {e}")),
                Ok(check) => {
                    rep.configuration = Some(check.is_configuration);
                    rep.max_residual = Some(check.max_residual);
                    rep.blocks = check
                        .block_deviation
                        .iter()
                        .enumerate()
                        .map(|(b, &d)| BlockCheck {
                            block: b,
                            label: block_label(&s, b),
                            deviation: d,
                        })
                        .collect();
                    if check.is_configuration {
                        (
                            exit::OK,
                            format!(
                                "ok: {} angles, {} closure blocks, max residual {:e}",
                                s.n_angles(),
                                s.n_blocks(),
                                check.max_residual
                            ),
                        )
                    } else {
                        // worst offender among the blocks over tolerance
                        let b = check.worst_block.unwrap_or(0);
                        let v = rep.blocks.get(b).cloned();
                        let msg = match &v {
                            Some(v) => format!(
                                "not a configuration: {} deviates from the identity by {:e} (tolerance {:e})",
                                v.label, v.deviation, args.tol_config
                            ),
                            None => format!(
                                "not a configuration: residual {:e} (tolerance {:e})",
                                check.max_residual, args.tol_config
                            ),
                        };
                        rep.violated_block = v;
                        (exit::NOT_CONFIGURATION, msg)
                    }
                }
            }
        }
    };
    if code != exit::OK {
        rep.error = Some(message.clone());
    }
    match args.format {
        Format::Json => Outcome {
            code,
            stdout: serde_json::to_string_pretty(&rep).expect("serializes") + "\n",
            stderr: if code == exit::OK { String::new() } else { message + "\n" },
        },
        Format::Text if code == exit::OK => Outcome::ok(code, message + "\n"),
        Format::Text => Outcome::fail(code, message + "\n"),
    }
}

/// Run the classification and build the machine report.
pub fn analyze_document(args: &CommonArgs, timing: bool) -> Result<ReportDocument, Error> {
    let s = read_surface(&args.file)?;
    let opts = args.options();
    let start = Instant::now();
    let cj = ConstraintJets::with_tolerance(&s, s.working_state(), required_order(&opts), args.tol_config)?;
    let report = classify_jets(&cj, &opts)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        rank_tol: report.rank_tol,
        options: opts,
        tol_config: args.tol_config,
        runtime_ms: timing.then_some(elapsed),
    };
    Ok(ReportDocument::new(
        InputInfo::new(&args.file.display().to_string(), &s),
        provenance,
        report,
    ))
}

pub fn analyze(args: &CommonArgs, timing: bool) -> Outcome {
    match analyze_document(args, timing) {
        Err(e) => Outcome::from_error(&e),
        Ok(doc) => {
            let code = if doc.report.undecided { exit::UNDECIDED } else { exit::OK };
            let stdout = match args.format {
                Format::Json => doc.to_json() + "\n",
                Format::Text => doc.to_text(),
            };
            Outcome::ok(code, stdout)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct DerivBlock {
    block: usize,
    label: String,
    max_deviation: f64,
    bound: f64,
    pass: bool,
    /// Largest analytic entry per residual component.
    component_max: Vec<f64>,
    /// Components whose analytic tensor vanishes.
    zero_components: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct DerivsReport {
    format_version: u32,
    command: &'static str,
    input: InputInfo,
    order: usize,
    h: f64,
    constant: f64,
    pass: bool,
    max_deviation: f64,
    blocks: Vec<DerivBlock>,
}

pub fn derivs_check(args: &CommonArgs, order: usize) -> Outcome {
    let h = args.h.unwrap_or(DEFAULT_H);
    let run = || -> Result<DerivsReport, Error> {
        let s = read_surface(&args.file)?;
        let cj = ConstraintJets::with_tolerance(&s, s.working_state(), order, args.tol_config)?;
        let fd = cj.fd_blocks(order, h)?;
        let bound = FD_CONSTANT * h * h;
        let blocks: Vec<DerivBlock> = cj
            .blocks()
            .iter()
            .zip(&fd)
            .enumerate()
            .map(|(b, (bj, t))| {
                let analytic = &bj.tensors[order - 1];
                let dev = analytic.max_abs_diff(t);
                let mut component_max = vec![0.0f64; bj.width];
                for (_, vals) in analytic.iter() {
                    for (m, x) in component_max.iter_mut().zip(vals) {
                        *m = m.max(x.abs());
                    }
                }
                let zero_components = component_max
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m < 1e-12)
                    .map(|(i, _)| format!("f{}", i + 1))
                    .collect();
                DerivBlock {
                    block: b,
                    label: block_label(&s, b),
                    max_deviation: dev,
                    bound,
                    pass: dev <= bound,
                    component_max,
                    zero_components,
                }
            })
            .collect();
        Ok(DerivsReport {
            format_version: FORMAT_VERSION,
            command: "derivs-check",
            input: InputInfo::new(&args.file.display().to_string(), &s),
            order,
            h,
            constant: FD_CONSTANT,
            pass: blocks.iter().all(|b| b.pass),
            max_deviation: blocks.iter().map(|b| b.max_deviation).fold(0.0, f64::max),
            blocks,
        })
    };
    let rep = match run() {
        Ok(r) => r,
        Err(e) => return Outcome::from_error(&e),
    };
    let code = if rep.pass { exit::OK } else { exit::CHECK_FAILED };
    let stdout = match args.format {
        Format::Json => serde_json::to_string_pretty(&rep).expect("serializes") + "\n",
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "order {} derivatives vs central differences, h = {:e}, bound C*h^2 = {:e}",
                rep.order,
                rep.h,
                FD_CONSTANT * h * h
            );
            for b in &rep.blocks {
                let _ = writeln!(
                    out,
                    "  {:<36} max dev {:.3e}  {}  zero components: {}",
                    b.label,
                    b.max_deviation,
                    if b.pass { "pass" } else { "FAIL" },
                    if b.zero_components.is_empty() {
                        "none".to_string()
                    } else {
                        b.zero_components.join(" ")
                    }
                );
            }
            let _ = writeln!(
                out,
                "{}: max deviation {:e}",
                if rep.pass { "pass" } else { "FAIL" },
                rep.max_deviation
            );
            out
        }
    };
    Outcome::ok(code, stdout)
}

/// Which trajectories the growth command probes.
#[derive(Debug, Clone, Default)]
pub struct FlexSpec {
    /// Certificate index; all certificates when absent.
    pub cert: Option<usize>,
    /// Prior machine report supplying the certificates.
    pub report: Option<std::path::PathBuf>,
    /// Explicit jet `[[ρ'], [ρ''], …]`.
    pub jet: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct GrowthRow {
    label: String,
    active_order: Option<usize>,
    order: Option<usize>,
    /// `(2k + 2) / j` for a `(j, k)` certificate.
    bound: Option<f64>,
    status: &'static str,
    fit: Option<GrowthFit>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct GrowthReport {
    format_version: u32,
    command: &'static str,
    input: InputInfo,
    energy: &'static str,
    rows: Vec<GrowthRow>,
}

fn parse_jet(text: &str) -> Result<TrajectoryJet, Error> {
    let raw: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| Error::Parse(format!("jet: {e}")))?;
    TrajectoryJet::new(raw.into_iter().map(nalgebra::DVector::from_vec).collect())
}

pub fn growth(args: &CommonArgs, flex: &FlexSpec) -> Outcome {
    let run = || -> Result<GrowthReport, Error> {
        let s = read_surface(&args.file)?;
        let opts = args.options();
        let cj = ConstraintJets::with_tolerance(&s, s.working_state(), required_order(&opts), args.tol_config)?;
        let mut targets: Vec<(String, Option<FlexCertificate>, TrajectoryJet)> = Vec::new();
        if let Some(text) = &flex.jet {
            let jet = parse_jet(text)?;
            if jet.dim() != cj.n_angles() {
                return Err(Error::DimensionMismatch {
                    expected: cj.n_angles(),
                    found: jet.dim(),
                });
            }
            targets.push(("jet".into(), None, jet));
        } else {
            let certs = match &flex.report {
                Some(p) => {
                    let text =
                        std::fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
                    let doc = ReportDocument::from_json(&text).map_err(|e| Error::Parse(format!("report: {e}")))?;
                    if doc.report.n_angles != cj.n_angles() {
                        return Err(Error::DimensionMismatch {
                            expected: cj.n_angles(),
                            found: doc.report.n_angles,
                        });
                    }
                    doc.report.certificates
                }
                None => classify_jets(&cj, &opts)?.certificates,
            };
            let picked: Vec<(usize, FlexCertificate)> = match flex.cert {
                Some(i) => {
                    let c = certs.get(i).cloned().ok_or_else(|| {
                        Error::InvalidArgument(format!("certificate {i} out of range ({} available)", certs.len()))
                    })?;
                    vec![(i, c)]
                }
                None => certs.into_iter().enumerate().collect(),
            };
            for (i, c) in picked {
                let jet = c.trajectory()?;
                targets.push((format!("certificate {i} ({:?})", c.kind), Some(c), jet));
            }
        }
        let energy = EnergyModel::unstressed(&cj);
        let grid = log_grid(args.h.unwrap_or(GROWTH_T_MIN), GROWTH_T_MAX, GROWTH_POINTS);
        let rows = targets
            .into_iter()
            .map(|(label, cert, jet)| {
                let bound = cert
                    .as_ref()
                    .map(|c| (2 * c.order + 2) as f64 / c.active_order as f64);
                let (status, fit, error) = match growth_probe(&energy, &cj, &jet, &grid) {
                    Ok(f) => {
                        let ok = bound.map_or(true, |b| f.slope >= b - GROWTH_SLACK);
                        (if ok { "ok" } else { "below_bound" }, Some(f), None)
                    }
                    Err(e @ Error::Unresolvable(_)) => ("unresolvable", None, Some(e.to_string())),
                    Err(e) => ("error", None, Some(e.to_string())),
                };
                GrowthRow {
                    label,
                    active_order: cert.as_ref().map(|c| c.active_order),
                    order: cert.as_ref().map(|c| c.order),
                    bound,
                    status,
                    fit,
                    error,
                }
            })
            .collect();
        Ok(GrowthReport {
            format_version: FORMAT_VERSION,
            command: "growth",
            input: InputInfo::new(&args.file.display().to_string(), &s),
            energy: "unstressed",
            rows,
        })
    };
    let rep = match run() {
        Ok(r) => r,
        Err(e) => return Outcome::from_error(&e),
    };
    let code = if rep.rows.iter().any(|r| r.status == "error") {
        exit::FAILURE
    } else if rep.rows.iter().any(|r| r.status == "unresolvable") {
        exit::UNRESOLVABLE
    } else if rep.rows.iter().any(|r| r.status == "below_bound") {
        exit::CHECK_FAILED
    } else {
        exit::OK
    };
    let stdout = match args.format {
        Format::Json => serde_json::to_string_pretty(&rep).expect("serializes") + "\n",
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "{:<28} {:>6} {:>8} {:>9} {:>10}  status", "trajectory", "(j,k)", "bound", "slope", "residual");
            for r in &rep.rows {
                let jk = match (r.active_order, r.order) {
                    (Some(j), Some(k)) => format!("({j},{k})"),
                    _ => "-".into(),
                };
                let bound = r.bound.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into());
                let (slope, res) = match &r.fit {
                    Some(f) => (format!("{:.4}", f.slope), format!("{:.2e}", f.residual)),
                    None => ("-".into(), "-".into()),
                };
                let _ = writeln!(out, "{:<28} {:>6} {:>8} {:>9} {:>10}  {}", r.label, jk, bound, slope, res, r.status);
                if let Some(e) = &r.error {
                    let _ = writeln!(out, "    {e}");
                }
            }
            out
        }
    };
    Outcome::ok(code, stdout)
}
