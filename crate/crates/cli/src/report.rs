//! Machine and text renderings of analysis results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rigidity_core::analysis::{PrestressOutcome, SaddleOutcome, SecondOrderOutcome, SecondOrderPrestressOutcome};
use rigidity_core::{AnalysisOptions, RigidityReport, Surface};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const FORMAT_VERSION: u32 = 1;

/// Relative tolerance for recognizing a constant from [`constants`].
pub const SYMBOL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub name: Option<String>,
    pub n_vertices: usize,
    pub n_panels: usize,
    pub n_angles: usize,
    pub n_interior_vertices: usize,
    pub n_cycles: usize,
    /// `declared` or `realization`.
    pub state_source: String,
    pub state: Vec<f64>,
}

impl InputInfo {
    pub fn new(path: &str, surface: &Surface) -> InputInfo {
        InputInfo {
            path: path.to_string(),
            name: surface.name.clone(),
            n_vertices: surface.vertices.len(),
            n_panels: surface.panels.len(),
            n_angles: surface.n_angles(),
            n_interior_vertices: surface.interior_vertices.len(),
            n_cycles: surface.cycles.len(),
            state_source: if surface.declared_state().is_some() { "declared" } else { "realization" }.into(),
            state: surface.working_state().iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub options: AnalysisOptions,
    pub tol_config: f64,
    /// Effective rank tolerance.
    pub rank_tol: f64,
    /// Wall time; only recorded on request so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

/// A recognized closed form for a reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Slash-separated location inside the document.
    pub path: String,
    /// 17 significant digits.
    pub decimal: String,
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format_version: u32,
    pub command: String,
    pub input: InputInfo,
    pub provenance: Provenance,
    pub verdicts: BTreeMap<String, Value>,
    pub symbolic: Vec<Annotation>,
    pub report: RigidityReport,
}

impl ReportDocument {
    pub fn new(input: InputInfo, provenance: Provenance, report: RigidityReport) -> ReportDocument {
        let verdicts = verdicts(&report);
        let mut symbolic = Vec::new();
        annotate(&Value::Object(verdicts.clone().into_iter().collect()), "verdicts", &mut symbolic);
        if let Ok(v) = serde_json::to_value(&report) {
            annotate(&v, "report", &mut symbolic);
        }
        ReportDocument {
            format_version: FORMAT_VERSION,
            command: "analyze".into(),
            input,
            provenance,
            verdicts,
            symbolic,
            report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<ReportDocument> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let r = &self.report;
        let _ = writeln!(out, "rigidity-lab analyze (format {})", self.format_version);
        let _ = writeln!(
            out,
            "input: {}{}",
            self.input.path,
            self.input.name.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
        let _ = writeln!(
            out,
            "  {} vertices, {} panels, {} angles, {} interior vertices, {} cycles, state from {}",
            self.input.n_vertices,
            self.input.n_panels,
            self.input.n_angles,
            self.input.n_interior_vertices,
            self.input.n_cycles,
            self.input.state_source
        );
        let o = &self.provenance.options;
        let _ = writeln!(
            out,
            "options: seed {}, kmax {}, starts {}, band {:e}, tol_config {:e}, rank_tol {:e}",
            o.seed, o.kmax, o.starts, o.band, self.provenance.tol_config, self.provenance.rank_tol
        );
        if let Some(ms) = self.provenance.runtime_ms {
            let _ = writeln!(out, "runtime: {ms:.1} ms");
        }
        out.push('\n');
        out.push_str("verdicts:\n");
        for (k, v) in &self.verdicts {
            let _ = writeln!(out, "  {k} = {v}");
        }
        if !self.symbolic.is_empty() {
            out.push_str("\nsymbolic:\n");
            for a in &self.symbolic {
                let _ = writeln!(out, "  {} = {} ~ {}", a.path, a.decimal, a.symbol);
            }
        }
        out.push_str("\ndetails:\n");
        let _ = writeln!(out, "  singular values: {}", list(&r.singular_values));
        for (i, c) in r.null_basis.iter().enumerate() {
            let _ = writeln!(out, "  null basis {i}: {}", list(c));
        }
        let _ = writeln!(out, "  prestress: {}", describe_prestress(&r.prestress));
        let _ = writeln!(out, "  saddle: {}", describe_saddle(&r.saddle));
        let _ = writeln!(out, "  second order: {}", describe_second(&r.second_order));
        let _ = writeln!(out, "  second-order prestress: {}", describe_sop(&r.second_order_prestress));
        if let Some(rec) = &r.nullity_one {
            let _ = writeln!(
                out,
                "  recursion: flexible through order {}, rigid order {}, kmax {}",
                rec.flexible_through,
                rec.rigid_order.map(|k| k.to_string()).unwrap_or_else(|| "none".into()),
                rec.kmax
            );
            for s in &rec.steps {
                let _ = writeln!(
                    out,
                    "    k={} rank {} augmented {} |b| {:e} residual {:e}",
                    s.order, s.rank, s.augmented_rank, s.rhs_norm, s.residual
                );
            }
        }
        for (i, c) in r.certificates.iter().enumerate() {
            let worst = c.residuals.iter().copied().fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "  certificate {i}: {:?} ({}, {}) max residual {:e}",
                c.kind, c.active_order, c.order, worst
            );
        }
        out
    }
}

/// Parse the `verdicts:` block of a text report.
pub fn parse_text_verdicts(text: &str) -> Option<BTreeMap<String, Value>> {
    let mut lines = text.lines().skip_while(|l| *l != "verdicts:");
    lines.next()?;
    let mut map = BTreeMap::new();
    for line in lines.take_while(|l| !l.is_empty()) {
        let (k, v) = line.trim().split_once(" = ")?;
        map.insert(k.to_string(), serde_json::from_str(v).ok()?);
    }
    Some(map)
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn describe_prestress(p: &PrestressOutcome) -> String {
    match p {
        PrestressOutcome::NotApplicable => "not applicable".into(),
        PrestressOutcome::Stable { lambda_min, .. } => format!("stable, lambda_min {lambda_min:e}"),
        PrestressOutcome::Infeasible {
            best_score, starts, reason, ..
        } => match (best_score, reason) {
            (Some(s), _) => format!("infeasible, best scaled lambda_min {s:e} over {starts} starts"),
            (None, Some(r)) => format!("infeasible ({r})"),
            _ => "infeasible".into(),
        },
        PrestressOutcome::Undecided { best_score, .. } => format!("undecided, best score {best_score:e}"),
    }
}

fn describe_saddle(s: &SaddleOutcome) -> String {
    match s {
        SaddleOutcome::Skipped { reason } => format!("skipped ({reason})"),
        SaddleOutcome::Saddle {
            curvature,
            degenerate,
            s_bound,
            ..
        } => {
            let mut d = format!("saddle, curvature {curvature:e}");
            if *degenerate {
                d.push_str(", degenerate");
            }
            if let Some(b) = s_bound {
                let _ = write!(d, ", descent for s < {b:e}");
            }
            d
        }
        SaddleOutcome::NotSaddle { reason, .. } => format!("not a saddle ({reason})"),
        SaddleOutcome::Undecided { reason } => format!("undecided ({reason})"),
    }
}

fn describe_second(s: &SecondOrderOutcome) -> String {
    match s {
        SecondOrderOutcome::NotApplicable => "not applicable".into(),
        SecondOrderOutcome::Rigid => "rigid".into(),
        SecondOrderOutcome::Flexible {
            rays,
            isolated,
            all_directions,
        } => {
            if *all_directions {
                "flexible, every direction extends".into()
            } else {
                let rs: Vec<String> = rays.iter().map(|r| list(r)).collect();
                format!(
                    "flexible, {} ray(s){}: {}",
                    rays.len(),
                    if *isolated { "" } else { ", not isolated" },
                    rs.join(" ")
                )
            }
        }
        SecondOrderOutcome::Undecided { reason } => format!("undecided ({reason})"),
    }
}

fn describe_sop(s: &SecondOrderPrestressOutcome) -> String {
    match s {
        SecondOrderPrestressOutcome::Skipped { reason } => format!("skipped ({reason})"),
        SecondOrderPrestressOutcome::Stable { value, .. } => format!("stable, value {value:e}"),
        SecondOrderPrestressOutcome::NotStable { reason, .. } => format!("not stable ({reason})"),
        SecondOrderPrestressOutcome::Undecided { reason } => format!("undecided ({reason})"),
    }
}

fn status<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x)
        .ok()
        .and_then(|v| match v {
            Value::String(s) => Some(Value::String(s)),
            Value::Object(m) => m.get("status").cloned(),
            _ => None,
        })
        .unwrap_or(Value::Null)
}

/// Flat summary shared by the text and machine reports.
pub fn verdicts(r: &RigidityReport) -> BTreeMap<String, Value> {
    let mut v = BTreeMap::new();
    v.insert("n_angles".into(), json!(r.n_angles));
    v.insert("rank".into(), json!(r.rank));
    v.insert("nullity".into(), json!(r.nullity));
    v.insert("selfstress_dim".into(), json!(r.selfstress_dim));
    v.insert("first_order_rigid".into(), json!(r.first_order_rigid));
    v.insert("prestress".into(), status(&r.prestress));
    v.insert("prestress_stable".into(), json!(r.prestress_stable()));
    v.insert("saddle".into(), json!(r.saddle_point()));
    v.insert("indeterminate".into(), json!(r.indeterminate));
    v.insert("second_order".into(), status(&r.second_order));
    if let SecondOrderOutcome::Flexible {
        rays, all_directions, ..
    } = &r.second_order
    {
        v.insert("rays".into(), json!(rays));
        v.insert("all_directions".into(), json!(all_directions));
    }
    v.insert("second_order_prestress".into(), status(&r.second_order_prestress));
    if let Some(rec) = &r.nullity_one {
        v.insert("recursion_flexible_through".into(), json!(rec.flexible_through));
        v.insert("recursion_rigid_order".into(), json!(rec.rigid_order));
        v.insert("recursion_steps".into(), json!(rec.steps.len()));
    }
    v.insert("certificates".into(), json!(r.certificates.len()));
    v.insert("rigid".into(), json!(r.rigid));
    v.insert("undecided".into(), json!(r.undecided));
    v
}

/// Closed forms checked against reported numbers.
pub fn constants() -> Vec<(&'static str, f64)> {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s5 = 5f64.sqrt();
    let pi = std::f64::consts::PI;
    vec![
        ("√2", s2),
        ("√3", s3),
        ("√5", s5),
        ("√3+1", s3 + 1.0),
        ("√3−1", s3 - 1.0),
        ("√2+1", s2 + 1.0),
        ("√2−1", s2 - 1.0),
        ("√3/2", s3 / 2.0),
        ("√2/2", s2 / 2.0),
        ("1/√3", 1.0 / s3),
        ("2/√3", 2.0 / s3),
        ("(1+√5)/2", (1.0 + s5) / 2.0),
        ("(√5−1)/2", (s5 - 1.0) / 2.0),
        ("π", pi),
        ("π/2", pi / 2.0),
        ("π/3", pi / 3.0),
        ("π/4", pi / 4.0),
        ("π/6", pi / 6.0),
        ("2π/3", 2.0 * pi / 3.0),
        ("2π", 2.0 * pi),
    ]
}

pub fn recognize(x: f64) -> Option<&'static str> {
    if !x.is_finite() || x == 0.0 {
        return None;
    }
    constants()
        .into_iter()
        .find(|(_, c)| (x.abs() - c).abs() <= SYMBOL_TOL * c)
        .map(|(name, _)| name)
}

/// `x` with 17 significant digits.
pub fn decimal17(x: f64) -> String {
    format!("{x:.16e}")
}

fn annotate(v: &Value, path: &str, out: &mut Vec<Annotation>) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| n.is_f64()) {
                if let Some(sym) = recognize(x) {
                    out.push(Annotation {
                        path: path.to_string(),
                        decimal: decimal17(x),
                        symbol: if x < 0.0 { format!("−({sym})") } else { sym.to_string() },
                    });
                }
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                annotate(x, &format!("{path}/{i}"), out);
            }
        }
        Value::Object(m) => {
            for (k, x) in m {
                annotate(x, &format!("{path}/{k}"), out);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recognizes_ray_slopes() {
        assert_eq!(recognize(2.7320508075688807), Some("√3+1"));
        assert_eq!(recognize(0.7320508075688779), Some("√3−1"));
        assert_eq!(recognize(0.73205), None);
        assert_eq!(recognize(1.0), None);
    }

    #[test]
    fn decimal_has_seventeen_digits() {
        let d = decimal17(3f64.sqrt() + 1.0);
        let mantissa = d.split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(d.parse::<f64>().unwrap(), 3f64.sqrt() + 1.0);
    }
}
