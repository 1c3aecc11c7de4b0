//! Local rigidity decision procedure: first-order rank test, search for a
//! stabilizing stress, saddle detection, second-order flexes, second-order
//! prestress stability, and the order recursion for nullity one.

mod flex;
mod prestress;
mod recursion;

pub use flex::{
    canonical_null_basis, extendability_values, first_order_test, second_order_extendable, second_order_test,
    solve_second_order, FirstOrderResult, SecondOrderResult, SecondOrderSolution,
};
pub use prestress::{
    prestress_stability_search, saddle_test, second_order_prestress_test, PrestressSearch, StressFamily,
};
pub use recursion::{nullity_one_order, RecursionResult, RecursionStep};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::derivatives::{ConstraintJets, DEFAULT_KMAX};
use crate::energy::selfstress_basis;
use crate::error::{Error, Result};
use crate::jets::{df_dt, TrajectoryJet};
use crate::surface::{FoldingState, Surface};

/// Scores in `[-band, band]` (relative to the stress scale) are undecided.
pub const SCORE_BAND: f64 = 1e-8;
pub const DEFAULT_STARTS: usize = 64;
/// Residual bound for re-validating flex certificates.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tol_rank: Option<f64>,
    pub kmax: usize,
    pub seed: u64,
    pub starts: usize,
    pub band: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tol_rank: None,
            kmax: DEFAULT_KMAX,
            seed: 0,
            starts: DEFAULT_STARTS,
            band: SCORE_BAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PrestressOutcome {
    NotApplicable,
    Stable {
        omega: Vec<f64>,
        score: f64,
        lambda_min: f64,
    },
    Infeasible {
        best_score: Option<f64>,
        best_omega: Option<Vec<f64>>,
        starts: usize,
        reason: Option<String>,
    },
    Undecided {
        best_score: f64,
        best_omega: Vec<f64>,
    },
}

impl PrestressOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, PrestressOutcome::Stable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SaddleOutcome {
    Skipped {
        reason: String,
    },
    Saddle {
        omega: Vec<f64>,
        /// Null vector on which the best stress is not positive.
        direction: Vec<f64>,
        score: f64,
        curvature: f64,
        degenerate: bool,
        /// Descent correction `φ` when the curvature vanishes.
        phi: Option<Vec<f64>>,
        /// Energy decreases along `direction + s·φ` for `0 < s < s_bound`.
        s_bound: Option<f64>,
    },
    NotSaddle {
        omega: Option<Vec<f64>>,
        reason: String,
    },
    Undecided {
        reason: String,
    },
}

impl SaddleOutcome {
    pub fn is_saddle(&self) -> bool {
        matches!(self, SaddleOutcome::Saddle { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SecondOrderOutcome {
    NotApplicable,
    Rigid,
    Flexible {
        /// Solution rays in canonical null coordinates, first nonzero entry 1.
        rays: Vec<Vec<f64>>,
        isolated: bool,
        /// Every first-order flex extends.
        all_directions: bool,
    },
    Undecided {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SecondOrderPrestressOutcome {
    Skipped { reason: String },
    Stable { omega: Vec<f64>, value: f64 },
    NotStable { best_value: Option<f64>, reason: String },
    Undecided { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionOutcome {
    pub rigid_order: Option<usize>,
    pub flexible_through: usize,
    pub kmax: usize,
    pub steps: Vec<RecursionStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlexKind {
    FirstOrder,
    SecondOrder,
    Recursion,
}

/// A jet claimed to be a `(j, k)` flex, with `‖dⁱf/dtⁱ‖∞` for `i ≤ k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexCertificate {
    pub kind: FlexKind,
    pub active_order: usize,
    pub order: usize,
    pub jet: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl FlexCertificate {
    pub fn new(kind: FlexKind, jet: &TrajectoryJet, cj: &ConstraintJets, order: usize) -> Result<FlexCertificate> {
        let active_order = jet
            .active_order()
            .ok_or_else(|| Error::InvalidArgument("jet is identically zero".into()))?;
        Ok(FlexCertificate {
            kind,
            active_order,
            order,
            jet: jet.derivs().iter().map(|v| v.as_slice().to_vec()).collect(),
            residuals: certificate_residuals(jet, cj, order)?,
        })
    }

    /// The polynomial trajectory of the stored jet; higher entries are zero.
    pub fn trajectory(&self) -> Result<TrajectoryJet> {
        Ok(TrajectoryJet::new(self.jet.iter().map(|v| DVector::from_vec(v.clone())).collect())?.with_free_tail(true))
    }

    /// Recompute the residuals and compare against `tol`.
    pub fn revalidate(&self, cj: &ConstraintJets, tol: f64) -> Result<bool> {
        let jet = self.trajectory()?;
        let res = certificate_residuals(&jet, cj, self.order)?;
        Ok(res.iter().all(|&r| r <= tol))
    }
}

fn certificate_residuals(jet: &TrajectoryJet, cj: &ConstraintJets, order: usize) -> Result<Vec<f64>> {
    (1..=order).map(|i| Ok(df_dt(jet, cj, i)?.amax())).collect()
}

/// Every verdict of the decision procedure with its numeric evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n_angles: usize,
    pub n_rows: usize,
    pub rank: usize,
    pub nullity: usize,
    pub rank_tol: f64,
    pub singular_values: Vec<f64>,
    pub selfstress_dim: usize,
    /// Canonical null basis, one vector per column of `A`.
    pub null_basis: Vec<Vec<f64>>,
    pub first_order_rigid: bool,
    pub prestress: PrestressOutcome,
    pub saddle: SaddleOutcome,
    /// Neither prestress stable nor a saddle.
    pub indeterminate: bool,
    pub second_order: SecondOrderOutcome,
    pub second_order_prestress: SecondOrderPrestressOutcome,
    pub nullity_one: Option<RecursionOutcome>,
    pub certificates: Vec<FlexCertificate>,
    pub rigid: Option<bool>,
    pub undecided: bool,
}

impl RigidityReport {
    pub fn prestress_stable(&self) -> bool {
        self.prestress.is_stable()
    }

    pub fn saddle_point(&self) -> bool {
        self.saddle.is_saddle()
    }

    pub fn second_order_rigid(&self) -> bool {
        matches!(self.second_order, SecondOrderOutcome::Rigid)
    }

    pub fn second_order_prestress_stable(&self) -> bool {
        matches!(self.second_order_prestress, SecondOrderPrestressOutcome::Stable { .. })
    }
}

/// Derivative order needed for a run with the given options.
pub fn required_order(options: &AnalysisOptions) -> usize {
    options.kmax.max(4)
}

/// Run the full procedure at a configuration of `surface`.
pub fn classify(surface: &Surface, state: &FoldingState, options: &AnalysisOptions) -> Result<RigidityReport> {
    let cj = ConstraintJets::new(surface, state, required_order(options))?;
    classify_jets(&cj, options)
}

/// Same as [`classify`] on precomputed constraint jets.
pub fn classify_jets(cj: &ConstraintJets, options: &AnalysisOptions) -> Result<RigidityReport> {
    if options.kmax == 0 {
        return Err(Error::InvalidArgument("kmax must be at least 1".into()));
    }
    let first = first_order_test(cj, options.tol_rank);
    let stresses = selfstress_basis(cj.rigidity(), options.tol_rank);
    let mut report = RigidityReport {
        n_angles: cj.n_angles(),
        n_rows: cj.n_rows(),
        rank: first.rank,
        nullity: first.nullity,
        rank_tol: first.tol,
        singular_values: first.sigma.clone(),
        selfstress_dim: stresses.len(),
        null_basis: first
            .canonical
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        first_order_rigid: first.rigid,
        prestress: PrestressOutcome::NotApplicable,
        saddle: SaddleOutcome::Skipped {
            reason: "first-order rigid".into(),
        },
        indeterminate: false,
        second_order: SecondOrderOutcome::NotApplicable,
        second_order_prestress: SecondOrderPrestressOutcome::Skipped {
            reason: "first-order rigid".into(),
        },
        nullity_one: None,
        certificates: vec![],
        rigid: None,
        undecided: false,
    };
    if first.rigid {
        report.rigid = Some(true);
        return Ok(report);
    }
    for c in first.canonical.column_iter() {
        let jet = TrajectoryJet::new(vec![c.into_owned()])?;
        report.certificates.push(FlexCertificate::new(FlexKind::FirstOrder, &jet, cj, 1)?);
    }

    let family = StressFamily::new(cj, stresses.clone(), first.null.clone())?;
    let search = prestress_stability_search(&family, options);
    report.prestress = search.outcome.clone();
    report.saddle = saddle_test(cj, &family, &search, options)?;
    let prestress_stable = report.prestress.is_stable();
    let saddle = report.saddle.is_saddle();
    report.indeterminate = matches!(report.saddle, SaddleOutcome::NotSaddle { .. });

    let second = second_order_test(cj, &stresses, &first, options)?;
    report.second_order = second.outcome.clone();
    for jet in &second.flexes {
        report.certificates.push(FlexCertificate::new(FlexKind::SecondOrder, jet, cj, 2)?);
    }

    report.second_order_prestress = if prestress_stable {
        SecondOrderPrestressOutcome::Skipped {
            reason: "prestress stable".into(),
        }
    } else if saddle {
        SecondOrderPrestressOutcome::Skipped { reason: "saddle".into() }
    } else if !report.indeterminate {
        SecondOrderPrestressOutcome::Undecided {
            reason: "saddle test undecided".into(),
        }
    } else {
        match &report.second_order {
            SecondOrderOutcome::Rigid => SecondOrderPrestressOutcome::Skipped {
                reason: "second-order rigid".into(),
            },
            SecondOrderOutcome::Flexible { isolated: true, all_directions: false, .. } => {
                second_order_prestress_test(cj, &family, &second.flexes, options)?
            }
            SecondOrderOutcome::Flexible { .. } if stresses.is_empty() => SecondOrderPrestressOutcome::NotStable {
                best_value: None,
                reason: "no selfstress".into(),
            },
            SecondOrderOutcome::Flexible { .. } => SecondOrderPrestressOutcome::Undecided {
                reason: "second-order flexes form a continuous family".into(),
            },
            _ => SecondOrderPrestressOutcome::Undecided {
                reason: "second-order flexes undecided".into(),
            },
        }
    };

    if first.nullity == 1 {
        let kmax = options.kmax.min(cj.kmax());
        let rec = nullity_one_order(cj, kmax, options.tol_rank)?;
        report.certificates.push(FlexCertificate::new(
            FlexKind::Recursion,
            &rec.jet,
            cj,
            rec.flexible_through,
        )?);
        report.nullity_one = Some(RecursionOutcome {
            rigid_order: rec.rigid_order,
            flexible_through: rec.flexible_through,
            kmax,
            steps: rec.steps,
        });
    }

    let so_rigid = report.second_order_rigid();
    let so_ps = report.second_order_prestress_stable();
    let rec_rigid = report.nullity_one.as_ref().is_some_and(|r| r.rigid_order.is_some());
    report.rigid = if prestress_stable || so_rigid || so_ps || rec_rigid {
        Some(true)
    } else {
        None
    };
    let pending = matches!(report.saddle, SaddleOutcome::Undecided { .. })
        || matches!(report.second_order, SecondOrderOutcome::Undecided { .. })
        || matches!(report.second_order_prestress, SecondOrderPrestressOutcome::Undecided { .. });
    report.undecided = report.rigid.is_none() && pending;
    Ok(report)
}
