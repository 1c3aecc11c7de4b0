//! Order of rigidity for nullity one by successive augmented-rank tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::derivatives::ConstraintJets;
use crate::error::{Error, Result};
use crate::jets::{df_dt, TrajectoryJet};
use crate::linalg;

/// One order of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionStep {
    pub order: usize,
    pub rank: usize,
    pub augmented_rank: usize,
    /// `‖b‖∞` of the right-hand side tested at this order.
    pub rhs_norm: f64,
    /// `‖R v − b‖∞` for the chosen `v`.
    pub residual: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecursionResult {
    /// Order `k` at which no `(1,k)` flex exists.
    pub rigid_order: Option<usize>,
    /// Largest `k` with a `(1,k)` flex.
    pub flexible_through: usize,
    pub steps: Vec<RecursionStep>,
    /// `(ρ′, v₂, …, v_k)` for `k = flexible_through`.
    pub jet: TrajectoryJet,
}

/// Extend the unit null vector order by order up to `kmax`, choosing each new
/// entry as the pseudoinverse solution orthogonal to `ρ′`.
pub fn nullity_one_order(cj: &ConstraintJets, kmax: usize, tol_rank: Option<f64>) -> Result<RecursionResult> {
    let r = cj.rigidity();
    let info = linalg::right_null(r, tol_rank);
    let nullity = info.null.ncols();
    if nullity != 1 {
        return Err(Error::NullityNotOne(nullity));
    }
    if kmax > cj.kmax() {
        return Err(Error::OrderExceeded {
            requested: kmax,
            available: cj.kmax(),
        });
    }
    let rho1: DVector<f64> = info.null.column(0).into_owned();
    let mut jet = TrajectoryJet::first_order(rho1.clone());
    let mut steps = vec![RecursionStep {
        order: 1,
        rank: info.rank,
        augmented_rank: info.rank,
        rhs_norm: 0.0,
        residual: (r * &rho1).amax(),
        v: rho1.as_slice().to_vec(),
    }];
    let mut rigid_order = None;
    for k in 1..kmax {
        let b = -df_dt(&jet, cj, k + 1)?;
        let mut aug = DMatrix::zeros(r.nrows(), r.ncols() + 1);
        aug.view_mut((0, 0), r.shape()).copy_from(r);
        aug.set_column(r.ncols(), &b);
        let augmented_rank = linalg::rank(&aug, Some(info.tol));
        let v = linalg::pinv_solve(r, &b, None);
        let residual = (r * &v - &b).amax();
        steps.push(RecursionStep {
            order: k + 1,
            rank: info.rank,
            augmented_rank,
            rhs_norm: b.amax(),
            residual,
            v: v.as_slice().to_vec(),
        });
        if augmented_rank > info.rank {
            rigid_order = Some(k + 1);
            break;
        }
        jet.push(v)?;
    }
    let flexible_through = jet.len();
    Ok(RecursionResult {
        rigid_order,
        flexible_through,
        steps,
        jet: jet.with_free_tail(false),
    })
}
