//! First- and second-order flexes.

use nalgebra::{DMatrix, DVector};

use super::{AnalysisOptions, SecondOrderOutcome};
use crate::derivatives::ConstraintJets;
use crate::error::{Error, Result};
use crate::jets::TrajectoryJet;
use crate::linalg;

/// Outcome of the rank test on `R`.
#[derive(Debug, Clone)]
pub struct FirstOrderResult {
    pub rigid: bool,
    pub rank: usize,
    pub nullity: usize,
    pub tol: f64,
    pub sigma: Vec<f64>,
    /// Orthonormal basis of `Null(R)`.
    pub null: DMatrix<f64>,
    /// Basis of `Null(R)` that is the identity on the free coordinates,
    /// the last free coordinate first.
    pub canonical: DMatrix<f64>,
}

/// Rank and null space of `R` by SVD.
pub fn first_order_test(cj: &ConstraintJets, tol_rank: Option<f64>) -> FirstOrderResult {
    let info = linalg::right_null(cj.rigidity(), tol_rank);
    let nullity = info.null.ncols();
    FirstOrderResult {
        rigid: nullity == 0,
        rank: info.rank,
        nullity,
        tol: info.tol,
        sigma: info.sigma,
        canonical: canonical_null_basis(&info.null),
        null: info.null,
    }
}

/// Reduced-echelon style basis: free coordinates are picked from the last
/// angle backwards, and the basis restricted to them is the identity.
pub fn canonical_null_basis(null: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = null.shape();
    if d == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut picked: Vec<usize> = Vec::with_capacity(d);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(d);
    for i in (0..n).rev() {
        if picked.len() == d {
            break;
        }
        let mut r = null.row(i).transpose();
        for q in &ortho {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        let nr = r.norm();
        if nr > 1e-8 {
            picked.push(i);
            ortho.push(r / nr);
        }
    }
    let mut sel = DMatrix::zeros(d, d);
    for (k, &i) in picked.iter().enumerate() {
        sel.set_row(k, &null.row(i));
    }
    let inv = sel.try_inverse().expect("selected rows are independent");
    let mut a = null * inv;
    for (k, &i) in picked.iter().enumerate() {
        for c in 0..d {
            a[(i, c)] = if c == k { 1.0 } else { 0.0 };
        }
    }
    a
}

fn check_null(cj: &ConstraintJets, v: &DVector<f64>) -> Result<()> {
    if v.len() != cj.n_angles() {
        return Err(Error::DimensionMismatch {
            expected: cj.n_angles(),
            found: v.len(),
        });
    }
    let r = cj.rigidity();
    let res = (r * v).amax();
    if res > 1e-8 * r.amax().max(1.0) * v.amax() {
        return Err(Error::NotInNullSpace(res));
    }
    Ok(())
}

/// `Ω_k · (ρ′ ⊗ ρ′)` for every stress in `stresses`.
pub fn extendability_values(cj: &ConstraintJets, stresses: &[DVector<f64>], rho1: &DVector<f64>) -> Result<Vec<f64>> {
    check_null(cj, rho1)?;
    stresses
        .iter()
        .map(|w| {
            let om = cj.stress_matrix(w.as_slice())?;
            Ok(rho1.dot(&(&om * rho1)))
        })
        .collect()
}

/// Whether `ρ′` extends to a second-order flex: `Ω·(ρ′⊗ρ′) = 0` for every
/// selfstress in the basis.
pub fn second_order_extendable(cj: &ConstraintJets, stresses: &[DVector<f64>], rho1: &DVector<f64>) -> Result<bool> {
    let values = extendability_values(cj, stresses, rho1)?;
    let scale = d2_scale(cj) * rho1.norm_squared();
    Ok(values.iter().all(|q| q.abs() <= 1e-9 * scale))
}

fn d2_scale(cj: &ConstraintJets) -> f64 {
    let d2 = cj.blocks().iter().filter_map(|b| b.tensors.get(1)).map(|t| t.max_abs()).fold(0.0, f64::max);
    d2.max(cj.rigidity().amax()).max(1e-300)
}

/// Minimum-norm `ρ⁽²ʲ⁾` solving `R·ρ⁽²ʲ⁾ + (2j)!/(2(j!)²)·D2·(ρ⁽ʲ⁾⊗ρ⁽ʲ⁾) = 0`.
#[derive(Debug, Clone)]
pub struct SecondOrderSolution {
    pub particular: DVector<f64>,
    /// Orthonormal basis of the homogeneous solutions, `Null(R)`.
    pub homogeneous: DMatrix<f64>,
    pub coefficient: f64,
    pub residual: f64,
}

pub fn solve_second_order(cj: &ConstraintJets, rho_j: &DVector<f64>, j: usize) -> Result<SecondOrderSolution> {
    if j == 0 {
        return Err(Error::InvalidArgument("active order must be at least 1".into()));
    }
    check_null(cj, rho_j)?;
    let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
    let coefficient = fact(2 * j) / (2.0 * fact(j).powi(2));
    let r = cj.rigidity();
    let b = -cj.contract_power(2, rho_j.as_slice())? * coefficient;
    let particular = linalg::pinv_solve(r, &b, None);
    let residual = (r * &particular - &b).amax();
    if residual > 1e-8 * b.amax().max(1.0) {
        return Err(Error::NotExtendable(residual));
    }
    Ok(SecondOrderSolution {
        particular,
        homogeneous: linalg::right_null(r, None).null,
        coefficient,
        residual,
    })
}

/// Result of the second-order test together with the `(1,2)` flex jets.
#[derive(Debug, Clone)]
pub struct SecondOrderResult {
    pub outcome: SecondOrderOutcome,
    /// Rays in canonical null coordinates.
    pub rays: Vec<DVector<f64>>,
    pub flexes: Vec<TrajectoryJet>,
}

/// Real solutions `a ≠ 0` of `aᵀ Q_k a = 0` for all `k`, where
/// `Q_k = Aᵀ Ω_k A` over the canonical null basis `A`.
pub fn second_order_test(
    cj: &ConstraintJets,
    stresses: &[DVector<f64>],
    first: &FirstOrderResult,
    _options: &AnalysisOptions,
) -> Result<SecondOrderResult> {
    let d = first.nullity;
    if d == 0 {
        return Ok(SecondOrderResult {
            outcome: SecondOrderOutcome::NotApplicable,
            rays: vec![],
            flexes: vec![],
        });
    }
    let a = &first.canonical;
    let qs: Vec<DMatrix<f64>> = stresses
        .iter()
        .map(|w| Ok(a.transpose() * cj.stress_matrix(w.as_slice())? * a))
        .collect::<Result<_>>()?;
    let tol = 1e-10 * d2_scale(cj) * a.norm_squared().max(1.0);
    let qmax = qs.iter().map(|q| q.amax()).fold(0.0, f64::max);
    let (rays, isolated, all_directions) = if qmax <= tol {
        ((0..d).map(|k| DVector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 })).collect(), false, true)
    } else {
        match d {
            1 => (vec![DVector::from_element(1, 1.0)], true, false),
            2 => (rays_plane(&qs, tol), true, false),
            3 => {
                let (r, iso) = rays_space(&qs, tol);
                (r, iso, false)
            }
            _ => {
                return Ok(SecondOrderResult {
                    outcome: SecondOrderOutcome::Undecided {
                        reason: format!("variety dimension too high: nullity {d} with {} quadrics", qs.len()),
                    },
                    rays: vec![],
                    flexes: vec![],
                })
            }
        }
    };
    // a one-dimensional null space with a nonzero quadric has no nonzero root
    let rays: Vec<DVector<f64>> = if d == 1 && qmax > tol { vec![] } else { rays };
    let mut rays: Vec<DVector<f64>> = rays.into_iter().map(normalize_ray).collect();
    rays.sort_by(|x, y| {
        y.iter()
            .zip(x.iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut flexes = Vec::with_capacity(rays.len());
    for ray in &rays {
        let rho1 = a * ray;
        let sol = solve_second_order(cj, &rho1, 1)?;
        flexes.push(TrajectoryJet::new(vec![rho1, sol.particular])?);
    }
    let outcome = if rays.is_empty() {
        SecondOrderOutcome::Rigid
    } else {
        SecondOrderOutcome::Flexible {
            rays: rays.iter().map(|r| r.as_slice().to_vec()).collect(),
            isolated,
            all_directions,
        }
    };
    Ok(SecondOrderResult { outcome, rays, flexes })
}

/// Scale so the first coordinate that is not negligible equals one.
fn normalize_ray(a: DVector<f64>) -> DVector<f64> {
    let n = a.amax();
    let lead = a.iter().copied().find(|x| x.abs() > 1e-9 * n).unwrap_or(1.0);
    let mut out = a / lead;
    for x in out.iter_mut() {
        if x.abs() < 1e-14 {
            *x = 0.0;
        }
    }
    out
}

/// Common real roots of binary quadratic forms.
fn rays_plane(qs: &[DMatrix<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut rays = Vec::new();
    if qs.iter().all(|q| q[(1, 1)].abs() <= tol) {
        rays.push(DVector::from_vec(vec![0.0, 1.0]));
    }
    // a = (1, x): q00 + 2 q01 x + q11 x²
    let Some(best) = qs.iter().max_by(|p, q| p.amax().total_cmp(&q.amax())) else {
        return rays;
    };
    let (c, b, a) = (best[(0, 0)], 2.0 * best[(0, 1)], best[(1, 1)]);
    let mut roots = Vec::new();
    if a.abs() > tol {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            // stable quadratic formula
            let qv = -0.5 * (b + b.signum() * s);
            if qv != 0.0 {
                roots.push(qv / a);
                roots.push(c / qv);
            } else {
                roots.push(0.0);
            }
        } else if disc > -tol * tol * 1e4 {
            roots.push(-b / (2.0 * a));
        }
    } else if b.abs() > tol {
        roots.push(-c / b);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    for x in roots {
        let ok = qs.iter().all(|q| {
            let v = q[(0, 0)] + 2.0 * q[(0, 1)] * x + q[(1, 1)] * x * x;
            v.abs() <= 10.0 * tol * (1.0 + x * x)
        });
        if ok {
            rays.push(DVector::from_vec(vec![1.0, x]));
        }
    }
    rays
}

fn residual(qs: &[DMatrix<f64>], a: &DVector<f64>) -> DVector<f64> {
    let mut r = DVector::zeros(qs.len() + 1);
    for (k, q) in qs.iter().enumerate() {
        r[k] = a.dot(&(q * a));
    }
    r[qs.len()] = a.norm_squared() - 1.0;
    r
}

fn jacobian(qs: &[DMatrix<f64>], a: &DVector<f64>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(qs.len() + 1, a.len());
    for (k, q) in qs.iter().enumerate() {
        j.set_row(k, &(q * a * 2.0).transpose());
    }
    j.set_row(qs.len(), &(a * 2.0).transpose());
    j
}

/// Deflation factor `Π (1/d_s² + 1)` and its gradient, with `d_s` the distance
/// from `a` to the nearer of `±s`.
fn deflation(a: &DVector<f64>, found: &[DVector<f64>]) -> (f64, DVector<f64>) {
    let mut m = 1.0;
    let mut grad_log = DVector::zeros(a.len());
    for s in found {
        let (dp, dm) = ((a - s).norm_squared(), (a + s).norm_squared());
        let diff = if dp <= dm { a - s } else { a + s };
        let d2 = dp.min(dm).max(1e-300);
        let f = 1.0 / d2 + 1.0;
        m *= f;
        grad_log += diff * (-2.0 / (d2 * d2) / f);
    }
    (m, grad_log * m)
}

fn levenberg_marquardt(qs: &[DMatrix<f64>], start: &DVector<f64>, found: &[DVector<f64>], iters: usize) -> DVector<f64> {
    let eval = |a: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let r = residual(qs, a);
        let j = jacobian(qs, a);
        if found.is_empty() {
            return (r, j);
        }
        let (m, gm) = deflation(a, found);
        let jd = j * m + &r * gm.transpose();
        (r * m, jd)
    };
    let n = start.len();
    let mut a = start.normalize();
    let mut mu = 1e-3;
    let (mut r, mut j) = eval(&a);
    for _ in 0..iters {
        let cost = r.norm_squared();
        if cost < 1e-32 {
            break;
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let m = &jtj + DMatrix::identity(n, n) * mu * (1.0 + jtj.diagonal().amax());
            if let Some(ch) = m.cholesky() {
                let cand = &a - ch.solve(&g);
                let (rc, jc) = eval(&cand);
                if rc.norm_squared() < cost {
                    a = cand;
                    r = rc;
                    j = jc;
                    mu = (mu * 0.2).max(1e-18);
                    accepted = true;
                    break;
                }
            }
            mu *= 8.0;
        }
        if !accepted {
            break;
        }
    }
    a
}

/// Evenly spread directions on the unit sphere.
pub(crate) fn fibonacci_sphere(n: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            DVector::from_vec(vec![r * th.cos(), r * th.sin(), z])
        })
        .collect()
}

/// Real rays of ternary quadrics by damped Newton multistart with
/// deflation. Returns the rays and whether each is an isolated solution;
/// the search stops at the first root lying on a curve of roots.
fn rays_space(qs: &[DMatrix<f64>], tol: f64) -> (Vec<DVector<f64>>, bool) {
    let qscale = qs.iter().map(|q| q.amax()).fold(0.0, f64::max);
    let scaled: Vec<DMatrix<f64>> = qs.iter().map(|q| q / qscale).collect();
    let rtol = (tol / qscale).max(1e-13);
    let mut found: Vec<DVector<f64>> = Vec::new();
    let mut isolated = true;
    for start in fibonacci_sphere(128) {
        let deflated = levenberg_marquardt(&scaled, &start, &found, 200);
        let a = levenberg_marquardt(&scaled, &deflated, &[], 50).normalize();
        let r = residual(&scaled, &a);
        if r.rows(0, qs.len()).amax() > rtol {
            continue;
        }
        if found.iter().any(|s| s.dot(&a).abs() > 1.0 - 1e-8) {
            continue;
        }
        let j = jacobian(&scaled, &a);
        let sv = j.singular_values();
        found.push(a);
        if sv.len() < 3 || sv.min() < 1e-7 * sv.max() {
            isolated = false;
            break;
        }
    }
    (found, isolated)
}
