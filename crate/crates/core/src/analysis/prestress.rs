//! Prestress stability, saddle detection and second-order prestress stability.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{AnalysisOptions, PrestressOutcome, SaddleOutcome, SecondOrderPrestressOutcome};
use crate::derivatives::ConstraintJets;
use crate::energy::EnergyModel;
use crate::error::Result;
use crate::jets::TrajectoryJet;
use crate::linalg;

/// Selfstress basis with the stress matrices it induces, full and reduced
/// to an orthonormal basis `N` of `Null(R)`.
#[derive(Debug, Clone)]
pub struct StressFamily {
    pub basis: Vec<DVector<f64>>,
    pub full: Vec<DMatrix<f64>>,
    pub reduced: Vec<DMatrix<f64>>,
    pub null: DMatrix<f64>,
    /// `max_k ‖NᵀΩ_kN‖_F`, the unit for scores.
    pub scale: f64,
}

impl StressFamily {
    pub fn new(cj: &ConstraintJets, basis: Vec<DVector<f64>>, null: DMatrix<f64>) -> Result<StressFamily> {
        let full: Vec<DMatrix<f64>> = basis
            .iter()
            .map(|w| cj.stress_matrix(w.as_slice()))
            .collect::<Result<_>>()?;
        let reduced: Vec<DMatrix<f64>> = full.iter().map(|o| null.transpose() * o * &null).collect();
        let scale = reduced.iter().map(|m| m.norm()).fold(0.0, f64::max);
        Ok(StressFamily {
            basis,
            full,
            reduced,
            null,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn mix(mats: &[DMatrix<f64>], w: &DVector<f64>) -> DMatrix<f64> {
        let mut m = mats[0].clone() * w[0];
        for (k, mk) in mats.iter().enumerate().skip(1) {
            m += mk * w[k];
        }
        m
    }

    /// `NᵀΩ(w)N` for coefficients `w` in the basis.
    pub fn reduced_at(&self, w: &DVector<f64>) -> DMatrix<f64> {
        StressFamily::mix(&self.reduced, w)
    }

    pub fn stress_at(&self, w: &DVector<f64>) -> DMatrix<f64> {
        StressFamily::mix(&self.full, w)
    }

    pub fn omega_at(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut o = self.basis[0].clone() * w[0];
        for (k, b) in self.basis.iter().enumerate().skip(1) {
            o += b * w[k];
        }
        o
    }
}

/// Deterministic standard-normal start points on the unit sphere.
fn sphere_starts(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let n: f64 = v.norm();
            if n > 1e-12 {
                break v / n;
            }
        })
        .collect()
}

/// Best `(score, point, start index)` with ties going to the lowest index.
fn reduce_best(results: Vec<(f64, DVector<f64>)>) -> Option<(f64, DVector<f64>, usize)> {
    results
        .into_iter()
        .enumerate()
        .fold(None, |acc, (i, (s, w))| match acc {
            Some((bs, _, _)) if bs >= s => acc,
            _ => Some((s, w, i)),
        })
}

fn soft_min(vals: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let m = vals[0];
    let ws: Vec<f64> = vals.iter().map(|v| (-beta * (v - m)).exp()).collect();
    let z: f64 = ws.iter().sum();
    (m - z.ln() / beta, ws.iter().map(|w| w / z).collect())
}

/// Ascent of `λ_min(Σ w_k M_k)` on the unit sphere from `w0`, matrices
/// already scaled to unit size. Returns the best true `λ_min` and its point.
fn ascend(mats: &[DMatrix<f64>], w0: &DVector<f64>) -> (f64, DVector<f64>) {
    let eval = |w: &DVector<f64>| linalg::sym_eigen_sorted(&StressFamily::mix(mats, w));
    let mut w = w0.clone();
    let (vals, mut vecs) = eval(&w);
    let mut vals = vals;
    let mut best = (vals[0], w.clone());
    let mut beta = 50.0;
    let mut step = 0.2;
    for _ in 0..400 {
        let (obj, p) = soft_min(&vals, beta);
        let mut g = DVector::from_fn(mats.len(), |k, _| {
            p.iter()
                .enumerate()
                .filter(|(_, &pi)| pi > 1e-14)
                .map(|(i, &pi)| {
                    let v = vecs.column(i);
                    pi * v.dot(&(&mats[k] * v))
                })
                .sum()
        });
        g -= &w * w.dot(&g);
        let gn = g.norm();
        if gn < 1e-13 {
            break;
        }
        let mut moved = false;
        while step > 1e-12 {
            let cand = (&w + &g * (step / gn)).normalize();
            let (cv, cvec) = eval(&cand);
            if soft_min(&cv, beta).0 > obj {
                w = cand;
                vals = cv;
                vecs = cvec;
                step = (step * 1.5).min(0.5);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if vals[0] > best.0 {
            best = (vals[0], w.clone());
        }
        if !moved {
            if beta > 1e8 {
                break;
            }
            step = 0.05;
        }
        beta = (beta * 1.2).min(1e9);
    }
    best
}

/// Result of the `∃ω` search for a stabilizing stress.
#[derive(Debug, Clone)]
pub struct PrestressSearch {
    pub outcome: PrestressOutcome,
    /// Best score per start, scaled by [`StressFamily::scale`].
    pub candidates: Vec<(f64, DVector<f64>)>,
    pub best: Option<(f64, DVector<f64>)>,
}

/// Maximize `λ_min(NᵀΩ(w)N)` over unit `w` by multistart ascent.
pub fn prestress_stability_search(family: &StressFamily, options: &AnalysisOptions) -> PrestressSearch {
    if family.dim() == 0 || family.null.ncols() == 0 {
        return PrestressSearch {
            outcome: PrestressOutcome::Infeasible {
                best_score: None,
                best_omega: None,
                starts: 0,
                reason: Some("no selfstress".into()),
            },
            candidates: vec![],
            best: None,
        };
    }
    if family.scale == 0.0 {
        return PrestressSearch {
            outcome: PrestressOutcome::Undecided {
                best_score: 0.0,
                best_omega: family.omega_at(&unit(family.dim(), 0)).as_slice().to_vec(),
            },
            candidates: vec![(0.0, unit(family.dim(), 0))],
            best: Some((0.0, unit(family.dim(), 0))),
        };
    }
    let mats: Vec<DMatrix<f64>> = family.reduced.iter().map(|m| m / family.scale).collect();
    let starts = sphere_starts(family.dim(), options.starts.max(1), options.seed);
    let results: Vec<(f64, DVector<f64>)> = starts.par_iter().map(|w0| ascend(&mats, w0)).collect();
    let (score, w, _) = reduce_best(results.clone()).expect("at least one start");
    let omega = family.omega_at(&w).as_slice().to_vec();
    let outcome = if score > options.band {
        PrestressOutcome::Stable {
            omega,
            score,
            lambda_min: score * family.scale,
        }
    } else if score < -options.band {
        PrestressOutcome::Infeasible {
            best_score: Some(score),
            best_omega: Some(omega),
            starts: options.starts.max(1),
            reason: None,
        }
    } else {
        PrestressOutcome::Undecided {
            best_score: score,
            best_omega: omega,
        }
    };
    PrestressSearch {
        outcome,
        candidates: results,
        best: Some((score, w)),
    }
}

fn unit(dim: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 })
}

/// Null vector `z` of the reduced stress matrix (coordinates in `N`) with
/// `‖Ω N z‖` above tolerance, if any.
fn violating_direction(family: &StressFamily, w: &DVector<f64>, band: f64) -> Option<DVector<f64>> {
    let m = family.reduced_at(w);
    let (vals, vecs) = linalg::sym_eigen_sorted(&m);
    let omega = family.stress_at(w);
    let on = omega.norm().max(1e-300);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for (i, &l) in vals.iter().enumerate() {
        if l.abs() > 10.0 * band * family.scale {
            continue;
        }
        let z = vecs.column(i).into_owned();
        let push = (&omega * (&family.null * &z)).norm() / on;
        if push > 1e-6 && best.as_ref().map_or(true, |(b, _)| push > *b) {
            best = Some((push, z));
        }
    }
    best.map(|(_, z)| z)
}

/// Whether `Null(R)` fails to be `Ω`-positive modulo `Null(Ω)` for every
/// nonzero selfstress.
pub fn saddle_test(
    cj: &ConstraintJets,
    family: &StressFamily,
    search: &PrestressSearch,
    options: &AnalysisOptions,
) -> Result<SaddleOutcome> {
    let Some((score, w)) = &search.best else {
        return Ok(SaddleOutcome::NotSaddle {
            omega: None,
            reason: "no selfstress".into(),
        });
    };
    if *score > options.band {
        return Ok(SaddleOutcome::Skipped {
            reason: "prestress stable".into(),
        });
    }
    let band = options.band;
    if *score < -band {
        // every stress has a strictly negative direction on Null(R)
        let m = family.reduced_at(w);
        let (vals, vecs) = linalg::sym_eigen_sorted(&m);
        let z = vecs.column(0).into_owned();
        let direction = &family.null * &z;
        return Ok(SaddleOutcome::Saddle {
            omega: family.omega_at(w).as_slice().to_vec(),
            direction: direction.as_slice().to_vec(),
            score: *score,
            curvature: vals[0],
            degenerate: false,
            phi: None,
            s_bound: None,
        });
    }
    // degenerate: candidates in the band must each admit a violating direction
    let near: Vec<&DVector<f64>> = search
        .candidates
        .iter()
        .filter(|(s, _)| *s >= -band)
        .map(|(_, c)| c)
        .collect();
    let mut first: Option<(DVector<f64>, DVector<f64>)> = None;
    for c in &near {
        match violating_direction(family, c, band) {
            None => {
                return Ok(SaddleOutcome::NotSaddle {
                    omega: Some(family.omega_at(c).as_slice().to_vec()),
                    reason: "stress positive semidefinite modulo its kernel on Null(R)".into(),
                })
            }
            Some(z) => {
                if first.is_none() {
                    first = Some(((*c).clone(), z));
                }
            }
        }
    }
    let Some((wc, z)) = first else {
        return Ok(SaddleOutcome::Undecided {
            reason: "no candidate stress inside the tolerance band".into(),
        });
    };
    let unique = family.dim() == 1 || near.iter().all(|c| c.dot(&wc).abs() > 1.0 - 1e-6);
    if !unique {
        return Ok(SaddleOutcome::Undecided {
            reason: "several maximizing stresses; modulo condition not certified for all".into(),
        });
    }
    let omega_vec = family.omega_at(&wc);
    let omega = family.stress_at(&wc);
    let rho1 = &family.null * &z;
    let push = &omega * &rho1;
    let phi = -&push / push.norm();
    let energy = EnergyModel::new(cj, omega_vec.clone(), None, None)?;
    let eps = energy.epsilon();
    let r = cj.rigidity();
    let rphi = r * &phi;
    let denom = eps * phi.dot(&(&omega * &phi)) + rphi.dot(&(energy.stiffness() * &rphi));
    let s_bound = -2.0 * eps * phi.dot(&(&omega * &rho1)) / denom;
    Ok(SaddleOutcome::Saddle {
        omega: omega_vec.as_slice().to_vec(),
        direction: rho1.as_slice().to_vec(),
        score: *score,
        curvature: rho1.dot(&(&omega * &rho1)),
        degenerate: true,
        phi: Some(phi.as_slice().to_vec()),
        s_bound: Some(s_bound),
    })
}

/// Score of one stress for the second-order prestress conditions, in units
/// of the family scale. `None` when the quadratic part is unbounded below.
fn second_order_score(
    family: &StressFamily,
    w: &DVector<f64>,
    flexes: &[(DVector<f64>, DVector<f64>, Vec<f64>)],
    band: f64,
) -> f64 {
    let m = family.reduced_at(w);
    let (vals, vecs) = linalg::sym_eigen_sorted(&m);
    let scale = family.scale.max(1e-300);
    if vals[0] < -band * scale {
        return vals[0] / scale - 1.0;
    }
    if let Some(z) = violating_direction(family, w, band) {
        let omega = family.stress_at(w);
        return -1.0 - (&omega * (&family.null * z)).norm() / scale;
    }
    let omega = family.stress_at(w);
    let mut worst = f64::INFINITY;
    for (rho1, rho2, quartic) in flexes {
        let b = family.null.transpose() * (&omega * rho2);
        // minimum over homogeneous offsets ρ″ + N h
        let mut q = rho2.dot(&(&omega * rho2));
        for (i, &l) in vals.iter().enumerate() {
            let c = vecs.column(i).dot(&b);
            if l.abs() <= 10.0 * band * scale {
                if c.abs() > 1e-9 * scale * rho2.norm().max(1.0) {
                    return -1.0 - c.abs() / scale;
                }
            } else {
                q -= c * c / l;
            }
        }
        let qv: f64 = quartic.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        let v = (3.0 * q + qv) / (scale * rho1.norm_squared().powi(2).max(1e-300));
        worst = worst.min(v);
    }
    worst
}

/// Pattern search maximizing `score` over the unit sphere.
fn pattern_search(dim: usize, start: &DVector<f64>, score: impl Fn(&DVector<f64>) -> f64) -> (f64, DVector<f64>) {
    let mut w = start.clone();
    let mut s = score(&w);
    let mut step = 0.25;
    while step > 1e-9 {
        let mut improved = false;
        for k in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = w.clone();
                c[k] += sign * step;
                let c = c.normalize();
                let sc = score(&c);
                if sc > s {
                    w = c;
                    s = sc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (s, w)
}

/// Search for `ω` with `ω·D3 = 0`, `Null(R)` `Ω`-positive modulo `Null(Ω)`,
/// and `3Ω(ρ″,ρ″) + Ωᴵᴵ(ρ′⁴) > 0` on every `(1,2)` flex.
pub fn second_order_prestress_test(
    cj: &ConstraintJets,
    family: &StressFamily,
    flexes: &[TrajectoryJet],
    options: &AnalysisOptions,
) -> Result<SecondOrderPrestressOutcome> {
    if family.dim() == 0 {
        return Ok(SecondOrderPrestressOutcome::NotStable {
            best_value: None,
            reason: "no selfstress".into(),
        });
    }
    if cj.kmax() < 4 {
        return Ok(SecondOrderPrestressOutcome::Undecided {
            reason: "derivative order 4 not available".into(),
        });
    }
    // exact linear restriction ω·D3 = 0
    let d3: Vec<Vec<f64>> = family
        .basis
        .iter()
        .map(|w| Ok(cj.weighted(3, w.as_slice())?.as_slice().to_vec()))
        .collect::<Result<_>>()?;
    let rows = d3[0].len();
    let t = DMatrix::from_fn(rows, family.dim(), |i, k| d3[k][i]);
    let t_scale = t.amax();
    let sub = if t_scale <= 1e-12 * family.scale.max(1.0) {
        DMatrix::identity(family.dim(), family.dim())
    } else {
        linalg::right_null(&t, Some(1e-10 * t_scale * rows.max(1) as f64)).null
    };
    if sub.ncols() == 0 {
        return Ok(SecondOrderPrestressOutcome::NotStable {
            best_value: None,
            reason: "no selfstress with vanishing third-order stress".into(),
        });
    }
    let data: Vec<(DVector<f64>, DVector<f64>, Vec<f64>)> = flexes
        .iter()
        .map(|j| {
            let rho1 = j.derivs()[0].clone();
            let rho2 = j.derivs()[1].clone();
            let quartic = family
                .basis
                .iter()
                .map(|w| {
                    let v = cj.contract_power(4, rho1.as_slice())?;
                    Ok(v.dot(w))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((rho1, rho2, quartic))
        })
        .collect::<Result<_>>()?;
    let score = |c: &DVector<f64>| second_order_score(family, &(&sub * c), &data, options.band);
    let starts = sphere_starts(sub.ncols(), options.starts.max(1), options.seed ^ 0x5eed);
    let results: Vec<(f64, DVector<f64>)> = starts
        .par_iter()
        .map(|c0| pattern_search(sub.ncols(), c0, score))
        .collect();
    let (best, c, _) = reduce_best(results).expect("at least one start");
    let w = &sub * c;
    let omega = family.omega_at(&w).as_slice().to_vec();
    Ok(if best > options.band {
        SecondOrderPrestressOutcome::Stable { omega, value: best }
    } else if best < -options.band {
        SecondOrderPrestressOutcome::NotStable {
            best_value: Some(best),
            reason: "no stress found satisfying the second-order conditions".into(),
        }
    } else {
        SecondOrderPrestressOutcome::Undecided {
            reason: format!("best score {best:e} inside the tolerance band"),
        }
    })
}
