//! Prestressed quadratic energies `E = Σ ε ω_i·f_i + ½ f_iᵀ K_i f_i`,
//! selfstresses, stress tensors and a numerical growth-order probe.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use twofloat::TwoFloat;

use crate::derivatives::{ConstraintJets, Evaluator};
use crate::error::{Error, Result};
use crate::jets::{residual_series, TrajectoryJet};
use crate::linalg;
use crate::tensor::SymmetricTensor;

/// Margin between the prestress and the smallest stiffness eigenvalue.
pub const KAPPA_GUARD: f64 = 10.0;

/// Relative equilibrium tolerance for `‖ωᵀR‖∞`.
pub const SELFSTRESS_TOL: f64 = 1e-10;

/// Default prestress scale relative to `σ_min(K)`.
pub const EPSILON_FACTOR: f64 = 1e-3;

/// Quadratic energy with block-diagonal stiffness and a scaled selfstress.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    blocks: Vec<DMatrix<f64>>,
    stiffness: DMatrix<f64>,
    omega: DVector<f64>,
    epsilon: f64,
    prestress: DVector<f64>,
    sigma_min: f64,
}

fn block_widths(cj: &ConstraintJets) -> Vec<usize> {
    let w: Vec<usize> = cj.blocks().iter().map(|b| b.width).collect();
    if w.iter().sum::<usize>() == cj.n_rows() {
        w
    } else {
        vec![cj.n_rows()]
    }
}

/// Equilibrium defect `‖ωᵀR‖∞` and the threshold it must stay under.
fn equilibrium_defect(r: &DMatrix<f64>, omega: &DVector<f64>) -> (f64, f64) {
    let defect = (r.transpose() * omega).amax();
    let tol = SELFSTRESS_TOL * (omega.norm() * r.norm()).max(1.0);
    (defect, tol)
}

/// Error unless `omega` is in the left null space of `r`.
pub fn check_selfstress(r: &DMatrix<f64>, omega: &DVector<f64>) -> Result<()> {
    if omega.len() != r.nrows() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            found: omega.len(),
        });
    }
    let (defect, tol) = equilibrium_defect(r, omega);
    if defect >= tol {
        return Err(Error::NotSelfstress(defect));
    }
    Ok(())
}

impl EnergyModel {
    /// `stiffness` defaults to the identity per block, `epsilon` to
    /// `1e-3·σ_min(K)`.
    pub fn new(
        cj: &ConstraintJets,
        omega: DVector<f64>,
        epsilon: Option<f64>,
        stiffness: Option<Vec<DMatrix<f64>>>,
    ) -> Result<EnergyModel> {
        let widths = block_widths(cj);
        let blocks = match stiffness {
            Some(b) => b,
            None => widths.iter().map(|&w| DMatrix::identity(w, w)).collect(),
        };
        if blocks.len() != widths.len() {
            return Err(Error::DimensionMismatch {
                expected: widths.len(),
                found: blocks.len(),
            });
        }
        let n = cj.n_rows();
        let mut full = DMatrix::zeros(n, n);
        let mut sigma_min = f64::INFINITY;
        let mut off = 0;
        for (b, (k, &w)) in blocks.iter().zip(&widths).enumerate() {
            if k.shape() != (w, w) {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    found: k.nrows(),
                });
            }
            if (k - k.transpose()).amax() > 1e-12 * k.amax().max(1.0) {
                return Err(Error::Stiffness(b));
            }
            let lmin = linalg::lambda_min(k);
            if !(lmin > 0.0) {
                return Err(Error::Stiffness(b));
            }
            sigma_min = sigma_min.min(lmin);
            full.view_mut((off, off), (w, w)).copy_from(k);
            off += w;
        }
        if n == 0 {
            sigma_min = 1.0;
        }
        check_selfstress(cj.rigidity(), &omega)?;
        let epsilon = epsilon.unwrap_or(EPSILON_FACTOR * sigma_min);
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("prestress scale {epsilon} must be finite and non-negative")));
        }
        let value = epsilon * omega.norm();
        let limit = sigma_min / KAPPA_GUARD;
        if value >= limit {
            return Err(Error::PrestressGuard {
                value,
                guard: KAPPA_GUARD,
                limit,
            });
        }
        let prestress = &omega * epsilon;
        Ok(EnergyModel {
            blocks,
            stiffness: full,
            omega,
            epsilon,
            prestress,
            sigma_min,
        })
    }

    /// `E = ½‖f‖²`.
    pub fn unstressed(cj: &ConstraintJets) -> EnergyModel {
        EnergyModel::new(cj, DVector::zeros(cj.n_rows()), Some(0.0), None)
            .expect("identity stiffness and zero stress are admissible")
    }

    pub fn n_rows(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ε·ω`, the gradient of `E` with respect to `f` at `f = 0`.
    pub fn prestress(&self) -> &DVector<f64> {
        &self.prestress
    }

    /// Block-diagonal `K`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn stiffness_blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Smallest eigenvalue over the stiffness blocks.
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// `E` as a function of the residual vector.
    pub fn value(&self, f: &DVector<f64>) -> f64 {
        self.prestress.dot(f) + 0.5 * f.dot(&(&self.stiffness * f))
    }

    /// `E(f(ρ))`.
    pub fn value_at(&self, evaluator: &Evaluator, rho: &[f64]) -> f64 {
        self.value(&DVector::from_vec(evaluator.eval(rho)))
    }

    /// `dE/dρ = Rᵀ(εω + K f)` at the base of `cj`.
    pub fn gradient(&self, cj: &ConstraintJets) -> DVector<f64> {
        let f0 = DVector::from_vec(cj.evaluator().eval(cj.base().as_slice()));
        cj.rigidity().transpose() * (&self.prestress + &self.stiffness * f0)
    }

    /// `d²E/dρ² = εΩ + RᵀKR` at the base of `cj`.
    pub fn hessian(&self, cj: &ConstraintJets) -> Result<DMatrix<f64>> {
        let r = cj.rigidity();
        let omega = cj.stress_matrix(self.prestress.as_slice())?;
        Ok(omega + r.transpose() * &self.stiffness * r)
    }
}

/// Same as [`EnergyModel::new`].
pub fn build_energy(
    cj: &ConstraintJets,
    omega: DVector<f64>,
    epsilon: Option<f64>,
    stiffness: Option<Vec<DMatrix<f64>>>,
) -> Result<EnergyModel> {
    EnergyModel::new(cj, omega, epsilon, stiffness)
}

/// Orthonormal basis of the left null space of `r`.
pub fn selfstress_basis(r: &DMatrix<f64>, tol: Option<f64>) -> Vec<DVector<f64>> {
    let info = linalg::left_null(r, tol);
    info.null.column_iter().map(|c| c.into_owned()).collect()
}

/// `Ω = ω·D2`, `Ωᴵᴵ = ω·D4` and `ω·D3` for one selfstress.
#[derive(Debug, Clone)]
pub struct StressData {
    pub omega: DVector<f64>,
    pub stress: DMatrix<f64>,
    pub third_order: SymmetricTensor,
    pub second_order: SymmetricTensor,
}

/// Stress matrix and higher stress tensors; needs `kmax ≥ 4`.
pub fn stress_data(omega: &DVector<f64>, cj: &ConstraintJets) -> Result<StressData> {
    check_selfstress(cj.rigidity(), omega)?;
    Ok(StressData {
        omega: omega.clone(),
        stress: cj.stress_matrix(omega.as_slice())?,
        third_order: cj.weighted(3, omega.as_slice())?,
        second_order: cj.weighted(4, omega.as_slice())?,
    })
}

/// One sample of the growth probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub r: f64,
    pub energy: f64,
    /// Estimated rounding noise of `energy`.
    pub noise: f64,
}

impl GrowthPoint {
    pub fn resolved(&self) -> bool {
        self.energy > NOISE_MARGIN * self.noise && self.r > 0.0
    }
}

/// Least-squares fit `log(E − E₀) ≈ s·log r + b`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `log E` from the fitted line.
    pub residual: f64,
    pub points: Vec<GrowthPoint>,
    /// Grid points discarded as being under the noise floor.
    pub dropped: usize,
    /// Jet orders refined before sampling.
    pub polished: usize,
}

pub const GROWTH_T_MIN: f64 = 1e-4;
pub const GROWTH_T_MAX: f64 = 1e-1;
pub const GROWTH_POINTS: usize = 25;

/// Energy samples must exceed this multiple of the estimated rounding noise.
pub const NOISE_MARGIN: f64 = 1e2;

/// Logarithmically spaced grid of `n ≥ 2` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Default probe grid `[1e-4, 1e-1]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(GROWTH_T_MIN, GROWTH_T_MAX, GROWTH_POINTS)
}

/// Unit roundoff of the double-double arithmetic used by the probe.
const DD_EPS: f64 = 4.93e-32;

/// Series length used for refinement; jets up to order `SERIES_N − 1`.
const SERIES_N: usize = 16;

/// Sample `E(γ(t)) − E(ρ)` on `grid` along an arbitrary path given in
/// double-double arithmetic, with `r = ‖γ(t) − ρ‖` and a noise estimate.
pub fn growth_samples_path(
    energy: &EnergyModel,
    cj: &ConstraintJets,
    path: impl Fn(f64) -> Vec<TwoFloat>,
    grid: &[f64],
) -> Result<Vec<GrowthPoint>> {
    let ev = cj.evaluator();
    let base: Vec<TwoFloat> = cj.base().iter().map(|&x| TwoFloat::from(x)).collect();
    let f0: Vec<TwoFloat> = ev.eval(&base);
    let k = energy.stiffness();
    let noise_f = DD_EPS * 64.0 * ev.length_scale() * (cj.n_angles().max(1) as f64);
    let kn = k.norm();
    let mut points = Vec::with_capacity(grid.len());
    for &t in grid {
        let rho = path(t);
        if rho.len() != base.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                found: rho.len(),
            });
        }
        let f = ev.eval(&rho);
        let df: Vec<TwoFloat> = f.iter().zip(&f0).map(|(a, b)| *a - *b).collect();
        let mut e = TwoFloat::from(0.0);
        for (i, d) in df.iter().enumerate() {
            e += *d * energy.prestress()[i];
            let mut kd = TwoFloat::from(0.0);
            for (j, dj) in df.iter().enumerate() {
                if k[(i, j)] != 0.0 {
                    kd += *dj * k[(i, j)];
                }
            }
            e += *d * kd * 0.5;
        }
        let r = rho
            .iter()
            .zip(&base)
            .map(|(a, b)| f64::from(*a - *b).powi(2))
            .sum::<f64>()
            .sqrt();
        let e = f64::from(e);
        let dfn = df.iter().map(|d| f64::from(*d).powi(2)).sum::<f64>().sqrt();
        let noise = energy.prestress().norm() * noise_f + kn * (dfn + noise_f) * noise_f;
        if e < -NOISE_MARGIN * noise {
            return Err(Error::Unresolvable(format!("energy decreases along the path (t = {t:e}, E - E0 = {e:e})")));
        }
        points.push(GrowthPoint { t, r, energy: e, noise });
    }
    Ok(points)
}

/// Fit the growth exponent to the samples that clear the noise floor.
pub fn fit_growth(samples: &[GrowthPoint]) -> Result<GrowthFit> {
    let points: Vec<GrowthPoint> = samples.iter().filter(|p| p.resolved()).cloned().collect();
    let dropped = samples.len() - points.len();
    if points.len() < 3 {
        return Err(Error::Unresolvable(format!(
            "energy increment below noise floor at {} of {} grid points",
            dropped,
            samples.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.r.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.energy.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Unresolvable("all samples share one radius".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GrowthFit {
        slope,
        intercept,
        residual,
        points,
        dropped,
        polished: 0,
    })
}

/// [`growth_samples_path`] followed by [`fit_growth`].
pub fn growth_probe_path(
    energy: &EnergyModel,
    cj: &ConstraintJets,
    path: impl Fn(f64) -> Vec<TwoFloat>,
    grid: &[f64],
) -> Result<GrowthFit> {
    fit_growth(&growth_samples_path(energy, cj, path, grid)?)
}

/// Refine the orders of `jet` at which it already annihilates `dⁱf/dtⁱ`
/// (to `1e-8` relative): Gauss-Newton on all entries up to that order, with
/// residuals in double-double series arithmetic and a central-difference
/// Jacobian. Returns the refined entries and the number of orders treated.
pub fn polish_jet(cj: &ConstraintJets, jet: &TrajectoryJet) -> Result<(Vec<Vec<TwoFloat>>, usize)> {
    if jet.len() >= SERIES_N {
        return Err(Error::OrderExceeded {
            requested: jet.len(),
            available: SERIES_N - 1,
        });
    }
    if jet.dim() != cj.n_angles() {
        return Err(Error::DimensionMismatch {
            expected: cj.n_angles(),
            found: jet.dim(),
        });
    }
    let mut d: Vec<Vec<TwoFloat>> = jet
        .derivs()
        .iter()
        .map(|v| v.iter().map(|&x| TwoFloat::from(x)).collect())
        .collect();
    let base = cj.base().as_slice();
    let stacked = |d: &[Vec<TwoFloat>], k: usize| -> Vec<TwoFloat> {
        let s = residual_series::<TwoFloat, SERIES_N>(cj.evaluator(), base, d);
        (1..=k).flat_map(|i| s.iter().map(move |x| x.derivative(i))).collect()
    };
    let amax = |r: &[TwoFloat]| r.iter().map(|x| f64::from(*x).abs()).fold(0.0, f64::max);
    let scale = jet
        .derivs()
        .iter()
        .map(|v| v.amax())
        .fold(1.0, f64::max)
        .powi(jet.len() as i32)
        * cj.rigidity().amax().max(1.0);
    let m = cj.n_rows();
    let all = stacked(&d, jet.len());
    let mut flex = 0;
    while flex < jet.len() && amax(&all[flex * m..(flex + 1) * m]) <= 1e-8 * scale {
        flex += 1;
    }
    if flex == 0 {
        return Ok((d, 0));
    }
    let n = cj.n_angles();
    let h = 1e-7;
    let mut res = stacked(&d, flex);
    for _ in 0..4 {
        let rn = amax(&res);
        if rn == 0.0 {
            break;
        }
        let mut jac = DMatrix::zeros(m * flex, n * flex);
        for a in 0..flex {
            for j in 0..n {
                let x = d[a][j];
                d[a][j] = x + h;
                let rp = stacked(&d, flex);
                d[a][j] = x - h;
                let rm = stacked(&d, flex);
                d[a][j] = x;
                for (row, (p, q)) in rp.iter().zip(&rm).enumerate() {
                    jac[(row, a * n + j)] = f64::from((*p - *q) / (2.0 * h));
                }
            }
        }
        let rhs = DVector::from_iterator(res.len(), res.iter().map(|x| f64::from(*x)));
        let step = linalg::pinv_solve(&jac, &rhs, None);
        let mut trial = d.clone();
        for a in 0..flex {
            for j in 0..n {
                trial[a][j] -= step[a * n + j];
            }
        }
        let tres = stacked(&trial, flex);
        if amax(&tres) >= rn {
            break;
        }
        d = trial;
        res = tres;
    }
    Ok((d, flex))
}

/// Samples along a jet `γ(t) = ρ + Σ ρ⁽ⁱ⁾ tⁱ/i!` after refining its flex
/// orders with [`polish_jet`]; also returns the number of orders refined.
pub fn growth_samples(
    energy: &EnergyModel,
    cj: &ConstraintJets,
    jet: &TrajectoryJet,
    grid: &[f64],
) -> Result<(Vec<GrowthPoint>, usize)> {
    let (d, polished) = polish_jet(cj, jet)?;
    let base: Vec<TwoFloat> = cj.base().iter().map(|&x| TwoFloat::from(x)).collect();
    let path = |t: f64| {
        let mut rho = base.clone();
        let mut w = TwoFloat::from(1.0);
        for (i, di) in d.iter().enumerate() {
            w = w * t / ((i + 1) as f64);
            for (r, x) in rho.iter_mut().zip(di) {
                *r += *x * w;
            }
        }
        rho
    };
    Ok((growth_samples_path(energy, cj, path, grid)?, polished))
}

/// Fitted growth exponent along a jet; see [`growth_samples`].
pub fn growth_probe(energy: &EnergyModel, cj: &ConstraintJets, jet: &TrajectoryJet, grid: &[f64]) -> Result<GrowthFit> {
    let (samples, polished) = growth_samples(energy, cj, jet, grid)?;
    let mut fit = fit_growth(&samples)?;
    fit.polished = polished;
    Ok(fit)
}
