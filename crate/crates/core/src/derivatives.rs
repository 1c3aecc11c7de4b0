//! Analytic derivative tensors of the closure constraints, their finite-difference
//! oracle, and polynomial constraint systems that share the same interface.
//!
//! At a configuration the conjugated block transform factors as an ordered
//! product of exponentials `Π_p exp(Δρ_p ξ_p)`, one per crease in product
//! order. The mixed derivative over positions `p_1 ≤ … ≤ p_k` is therefore
//! the ordered product `ξ_{p_1} ⋯ ξ_{p_k}`, with
//! `ξ = x^×` for vertex creases and `ξ = [[x^×, -x × O], [0, 0]]` for cycle
//! creases through anchor `O`.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::closure::{require_configuration, Closure, ROTATION_ENTRIES, TOL_CONFIG};
use crate::error::{Error, Result};
use crate::scalar::{ident4, mul4, Real, M4};
use crate::surface::{FoldingState, Surface};
use crate::tensor::{MultiIndices, SymmetricTensor};

/// Default highest derivative order.
pub const DEFAULT_KMAX: usize = 6;

/// One term `coef · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// A polynomial map `ℝⁿ → ℝᵐ`, used for small model systems.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSystem {
    pub n_vars: usize,
    pub rows: Vec<Vec<Monomial>>,
}

impl PolynomialSystem {
    /// Build from `(coef, powers)` lists, one list per row.
    pub fn new(n_vars: usize, rows: Vec<Vec<(f64, Vec<u32>)>>) -> Result<PolynomialSystem> {
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let mut r = Vec::with_capacity(row.len());
            for (coef, powers) in row {
                if powers.len() != n_vars {
                    return Err(Error::DimensionMismatch {
                        expected: n_vars,
                        found: powers.len(),
                    });
                }
                r.push(Monomial { coef, powers });
            }
            out.push(r);
        }
        Ok(PolynomialSystem { n_vars, rows: out })
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for m in row {
                    let mut t = T::from_f64(m.coef);
                    for (xi, &p) in x.iter().zip(&m.powers) {
                        for _ in 0..p {
                            t = t * *xi;
                        }
                    }
                    s = s + t;
                }
                s
            })
            .collect()
    }

    /// Mixed partial derivative over a multi-index, every row, at `x`.
    pub fn derivative(&self, idx: &[usize], x: &[f64]) -> Vec<f64> {
        let mut q = vec![0u32; self.n_vars];
        for &i in idx {
            q[i] += 1;
        }
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| {
                        let mut t = m.coef;
                        for i in 0..self.n_vars {
                            let (p, d) = (m.powers[i], q[i]);
                            if d > p {
                                return 0.0;
                            }
                            for r in 0..d {
                                t *= f64::from(p - r);
                            }
                            t *= x[i].powi((p - d) as i32);
                        }
                        t
                    })
                    .sum()
            })
            .collect()
    }
}

/// Source of residual values for finite differences and trajectory probes.
#[derive(Debug, Clone)]
pub enum Evaluator {
    Closure(Closure),
    Polynomial(PolynomialSystem),
}

impl Evaluator {
    /// Full residual at `rho`.
    pub fn eval<T: Real>(&self, rho: &[T]) -> Vec<T> {
        match self {
            Evaluator::Closure(c) => c.residual_t(rho),
            Evaluator::Polynomial(p) => p.eval(rho),
        }
    }

    /// Residual rows of block `b`.
    pub fn eval_block<T: Real>(&self, b: usize, rho: &[T]) -> Vec<T> {
        match self {
            Evaluator::Closure(c) => {
                let m = c.world_block(b, rho);
                c.select(b, &m)
            }
            Evaluator::Polynomial(p) => p.eval(rho),
        }
    }

    /// Magnitude of the transform entries, used for noise estimates.
    pub fn length_scale(&self) -> f64 {
        match self {
            Evaluator::Closure(c) => (0..c.blocks().len())
                .map(|b| c.start_frame(b).translation.vector.norm())
                .fold(1.0, f64::max),
            Evaluator::Polynomial(_) => 1.0,
        }
    }
}

/// Derivative tensors of one block over its local crease positions.
#[derive(Debug, Clone)]
pub struct BlockJets {
    /// First residual row.
    pub offset: usize,
    /// Residual rows (3 for a vertex, 6 for a cycle).
    pub width: usize,
    /// Global angle index of each local position.
    pub angles: Vec<usize>,
    /// Tensors of orders `1..=kmax`; entry `k - 1` holds order `k`.
    pub tensors: Vec<SymmetricTensor>,
}

impl BlockJets {
    fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.angles.iter().map(|&a| v[a]).collect()
    }

    /// Global multi-index of a local one, sorted.
    pub fn global_index(&self, local: &[usize]) -> Vec<usize> {
        let mut g: Vec<usize> = local.iter().map(|&p| self.angles[p]).collect();
        g.sort_unstable();
        g
    }
}

/// Rigidity matrix and higher derivative tensors of `f` at a configuration.
#[derive(Debug, Clone)]
pub struct ConstraintJets {
    base: FoldingState,
    n_angles: usize,
    n_rows: usize,
    kmax: usize,
    blocks: Vec<BlockJets>,
    rigidity: DMatrix<f64>,
    evaluator: Evaluator,
}

fn skew4(x: &Vector3<f64>) -> M4<f64> {
    [
        [0.0, -x.z, x.y, 0.0],
        [x.z, 0.0, -x.x, 0.0],
        [-x.y, x.x, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
}

fn line_generator(x: &Vector3<f64>, o: &Vector3<f64>) -> M4<f64> {
    let mut g = skew4(x);
    let t = -x.cross(o);
    for i in 0..3 {
        g[i][3] = t[i];
    }
    g
}

fn select4(m: &M4<f64>, cycle: bool) -> Vec<f64> {
    let mut v: Vec<f64> = ROTATION_ENTRIES.iter().map(|&(i, j)| m[i][j]).collect();
    if cycle {
        v.extend((0..3).map(|i| m[i][3]));
    }
    v
}

/// Ordered generator products over all sorted position tuples up to `kmax`.
fn product_tensors(gens: &[M4<f64>], cycle: bool, kmax: usize) -> Vec<SymmetricTensor> {
    let n = gens.len();
    let width = if cycle { 6 } else { 3 };
    let mut tensors: Vec<SymmetricTensor> = (1..=kmax).map(|k| SymmetricTensor::zeros(k, n, width)).collect();
    let mut idx = Vec::with_capacity(kmax);
    fn walk(
        gens: &[M4<f64>],
        cycle: bool,
        kmax: usize,
        prefix: &M4<f64>,
        idx: &mut Vec<usize>,
        tensors: &mut [SymmetricTensor],
    ) {
        let start = idx.last().copied().unwrap_or(0);
        for p in start..gens.len() {
            let m = mul4(prefix, &gens[p]);
            idx.push(p);
            tensors[idx.len() - 1].set(idx, &select4(&m, cycle));
            if idx.len() < kmax {
                walk(gens, cycle, kmax, &m, idx, tensors);
            }
            idx.pop();
        }
    }
    if kmax > 0 && n > 0 {
        walk(gens, cycle, kmax, &ident4::<f64>(), &mut idx, &mut tensors);
    }
    tensors
}

impl ConstraintJets {
    /// Derivatives up to order `kmax` at `state`, which must be a configuration
    /// within [`TOL_CONFIG`].
    pub fn new(surface: &Surface, state: &FoldingState, kmax: usize) -> Result<ConstraintJets> {
        ConstraintJets::with_tolerance(surface, state, kmax, TOL_CONFIG)
    }

    pub fn with_tolerance(surface: &Surface, state: &FoldingState, kmax: usize, tol_config: f64) -> Result<ConstraintJets> {
        if kmax == 0 {
            return Err(Error::InvalidArgument("kmax must be at least 1".into()));
        }
        require_configuration(surface, state, tol_config)?;
        let geom = surface.geometry_at(state)?;
        let closure = Closure::at(surface, state)?;
        let specs: Vec<(usize, bool, Vec<usize>, Vec<M4<f64>>)> = closure
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, bg)| {
                let gens = geom.crease_dirs[b]
                    .iter()
                    .zip(&geom.anchors[b])
                    .map(|(x, o)| if bg.is_cycle() { line_generator(x, o) } else { skew4(x) })
                    .collect();
                (closure.block_offset(b), bg.is_cycle(), bg.angles().to_vec(), gens)
            })
            .collect();
        let blocks: Vec<BlockJets> = specs
            .into_par_iter()
            .map(|(offset, cycle, angles, gens)| BlockJets {
                offset,
                width: if cycle { 6 } else { 3 },
                angles,
                tensors: product_tensors(&gens, cycle, kmax),
            })
            .collect();
        Ok(ConstraintJets::assemble(
            state.clone(),
            surface.n_angles(),
            surface.n_rows(),
            kmax,
            blocks,
            Evaluator::Closure(closure),
        ))
    }

    /// Exact derivative tensors of a polynomial system at `base`.
    pub fn from_polynomial(system: PolynomialSystem, base: &DVector<f64>, kmax: usize) -> Result<ConstraintJets> {
        if base.len() != system.n_vars {
            return Err(Error::DimensionMismatch {
                expected: system.n_vars,
                found: base.len(),
            });
        }
        let n = system.n_vars;
        let m = system.rows.len();
        let x = base.as_slice().to_vec();
        let tensors = (1..=kmax)
            .map(|k| SymmetricTensor::from_fn(k, n, m, |idx| system.derivative(idx, &x)))
            .collect();
        let block = BlockJets {
            offset: 0,
            width: m,
            angles: (0..n).collect(),
            tensors,
        };
        Ok(ConstraintJets::assemble(
            base.clone(),
            n,
            m,
            kmax,
            vec![block],
            Evaluator::Polynomial(system),
        ))
    }

    fn assemble(
        base: FoldingState,
        n_angles: usize,
        n_rows: usize,
        kmax: usize,
        blocks: Vec<BlockJets>,
        evaluator: Evaluator,
    ) -> ConstraintJets {
        let mut rigidity = DMatrix::zeros(n_rows, n_angles);
        for b in &blocks {
            for (p, &a) in b.angles.iter().enumerate() {
                let col = b.tensors[0].get(&[p]);
                for (r, v) in col.iter().enumerate() {
                    rigidity[(b.offset + r, a)] += v;
                }
            }
        }
        ConstraintJets {
            base,
            n_angles,
            n_rows,
            kmax,
            blocks,
            rigidity,
            evaluator,
        }
    }

    pub fn base(&self) -> &FoldingState {
        &self.base
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn blocks(&self) -> &[BlockJets] {
        &self.blocks
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    /// `df/dρ`.
    pub fn rigidity(&self) -> &DMatrix<f64> {
        &self.rigidity
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.kmax {
            return Err(Error::OrderExceeded {
                requested: k,
                available: self.kmax,
            });
        }
        Ok(())
    }

    /// `dᵏf/dρᵏ · (v_1 ⊗ … ⊗ v_k)`.
    pub fn contract(&self, k: usize, vs: &[&[f64]]) -> Result<DVector<f64>> {
        self.check_order(k)?;
        if vs.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: vs.len(),
            });
        }
        if let Some(v) = vs.iter().find(|v| v.len() != self.n_angles) {
            return Err(Error::DimensionMismatch {
                expected: self.n_angles,
                found: v.len(),
            });
        }
        let mut out = DVector::zeros(self.n_rows);
        for b in &self.blocks {
            let local: Vec<Vec<f64>> = vs.iter().map(|v| b.gather(v)).collect();
            let refs: Vec<&[f64]> = local.iter().map(|v| v.as_slice()).collect();
            let val = b.tensors[k - 1].contract(&refs)?;
            for (r, x) in val.iter().enumerate() {
                out[b.offset + r] += x;
            }
        }
        Ok(out)
    }

    /// `dᵏf/dρᵏ · v^{⊗k}`.
    pub fn contract_power(&self, k: usize, v: &[f64]) -> Result<DVector<f64>> {
        let vs = vec![v; k];
        self.contract(k, &vs)
    }

    /// Global scalar tensor `ω · dᵏf/dρᵏ`.
    pub fn weighted(&self, k: usize, omega: &[f64]) -> Result<SymmetricTensor> {
        self.check_order(k)?;
        if omega.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: omega.len(),
            });
        }
        let mut out = SymmetricTensor::zeros(k, self.n_angles, 1);
        for b in &self.blocks {
            let w = &omega[b.offset..b.offset + b.width];
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            let local = b.tensors[k - 1].weighted(w)?;
            for (idx, val) in local.iter() {
                out.add_at(&b.global_index(&idx), val, 1.0);
            }
        }
        Ok(out)
    }

    /// Stress matrix `Ω = ω · d²f/dρ²`.
    pub fn stress_matrix(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        self.check_order(2)?;
        if omega.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: omega.len(),
            });
        }
        let mut m = DMatrix::zeros(self.n_angles, self.n_angles);
        for b in &self.blocks {
            let w = &omega[b.offset..b.offset + b.width];
            for (idx, val) in b.tensors[1].iter() {
                let s: f64 = val.iter().zip(w).map(|(a, c)| a * c).sum();
                let (i, j) = (b.angles[idx[0]], b.angles[idx[1]]);
                m[(i, j)] += s;
                if i != j {
                    m[(j, i)] += s;
                }
            }
        }
        Ok(m)
    }

    /// Global tensor `dᵏf/dρᵏ` with one value of length `n_rows` per multi-index.
    pub fn derivative_tensor(&self, k: usize) -> Result<SymmetricTensor> {
        self.check_order(k)?;
        let mut out = SymmetricTensor::zeros(k, self.n_angles, self.n_rows);
        let mut padded = vec![0.0; self.n_rows];
        for b in &self.blocks {
            for (idx, val) in b.tensors[k - 1].iter() {
                padded.iter_mut().for_each(|x| *x = 0.0);
                padded[b.offset..b.offset + b.width].copy_from_slice(val);
                out.add_at(&b.global_index(&idx), &padded, 1.0);
            }
        }
        Ok(out)
    }

    /// Central finite-difference estimate of each block's order-`k` tensor,
    /// evaluated in double-double arithmetic.
    pub fn fd_blocks(&self, k: usize, h: f64) -> Result<Vec<SymmetricTensor>> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        if k == 0 || k > 3 {
            return Err(Error::InvalidArgument(format!(
                "finite-difference order must be 1, 2 or 3 (got {k})"
            )));
        }
        let base: Vec<TwoFloat> = self.base.iter().map(|&x| TwoFloat::from(x)).collect();
        let scale = 1.0 / (2.0 * h).powi(k as i32);
        Ok(self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(bi, b)| {
                SymmetricTensor::from_fn(k, b.angles.len(), b.width, |idx| {
                    let mut acc = vec![TwoFloat::from(0.0); b.width];
                    for signs in 0..(1u32 << k) {
                        let mut rho = base.clone();
                        let mut sign = 1.0;
                        for (m, &p) in idx.iter().enumerate() {
                            let s = if signs >> m & 1 == 1 { -1.0 } else { 1.0 };
                            sign *= s;
                            let a = b.angles[p];
                            rho[a] += TwoFloat::from(s * h);
                        }
                        let f = self.evaluator.eval_block(bi, &rho);
                        for (x, y) in acc.iter_mut().zip(f) {
                            *x += y * sign;
                        }
                    }
                    acc.into_iter().map(|x| f64::from(x) * scale).collect()
                })
            })
            .collect())
    }

    /// Max deviation between the analytic order-`k` block tensors and `fd`.
    pub fn fd_deviation(&self, k: usize, fd: &[SymmetricTensor]) -> Result<f64> {
        self.check_order(k)?;
        Ok(self
            .blocks
            .iter()
            .zip(fd)
            .map(|(b, t)| b.tensors[k - 1].max_abs_diff(t))
            .fold(0.0, f64::max))
    }
}

/// `df/dρ` at a configuration.
pub fn rigidity_matrix(surface: &Surface, state: &FoldingState) -> Result<DMatrix<f64>> {
    Ok(ConstraintJets::new(surface, state, 1)?.rigidity)
}

/// Global `dᵏf/dρᵏ` at a configuration.
pub fn derivative_tensor(surface: &Surface, state: &FoldingState, k: usize) -> Result<SymmetricTensor> {
    ConstraintJets::new(surface, state, k.max(1))?.derivative_tensor(k)
}

/// Finite-difference block tensors of order `k ≤ 3` with step `h`.
pub fn fd_oracle(surface: &Surface, state: &FoldingState, k: usize, h: f64) -> Result<Vec<SymmetricTensor>> {
    ConstraintJets::new(surface, state, 1)?.fd_blocks(k, h)
}

/// Multi-indices of order `k` over `dim`, in storage order.
pub fn multi_indices(k: usize, dim: usize) -> MultiIndices {
    MultiIndices::new(k, dim)
}
