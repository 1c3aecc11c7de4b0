//! Closure constraints: transform products around interior vertices and
//! representative cycles, and the residual vector built from them.
//!
//! Each block product is conjugated by the start frame of its block (taken
//! at a base state), so residual components and their derivatives live in
//! the global coordinate system.

use nalgebra::{DVector, IsometryMatrix3};

use crate::error::{Error, Result};
use crate::scalar::{homogeneous, ident3, mul3, mul4, rot_x, rot_z, Real, M3, M4};
use crate::surface::{BlockGeometry, FoldingState, Surface};

/// Default tolerance on residuals and block deviations.
pub const TOL_CONFIG: f64 = 1e-9;

/// Rotation entries `(2,1)`, `(0,2)`, `(1,0)` picked for the residual.
pub const ROTATION_ENTRIES: [(usize, usize); 3] = [(2, 1), (0, 2), (1, 0)];

/// Ordered product `Π Rz(α_k) Rx(ρ_k)` around a vertex.
pub fn vertex_transform<T: Real>(alpha: &[f64], rho: &[T]) -> M3<T> {
    assert_eq!(alpha.len(), rho.len(), "sector and folding angle counts differ");
    let mut r = ident3::<T>();
    for (a, p) in alpha.iter().zip(rho) {
        r = mul3(&r, &rot_z(T::from_f64(*a)));
        r = mul3(&r, &rot_x(*p));
    }
    r
}

/// Ordered product of `[Rz(β_k) | (l_k cos γ_k, l_k sin γ_k, 0)] · Rx(ρ_k)` around a cycle.
pub fn cycle_transform<T: Real>(beta: &[f64], length: &[f64], gamma: &[f64], rho: &[T]) -> M4<T> {
    assert_eq!(beta.len(), rho.len(), "step and folding angle counts differ");
    let z = T::zero();
    let mut m = homogeneous(&ident3::<T>(), [z, z, z]);
    for k in 0..rho.len() {
        let t = [
            T::from_f64(length[k] * gamma[k].cos()),
            T::from_f64(length[k] * gamma[k].sin()),
            z,
        ];
        m = mul4(&m, &homogeneous(&rot_z(T::from_f64(beta[k])), t));
        m = mul4(&m, &homogeneous(&rot_x(rho[k]), [z, z, z]));
    }
    m
}

/// Configuration test outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationCheck {
    pub is_configuration: bool,
    /// `‖f‖∞` over the selected components.
    pub max_residual: f64,
    /// Max-entry deviation of each full block transform from the identity.
    pub block_deviation: Vec<f64>,
    /// Block with the largest deviation, if any.
    pub worst_block: Option<usize>,
}

/// Closure constraints of a surface with frames fixed at a base state.
#[derive(Debug, Clone)]
pub struct Closure {
    blocks: Vec<BlockGeometry>,
    frames: Vec<IsometryMatrix3<f64>>,
    offsets: Vec<usize>,
    base: FoldingState,
    n_angles: usize,
}

impl Closure {
    /// Frames taken from the reference realization.
    pub fn new(surface: &Surface) -> Result<Closure> {
        Closure::at(surface, surface.reference_state())
    }

    /// Frames taken from the realization at `state`.
    pub fn at(surface: &Surface, state: &FoldingState) -> Result<Closure> {
        let cache = surface.geometry_at(state)?;
        let blocks = surface.block_geometry();
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut row = 0;
        for b in &blocks {
            offsets.push(row);
            row += b.rows();
        }
        Ok(Closure {
            blocks,
            frames: cache.start_frames,
            offsets,
            base: state.clone(),
            n_angles: surface.n_angles(),
        })
    }

    pub fn base(&self) -> &FoldingState {
        &self.base
    }

    pub fn blocks(&self) -> &[BlockGeometry] {
        &self.blocks
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(BlockGeometry::rows).sum()
    }

    /// First residual row of block `b`.
    pub fn block_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn start_frame(&self, b: usize) -> &IsometryMatrix3<f64> {
        &self.frames[b]
    }

    /// Block transform in local start-frame coordinates.
    pub fn local_block<T: Real>(&self, b: usize, rho: &[T]) -> M4<T> {
        let z = T::zero();
        match &self.blocks[b] {
            BlockGeometry::Vertex { alpha, angles } => {
                let r: Vec<T> = angles.iter().map(|&a| rho[a]).collect();
                homogeneous(&vertex_transform(alpha, &r), [z, z, z])
            }
            BlockGeometry::Cycle {
                beta,
                length,
                gamma,
                angles,
            } => {
                let r: Vec<T> = angles.iter().map(|&a| rho[a]).collect();
                cycle_transform(beta, length, gamma, &r)
            }
        }
    }

    /// Block transform conjugated into the global frame.
    pub fn world_block<T: Real>(&self, b: usize, rho: &[T]) -> M4<T> {
        let local = self.local_block(b, rho);
        let g = &self.frames[b];
        let rot = g.rotation.matrix();
        let mut gm = [[T::zero(); 3]; 3];
        let mut gt = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gm[i][j] = T::from_f64(rot[(i, j)]);
                gt[i][j] = T::from_f64(rot[(j, i)]);
            }
        }
        if !self.blocks[b].is_cycle() {
            let mut r = [[T::zero(); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    r[i][j] = local[i][j];
                }
            }
            let w = mul3(&mul3(&gm, &r), &gt);
            let z = T::zero();
            return homogeneous(&w, [z, z, z]);
        }
        let o = g.translation.vector;
        let ot = [T::from_f64(o.x), T::from_f64(o.y), T::from_f64(o.z)];
        let fwd = homogeneous(&gm, ot);
        let mut back_t = [T::zero(); 3];
        for i in 0..3 {
            let mut s = T::zero();
            for j in 0..3 {
                s = s - gt[i][j] * ot[j];
            }
            back_t[i] = s;
        }
        let back = homogeneous(&gt, back_t);
        mul4(&mul4(&fwd, &local), &back)
    }

    /// Selected components of one world block.
    pub fn select<T: Real>(&self, b: usize, m: &M4<T>) -> Vec<T> {
        let mut out: Vec<T> = ROTATION_ENTRIES.iter().map(|&(i, j)| m[i][j]).collect();
        if self.blocks[b].is_cycle() {
            out.extend((0..3).map(|i| m[i][3]));
        }
        out
    }

    /// Residual in arbitrary precision.
    pub fn residual_t<T: Real>(&self, rho: &[T]) -> Vec<T> {
        let mut f = Vec::with_capacity(self.n_rows());
        for b in 0..self.blocks.len() {
            let m = self.world_block(b, rho);
            f.extend(self.select(b, &m));
        }
        f
    }

    pub fn residual(&self, rho: &FoldingState) -> DVector<f64> {
        DVector::from_vec(self.residual_t(rho.as_slice()))
    }

    /// Residual plus the full-block identity check.
    pub fn check(&self, rho: &FoldingState, tol: f64) -> ConfigurationCheck {
        let f = self.residual(rho);
        let max_residual = f.amax();
        let mut block_deviation = Vec::with_capacity(self.blocks.len());
        for b in 0..self.blocks.len() {
            let m = self.world_block(b, rho.as_slice());
            let mut dev: f64 = 0.0;
            for (i, row) in m.iter().enumerate().take(3) {
                for (j, x) in row.iter().enumerate() {
                    let id = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((x - id).abs());
                }
            }
            block_deviation.push(dev);
        }
        let worst_block = block_deviation
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        let ok = max_residual < tol && block_deviation.iter().all(|&d| d < tol);
        ConfigurationCheck {
            is_configuration: ok,
            max_residual,
            block_deviation,
            worst_block,
        }
    }
}

/// Residual `f(ρ)` with frames from the reference realization.
pub fn residual(surface: &Surface, state: &FoldingState) -> Result<DVector<f64>> {
    check_len(surface, state)?;
    Ok(Closure::new(surface)?.residual(state))
}

/// Whether `state` is a configuration of `surface`.
pub fn is_configuration(surface: &Surface, state: &FoldingState, tol: f64) -> Result<ConfigurationCheck> {
    check_len(surface, state)?;
    Ok(Closure::new(surface)?.check(state, tol))
}

/// Error unless `state` is a configuration.
pub fn require_configuration(surface: &Surface, state: &FoldingState, tol: f64) -> Result<()> {
    let c = is_configuration(surface, state, tol)?;
    if c.is_configuration {
        return Ok(());
    }
    let block = c.worst_block.unwrap_or(0);
    Err(Error::NotConfiguration {
        block,
        deviation: c.block_deviation.get(block).copied().unwrap_or(c.max_residual),
    })
}

fn check_len(surface: &Surface, state: &FoldingState) -> Result<()> {
    if state.len() != surface.n_angles() {
        return Err(Error::DimensionMismatch {
            expected: surface.n_angles(),
            found: state.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn flat_square_vertex_closes() {
        let r = vertex_transform(&[FRAC_PI_2; 4], &[0.0; 4]);
        for (i, row) in r.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((x - id).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn half_turn_product_is_not_identity() {
        let r = vertex_transform(&[FRAC_PI_2; 4], &[PI, 0.0, 0.0, 0.0]);
        assert!(r[2][1].abs() < 1e-15 && r[0][2].abs() < 1e-15 && r[1][0].abs() < 1e-15);
        assert!((r[0][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn straight_cycle_translation() {
        // two steps that walk along x and back
        let m = cycle_transform(&[PI, PI], &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(m[0][3].abs() < 1e-15 && m[1][3].abs() < 1e-15);
        assert!((m[0][0] - 1.0).abs() < 1e-15);
    }
}
