//! Polyhedral surfaces: document format, validation, and frame propagation.
//!
//! Conventions:
//! * Panels list their vertices counterclockwise about the panel normal.
//!   Adjacent panels traverse their shared edge in opposite directions.
//! * A folding angle is positive when the surface folds toward the side the
//!   panel normals point to (valley with respect to the normals).
//! * A fan entry `(panel_k, hinge_k)` has `panel_k` between `hinge_{k-1}` and
//!   `hinge_k`; `hinge_k` separates `panel_k` from `panel_{k+1}`. Fans run
//!   counterclockwise about the normals, so `panel_k` traverses the edge of
//!   `hinge_k` toward the centre vertex. Cycle steps follow the same rule with
//!   the anchor vertex in place of the centre.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DVector, IsometryMatrix3, Point3, Rotation3, Translation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative planarity tolerance; the absolute value is this times the panel diameter.
pub const TOL_PLANAR: f64 = 1e-8;

/// Vector of folding angles, one per angle index.
pub type FoldingState = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeDoc {
    pub panels: [usize; 2],
    pub edge: [usize; 2],
    pub angle_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteriorVertexDoc {
    pub vertex: usize,
    /// `(panel, hinge)` pairs in cyclic order.
    pub fan: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleStepDoc {
    pub panel: usize,
    pub hinge: usize,
    pub anchor_vertex: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleDoc {
    pub steps: Vec<CycleStepDoc>,
}

/// On-disk surface description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub vertices: Vec<[f64; 3]>,
    pub panels: Vec<Vec<usize>>,
    pub hinges: Vec<HingeDoc>,
    #[serde(default)]
    pub interior_vertices: Vec<InteriorVertexDoc>,
    #[serde(default)]
    pub cycles: Vec<CycleDoc>,
    /// Declared folding state, by angle index. When present it must close
    /// against the sector angles of the coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hinge {
    pub panels: [usize; 2],
    pub edge: [usize; 2],
    pub angle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanEntry {
    pub panel: usize,
    pub hinge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorVertex {
    pub vertex: usize,
    pub fan: Vec<FanEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleStep {
    pub panel: usize,
    pub hinge: usize,
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub steps: Vec<CycleStep>,
}

/// A validated polyhedral surface with its reference realization.
#[derive(Debug, Clone)]
pub struct Surface {
    pub name: Option<String>,
    pub vertices: Vec<Vector3<f64>>,
    pub panels: Vec<Vec<usize>>,
    pub hinges: Vec<Hinge>,
    pub interior_vertices: Vec<InteriorVertex>,
    pub cycles: Vec<Cycle>,
    /// Unit normal per panel, fixed by the counterclockwise vertex order.
    pub normals: Vec<Vector3<f64>>,
    hinge_of_angle: Vec<usize>,
    panel_hinges: Vec<Vec<usize>>,
    reference: FoldingState,
    declared: Option<FoldingState>,
}

/// Planar data of one closure block, taken from the reference realization.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockGeometry {
    /// Sector angles `α_k` and the angle index of each fan hinge.
    Vertex { alpha: Vec<f64>, angles: Vec<usize> },
    /// Per-step `β_k`, `l_k`, `γ_k` and angle indices.
    Cycle {
        beta: Vec<f64>,
        length: Vec<f64>,
        gamma: Vec<f64>,
        angles: Vec<usize>,
    },
}

impl BlockGeometry {
    pub fn angles(&self) -> &[usize] {
        match self {
            BlockGeometry::Vertex { angles, .. } | BlockGeometry::Cycle { angles, .. } => angles,
        }
    }

    pub fn is_cycle(&self) -> bool {
        matches!(self, BlockGeometry::Cycle { .. })
    }

    /// Number of residual components contributed by the block.
    pub fn rows(&self) -> usize {
        if self.is_cycle() {
            6
        } else {
            3
        }
    }
}

/// State-dependent geometry in the global frame.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub root: usize,
    /// Rigid placement of each panel relative to its reference position.
    pub poses: Vec<IsometryMatrix3<f64>>,
    /// Sector angles per interior vertex; state independent.
    pub sector_angles: Vec<Vec<f64>>,
    /// Outward unit crease directions per block, in product order.
    pub crease_dirs: Vec<Vec<Vector3<f64>>>,
    /// Anchor points per block (the centre vertex repeated for vertex blocks).
    pub anchors: Vec<Vec<Vector3<f64>>>,
    /// Unit normal of each panel.
    pub normals: Vec<Vector3<f64>>,
    /// `(l, β, γ)` per cycle step.
    pub edge_data: Vec<Vec<(f64, f64, f64)>>,
    /// Start frame of each block: x along the last crease, z along the start panel normal,
    /// origin at the last anchor.
    pub start_frames: Vec<IsometryMatrix3<f64>>,
}

impl GeometryCache {
    /// World position of vertex `v` as carried by panel `p`.
    pub fn vertex_on(&self, surface: &Surface, p: usize, v: usize) -> Vector3<f64> {
        (self.poses[p] * Point3::from(surface.vertices[v])).coords
    }
}

fn signed_angle(a: &Vector3<f64>, b: &Vector3<f64>, n: &Vector3<f64>) -> f64 {
    a.cross(b).dot(n).atan2(a.dot(b))
}

fn newell_normal(pts: &[Vector3<f64>]) -> Vector3<f64> {
    let mut n = Vector3::zeros();
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        n += a.cross(&b);
    }
    n
}

fn segments_cross(p: (f64, f64), q: (f64, f64), r: (f64, f64), s: (f64, f64)) -> bool {
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let d1 = orient(r, s, p);
    let d2 = orient(r, s, q);
    let d3 = orient(p, q, r);
    let d4 = orient(p, q, s);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn dense_state(values: &[f64]) -> FoldingState {
    DVector::from_iterator(values.len(), values.iter().map(|x| x + 0.0))
}

impl Surface {
    /// Validate a document and build the surface.
    pub fn from_document(doc: &SurfaceDocument) -> Result<Surface> {
        let nv = doc.vertices.len();
        let vertices: Vec<Vector3<f64>> = doc.vertices.iter().map(|v| Vector3::from(*v)).collect();
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::validation("non-finite coordinate", "vertices"));
        }

        let mut normals = Vec::with_capacity(doc.panels.len());
        for (p, panel) in doc.panels.iter().enumerate() {
            let entity = format!("panel {p}");
            if panel.len() < 3 {
                return Err(Error::validation("panel has fewer than 3 vertices", entity));
            }
            if let Some(&v) = panel.iter().find(|&&v| v >= nv) {
                return Err(Error::validation("vertex index out of range", format!("{entity}, vertex {v}")));
            }
            if panel.iter().collect::<BTreeSet<_>>().len() != panel.len() {
                return Err(Error::validation("panel repeats a vertex", entity));
            }
            let pts: Vec<Vector3<f64>> = panel.iter().map(|&v| vertices[v]).collect();
            let diam = pts
                .iter()
                .flat_map(|a| pts.iter().map(move |b| (a - b).norm()))
                .fold(0.0, f64::max);
            let n = newell_normal(&pts);
            if diam == 0.0 || n.norm() <= 1e-12 * diam * diam {
                return Err(Error::validation("degenerate panel", entity));
            }
            let n = n.normalize();
            let c = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
            let tol = TOL_PLANAR * diam;
            for (k, q) in pts.iter().enumerate() {
                if (q - c).dot(&n).abs() > tol {
                    return Err(Error::validation(
                        "panel not planar",
                        format!("{entity}, vertex {}", panel[k]),
                    ));
                }
            }
            // simplicity: no two non-adjacent edges cross in the panel plane
            let u = (pts[1] - pts[0]).normalize();
            let w = n.cross(&u);
            let flat: Vec<(f64, f64)> = pts.iter().map(|q| ((q - c).dot(&u), (q - c).dot(&w))).collect();
            let m = flat.len();
            for i in 0..m {
                for j in i + 2..m {
                    if (j + 1) % m == i {
                        continue;
                    }
                    if segments_cross(flat[i], flat[(i + 1) % m], flat[j], flat[(j + 1) % m]) {
                        return Err(Error::validation("panel not simple", entity));
                    }
                }
            }
            normals.push(n);
        }

        let np = doc.panels.len();
        let nh = doc.hinges.len();
        let mut hinges = Vec::with_capacity(nh);
        let mut hinge_of_angle = vec![usize::MAX; nh];
        let mut panel_hinges = vec![Vec::new(); np];
        for (h, hd) in doc.hinges.iter().enumerate() {
            let entity = format!("hinge {h}");
            let [a, b] = hd.panels;
            let [u, v] = hd.edge;
            if a >= np || b >= np || a == b {
                return Err(Error::validation("hinge panel index invalid", entity));
            }
            if u >= nv || v >= nv || u == v {
                return Err(Error::validation("hinge edge invalid", entity));
            }
            if (vertices[u] - vertices[v]).norm() == 0.0 {
                return Err(Error::validation("degenerate hinge", entity));
            }
            let da = edge_direction(&doc.panels[a], u, v)
                .ok_or_else(|| Error::validation("hinge edge not on panel", format!("{entity}, panel {a}")))?;
            let db = edge_direction(&doc.panels[b], u, v)
                .ok_or_else(|| Error::validation("hinge edge not on panel", format!("{entity}, panel {b}")))?;
            if da == db {
                return Err(Error::validation("inconsistent orientation", entity));
            }
            if hd.angle_index >= nh || hinge_of_angle[hd.angle_index] != usize::MAX {
                return Err(Error::validation("angle indices not dense", entity));
            }
            hinge_of_angle[hd.angle_index] = h;
            panel_hinges[a].push(h);
            panel_hinges[b].push(h);
            hinges.push(Hinge {
                panels: hd.panels,
                edge: hd.edge,
                angle: hd.angle_index,
            });
        }

        let mut seen_vertex = BTreeSet::new();
        let mut interior_vertices = Vec::with_capacity(doc.interior_vertices.len());
        for ivd in &doc.interior_vertices {
            let v = ivd.vertex;
            let entity = format!("interior vertex {v}");
            if v >= nv {
                return Err(Error::validation("vertex index out of range", entity));
            }
            if !seen_vertex.insert(v) {
                return Err(Error::validation("interior vertex listed twice", entity));
            }
            let n = ivd.fan.len();
            if n < 3 {
                return Err(Error::validation("fan has fewer than 3 panels", entity));
            }
            let fan: Vec<FanEntry> = ivd
                .fan
                .iter()
                .map(|&[panel, hinge]| FanEntry { panel, hinge })
                .collect();
            for e in &fan {
                if e.panel >= np || e.hinge >= nh {
                    return Err(Error::validation("fan index out of range", entity));
                }
            }
            let incident: BTreeSet<usize> = (0..np).filter(|&p| doc.panels[p].contains(&v)).collect();
            let listed: BTreeSet<usize> = fan.iter().map(|e| e.panel).collect();
            if listed.len() != n || incident != listed {
                return Err(Error::validation("fan not closed", entity));
            }
            for k in 0..n {
                let e = fan[k];
                let next = fan[(k + 1) % n].panel;
                let prev_hinge = fan[(k + n - 1) % n].hinge;
                let hg = &hinges[e.hinge];
                if !hg.edge.contains(&v) {
                    return Err(Error::validation("fan hinge not incident", format!("{entity}, hinge {}", e.hinge)));
                }
                if !same_pair(hg.panels, [e.panel, next]) {
                    return Err(Error::validation("fan not closed", format!("{entity}, hinge {}", e.hinge)));
                }
                if !panel_hinges[e.panel].contains(&prev_hinge) {
                    return Err(Error::validation("fan not closed", format!("{entity}, panel {}", e.panel)));
                }
                let far = other(hg.edge, v);
                if edge_direction(&doc.panels[e.panel], far, v) != Some(true) {
                    return Err(Error::validation(
                        "fan orientation must be counterclockwise about the normals",
                        format!("{entity}, panel {}", e.panel),
                    ));
                }
            }
            interior_vertices.push(InteriorVertex { vertex: v, fan });
        }

        let mut cycles = Vec::with_capacity(doc.cycles.len());
        for (c, cd) in doc.cycles.iter().enumerate() {
            let entity = format!("cycle {c}");
            let steps: Vec<CycleStep> = cd
                .steps
                .iter()
                .map(|s| CycleStep {
                    panel: s.panel,
                    hinge: s.hinge,
                    anchor: s.anchor_vertex,
                })
                .collect();
            let n = steps.len();
            if n == 0 {
                return Err(Error::validation("cycle is empty", entity));
            }
            if steps.iter().map(|s| s.hinge).collect::<BTreeSet<_>>().len() != n {
                return Err(Error::validation("cycle crosses a hinge twice", entity));
            }
            for (k, s) in steps.iter().enumerate() {
                let e = format!("{entity}, step {k}");
                if s.panel >= np || s.hinge >= nh || s.anchor >= nv {
                    return Err(Error::validation("cycle index out of range", e));
                }
                let hg = &hinges[s.hinge];
                let next = steps[(k + 1) % n].panel;
                if !same_pair(hg.panels, [s.panel, next]) {
                    return Err(Error::validation("cycle not closed", e));
                }
                if !hg.edge.contains(&s.anchor) {
                    return Err(Error::validation("anchor not on hinge", e));
                }
                let far = other(hg.edge, s.anchor);
                if edge_direction(&doc.panels[s.panel], far, s.anchor) != Some(true) {
                    return Err(Error::validation(
                        "cycle orientation must be counterclockwise about the normals",
                        e,
                    ));
                }
            }
            cycles.push(Cycle { steps });
        }

        let mut surface = Surface {
            name: doc.name.clone(),
            vertices,
            panels: doc.panels.clone(),
            hinges,
            interior_vertices,
            cycles,
            normals,
            hinge_of_angle,
            panel_hinges,
            reference: DVector::zeros(0),
            declared: None,
        };

        for (i, iv) in surface.interior_vertices.iter().enumerate() {
            let alpha = surface.sector_angles(i);
            for (k, a) in alpha.iter().enumerate() {
                if !(*a > 0.0 && *a < std::f64::consts::PI) {
                    return Err(Error::validation(
                        "sector angle out of (0, pi)",
                        format!("interior vertex {}, panel {}", iv.vertex, iv.fan[k].panel),
                    ));
                }
            }
        }
        surface.reference = surface.compute_folding_angles();
        if let Some(state) = &doc.state {
            if state.len() != surface.n_angles() {
                return Err(Error::validation(
                    "declared state length differs from angle count",
                    format!("state, {} of {}", state.len(), surface.n_angles()),
                ));
            }
            if let Some(k) = state.iter().position(|x| !x.is_finite()) {
                return Err(Error::validation("non-finite folding angle", format!("state, angle {k}")));
            }
            surface.declared = Some(dense_state(state));
        }
        Ok(surface)
    }

    pub fn n_angles(&self) -> usize {
        self.hinges.len()
    }

    pub fn n_rows(&self) -> usize {
        3 * self.interior_vertices.len() + 6 * self.cycles.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.interior_vertices.len() + self.cycles.len()
    }

    /// Hinge that carries angle index `k`.
    pub fn hinge_of_angle(&self, k: usize) -> usize {
        self.hinge_of_angle[k]
    }

    /// Hinges bordering panel `p`.
    pub fn panel_hinges(&self, p: usize) -> &[usize] {
        &self.panel_hinges[p]
    }

    /// Folding angles of the reference realization.
    pub fn reference_state(&self) -> &FoldingState {
        &self.reference
    }

    /// State given in the document, if any.
    pub fn declared_state(&self) -> Option<&FoldingState> {
        self.declared.as_ref()
    }

    /// Declared state if present, otherwise the reference state.
    pub fn working_state(&self) -> &FoldingState {
        self.declared.as_ref().unwrap_or(&self.reference)
    }

    /// Rebuild the document form.
    pub fn to_document(&self) -> SurfaceDocument {
        SurfaceDocument {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            panels: self.panels.clone(),
            hinges: self
                .hinges
                .iter()
                .map(|h| HingeDoc {
                    panels: h.panels,
                    edge: h.edge,
                    angle_index: h.angle,
                })
                .collect(),
            interior_vertices: self
                .interior_vertices
                .iter()
                .map(|iv| InteriorVertexDoc {
                    vertex: iv.vertex,
                    fan: iv.fan.iter().map(|e| [e.panel, e.hinge]).collect(),
                })
                .collect(),
            cycles: self
                .cycles
                .iter()
                .map(|c| CycleDoc {
                    steps: c
                        .steps
                        .iter()
                        .map(|s| CycleStepDoc {
                            panel: s.panel,
                            hinge: s.hinge,
                            anchor_vertex: s.anchor,
                        })
                        .collect(),
                })
                .collect(),
            state: self.declared.as_ref().map(|d| d.iter().copied().collect()),
        }
    }

    /// Copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Surface> {
        let mut doc = self.to_document();
        for v in doc.vertices.iter_mut() {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
        Surface::from_document(&doc)
    }

    /// Unit direction of hinge `h` pointing away from vertex `from`, reference frame.
    fn crease_ref(&self, h: usize, from: usize) -> Vector3<f64> {
        let far = other(self.hinges[h].edge, from);
        (self.vertices[far] - self.vertices[from]).normalize()
    }

    /// Sector angles of interior vertex `i` in fan order.
    pub fn sector_angles(&self, i: usize) -> Vec<f64> {
        let iv = &self.interior_vertices[i];
        let n = iv.fan.len();
        (0..n)
            .map(|k| {
                let e = iv.fan[k];
                let prev = iv.fan[(k + n - 1) % n].hinge;
                let a = self.crease_ref(prev, iv.vertex);
                let b = self.crease_ref(e.hinge, iv.vertex);
                signed_angle(&a, &b, &self.normals[e.panel])
            })
            .collect()
    }

    /// Planar closure data for every block, vertices first then cycles.
    pub fn block_geometry(&self) -> Vec<BlockGeometry> {
        let mut out = Vec::with_capacity(self.n_blocks());
        for (i, iv) in self.interior_vertices.iter().enumerate() {
            out.push(BlockGeometry::Vertex {
                alpha: self.sector_angles(i),
                angles: iv.fan.iter().map(|e| self.hinges[e.hinge].angle).collect(),
            });
        }
        for c in &self.cycles {
            let n = c.steps.len();
            let mut beta = Vec::with_capacity(n);
            let mut length = Vec::with_capacity(n);
            let mut gamma = Vec::with_capacity(n);
            for k in 0..n {
                let s = c.steps[k];
                let prev = c.steps[(k + n - 1) % n];
                let nrm = self.normals[s.panel];
                let xp = self.crease_ref(prev.hinge, prev.anchor);
                let xk = self.crease_ref(s.hinge, s.anchor);
                let yp = nrm.cross(&xp);
                let d = self.vertices[s.anchor] - self.vertices[prev.anchor];
                let (dx, dy) = (d.dot(&xp), d.dot(&yp));
                beta.push(signed_angle(&xp, &xk, &nrm));
                length.push(dx.hypot(dy));
                gamma.push(if dx == 0.0 && dy == 0.0 { 0.0 } else { dy.atan2(dx) });
            }
            out.push(BlockGeometry::Cycle {
                beta,
                length,
                gamma,
                angles: c.steps.iter().map(|s| self.hinges[s.hinge].angle).collect(),
            });
        }
        out
    }

    /// Folding angle of hinge `h` from panel normals and the edge direction.
    fn hinge_angle(&self, h: usize, normals: &[Vector3<f64>], edge_dir: Vector3<f64>) -> f64 {
        let hg = &self.hinges[h];
        let (na, nb) = (normals[hg.panels[0]], normals[hg.panels[1]]);
        let rho = nb.cross(&na).dot(&edge_dir).atan2(na.dot(&nb));
        if rho == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            rho + 0.0
        }
    }

    /// Edge direction of hinge `h` as traversed by its first panel, reference frame.
    fn edge_dir_ref(&self, h: usize) -> Vector3<f64> {
        let hg = &self.hinges[h];
        let [u, v] = hg.edge;
        let (s, t) = if edge_direction(&self.panels[hg.panels[0]], u, v) == Some(true) {
            (u, v)
        } else {
            (v, u)
        };
        (self.vertices[t] - self.vertices[s]).normalize()
    }

    fn compute_folding_angles(&self) -> FoldingState {
        let mut rho = vec![0.0; self.n_angles()];
        for (h, hg) in self.hinges.iter().enumerate() {
            rho[hg.angle] = self.hinge_angle(h, &self.normals, self.edge_dir_ref(h));
        }
        dense_state(&rho)
    }

    /// Folding angles read off the reference realization.
    pub fn folding_angles_from_realization(&self) -> FoldingState {
        self.reference.clone()
    }

    /// Folding angles of the realization described by `cache`.
    pub fn folding_angles_of(&self, cache: &GeometryCache) -> FoldingState {
        let mut rho = vec![0.0; self.n_angles()];
        for (h, hg) in self.hinges.iter().enumerate() {
            let a = hg.panels[0];
            let dir = cache.poses[a].rotation * self.edge_dir_ref(h);
            rho[hg.angle] = self.hinge_angle(h, &cache.normals, dir);
        }
        dense_state(&rho)
    }

    /// Place every panel for the given folding state by propagating frames
    /// breadth-first from `root` across hinges.
    pub fn realize(&self, state: &FoldingState, root: usize) -> Result<Vec<IsometryMatrix3<f64>>> {
        if state.len() != self.n_angles() {
            return Err(Error::DimensionMismatch {
                expected: self.n_angles(),
                found: state.len(),
            });
        }
        if root >= self.panels.len() {
            return Err(Error::InvalidArgument(format!("root panel {root} out of range")));
        }
        let np = self.panels.len();
        let mut poses: Vec<Option<IsometryMatrix3<f64>>> = vec![None; np];
        let order = std::iter::once(root).chain((0..np).filter(|&p| p != root));
        for start in order {
            if poses[start].is_some() {
                continue;
            }
            poses[start] = Some(IsometryMatrix3::identity());
            let mut queue = VecDeque::from([start]);
            while let Some(p) = queue.pop_front() {
                let pose_p = poses[p].expect("visited");
                for &h in &self.panel_hinges[p] {
                    let hg = &self.hinges[h];
                    let q = if hg.panels[0] == p { hg.panels[1] } else { hg.panels[0] };
                    if poses[q].is_some() {
                        continue;
                    }
                    let [u, v] = hg.edge;
                    let (s, t) = if edge_direction(&self.panels[p], u, v) == Some(true) {
                        (u, v)
                    } else {
                        (v, u)
                    };
                    let axis = Unit::new_normalize(self.vertices[t] - self.vertices[s]);
                    let delta = state[hg.angle] - self.reference[hg.angle];
                    let origin = self.vertices[s];
                    let rot = Rotation3::from_axis_angle(&axis, -delta);
                    let hinge_motion = Translation3::from(origin)
                        * IsometryMatrix3::from_parts(Translation3::identity(), rot)
                        * Translation3::from(-origin);
                    poses[q] = Some(pose_p * hinge_motion);
                    queue.push_back(q);
                }
            }
        }
        Ok(poses.into_iter().map(|p| p.expect("all panels placed")).collect())
    }

    /// State-dependent geometry, frames propagated from panel 0.
    pub fn geometry_at(&self, state: &FoldingState) -> Result<GeometryCache> {
        self.geometry_from_root(state, 0)
    }

    /// As [`Surface::geometry_at`] with an explicit root panel.
    pub fn geometry_from_root(&self, state: &FoldingState, root: usize) -> Result<GeometryCache> {
        let poses = self.realize(state, root)?;
        let normals: Vec<Vector3<f64>> = poses
            .iter()
            .zip(&self.normals)
            .map(|(pose, n)| pose.rotation * n)
            .collect();
        let pos = |p: usize, v: usize| (poses[p] * Point3::from(self.vertices[v])).coords;

        let mut crease_dirs = Vec::with_capacity(self.n_blocks());
        let mut anchors = Vec::with_capacity(self.n_blocks());
        let mut start_frames = Vec::with_capacity(self.n_blocks());
        let mut sector_angles = Vec::with_capacity(self.interior_vertices.len());
        for (i, iv) in self.interior_vertices.iter().enumerate() {
            sector_angles.push(self.sector_angles(i));
            let dirs: Vec<Vector3<f64>> = iv
                .fan
                .iter()
                .map(|e| {
                    let far = other(self.hinges[e.hinge].edge, iv.vertex);
                    (pos(e.panel, far) - pos(e.panel, iv.vertex)).normalize()
                })
                .collect();
            let p0 = iv.fan[0].panel;
            let origin = pos(p0, iv.vertex);
            start_frames.push(frame(origin, dirs[dirs.len() - 1], normals[p0]));
            anchors.push(vec![origin; dirs.len()]);
            crease_dirs.push(dirs);
        }
        let mut edge_data = Vec::with_capacity(self.cycles.len());
        for (c, geom) in self.cycles.iter().zip(self.block_geometry().into_iter().skip(self.interior_vertices.len())) {
            let dirs: Vec<Vector3<f64>> = c
                .steps
                .iter()
                .map(|s| {
                    let far = other(self.hinges[s.hinge].edge, s.anchor);
                    (pos(s.panel, far) - pos(s.panel, s.anchor)).normalize()
                })
                .collect();
            let anc: Vec<Vector3<f64>> = c.steps.iter().map(|s| pos(s.panel, s.anchor)).collect();
            let p0 = c.steps[0].panel;
            let last = c.steps.len() - 1;
            start_frames.push(frame(pos(p0, c.steps[last].anchor), dirs[last], normals[p0]));
            if let BlockGeometry::Cycle { beta, length, gamma, .. } = geom {
                edge_data.push(
                    (0..beta.len())
                        .map(|k| (length[k], beta[k], gamma[k]))
                        .collect(),
                );
            }
            crease_dirs.push(dirs);
            anchors.push(anc);
        }
        Ok(GeometryCache {
            root,
            poses,
            sector_angles,
            crease_dirs,
            anchors,
            normals,
            edge_data,
            start_frames,
        })
    }
}

fn frame(origin: Vector3<f64>, x: Vector3<f64>, z: Vector3<f64>) -> IsometryMatrix3<f64> {
    let y = z.cross(&x);
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    IsometryMatrix3::from_parts(
        Translation3::from(origin),
        Rotation3::from_matrix_unchecked(m),
    )
}

/// `Some(true)` if `panel` traverses `u -> v`, `Some(false)` for `v -> u`.
fn edge_direction(panel: &[usize], u: usize, v: usize) -> Option<bool> {
    let n = panel.len();
    for i in 0..n {
        let (a, b) = (panel[i], panel[(i + 1) % n]);
        if a == u && b == v {
            return Some(true);
        }
        if a == v && b == u {
            return Some(false);
        }
    }
    None
}

fn other(edge: [usize; 2], v: usize) -> usize {
    if edge[0] == v {
        edge[1]
    } else {
        edge[0]
    }
}

fn same_pair(a: [usize; 2], b: [usize; 2]) -> bool {
    (a[0] == b[0] && a[1] == b[1]) || (a[0] == b[1] && a[1] == b[0])
}

/// Parse and validate a surface document.
pub fn load_surface(text: &str) -> Result<Surface> {
    let doc: SurfaceDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Surface::from_document(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles(fold: f64) -> SurfaceDocument {
        // hinge along the x axis from (0,0,0) to (1,0,0); second triangle rotated up by `fold`
        let (s, c) = fold.sin_cos();
        SurfaceDocument {
            name: None,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, -1.0, 0.0], [0.5, c, s]],
            panels: vec![vec![0, 2, 1], vec![0, 1, 3]],
            hinges: vec![HingeDoc {
                panels: [0, 1],
                edge: [0, 1],
                angle_index: 0,
            }],
            interior_vertices: vec![],
            cycles: vec![],
            state: None,
        }
    }

    #[test]
    fn flat_pair_has_zero_angle() {
        let s = Surface::from_document(&two_triangles(0.0)).unwrap();
        assert_eq!(s.n_angles(), 1);
        assert_eq!(s.reference_state()[0], 0.0);
        assert!(s.reference_state()[0].is_sign_positive());
    }

    #[test]
    fn quarter_fold_toward_normal_is_positive() {
        // panel 0 = (0,2,1) has normal +z; lifting the partner to +z folds toward the normal
        let s = Surface::from_document(&two_triangles(std::f64::consts::FRAC_PI_2)).unwrap();
        assert_eq!(s.normals[0], Vector3::new(0.0, 0.0, 1.0));
        assert!((s.reference_state()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn realize_round_trip_single_hinge() {
        let s = Surface::from_document(&two_triangles(0.3)).unwrap();
        let state = DVector::from_vec(vec![-1.2]);
        let g = s.geometry_at(&state).unwrap();
        let back = s.folding_angles_of(&g);
        assert!((back[0] + 1.2).abs() < 1e-14);
    }

    #[test]
    fn non_planar_quad_rejected() {
        let doc = SurfaceDocument {
            name: None,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.1], [0.0, 1.0, 0.0]],
            panels: vec![vec![0, 1, 2, 3]],
            hinges: vec![],
            interior_vertices: vec![],
            cycles: vec![],
            state: None,
        };
        match Surface::from_document(&doc) {
            Err(Error::Validation { invariant, .. }) => assert_eq!(invariant, "panel not planar"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misoriented_partner_rejected() {
        let mut doc = two_triangles(0.0);
        doc.panels[1] = vec![0, 3, 1];
        assert!(matches!(
            Surface::from_document(&doc),
            Err(Error::Validation { ref invariant, .. }) if invariant == "inconsistent orientation"
        ));
    }

    #[test]
    fn truncated_document_is_parse_error() {
        assert!(matches!(load_surface("{\"vertices\": [[0,0"), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_key_is_parse_error() {
        let text = r#"{"vertices":[],"panels":[],"hinges":[],"extra":1}"#;
        assert!(matches!(load_surface(text), Err(Error::Parse(_))));
    }
}
