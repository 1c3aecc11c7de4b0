//! Builders for the reference surfaces used in tests, benchmarks and `data/`.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::derivatives::PolynomialSystem;
use crate::surface::{CycleDoc, CycleStepDoc, HingeDoc, InteriorVertexDoc, SurfaceDocument};

/// Triangle fan around `center`; `ring` is ordered counterclockwise about the
/// intended normals. Hinge `k` joins the centre to `ring[k+1]` and carries angle `k`.
pub fn fan_document(name: &str, center: [f64; 3], ring: &[[f64; 3]]) -> SurfaceDocument {
    let n = ring.len();
    let mut vertices = vec![center];
    vertices.extend_from_slice(ring);
    let panels: Vec<Vec<usize>> = (0..n).map(|i| vec![0, 1 + i, 1 + (i + 1) % n]).collect();
    let hinges = (0..n)
        .map(|k| HingeDoc {
            panels: [k, (k + 1) % n],
            edge: [0, 1 + (k + 1) % n],
            angle_index: k,
        })
        .collect();
    SurfaceDocument {
        name: Some(name.into()),
        vertices,
        panels,
        hinges,
        interior_vertices: vec![InteriorVertexDoc {
            vertex: 0,
            fan: (0..n).map(|k| [k, k]).collect(),
        }],
        cycles: vec![],
        state: None,
    }
}

/// Flat degree-4 vertex with four right-angle sectors.
pub fn flat_degree4() -> SurfaceDocument {
    fan_document(
        "flat-degree-4",
        [0.0; 3],
        &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
    )
}

/// Degree-3 vertex at a cube corner; first-order rigid.
pub fn degree3_vertex() -> SurfaceDocument {
    fan_document(
        "degree-3-vertex",
        [0.0; 3],
        &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    )
}

/// Degree-5 vertex with a non-planar ring.
pub fn degree5_generic() -> SurfaceDocument {
    let theta: [f64; 5] = [0.0, 1.1, 2.5, 3.6, 5.0];
    let z = [0.3, -0.2, 0.4, 0.1, -0.3];
    let ring: Vec<[f64; 3]> = theta
        .iter()
        .zip(z)
        .map(|(t, h)| [t.cos(), t.sin(), h])
        .collect();
    fan_document("degree-5-generic", [0.05, -0.02, 0.01], &ring)
}

/// Sector angle of the degree-4 cone.
pub const CONE_SECTOR: f64 = PI / 3.0;

/// Default folding parameter of the cone fixture.
pub const CONE_TAU: f64 = 2.0;

/// Unit crease directions of the spherical four-bar with equal sides
/// [`CONE_SECTOR`], parametrized by the rotation `tau` of `x3` about `x0`.
pub fn cone_creases(tau: f64) -> [Vector3<f64>; 4] {
    let a = CONE_SECTOR;
    let x0 = Vector3::new(1.0, 0.0, 0.0);
    let x1 = Vector3::new(a.cos(), a.sin(), 0.0);
    let x3 = Vector3::new(a.cos(), a.sin() * tau.cos(), a.sin() * tau.sin());
    let m = x1.cross(&x3).normalize();
    let x2 = x0 - 2.0 * x0.dot(&m) * m;
    [x0, x1, x2, x3]
}

/// Degree-4 vertex with equal sectors [`CONE_SECTOR`], folded to parameter `tau`.
/// The document declares the oracle angles as its state.
pub fn cone_degree4(tau: f64) -> SurfaceDocument {
    let x = cone_creases(tau);
    // ring[k + 1] must be crease k, so rotate the list by one
    let ring: Vec<[f64; 3]> = (0..4).map(|k| {
        let v = x[(k + 3) % 4];
        [v.x, v.y, v.z]
    }).collect();
    let mut doc = fan_document("cone-degree-4", [0.0; 3], &ring);
    doc.state = Some(cone_oracle_angles(tau).to_vec());
    doc
}

/// Folding angles of [`cone_degree4`] from the spherical law of cosines,
/// independent of any frame propagation.
pub fn cone_oracle_angles(tau: f64) -> [f64; 4] {
    let x = cone_creases(tau);
    let a = CONE_SECTOR;
    // creases fold toward the panel normals when those point into the cone
    let inside = x[0].cross(&x[1]).dot(&(x[0] + x[1] + x[2] + x[3])).signum();
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        // crease k lies between ring neighbours k-1 and k+1; the interior angle
        // of the spherical quadrilateral there comes from the diagonal
        let d = x[(k + 3) % 4].dot(&x[(k + 1) % 4]).clamp(-1.0, 1.0);
        let cos_theta = (d - a.cos() * a.cos()) / (a.sin() * a.sin());
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        *o = inside * (PI - theta);
    }
    out
}

/// Two triangles joined by one hinge.
pub fn single_hinge() -> SurfaceDocument {
    SurfaceDocument {
        name: Some("single-hinge".into()),
        vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, -1.0, 0.0], [0.5, 1.0, 0.0]],
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

/// Planar surface with three interior vertices and nine creases, normals along `-z`.
///
/// Creases `ρ1 … ρ9` map to angle indices `0 … 8`. Products run
/// `(ρ4, ρ3, ρ2, ρ1)` at vertex 1, `(ρ5, ρ7, ρ6, ρ1)` at vertex 2 and
/// `(ρ9, ρ8, ρ5, ρ2)` at vertex 3.
pub fn planar_three_vertex() -> SurfaceDocument {
    let s3 = 3f64.sqrt();
    let vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, -s3, 0.0],
        [2.0, 0.0, 0.0],
        [-0.5, s3 / 2.0, 0.0],
        [-0.5, -s3 / 2.0, 0.0],
        [1.0, -1.0 - s3, 0.0],
        [2.5, -s3 / 2.0, 0.0],
        [2.5, s3 / 2.0, 0.0],
        [-1.5, -s3 / 2.0, 0.0],
        [3.5, -s3 / 2.0, 0.0],
    ];
    // counterclockwise in xy, then reversed so the normals point along -z
    let ccw: [&[usize]; 7] = [
        &[1, 3, 8, 4],
        &[1, 4, 9, 5],
        &[1, 5, 2],
        &[1, 2, 3],
        &[2, 5, 6],
        &[2, 6, 7, 3],
        &[3, 7, 10, 8],
    ];
    let panels = ccw
        .iter()
        .map(|p| p.iter().rev().map(|v| v - 1).collect())
        .collect();
    // (edge, panels), 1-based, for ρ1 … ρ9
    let creases: [([usize; 2], [usize; 2]); 9] = [
        ([1, 2], [3, 4]),
        ([1, 3], [4, 1]),
        ([1, 4], [1, 2]),
        ([1, 5], [2, 3]),
        ([2, 3], [4, 6]),
        ([2, 5], [3, 5]),
        ([2, 6], [5, 6]),
        ([3, 7], [6, 7]),
        ([3, 8], [7, 1]),
    ];
    let hinges = creases
        .iter()
        .enumerate()
        .map(|(k, (e, p))| HingeDoc {
            panels: [p[0] - 1, p[1] - 1],
            edge: [e[0] - 1, e[1] - 1],
            angle_index: k,
        })
        .collect();
    // (panel, crease) pairs, 1-based
    let fans: [(usize, [[usize; 2]; 4]); 3] = [
        (1, [[3, 4], [2, 3], [1, 2], [4, 1]]),
        (2, [[4, 5], [6, 7], [5, 6], [3, 1]]),
        (3, [[1, 9], [7, 8], [6, 5], [4, 2]]),
    ];
    let interior_vertices = fans
        .iter()
        .map(|(v, fan)| InteriorVertexDoc {
            vertex: v - 1,
            fan: fan.iter().map(|[p, c]| [p - 1, c - 1]).collect(),
        })
        .collect();
    SurfaceDocument {
        name: Some("planar-three-vertex".into()),
        vertices,
        panels,
        hinges,
        interior_vertices,
        cycles: vec![],
        state: None,
    }
}

/// Closed band of `2n` triangles between two offset rings, with one cycle.
pub fn antiprism_band(n: usize) -> SurfaceDocument {
    let (radius, top_radius, height) = (1.0, 0.8, 0.7);
    let mut vertices = Vec::with_capacity(2 * n);
    for i in 0..n {
        let a = 2.0 * PI * i as f64 / n as f64;
        vertices.push([radius * a.cos(), radius * a.sin(), 0.0]);
    }
    for i in 0..n {
        let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
        vertices.push([top_radius * a.cos(), top_radius * a.sin(), height]);
    }
    let b = |i: usize| i % n;
    let t = |i: usize| n + i % n;
    let mut panels = Vec::with_capacity(2 * n);
    for i in 0..n {
        panels.push(vec![b(i), b(i + 1), t(i)]);
        panels.push(vec![t(i), b(i + 1), t(i + 1)]);
    }
    let np = 2 * n;
    let mut hinges = Vec::with_capacity(2 * n);
    let mut steps = Vec::with_capacity(2 * n);
    for i in 0..n {
        hinges.push(HingeDoc {
            panels: [2 * i, 2 * i + 1],
            edge: [b(i + 1), t(i)],
            angle_index: 2 * i,
        });
        steps.push(CycleStepDoc {
            panel: 2 * i,
            hinge: 2 * i,
            anchor_vertex: t(i),
        });
        hinges.push(HingeDoc {
            panels: [2 * i + 1, (2 * i + 2) % np],
            edge: [b(i + 1), t(i + 1)],
            angle_index: 2 * i + 1,
        });
        steps.push(CycleStepDoc {
            panel: 2 * i + 1,
            hinge: 2 * i + 1,
            anchor_vertex: t(i + 1),
        });
    }
    SurfaceDocument {
        name: Some(format!("antiprism-band-{n}")),
        vertices,
        panels,
        hinges,
        interior_vertices: vec![],
        cycles: vec![CycleDoc { steps }],
        state: None,
    }
}

/// Quad torus of revolution with `m` segments around the axis and `n` around
/// the tube; every vertex is interior and two cycles are supplied.
pub fn torus(m: usize, n: usize) -> SurfaceDocument {
    let (big, small) = (3.0, 1.0);
    let vid = |i: usize, j: usize| (i % m) * n + j % n;
    let mut vertices = Vec::with_capacity(m * n);
    for i in 0..m {
        let th = 2.0 * PI * i as f64 / m as f64;
        for j in 0..n {
            let ph = 2.0 * PI * j as f64 / n as f64;
            let r = big + small * ph.cos();
            vertices.push([r * th.cos(), r * th.sin(), small * ph.sin()]);
        }
    }
    let qid = |i: usize, j: usize| (i % m) * n + j % n;
    let mut panels = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            panels.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    // theta edge (i,j)-(i+1,j) has hinge 2*vid(i,j); phi edge (i,j)-(i,j+1) has 2*vid(i,j)+1
    let e_theta = |i: usize, j: usize| 2 * vid(i, j);
    let e_phi = |i: usize, j: usize| 2 * vid(i, j) + 1;
    let mut hinges = Vec::with_capacity(2 * m * n);
    for i in 0..m {
        for j in 0..n {
            hinges.push(HingeDoc {
                panels: [qid(i, j), qid(i, j + n - 1)],
                edge: [vid(i, j), vid(i + 1, j)],
                angle_index: e_theta(i, j),
            });
            hinges.push(HingeDoc {
                panels: [qid(i, j), qid(i + m - 1, j)],
                edge: [vid(i, j), vid(i, j + 1)],
                angle_index: e_phi(i, j),
            });
        }
    }
    let mut interior_vertices = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let (im, jm) = (i + m - 1, j + n - 1);
            interior_vertices.push(InteriorVertexDoc {
                vertex: vid(i, j),
                fan: vec![
                    [qid(i, j), e_phi(i, j)],
                    [qid(im, j), e_theta(im, j)],
                    [qid(im, jm), e_phi(i, jm)],
                    [qid(i, jm), e_theta(i, j)],
                ],
            });
        }
    }
    let around_axis = CycleDoc {
        steps: (0..m)
            .map(|i| CycleStepDoc {
                panel: qid(i, 0),
                hinge: e_phi(i + 1, 0),
                anchor_vertex: vid(i + 1, 1),
            })
            .collect(),
    };
    let around_tube = CycleDoc {
        steps: (0..n)
            .map(|j| CycleStepDoc {
                panel: qid(0, j),
                hinge: e_theta(0, j + 1),
                anchor_vertex: vid(0, j + 1),
            })
            .collect(),
    };
    SurfaceDocument {
        name: Some(format!("torus-{m}x{n}")),
        vertices,
        panels,
        hinges,
        interior_vertices,
        cycles: vec![around_axis, around_tube],
        state: None,
    }
}

/// `f = ρ₁² + ρ₂²`: `R = 0`, `Ω = 2I`.
pub fn toy_sum_of_squares() -> PolynomialSystem {
    PolynomialSystem::new(2, vec![vec![(1.0, vec![2, 0]), (1.0, vec![0, 2])]]).expect("well formed")
}

/// `f = ρ₁² − ρ₂²`: indefinite for every stress.
pub fn toy_difference_of_squares() -> PolynomialSystem {
    PolynomialSystem::new(2, vec![vec![(1.0, vec![2, 0]), (-1.0, vec![0, 2])]]).expect("well formed")
}

/// `f = (ρ₂, ρ₁ρ₂)`: the null direction `e₁` has zero curvature but `Ωe₁ ≠ 0`.
pub fn toy_degenerate_saddle() -> PolynomialSystem {
    PolynomialSystem::new(2, vec![vec![(1.0, vec![0, 1])], vec![(1.0, vec![1, 1])]]).expect("well formed")
}

/// `f = ρ₁² + ρ₂⁴`: `Ω ⪰ 0` with kernel `e₂` and a positive quartic there.
pub fn toy_quartic() -> PolynomialSystem {
    PolynomialSystem::new(2, vec![vec![(1.0, vec![2, 0]), (1.0, vec![0, 4])]]).expect("well formed")
}

/// `f = (ρ₂, ρ₁²)`: nullity one with no `(1,2)` flex.
pub fn toy_second_order_rigid() -> PolynomialSystem {
    PolynomialSystem::new(2, vec![vec![(1.0, vec![0, 1])], vec![(1.0, vec![2, 0])]]).expect("well formed")
}

/// Every fixture with the file stem used under `data/`.
pub fn all() -> Vec<(&'static str, SurfaceDocument)> {
    vec![
        ("planar_three_vertex", planar_three_vertex()),
        ("flat_degree4", flat_degree4()),
        ("degree3_vertex", degree3_vertex()),
        ("degree5_generic", degree5_generic()),
        ("cone_degree4", cone_degree4(CONE_TAU)),
        ("single_hinge", single_hinge()),
        ("antiprism_band", antiprism_band(5)),
        ("torus_6x4", torus(6, 4)),
    ]
}
