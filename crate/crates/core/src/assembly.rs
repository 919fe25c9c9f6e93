//! P1 finite element operators of the damped scalar wave equation.
//!
//! For the first-order Lagrange basis `phi_k` the operators are
//!
//! ```text
//! R_mn = int rho phi_m phi_n        D_mn = int rho c^2 grad phi_m . grad phi_n
//! C_mn = int_{absorbing} rho c phi_m phi_n ds     M_mn = int phi_m phi_n
//! b_n  = int g(x - x_s) phi_n,      g(s) = exp(-|s|^2 / width)
//! ```
//!
//! Coefficients are constant per element. Element integrals of products of
//! basis functions are exact; source integrals use a subdivided degree-2
//! rule since the source is much narrower than a cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialField;
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Positions and shape of the point-like sources (all emit simultaneously).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceSpec {
    pub xs: Vec<f64>,
    pub y: f64,
    /// `w` in `g(s) = exp(-|s|^2 / w)`.
    pub width: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self { xs: equispaced(5, -2.4, 2.4), y: 1.4, width: 0.0025 }
    }
}

pub fn equispaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Ricker-type source time function with central frequency `f0`.
pub fn source_time(f0: f64, t: f64) -> f64 {
    let a = (std::f64::consts::PI * f0 * t).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub r: CsrMatrix,
    pub d: CsrMatrix,
    pub c: CsrMatrix,
    pub m: CsrMatrix,
    /// One load vector per source.
    pub b_src: Vec<Vec<f64>>,
}

impl OperatorSet {
    pub fn size(&self) -> usize {
        self.m.n
    }

    /// Load vector of simultaneous emission from all sources.
    pub fn b_total(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.size()];
        for src in &self.b_src {
            b.iter_mut().zip(src).for_each(|(acc, v)| *acc += v);
        }
        b
    }

    /// Copy with the boundary damping removed (closed domain).
    pub fn without_damping(&self) -> Self {
        Self { c: CsrMatrix::zeros(self.size()), ..self.clone() }
    }
}

/// Row sums of a mass matrix.
pub fn lumped(m: &CsrMatrix) -> Vec<f64> {
    (0..m.n).map(|i| m.row(i).map(|(_, v)| v).sum()).collect()
}

/// Assembles operators for one mesh; the mass matrix, sparsity pattern and
/// source vectors are computed once and reused across material fields.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: Mesh,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    pattern: CsrMatrix,
    element_slots: Vec<[usize; 9]>,
    edges: Vec<(usize, f64, [usize; 4])>,
    boundary_pattern: CsrMatrix,
    m: CsrMatrix,
    b_src: Vec<Vec<f64>>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, sources: &SourceSpec) -> Result<Self> {
        let n = mesh.node_count();
        let mut areas = Vec::with_capacity(mesh.triangles.len());
        let mut grads = Vec::with_capacity(mesh.triangles.len());
        for (e, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.signed_area(e);
            if !(area > 0.0) {
                return Err(Error::Singular { element: e, area });
            }
            let p = tri.map(|k| mesh.nodes[k]);
            let mut g = [[0.0; 2]; 3];
            for a in 0..3 {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                g[a] = [(p[b][1] - p[c][1]) / (2.0 * area), (p[c][0] - p[b][0]) / (2.0 * area)];
            }
            areas.push(area);
            grads.push(g);
        }

        let mut builder = TripletBuilder::with_capacity(n, 9 * mesh.triangles.len());
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    builder.add(a, b, 0.0);
                }
            }
        }
        let pattern = builder.build();
        let slot = |pat: &CsrMatrix, i: usize, j: usize| {
            let range = pat.row_ptr[i]..pat.row_ptr[i + 1];
            range.clone().start + pat.col_idx[range].binary_search(&j).expect("entry in pattern")
        };
        let element_slots: Vec<[usize; 9]> = mesh
            .triangles
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = slot(&pattern, tri[a], tri[b]);
                    }
                }
                s
            })
            .collect();

        let mut bbuilder = TripletBuilder::new(n);
        for edge in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Absorbing) {
            for &a in &edge.nodes {
                for &b in &edge.nodes {
                    bbuilder.add(a, b, 0.0);
                }
            }
        }
        let boundary_pattern = bbuilder.build();
        let edges = mesh
            .boundary
            .iter()
            .filter(|e| e.tag == BoundaryTag::Absorbing)
            .map(|e| {
                let [a, b] = e.nodes;
                let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                let s = [
                    slot(&boundary_pattern, a, a),
                    slot(&boundary_pattern, a, b),
                    slot(&boundary_pattern, b, a),
                    slot(&boundary_pattern, b, b),
                ];
                (e.element, len, s)
            })
            .collect();

        let mut asm = Self {
            mesh: mesh.clone(),
            areas,
            grads,
            pattern,
            element_slots,
            edges,
            boundary_pattern,
            m: CsrMatrix::zeros(n),
            b_src: Vec::new(),
        };
        asm.m = asm.mass_weighted(&vec![1.0; mesh.triangles.len()]);
        asm.b_src = sources.xs.iter().map(|&xs| asm.source_vector([xs, sources.y], sources.width)).collect();
        Ok(asm)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.m
    }

    fn mass_weighted(&self, weight: &[f64]) -> CsrMatrix {
        let mut out = self.pattern.clone();
        for (e, slots) in self.element_slots.iter().enumerate() {
            let base = weight[e] * self.areas[e] / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    out.values[slots[3 * a + b]] += if a == b { 2.0 * base } else { base };
                }
            }
        }
        out
    }

    fn stiffness_weighted(&self, weight: &[f64]) -> CsrMatrix {
        let mut out = self.pattern.clone();
        for (e, slots) in self.element_slots.iter().enumerate() {
            let g = &self.grads[e];
            let scale = weight[e] * self.areas[e];
            for a in 0..3 {
                for b in 0..3 {
                    out.values[slots[3 * a + b]] += scale * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        out
    }

    fn damping(&self, material: &MaterialField) -> CsrMatrix {
        let mut out = self.boundary_pattern.clone();
        for &(e, len, s) in &self.edges {
            let impedance = material.rho[e] * material.c[e];
            let diag = impedance * len / 3.0;
            let off = impedance * len / 6.0;
            out.values[s[0]] += diag;
            out.values[s[1]] += off;
            out.values[s[2]] += off;
            out.values[s[3]] += diag;
        }
        out
    }

    /// `int g(x - centre) phi_k dx` for every node `k`.
    fn source_vector(&self, centre: [f64; 2], width: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.mesh.node_count()];
        let sigma = (0.5 * width).sqrt();
        // g < 1e-30 beyond this distance.
        let reach = (69.0 * width).sqrt();
        let (hx, hy) = self.mesh.spacing();
        let cell_diam = hx.hypot(hy);
        let level = ((cell_diam / (sigma / 4.0)).ceil() as usize).max(1);
        // Degree-2 rule with interior points at barycentric (2/3, 1/6, 1/6).
        const PTS: [[f64; 3]; 3] = [[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]];
        for (e, tri) in self.mesh.triangles.iter().enumerate() {
            let c = self.mesh.centroid(e);
            if (c[0] - centre[0]).hypot(c[1] - centre[1]) > reach + cell_diam {
                continue;
            }
            let p = tri.map(|k| self.mesh.nodes[k]);
            let sub_area = self.areas[e] / (level * level) as f64;
            let mut local = [0.0; 3];
            for_each_subtriangle(level, |lam| {
                for q in PTS {
                    let bary = [
                        q[0] * lam[0][0] + q[1] * lam[1][0] + q[2] * lam[2][0],
                        q[0] * lam[0][1] + q[1] * lam[1][1] + q[2] * lam[2][1],
                        q[0] * lam[0][2] + q[1] * lam[1][2] + q[2] * lam[2][2],
                    ];
                    let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
                    let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
                    let g = (-((x - centre[0]).powi(2) + (y - centre[1]).powi(2)) / width).exp();
                    for a in 0..3 {
                        local[a] += g * bary[a] * sub_area / 3.0;
                    }
                }
            });
            for a in 0..3 {
                b[tri[a]] += local[a];
            }
        }
        b
    }

    /// Material-dependent operators together with the cached mass matrix and
    /// source vectors.
    pub fn assemble(&self, material: &MaterialField) -> Result<OperatorSet> {
        if material.len() != self.mesh.triangles.len() {
            return Err(Error::Shape(format!(
                "material has {} elements, mesh has {}",
                material.len(),
                self.mesh.triangles.len()
            )));
        }
        Ok(OperatorSet {
            r: self.mass_weighted(&material.rho),
            d: self.stiffness_weighted(&material.alpha),
            c: self.damping(material),
            m: self.m.clone(),
            b_src: self.b_src.clone(),
        })
    }
}

/// Calls `f` with the barycentric vertices of each of the `level^2`
/// congruent sub-triangles of the reference triangle.
fn for_each_subtriangle(level: usize, mut f: impl FnMut([[f64; 3]; 3])) {
    let n = level as f64;
    let bary = |i: usize, j: usize| {
        let (u, v) = (i as f64 / n, j as f64 / n);
        [1.0 - u - v, u, v]
    };
    for j in 0..level {
        for i in 0..level - j {
            f([bary(i, j), bary(i + 1, j), bary(i, j + 1)]);
            if i + j + 1 < level {
                f([bary(i + 1, j), bary(i + 1, j + 1), bary(i, j + 1)]);
            }
        }
    }
}

/// One-shot assembly.
pub fn assemble(mesh: &Mesh, material: &MaterialField, sources: &SourceSpec) -> Result<OperatorSet> {
    Assembler::new(mesh, sources)?.assemble(material)
}
