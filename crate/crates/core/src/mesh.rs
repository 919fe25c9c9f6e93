//! Structured triangular mesh of the rectangular computational domain.
//!
//! Nodes are numbered row by row from the bottom (`node = i + j * (nx + 1)`).
//! Every cell is split along its lower-left to upper-right diagonal into two
//! counter-clockwise triangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Domain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self { x0: -3.0, x1: 3.0, y0: -1.5, y1: 1.5 }
    }
}

impl Domain {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Tag of a boundary edge: the sea surface or the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    Top,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// Triangle owning the edge.
    pub element: usize,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub domain: Domain,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, domain: Domain) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!("mesh needs nx, ny >= 2, got {nx} x {ny}")));
        }
        if !(domain.x0 < domain.x1) || !(domain.y0 < domain.y1) {
            return Err(Error::Config("empty domain".into()));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let coord = |i: usize, n: usize, lo: f64, hi: f64, h: f64| {
            if i == n {
                hi
            } else {
                lo + i as f64 * h
            }
        };
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = coord(j, ny, domain.y0, domain.y1, hy);
            for i in 0..=nx {
                nodes.push([coord(i, nx, domain.x0, domain.x1, hx), y]);
            }
        }
        let id = |i: usize, j: usize| i + j * (nx + 1);
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }
        // Lower triangle of cell (i, j) is 2 * (i + j * nx), the upper one follows.
        let lower = |i: usize, j: usize| 2 * (i + j * nx);
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], element: lower(i, 0), tag: BoundaryTag::Absorbing });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], element: lower(nx - 1, j), tag: BoundaryTag::Absorbing });
        }
        for i in (0..nx).rev() {
            boundary.push(BoundaryEdge { nodes: [id(i + 1, ny), id(i, ny)], element: lower(i, ny - 1) + 1, tag: BoundaryTag::Top });
        }
        for j in (0..ny).rev() {
            boundary.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], element: lower(0, j) + 1, tag: BoundaryTag::Absorbing });
        }
        Ok(Self { nx, ny, domain, nodes, triangles, boundary })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.domain.width() / self.nx as f64, self.domain.height() / self.ny as f64)
    }

    pub fn min_spacing(&self) -> f64 {
        let (hx, hy) = self.spacing();
        hx.min(hy)
    }

    /// Node indices along the top boundary, left to right.
    pub fn top_nodes(&self) -> Vec<usize> {
        (0..=self.nx).map(|i| i + self.ny * (self.nx + 1)).collect()
    }

    pub fn top_xs(&self) -> Vec<f64> {
        self.top_nodes().iter().map(|&n| self.nodes[n][0]).collect()
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[element];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Signed area (positive for counter-clockwise orientation).
    pub fn signed_area(&self, element: usize) -> f64 {
        let [a, b, c] = self.triangles[element];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Index into [`Mesh::top_nodes`] of the top node at `x`.
    pub fn top_index_at(&self, x: f64) -> Result<usize> {
        let hx = self.domain.width() / self.nx as f64;
        let t = (x - self.domain.x0) / hx;
        let i = t.round();
        if i < 0.0 || i > self.nx as f64 || (t - i).abs() > 1e-9 {
            return Err(Error::Alignment { x });
        }
        Ok(i as usize)
    }

    /// Top-boundary node indices of the given sensor positions.
    pub fn sensor_nodes(&self, sensor_xs: &[f64]) -> Result<Vec<usize>> {
        let top = self.top_nodes();
        sensor_xs.iter().map(|&x| self.top_index_at(x).map(|i| top[i])).collect()
    }

    /// Same mesh with every cell split in four.
    pub fn refined(&self) -> Result<Self> {
        Mesh::new(2 * self.nx, 2 * self.ny, self.domain)
    }
}

/// Builds a mesh and checks that every sensor sits on a top-boundary node.
pub fn build_mesh(nx: usize, ny: usize, domain: Domain, sensor_xs: &[f64]) -> Result<Mesh> {
    let mesh = Mesh::new(nx, ny, domain)?;
    mesh.sensor_nodes(sensor_xs).map_err(|e| {
        Error::Config(format!("sensor layout incompatible with a {nx}-cell top boundary: {e}"))
    })?;
    Ok(mesh)
}

/// `n` sensors on consecutive top nodes of an `nx`-cell mesh, centred (to
/// within one node) on the top boundary. For `nx = 188, n = 186` this
/// occupies node indices `1..=186`.
pub fn equidistant_sensors(n: usize, nx: usize, domain: Domain) -> Result<Vec<f64>> {
    if n == 0 || n > nx + 1 {
        return Err(Error::Config(format!("cannot place {n} sensors on {} top nodes", nx + 1)));
    }
    let offset = (nx + 1 - n) / 2;
    let hx = domain.width() / nx as f64;
    Ok((offset..offset + n)
        .map(|i| if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx })
        .collect())
}
