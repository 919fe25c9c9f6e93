//! Density, stiffness and wave speed implied by a seabed interface.
//!
//! Above the interface the water column follows a linear depth model,
//! below it the rock is homogeneous:
//!
//! ```text
//! y >  h(x):  rho = rho0 (1 + 0.0044 (1.5 - y)),  alpha = lambda0 (1 + 0.025 (1.5 - y))
//! y <= h(x):  rho = rho_minus,                    alpha = alpha_bottom
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::prior::SeabedCurve;

const RHO_DEPTH_GRADIENT: f64 = 0.0044;
const ALPHA_DEPTH_GRADIENT: f64 = 0.025;
/// Reference height of the depth model (the sea surface).
const SURFACE_Y: f64 = 1.5;

/// Number of vertical slices per cell used to integrate the rock fraction.
const FRACTION_SLICES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialConstants {
    pub rho0: f64,
    pub rho_minus: f64,
    pub lambda0: f64,
    /// `lambda_minus + 2 mu_minus` of the rock.
    pub alpha_bottom: f64,
}

impl Default for MaterialConstants {
    fn default() -> Self {
        Self { rho0: 1.0, rho_minus: 3.0, lambda0: 1.5, alpha_bottom: 6.4 }
    }
}

impl MaterialConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho_minus > 0.0 && self.lambda0 > 0.0 && self.alpha_bottom > 0.0) {
            return Err(Error::Config("material constants must be positive".into()));
        }
        if !(self.alpha_bottom > self.lambda0) {
            return Err(Error::Config("rock must be stiffer than water".into()));
        }
        Ok(())
    }

    pub fn water_rho(&self, y: f64) -> f64 {
        self.rho0 * (1.0 + RHO_DEPTH_GRADIENT * (SURFACE_Y - y))
    }

    pub fn water_alpha(&self, y: f64) -> f64 {
        self.lambda0 * (1.0 + ALPHA_DEPTH_GRADIENT * (SURFACE_Y - y))
    }

    /// `(rho, alpha)` at a point, the tie `y == h` going to the rock.
    pub fn at_point(&self, y: f64, interface: f64) -> (f64, f64) {
        if y > interface {
            (self.water_rho(y), self.water_alpha(y))
        } else {
            (self.rho_minus, self.alpha_bottom)
        }
    }

    /// Bounds `(rho_min, rho_max, alpha_min, alpha_max)` over heights in `[y_lo, y_hi]`.
    pub fn bounds(&self, y_lo: f64, y_hi: f64) -> (f64, f64, f64, f64) {
        let rhos = [self.water_rho(y_lo), self.water_rho(y_hi), self.rho_minus];
        let alphas = [self.water_alpha(y_lo), self.water_alpha(y_hi), self.alpha_bottom];
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min(&rhos), max(&rhos), min(&alphas), max(&alphas))
    }
}

/// How an element's coefficient is sampled from the piecewise definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialSampling {
    /// Single sample at the element centroid.
    Centroid,
    /// Area-weighted mixture of the two phases inside the element, with
    /// the water phase evaluated at the centroid height. Continuous in `h`.
    #[default]
    AreaFraction,
}

/// Per-element material values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
    /// Fraction of each element lying in the rock.
    pub rock_fraction: Vec<f64>,
}

impl MaterialField {
    /// Spatially constant coefficients.
    pub fn constant(n_elements: usize, rho: f64, alpha: f64) -> Self {
        Self {
            rho: vec![rho; n_elements],
            alpha: vec![alpha; n_elements],
            c: vec![(alpha / rho).sqrt(); n_elements],
            rock_fraction: vec![0.0; n_elements],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn c_max(&self) -> f64 {
        self.c.iter().copied().fold(0.0, f64::max)
    }

    pub fn c_min(&self) -> f64 {
        self.c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Debug dump: one `x,y,rho,alpha,c` row per element centroid.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut w: W) -> Result<()> {
        writeln!(w, "x,y,rho,alpha,c")?;
        for e in 0..self.len() {
            let [x, y] = mesh.centroid(e);
            writeln!(w, "{x},{y},{},{},{}", self.rho[e], self.alpha[e], self.c[e])?;
        }
        Ok(())
    }
}

/// Material field of the seabed `h` on `mesh`.
pub fn coeff_fields(
    h: &SeabedCurve,
    mesh: &Mesh,
    constants: &MaterialConstants,
    sampling: MaterialSampling,
) -> Result<MaterialField> {
    let d = mesh.domain;
    let tol = 1e-9 * d.width();
    if h.grid.a > d.x0 + tol || h.grid.b < d.x1 - tol {
        return Err(Error::Domain(format!(
            "seabed covers [{}, {}] but the mesh spans [{}, {}]",
            h.grid.a, h.grid.b, d.x0, d.x1
        )));
    }
    let (hx, hy) = mesh.spacing();
    let n_el = mesh.triangles.len();
    let mut field = MaterialField {
        rho: Vec::with_capacity(n_el),
        alpha: Vec::with_capacity(n_el),
        c: Vec::with_capacity(n_el),
        rock_fraction: Vec::with_capacity(n_el),
    };

    // Interface heights at the slice midpoints of every cell column.
    let slices: Vec<Vec<f64>> = (0..mesh.nx)
        .map(|i| {
            let x0 = d.x0 + i as f64 * hx;
            (0..FRACTION_SLICES)
                .map(|k| h.height_at(x0 + (k as f64 + 0.5) / FRACTION_SLICES as f64 * hx))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    for e in 0..n_el {
        let cell = e / 2;
        let (i, j) = (cell % mesh.nx, cell / mesh.nx);
        let upper = e % 2 == 1;
        let [xc, yc] = mesh.centroid(e);
        let theta = match sampling {
            MaterialSampling::Centroid => {
                if yc <= h.height_at(xc)? {
                    1.0
                } else {
                    0.0
                }
            }
            MaterialSampling::AreaFraction => {
                let y0 = d.y0 + j as f64 * hy;
                rock_fraction(&slices[i], y0, hy, upper)
            }
        };
        let rho = theta * constants.rho_minus + (1.0 - theta) * constants.water_rho(yc);
        let alpha = theta * constants.alpha_bottom + (1.0 - theta) * constants.water_alpha(yc);
        field.rho.push(rho);
        field.alpha.push(alpha);
        field.c.push((alpha / rho).sqrt());
        field.rock_fraction.push(theta);
    }
    Ok(field)
}

/// Fraction of a split-cell triangle lying on or below the interface.
///
/// For a slice at relative abscissa `t` the lower triangle spans heights
/// `[y0, y0 + t hy]`, the upper one `[y0 + t hy, y0 + hy]`.
fn rock_fraction(heights: &[f64], y0: f64, hy: f64, upper: bool) -> f64 {
    let n = heights.len() as f64;
    let mut covered = 0.0;
    for (k, &hk) in heights.iter().enumerate() {
        let t = (k as f64 + 0.5) / n;
        let (lo, hi) = if upper { (y0 + t * hy, y0 + hy) } else { (y0, y0 + t * hy) };
        covered += (hk - lo).clamp(0.0, hi - lo);
    }
    // Each triangle has area hx * hy / 2; slices are hx / n wide.
    ((covered / n) / (0.5 * hy)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use crate::prior::Grid1d;

    fn flat(h: f64) -> SeabedCurve {
        SeabedCurve::flat(Grid1d::new(-3.0, 3.0, 512).unwrap(), h)
    }

    #[test]
    fn point_values() {
        let k = MaterialConstants::default();
        let (rho, alpha) = k.at_point(1.5, -0.5);
        assert!((rho - 1.0).abs() < 1e-15 && (alpha - 1.5).abs() < 1e-15);
        let (rho, alpha) = k.at_point(-1.0, -0.5);
        assert_eq!((rho, alpha), (3.0, 6.4));
        assert!(((alpha / rho).sqrt() - 1.46059).abs() < 1e-5);
        let (rho, _) = k.at_point(0.0, -0.5);
        assert!((rho - 1.0066).abs() < 1e-12);
        // Tie goes to the rock.
        assert_eq!(k.at_point(0.25, 0.25), (3.0, 6.4));
    }

    #[test]
    fn water_column_is_monotone_in_depth() {
        let k = MaterialConstants::default();
        let ys: Vec<f64> = (0..50).map(|i| 1.5 - 0.06 * i as f64).collect();
        for w in ys.windows(2) {
            assert!(k.water_rho(w[1]) > k.water_rho(w[0]));
            assert!(k.water_alpha(w[1]) > k.water_alpha(w[0]));
        }
    }

    #[test]
    fn constants_validation() {
        assert!(MaterialConstants::default().validate().is_ok());
        let soft = MaterialConstants { alpha_bottom: 1.0, ..Default::default() };
        assert!(soft.validate().is_err());
    }

    #[test]
    fn fields_respect_bounds_and_speed_relation() {
        let mesh = Mesh::new(20, 10, Domain::default()).unwrap();
        let k = MaterialConstants::default();
        let h = SeabedCurve {
            values: (0..512).map(|m| 0.3 * (m as f64 * 0.02).sin()).collect(),
            ..flat(0.0)
        };
        for sampling in [MaterialSampling::Centroid, MaterialSampling::AreaFraction] {
            let f = coeff_fields(&h, &mesh, &k, sampling).unwrap();
            assert_eq!(f.len(), mesh.triangles.len());
            for e in 0..f.len() {
                assert!((1.0..=3.0).contains(&f.rho[e]));
                assert!((1.5..=6.4).contains(&f.alpha[e]));
                assert!((f.c[e] - (f.alpha[e] / f.rho[e]).sqrt()).abs() <= 1e-12 * f.c[e]);
            }
            assert!(f.c_min() > 1.0);
        }
    }

    #[test]
    fn flat_interface_on_grid_line_splits_cleanly() {
        // Interface exactly on the line y = 0 of a 4 x 4 mesh.
        let mesh = Mesh::new(4, 4, Domain::default()).unwrap();
        let k = MaterialConstants::default();
        let f = coeff_fields(&flat(0.0), &mesh, &k, MaterialSampling::AreaFraction).unwrap();
        for e in 0..f.len() {
            let yc = mesh.centroid(e)[1];
            let expect = if yc < 0.0 { 1.0 } else { 0.0 };
            assert!((f.rock_fraction[e] - expect).abs() < 1e-12, "element {e}");
        }
    }

    #[test]
    fn area_fraction_of_horizontal_cut() {
        // A horizontal interface through the middle of a cell cuts the
        // lower triangle at 3/4 and the upper one at 1/4.
        let mesh = Mesh::new(4, 4, Domain::default()).unwrap();
        let hy = 0.75;
        let f = coeff_fields(&flat(0.5 * hy), &mesh, &MaterialConstants::default(), MaterialSampling::AreaFraction).unwrap();
        // Cell row j = 2 spans [0, 0.75].
        let e_lower = 2 * (0 + 2 * 4);
        assert!((f.rock_fraction[e_lower] - 0.75).abs() < 1e-12);
        assert!((f.rock_fraction[e_lower + 1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn perturbation_is_local() {
        let mesh = Mesh::new(30, 16, Domain::default()).unwrap();
        let k = MaterialConstants::default();
        let base = SeabedCurve {
            values: (0..512).map(|m| 0.2 * (m as f64 * 0.03).cos()).collect(),
            ..flat(0.0)
        };
        let delta = 0.05;
        let shifted = SeabedCurve { values: base.values.iter().map(|v| v + delta).collect(), ..base.clone() };
        let f0 = coeff_fields(&base, &mesh, &k, MaterialSampling::AreaFraction).unwrap();
        let f1 = coeff_fields(&shifted, &mesh, &k, MaterialSampling::AreaFraction).unwrap();
        let (hx, hy) = mesh.spacing();
        for e in 0..f0.len() {
            if f0.rho[e] == f1.rho[e] {
                continue;
            }
            let cell = e / 2;
            let (i, j) = (cell % mesh.nx, cell / mesh.nx);
            let (xa, xb) = (-3.0 + i as f64 * hx, -3.0 + (i + 1) as f64 * hx);
            let (ya, yb) = (-1.5 + j as f64 * hy, -1.5 + (j + 1) as f64 * hy);
            let (hmin, hmax) = (0..=8)
                .map(|q| base.height_at(xa + q as f64 / 8.0 * (xb - xa)).unwrap())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            assert!(yb >= hmin - 1e-12 && ya <= hmax + delta + 1e-12, "element {e} changed away from the interface");
        }
    }

    #[test]
    fn short_curve_is_rejected() {
        let mesh = Mesh::new(4, 4, Domain::default()).unwrap();
        let h = SeabedCurve::flat(Grid1d::new(-2.0, 2.0, 16).unwrap(), 0.0);
        let err = coeff_fields(&h, &mesh, &MaterialConstants::default(), MaterialSampling::Centroid).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
