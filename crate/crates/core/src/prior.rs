//! Hierarchical Gaussian prior over seabed interface curves.
//!
//! A curve is represented by its Karhunen–Loève expansion
//!
//! ```text
//! h(x) = m + sum_{j=1}^{n_kl} sqrt(lambda_j(s)) * beta_j * e_j(x)
//! ```
//!
//! with a cosine basis `e_j` (zero slope at both ends of `[a, b]`),
//! Whittle–Matérn style eigenvalues `lambda_j(s) = (ell^-2 + j^2)^(-2s)` and
//! i.i.d. standard normal `beta_j`. The regularity `s` carries a uniform
//! hyperprior. Assembly on the uniform grid is a type-I discrete cosine
//! transform, evaluated here through an FFT of the even extension.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of redraws when a prior sample leaves the vertical extent.
pub const MAX_PRIOR_ATTEMPTS: usize = 100;

/// Uniform grid on `[a, b]` with `n` points including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Grid1d {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) || n < 2 {
            return Err(Error::Config(format!("invalid grid [{a}, {b}] with {n} points")));
        }
        Ok(Self { a, b, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        if m + 1 == self.n {
            self.b
        } else {
            self.a + m as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.x(m)).collect()
    }

    /// Trapezoidal quadrature weights; the discrete L² product on this grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dx = self.spacing();
        let mut w = vec![dx; self.n];
        w[0] = 0.5 * dx;
        w[self.n - 1] = 0.5 * dx;
        w
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.trapezoid_weights()
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KlConfig {
    pub n_kl: usize,
    pub grid_n: usize,
    pub a: f64,
    pub b: f64,
    /// Correlation length.
    pub ell: f64,
    /// Sign of the eigenvalue exponent; `-1` gives the decaying spectrum.
    pub exponent_sign: f64,
    /// Open vertical interval a curve must stay inside.
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self {
            n_kl: 256,
            grid_n: 512,
            a: -3.0,
            b: 3.0,
            ell: 0.2,
            exponent_sign: -1.0,
            y_min: -1.5,
            y_max: 1.5,
        }
    }
}

impl KlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kl < 1 || self.grid_n < self.n_kl || self.grid_n < 2 {
            return Err(Error::Config(format!(
                "need 1 <= n_kl <= grid_n, got n_kl = {}, grid_n = {}",
                self.n_kl, self.grid_n
            )));
        }
        if !(self.a < self.b) {
            return Err(Error::Config(format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        if !(self.ell > 0.0) {
            return Err(Error::Domain(format!("correlation length must be positive, got {}", self.ell)));
        }
        if self.exponent_sign != -1.0 && self.exponent_sign != 1.0 {
            return Err(Error::Config(format!("exponent_sign must be +1 or -1, got {}", self.exponent_sign)));
        }
        if !(self.y_min < self.y_max) {
            return Err(Error::Config("empty vertical extent".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid1d {
        Grid1d { a: self.a, b: self.b, n: self.grid_n }
    }

    /// L²([a, b]) normalisation of `cos(pi j (x - a) / (b - a))`, `j >= 1`.
    pub fn normalization(&self) -> f64 {
        (0.5 * (self.b - self.a)).sqrt()
    }
}

/// Bounds of the uniform hyperprior on the regularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SBounds {
    fn default() -> Self {
        Self { lo: 0.5, hi: 5.0 }
    }
}

impl SBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0) || !(self.lo <= self.hi) {
            return Err(Error::Config(format!("invalid regularity bounds [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }
}

/// Regularity parameter `s` of the prior.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RegularityParam(pub f64);

impl RegularityParam {
    pub fn new(s: f64, bounds: SBounds) -> Result<Self> {
        if !bounds.contains(s) {
            return Err(Error::Domain(format!("s = {s} outside [{}, {}]", bounds.lo, bounds.hi)));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `lambda_j = (ell^-2 + j^2)^(sign * 2 s)` for `j = 1..=n_kl`.
pub fn eigenvalues(cfg: &KlConfig, s: f64) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("regularity must be positive, got {s}")));
    }
    if !(cfg.ell > 0.0) {
        return Err(Error::Domain(format!("correlation length must be positive, got {}", cfg.ell)));
    }
    let base = cfg.ell.powi(-2);
    let exponent = cfg.exponent_sign * 2.0 * s;
    Ok((1..=cfg.n_kl)
        .map(|j| (base + (j * j) as f64).powf(exponent))
        .collect())
}

/// Cosine basis function `e_j` on the grid of `cfg`.
pub fn basis_eval(j: usize, cfg: &KlConfig) -> Result<Vec<f64>> {
    if j == 0 || j > cfg.n_kl {
        return Err(Error::Index { index: j, max: cfg.n_kl });
    }
    let grid = cfg.grid();
    let z = cfg.normalization();
    let m_last = (grid.n - 1) as f64;
    Ok((0..grid.n)
        .map(|m| (PI * j as f64 * m as f64 / m_last).cos() / z)
        .collect())
}

/// A seabed interface sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeabedCurve {
    pub grid: Grid1d,
    pub values: Vec<f64>,
    /// Whitened KL coefficients, when the curve came from the expansion.
    pub coeffs: Option<Vec<f64>>,
    /// Regularity used for assembly, when the curve came from the expansion.
    pub s: Option<f64>,
    pub mean_offset: f64,
}

impl SeabedCurve {
    /// Curve of constant height.
    pub fn flat(grid: Grid1d, height: f64) -> Self {
        Self {
            grid,
            values: vec![height; grid.n],
            coeffs: None,
            s: None,
            mean_offset: height,
        }
    }

    /// Height at `x` by piecewise-linear interpolation.
    pub fn height_at(&self, x: f64) -> Result<f64> {
        let g = &self.grid;
        let tol = 1e-12 * (g.b - g.a);
        if x < g.a - tol || x > g.b + tol {
            return Err(Error::Domain(format!(
                "x = {x} outside curve extent [{}, {}]",
                g.a, g.b
            )));
        }
        let t = ((x - g.a) / g.spacing()).clamp(0.0, (g.n - 1) as f64);
        let i = (t.floor() as usize).min(g.n - 2);
        let frac = t - i as f64;
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    pub fn max_abs_deviation(&self, other: &SeabedCurve) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Precomputed cosine synthesis for one [`KlConfig`].
#[derive(Clone)]
pub struct KlBasis {
    cfg: KlConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for KlBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KlBasis").field("cfg", &self.cfg).finish()
    }
}

impl KlBasis {
    pub fn new(cfg: KlConfig) -> Result<Self> {
        cfg.validate()?;
        let len = 2 * (cfg.grid_n - 1);
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(Self { cfg, fft })
    }

    pub fn config(&self) -> &KlConfig {
        &self.cfg
    }

    /// Maps whitened coefficients to a curve: `m + sum sqrt(lambda_j) beta_j e_j`.
    pub fn assemble(&self, coeffs: &[f64], mean_offset: f64, s: f64) -> Result<SeabedCurve> {
        let amps = self.amplitudes(coeffs, s)?;
        let values = self.synthesize(&amps, mean_offset);
        self.finish(values, coeffs, mean_offset, s)
    }

    /// Same as [`KlBasis::assemble`] but by direct O(n_kl * grid_n) summation.
    pub fn assemble_direct(&self, coeffs: &[f64], mean_offset: f64, s: f64) -> Result<SeabedCurve> {
        let amps = self.amplitudes(coeffs, s)?;
        let n = self.cfg.grid_n;
        let m_last = (n - 1) as f64;
        let values = (0..n)
            .map(|m| {
                mean_offset
                    + amps
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * (PI * (k + 1) as f64 * m as f64 / m_last).cos())
                        .sum::<f64>()
            })
            .collect();
        self.finish(values, coeffs, mean_offset, s)
    }

    fn amplitudes(&self, coeffs: &[f64], s: f64) -> Result<Vec<f64>> {
        if coeffs.len() != self.cfg.n_kl {
            return Err(Error::Shape(format!(
                "expected {} KL coefficients, got {}",
                self.cfg.n_kl,
                coeffs.len()
            )));
        }
        let z = self.cfg.normalization();
        Ok(eigenvalues(&self.cfg, s)?
            .iter()
            .zip(coeffs)
            .map(|(lam, beta)| lam.sqrt() * beta / z)
            .collect())
    }

    /// Type-I DCT synthesis of `sum_k amps[k-1] cos(pi k m / M)` through an
    /// FFT of length `2M`.
    fn synthesize(&self, amps: &[f64], mean_offset: f64) -> Vec<f64> {
        let n = self.cfg.grid_n;
        let big_m = n - 1;
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * big_m];
        let in_range = amps.len().min(big_m);
        for k in 1..=in_range {
            buf[k].re = amps[k - 1];
            if k < big_m {
                buf[2 * big_m - k].re = amps[k - 1];
            }
        }
        self.fft.process(&mut buf);
        let last = if in_range == big_m { amps[big_m - 1] } else { 0.0 };
        let mut values: Vec<f64> = (0..n)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                mean_offset + 0.5 * (buf[m % (2 * big_m)].re + sign * last)
            })
            .collect();
        // Modes beyond the Nyquist index alias on this grid; add them directly.
        for (k0, a) in amps.iter().enumerate().skip(big_m) {
            let k = (k0 + 1) as f64;
            for (m, v) in values.iter_mut().enumerate() {
                *v += a * (PI * k * m as f64 / big_m as f64).cos();
            }
        }
        values
    }

    fn finish(&self, values: Vec<f64>, coeffs: &[f64], mean_offset: f64, s: f64) -> Result<SeabedCurve> {
        if let Some((m, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > self.cfg.y_min && **v < self.cfg.y_max))
        {
            return Err(Error::Domain(format!(
                "curve leaves ({}, {}) at grid point {m} (h = {v})",
                self.cfg.y_min, self.cfg.y_max
            )));
        }
        Ok(SeabedCurve {
            grid: self.cfg.grid(),
            values,
            coeffs: Some(coeffs.to_vec()),
            s: Some(s),
            mean_offset,
        })
    }

    /// Draws i.i.d. standard normal coefficients and assembles the curve,
    /// redrawing (at most [`MAX_PRIOR_ATTEMPTS`] times) when it leaves the
    /// vertical extent.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R, s: f64, mean_offset: f64) -> Result<SeabedCurve> {
        let mut last_err = None;
        for _ in 0..MAX_PRIOR_ATTEMPTS {
            let coeffs = standard_normal_vec(rng, self.cfg.n_kl);
            match self.assemble(&coeffs, mean_offset, s) {
                Ok(curve) => return Ok(curve),
                Err(e @ Error::Domain(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Domain("prior sampling failed".into())))
    }
}

/// Convenience wrapper over [`KlBasis::assemble`].
pub fn kl_assemble(coeffs: &[f64], mean_offset: f64, cfg: &KlConfig, s: f64) -> Result<SeabedCurve> {
    KlBasis::new(*cfg)?.assemble(coeffs, mean_offset, s)
}

pub fn sample_prior<R: Rng + ?Sized>(rng: &mut R, cfg: &KlConfig, s: f64, mean_offset: f64) -> Result<SeabedCurve> {
    KlBasis::new(*cfg)?.sample_prior(rng, s, mean_offset)
}

pub fn sample_s_prior<R: Rng + ?Sized>(rng: &mut R, bounds: SBounds) -> RegularityParam {
    if bounds.lo == bounds.hi {
        return RegularityParam(bounds.lo);
    }
    let u: f64 = rng.random();
    RegularityParam(bounds.lo + u * (bounds.hi - bounds.lo))
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generator for seabeds that are not draws of the KL prior: smoothed,
/// mean-free and rescaled white noise on a periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutOfPriorConfig {
    pub coarse_n: usize,
    pub fine_n: usize,
    pub kernel_width: f64,
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for OutOfPriorConfig {
    fn default() -> Self {
        Self {
            coarse_n: 64,
            fine_n: 512,
            kernel_width: 0.25,
            amplitude: 0.25,
            a: -3.0,
            b: 3.0,
        }
    }
}

impl OutOfPriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_n == 0 || self.fine_n % self.coarse_n != 0 {
            return Err(Error::Config(format!(
                "coarse_n = {} must divide fine_n = {}",
                self.coarse_n, self.fine_n
            )));
        }
        if !(self.kernel_width > 0.0) || !(self.amplitude > 0.0) || !(self.a < self.b) {
            return Err(Error::Config("kernel_width, amplitude must be positive and a < b".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.b - self.a
    }

    pub fn fine_spacing(&self) -> f64 {
        self.period() / self.fine_n as f64
    }
}

/// Periodic linear interpolation of `coarse` onto `fine_n` points.
pub fn periodic_interpolate(coarse: &[f64], fine_n: usize) -> Vec<f64> {
    let n = coarse.len();
    let ratio = fine_n / n;
    (0..fine_n)
        .map(|m| {
            let i = m / ratio;
            let t = (m % ratio) as f64 / ratio as f64;
            coarse[i] * (1.0 - t) + coarse[(i + 1) % n] * t
        })
        .collect()
}

/// Periodic Gaussian kernel `exp(-(d / width)^2 / 2) / z` sampled on `n`
/// points of spacing `dx`, with `d` the periodic distance to index 0 and `z`
/// chosen so that the discrete integral `sum k * dx` is one.
pub fn periodic_gaussian_kernel(n: usize, dx: f64, width: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..n)
        .map(|m| {
            let d = m.min(n - m) as f64 * dx;
            (-(d / width).powi(2) / 2.0).exp()
        })
        .collect();
    let z: f64 = k.iter().sum::<f64>() * dx;
    k.iter_mut().for_each(|v| *v /= z);
    k
}

/// Circular convolution `(k * f)_m = sum_n k_{m-n} f_n dx` through FFT.
pub fn circular_convolve(kernel: &[f64], signal: &[f64], dx: f64) -> Vec<f64> {
    let n = signal.len();
    assert_eq!(kernel.len(), n, "kernel and signal lengths differ");
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut kf: Vec<Complex<f64>> = kernel.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut sf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut kf);
    fwd.process(&mut sf);
    let mut prod: Vec<Complex<f64>> = kf.iter().zip(&sf).map(|(a, b)| a * b).collect();
    inv.process(&mut prod);
    let scale = dx / n as f64;
    prod.iter().map(|c| c.re * scale).collect()
}

/// Smoothed-white-noise seabed on the periodic grid of `oop`.
///
/// Returns the curve on `fine_n + 1` points over `[a, b]`; the last point
/// repeats the first by periodicity. The `fine_n` periodic values sum to
/// zero and their maximum magnitude equals `amplitude`.
pub fn out_of_prior_seabed<R: Rng + ?Sized>(rng: &mut R, oop: &OutOfPriorConfig) -> Result<SeabedCurve> {
    oop.validate()?;
    let p = standard_normal_vec(rng, oop.coarse_n);
    let periodic = smooth_white_noise(&p, oop)?;
    let mut values = periodic.clone();
    values.push(periodic[0]);
    Ok(SeabedCurve {
        grid: Grid1d::new(oop.a, oop.b, oop.fine_n + 1)?,
        values,
        coeffs: None,
        s: None,
        mean_offset: 0.0,
    })
}

/// Interpolate, convolve, remove the mean and rescale a coarse noise vector.
pub fn smooth_white_noise(coarse: &[f64], oop: &OutOfPriorConfig) -> Result<Vec<f64>> {
    oop.validate()?;
    if coarse.len() != oop.coarse_n {
        return Err(Error::Shape(format!("expected {} noise values, got {}", oop.coarse_n, coarse.len())));
    }
    let dx = oop.fine_spacing();
    let fine = periodic_interpolate(coarse, oop.fine_n);
    let kernel = periodic_gaussian_kernel(oop.fine_n, dx, oop.kernel_width);
    let mut smooth = circular_convolve(&kernel, &fine, dx);
    let mean = smooth.iter().sum::<f64>() / smooth.len() as f64;
    smooth.iter_mut().for_each(|v| *v -= mean);
    let peak = smooth.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::Degenerate("smoothed noise is identically zero".into()));
    }
    let scale = oop.amplitude / peak;
    smooth.iter_mut().for_each(|v| *v *= scale);
    // Rescaling perturbs the zero mean at rounding level; remove it again
    // without letting the extremes cross the bound.
    let drift = smooth.iter().sum::<f64>() / smooth.len() as f64;
    smooth.iter_mut().for_each(|v| *v = (*v - drift).clamp(-oop.amplitude, oop.amplitude));
    Ok(smooth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n_kl: usize, grid_n: usize, ell: f64) -> KlConfig {
        KlConfig { n_kl, grid_n, ell, ..KlConfig::default() }
    }

    #[test]
    fn eigenvalue_closed_form() {
        let c = cfg(4, 16, 1.0);
        let lam = eigenvalues(&c, 0.75).unwrap();
        assert!((lam[0] - 2f64.powf(-1.5)).abs() < 1e-12);
        assert!((lam[0] - 0.353553).abs() < 1e-6);

        let c = cfg(4, 16, 0.2);
        let lam = eigenvalues(&c, 1.0).unwrap();
        assert!((lam[1] - 29f64.powi(-2)).abs() < 1e-15);
        assert!((lam[1] - 1.18906e-3).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_strictly_decrease() {
        for s in [0.5, 0.75, 2.0, 5.0] {
            let lam = eigenvalues(&cfg(64, 128, 1.0), s).unwrap();
            assert!(lam.windows(2).all(|w| w[0] / w[1] > 1.0), "s = {s}");
        }
    }

    #[test]
    fn eigenvalue_domain_errors() {
        assert!(matches!(eigenvalues(&cfg(4, 8, 1.0), 0.0), Err(Error::Domain(_))));
        assert!(matches!(eigenvalues(&cfg(4, 8, 1.0), -1.0), Err(Error::Domain(_))));
        assert!(matches!(eigenvalues(&cfg(4, 8, 0.0), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn eigenvalue_decay_bound() {
        for s in [0.5, 0.75, 1.5, 3.0] {
            // With l = 1 the constant lam_1 * 2^(4s) dominates the whole tail.
            let lam = eigenvalues(&cfg(256, 512, 1.0), s).unwrap();
            let c_plus = lam[0] * 2f64.powf(4.0 * s);
            for (j0, l) in lam.iter().enumerate() {
                let j = (j0 + 1) as f64;
                assert!(*l <= c_plus * j.powf(-4.0 * s) * (1.0 + 1e-12));
            }
            // For any l, lam_j <= j^(-4s).
            for ell in [0.05, 0.2, 3.0] {
                let lam = eigenvalues(&cfg(256, 512, ell), s).unwrap();
                for (j0, l) in lam.iter().enumerate() {
                    assert!(*l <= ((j0 + 1) as f64).powf(-4.0 * s));
                }
            }
        }
    }

    #[test]
    fn basis_endpoint_values_and_normalization() {
        let c = cfg(8, 512, 1.0);
        let z = c.normalization();
        assert!((z - 3f64.sqrt()).abs() < 1e-15);
        let e1 = basis_eval(1, &c).unwrap();
        assert!((e1[0] - 1.0 / z).abs() < 1e-15);
        assert!((e1[511] + 1.0 / z).abs() < 1e-15);
    }

    #[test]
    fn basis_index_errors() {
        let c = cfg(8, 16, 1.0);
        assert!(matches!(basis_eval(0, &c), Err(Error::Index { .. })));
        assert!(matches!(basis_eval(9, &c), Err(Error::Index { index: 9, max: 8 })));
    }

    #[test]
    fn basis_gram_is_identity() {
        let c = cfg(64, 512, 1.0);
        let grid = c.grid();
        let basis: Vec<Vec<f64>> = (1..=64).map(|j| basis_eval(j, &c).unwrap()).collect();
        for i in 0..64 {
            for j in 0..64 {
                let g = grid.inner(&basis[i], &basis[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "({i},{j}) -> {g}");
            }
        }
    }

    #[test]
    fn basis_endpoint_first_difference_is_second_order() {
        // (e_j(x_1) - e_j(x_0)) shrinks by 4 when the grid spacing halves.
        for j in [1usize, 3, 7] {
            let diffs: Vec<f64> = [65usize, 129, 257, 513]
                .iter()
                .map(|&n| {
                    let e = basis_eval(j, &cfg(8, n, 1.0)).unwrap();
                    (e[1] - e[0]).abs().max((e[n - 1] - e[n - 2]).abs())
                })
                .collect();
            for w in diffs.windows(2) {
                let ratio = w[0] / w[1];
                assert!((ratio - 4.0).abs() < 0.1, "j = {j}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn zero_expansion_is_constant() {
        let basis = KlBasis::new(cfg(16, 64, 1.0)).unwrap();
        let curve = basis.assemble(&[0.0; 16], -0.3, 1.0).unwrap();
        assert!(curve.values.iter().all(|v| (*v + 0.3).abs() < 1e-15));
    }

    #[test]
    fn single_mode_expansion() {
        let c = cfg(16, 64, 1.0);
        let basis = KlBasis::new(c).unwrap();
        let mut coeffs = vec![0.0; 16];
        coeffs[0] = 1.0;
        let curve = basis.assemble(&coeffs, 0.1, 0.75).unwrap();
        let lam1 = eigenvalues(&c, 0.75).unwrap()[0];
        let e1 = basis_eval(1, &c).unwrap();
        for (v, e) in curve.values.iter().zip(&e1) {
            assert!((v - (0.1 + lam1.sqrt() * e)).abs() < 1e-14);
        }
    }

    #[test]
    fn full_band_uses_last_mode_and_aliases() {
        // n_kl = grid_n exercises both the Nyquist term and the aliased tail.
        let c = cfg(16, 16, 1.0);
        let basis = KlBasis::new(c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = standard_normal_vec(&mut rng, 16);
        let fast = basis.assemble(&coeffs, 0.0, 0.6).unwrap();
        let slow = basis.assemble_direct(&coeffs, 0.0, 0.6).unwrap();
        assert!(fast.max_abs_deviation(&slow) < 1e-12);
    }

    #[test]
    fn leaving_domain_is_an_error() {
        let basis = KlBasis::new(cfg(4, 32, 1.0)).unwrap();
        let err = basis.assemble(&[0.0; 4], 1.6, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let err = basis.assemble(&[0.0; 4], 0.0, 1.0);
        assert!(err.is_ok());
    }

    #[test]
    fn prior_sampling_is_seed_deterministic() {
        let basis = KlBasis::new(cfg(32, 128, 0.2)).unwrap();
        let a = basis.sample_prior(&mut ChaCha8Rng::seed_from_u64(11), 0.75, 0.0).unwrap();
        let b = basis.sample_prior(&mut ChaCha8Rng::seed_from_u64(11), 0.75, 0.0).unwrap();
        assert_eq!(a, b);
        let c = basis.sample_prior(&mut ChaCha8Rng::seed_from_u64(12), 0.75, 0.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prior_sampling_gives_up_on_unreachable_extent() {
        let c = KlConfig { n_kl: 4, grid_n: 16, y_min: -1e-9, y_max: 1e-9, ..KlConfig::default() };
        let basis = KlBasis::new(c).unwrap();
        let err = basis.sample_prior(&mut ChaCha8Rng::seed_from_u64(1), 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn s_prior_degenerate_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(sample_s_prior(&mut rng, SBounds { lo: 1.0, hi: 1.0 }).0, 1.0);
        for _ in 0..1000 {
            let s = sample_s_prior(&mut rng, SBounds::default()).0;
            assert!((0.5..=5.0).contains(&s));
        }
    }

    #[test]
    fn curve_interpolation() {
        let grid = Grid1d::new(0.0, 1.0, 3).unwrap();
        let curve = SeabedCurve {
            grid,
            values: vec![0.0, 1.0, 0.0],
            coeffs: None,
            s: None,
            mean_offset: 0.0,
        };
        assert!((curve.height_at(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((curve.height_at(1.0).unwrap()).abs() < 1e-15);
        assert!(curve.height_at(1.5).is_err());
    }

    #[test]
    fn out_of_prior_config_validation() {
        let bad = OutOfPriorConfig { coarse_n: 60, ..OutOfPriorConfig::default() };
        assert!(bad.validate().is_err());
        let bad = OutOfPriorConfig { kernel_width: 0.0, ..OutOfPriorConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn out_of_prior_zero_noise_is_degenerate() {
        let oop = OutOfPriorConfig::default();
        let err = smooth_white_noise(&vec![0.0; 64], &oop).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn kernel_integrates_to_one() {
        let k = periodic_gaussian_kernel(512, 6.0 / 512.0, 0.25);
        let total: f64 = k.iter().sum::<f64>() * 6.0 / 512.0;
        assert!((total - 1.0).abs() < 1e-14);
        assert!((k[1] - k[511]).abs() < 1e-15);
    }
}
