//! Chain summaries: effective sample size, kernel density estimates, HPD
//! intervals, pointwise credibility bands and the posterior-mean seabed.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{KlBasis, SeabedCurve};
use crate::samplers::SampleSet;

/// Shifted by the first element so that constant data average exactly.
fn mean(x: &[f64]) -> f64 {
    let x0 = x[0];
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Normalised autocorrelation `rho_0 = 1, rho_1, ...` of a chain, by FFT.
pub fn autocorrelation(chain: &[f64]) -> Result<Vec<f64>> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("chain of length {n}")));
    }
    let m = mean(chain);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = chain.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64) {
        return Err(Error::Degenerate("constant chain".into()));
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Effective sample size `N / (1 + 2 sum_k rho_k)`, truncating the sum with
/// Geyer's initial positive sequence: pairs `rho_{2m} + rho_{2m+1}` are
/// added while positive.
pub fn ess(chain: &[f64]) -> Result<f64> {
    if chain.len() < 10 {
        return Err(Error::Degenerate(format!("chain of length {} is too short", chain.len())));
    }
    let rho = autocorrelation(chain)?;
    let n = chain.len();
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok(n as f64 / tau.max(1.0 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl Density {
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }

    pub fn mode(&self) -> f64 {
        let k = (0..self.x.len()).max_by(|&a, &b| self.density[a].total_cmp(&self.density[b])).unwrap_or(0);
        self.x[k]
    }
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let sd = variance(samples).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

pub const KDE_POINTS: usize = 256;

/// Gaussian kernel density estimate on a 256-point grid spanning the data
/// plus four bandwidths on each side. `bandwidth = None` uses Silverman's rule.
pub fn kde(samples: &[f64], bandwidth: Option<f64>) -> Result<Density> {
    if samples.len() < 10 {
        return Err(Error::Degenerate(format!("{} samples are too few for a density estimate", samples.len())));
    }
    let bw = match bandwidth {
        Some(b) if b > 0.0 => b,
        Some(b) => return Err(Error::Config(format!("bandwidth must be positive, got {b}"))),
        None => silverman_bandwidth(samples)?,
    };
    if !(variance(samples) > 0.0) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bw;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bw;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let x: Vec<f64> = (0..KDE_POINTS).map(|i| lo + i as f64 * step).collect();
    let norm = 1.0 / (samples.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let density = x
        .iter()
        .map(|&xi| norm * samples.iter().map(|&s| (-0.5 * ((xi - s) / bw).powi(2)).exp()).sum::<f64>())
        .collect();
    Ok(Density { x, density, bandwidth: bw })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 2);
    let t = pos - i as f64;
    sorted[i] + t * (sorted[i + 1] - sorted[i])
}

/// Equal-tailed interval containing probability `level`.
pub fn equal_tailed(samples: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    (quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail))
}

/// Shortest interval containing `ceil(level N)` of the sorted samples.
pub fn hpd(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 20 {
        return Err(Error::Degenerate(format!("{} samples are too few for an HPD interval", samples.len())));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("HPD level must lie in (0, 1], got {level}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(hpd_sorted(&sorted, level))
}

fn hpd_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let n = sorted.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let best = (0..=n - k)
        .min_by(|&a, &b| (sorted[a + k - 1] - sorted[a]).total_cmp(&(sorted[b + k - 1] - sorted[b])))
        .unwrap_or(0);
    (sorted[best], sorted[best + k - 1])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandMethod {
    #[default]
    EqualTailed,
    Hpd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityBand {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mean: Vec<f64>,
    pub level: f64,
}

impl CredibilityBand {
    pub fn contains(&self, i: usize, value: f64) -> bool {
        self.lower[i] <= value && value <= self.upper[i]
    }

    /// Fraction of grid points with `x` in `[lo, hi]` where `curve` lies in the band.
    pub fn coverage(&self, curve: &[f64], lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = (0..self.x.len()).filter(|&i| self.x[i] >= lo && self.x[i] <= hi).collect();
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().filter(|&&i| self.contains(i, curve[i])).count() as f64 / idx.len() as f64
    }
}

pub const MIN_BAND_SAMPLES: usize = 30;

/// Pointwise credibility band of curves sampled on the grid `x`.
pub fn credibility_band(x: &[f64], curves: &[Vec<f64>], level: f64, method: BandMethod) -> Result<CredibilityBand> {
    if curves.len() < MIN_BAND_SAMPLES {
        return Err(Error::Degenerate(format!(
            "{} curves are too few for a band (need {MIN_BAND_SAMPLES})",
            curves.len()
        )));
    }
    if curves.iter().any(|c| c.len() != x.len()) {
        return Err(Error::Shape("curves and grid differ in length".into()));
    }
    let mut lower = Vec::with_capacity(x.len());
    let mut upper = Vec::with_capacity(x.len());
    let mut mean_curve = Vec::with_capacity(x.len());
    let mut column = vec![0.0; curves.len()];
    for i in 0..x.len() {
        for (c, v) in curves.iter().zip(column.iter_mut()) {
            *v = c[i];
        }
        let m = mean(&column);
        column.sort_by(f64::total_cmp);
        let (lo, hi) = match method {
            BandMethod::EqualTailed => {
                let tail = 0.5 * (1.0 - level);
                (quantile_sorted(&column, tail), quantile_sorted(&column, 1.0 - tail))
            }
            BandMethod::Hpd => hpd_sorted(&column, level),
        };
        lower.push(lo.min(m));
        upper.push(hi.max(m));
        mean_curve.push(m);
    }
    Ok(CredibilityBand { x: x.to_vec(), lower, upper, mean: mean_curve, level })
}

/// Seabed assembled from the mean coefficients at the mean regularity (or
/// at `s_fixed` when given).
pub fn posterior_mean_seabed(set: &SampleSet, basis: &KlBasis, mean_offset: f64, s_fixed: Option<f64>) -> Result<SeabedCurve> {
    if set.is_empty() {
        return Err(Error::Degenerate("empty sample set".into()));
    }
    let n = set.len() as f64;
    let mut coeffs = vec![0.0; set.n_kl];
    for c in &set.samples {
        for (acc, v) in coeffs.iter_mut().zip(&c.coeffs) {
            *acc += v / n;
        }
    }
    let s = s_fixed.unwrap_or_else(|| set.samples.iter().map(|c| c.s).sum::<f64>() / n);
    basis.assemble(&coeffs, mean_offset, s)
}

/// Seabed curves of every sample (each at its own `s`).
pub fn sample_curves(set: &SampleSet, basis: &KlBasis, mean_offset: f64) -> Result<Vec<Vec<f64>>> {
    set.samples.iter().map(|c| basis.assemble(&c.coeffs, mean_offset, c.s).map(|h| h.values)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub ess: Option<f64>,
    pub hpd95: Option<(f64, f64)>,
}

pub fn summarize(chain: &[f64]) -> ChainSummary {
    let mut sorted = chain.to_vec();
    sorted.sort_by(f64::total_cmp);
    ChainSummary {
        n: chain.len(),
        mean: if chain.is_empty() { f64::NAN } else { mean(chain) },
        sd: if chain.is_empty() { f64::NAN } else { variance(chain).sqrt() },
        median: if chain.is_empty() { f64::NAN } else { quantile_sorted(&sorted, 0.5) },
        ess: ess(chain).ok(),
        hpd95: hpd(chain, 0.95).ok(),
    }
}
