//! Gaussian noise model and the negative log-likelihood of surface data.
//!
//! ```text
//! Phi = sum_i 1/(2 sigma_i^2) sum_l || y_il - G_il ||^2
//! ```
//!
//! where the norm over sensors uses trapezoidal weights of the surface.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{KlBasis, SeabedCurve};
use crate::solver::{ForwardContext, Measurement, MeasurementMeta};
use crate::sparse::norm2;

/// How `sigma_i` enters the likelihood prefactor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    /// `sigma_i` is a standard deviation: prefactor `1 / (2 sigma_i^2)`.
    #[default]
    Variance,
    /// Prefactor `1 / (2 sigma_i)`.
    Literal,
}

impl NoiseConvention {
    pub fn prefactor(self, sigma: f64) -> f64 {
        match self {
            NoiseConvention::Variance => 0.5 / (sigma * sigma),
            NoiseConvention::Literal => 0.5 / sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub rel_level: f64,
    pub convention: NoiseConvention,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { rel_level: 0.01, convention: NoiseConvention::Variance }
    }
}

/// `rel_level` times the largest snapshot norm, per frequency.
pub fn noise_sigma(clean: &Measurement, rel_level: f64) -> Result<Vec<f64>> {
    if !(rel_level > 0.0) {
        return Err(Error::Config(format!("relative noise level must be positive, got {rel_level}")));
    }
    clean
        .data
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            let peak = ch.iter().map(|snap| norm2(snap)).fold(0.0f64, f64::max);
            if peak == 0.0 {
                Err(Error::Degenerate(format!("frequency channel {i} is identically zero")))
            } else {
                Ok(rel_level * peak)
            }
        })
        .collect()
}

/// Adds independent `N(0, sigma_i^2)` noise to channel `i`.
pub fn add_noise<R: Rng + ?Sized>(clean: &Measurement, sigma: &[f64], rng: &mut R) -> Result<Measurement> {
    if sigma.len() != clean.n_freq() {
        return Err(Error::Shape(format!("{} noise levels for {} channels", sigma.len(), clean.n_freq())));
    }
    let mut out = clean.clone();
    for (ch, &s) in out.data.iter_mut().zip(sigma) {
        for v in ch.iter_mut().flatten() {
            let z: f64 = StandardNormal.sample(rng);
            *v += s * z;
        }
    }
    out.sigma = Some(sigma.to_vec());
    Ok(out)
}

/// Trapezoidal weights of the surface measure at (sorted or unsorted)
/// sensor positions.
pub fn boundary_weights(sensor_xs: &[f64]) -> Vec<f64> {
    let n = sensor_xs.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sensor_xs[a].total_cmp(&sensor_xs[b]));
    let mut w = vec![0.0; n];
    for (r, &k) in order.iter().enumerate() {
        let left = if r > 0 { sensor_xs[k] - sensor_xs[order[r - 1]] } else { 0.0 };
        let right = if r + 1 < n { sensor_xs[order[r + 1]] - sensor_xs[k] } else { 0.0 };
        w[k] = 0.5 * (left + right);
    }
    w
}

/// `sum_k w_k (obs_k - pred_k)^2`.
pub fn nll_snapshot(obs: &[f64], pred: &[f64], weights: &[f64]) -> Result<f64> {
    if obs.len() != pred.len() || obs.len() != weights.len() {
        return Err(Error::Shape(format!(
            "snapshot lengths {} / {} / {} differ",
            obs.len(),
            pred.len(),
            weights.len()
        )));
    }
    Ok(obs.iter().zip(pred).zip(weights).map(|((o, p), w)| w * (o - p) * (o - p)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihoodValue {
    pub total: f64,
    pub per_frequency: Vec<f64>,
}

impl LogLikelihoodValue {
    pub fn infinite(n_freq: usize) -> Self {
        Self { total: f64::INFINITY, per_frequency: vec![f64::INFINITY; n_freq] }
    }
}

/// Observed data together with its noise levels and surface weights.
#[derive(Debug, Clone)]
pub struct Likelihood {
    data: Measurement,
    sigma: Vec<f64>,
    weights: Vec<f64>,
    convention: NoiseConvention,
}

impl Likelihood {
    pub fn new(data: Measurement, convention: NoiseConvention) -> Result<Self> {
        data.check_shape()?;
        let sigma = data
            .sigma
            .clone()
            .ok_or_else(|| Error::Config("measurement carries no noise levels".into()))?;
        if let Some(bad) = sigma.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Config(format!("noise level {bad} is not positive")));
        }
        let weights = boundary_weights(&data.meta.sensor_xs);
        Ok(Self { data, sigma, weights, convention })
    }

    pub fn data(&self) -> &Measurement {
        &self.data
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Phi_i^l` for every frequency `i` and snapshot `l`.
    pub fn per_snapshot(&self, pred: &Measurement) -> Result<Vec<Vec<f64>>> {
        if pred.n_freq() != self.data.n_freq() || pred.n_time() != self.data.n_time() {
            return Err(Error::Shape(format!(
                "prediction is {}x{}, data is {}x{}",
                pred.n_freq(),
                pred.n_time(),
                self.data.n_freq(),
                self.data.n_time()
            )));
        }
        self.data
            .data
            .iter()
            .zip(&pred.data)
            .map(|(obs, prd)| {
                obs.iter().zip(prd).map(|(o, p)| nll_snapshot(o, p, &self.weights)).collect()
            })
            .collect()
    }

    pub fn evaluate(&self, pred: &Measurement) -> Result<LogLikelihoodValue> {
        let per_frequency: Vec<f64> = self
            .per_snapshot(pred)?
            .iter()
            .zip(&self.sigma)
            .map(|(snaps, &s)| self.convention.prefactor(s) * snaps.iter().sum::<f64>())
            .collect();
        Ok(LogLikelihoodValue { total: per_frequency.iter().sum(), per_frequency })
    }
}

/// Checks that data were recorded with the time axis, sensors and
/// frequencies of the forward model (the meshes may differ).
pub fn check_metadata(data: &MeasurementMeta, model: &MeasurementMeta) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(data.dt, model.dt) {
        return Err(Error::Metadata(format!("data dt {} vs model dt {}", data.dt, model.dt)));
    }
    if (data.t_max / data.dt).round() != (model.t_max / model.dt).round() {
        return Err(Error::Metadata(format!("data t_max {} vs model t_max {}", data.t_max, model.t_max)));
    }
    if data.sensor_xs.len() != model.sensor_xs.len()
        || data.sensor_xs.iter().zip(&model.sensor_xs).any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::Metadata("sensor positions differ".into()));
    }
    if data.frequencies.len() != model.frequencies.len()
        || data.frequencies.iter().zip(&model.frequencies).any(|(a, b)| !close(*a, *b))
    {
        return Err(Error::Metadata(format!("data frequencies {:?} vs model {:?}", data.frequencies, model.frequencies)));
    }
    Ok(())
}

/// `Phi_current - Phi_proposed`, the log acceptance ratio of prior-reversible
/// proposals.
pub fn log_posterior_ratio(phi_current: f64, phi_proposed: f64) -> f64 {
    phi_current - phi_proposed
}

/// Negative log-likelihood of whitened KL coefficients and regularity.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub ctx: ForwardContext,
    pub basis: KlBasis,
    pub likelihood: Likelihood,
    pub mean_offset: f64,
    last: Option<(Vec<f64>, f64, LogLikelihoodValue, Measurement)>,
}

impl ForwardModel {
    pub fn new(ctx: ForwardContext, basis: KlBasis, likelihood: Likelihood, mean_offset: f64) -> Result<Self> {
        check_metadata(&likelihood.data().meta, &ctx.meta(None))?;
        let (a, b) = (basis.config().a, basis.config().b);
        let d = ctx.mesh().domain;
        if a > d.x0 || b < d.x1 {
            return Err(Error::Config(format!("prior grid [{a}, {b}] does not cover the mesh [{}, {}]", d.x0, d.x1)));
        }
        Ok(Self { ctx, basis, likelihood, mean_offset, last: None })
    }

    pub fn curve(&self, coeffs: &[f64], s: f64) -> Result<SeabedCurve> {
        self.basis.assemble(coeffs, self.mean_offset, s)
    }

    /// `Phi` at `(coeffs, s)` and the prediction it was computed from.
    /// A curve leaving the domain has infinite `Phi` and no prediction.
    pub fn evaluate(&mut self, coeffs: &[f64], s: f64) -> Result<(LogLikelihoodValue, Option<&Measurement>)> {
        let hit = matches!(&self.last, Some((c, s0, _, _)) if c.as_slice() == coeffs && *s0 == s);
        if !hit {
            let curve = match self.curve(coeffs, s) {
                Ok(c) => c,
                Err(Error::Domain(_)) => return Ok((LogLikelihoodValue::infinite(self.ctx.cfg.frequencies.len()), None)),
                Err(e) => return Err(e),
            };
            let pred = self.ctx.forward(&curve)?;
            let value = self.likelihood.evaluate(&pred)?;
            self.last = Some((coeffs.to_vec(), s, value, pred));
        }
        let (_, _, value, pred) = self.last.as_ref().expect("cached evaluation");
        Ok((value.clone(), Some(pred)))
    }

    pub fn phi(&mut self, coeffs: &[f64], s: f64) -> Result<f64> {
        Ok(self.evaluate(coeffs, s)?.0.total)
    }
}

/// Noise-free data for `h`, then noise at `rel_level` of the peak snapshot norm.
pub fn synthesize<R: Rng + ?Sized>(
    ctx: &ForwardContext,
    h: &SeabedCurve,
    rel_level: f64,
    seed: Option<u64>,
    rng: &mut R,
) -> Result<(Measurement, Measurement)> {
    let mut clean = ctx.forward(h)?;
    clean.meta.seed = seed;
    let sigma = noise_sigma(&clean, rel_level)?;
    let noisy = add_noise(&clean, &sigma, rng)?;
    Ok((clean, noisy))
}
