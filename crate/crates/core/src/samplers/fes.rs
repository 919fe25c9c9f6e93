use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{accept, adapt_step, pcn_propose};
use super::{ChainSample, Potential, SampleSet, SamplerConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FesConfig {
    /// Leading KL modes moved by the ensemble; the rest use pCN.
    pub n_low_modes: usize,
    pub n_walkers: usize,
    /// Initial stretch scale `a` of `z ~ 1/sqrt(z)` on `[1/a, a]`.
    pub stretch: f64,
    pub stretch_floor: f64,
    pub n_warmup: usize,
}

impl Default for FesConfig {
    fn default() -> Self {
        Self { n_low_modes: 10, n_walkers: 40, stretch: 2.0, stretch_floor: 1.2, n_warmup: 0 }
    }
}

impl FesConfig {
    pub fn validate(&self, n_kl: usize) -> Result<()> {
        if self.n_low_modes == 0 || self.n_low_modes > n_kl {
            return Err(Error::Config(format!("n_low_modes must lie in 1..={n_kl}, got {}", self.n_low_modes)));
        }
        if self.n_walkers < 2 * self.n_low_modes || self.n_walkers < 2 {
            return Err(Error::Config(format!(
                "{} walkers are too few for {} ensemble modes",
                self.n_walkers, self.n_low_modes
            )));
        }
        if !(self.stretch_floor > 1.0) || !(self.stretch >= self.stretch_floor) {
            return Err(Error::Config(format!(
                "stretch {} must be at least its floor {} > 1",
                self.stretch, self.stretch_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FesOutput {
    pub warmup: SampleSet,
    /// Pooled post-warm-up states of all walkers.
    pub online: SampleSet,
    pub stretch: f64,
    pub walkers: Vec<Vec<f64>>,
}

/// Draws `z` with density proportional to `1/sqrt(z)` on `[1/a, a]`.
fn stretch_factor<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let r = 1.0 + (a - 1.0) * u;
    r * r / a
}

fn degenerate(walkers: &[Vec<f64>], n_low: usize) -> bool {
    walkers.windows(2).all(|w| w[0][..n_low] == w[1][..n_low])
}

/// Ensemble sampler at fixed `s`: affine-invariant stretch moves on the
/// leading `n_low_modes` coefficients (walkers updated one after another)
/// alternating with pCN updates of the remaining coefficients of each walker.
/// `sampler.n_sample` counts online sweeps; `sampler.beta_h`,
/// `sampler.adapt` and `sampler.seed` configure the pCN block and the
/// warm-up adaptation.
pub fn fes_run<P: Potential + ?Sized>(
    cfg: &FesConfig,
    sampler: &SamplerConfig,
    potential: &mut P,
    s: f64,
    init: Vec<Vec<f64>>,
) -> Result<FesOutput> {
    sampler.validate()?;
    let n_kl = init.first().map_or(0, Vec::len);
    cfg.validate(n_kl)?;
    if init.len() != cfg.n_walkers || init.iter().any(|w| w.len() != n_kl) {
        return Err(Error::Shape(format!("expected {} walkers of length {n_kl}", cfg.n_walkers)));
    }
    let d = cfg.n_low_modes;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut walkers = init;
    let mut phis = walkers.iter().map(|w| potential.phi(w, s)).collect::<Result<Vec<_>>>()?;
    if let Some(k) = phis.iter().position(|p| !p.is_finite()) {
        return Err(Error::Domain(format!("walker {k} starts with potential {}", phis[k])));
    }
    let low_prior = |w: &[f64]| 0.5 * w[..d].iter().map(|x| x * x).sum::<f64>();

    let mut a = cfg.stretch;
    let mut beta_h = sampler.beta_h;
    let mut warmup = SampleSet::new(n_kl);
    let mut online = SampleSet::new(n_kl);
    let total = cfg.n_warmup + sampler.n_sample;
    for sweep in 0..total {
        let warming = sweep < cfg.n_warmup;
        let wrap = |e: Error| Error::Chain { position: sweep, source: Box::new(e) };
        if degenerate(&walkers, d) {
            return Err(wrap(Error::Degenerate("all walkers coincide in the ensemble modes".into())));
        }
        let mut acc_stretch = 0usize;
        let mut acc_pcn = 0usize;
        for k in 0..cfg.n_walkers {
            // Stretch move towards a uniformly chosen partner.
            let mut j = rng.random_range(0..cfg.n_walkers - 1);
            if j >= k {
                j += 1;
            }
            let z = stretch_factor(a, &mut rng);
            let mut proposal = walkers[k].clone();
            for m in 0..d {
                proposal[m] = walkers[j][m] + z * (walkers[k][m] - walkers[j][m]);
            }
            let phi = potential.phi(&proposal, s).map_err(wrap)?;
            let log_ratio = (d as f64 - 1.0) * z.ln() + (phis[k] + low_prior(&walkers[k])) - (phi + low_prior(&proposal));
            let u: f64 = rng.random();
            if phi.is_finite() && u.ln() < log_ratio {
                walkers[k] = proposal;
                phis[k] = phi;
                acc_stretch += 1;
            }

            if d < n_kl {
                let tail = pcn_propose(&walkers[k][d..], beta_h, &mut rng);
                let mut proposal = walkers[k].clone();
                proposal[d..].copy_from_slice(&tail);
                let phi = potential.phi(&proposal, s).map_err(wrap)?;
                if accept(phis[k], phi, &mut rng).map_err(wrap)? {
                    walkers[k] = proposal;
                    phis[k] = phi;
                    acc_pcn += 1;
                }
            }
        }
        let rate_stretch = acc_stretch as f64 / cfg.n_walkers as f64;
        let rate_pcn = if d < n_kl { acc_pcn as f64 / cfg.n_walkers as f64 } else { 0.0 };
        if warming {
            a = adapt_step(a, rate_stretch, sweep + 1, sampler.adapt, f64::INFINITY).max(cfg.stretch_floor);
            if d < n_kl {
                beta_h = adapt_step(beta_h, rate_pcn, sweep + 1, sampler.adapt, 1.0);
            }
        }
        let dest = if warming { &mut warmup } else { &mut online };
        for (k, w) in walkers.iter().enumerate() {
            dest.samples.push(ChainSample {
                iteration: sweep,
                walker: k,
                s,
                phi: phis[k],
                accepted_h_rate: rate_stretch,
                accepted_s_rate: rate_pcn,
                coeffs: w.clone(),
            });
        }
    }
    for set in [&mut warmup, &mut online] {
        set.beta_h = beta_h;
        set.beta_s = a;
    }
    Ok(FesOutput { warmup, online, stretch: a, walkers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::standard_normal_vec;
    use crate::samplers::{FnPotential, ZeroPotential};

    fn walkers(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| standard_normal_vec(&mut rng, dim)).collect()
    }

    #[test]
    fn stretch_factor_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = 2.0;
        let n = 200_000;
        let zs: Vec<f64> = (0..n).map(|_| stretch_factor(a, &mut rng)).collect();
        assert!(zs.iter().all(|&z| (1.0 / a..=a).contains(&z)));
        // E[z] = int sqrt(z) dz / int 1/sqrt(z) dz over [1/a, a].
        let norm = 2.0 * (a.sqrt() - 1.0 / a.sqrt());
        let mean = (2.0 / 3.0) * (a.powf(1.5) - a.powf(-1.5)) / norm;
        let emp = zs.iter().sum::<f64>() / n as f64;
        assert!((emp - mean).abs() < 5e-3, "{emp} vs {mean}");
    }

    #[test]
    fn identical_walkers_are_degenerate() {
        let cfg = FesConfig { n_low_modes: 1, n_walkers: 2, ..FesConfig::default() };
        let sampler = SamplerConfig { n_sample: 3, ..SamplerConfig::default() };
        let err = fes_run(&cfg, &sampler, &mut ZeroPotential, 1.0, vec![vec![0.3, 0.1]; 2]).unwrap_err();
        assert!(matches!(err.root(), Error::Degenerate(_)));
    }

    #[test]
    fn validation() {
        let cfg = FesConfig { n_low_modes: 10, n_walkers: 19, ..FesConfig::default() };
        assert!(cfg.validate(32).is_err());
        let cfg = FesConfig { stretch: 1.1, ..FesConfig::default() };
        assert!(cfg.validate(32).is_err());
        assert!(FesConfig::default().validate(32).is_ok());
        assert!(FesConfig::default().validate(5).is_err());
    }

    #[test]
    fn stretch_respects_floor() {
        // A sharply peaked target drives acceptance (and hence a) down.
        let mut pot = FnPotential(|b: &[f64], _s: f64| Ok(1e4 * b[..2].iter().map(|x| x * x).sum::<f64>()));
        let cfg = FesConfig { n_low_modes: 2, n_walkers: 8, stretch: 1.5, n_warmup: 200, ..FesConfig::default() };
        let sampler = SamplerConfig { n_sample: 0, beta_h: 0.5, ..SamplerConfig::default() };
        let init: Vec<Vec<f64>> = walkers(8, 4, 3).into_iter().map(|w| w.iter().map(|x| x * 0.01).collect()).collect();
        let out = fes_run(&cfg, &sampler, &mut pot, 1.0, init).unwrap();
        assert!(out.stretch >= 1.2);
        assert!(out.warmup.samples.iter().all(|c| c.iteration < 200));
        assert_eq!(out.warmup.len(), 200 * 8);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = FesConfig { n_low_modes: 2, n_walkers: 6, n_warmup: 5, ..FesConfig::default() };
        let sampler = SamplerConfig { n_sample: 10, seed: 8, ..SamplerConfig::default() };
        let a = fes_run(&cfg, &sampler, &mut ZeroPotential, 1.0, walkers(6, 5, 1)).unwrap();
        let b = fes_run(&cfg, &sampler, &mut ZeroPotential, 1.0, walkers(6, 5, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.online.len(), 60);
    }
}
