use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{accept, adapt_step, mh_propose_s, pcn_propose, AdaptConfig};
use super::{ChainSample, Phase, Potential, SampleSet};
use crate::error::{Error, Result};
use crate::prior::SBounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub beta_h: f64,
    pub beta_s: f64,
    pub n_sample: usize,
    pub n_inner_h: usize,
    /// Zero keeps `s` fixed.
    pub n_inner_s: usize,
    pub phase: Phase,
    pub adapt: AdaptConfig,
    pub bounds: SBounds,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            beta_h: 0.1,
            beta_s: 0.1,
            n_sample: 1000,
            n_inner_h: 1,
            n_inner_s: 0,
            phase: Phase::WarmUp,
            adapt: AdaptConfig::default(),
            bounds: SBounds::default(),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_h > 0.0 && self.beta_h <= 1.0) {
            return Err(Error::Config(format!("beta_h must lie in (0, 1], got {}", self.beta_h)));
        }
        if !(self.beta_s >= 0.0) || !self.beta_s.is_finite() {
            return Err(Error::Config(format!("beta_s must be non-negative, got {}", self.beta_s)));
        }
        if !(self.adapt.target > 0.0 && self.adapt.target < 1.0) || !(self.adapt.kappa0 >= 0.0) {
            return Err(Error::Config("adaptation target must lie in (0, 1) and kappa0 >= 0".into()));
        }
        self.bounds.validate()
    }
}

/// Current position of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub beta: Vec<f64>,
    pub s: f64,
    pub phi: f64,
    /// Number of outer iterations already performed.
    pub iteration: usize,
}

impl GibbsState {
    pub fn new<P: Potential + ?Sized>(beta: Vec<f64>, s: f64, potential: &mut P) -> Result<Self> {
        let phi = potential.phi(&beta, s)?;
        if !phi.is_finite() {
            return Err(Error::Domain(format!("initial state has potential {phi}")));
        }
        Ok(Self { beta, s, phi, iteration: 0 })
    }
}

/// Metropolis-within-Gibbs: per outer iteration `n_inner_h` pCN updates of
/// `beta` at fixed `s`, then `n_inner_s` random-walk updates of `s` at fixed
/// `beta`. Only outer states are stored. Returns the samples and the final
/// state; step sizes adapted during warm-up are reported in the sample set.
pub fn gibbs_run<P: Potential + ?Sized, R: Rng + ?Sized>(
    cfg: &SamplerConfig,
    potential: &mut P,
    init: GibbsState,
    rng: &mut R,
) -> Result<(SampleSet, GibbsState)> {
    cfg.validate()?;
    if !cfg.bounds.contains(init.s) {
        return Err(Error::Domain(format!("initial s = {} outside [{}, {}]", init.s, cfg.bounds.lo, cfg.bounds.hi)));
    }
    let mut state = init;
    let mut out = SampleSet::new(state.beta.len());
    let (mut beta_h, mut beta_s) = (cfg.beta_h, cfg.beta_s);
    let s_max_step = cfg.bounds.hi - cfg.bounds.lo;
    for _ in 0..cfg.n_sample {
        let position = state.iteration;
        let wrap = |e: Error| Error::Chain { position, source: Box::new(e) };
        let t = position + 1;

        let mut acc_h = 0usize;
        for _ in 0..cfg.n_inner_h {
            let proposal = pcn_propose(&state.beta, beta_h, rng);
            let phi = potential.phi(&proposal, state.s).map_err(wrap)?;
            if accept(state.phi, phi, rng).map_err(wrap)? {
                state.beta = proposal;
                state.phi = phi;
                acc_h += 1;
            }
        }
        let rate_h = if cfg.n_inner_h > 0 { acc_h as f64 / cfg.n_inner_h as f64 } else { 0.0 };
        if cfg.phase == Phase::WarmUp && cfg.n_inner_h > 0 {
            beta_h = adapt_step(beta_h, rate_h, t, cfg.adapt, 1.0);
        }

        let mut acc_s = 0usize;
        for _ in 0..cfg.n_inner_s {
            let Some(s_new) = mh_propose_s(state.s, beta_s, rng, cfg.bounds) else {
                continue;
            };
            let phi = potential.phi(&state.beta, s_new).map_err(wrap)?;
            if accept(state.phi, phi, rng).map_err(wrap)? {
                state.s = s_new;
                state.phi = phi;
                acc_s += 1;
            }
        }
        let rate_s = if cfg.n_inner_s > 0 { acc_s as f64 / cfg.n_inner_s as f64 } else { 0.0 };
        if cfg.phase == Phase::WarmUp && cfg.n_inner_s > 0 && beta_s > 0.0 {
            beta_s = adapt_step(beta_s, rate_s, t, cfg.adapt, s_max_step);
        }

        out.samples.push(ChainSample {
            iteration: position,
            walker: 0,
            s: state.s,
            phi: state.phi,
            accepted_h_rate: rate_h,
            accepted_s_rate: rate_s,
            coeffs: state.beta.clone(),
        });
        state.iteration += 1;
    }
    out.beta_h = beta_h;
    out.beta_s = beta_s;
    Ok((out, state))
}

/// Warm-up of `n_warmup` iterations followed by `cfg.n_sample` online
/// iterations with the adapted step sizes, all driven by `cfg.seed`.
pub fn run_with_warmup<P: Potential + ?Sized>(
    cfg: &SamplerConfig,
    n_warmup: usize,
    potential: &mut P,
    init: GibbsState,
) -> Result<(SampleSet, SampleSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let warm_cfg = SamplerConfig { n_sample: n_warmup, phase: Phase::WarmUp, ..cfg.clone() };
    let (warm, state) = gibbs_run(&warm_cfg, potential, init, &mut rng)?;
    let (beta_h, beta_s) = if n_warmup > 0 { (warm.beta_h, warm.beta_s) } else { (cfg.beta_h, cfg.beta_s) };
    let online_cfg = SamplerConfig { phase: Phase::Online, beta_h, beta_s, ..cfg.clone() };
    let (online, _) = gibbs_run(&online_cfg, potential, state, &mut rng)?;
    Ok((warm, online))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{FnPotential, ZeroPotential};

    fn init(n: usize, s: f64) -> GibbsState {
        GibbsState::new(vec![0.0; n], s, &mut ZeroPotential).unwrap()
    }

    #[test]
    fn empty_run() {
        let cfg = SamplerConfig { n_sample: 0, ..SamplerConfig::default() };
        let (set, _) = gibbs_run(&cfg, &mut ZeroPotential, init(4, 1.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.n_kl, 4);
    }

    #[test]
    fn zero_beta_s_freezes_s() {
        let cfg = SamplerConfig {
            n_sample: 50,
            n_inner_s: 3,
            beta_s: 0.0,
            phase: Phase::Online,
            ..SamplerConfig::default()
        };
        let (set, _) = gibbs_run(&cfg, &mut ZeroPotential, init(3, 1.7), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(set.s_chain().iter().all(|&s| s == 1.7));
    }

    #[test]
    fn online_phase_freezes_steps() {
        let cfg = SamplerConfig { n_sample: 30, n_inner_s: 2, phase: Phase::Online, ..SamplerConfig::default() };
        let (set, _) = gibbs_run(&cfg, &mut ZeroPotential, init(3, 2.0), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!((set.beta_h, set.beta_s), (cfg.beta_h, cfg.beta_s));
    }

    #[test]
    fn improving_moves_are_accepted() {
        // Phi strictly decreasing towards the origin.
        let mut pot = FnPotential(|b: &[f64], _s: f64| Ok(b.iter().map(|x| x * x).sum::<f64>()));
        let cfg = SamplerConfig { n_sample: 300, n_inner_h: 1, phase: Phase::Online, beta_h: 0.5, ..SamplerConfig::default() };
        let start = GibbsState::new(vec![1.0; 5], 1.0, &mut pot).unwrap();
        let (set, _) = gibbs_run(&cfg, &mut pot, start, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut prev = set.samples[0].phi;
        for c in &set.samples[1..] {
            if c.accepted_h_rate == 0.0 {
                assert_eq!(c.phi, prev);
            }
            prev = c.phi;
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = SamplerConfig { n_sample: 40, n_inner_h: 2, n_inner_s: 2, seed: 17, ..SamplerConfig::default() };
        let mut pot = FnPotential(|b: &[f64], s: f64| Ok(0.5 * b[0] * b[0] + (s - 1.0).powi(2)));
        let a = run_with_warmup(&cfg, 20, &mut pot, GibbsState::new(vec![0.1; 3], 1.0, &mut ZeroPotential).unwrap()).unwrap();
        let b = run_with_warmup(&cfg, 20, &mut pot, GibbsState::new(vec![0.1; 3], 1.0, &mut ZeroPotential).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.samples[0].iteration, 20);
    }

    #[test]
    fn errors_carry_chain_position() {
        let mut calls = 0;
        let mut pot = FnPotential(|_: &[f64], _: f64| {
            calls += 1;
            if calls > 6 {
                Err(Error::Instability { step: 3, reason: "test".into() })
            } else {
                Ok(0.0)
            }
        });
        let start = GibbsState::new(vec![0.0; 2], 1.0, &mut pot).unwrap();
        let cfg = SamplerConfig { n_sample: 10, ..SamplerConfig::default() };
        let err = gibbs_run(&cfg, &mut pot, start, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Chain { position: 5, .. }), "{err}");
        assert!(err.is_numerical());
    }
}
