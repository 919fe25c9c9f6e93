//! Posterior samplers in whitened KL coordinates.
//!
//! The state is the standard-normal coefficient vector `beta` together with
//! the regularity `s`; the seabed is `m + sum_j sqrt(lambda_j(s)) beta_j e_j`.
//! Under the prior `beta ~ N(0, I)` independently of `s`, so the pCN kernel
//! needs only the potential `Phi`.

mod fes;
mod gibbs;
mod kernels;

use serde::{Deserialize, Serialize};

use crate::bayes::ForwardModel;
use crate::error::Result;

pub use fes::{fes_run, FesConfig, FesOutput};
pub use gibbs::{gibbs_run, run_with_warmup, GibbsState, SamplerConfig};
pub use kernels::{accept, adapt_step, mh_propose_s, pcn_propose, AdaptConfig};

/// Negative log-likelihood as a function of the sampler state. Returning
/// `+inf` rejects the state.
pub trait Potential {
    fn phi(&mut self, beta: &[f64], s: f64) -> Result<f64>;
}

/// `Phi = 0`: the chain targets the prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn phi(&mut self, _beta: &[f64], _s: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Adapts a closure into a [`Potential`].
pub struct FnPotential<F>(pub F);

impl<F: FnMut(&[f64], f64) -> Result<f64>> Potential for FnPotential<F> {
    fn phi(&mut self, beta: &[f64], s: f64) -> Result<f64> {
        (self.0)(beta, s)
    }
}

impl Potential for ForwardModel {
    fn phi(&mut self, beta: &[f64], s: f64) -> Result<f64> {
        ForwardModel::phi(self, beta, s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Step sizes are adapted after every inner loop.
    #[default]
    WarmUp,
    /// Step sizes are frozen.
    Online,
}

/// One stored state of a chain (or of one ensemble walker).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub iteration: usize,
    pub walker: usize,
    pub s: f64,
    pub phi: f64,
    /// Fraction of accepted `h` (resp. `s`) proposals in the inner loop that
    /// produced this sample.
    pub accepted_h_rate: f64,
    pub accepted_s_rate: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n_kl: usize,
    pub samples: Vec<ChainSample>,
    /// Step sizes in effect at the end of the run.
    pub beta_h: f64,
    pub beta_s: f64,
}

impl SampleSet {
    pub fn new(n_kl: usize) -> Self {
        Self { n_kl, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn s_chain(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.s).collect()
    }

    pub fn coeff_chain(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|c| c.coeffs[j]).collect()
    }

    pub fn phi_chain(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.phi).collect()
    }

    /// Mean acceptance rates of the `h` and `s` blocks.
    pub fn acceptance(&self) -> (f64, f64) {
        if self.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.len() as f64;
        (
            self.samples.iter().map(|c| c.accepted_h_rate).sum::<f64>() / n,
            self.samples.iter().map(|c| c.accepted_s_rate).sum::<f64>() / n,
        )
    }

    /// Samples with `iteration >= from`.
    pub fn after(&self, from: usize) -> Self {
        Self { samples: self.samples.iter().filter(|c| c.iteration >= from).cloned().collect(), ..self.clone() }
    }
}
