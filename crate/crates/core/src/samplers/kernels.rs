use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::SBounds;

/// `sqrt(1 - beta_h^2) * coeffs + beta_h * xi` with `xi ~ N(0, I)`.
pub fn pcn_propose<R: Rng + ?Sized>(coeffs: &[f64], beta_h: f64, rng: &mut R) -> Vec<f64> {
    let keep = (1.0 - beta_h * beta_h).max(0.0).sqrt();
    coeffs
        .iter()
        .map(|&c| {
            let xi: f64 = StandardNormal.sample(rng);
            keep * c + beta_h * xi
        })
        .collect()
}

/// Metropolis test with acceptance probability `min(1, exp(phi_current -
/// phi_proposed))`. Always consumes exactly one uniform draw.
pub fn accept<R: Rng + ?Sized>(phi_current: f64, phi_proposed: f64, rng: &mut R) -> Result<bool> {
    let u: f64 = rng.random();
    if phi_current.is_nan() || phi_proposed.is_nan() {
        return Err(Error::Domain("NaN potential in acceptance test".into()));
    }
    if phi_proposed == f64::INFINITY {
        return Ok(false);
    }
    Ok(u < (phi_current - phi_proposed).exp())
}

/// Gaussian random-walk proposal for `s`; `None` if it leaves the bounds
/// (the caller counts that as a rejection). Always consumes one normal draw.
pub fn mh_propose_s<R: Rng + ?Sized>(s: f64, beta_s: f64, rng: &mut R, bounds: SBounds) -> Option<f64> {
    let z: f64 = StandardNormal.sample(rng);
    let proposal = s + beta_s * z;
    bounds.contains(proposal).then_some(proposal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub target: f64,
    pub kappa0: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { target: 0.234, kappa0: 1.0 }
    }
}

/// Robbins–Monro update `beta * exp(kappa0 / sqrt(t) * (rate - target))`,
/// clamped to `max`.
pub fn adapt_step(beta: f64, rate: f64, t: usize, cfg: AdaptConfig, max: f64) -> f64 {
    let kappa = cfg.kappa0 / (t.max(1) as f64).sqrt();
    (beta * (kappa * (rate - cfg.target)).exp()).min(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pcn_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = vec![1.0, -2.0, 0.5];
        assert_eq!(pcn_propose(&x, 0.0, &mut rng), x);
        let a = pcn_propose(&x, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = pcn_propose(&[100.0, 100.0, 100.0], 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn acceptance_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert!(accept(1.0, 0.5, &mut rng).unwrap());
            assert!(accept(1.0, 1.0, &mut rng).unwrap());
            assert!(!accept(1.0, f64::INFINITY, &mut rng).unwrap());
        }
        assert!(accept(f64::NAN, 1.0, &mut rng).is_err());
        let n = 100_000;
        let hits = (0..n).filter(|_| accept(0.0, 4f64.ln(), &mut rng).unwrap()).count();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn s_proposal() {
        let b = SBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(mh_propose_s(2.0, 0.0, &mut rng, b), Some(2.0));
        assert_eq!(mh_propose_s(0.5, 100.0, &mut ChaCha8Rng::seed_from_u64(0), SBounds { lo: 0.5, hi: 0.5 }), None);
        let n = 50_000;
        let d: Vec<f64> = (0..n).filter_map(|_| mh_propose_s(2.75, 0.1, &mut rng, b)).map(|p| p - 2.75).collect();
        assert_eq!(d.len(), n);
        let sd = (d.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        assert!((sd / 0.1 - 1.0).abs() < 0.02, "{sd}");
    }

    #[test]
    fn adaptation() {
        let cfg = AdaptConfig::default();
        assert_eq!(adapt_step(0.3, 0.234, 5, cfg, 1.0), 0.3);
        let mut b = 0.1;
        for t in 1..200 {
            let nb = adapt_step(b, 1.0, t, cfg, 1.0);
            assert!(nb >= b);
            b = nb;
        }
        assert_eq!(b, 1.0);
        assert!(adapt_step(0.5, 0.0, 1, cfg, 1.0) < 0.5);
    }
}
