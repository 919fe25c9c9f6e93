use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seabed_core::diagnostics::hpd;
use seabed_core::io::{measurement_from_bytes, measurement_to_bytes, samples_from_bytes, samples_to_bytes};
use seabed_core::material::{coeff_fields, MaterialConstants, MaterialSampling};
use seabed_core::mesh::{Domain, Mesh};
use seabed_core::prior::{Grid1d, KlBasis, KlConfig, SeabedCurve};
use seabed_core::samplers::{pcn_propose, ChainSample, SampleSet};
use seabed_core::solver::{Measurement, MeasurementMeta};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_assembly_matches_direct_sum(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..64),
        s in 0.5f64..5.0,
        offset in -0.3f64..0.3,
    ) {
        let basis = KlBasis::new(KlConfig { n_kl: coeffs.len(), ..KlConfig::default() }).unwrap();
        let fast = basis.assemble(&coeffs, offset, s).unwrap();
        let slow = basis.assemble_direct(&coeffs, offset, s).unwrap();
        prop_assert!(fast.max_abs_deviation(&slow) < 1e-12);
    }

    #[test]
    fn sample_files_roundtrip(
        rows in prop::collection::vec((0usize..1000, 0usize..8, 0.5f64..5.0, finite(), prop::collection::vec(finite(), 3)), 0..20),
        beta_h in 1e-4f64..1.0,
    ) {
        let samples = rows
            .into_iter()
            .map(|(iteration, walker, s, phi, coeffs)| ChainSample {
                iteration, walker, s, phi, accepted_h_rate: 0.25, accepted_s_rate: 0.0, coeffs,
            })
            .collect();
        let set = SampleSet { n_kl: 3, samples, beta_h, beta_s: 0.0 };
        let back = samples_from_bytes(&samples_to_bytes(&set).unwrap()).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn measurement_files_roundtrip(values in prop::collection::vec(finite(), 12), sigma in 1e-9f64..1.0) {
        let data = vec![values[..6].chunks(2).map(<[f64]>::to_vec).collect(), values[6..].chunks(2).map(<[f64]>::to_vec).collect()];
        let m = Measurement {
            data,
            sigma: Some(vec![sigma, 2.0 * sigma]),
            meta: MeasurementMeta {
                dt: 0.01, t_max: 0.03, substeps: 1, sensor_xs: vec![-0.5, 0.5], frequencies: vec![1.0, 2.0],
                nx: 4, ny: 2, seed: None,
            },
        };
        prop_assert_eq!(measurement_from_bytes(&measurement_to_bytes(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn full_step_pcn_forgets_the_current_state(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4), seed: u64) {
        let pa = pcn_propose(&a, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let pb = pcn_propose(&b, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(pa, pb);
    }

    #[test]
    fn material_stays_between_water_and_rock(h in -1.4f64..1.4) {
        let mesh = Mesh::new(12, 6, Domain::default()).unwrap();
        let c = MaterialConstants::default();
        let curve = SeabedCurve::flat(Grid1d::new(-3.0, 3.0, 64).unwrap(), h);
        let f = coeff_fields(&curve, &mesh, &c, MaterialSampling::AreaFraction).unwrap();
        for (&rho, &alpha) in f.rho.iter().zip(&f.alpha) {
            prop_assert!(rho >= c.rho0 - 1e-12 && rho <= c.rho_minus + 1e-12);
            prop_assert!(alpha > 0.0);
        }
    }

    #[test]
    fn hpd_is_no_longer_than_the_central_window(xs in prop::collection::vec(-10.0f64..10.0, 20..200), level in 0.5f64..0.99) {
        let (lo, hi) = hpd(&xs, level).unwrap();
        let need = (level * xs.len() as f64).ceil() as usize;
        // Central window holding the same number of samples. (Interpolated
        // equal-tailed quantiles may hold fewer, so they are no bound.)
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let j = (xs.len() - need) / 2;
        prop_assert!(hi - lo <= sorted[j + need - 1] - sorted[j] + 1e-12);
        prop_assert!(xs.iter().filter(|&&x| lo <= x && x <= hi).count() >= need);
    }
}
