mod common;

use detangle::config::{parse_config, ExperimentId, RunConfig, SweepConfig};
use detangle::disentangle::{q_disentangle, tau_pair, PairTopology, Quantifier};
use detangle::engine::{rhs_with_theta, EvolutionParams, MasterEquation};
use detangle::experiments::{PureClassProfile, SweepSpec};
use detangle::linalg::kron;
use detangle::models::{energy_basis, mirror_operator, populations, tim_hamiltonian, TimParams};
use detangle::output::fmt_f64;
use detangle::random::{random_density_matrix, random_hermitian, random_product_state, random_unitary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_is_traceless_and_hermitian(seed in any::<u64>(), spins in 1usize..=4) {
        let mut r = rng(seed);
        let dim = 1 << spins;
        let rho = random_density_matrix(&mut r, dim);
        let f = rhs_with_theta(&rho, &random_hermitian(&mut r, dim, 2.0), &random_hermitian(&mut r, dim, 2.0));
        prop_assert!(f.trace().norm() <= 1e-12);
        prop_assert!(f.hermiticity_error() <= 1e-12);
    }

    #[test]
    fn tau_is_local_unitary_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density_matrix(&mut r, 4);
        let u = kron(&random_unitary(&mut r, 2), &random_unitary(&mut r, 2));
        for q in [Quantifier::Quadratic, Quantifier::Linear] {
            let a = tau_pair(&rho, (1, 2), q).unwrap();
            let b = tau_pair(&rho.conjugate_by(&u), (1, 2), q).unwrap();
            prop_assert!((a - b).abs() <= 1e-11);
        }
    }

    #[test]
    fn tau_matches_oracle(seed in any::<u64>()) {
        let rho = random_density_matrix(&mut rng(seed), 4);
        let lib = tau_pair(&rho, (1, 2), Quantifier::Quadratic).unwrap();
        prop_assert!((lib - common::tau_quadratic(&common::from_lib(&rho))).abs() <= 1e-13);
        prop_assert!(lib >= -1e-15);
    }

    #[test]
    fn disentangler_vanishes_on_products(seed in any::<u64>(), spins in 2usize..=5) {
        let rho = random_product_state(&mut rng(seed), spins);
        let q = q_disentangle(&rho, &PairTopology::nearest_neighbor_ring(spins), Quantifier::Quadratic).unwrap();
        prop_assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn flow_is_mirror_equivariant(seed in any::<u64>(), spins in 2usize..=3, j in 0.0f64..3.0) {
        let h = tim_hamiltonian(&TimParams::new(spins, 1.0, j).unwrap()).unwrap();
        let eq = MasterEquation::ring(h, EvolutionParams::new(2.0, 3.0, 1.0), Quantifier::Quadratic).unwrap();
        let rho = random_density_matrix(&mut rng(seed), 1 << spins);
        let m = mirror_operator(spins);
        let lhs = eq.rhs(0.0, &rho.conjugate_by(&m)).unwrap();
        let rhs = eq.rhs(0.0, &rho).unwrap().conjugate_by(&m);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn landscape_is_mirror_symmetric(j in 0.0f64..4.0, ratio in 0.0f64..5.0, s in -3.1f64..3.1) {
        let profile = PureClassProfile::new(j, Quantifier::Quadratic).unwrap();
        let a = profile.u_eff(s, j, ratio).unwrap();
        let b = profile.u_eff(-s, j, ratio).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((a - common::u_eff(s, j, ratio)).abs() <= 1e-12);
    }

    #[test]
    fn populations_are_a_distribution(seed in any::<u64>(), j in 0.0f64..3.0) {
        let basis = energy_basis(&tim_hamiltonian(&TimParams::new(2, 1.0, j).unwrap()).unwrap()).unwrap();
        let p = populations(&random_density_matrix(&mut rng(seed), 4), &basis);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x >= -1e-15));
    }

    #[test]
    fn float_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn linspace_is_strictly_increasing(start in -5.0f64..5.0, width in 1e-3f64..10.0, count in 2usize..200) {
        let s = SweepSpec::linspace("x", start, start + width, count).unwrap();
        prop_assert_eq!(s.values.len(), count);
        prop_assert!(s.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_round_trips(
        g_h in 0.0f64..100.0,
        g_d in 0.0f64..1000.0,
        theta_t in 0.01f64..100.0,
        seed in any::<u64>(),
        values in proptest::collection::btree_set(0u32..2000, 1..10),
    ) {
        let mut c = RunConfig::defaults_for(ExperimentId::TimPt);
        c.seed = seed;
        c.evolution = Some(EvolutionParams::new(g_h, g_d, theta_t));
        c.sweep = Some(SweepConfig::from_values(values.iter().map(|&v| v as f64 / 1000.0).collect()));
        let text = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), c);
    }
}
