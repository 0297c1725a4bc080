use dirac_core::discrete::{system_from_beta, verify_system_identities};
use dirac_core::inverse::{classify_admissible, solve_inverse};
use dirac_core::linalg::{c, max_abs};
use dirac_core::random::random_beta_sequence;
use dirac_core::weyl::taylor_from_system;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn taylor_data_of_a_prefix_is_a_prefix(seed in any::<u64>(), n in 1usize..7, p in 1usize..4, cut in 0usize..7) {
        let l = cut.min(n - 1);
        let b = random_beta_sequence(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
        let full = taylor_from_system(&b).unwrap().truncated(l);
        let short = taylor_from_system(&b.truncated(l)).unwrap();
        prop_assert!(full.relative_deviation(&short) <= 1e-10);
    }

    #[test]
    fn forward_then_inverse_reproduces_data(seed in any::<u64>(), n in 0usize..5, p in 1usize..3) {
        let b = random_beta_sequence(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
        let alpha = taylor_from_system(&b).unwrap();
        let res = solve_inverse(&alpha).unwrap();
        let again = taylor_from_system(&res.beta).unwrap();
        prop_assert!(again.relative_deviation(&alpha) <= 1e-8);
    }

    #[test]
    fn recovered_systems_satisfy_identities(seed in any::<u64>(), n in 0usize..4, p in 1usize..3) {
        let b = random_beta_sequence(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
        let res = solve_inverse(&taylor_from_system(&b).unwrap()).unwrap();
        let report = verify_system_identities(&res.system, &[c(1.0, 1.0), c(-2.0, 0.5), c(0.7, -1.5)]);
        prop_assert!(report.determinant_identity <= 1e-9, "{report:?}");
        prop_assert!(report.transfer_representation <= 1e-9, "{report:?}");
    }
}

#[test]
fn short_forward_data_are_accepted() {
    for seed in 0..30 {
        let b = random_beta_sequence(&mut ChaCha8Rng::seed_from_u64(seed), 2, 1);
        let alpha = taylor_from_system(&b).unwrap();
        assert!(classify_admissible(&alpha).class.accepted(), "seed {seed}");
        let sys = system_from_beta(&b).unwrap();
        let res = solve_inverse(&alpha).unwrap();
        let dev = sys
            .coefficients()
            .iter()
            .zip(res.system.coefficients())
            .map(|(x, y)| max_abs(&(x - y)))
            .fold(0.0, f64::max);
        assert!(dev <= 1e-8, "seed {seed}: {dev:e}");
    }
}
