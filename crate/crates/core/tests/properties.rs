// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use meetsvd_core::{exact_meeting_times, spectral_tmeet, stationary, svd_killed, tmeet_pi};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masking_is_idempotent(x in pair_vector()) {
        check_mask_idempotent(&x)?;
    }

    #[test]
    fn operators_match_dense_oracle(p in chain(8), seed in 0u64..1000) {
        check_operator_matches_oracle(&p, seed)?;
    }

    #[test]
    fn adjoint_is_consistent(p in chain(6), s1 in 0u64..1000, s2 in 0u64..1000) {
        check_adjoint(&p, s1, s2)?;
    }

    #[test]
    fn killed_transition_is_substochastic(p in chain(6)) {
        check_killed_substochastic(&p)?;
    }

    #[test]
    fn meeting_times_satisfy_their_recursion(p in chain(6)) {
        let n = p.n();
        let m = exact_meeting_times(&p).unwrap();
        let pm = p.matrix();
        let step = pm * m.as_matrix() * pm.transpose();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!((m.get(i, j) - m.get(j, i)).abs() <= 1e-9 * (1.0 + m.get(i, j)));
                if i != j {
                    prop_assert!(m.get(i, j) >= 1.0);
                    prop_assert!((m.get(i, j) - 1.0 - step[(i, j)]).abs() <= 1e-9 * m.get(i, j));
                }
            }
        }
    }

    #[test]
    fn spectral_and_exact_routes_agree(p in chain(5)) {
        let pi = stationary(&p).unwrap();
        let exact = tmeet_pi(&exact_meeting_times(&p).unwrap(), &pi).unwrap();
        let svd = svd_killed(&p, None).unwrap();
        let spectral = spectral_tmeet(&svd, &pi).unwrap();
        prop_assert!((exact - spectral).abs() <= 1e-8 * exact.max(1.0), "{} vs {}", exact, spectral);
        let sigma = svd.singular_values();
        prop_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sigma.iter().all(|&s| s > 0.0));
    }
}
