//! Property tests for the quadrature and basis-integral layers.

use proptest::prelude::*;

use hbvm::legendre;
use hbvm::quadrature;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Quadrature rules integrate every monomial up to their certified
    // exactness degree.
    #[test]
    fn gauss_rules_are_exact_to_their_degree(k in 1usize..=40) {
        let rule = quadrature::gauss_rule(k).unwrap();
        for d in 0..=rule.exactness_degree {
            let v = rule.integrate(|t| t.powi(d as i32));
            prop_assert!((v - 1.0 / (d as f64 + 1.0)).abs() <= 1e-13,
                "k={k} d={d}: {v}");
        }
        let sum: f64 = rule.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-14);
        prop_assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn lobatto_rules_are_exact_to_their_degree(n in 2usize..=40) {
        let rule = quadrature::lobatto_rule(n).unwrap();
        for d in 0..=rule.exactness_degree {
            let v = rule.integrate(|t| t.powi(d as i32));
            prop_assert!((v - 1.0 / (d as f64 + 1.0)).abs() <= 1e-13,
                "n={n} d={d}: {v}");
        }
    }

    // The basis-integral matrix of any admissible node set factors through
    // the augmented basis: I_s = P_(s+1) X̂_s.
    #[test]
    fn integral_matrix_factors_through_xs_hat(
        s in 1usize..=5,
        raw in proptest::collection::vec(0.001f64..0.999, 6..=14),
    ) {
        let mut nodes = raw;
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
        prop_assume!(nodes.len() > s);
        let i_mat = legendre::integral_matrix(s, &nodes).unwrap();
        let p_next = legendre::basis_matrix(s + 1, &nodes).unwrap();
        let hat = legendre::structural_matrices(s).unwrap().xs_hat;
        let residual = (&i_mat - p_next * hat).amax();
        prop_assert!(residual <= 1e-12, "s={s}: residual {residual:e}");
    }

    // Interpolatory weights recover the closed-form families.
    #[test]
    fn interpolatory_weights_match_gauss(k in 1usize..=20) {
        let rule = quadrature::gauss_rule(k).unwrap();
        let w = quadrature::interpolatory_weights(&rule.nodes).unwrap();
        for (a, b) in w.iter().zip(&rule.weights) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
