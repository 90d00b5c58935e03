mod common;

use common::*;
use evsys::analysis::wegscheider_check;
use evsys::linalg::{least_squares_solve, left_kernel, right_kernel};
use evsys::parser::{parse_system, serialize_system};
use evsys::system::{monomial_precedes, Event, EventSystem, Monomial};
use proptest::prelude::*;

fn monomial(n: usize) -> impl Strategy<Value = Monomial> {
    prop::collection::vec(0u32..4, n).prop_map(Monomial::new)
}

fn rate() -> impl Strategy<Value = evsys::Rate> {
    (1i64..50, 1i64..50).prop_map(|(p, q)| rat(p, q))
}

fn system(max_n: usize, max_m: usize) -> impl Strategy<Value = EventSystem> {
    (1..=max_n, 1..=max_m, any::<u64>()).prop_map(|(n, m, seed)| random_physical(&mut common::rng(seed), n, m, 3))
}

fn natural_system(max_n: usize, max_m: usize) -> impl Strategy<Value = EventSystem> {
    (1..=max_n, 1..=max_m, any::<u64>()).prop_map(|(n, m, seed)| random_natural(&mut common::rng(seed), n, m, 2).0)
}

proptest! {
    #[test]
    fn order_is_total_and_antisymmetric(a in monomial(4), b in monomial(4)) {
        let ab = monomial_precedes(&a, &b).unwrap();
        let ba = monomial_precedes(&b, &a).unwrap();
        if a == b {
            prop_assert!(!ab && !ba);
        } else {
            prop_assert!(ab ^ ba);
        }
    }

    #[test]
    fn order_is_transitive(a in monomial(3), b in monomial(3), c in monomial(3)) {
        if monomial_precedes(&a, &b).unwrap() && monomial_precedes(&b, &c).unwrap() {
            prop_assert!(monomial_precedes(&a, &c).unwrap());
        }
    }

    #[test]
    fn order_agrees_with_reversed_lexicographic_comparison(a in monomial(4), b in monomial(4)) {
        // Smaller exponent at the first difference comes first.
        let expected = a.exponents().iter().zip(b.exponents()).find(|(x, y)| x != y).map(|(x, y)| x < y);
        prop_assert_eq!(monomial_precedes(&a, &b).unwrap(), expected.unwrap_or(false));
    }

    #[test]
    fn canonicalization_ignores_direction(a in monomial(3), b in monomial(3), ra in rate(), rb in rate()) {
        prop_assume!(a != b);
        let e1 = Event::canonical(ra.clone(), a.clone(), rb.clone(), b.clone()).unwrap();
        let e2 = Event::canonical(rb.clone(), b.clone(), ra.clone(), a.clone()).unwrap();
        prop_assert!(monomial_precedes(e1.low(), e1.high()).unwrap());
        // Canonicalizing the canonical form again is the identity.
        let e3 = Event::canonical(e1.low_rate().clone(), e1.low().clone(), e1.high_rate().clone(), e1.high().clone()).unwrap();
        prop_assert_eq!(&e1, &e3);
        // Writing the reaction backwards yields the same binomial.
        prop_assert_eq!(&e1, &e2);
        let (lo, hi) = if monomial_precedes(&a, &b).unwrap() { (&a, &b) } else { (&b, &a) };
        prop_assert_eq!(e1.low(), lo);
        prop_assert_eq!(e1.high(), hi);
    }

    #[test]
    fn rhs_matches_species_by_species_oracle(sys in system(4, 4), seed in any::<u64>()) {
        let x = random_positive(&mut common::rng(seed), sys.dim());
        let got = sys.mass_action_rhs(&x).unwrap();
        let want = rhs_oracle(&sys, &x);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()), "{g} vs {w}");
        }
        // Every conservation law annihilates the field.
        for v in right_kernel(&sys.stoichiometric_matrix()).vectors {
            let s: f64 = v.iter().zip(&got).map(|(&c, p)| c as f64 * p).sum();
            let scale: f64 = got.iter().map(|p| p.abs()).sum::<f64>() + 1.0;
            prop_assert!(s.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn parser_round_trip(sys in system(4, 4)) {
        let text = serialize_system(&sys);
        let back = parse_system(&text).unwrap();
        prop_assert_eq!(back.species(), sys.species());
        prop_assert_eq!(back.events(), sys.events());
    }

    #[test]
    fn kernels_are_exact_and_complete(sys in system(5, 5)) {
        let g = sys.stoichiometric_matrix();
        let rank = rational_rank(g.rows(), g.ncols());
        let right = right_kernel(&g).vectors;
        let left = left_kernel(&g).vectors;
        prop_assert_eq!(right.len(), sys.dim() - rank);
        prop_assert_eq!(left.len(), sys.len() - rank);
        for v in &right {
            prop_assert!(mat_vec(g.rows(), v).iter().all(|&x| x == 0));
            prop_assert!(v.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0));
        }
        for v in &left {
            prop_assert!(vec_mat(g.rows(), g.ncols(), v).iter().all(|&x| x == 0));
        }
        prop_assert_eq!(rational_rank(&right, sys.dim()), right.len());
        prop_assert_eq!(rational_rank(&left, sys.len()), left.len());
    }

    #[test]
    fn least_squares_satisfies_normal_equations(sys in system(4, 5), seed in any::<u64>()) {
        let g = sys.stoichiometric_matrix();
        let b = random_positive(&mut common::rng(seed), sys.len());
        let ls = least_squares_solve(&g, &b).unwrap();
        let a = g.to_dmatrix();
        let alpha = nalgebra::DVector::from_column_slice(&ls.alpha);
        let r = &a * &alpha - nalgebra::DVector::from_column_slice(&b);
        let normal = a.transpose() * &r;
        prop_assert!(normal.amax() <= 1e-9, "Γᵀr = {normal}");
        // Minimum norm: α is orthogonal to the right kernel.
        for v in right_kernel(&g).vectors {
            let d: f64 = v.iter().zip(&ls.alpha).map(|(&c, a)| c as f64 * a).sum();
            prop_assert!(d.abs() <= 1e-9);
        }
    }

    #[test]
    fn naturality_matches_least_squares_consistency(sys in prop_oneof![system(4, 4), natural_system(4, 4)]) {
        let g = sys.stoichiometric_matrix();
        let b: Vec<f64> = sys.events().iter().map(|e| e.log_ratio()).collect();
        let ls = least_squares_solve(&g, &b).unwrap();
        prop_assert_eq!(wegscheider_check(&sys).natural, ls.residual <= 1e-9, "residual {}", ls.residual);
    }

    #[test]
    fn constructed_natural_systems_are_natural(sys in natural_system(4, 4)) {
        let v = wegscheider_check(&sys);
        prop_assert!(v.natural);
        prop_assert!(v.certificates.iter().all(|c| c.weight.abs() <= 1e-9));
    }
}
