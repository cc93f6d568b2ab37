//! Property tests for the preference algebra and the reaction interpreter,
//! each checked against an independent brute-force or closed-form oracle.

use std::cmp::Ordering;

use proptest::prelude::*;
use realign_core::interpreter::{eq1_delta, BanditState, Eq1Params, ReactionBelief};
use realign_core::preference::{
    dominates, linear_utility, pareto_filter, project_to_simplex, tlo_compare, utility_argmax, PreferenceDelta,
    PreferenceVector, ReturnVector, UtilityFunction, SIMPLEX_TOL,
};

fn rv(v: Vec<f64>) -> ReturnVector {
    ReturnVector::new(v).unwrap()
}

/// Small integer grid values so ties and duplicates are common.
fn return_set() -> impl Strategy<Value = Vec<ReturnVector>> {
    (1usize..=4).prop_flat_map(|m| prop::collection::vec(prop::collection::vec((-4i32..=4).prop_map(f64::from), m), 1..=64))
        .prop_map(|vs| vs.into_iter().map(rv).collect())
}

fn brute_force_front(set: &[ReturnVector]) -> Vec<usize> {
    (0..set.len())
        .filter(|&i| {
            !set.iter().any(|o| {
                o.values().iter().zip(set[i].values()).all(|(a, b)| a >= b)
                    && o.values().iter().zip(set[i].values()).any(|(a, b)| a > b)
            })
        })
        .collect()
}

fn real_vec(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, m)
}

fn simplex_point(m: usize) -> impl Strategy<Value = PreferenceVector> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        project_to_simplex(&v.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap()
    })
}

fn assert_on_simplex(p: &PreferenceVector) {
    assert!(p.weights().iter().all(|&w| w >= 0.0));
    assert!((p.weights().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
}

/// Projection threshold found by bisection on the dual, independent of the
/// sort-based algorithm.
fn bisection_projection(x: &[f64]) -> Vec<f64> {
    let mass = |t: f64| x.iter().map(|v| (v - t).max(0.0)).sum::<f64>();
    let mut lo = x.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    x.iter().map(|v| (v - t).max(0.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pareto_filter_matches_brute_force(set in return_set()) {
        prop_assert_eq!(pareto_filter(&set).unwrap(), brute_force_front(&set));
    }

    #[test]
    fn pareto_filter_is_a_fixed_point(set in return_set()) {
        let front: Vec<ReturnVector> = pareto_filter(&set).unwrap().into_iter().map(|i| set[i].clone()).collect();
        let again = pareto_filter(&front).unwrap();
        prop_assert_eq!(again, (0..front.len()).collect::<Vec<_>>());
    }

    #[test]
    fn dominance_is_a_strict_partial_order(a in real_vec(3), b in real_vec(3), c in real_vec(3)) {
        let (a, b, c) = (rv(a), rv(b), rv(c));
        prop_assert!(!dominates(&a, &a).unwrap());
        if dominates(&a, &b).unwrap() {
            prop_assert!(!dominates(&b, &a).unwrap());
            if dominates(&b, &c).unwrap() {
                prop_assert!(dominates(&a, &c).unwrap());
            }
        }
    }

    #[test]
    fn projection_lands_on_the_simplex_and_is_idempotent(x in (1usize..=6).prop_flat_map(real_vec)) {
        let p = project_to_simplex(&x).unwrap();
        assert_on_simplex(&p);
        let q = project_to_simplex(p.weights()).unwrap();
        for (a, b) in p.weights().iter().zip(q.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_matches_the_bisection_oracle(x in (1usize..=6).prop_flat_map(real_vec)) {
        let p = project_to_simplex(&x).unwrap();
        for (a, b) in p.weights().iter().zip(bisection_projection(&x)) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn projection_matches_a_fine_grid_in_two_dimensions(x in real_vec(2)) {
        let p = project_to_simplex(&x).unwrap();
        let n = 200_000;
        let best = (0..=n)
            .map(|k| k as f64 / n as f64)
            .min_by(|&s, &t| {
                let d = |w: f64| (w - x[0]).powi(2) + (1.0 - w - x[1]).powi(2);
                d(s).total_cmp(&d(t))
            })
            .unwrap();
        prop_assert!((p.weights()[0] - best).abs() <= 1e-5);
    }

    #[test]
    fn uniform_shifts_are_absorbed_at_interior_points(p in (2usize..=5).prop_flat_map(simplex_point), c in -0.5f64..0.5) {
        let shifted = p.shifted(&PreferenceDelta::new(vec![c; p.len()]).unwrap()).unwrap();
        for (a, b) in shifted.weights().iter().zip(p.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn argmax_is_invariant_under_positive_rescaling(set in return_set(), scale in 0.1f64..10.0, seed in any::<u64>()) {
        let m = set[0].len();
        let w: Vec<f64> = (0..m).map(|i| ((seed >> (i * 8)) & 0xff) as f64 + 1.0).collect();
        let total: f64 = w.iter().sum();
        let w = PreferenceVector::new(w.iter().map(|x| x / total).collect()).unwrap();
        let u = UtilityFunction::linear(w.clone());
        let scaled: Vec<ReturnVector> = set.iter().map(|r| rv(r.values().iter().map(|v| v * scale).collect())).collect();
        let a = utility_argmax(&u, &set).unwrap();
        let b = utility_argmax(&u, &scaled).unwrap();
        let ua = linear_utility(&w, &set[a]).unwrap();
        let ub = linear_utility(&w, &set[b]).unwrap();
        prop_assert!((ua - ub).abs() <= 1e-9 * (1.0 + ua.abs()));
    }

    #[test]
    fn tlo_is_a_total_preorder(a in real_vec(3), b in real_vec(3), c in real_vec(3), t0 in -2.0f64..2.0, t1 in -2.0f64..2.0) {
        let u = UtilityFunction::lexicographic(vec![2, 0, 1], vec![t0, t1]).unwrap();
        let (a, b, c) = (rv(a), rv(b), rv(c));
        prop_assert_eq!(tlo_compare(&u, &a, &a).unwrap(), Ordering::Equal);
        prop_assert_eq!(tlo_compare(&u, &a, &b).unwrap(), tlo_compare(&u, &b, &a).unwrap().reverse());
        let ab = tlo_compare(&u, &a, &b).unwrap();
        let bc = tlo_compare(&u, &b, &c).unwrap();
        if ab != Ordering::Greater && bc != Ordering::Greater {
            prop_assert_ne!(tlo_compare(&u, &a, &c).unwrap(), Ordering::Greater);
        }
    }

    #[test]
    fn eq1_sign_rule(zhat in -3.0f64..3.0, obs in real_vec(3), ideal in real_vec(3), alpha in prop::collection::vec(0.01f64..2.0, 3)) {
        let d = eq1_delta(zhat, &rv(obs.clone()), &rv(ideal.clone()), &Eq1Params::new(alpha, vec![0.0; 3])).unwrap();
        for i in 0..3 {
            let expected = zhat.signum() * (obs[i] - ideal[i]).signum();
            let got = if d.values()[i] == 0.0 { 0.0 } else { d.values()[i].signum() };
            let expected = if zhat == 0.0 || obs[i] == ideal[i] { 0.0 } else { expected };
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn eq1_matches_recomputation(
        zhat in -5.0f64..5.0,
        obs in real_vec(4),
        ideal in real_vec(4),
        alpha in prop::collection::vec(0.0f64..2.0, 4),
        tau in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let d = eq1_delta(zhat, &rv(obs.clone()), &rv(ideal.clone()), &Eq1Params::new(alpha.clone(), tau.clone())).unwrap();
        for i in 0..4 {
            let expected = alpha[i] * zhat * (obs[i] - ideal[i]) - tau[i];
            prop_assert!((d.values()[i] - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn posterior_mean_moves_monotonically_towards_a_constant(c in -5.0f64..5.0) {
        let mut b = ReactionBelief::default();
        let mut gap = (b.mu - c).abs();
        for _ in 0..50 {
            b = b.standardize(c).unwrap().1;
            let next = (b.mu - c).abs();
            prop_assert!(next <= gap);
            gap = next;
        }
        prop_assert!(b.kappa > 0.0 && b.a > 0.0 && b.b > 0.0);
    }

    #[test]
    fn bandit_values_converge_to_a_constant_reward(r in -5.0f64..5.0, step in 0.05f64..1.0) {
        let mut bandit = BanditState::default();
        for _ in 0..2000 {
            bandit.credit("ctx", 3, r, step, 5);
        }
        prop_assert!((bandit.values["ctx"][3] - r).abs() <= 1e-6);
    }
}
