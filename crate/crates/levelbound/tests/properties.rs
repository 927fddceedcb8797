//! Property tests over randomly generated exact models: the sandwich and
//! dominance orderings, the agreement of the recursive coefficients with
//! the brute-force path sums, drift certificates, and file round-trips.

use proptest::prelude::*;

use levelbound::bounds::{
    aggregate_start, exact_hitting_time, linear_bound, metric_bound, scheme_coefficients,
    verify_drift, Direction, Scheme,
};
use levelbound::kernel::{weight_transition, WeightKernelQuery};
use levelbound::model::{
    derive_ratios, model_from_json, model_to_json, LevelModel, ModelKind, StartDistribution,
    TriMatrix,
};
use levelbound::oracle::path_sum_coefficient;

/// Random exact model with 1..=6 levels; every row gets a positive
/// improvement mass strictly below 1.
fn arb_exact_model() -> impl Strategy<Value = LevelModel> {
    (1usize..=6)
        .prop_flat_map(|k| {
            (
                Just(k),
                proptest::collection::vec(0.01f64..1.0, k * (k + 1) / 2),
                proptest::collection::vec(0.05f64..0.9, k),
            )
        })
        .prop_map(|(k, entries, masses)| {
            let mut rows = Vec::with_capacity(k);
            let mut cursor = 0;
            for i in 1..=k {
                let raw = &entries[cursor..cursor + i];
                cursor += i;
                let total: f64 = raw.iter().sum();
                rows.push(
                    raw.iter()
                        .map(|x| x / total * masses[i - 1])
                        .collect::<Vec<f64>>(),
                );
            }
            let q = TriMatrix::from_rows(rows).unwrap();
            LevelModel::new("random", ModelKind::Exact, q.clone(), q, None).unwrap()
        })
}

proptest! {
    #[test]
    fn metric_bounds_collapse_onto_exact_times(model in arb_exact_model()) {
        let exact = exact_hitting_time(&model).unwrap();
        for direction in [Direction::Lower, Direction::Upper] {
            let metric = metric_bound(&model, direction).unwrap();
            for k in 1..=model.levels() {
                let rel = (metric.level(k) - exact.level(k)).abs() / exact.level(k);
                prop_assert!(rel < 1e-10, "{direction} k={k} rel={rel}");
            }
        }
    }

    #[test]
    fn every_scheme_respects_the_sandwich(model in arb_exact_model()) {
        let exact = exact_hitting_time(&model).unwrap();
        for scheme in Scheme::ALL {
            for direction in [Direction::Lower, Direction::Upper] {
                if !scheme.supports(direction) {
                    continue;
                }
                let bound = linear_bound(&model, scheme, direction).unwrap();
                prop_assert!(verify_drift(&model, &bound).unwrap().pass());
                for k in 1..=model.levels() {
                    let (d, e) = (bound.level(k), exact.level(k));
                    match direction {
                        Direction::Lower => prop_assert!(
                            d <= e * (1.0 + 1e-9),
                            "{scheme:?} lower {d} above exact {e} at level {k}"
                        ),
                        Direction::Upper => prop_assert!(
                            d >= e * (1.0 - 1e-9),
                            "{scheme:?} upper {d} below exact {e} at level {k}"
                        ),
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_schemes_are_ordered(model in arb_exact_model()) {
        let schemes = [
            Scheme::Zero,
            Scheme::Viscosity,
            Scheme::VisitProbability,
            Scheme::Full,
        ];
        let lower: Vec<_> = schemes
            .iter()
            .map(|&s| linear_bound(&model, s, Direction::Lower).unwrap())
            .collect();
        for k in 1..=model.levels() {
            for pair in lower.windows(2) {
                prop_assert!(
                    pair[0].level(k) <= pair[1].level(k) * (1.0 + 1e-12) + 1e-12,
                    "lower ordering broken at level {k}"
                );
            }
        }
        let upper: Vec<_> = [Scheme::One, Scheme::Viscosity, Scheme::VisitProbability, Scheme::Full]
            .iter()
            .map(|&s| linear_bound(&model, s, Direction::Upper).unwrap())
            .collect();
        for k in 1..=model.levels() {
            for pair in upper.windows(2) {
                prop_assert!(
                    pair[1].level(k) <= pair[0].level(k) * (1.0 + 1e-12) + 1e-12,
                    "upper ordering broken at level {k}"
                );
            }
        }
    }

    #[test]
    fn recursive_coefficients_equal_path_sums(model in arb_exact_model()) {
        for direction in [Direction::Lower, Direction::Upper] {
            let full = scheme_coefficients(&model, Scheme::Full, direction).unwrap();
            for k in 2..=model.levels() {
                for l in 1..k {
                    let brute = path_sum_coefficient(&model, k, l, direction).unwrap();
                    prop_assert!(
                        (full.get(k, l) - brute).abs() < 1e-10,
                        "{direction} ({k},{l})"
                    );
                }
            }
        }
    }

    #[test]
    fn coefficients_stay_in_range_without_clamping(model in arb_exact_model()) {
        for scheme in [Scheme::Viscosity, Scheme::VisitProbability, Scheme::Full, Scheme::Product] {
            for direction in [Direction::Lower, Direction::Upper] {
                if !scheme.supports(direction) {
                    continue;
                }
                let set = scheme_coefficients(&model, scheme, direction).unwrap();
                prop_assert_eq!(set.clamp_events, 0);
                prop_assert_eq!(set.conservative_fallbacks, 0);
                for k in 2..=model.levels() {
                    for l in 1..k {
                        let c = set.get(k, l);
                        prop_assert!((0.0..=1.0).contains(&c));
                    }
                }
            }
        }
    }

    #[test]
    fn model_files_round_trip(model in arb_exact_model()) {
        let reloaded = model_from_json(&model_to_json(&model)).unwrap();
        prop_assert_eq!(&model, &reloaded);
        let with_ratios = derive_ratios(&model).unwrap();
        let reloaded = model_from_json(&model_to_json(&with_ratios)).unwrap();
        prop_assert_eq!(with_ratios, reloaded);
    }

    #[test]
    fn start_aggregation_is_the_dot_product(
        model in arb_exact_model(),
        raw in proptest::collection::vec(0.0f64..1.0, 7),
    ) {
        let exact = exact_hitting_time(&model).unwrap();
        let k = model.levels();
        let total: f64 = raw[..=k].iter().sum();
        prop_assume!(total > 1e-6);
        let weights: Vec<f64> = raw[..=k].iter().map(|w| w / total).collect();
        let start = StartDistribution::new(weights.clone()).unwrap();
        let got = aggregate_start(&exact, &start).unwrap();
        let naive: f64 = (1..=k).map(|i| weights[i] * exact.level(i)).sum();
        prop_assert!((got - naive).abs() <= 1e-9 * naive.abs().max(1.0));
    }

    #[test]
    fn kernel_complement_symmetry(n in 1usize..=64, m_frac in 0.0f64..1.0, w_frac in 0.0f64..1.0) {
        let m = (m_frac * n as f64) as usize;
        let w = (w_frac * n as f64) as usize;
        let a = weight_transition(WeightKernelQuery { n, source_weight: m, target_weight: w }).unwrap();
        let b = weight_transition(WeightKernelQuery {
            n,
            source_weight: n - m,
            target_weight: n - w,
        })
        .unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
