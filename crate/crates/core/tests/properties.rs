use proptest::prelude::*;

use robust_frechet::dataset::Dataset;
use robust_frechet::io::{parse_responses, responses_csv};
use robust_frechet::metric::{weighted_mean, MetricObject, QuantileFunction, QuantileGrid, ResponseKind, SymMatrix};
use robust_frechet::regression::{
    adaptive_weight, adaptive_weights, fit_robust, leverage, objective, weighted_sq_distances, FitConfig, TuningPair,
};

const Q: usize = 3;
const LEVELS: usize = 12;

fn sym() -> impl Strategy<Value = MetricObject> {
    prop::collection::vec(-10.0f64..10.0, Q * (Q + 1) / 2).prop_map(|upper| {
        let mut e = vec![0.0; Q * Q];
        let mut it = upper.into_iter();
        for j in 0..Q {
            for k in j..Q {
                let v = it.next().unwrap();
                e[j * Q + k] = v;
                e[k * Q + j] = v;
            }
        }
        MetricObject::Matrix(SymMatrix::new(Q, e).unwrap())
    })
}

fn grid() -> QuantileGrid {
    QuantileGrid::new((1..=LEVELS).map(|j| j as f64 / (LEVELS + 1) as f64).collect()).unwrap()
}

fn quantile() -> impl Strategy<Value = MetricObject> {
    (-5.0f64..5.0, prop::collection::vec(0.0f64..2.0, LEVELS)).prop_map(|(start, steps)| {
        let mut acc = start;
        let values = steps
            .into_iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect();
        MetricObject::Quantile(QuantileFunction::new(grid(), values).unwrap())
    })
}

fn object() -> impl Strategy<Value = MetricObject> {
    prop_oneof![sym(), quantile()]
}

/// Three objects of one kind.
fn triple() -> impl Strategy<Value = [MetricObject; 3]> {
    prop_oneof![
        (sym(), sym(), sym()).prop_map(|(a, b, c)| [a, b, c]),
        (quantile(), quantile(), quantile()).prop_map(|(a, b, c)| [a, b, c]),
    ]
}

fn dataset(kind_matrix: bool) -> impl Strategy<Value = Dataset> {
    let resp = if kind_matrix { sym().boxed() } else { quantile().boxed() };
    prop::collection::vec((0.0f64..1.0, resp), 6..15).prop_filter_map("needs covariate spread", |rows| {
        let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().map(|(x, y)| (vec![x], y)).unzip();
        let min = x.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let max = x.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        (max - min > 0.1).then(|| Dataset::new(x, y).unwrap())
    })
}

fn any_dataset() -> impl Strategy<Value = Dataset> {
    prop_oneof![dataset(true), dataset(false)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_axioms([a, b, c] in triple()) {
        let ab = a.distance(&b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, b.distance(&a).unwrap());
        prop_assert_eq!(a.distance(&a).unwrap(), 0.0);
        prop_assert!(a.distance(&c).unwrap() <= ab + b.distance(&c).unwrap() + 1e-9);
    }

    #[test]
    fn squared_distance_is_lipschitz([y, u1, u2] in triple()) {
        let d_u = [y.distance(&u1).unwrap(), y.distance(&u2).unwrap(), u1.distance(&u2).unwrap()]
            .into_iter()
            .fold(0.0, f64::max);
        let lhs = (y.sq_distance(&u1).unwrap() - y.sq_distance(&u2).unwrap()).abs();
        prop_assert!(lhs <= 2.0 * d_u * u1.distance(&u2).unwrap() + 1e-9);
    }

    #[test]
    fn equal_coefficients_give_plain_average(objs in prop::collection::vec(sym(), 2..6), c in 0.1f64..10.0) {
        let m = weighted_mean(&objs, &vec![c; objs.len()]).unwrap();
        for (k, v) in m.values().iter().enumerate() {
            let avg = objs.iter().map(|o| o.values()[k]).sum::<f64>() / objs.len() as f64;
            prop_assert!((v - avg).abs() <= 1e-9 * (1.0 + avg.abs()));
        }
    }

    #[test]
    fn weighted_mean_scale_invariant(
        objs in prop::collection::vec(quantile(), 3),
        coeffs in prop::collection::vec(-1.0f64..2.0, 3),
        scale in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0],
    ) {
        prop_assume!(coeffs.iter().sum::<f64>().abs() > 0.1);
        let a = weighted_mean(&objs, &coeffs).unwrap();
        let scaled: Vec<f64> = coeffs.iter().map(|c| c * scale).collect();
        let b = weighted_mean(&objs, &scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()) * 100.0);
        }
        prop_assert!(a.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn leverages_sum_to_n(d in any_dataset(), x in -2.0f64..3.0) {
        let g = leverage(&d, &[x]).unwrap();
        prop_assert!((g.iter().sum::<f64>() - d.n() as f64).abs() <= 1e-9);
    }

    #[test]
    fn weight_monotone_in_lambda(r in -5.0f64..50.0, l1 in 0.0f64..20.0, dl in 0.0f64..20.0, g in 0.0f64..10.0) {
        let lo = adaptive_weight(r, TuningPair::new(l1, g).unwrap());
        let hi = adaptive_weight(r, TuningPair::new(l1 + dl, g).unwrap());
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(lo <= hi);
    }

    #[test]
    fn robust_fit_invariants(d in any_dataset(), x in 0.0f64..1.0, l in 0.5f64..50.0, ratio in 0.0f64..2.0) {
        let t = TuningPair::new(l, ratio * l).unwrap();
        let cfg = FitConfig::default();
        let Ok(fit) = fit_robust(&d, &[x], t, &cfg) else {
            // every weighted coefficient vanished; reported, not an invariant breach
            return Ok(());
        };
        prop_assert!(fit.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        if fit.converged {
            let again = adaptive_weights(&fit.weighted_sq_distances, t);
            for (a, b) in again.iter().zip(&fit.weights) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
            if let Some(last) = fit.step_sizes.last() {
                prop_assert!(*last < cfg.epsilon);
            }
        }
        match &fit.estimate {
            MetricObject::Matrix(m) => {
                for j in 0..Q {
                    for k in 0..Q {
                        prop_assert_eq!(m.get(j, k), m.get(k, j));
                    }
                }
            }
            MetricObject::Quantile(f) => prop_assert!(f.values().windows(2).all(|w| w[0] <= w[1])),
        }
        let g = leverage(&d, &[x]).unwrap();
        let mut prev = f64::INFINITY;
        for u in &fit.iterates {
            let w = adaptive_weights(&weighted_sq_distances(&d, &g, u).unwrap(), t);
            let q = objective(&d, &[x], u, &w, t).unwrap();
            prop_assert!(q <= prev + 1e-9 * (1.0 + prev.abs().min(1e12)));
            prev = q;
        }
    }

    #[test]
    fn csv_round_trip_is_exact(objs in prop::collection::vec(object(), 1..2).prop_flat_map(|first| {
        let s = if first[0].as_matrix().is_some() { sym().boxed() } else { quantile().boxed() };
        prop::collection::vec(s, 1..6)
    })) {
        let kind = objs[0].kind();
        let text = responses_csv(&objs);
        let back = parse_responses(&text, kind).unwrap();
        prop_assert_eq!(back.len(), objs.len());
        for (a, b) in back.iter().zip(&objs) {
            prop_assert_eq!(a.values(), b.values());
        }
        if kind == ResponseKind::Distribution {
            let g = grid();
            prop_assert_eq!(back[0].as_quantile().unwrap().grid().levels(), g.levels());
        }
    }
}
