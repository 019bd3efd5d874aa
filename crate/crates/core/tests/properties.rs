use proptest::prelude::*;

use histreg::adversary::{nu_k, rademacher_eval};
use histreg::estimator::{histogram_estimate, variation_check, Estimator, EstimatorConfig};
use histreg::evaluation::{l2_error_exact, l2_error_quadrature};
use histreg::measures::{
    interval_prob, kolmogorov_distance, sup_interval_discrepancy, Atom, DistributionModel, Interval,
    SampleSequence, Segment,
};
use histreg::par::Execution;
use histreg::partitions::{average_over_partition, cell_of, DyadicCell, PiecewiseDyadicFn, VariationBudget};
use histreg::regression::RegressionModel;

/// Atoms on an eighth-grid plus adjacent or separated segments, normalized.
fn model() -> impl Strategy<Value = DistributionModel> {
    (
        prop::collection::vec((-16i32..16, 0.1f64..1.0), 0..3),
        prop::collection::vec((1i32..8, 0i32..3, 0.1f64..1.0), 1..3),
        -8i32..0,
    )
        .prop_map(|(atoms, segs, start)| {
            let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>() + segs.iter().map(|s| s.2).sum::<f64>();
            let mut seen = std::collections::BTreeMap::new();
            for (g, w) in atoms {
                *seen.entry(g).or_insert(0.0) += w / total;
            }
            let mut a = start as f64 / 8.0;
            let mut out = Vec::new();
            for (len, gap, w) in segs {
                let len = len as f64 / 8.0;
                out.push(Segment {
                    a,
                    b: a + len,
                    density: w / total / len,
                });
                a += len + gap as f64 / 8.0;
            }
            DistributionModel::new(
                seen.into_iter()
                    .map(|(g, mass)| Atom {
                        location: g as f64 / 8.0,
                        mass,
                    })
                    .collect(),
                out,
            )
            .unwrap()
        })
}

/// Full support on `[-4, 4]` so every window cell has positive mass.
fn covering_model() -> impl Strategy<Value = DistributionModel> {
    (prop::collection::vec(0.2f64..2.0, 4), prop::option::of((-32i32..32, 0.05f64..0.3))).prop_map(|(d, atom)| {
        let total: f64 = d.iter().map(|w| w * 2.0).sum();
        let rest = atom.map_or(1.0, |a| 1.0 - a.1);
        let segs = d
            .iter()
            .enumerate()
            .map(|(i, w)| Segment {
                a: -4.0 + 2.0 * i as f64,
                b: -2.0 + 2.0 * i as f64,
                density: w / total * rest,
            })
            .collect();
        let atoms = atom
            .map(|(g, mass)| vec![Atom { location: g as f64 / 8.0, mass }])
            .unwrap_or_default();
        DistributionModel::new(atoms, segs).unwrap()
    })
}

fn regression() -> impl Strategy<Value = RegressionModel> {
    prop_oneof![
        (prop::collection::vec(-40i32..40, 1..5), prop::collection::vec(-2.0f64..2.0, 5)).prop_map(|(mut b, v)| {
            b.sort();
            b.dedup();
            let breaks: Vec<f64> = b.iter().map(|&g| g as f64 / 10.0).collect();
            let values = v[..breaks.len() + 1].to_vec();
            RegressionModel::Steps { breaks, values }
        }),
        prop::collection::vec((-40i32..40, -2.0f64..2.0), 2..5).prop_map(|mut k| {
            k.sort_by_key(|p| p.0);
            k.dedup_by_key(|p| p.0);
            if k.len() < 2 {
                k.push((k[0].0 + 1, 0.0));
            }
            RegressionModel::Linear {
                knots: k.into_iter().map(|(g, v)| (g as f64 / 10.0, v)).collect(),
            }
        }),
        (1u32..6).prop_map(|k| RegressionModel::Rademacher { k }),
    ]
}

fn monotone_regression() -> impl Strategy<Value = RegressionModel> {
    (prop::collection::vec(-40i32..40, 1..5), prop::collection::vec(0.0f64..1.0, 5)).prop_map(|(mut b, mut v)| {
        b.sort();
        b.dedup();
        v.sort_by(f64::total_cmp);
        let breaks: Vec<f64> = b.iter().map(|&g| g as f64 / 10.0).collect();
        let values = v[..breaks.len() + 1].to_vec();
        RegressionModel::Steps { breaks, values }
    })
}

/// A cell average is a difference of cumulative values divided by a mass of
/// order 2^-k, so its rounding error grows like 2^k; allow that once per
/// window cell.
fn rounding(k: u32, i: u32) -> f64 {
    1e-14 * 4f64.powi(k as i32 + 1) * i as f64
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![(-16i32..16).prop_map(|g| g as f64 / 8.0), -2.0f64..2.0], 1..50)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_open_additivity(m in model(), xs in samples(), a in -3.0f64..3.0, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
        let (b, c) = (a + d1, a + d1 + d2);
        let whole = interval_prob(&m, Interval::between(a, c).unwrap());
        let parts = interval_prob(&m, Interval::between(a, b).unwrap()) + interval_prob(&m, Interval::between(b, c).unwrap());
        prop_assert!((whole - parts).abs() <= 1e-12);
        let head = interval_prob(&m, Interval::up_to(a)) + interval_prob(&m, Interval::between(a, c).unwrap());
        prop_assert!((interval_prob(&m, Interval::up_to(c)) - head).abs() <= 1e-12);
        let seq = SampleSequence::new(xs.iter().map(|&x| (x, 1.0)).collect()).unwrap();
        let count = |iv| seq.count_in(iv);
        prop_assert_eq!(
            count(Interval::between(a, c).unwrap()),
            count(Interval::between(a, b).unwrap()) + count(Interval::between(b, c).unwrap())
        );
    }

    #[test]
    fn interval_class_dominates_half_lines(m in model(), xs in samples()) {
        let seq = SampleSequence::new(xs.iter().map(|&x| (x, 0.0)).collect()).unwrap();
        prop_assert!(sup_interval_discrepancy(&seq, &m).unwrap() >= kolmogorov_distance(&seq, &m).unwrap());
    }

    #[test]
    fn sampling_an_atom_moves_its_deviation_by_at_most_one_over_n(m in model(), xs in samples()) {
        let seq = SampleSequence::new(xs.iter().map(|&x| (x, 0.0)).collect()).unwrap();
        for a in m.atoms() {
            let before = (seq.atom_frequency(a.location) - a.mass).abs();
            let mut more = xs.clone();
            more.push(a.location);
            let n = more.len() as f64;
            let grown = SampleSequence::new(more.iter().map(|&x| (x, 0.0)).collect()).unwrap();
            let after = (grown.atom_frequency(a.location) - a.mass).abs();
            prop_assert!(after <= before + 1.0 / n + 1e-15);
        }
    }

    #[test]
    fn cell_of_refines(x in -1e6f64..1e6, k in 1u32..30) {
        let parent = cell_of(x, k).unwrap();
        let child = cell_of(x, k + 1).unwrap();
        prop_assert!(parent.children().contains(&child));
        prop_assert!(parent.interval().contains(x) && child.interval().contains(x));
    }

    #[test]
    fn rademacher_measure_bound(a in -0.2f64..1.2, len in 0.0f64..1.4, k in 1u32..=10) {
        let iv = Interval::between(a, a + len).unwrap();
        prop_assert!((nu_k(k, iv) - nu_k(0, iv)).abs() <= 2f64.powi(1 - k as i32));
    }

    #[test]
    fn quadrature_agrees_with_exact_on_step_functions(
        u in prop::collection::vec(-2.0f64..2.0, 16),
        v in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let f = PiecewiseDyadicFn::from_cells(4, 0.0, u.iter().enumerate().map(|(j, &y)| (j as i64 + 1, y)));
        let g = RegressionModel::Dyadic(PiecewiseDyadicFn::from_cells(3, 0.0, v.iter().enumerate().map(|(j, &y)| (j as i64 + 1, y))));
        let lambda = DistributionModel::lebesgue();
        let exact = l2_error_exact(&f, &g, &lambda);
        let q = l2_error_quadrature(&|x| f.eval(x), &|x| g.eval(x), &lambda, 1 << 16, Execution::default()).unwrap();
        prop_assert!((exact - q.value()).abs() <= 1e-6, "{} vs {}", exact, q.value());
    }

    #[test]
    fn errors_scale_quadratically(xs in prop::collection::vec(0.0f64..1.0, 1..200), k in 1u32..6, m in regression()) {
        let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, m.eval(x) + 0.25 * (x * 37.0).sin())).collect();
        let doubled: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x, 2.0 * y)).collect();
        let lambda = DistributionModel::lebesgue();
        let n = pairs.len();
        let e1 = histogram_estimate(&SampleSequence::new(pairs).unwrap(), k, n).unwrap();
        let e2 = histogram_estimate(&SampleSequence::new(doubled).unwrap(), k, n).unwrap();
        let (a, b) = match m.scaled(2.0) {
            Some(m2) => (l2_error_exact(&e1.function, &m, &lambda), l2_error_exact(&e2.function, &m2, &lambda)),
            None => return Ok(()),
        };
        prop_assert!((b - 4.0 * a).abs() <= 1e-12 * (1.0 + b), "{} vs 4 * {}", b, a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_identity(mu in model(), m in regression(), k in 1u32..10) {
        let coarse = average_over_partition(&m, &mu, k).unwrap();
        let fine = average_over_partition(&m, &mu, k + 1).unwrap();
        for (j, direct) in coarse.cells() {
            let [c1, c2] = DyadicCell { k, j }.children();
            let (w1, w2) = (interval_prob(&mu, c1.interval()), interval_prob(&mu, c2.interval()));
            let merged = (fine.value_at_cell(c1.j) * w1 + fine.value_at_cell(c2.j) * w2) / (w1 + w2);
            prop_assert!((merged - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "cell {}: {} vs {}", j, merged, direct);
        }
    }

    #[test]
    fn whole_line_average_is_the_mean(mu in model(), m in regression()) {
        let whole = average_over_partition(&m, &mu, 0).unwrap();
        let fine = average_over_partition(&m, &mu, 1).unwrap();
        let merged: f64 = fine.cells().map(|(j, v)| v * interval_prob(&mu, DyadicCell { k: 1, j }.interval())).sum();
        prop_assert!((whole.eval(0.0) - merged).abs() <= 1e-12);
    }

    #[test]
    fn averaging_contracts_variation(mu in covering_model(), m in regression(), k in 0u32..=12, i in 1u32..=4) {
        let avg = average_over_partition(&m, &mu, k).unwrap();
        let (va, vm) = (avg.total_variation_window(i), m.variation(-(i as f64), i as f64));
        prop_assert!(va <= 3.0 * vm + rounding(k, i), "V(avg) = {} > 3 V(m) = {}", va, 3.0 * vm);
    }

    #[test]
    fn averaging_monotone_does_not_add_variation(mu in covering_model(), m in monotone_regression(), k in 0u32..=12, i in 1u32..=4) {
        let avg = average_over_partition(&m, &mu, k).unwrap();
        let (va, vm) = (avg.total_variation_window(i), m.variation(-(i as f64), i as f64));
        prop_assert!(va <= vm + rounding(k, i), "V(avg) = {} > V(m) = {}", va, vm);
    }

    #[test]
    fn frozen_estimates_replay(xs in prop::collection::vec(0.0f64..1.0, 1..400), c in 0.05f64..3.0, m in regression()) {
        let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, m.eval(x))).collect();
        let budget = VariationBudget::Constant(c);
        let mut est = Estimator::new(EstimatorConfig::new(budget.clone()));
        est.ingest_all(&pairs).unwrap();
        let seq = SampleSequence::new(pairs).unwrap();
        for (k, (&t, f)) in est.tau().iter().zip(est.frozen()).enumerate() {
            prop_assert_eq!(&histogram_estimate(&seq, k as u32, t).unwrap().function, f);
            prop_assert!(k == 0 || variation_check(f, &budget));
        }
        prop_assert!(est.checkpoint().verify(&seq).is_ok());
    }
}

#[test]
fn rademacher_labels_are_right_open() {
    assert_eq!(rademacher_eval(3, 0.125), 0.0);
    assert_eq!(rademacher_eval(3, 0.125f64.next_down()), 1.0);
    assert_eq!(rademacher_eval(3, 1.0), 0.0);
}
