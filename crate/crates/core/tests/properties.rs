use proptest::prelude::*;

use ubauc::baselines::svm_objective;
use ubauc::dataset::{parse_libsvm, write_libsvm, ScalingParams};
use ubauc::metrics::{auc_risk, auc_risk_pairwise, auc_risk_rank, ScoredSample, TiePolicy};
use ubauc::surrogate::{bound_constants, objective_value, surrogate_sorted, surrogate_variational};
use ubauc::topk::{topk_sum_direct, topk_sum_variational};
use ubauc::{Dataset, Example, LinearModel, Objective, SparseVector};

/// Labeled scores with both classes present.
fn samples(max_len: usize) -> impl Strategy<Value = Vec<ScoredSample>> {
    prop::collection::vec((-50.0f64..50.0, any::<bool>()), 2..max_len)
        .prop_filter("both classes", |v| v.iter().any(|s| s.1) && v.iter().any(|s| !s.1))
        .prop_map(|v| v.into_iter().map(|(c, p)| ScoredSample { score: c, positive: p }).collect())
}

/// Labeled scores on a grid of distinct values, both classes present.
fn distinct_samples(max_len: usize) -> impl Strategy<Value = Vec<ScoredSample>> {
    prop::collection::vec((0u32..100_000, any::<bool>()), 2..max_len)
        .prop_map(|v| {
            let mut seen = std::collections::BTreeMap::new();
            for (k, p) in v {
                seen.entry(k).or_insert(p);
            }
            seen.into_iter()
                .map(|(k, p)| ScoredSample { score: k as f64 / 1000.0 - 50.0, positive: p })
                .collect::<Vec<_>>()
        })
        .prop_filter("both classes", |v| v.iter().any(|s| s.positive) && v.iter().any(|s| !s.positive))
}

fn small_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..5, 2usize..20).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
            .prop_map(|(rows, labels)| {
                let labels: Vec<i64> = labels.iter().map(|&b| if b { 1 } else { -1 }).collect();
                Dataset::from_dense(&rows, &labels).unwrap()
            })
    })
}

fn model_for(dim: usize) -> impl Strategy<Value = LinearModel> {
    (prop::collection::vec(-2.0f64..2.0, dim), -2.0f64..2.0)
        .prop_map(|(weights, threshold)| LinearModel { weights, threshold })
}

proptest! {
    #[test]
    fn rank_form_equals_pairwise_form(s in distinct_samples(300)) {
        let pairwise = auc_risk_pairwise(&s, TiePolicy::Half).unwrap();
        prop_assert!((pairwise - auc_risk_rank(&s).unwrap()).abs() <= 1e-12);
        prop_assert!((pairwise - auc_risk(&s, TiePolicy::Half).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn tie_grouped_risk_matches_pairs_with_ties(
        v in prop::collection::vec((0u8..6, any::<bool>()), 2..80)
            .prop_filter("both", |v| v.iter().any(|s| s.1) && v.iter().any(|s| !s.1))
    ) {
        let s: Vec<ScoredSample> = v.iter().map(|&(c, p)| ScoredSample { score: c as f64, positive: p }).collect();
        for policy in [TiePolicy::Half, TiePolicy::Strict] {
            prop_assert_eq!(auc_risk(&s, policy).unwrap(), auc_risk_pairwise(&s, policy).unwrap());
        }
    }

    #[test]
    fn risk_invariant_under_monotone_maps(s in samples(200)) {
        let base = auc_risk(&s, TiePolicy::Half).unwrap();
        let mapped: Vec<ScoredSample> = s
            .iter()
            .map(|x| ScoredSample { score: (x.score / 10.0).exp() * 3.0 - 7.0, ..*x })
            .collect();
        prop_assert_eq!(base, auc_risk(&mapped, TiePolicy::Half).unwrap());
    }

    #[test]
    fn surrogate_forms_agree(s in samples(300)) {
        let a = surrogate_sorted(&s).unwrap().value;
        let b = surrogate_variational(&s).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn bound_constants_sandwich_the_risk(s in distinct_samples(200)) {
        let k = bound_constants(&s).unwrap();
        let l = surrogate_sorted(&s).unwrap().value;
        let risk = auc_risk(&s, TiePolicy::Half).unwrap();
        let tol = 1e-9 * (k.alpha_upper * l).max(1.0);
        prop_assert!(k.alpha_upper * l + tol >= risk);
        prop_assert!(risk + tol >= k.alpha_lower * l);
    }

    #[test]
    fn topk_identity(z in prop::collection::vec(-100.0f64..100.0, 1..300), kf in 0.0f64..1.0) {
        let k = 1 + ((z.len() - 1) as f64 * kf) as usize;
        let direct = topk_sum_direct(&z, k).unwrap();
        let var = topk_sum_variational(&z, k).unwrap();
        prop_assert!((direct - var.sum).abs() <= 1e-12 * direct.abs().max(1.0));
        prop_assert!(var.lambda_range.contains(var.lambda_star));
    }

    #[test]
    fn svm_objective_dominates_surrogate(
        (ds, model) in small_dataset().prop_flat_map(|ds| { let d = ds.dim(); (Just(ds), model_for(d)) })
    ) {
        let scores = ubauc::metrics::score_dataset(&model, &ds).unwrap();
        let l = surrogate_variational(&scores).unwrap().value;
        let pairs = (ds.n_pos() * ds.n_neg()) as f64;
        prop_assert!(svm_objective(&model, &ds).unwrap() + 1e-9 >= pairs * l);
    }

    #[test]
    fn objective_is_convex(
        (ds, a, b) in small_dataset().prop_flat_map(|ds| { let d = ds.dim(); (Just(ds), model_for(d), model_for(d)) }),
        t in 0.0f64..1.0,
        beta in 0.0f64..3.0,
        gamma in 0.0f64..3.0,
    ) {
        let obj = Objective::new(beta, gamma);
        let mix = LinearModel {
            weights: a.weights.iter().zip(&b.weights).map(|(x, y)| t * x + (1.0 - t) * y).collect(),
            threshold: t * a.threshold + (1.0 - t) * b.threshold,
        };
        let fm = objective_value(&mix, &ds, &obj).unwrap();
        let fa = objective_value(&a, &ds, &obj).unwrap();
        let fb = objective_value(&b, &ds, &obj).unwrap();
        prop_assert!(fm <= t * fa + (1.0 - t) * fb + 1e-9);
    }

    #[test]
    fn libsvm_round_trip(
        rows in prop::collection::vec(
            (prop::collection::btree_map(0u32..50, -1e3f64..1e3, 0..8), -3i64..4), 1..30)
    ) {
        let examples: Vec<Example> = rows
            .into_iter()
            .map(|(m, label)| {
                let (indices, values): (Vec<u32>, Vec<f64>) = m.into_iter().filter(|(_, v)| *v != 0.0).unzip();
                Example { features: SparseVector::new(indices, values, 50).unwrap(), label }
            })
            .collect();
        let ds = Dataset::new(examples, 50).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        let back = parse_libsvm(&buf[..]).unwrap().with_dim(50).unwrap();
        prop_assert_eq!(ds.examples(), back.examples());
    }

    #[test]
    fn model_json_round_trip(m in model_for(6)) {
        let json = serde_json::to_string(&m).unwrap();
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(m, back);
    }

    #[test]
    fn scaling_maps_training_data_into_unit_box(ds in small_dataset()) {
        let params = ScalingParams::fit(&ds).unwrap();
        let scaled = params.apply(&ds).unwrap();
        for ex in scaled.examples() {
            for (_, v) in ex.features.iter() {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}
