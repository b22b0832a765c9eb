use proptest::prelude::*;

use super::*;
use crate::bench::tasks::{learning_task, task_examples, LearningTaskConfig};
use crate::error::Error;
use crate::functions::{measure, param_gradient, Family, FunctionSpec, MeasureMode};
use crate::instance::{ConceptData, Context};
use crate::optimizer::Flavor;

fn tiny_examples() -> Vec<TrainingExample> {
    let cfg = LearningTaskConfig {
        collections: 2,
        items: 8,
        topics: 3,
        k: 3,
        references: 2,
        ..Default::default()
    };
    task_examples(&learning_task(&cfg).unwrap(), None).unwrap()
}

fn model(families: &[Family], weights: &[f64]) -> MixtureModel {
    let specs = families.iter().map(|&f| FunctionSpec::new(f)).collect();
    MixtureModel::new(specs, weights.to_vec(), Flavor::Query, 0.0).unwrap()
}

/// All subsets of `0..n` with at most `k` items.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

#[test]
fn weight_scales_a_single_component() {
    let ex = &tiny_examples()[0];
    let one = model(&[Family::FacilityLocation2], &[1.0]);
    let two = model(&[Family::FacilityLocation2], &[2.0]);
    for y in [vec![0], vec![1, 4], vec![2, 3, 5]] {
        let a = mixture_eval(&one, ex, &y).unwrap();
        assert!((mixture_eval(&two, ex, &y).unwrap() - 2.0 * a).abs() < 1e-12);
    }
    let zero = model(&[Family::FacilityLocation2, Family::GraphCut], &[0.0, 0.0]);
    assert_eq!(mixture_eval(&zero, ex, &[0, 1, 2]).unwrap(), 0.0);
}

#[test]
fn two_component_mixture_matches_the_hand_sum() {
    // 5 ground items and one query, with concepts and a kernel
    let counts = vec![
        vec![(0, 1)],
        vec![(0, 1), (1, 1)],
        vec![(2, 1)],
        vec![(1, 2)],
        vec![(3, 1)],
        vec![(0, 1), (2, 1)],
    ];
    let cd = ConceptData::new(vec![1.0, 0.5, 2.0, 1.0], counts).unwrap();
    let m = nalgebra::DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { 1.0 / (1.0 + (i as f64 - j as f64).abs()) });
    let ctx = Context::from_matrix(m, 5, crate::kernel::Metric::Dot, 0.0)
        .unwrap()
        .with_concepts(cd)
        .unwrap();
    let ex = TrainingExample {
        collection: "hand".into(),
        ctx,
        query: vec![5],
        private: vec![],
        previous: vec![],
        references: vec![vec![0, 2]],
        k: 2,
    };
    let mix = model(&[Family::SetCover, Family::GraphCut], &[0.7, 1.3]);
    let y = [1, 2];
    let sc = measure(&FunctionSpec::new(Family::SetCover), &ex.ctx, MeasureMode::Smi, &y, &[5], &[]).unwrap();
    let gc = measure(&FunctionSpec::new(Family::GraphCut), &ex.ctx, MeasureMode::Smi, &y, &[5], &[]).unwrap();
    // query covers concepts 0 and 2, both covered by Y
    assert_eq!(sc, 3.0);
    // 2λ Σ s(y, q) = 2 (1/5 + 1/4)
    assert!((gc - 0.9).abs() < 1e-12);
    assert!((mixture_eval(&mix, &ex, &y).unwrap() - (0.7 * 3.0 + 1.3 * 0.9)).abs() < 1e-12);
}

#[test]
fn graph_cut_is_rejected_for_conditional_mutual_information() {
    let specs = vec![FunctionSpec::new(Family::GraphCut)];
    assert!(matches!(
        MixtureModel::new(specs, vec![1.0], Flavor::QueryPrivacy, 0.0),
        Err(Error::Config(_))
    ));
}

#[test]
fn zero_margin_reduces_to_plain_greedy() {
    // zero-one margin against a reference of the wrong size is constant 1
    let ex = &tiny_examples()[0];
    let m = model(&[Family::FacilityLocation1, Family::GraphCut], &[0.6, 0.3]);
    let plain = summarize(&m, ex).unwrap();
    let (y, v) = loss_augmented_inference(&m, ex, MarginLoss::ZeroOne, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
    assert_eq!(y, plain.indices);
    assert!((v - (plain.value + 1.0)).abs() < 1e-9);
}

#[test]
fn zero_weights_give_the_largest_margin() {
    let ex = &tiny_examples()[0];
    let m = model(&[Family::FacilityLocation1], &[0.0]);
    let r = &ex.references[0];
    let l = hinge_loss(&m, ex, MarginLoss::OneMinusVrouge, r).unwrap();
    let best = subsets(ex.ctx.n_ground(), ex.k)
        .iter()
        .map(|y| margin_value(MarginLoss::OneMinusVrouge, &ex.ctx, y, r).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, 1.0);
    assert!((l - best).abs() < 1e-12);
}

#[test]
fn greedy_hinge_never_exceeds_the_exact_hinge() {
    let ex = &tiny_examples()[0];
    let m = model(&[Family::SetCover, Family::FacilityLocation2], &[0.4, 0.9]);
    for r in &ex.references {
        let greedy = hinge_loss(&m, ex, MarginLoss::OneMinusVrouge, r).unwrap();
        let exact = subsets(ex.ctx.n_ground(), ex.k)
            .iter()
            .map(|y| {
                mixture_eval(&m, ex, y).unwrap() + margin_value(MarginLoss::OneMinusVrouge, &ex.ctx, y, r).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max)
            - mixture_eval(&m, ex, r).unwrap();
        assert!(greedy <= exact + 1e-9, "{greedy} > {exact}");
        // the reference itself is a candidate
        assert!(exact >= -1e-12);
    }
}

#[test]
fn reference_as_unique_maximizer_has_zero_loss_and_gradient() {
    // a steep single component makes its own greedy summary beat every
    // other candidate by more than the unit margin
    let mut ex = tiny_examples().remove(0);
    let m = model(&[Family::GraphCut], &[50.0]);
    ex.references = vec![summarize(&m, &ex).unwrap().indices];
    let l = example_loss(&m, &ex, MarginLoss::ZeroOne).unwrap();
    assert_eq!(l.loss, 0.0);
    assert!(l.grad.iter().all(|g| *g == 0.0));

    let mut m0 = m.clone();
    m0.reg_strength = 0.01;
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.1,
        momentum: 0.0,
        margin: MarginLoss::ZeroOne,
        restarts: 1,
        parallel: false,
    };
    let trained = train(&[ex], &m0, &cfg).unwrap();
    let trace = &trained.metadata.trace;
    // only shrinkage acts: the objective is the regularizer and falls each epoch
    assert!(trace.iter().all(|r| r.mean_hinge == 0.0));
    assert!(trace.windows(2).all(|w| w[1].objective < w[0].objective));
}

#[test]
fn weight_gradient_is_the_value_difference() {
    let ex = &tiny_examples()[1];
    let m = model(&[Family::FacilityLocation2, Family::ConcaveOverModular], &[0.5, 0.8]);
    let mut one = ex.clone();
    one.references.truncate(1);
    let r = &one.references[0];
    let (y_hat, _) = loss_augmented_inference(&m, &one, MarginLoss::OneMinusVrouge, r).unwrap();
    let l = example_loss(&m, &one, MarginLoss::OneMinusVrouge).unwrap();
    assert!(l.loss > 0.0);
    for (e, (i, slot)) in m.layout().into_iter().enumerate() {
        if slot == ParamSlot::Weight {
            let spec = &m.components[i];
            let fy = measure(spec, &one.ctx, MeasureMode::Smi, &y_hat, &one.query, &[]).unwrap();
            let fr = measure(spec, &one.ctx, MeasureMode::Smi, r, &one.query, &[]).unwrap();
            assert_eq!(l.grad[e], fy - fr);
        }
    }
}

#[test]
fn multiple_references_average() {
    let ex = &tiny_examples()[0];
    let m = model(&[Family::FacilityLocation1, Family::LogDet], &[0.2, 0.1]);
    let all = example_loss(&m, ex, MarginLoss::OneMinusVrouge).unwrap();
    let mut loss = 0.0;
    let mut grad = vec![0.0; all.grad.len()];
    for r in &ex.references {
        let mut one = ex.clone();
        one.references = vec![r.clone()];
        let l = example_loss(&m, &one, MarginLoss::OneMinusVrouge).unwrap();
        loss += l.loss;
        grad.iter_mut().zip(&l.grad).for_each(|(a, b)| *a += b);
    }
    let n = ex.references.len() as f64;
    assert!((all.loss - loss / n).abs() < 1e-12);
    for (a, b) in all.grad.iter().zip(&grad) {
        assert!((a - b / n).abs() < 1e-12);
    }
}

#[test]
fn zero_learning_rate_keeps_theta() {
    let data = tiny_examples();
    let m0 = MixtureModel::init(
        vec![FunctionSpec::new(Family::FacilityLocation1), FunctionSpec::new(Family::GraphCut)],
        Flavor::Query,
        1e-3,
        3,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 0.0,
        ..Default::default()
    };
    let m = train(&data, &m0, &cfg).unwrap();
    assert_eq!(m.theta(), m0.theta());
    assert_eq!(m.metadata.trace.len(), 4);
}

#[test]
fn theta_stays_nonnegative_and_trace_is_recorded() {
    let data = tiny_examples();
    let m0 = MixtureModel::init(
        vec![FunctionSpec::new(Family::FacilityLocation2), FunctionSpec::new(Family::LogDet)],
        Flavor::Query,
        1e-3,
        5,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        learning_rate: 0.5,
        ..Default::default()
    };
    let m = train(&data, &m0, &cfg).unwrap();
    assert!(m.theta().iter().all(|t| *t >= 0.0));
    let trace = &m.metadata.trace;
    assert_eq!(trace.len(), 7);
    let best = m.metadata.best_epoch.unwrap();
    assert!(trace.iter().all(|r| r.objective >= trace[best].objective));
    assert!(trace[best].objective <= trace[0].objective);

    let mut csv = Vec::new();
    write_trace_csv(&mut csv, trace).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("epoch,objective,mean_hinge,mean_vrouge\n"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn model_json_round_trip() {
    let m = MixtureModel::init(
        vec![FunctionSpec::new(Family::ConcaveOverModular).with_eta(0.3)],
        Flavor::Query,
        1e-3,
        9,
    )
    .unwrap();
    let back = MixtureModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    assert!(MixtureModel::from_json(&m.to_json().unwrap().replace("\"weights\": [\n    0", "\"weights\": [\n    -0.5, 0")).is_err());
}

#[test]
fn convex_in_the_weights() {
    // the set-cover families have no internal parameters, leaving only w
    let data = tiny_examples();
    let comps = vec![FunctionSpec::new(Family::SetCover), FunctionSpec::new(Family::ProbSetCover)];
    let cfg = TrainConfig {
        epochs: 500,
        learning_rate: 0.01,
        momentum: 0.5,
        margin: MarginLoss::OneMinusVrouge,
        restarts: 1,
        parallel: false,
    };
    let mut finals = Vec::new();
    for seed in [1, 2] {
        let m0 = MixtureModel::init(comps.clone(), Flavor::Query, 0.1, seed).unwrap();
        assert_eq!(m0.layout().len(), 2);
        let m = train(&data, &m0, &cfg).unwrap();
        finals.push(m.metadata.trace[m.metadata.best_epoch.unwrap()].objective);
    }
    assert!((finals[0] - finals[1]).abs() < 1e-3, "{finals:?}");
}

#[test]
fn finite_differences_agree_away_from_kinks() {
    let ex = &tiny_examples()[0];
    let specs = vec![
        FunctionSpec::new(Family::FacilityLocation2).with_eta(0.7),
        FunctionSpec::new(Family::LogDet).with_eta(0.4),
        FunctionSpec::new(Family::ConcaveOverModular).with_eta(1.3),
    ];
    let m = MixtureModel::new(specs, vec![0.5, 1.0, 0.8], Flavor::Query, 0.0).unwrap();
    let rep = finite_diff_check(&m, ex, MarginLoss::OneMinusVrouge, 1e-5).unwrap();
    assert_eq!(rep.entries.len(), m.layout().len());
    if !rep.kink {
        assert!(rep.max_error <= 1e-4, "{rep:?}");
    }
    assert!(finite_diff_check(&m, ex, MarginLoss::OneMinusVrouge, 0.0).is_err());
}

#[test]
fn gradient_of_an_unused_parameter_is_zero() {
    let ex = &tiny_examples()[0];
    let spec = FunctionSpec::new(Family::ConcaveOverModular);
    let g = param_gradient(&spec, &ex.ctx, MeasureMode::Smi, &[0, 1], &ex.query, &[]).unwrap();
    assert_eq!((g.lambda, g.nu), (0.0, 0.0));
}

#[test]
fn config_validation() {
    assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { learning_rate: -1.0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { momentum: 1.0, ..Default::default() }.validate().is_err());
    assert_eq!("zero-one".parse::<MarginLoss>().unwrap(), MarginLoss::ZeroOne);
    assert!("hamming".parse::<MarginLoss>().is_err());
    let m = model(&[Family::SetCover], &[1.0]);
    assert!(train(&[], &m, &TrainConfig::default()).is_err());
    let mut ex = tiny_examples().remove(0);
    ex.references = vec![vec![99]];
    assert!(matches!(
        hinge_loss(&m, &ex, MarginLoss::ZeroOne, &[99]),
        Err(Error::Config(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hinge_is_at_least_the_margin_of_the_reference(w0 in 0.0f64..2.0, w1 in 0.0f64..2.0, which in 0usize..2) {
        let data = tiny_examples();
        let ex = &data[which];
        let m = model(&[Family::FacilityLocation1, Family::GraphCut], &[w0, w1]);
        for r in &ex.references {
            let l = example_loss(&m, &TrainingExample { references: vec![r.clone()], ..ex.clone() }, MarginLoss::OneMinusVrouge).unwrap();
            prop_assert!(l.loss >= 0.0);
        }
    }
}
