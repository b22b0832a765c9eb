use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subinfo::bench::instances::{random_instance, Shape};
use subinfo::bench::synth::{Study, SyntheticConfig};
use subinfo::bench::synth_generate;
use subinfo::optimizer::{greedy_maximize, master_solve, FlavorSets, MeasureObjective, Objective};
use subinfo::{Context, Family, Flavor, FunctionSpec, GreedyOptions, MeasureMode, Metric};

fn modes(family: Family) -> Vec<MeasureMode> {
    let mut m = vec![MeasureMode::Base, MeasureMode::Smi, MeasureMode::Cg];
    if family != Family::GraphCut {
        m.push(MeasureMode::Csmi);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // about a hundred instances per family
    #[test]
    fn lazy_matches_naive(seed in any::<u64>(), fi in 0usize..Family::ALL.len(), mi in 0usize..4) {
        let family = Family::ALL[fi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape { max_ground: 10, ..Shape::default() };
        let inst = random_instance(&mut rng, family, shape).unwrap();
        let ms = modes(family);
        let mode = ms[mi % ms.len()];
        let obj = MeasureObjective::new(inst.spec.clone(), &inst.ctx, mode, &inst.q, &inst.p);
        let n = obj.p.iter().filter(|&&i| i < inst.ctx.n_ground()).count();
        let k = rng.random_range(0..=inst.ctx.n_ground() - n);
        let lazy = greedy_maximize(&obj, k, GreedyOptions::default());
        let naive = greedy_maximize(&obj, k, GreedyOptions::naive());
        match (lazy, naive) {
            (Ok(l), Ok(n)) => {
                prop_assert_eq!(&l.indices, &n.indices);
                prop_assert!((l.value - n.value).abs() <= 1e-9 * n.value.abs().max(1.0));
            }
            // an indefinite conditioned log-det kernel fails both ways
            (Err(_), Err(_)) => {}
            (l, n) => prop_assert!(false, "lazy {:?} vs naive {:?}", l.is_ok(), n.is_ok()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn submodular_gains_do_not_increase(seed in any::<u64>(), fi in 0usize..6) {
        let family = [
            Family::SetCover,
            Family::ProbSetCover,
            Family::GraphCut,
            Family::FacilityLocation1,
            Family::FacilityLocation2,
            Family::ConcaveOverModular,
        ][fi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, family, Shape { cosine: false, ..Shape::default() }).unwrap();
        let obj = MeasureObjective::new(inst.spec.clone(), &inst.ctx, MeasureMode::Smi, &inst.q, &[]);
        let sel = greedy_maximize(&obj, inst.ctx.n_ground(), GreedyOptions::default()).unwrap();
        for w in sel.gains.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", sel.gains);
        }
    }

    #[test]
    fn relabeling_the_ground_set_relabels_the_selection(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ng = 8;
        let nq = 2;
        let n = ng + nq;
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let rbf = |a: [f64; 2], b: [f64; 2]| (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / 2.0).exp();
        let mut perm: Vec<usize> = (0..ng).collect();
        perm.shuffle(&mut rng);
        // position x of the relabeled ground set holds original item perm[x]
        let orig = |x: usize| if x < ng { perm[x] } else { x };
        let m = DMatrix::from_fn(n, n, |i, j| rbf(pts[i], pts[j]));
        let mp = DMatrix::from_fn(n, n, |i, j| rbf(pts[orig(i)], pts[orig(j)]));
        let q: Vec<usize> = (ng..n).collect();
        for family in [Family::FacilityLocation1, Family::GraphCut, Family::LogDet, Family::ConcaveOverModular] {
            let spec = FunctionSpec::new(family).with_eta(0.7);
            let c1 = Context::from_matrix(m.clone(), ng, Metric::Rbf { sigma: 1.0 }, 1e-6).unwrap();
            let c2 = Context::from_matrix(mp.clone(), ng, Metric::Rbf { sigma: 1.0 }, 1e-6).unwrap();
            let o1 = MeasureObjective::new(spec.clone(), &c1, MeasureMode::Smi, &q, &[]);
            let a = greedy_maximize(&o1, k, GreedyOptions::default()).unwrap();
            let b = greedy_maximize(&MeasureObjective::new(spec, &c2, MeasureMode::Smi, &q, &[]), k, GreedyOptions::default()).unwrap();
            let mapped: Vec<usize> = b.indices.iter().map(|&x| orig(x)).collect();
            // summation order differs after relabeling, so near-ties may break
            // either way; the first divergent pick must then be a near-tie
            if let Some(t) = (0..k).find(|&t| a.indices[t] != mapped[t]) {
                let mut alt = a.indices[..t].to_vec();
                alt.push(mapped[t]);
                let va = o1.value_of(&a.indices[..=t]).unwrap();
                let vb = o1.value_of(&alt).unwrap();
                prop_assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{} {:?} vs {:?}", family, a.indices, mapped);
            }
            prop_assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1.0));
        }
    }
}

#[test]
fn fl1_query_summary_matches_naive_greedy() {
    let inst = synth_generate(&SyntheticConfig::default()).unwrap();
    let ctx = inst.context().unwrap();
    let sets = FlavorSets {
        query: Some(inst.query_indices()),
        private: Some(inst.private_indices()),
        previous: None,
    };
    let spec = FunctionSpec::new(Family::FacilityLocation1);
    let flavor = Study::Query.flavor();
    let lazy = master_solve(flavor, &spec, &ctx, &sets, 10, GreedyOptions::default()).unwrap();
    let naive = master_solve(flavor, &spec, &ctx, &sets, 10, GreedyOptions::naive()).unwrap();
    assert_eq!(lazy.indices, naive.indices);
    assert_eq!(lazy.len(), 10);
    assert_eq!(lazy.flavor, Some(Flavor::Query));
}
