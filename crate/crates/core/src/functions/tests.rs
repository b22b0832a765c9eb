use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bench::instances::{random_instance, Shape};
use crate::instance::ConceptData;
use crate::kernel::Metric;

fn concepts(sets: &[&[usize]], universe: usize) -> ConceptData {
    let counts = sets.iter().map(|s| s.iter().map(|&c| (c, 1)).collect()).collect();
    ConceptData::new(vec![1.0; universe], counts).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn kernel_ctx(m: DMatrix<f64>, n_ground: usize) -> Context {
    Context::from_matrix(m, n_ground, Metric::Dot, 0.0).unwrap()
}

#[test]
fn set_cover_examples() {
    // items: a, b in V; q, p in V'; concepts 1,2,3 at 0,1,2
    let cd = concepts(&[&[0, 1], &[1, 2], &[1, 2], &[1]], 3);
    let ctx = Context::from_concepts(cd, 2).unwrap();
    let sc = FunctionSpec::new(Family::SetCover);
    assert_eq!(eval_base(&sc, &ctx, &[0, 1]).unwrap(), 3.0);
    assert_eq!(eval_base(&sc, &ctx, &[]).unwrap(), 0.0);
    assert_eq!(smi(&sc, &ctx, &[0], &[2]).unwrap(), 1.0);
    assert_eq!(cg(&sc, &ctx, &[0], &[3]).unwrap(), 1.0);
    assert_eq!(csmi(&sc, &ctx, &[0], &[2], &[3]).unwrap(), 0.0);
    assert_eq!(smi(&sc, &ctx, &[0], &[]).unwrap(), 0.0);
}

#[test]
fn graph_cut_examples() {
    let ctx = kernel_ctx(dmatrix![1.0, 0.5; 0.5, 1.0], 1);
    let gc = FunctionSpec::new(Family::GraphCut);
    assert!(close(smi(&gc, &ctx, &[0], &[1]).unwrap(), 1.0, 1e-12));
    assert!(close(
        definitional_oracle(&gc, &ctx, MeasureMode::Smi, &[0], &[1], &[]).unwrap(),
        1.0,
        1e-12
    ));

    let ctx = kernel_ctx(dmatrix![1.0, 0.4; 0.4, 1.0], 1);
    let gc = FunctionSpec::new(Family::GraphCut).with_nu(2.0);
    assert_eq!(eval_base(&gc, &ctx, &[0]).unwrap(), 0.0);
    assert!(close(cg(&gc, &ctx, &[0], &[1]).unwrap(), -1.6, 1e-12));
    assert!(close(
        definitional_oracle(&gc, &ctx, MeasureMode::Cg, &[0], &[], &[1]).unwrap(),
        -1.6,
        1e-12
    ));
    assert!(matches!(csmi(&gc, &ctx, &[0], &[], &[1]), Err(Error::Unsupported(_))));
}

#[test]
fn fl2_single_pair() {
    let ctx = kernel_ctx(dmatrix![1.0, 0.7; 0.7, 1.0], 1);
    let fl2 = FunctionSpec::new(Family::FacilityLocation2);
    assert!(close(smi(&fl2, &ctx, &[0], &[1]).unwrap(), 1.4, 1e-12));
    assert!(close(
        definitional_oracle(&fl2, &ctx, MeasureMode::Smi, &[0], &[1], &[]).unwrap(),
        1.4,
        1e-12
    ));
}

#[test]
fn logdet_without_cross_similarity_shares_nothing() {
    let m = dmatrix![
        1.0, 0.3, 0.0;
        0.3, 1.0, 0.0;
        0.0, 0.0, 1.0
    ];
    let ctx = Context::from_matrix(m, 2, Metric::Dot, 1e-6).unwrap();
    let ld = FunctionSpec::new(Family::LogDet);
    assert!(smi(&ld, &ctx, &[0, 1], &[2]).unwrap().abs() < 1e-12);
    let single = eval_base(&ld, &ctx, &[2]).unwrap();
    assert!(close(single, (1.0f64 + 1e-6).ln(), 1e-12));
}

#[test]
fn missing_concepts_is_a_config_error() {
    let ctx = kernel_ctx(DMatrix::identity(2, 2), 2);
    assert!(matches!(
        eval_base(&FunctionSpec::new(Family::SetCover), &ctx, &[0]),
        Err(Error::Config(_))
    ));
}

#[test]
fn set_checks() {
    let ctx = kernel_ctx(DMatrix::identity(3, 3), 2);
    let gc = FunctionSpec::new(Family::GraphCut);
    assert!(smi(&gc, &ctx, &[2], &[]).is_err());
    assert!(smi(&gc, &ctx, &[0], &[1]).is_err());
    assert!(smi(&gc, &ctx, &[0, 0], &[2]).is_err());
    assert!(smi(&gc, &ctx, &[0], &[5]).is_err());
}

#[test]
fn spec_parsing() {
    let s: FunctionSpec = "fl2,eta=0.2,nu=3".parse().unwrap();
    assert_eq!((s.family, s.eta, s.nu), (Family::FacilityLocation2, 0.2, 3.0));
    let s: FunctionSpec = r#"{"family":"graph_cut","lambda":2.0}"#.parse().unwrap();
    assert_eq!((s.family, s.lambda, s.eta), (Family::GraphCut, 2.0, 1.0));
    assert!("fl2,eta=-1".parse::<FunctionSpec>().is_err());
    assert!("nothing".parse::<FunctionSpec>().is_err());
    for f in Family::ALL {
        assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
    }
}

#[test]
fn graph_cut_lambda_gradient_by_hand() {
    let ctx = kernel_ctx(DMatrix::from_element(3, 3, 1.0), 3);
    let gc = FunctionSpec::new(Family::GraphCut);
    let g = param_gradient(&gc, &ctx, MeasureMode::Base, &[0, 1, 2], &[], &[]).unwrap();
    assert_eq!(g.lambda, -9.0);
}

#[test]
fn modular_graph_cut_gain_is_constant() {
    let m = dmatrix![
        1.0, 0.2, 0.6;
        0.2, 1.0, 0.1;
        0.6, 0.1, 1.0
    ];
    let ctx = kernel_ctx(m.clone(), 3);
    let gc = FunctionSpec::new(Family::GraphCut).with_lambda(0.0);
    let mut st = make_state(&gc, &ctx, MeasureMode::Base, &[], &[]).unwrap();
    let col = |j: usize| m.column(j).sum();
    assert!(close(st.gain(2).unwrap(), col(2), 1e-12));
    st.commit(0).unwrap();
    assert!(close(st.gain(2).unwrap(), col(2), 1e-12));
}

const MODES: [MeasureMode; 4] = [MeasureMode::Base, MeasureMode::Smi, MeasureMode::Cg, MeasureMode::Csmi];

fn supported(family: Family, mode: MeasureMode) -> bool {
    !(family == Family::GraphCut && mode == MeasureMode::Csmi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_forms_match_the_oracle(seed in any::<u64>(), fi in 0usize..Family::ALL.len()) {
        let family = Family::ALL[fi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, family, Shape::default()).unwrap();
        for mode in MODES {
            if !supported(family, mode) {
                continue;
            }
            let c = measure(&inst.spec, &inst.ctx, mode, &inst.a, &inst.q, &inst.p).unwrap();
            let o = definitional_oracle(&inst.spec, &inst.ctx, mode, &inst.a, &inst.q, &inst.p).unwrap();
            prop_assert!(close(c, o, 1e-8), "{family} {mode}: closed {c} oracle {o}");
        }
    }

    #[test]
    fn states_match_recomputation(seed in any::<u64>(), fi in 0usize..Family::ALL.len()) {
        let family = Family::ALL[fi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, family, Shape::default()).unwrap();
        for mode in MODES {
            if !supported(family, mode) {
                continue;
            }
            let mut st = make_state(&inst.spec, &inst.ctx, mode, &inst.q, &inst.p).unwrap();
            let mut a = Vec::new();
            for j in inst.free() {
                let before = measure(&inst.spec, &inst.ctx, mode, &a, &inst.q, &inst.p).unwrap();
                a.push(j);
                let after = measure(&inst.spec, &inst.ctx, mode, &a, &inst.q, &inst.p).unwrap();
                let g = st.gain(j).unwrap();
                prop_assert!(close(g, after - before, 1e-8), "{family} {mode}: gain {g} vs {}", after - before);
                st.commit(j).unwrap();
                prop_assert!(close(st.value(), after, 1e-8));
            }
            prop_assert_eq!(st.selected(), &a[..]);
        }
    }

    #[test]
    fn smi_is_nonnegative_and_monotone(seed in any::<u64>(), fi in 0usize..8) {
        // the disparity families are not submodular
        let family = Family::ALL[fi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape { cosine: false, ..Shape::default() };
        let inst = random_instance(&mut rng, family, shape).unwrap();
        let v = smi(&inst.spec, &inst.ctx, &inst.a, &inst.q).unwrap();
        prop_assert!(v >= -1e-9);
        for j in inst.free() {
            let mut b = inst.a.clone();
            b.push(j);
            prop_assert!(smi(&inst.spec, &inst.ctx, &b, &inst.q).unwrap() >= v - 1e-9);
        }
    }

    #[test]
    fn rouge_and_com_are_restricted_submodular(seed in any::<u64>(), com in any::<bool>()) {
        // f(A) + f(B) >= f(A ∪ B) + f(A ∩ B) whenever A lies inside V
        let family = if com { Family::ConcaveOverModular } else { Family::Rouge };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, family, Shape::default()).unwrap();
        let f = |s: &[usize]| oracle::restricted_f(&inst.spec, &inst.ctx, &[], &[], s).unwrap();
        let omega: Vec<usize> = (0..inst.ctx.n_total()).filter(|_| rng.random_bool(0.5)).collect();
        let a = &inst.a;
        let union: Vec<usize> = a.iter().chain(omega.iter().filter(|x| !a.contains(x))).copied().collect();
        let inter: Vec<usize> = a.iter().copied().filter(|x| omega.contains(x)).collect();
        let lhs = f(a) + f(&omega);
        let rhs = f(&union) + f(&inter);
        prop_assert!(lhs >= rhs - 1e-9 * lhs.abs().max(1.0), "{} < {}", lhs, rhs);
    }
}
