//! Exit criteria. Every test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p subinfo --test acceptance -- --nocapture` to see
//! the lines.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subinfo::bench::instances::{random_instance, RandomInstance, Shape};
use subinfo::bench::oracle::{closed_form_suite, gradient_suite, rel_diff, CheckOutcome};
use subinfo::bench::synth::{run_study, sweep, Param, Study};
use subinfo::bench::tasks::{default_components, learning_task, mixture_vs_baselines, task_examples, LearningTaskConfig};
use subinfo::bench::{rouge_q, synth_generate, vrouge, SyntheticConfig};
use subinfo::functions::{csmi, definitional_oracle, restricted_f};
use subinfo::instance::KernelView;
use subinfo::learning::{finite_diff_check, summarize, train, MarginLoss, MixtureModel, TrainConfig, TrainingExample};
use subinfo::optimizer::{brute_force_opt, greedy_maximize, MeasureObjective, ModularObjective};
use subinfo::{Collection, Family, Flavor, FunctionSpec, GreedyOptions, MeasureMode, Metric};

const SEED: u64 = 20_210_601;

fn verdict(n: u32, pass: bool, detail: &str) -> bool {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn summarize_outcomes(outcomes: &[CheckOutcome], cases: usize) -> (bool, String) {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for o in outcomes {
        if !o.passed() || o.cases != cases {
            ok = false;
            println!("  {}: {} of {} failed, worst {:.3e}", o.name, o.failures, o.cases, o.worst);
        }
        worst = worst.max(o.worst);
    }
    (ok, format!("{} checks x {cases} cases, worst {worst:.3e}", outcomes.len()))
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = a.to_vec();
    out.extend(b.iter().filter(|x| !a.contains(x)));
    out
}

/// Families whose restricted set function is submodular.
const SUBMODULAR: [Family; 8] = [
    Family::SetCover,
    Family::ProbSetCover,
    Family::GraphCut,
    Family::FacilityLocation1,
    Family::FacilityLocation2,
    Family::LogDet,
    Family::ConcaveOverModular,
    Family::Rouge,
];

/// Kernels with nonnegative similarities.
fn nonneg_shape(max_ground: usize) -> Shape {
    Shape {
        max_ground,
        cosine: false,
        ..Shape::default()
    }
}

#[test]
fn criterion_1_closed_forms_match_definitions() {
    let start = Instant::now();
    let outcomes = closed_form_suite(SEED, 200, &Family::ALL).unwrap();
    let elapsed = start.elapsed();
    let (ok, detail) = summarize_outcomes(&outcomes, 200);
    let fast = elapsed < Duration::from_secs(30);
    let pass = verdict(1, ok && fast, &format!("{detail}, tolerance 1e-8, {:.1}s (limit 30s)", elapsed.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_2_information_properties() {
    let slack = |v: f64| 1e-9 * v.abs().max(1.0);
    let mut monotone = Vec::new();
    for family in SUBMODULAR {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (family as u64 + 101));
        let (mut checked, mut bad) = (0, 0);
        while checked < 1000 {
            let inst = random_instance(&mut rng, family, nonneg_shape(8)).unwrap();
            let Some(&j) = inst.free().choose(&mut rng) else { continue };
            let smi = |a: &[usize]| definitional_oracle(&inst.spec, &inst.ctx, MeasureMode::Smi, a, &inst.q, &[]).unwrap();
            let before = smi(&inst.a);
            let after = smi(&union(&inst.a, &[j]));
            if before < -slack(before) || after < before - slack(before) {
                bad += 1;
            }
            checked += 1;
        }
        monotone.push((family, bad));
    }

    let mut identities = Vec::new();
    for family in Family::ALL.into_iter().filter(|&f| f != Family::GraphCut) {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (family as u64 + 202));
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let RandomInstance { spec, ctx, a, q, p } = random_instance(&mut rng, family, Shape::default()).unwrap();
            let f = |s: &[usize]| restricted_f(&spec, &ctx, &q, &p, s).unwrap();
            let closed = csmi(&spec, &ctx, &a, &q, &p).unwrap();
            // SMI of the conditioned function g(X) = f(X ∪ P) − f(P)
            let g = |s: &[usize]| f(&union(s, &p)) - f(&p);
            let via_g = g(&a) + g(&q) - g(&union(&a, &q));
            // difference of two plain mutual informations
            let mi = |x: &[usize]| f(x) + f(&q) - f(&union(x, &q));
            let via_mi = mi(&union(&a, &p)) - mi(&p);
            worst = worst.max(rel_diff(closed, via_g)).max(rel_diff(closed, via_mi));
        }
        identities.push((family, worst));
    }

    for (family, bad) in &monotone {
        println!("  nonnegativity/monotonicity {family}: {bad} of 1000 violate");
    }
    for (family, worst) in &identities {
        println!("  conditional identities {family}: worst {worst:.3e}");
    }
    let ok1 = monotone.iter().all(|(_, bad)| *bad == 0);
    let ok2 = identities.iter().all(|(_, w)| *w <= 1e-8);
    let pass = verdict(
        2,
        ok1 && ok2,
        &format!(
            "{} families x 1000 triples (slack 1e-9), {} families x 200 conditional identities (1e-8)",
            monotone.len(),
            identities.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_greedy_guarantee() {
    let bound = 1.0 - (-1.0f64).exp();
    let families = [
        Family::GraphCut,
        Family::FacilityLocation1,
        Family::FacilityLocation2,
        Family::SetCover,
        Family::ProbSetCover,
        Family::LogDet,
    ];
    let mut ok = true;
    let mut worst_ratio: f64 = f64::INFINITY;
    for family in families {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (family as u64 + 303));
        let mut low = 0;
        for _ in 0..50 {
            let inst = random_instance(&mut rng, family, nonneg_shape(12)).unwrap();
            let obj = MeasureObjective::new(inst.spec.clone(), &inst.ctx, MeasureMode::Smi, &inst.q, &[]);
            let k = rng.random_range(1..=4usize).min(inst.ctx.n_ground());
            let greedy = greedy_maximize(&obj, k, GreedyOptions::default()).unwrap();
            let opt = brute_force_opt(&obj, k).unwrap();
            if greedy.value < bound * opt.value - 1e-9 * opt.value.abs().max(1.0) {
                low += 1;
            }
            if opt.value > 1e-12 {
                worst_ratio = worst_ratio.min(greedy.value / opt.value);
            }
        }
        if low > 0 {
            ok = false;
            println!("  {family}: {low} of 50 below the bound");
        }
    }

    // modular objectives: greedy is exact
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x3303);
    let mut modular_misses = 0;
    for _ in 0..50 {
        let inst = random_instance(&mut rng, Family::FacilityLocation1, nonneg_shape(12)).unwrap();
        let n = inst.ctx.n_ground();
        let obj = ModularObjective {
            ctx: &inst.ctx,
            weights: (0..n).map(|_| rng.random_range(-1.0..2.0)).collect(),
        };
        let k = rng.random_range(1..=4usize).min(n);
        let greedy = greedy_maximize(&obj, k, GreedyOptions { stop_on_nonpositive: true, ..Default::default() }).unwrap();
        let opt = brute_force_opt(&obj, k).unwrap();
        if (greedy.value - opt.value).abs() > 1e-12 {
            modular_misses += 1;
        }
    }
    let pass = verdict(
        3,
        ok && modular_misses == 0,
        &format!(
            "6 families x 50 instances, worst greedy/OPT {worst_ratio:.4} (bound {bound:.4}); modular mismatches {modular_misses} of 50"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_gradients_match_finite_differences() {
    let outcomes = gradient_suite(SEED, 100, &Family::ALL).unwrap();
    let (ok, detail) = summarize_outcomes(&outcomes, 100);
    let skipped: usize = outcomes.iter().map(|o| o.skipped).sum();

    // mixture weights and parameters through the hinge loss
    let cfg = LearningTaskConfig {
        collections: 3,
        items: 14,
        k: 4,
        ..Default::default()
    };
    let data = task_examples(&learning_task(&cfg).unwrap(), None).unwrap();
    let mut mixture_worst: f64 = 0.0;
    let mut mixture_checked = 0;
    let mut largest: f64 = 0.0;
    for (i, ex) in data.iter().enumerate() {
        let model = MixtureModel::init(default_components(), Flavor::Query, 0.0, i as u64).unwrap();
        let fd = finite_diff_check(&model, ex, MarginLoss::default(), 1e-5).unwrap();
        if !fd.kink {
            mixture_checked += 1;
            mixture_worst = mixture_worst.max(fd.max_error);
            largest = fd.entries.iter().fold(largest, |m, e| m.max(e.analytic.abs()));
        }
    }
    // a zero gradient everywhere would make the comparison vacuous
    let ok_mix = mixture_checked > 0 && largest > 0.0 && mixture_worst <= 1e-4;
    let pass = verdict(
        4,
        ok && ok_mix,
        &format!(
            "{detail} ({skipped} kink samples excluded), tolerance 1e-4; mixture hinge gradients on {mixture_checked} examples, worst {mixture_worst:.3e}, largest |grad| {largest:.3}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_rouge_and_concave_over_modular_equalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x55);
    let mut rouge_worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, Family::Rouge, Shape::default()).unwrap();
        let cd = inst.ctx.concepts().unwrap();
        let expected = rouge_q(&cd.count_vector(&inst.a), &cd.count_vector(&inst.q), cd.weights()).unwrap();
        let gsmi = definitional_oracle(&inst.spec, &inst.ctx, MeasureMode::Smi, &inst.a, &inst.q, &[]).unwrap();
        rouge_worst = rouge_worst.max(rel_diff(gsmi, expected));
    }

    let mut com_worst: f64 = 0.0;
    for _ in 0..100 {
        let mut inst = random_instance(&mut rng, Family::ConcaveOverModular, Shape::default()).unwrap();
        inst.spec.com_weights = (1.0, 1.0);
        let s = inst.ctx.kernel(KernelView::CrossOnly).unwrap();
        let psi = inst.spec.psi;
        let query_side: f64 = inst.a.iter().map(|&i| psi.apply(inst.q.iter().map(|&j| s[(i, j)]).sum())).sum();
        let data_side: f64 = inst.q.iter().map(|&j| psi.apply(inst.a.iter().map(|&i| s[(i, j)]).sum())).sum();
        let expected = inst.spec.eta * query_side + data_side;
        let gsmi = definitional_oracle(&inst.spec, &inst.ctx, MeasureMode::Smi, &inst.a, &inst.q, &[]).unwrap();
        com_worst = com_worst.max(rel_diff(gsmi, expected));
    }
    let pass = verdict(
        5,
        rouge_worst <= 1e-10 && com_worst <= 1e-10,
        &format!("100 count instances worst {rouge_worst:.3e}, 100 kernel instances worst {com_worst:.3e}, tolerance 1e-10"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_synthetic_behavior() {
    let k = 10;
    let inst = synth_generate(&SyntheticConfig::default()).unwrap();
    let ctx = inst.context().unwrap();
    let n_queries = inst.query_indices().len();

    let gc = run_study(&inst, &ctx, Study::Query, &FunctionSpec::new(Family::GraphCut), k).unwrap();
    let gc_ok = gc.report.query_matching == k && gc.report.fairness == Some(0);
    println!(
        "  GCMI: {} of {k} query-matching, per query {:?}, fairness {:?}",
        gc.report.query_matching, gc.report.query_match_count, gc.report.fairness
    );

    let saturates = |eta: f64| {
        let run = run_study(&inst, &ctx, Study::Query, &FunctionSpec::new(Family::FacilityLocation2).with_eta(eta), k).unwrap();
        let eps = 1e-3 * run.selection.gains[0].abs();
        let ok = match run.report.saturation_step {
            Some(t) => t <= n_queries + 1 && run.selection.gains[t - 1..].iter().all(|&g| g < eps),
            None => false,
        };
        println!(
            "  FL2MI eta={eta}: saturation step {:?}, per query {:?}, gains {:.3?}",
            run.report.saturation_step, run.report.query_match_count, run.selection.gains
        );
        ok
    };
    let fl2_ok = saturates(1.0);
    // same check without the data-side term, for reference
    saturates(0.0);

    let nus = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
    let mut privacy_ok = true;
    for family in [Family::FacilityLocation1, Family::GraphCut, Family::LogDet] {
        let runs = sweep(&inst, Study::Privacy, &FunctionSpec::new(family), Param::Nu, &nus, k).unwrap();
        let v: Vec<usize> = runs.iter().map(|r| r.report.privacy_violations.unwrap()).collect();
        println!("  {family} conditional gain, violations over nu {nus:?}: {v:?}");
        privacy_ok &= v[0] > 0 && *v.last().unwrap() == 0;
    }

    let pass = verdict(
        6,
        gc_ok && fl2_ok && privacy_ok,
        &format!("GCMI all-matching and unfair {gc_ok}; FL2MI eta=1 saturates {fl2_ok}; privacy sweeps {privacy_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_mixture_beats_single_components() {
    let start = Instant::now();
    let task = LearningTaskConfig::default();
    let data = task_examples(&learning_task(&task).unwrap(), None).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.2,
        restarts: 8,
        ..Default::default()
    };
    let study = mixture_vs_baselines(&data, &default_components(), Flavor::Query, 1e-3, 0, &cfg).unwrap();
    let elapsed = start.elapsed();
    for b in &study.baselines {
        println!("  {}: {:.4}", b.component, b.mean_vrouge);
    }
    let beats = study.baselines.iter().all(|b| study.mixture.mean_vrouge >= b.mean_vrouge);
    let fast = elapsed < Duration::from_secs(300);
    let pass = verdict(
        7,
        beats && fast && study.mixture.folds.len() == task.collections,
        &format!(
            "mixture {:.4} over {} held-out collections, margin over best component {:+.4}, {:.0}s (limit 300s)",
            study.mixture.mean_vrouge,
            study.mixture.folds.len(),
            study.margin(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

/// A collection file in the annotated-image layout: 100 items over 959
/// concepts, a concept query and three reference summaries.
fn corpus_collection(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts: Vec<String> = (0..959).map(|c| format!("concept{c}")).collect();
    let items: Vec<serde_json::Value> = (0..100)
        .map(|i| {
            let mut m = serde_json::Map::new();
            for _ in 0..rng.random_range(1..=6) {
                let c = concepts.choose(&mut rng).unwrap();
                m.insert(c.clone(), rng.random_range(1..=3u32).into());
            }
            serde_json::json!({ "id": format!("img{i}"), "concepts": m })
        })
        .collect();
    let picked = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut ids: Vec<usize> = (0..100).collect();
        rand::seq::SliceRandom::shuffle(&mut ids[..], rng);
        ids[..10].iter().map(|i| format!("img{i}")).collect()
    };
    let query = items[0]["concepts"].as_object().unwrap().keys().take(2).cloned().collect::<Vec<_>>();
    let mut qc = serde_json::Map::new();
    for c in query {
        qc.insert(c, 1.into());
    }
    let references: Vec<serde_json::Value> = (0..3)
        .map(|r| serde_json::json!({ "id": format!("human{r}"), "items": picked(&mut rng) }))
        .collect();
    serde_json::json!({
        "name": "collection3",
        "concepts": concepts,
        "items": items,
        "queries": [{ "id": "q0", "concepts": qc }],
        "references": references,
    })
    .to_string()
}

#[test]
fn criterion_8_corpus_ingest_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("collection3.json");
    std::fs::write(&path, corpus_collection(SEED)).unwrap();

    let coll = Collection::load(&path).unwrap();
    let shape_ok = coll.ground.len() == 100 && coll.universe.len() == 959 && coll.references.len() == 3;
    let data: Vec<TrainingExample> = TrainingExample::from_collection(&coll, Metric::Cosine, 1e-6, None).unwrap();
    let model0 = MixtureModel::init(default_components(), Flavor::Query, 1e-3, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..Default::default()
    };
    let model = train(&data, &model0, &cfg).unwrap();
    let ex = &data[0];
    let sel = summarize(&model, ex).unwrap();
    let score = vrouge(&sel.indices, &ex.references, ex.ctx.concepts().unwrap()).unwrap();
    let ok = shape_ok && sel.len() == 10 && (0.0..=1.0).contains(&score) && model.metadata.trace.len() == 3;
    let pass = verdict(
        8,
        ok,
        &format!(
            "{} items x {} concepts loaded, trained {} epochs, held summary of {} scores V-ROUGE {score:.4}",
            coll.ground.len(),
            coll.universe.len(),
            cfg.epochs,
            sel.len()
        ),
    );
    assert!(pass);
}
