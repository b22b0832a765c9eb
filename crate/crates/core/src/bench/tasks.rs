//! Synthetic query-focused summarization collections for learning studies.
//!
//! Each collection draws items from a handful of latent topics, every topic
//! owning a few concepts. References are greedy summaries under a hidden
//! mixture, with some picks swapped at random to mimic annotator noise.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AuxRole, AuxiliarySet, Collection, ConceptUniverse, GroundSet, ItemRecord, ReferenceSummary};
use crate::error::{Error, Result};
use crate::functions::{Family, FunctionSpec};
use crate::kernel::{Metric, DEFAULT_JITTER};
use crate::learning::{leave_one_out, summarize, LooReport, MixtureModel, TrainConfig, TrainingExample};
use crate::optimizer::Flavor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTaskConfig {
    pub collections: usize,
    pub items: usize,
    pub topics: usize,
    pub concepts_per_topic: usize,
    /// Topics the query asks for.
    pub query_topics: usize,
    pub references: usize,
    pub k: usize,
    /// Chance that a reference pick is swapped for a random item.
    pub noise: f64,
    /// Feature noise added to concept counts.
    pub feature_noise: f64,
    /// Mixture the references are drawn from.
    pub hidden: Vec<(FunctionSpec, f64)>,
    pub seed: u64,
}

impl Default for LearningTaskConfig {
    fn default() -> Self {
        LearningTaskConfig {
            collections: 6,
            items: 30,
            topics: 6,
            concepts_per_topic: 3,
            query_topics: 2,
            references: 3,
            k: 6,
            noise: 0.15,
            feature_noise: 0.3,
            hidden: vec![
                (FunctionSpec::new(Family::GraphCut).with_lambda(0.5), 1.0),
                (FunctionSpec::new(Family::FacilityLocation1).with_eta(5.0), 1.0),
            ],
            seed: 11,
        }
    }
}

impl LearningTaskConfig {
    fn validate(&self) -> Result<()> {
        if self.collections == 0 || self.items == 0 || self.topics == 0 || self.concepts_per_topic == 0 {
            return Err(Error::Config("task sizes must be positive".into()));
        }
        if self.query_topics == 0 || self.query_topics > self.topics {
            return Err(Error::Config(format!(
                "{} query topics out of {}",
                self.query_topics, self.topics
            )));
        }
        if self.k == 0 || self.k > self.items || self.references == 0 {
            return Err(Error::Config(format!("budget {} for {} items", self.k, self.items)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("swap noise {} is not a probability", self.noise)));
        }
        if self.hidden.is_empty() {
            return Err(Error::Config("the hidden mixture is empty".into()));
        }
        Ok(())
    }
}

/// Mixture components a learner may use: the query-side forms of the
/// facility-location, graph-cut, concave-over-modular and log-det families.
pub fn default_components() -> Vec<FunctionSpec> {
    [
        Family::FacilityLocation1,
        Family::FacilityLocation2,
        Family::GraphCut,
        Family::ConcaveOverModular,
        Family::LogDet,
    ]
    .into_iter()
    .map(FunctionSpec::new)
    .collect()
}

fn concept_name(topic: usize, j: usize) -> String {
    format!("t{topic}c{j}")
}

fn one_collection(cfg: &LearningTaskConfig, idx: usize, rng: &mut ChaCha8Rng) -> Result<Collection> {
    let names: Vec<String> = (0..cfg.topics)
        .flat_map(|t| (0..cfg.concepts_per_topic).map(move |j| concept_name(t, j)))
        .collect();
    let weights: Vec<f64> = names.iter().map(|_| rng.random_range(0.5..2.0)).collect();
    let universe = ConceptUniverse::with_weights(names.clone(), weights)?;
    let dim = names.len();

    let mut items = Vec::with_capacity(cfg.items);
    for i in 0..cfg.items {
        let topic = rng.random_range(0..cfg.topics);
        let mut concepts = std::collections::BTreeMap::new();
        for j in 0..cfg.concepts_per_topic {
            if j == 0 || rng.random_bool(0.6) {
                concepts.insert(concept_name(topic, j), rng.random_range(1..=2u32));
            }
        }
        if rng.random_bool(0.3) {
            let other = rng.random_range(0..cfg.topics);
            *concepts.entry(concept_name(other, rng.random_range(0..cfg.concepts_per_topic))).or_insert(0) += 1;
        }
        let mut features = vec![0.0; dim];
        for (c, n) in &concepts {
            features[universe.index_of(c).expect("generated concept")] = f64::from(*n);
        }
        for f in &mut features {
            *f = (*f + rng.random_range(-cfg.feature_noise..=cfg.feature_noise)).max(0.0);
        }
        items.push(ItemRecord {
            id: format!("c{idx}i{i}"),
            features: Some(features),
            concepts,
        });
    }

    let mut topics: Vec<usize> = (0..cfg.topics).collect();
    topics.shuffle(rng);
    let query_concepts: Vec<(String, u32)> = topics[..cfg.query_topics]
        .iter()
        .map(|&t| (concept_name(t, 0), 1))
        .collect();
    let mut query = ItemRecord::with_concepts(format!("c{idx}q"), query_concepts);
    let mut qf = vec![0.0; dim];
    for c in query.concepts.keys() {
        qf[universe.index_of(c).expect("generated concept")] = 1.0;
    }
    query.features = Some(qf);

    Ok(Collection {
        name: Some(format!("collection{idx}")),
        ground: GroundSet::new(items)?,
        queries: AuxiliarySet::new(vec![query], AuxRole::Query)?,
        privates: AuxiliarySet::empty(AuxRole::Private),
        universe,
        references: Vec::new(),
    })
}

/// Generates the collections with their reference summaries.
pub fn learning_task(cfg: &LearningTaskConfig) -> Result<Vec<Collection>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (specs, weights): (Vec<_>, Vec<_>) = cfg.hidden.iter().cloned().unzip();
    let hidden = MixtureModel::new(specs, weights, Flavor::Query, 0.0)?;
    let mut out = Vec::with_capacity(cfg.collections);
    for idx in 0..cfg.collections {
        let mut coll = one_collection(cfg, idx, &mut rng)?;
        let ex = TrainingExample {
            collection: coll.name.clone().unwrap_or_default(),
            ctx: crate::instance::Context::from_collection(&coll, Metric::Cosine, DEFAULT_JITTER)?,
            query: vec![cfg.items],
            private: Vec::new(),
            previous: Vec::new(),
            references: vec![Vec::new()],
            k: cfg.k,
        };
        let base = summarize(&hidden, &ex)?.indices;
        let ids: Vec<&str> = coll.ground.items().iter().map(|it| it.id.as_str()).collect();
        for r in 0..cfg.references {
            let mut pick = base.clone();
            for slot in 0..pick.len() {
                if rng.random_bool(cfg.noise) {
                    let free: Vec<usize> = (0..cfg.items).filter(|i| !pick.contains(i)).collect();
                    if let Some(&j) = free.choose(&mut rng) {
                        pick[slot] = j;
                    }
                }
            }
            coll.references.push(ReferenceSummary {
                id: format!("r{r}"),
                items: pick.iter().map(|&i| ids[i].to_string()).collect(),
                queries: Vec::new(),
                privates: Vec::new(),
            });
        }
        out.push(coll);
    }
    Ok(out)
}

/// Training examples for every collection, one per (query, private) grouping.
pub fn task_examples(collections: &[Collection], k: Option<usize>) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for c in collections {
        out.extend(TrainingExample::from_collection(c, Metric::Cosine, DEFAULT_JITTER, k)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineScore {
    pub component: String,
    pub mean_vrouge: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearningStudy {
    pub mixture: LooReport,
    pub baselines: Vec<BaselineScore>,
}

impl LearningStudy {
    /// Margin of the mixture over the best single component.
    pub fn margin(&self) -> f64 {
        let best = self.baselines.iter().map(|b| b.mean_vrouge).fold(f64::NEG_INFINITY, f64::max);
        self.mixture.mean_vrouge - best
    }
}

/// Mean held-out V-ROUGE of a single component with weight 1, per collection
/// and then averaged, mirroring the leave-one-out bookkeeping.
fn baseline_score(spec: &FunctionSpec, task: Flavor, data: &[TrainingExample]) -> Result<f64> {
    let model = MixtureModel::new(vec![spec.clone()], vec![1.0], task, 0.0)?;
    let mut names: Vec<&str> = data.iter().map(|e| e.collection.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let mut total = 0.0;
    for name in &names {
        let held: Vec<&TrainingExample> = data.iter().filter(|e| e.collection == *name).collect();
        let mut s = 0.0;
        for ex in &held {
            let sel = summarize(&model, ex)?;
            s += crate::bench::vrouge(&sel.indices, &ex.references, ex.ctx.concepts()?)?;
        }
        total += s / held.len() as f64;
    }
    Ok(total / names.len() as f64)
}

/// Leave-one-out training of a mixture over `components` against each
/// component used alone.
pub fn mixture_vs_baselines(
    data: &[TrainingExample],
    components: &[FunctionSpec],
    task: Flavor,
    reg_strength: f64,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<LearningStudy> {
    let model0 = MixtureModel::init(components.to_vec(), task, reg_strength, seed)?;
    let mixture = leave_one_out(data, &model0, cfg)?;
    let baselines = components
        .iter()
        .map(|c| {
            Ok(BaselineScore {
                component: c.family.short_name().to_string(),
                mean_vrouge: baseline_score(c, task, data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LearningStudy { mixture, baselines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LearningTaskConfig {
        LearningTaskConfig {
            collections: 2,
            items: 12,
            k: 3,
            references: 2,
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = learning_task(&small()).unwrap();
        let b = learning_task(&small()).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_json().unwrap(), y.to_json().unwrap());
            assert_eq!(x.references.len(), 2);
            assert!(x.references.iter().all(|r| r.items.len() == 3));
        }
    }

    #[test]
    fn collections_round_trip_through_json() {
        let coll = learning_task(&small()).unwrap().remove(0);
        let back = Collection::from_json(&coll.to_json().unwrap()).unwrap();
        let ex = task_examples(&[back], None).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].query, vec![12]);
        assert_eq!(ex[0].k, 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small();
        cfg.k = 0;
        assert!(learning_task(&cfg).is_err());
        let mut cfg = small();
        cfg.query_topics = 99;
        assert!(learning_task(&cfg).is_err());
    }
}
