use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Collection;
use crate::error::{Error, Result};
use crate::functions::{active_params, Family, FunctionSpec, MeasureMode};
use crate::instance::Context;
use crate::kernel::Metric;
use crate::optimizer::{Flavor, FlavorSets};

/// What one entry of `Θ` controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSlot {
    Weight,
    Lambda,
    Eta,
    Nu,
}

/// One line of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub mean_hinge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_vrouge: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    #[serde(default)]
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<EpochRecord>,
}

/// `F(Y) = Σ_i w_i · m_i(Y)` with every `m_i` taken in the task's mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub components: Vec<FunctionSpec>,
    pub weights: Vec<f64>,
    /// Strength of the `½‖Θ‖²` term; unrelated to the graph-cut `λ`.
    pub reg_strength: f64,
    pub task: Flavor,
    #[serde(default)]
    pub metadata: ModelMetadata,
}

impl MixtureModel {
    pub fn new(components: Vec<FunctionSpec>, weights: Vec<f64>, task: Flavor, reg_strength: f64) -> Result<Self> {
        let m = MixtureModel {
            components,
            weights,
            reg_strength,
            task,
            metadata: ModelMetadata::default(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Weights uniform on `[0, 2/√M]`; internal parameters as given.
    pub fn init(components: Vec<FunctionSpec>, task: Flavor, reg_strength: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hi = 2.0 / (components.len().max(1) as f64).sqrt();
        let weights = components.iter().map(|_| rng.random_range(0.0..=hi)).collect();
        let mut m = Self::new(components, weights, task, reg_strength)?;
        m.metadata.seed = Some(seed);
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("a mixture needs at least one component".into()));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::Config(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Config(format!("mixture weight {w} is not a nonnegative number")));
        }
        if !(self.reg_strength.is_finite() && self.reg_strength >= 0.0) {
            return Err(Error::Config(format!("regularization {} is negative", self.reg_strength)));
        }
        let mode = self.mode();
        for c in &self.components {
            c.validate()?;
            if c.family == Family::GraphCut && mode == MeasureMode::Csmi {
                return Err(Error::Config(format!("{} has no conditional mutual information form", c.family.short_name())));
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> MeasureMode {
        self.task.mode()
    }

    /// `(component, slot)` for every entry of `Θ`, in order.
    pub fn layout(&self) -> Vec<(usize, ParamSlot)> {
        let mode = self.mode();
        let mut out = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            out.push((i, ParamSlot::Weight));
            let act = active_params(c.family, mode);
            if act.lambda {
                out.push((i, ParamSlot::Lambda));
            }
            if act.eta {
                out.push((i, ParamSlot::Eta));
            }
            if act.nu {
                out.push((i, ParamSlot::Nu));
            }
        }
        out
    }

    pub fn theta(&self) -> Vec<f64> {
        self.layout()
            .into_iter()
            .map(|(i, slot)| match slot {
                ParamSlot::Weight => self.weights[i],
                ParamSlot::Lambda => self.components[i].lambda,
                ParamSlot::Eta => self.components[i].eta,
                ParamSlot::Nu => self.components[i].nu,
            })
            .collect()
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        let layout = self.layout();
        if theta.len() != layout.len() {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, the model {}",
                theta.len(),
                layout.len()
            )));
        }
        for ((i, slot), &x) in layout.into_iter().zip(theta) {
            match slot {
                ParamSlot::Weight => self.weights[i] = x,
                ParamSlot::Lambda => self.components[i].lambda = x,
                ParamSlot::Eta => self.components[i].eta = x,
                ParamSlot::Nu => self.components[i].nu = x,
            }
        }
        self.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MixtureModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// One ground set with its auxiliary sets and human summaries.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    /// Collection the example came from; leave-one-out folds group by it.
    pub collection: String,
    pub ctx: Context,
    pub query: Vec<usize>,
    pub private: Vec<usize>,
    pub previous: Vec<usize>,
    pub references: Vec<Vec<usize>>,
    pub k: usize,
}

impl TrainingExample {
    pub fn validate(&self) -> Result<()> {
        if self.references.is_empty() {
            return Err(Error::Config(format!("example '{}' has no reference summary", self.collection)));
        }
        for r in &self.references {
            if let Some(&i) = r.iter().find(|&&i| i >= self.ctx.n_ground()) {
                return Err(Error::Config(format!("reference item {i} is not in the ground set")));
            }
            if r.len() > self.k {
                return Err(Error::Config(format!(
                    "reference of size {} exceeds the budget {}",
                    r.len(),
                    self.k
                )));
            }
        }
        Ok(())
    }

    pub fn sets(&self) -> FlavorSets {
        FlavorSets {
            query: Some(self.query.clone()),
            private: Some(self.private.clone()),
            previous: Some(self.previous.clone()),
        }
    }

    /// One example per distinct (queries, private items) pair among the
    /// references; references that name none use the whole auxiliary sets.
    /// The budget defaults to the largest reference.
    pub fn from_collection(coll: &Collection, metric: Metric, jitter: f64, k: Option<usize>) -> Result<Vec<Self>> {
        let ctx = Context::from_collection(coll, metric, jitter)?;
        let name = coll.name.clone().unwrap_or_else(|| "collection".into());
        let lookup = |ids: &[String]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    ctx.index_of(id)
                        .ok_or_else(|| Error::Lookup(format!("unknown item '{id}' in collection '{name}'")))
                })
                .collect()
        };
        let ng = coll.ground.len();
        let all_q: Vec<usize> = (ng..ng + coll.queries.len()).collect();
        let all_p: Vec<usize> = (ng + coll.queries.len()..ctx.n_total()).collect();
        let mut groups: BTreeMap<(Vec<usize>, Vec<usize>), Vec<Vec<usize>>> = BTreeMap::new();
        for r in &coll.references {
            let q = if r.queries.is_empty() { all_q.clone() } else { lookup(&r.queries)? };
            let p = if r.privates.is_empty() { all_p.clone() } else { lookup(&r.privates)? };
            groups.entry((q, p)).or_default().push(lookup(&r.items)?);
        }
        groups
            .into_iter()
            .map(|((query, private), references)| {
                let k = k.unwrap_or_else(|| references.iter().map(Vec::len).max().unwrap_or(0));
                let ex = TrainingExample {
                    collection: name.clone(),
                    ctx: ctx.clone(),
                    query,
                    private,
                    previous: Vec::new(),
                    references,
                    k,
                };
                ex.validate()?;
                Ok(ex)
            })
            .collect()
    }
}
