//! Evaluation context: the similarity matrix over `Ω = V ∪ V'` in the views
//! the function families need, plus concept data for the coverage families.
//!
//! Indices `0..n_ground` are the ground set `V`; the rest are auxiliary.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::data::{Collection, ConceptUniverse, ItemRecord};
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, cross_only_kernel, Metric, SimilarityKernel};

/// Concept weights, per-item counts and per-item coverage probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptData {
    weights: Vec<f64>,
    counts: Vec<Vec<(usize, u32)>>,
    probs: Vec<Vec<(usize, f64)>>,
}

impl ConceptData {
    /// Coverage probabilities default to 1 for every concept with a positive count.
    pub fn new(weights: Vec<f64>, counts: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Format(format!("concept weight {w} is not a nonnegative number")));
        }
        let l = weights.len();
        for row in &counts {
            if let Some((c, _)) = row.iter().find(|(c, _)| *c >= l) {
                return Err(Error::Lookup(format!("concept index {c} outside a universe of {l}")));
            }
        }
        let probs = counts
            .iter()
            .map(|row| row.iter().filter(|(_, n)| *n > 0).map(|&(c, _)| (c, 1.0)).collect())
            .collect();
        Ok(ConceptData { weights, counts, probs })
    }

    /// Replaces the coverage probabilities; one sparse row per item.
    pub fn with_probabilities(mut self, probs: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if probs.len() != self.counts.len() {
            return Err(Error::Format(format!(
                "{} probability rows for {} items",
                probs.len(),
                self.counts.len()
            )));
        }
        for row in &probs {
            for &(c, p) in row {
                if c >= self.weights.len() {
                    return Err(Error::Lookup(format!("concept index {c} out of range")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Format(format!("coverage probability {p} outside [0, 1]")));
                }
            }
        }
        self.probs = probs;
        Ok(self)
    }

    /// Counts come from the concept annotations. When the feature vectors live in
    /// concept space they double as coverage probabilities (clamped to [0, 1]).
    pub fn from_items(universe: &ConceptUniverse, items: &[&ItemRecord]) -> Result<Self> {
        let counts = items.iter().map(|it| universe.counts_of(it)).collect::<Result<Vec<_>>>()?;
        let data = ConceptData::new(universe.weights().to_vec(), counts)?;
        let feature_probs = items
            .iter()
            .all(|it| it.features.as_ref().is_some_and(|f| f.len() == universe.len()));
        if !feature_probs {
            return Ok(data);
        }
        let probs = items
            .iter()
            .map(|it| {
                let f = it.features.as_ref().expect("checked above");
                f.iter()
                    .enumerate()
                    .filter(|(_, x)| **x > 0.0)
                    .map(|(c, x)| (c, x.clamp(0.0, 1.0)))
                    .collect()
            })
            .collect();
        data.with_probabilities(probs)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn universe_size(&self) -> usize {
        self.weights.len()
    }

    pub fn n_items(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self, item: usize) -> &[(usize, u32)] {
        &self.counts[item]
    }

    pub fn probs(&self, item: usize) -> &[(usize, f64)] {
        &self.probs[item]
    }

    /// Dense count vector of a set of items.
    pub fn count_vector(&self, set: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; self.weights.len()];
        for &i in set {
            for &(c, n) in &self.counts[i] {
                v[c] += n as f64;
            }
        }
        v
    }
}

/// Which version of the similarity matrix a family reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelView {
    /// As built.
    Raw,
    /// Cosine similarities mapped to [0, 1] by `(s + 1) / 2`; other metrics unchanged.
    Shifted,
    /// `Shifted` with the within-`V` and within-`V'` blocks replaced by the identity.
    CrossOnly,
}

#[derive(Debug, Clone)]
pub struct Context {
    n_ground: usize,
    n_total: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    metric: Metric,
    jitter: f64,
    raw: Option<DMatrix<f64>>,
    shifted: Option<DMatrix<f64>>,
    cross: Option<DMatrix<f64>>,
    concepts: Option<ConceptData>,
}

impl Context {
    fn bare(ids: Vec<String>, n_ground: usize) -> Result<Self> {
        if n_ground > ids.len() {
            return Err(Error::Format(format!("{n_ground} ground items among {} total", ids.len())));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate id '{id}'")));
            }
        }
        Ok(Context {
            n_ground,
            n_total: ids.len(),
            ids,
            index,
            metric: Metric::Dot,
            jitter: 0.0,
            raw: None,
            shifted: None,
            cross: None,
            concepts: None,
        })
    }

    fn set_kernel(&mut self, k: &SimilarityKernel) {
        let raw = k.matrix().clone();
        let shifted = if k.metric() == Metric::Cosine {
            raw.map(|s| (s + 1.0) / 2.0)
        } else {
            raw.clone()
        };
        let shifted_kernel = SimilarityKernel::from_matrix(
            shifted.clone(),
            k.ids().to_vec(),
            k.n_ground(),
            k.metric(),
            k.jitter(),
        )
        .expect("a valid kernel stays valid after an affine map");
        self.cross = Some(cross_only_kernel(&shifted_kernel).matrix().clone());
        self.shifted = Some(shifted);
        self.raw = Some(raw);
        self.metric = k.metric();
        self.jitter = k.jitter();
    }

    pub fn from_kernel(kernel: &SimilarityKernel) -> Self {
        let mut ctx = Context::bare(kernel.ids().to_vec(), kernel.n_ground()).expect("kernel ids are unique");
        ctx.set_kernel(kernel);
        ctx
    }

    /// Context over a precomputed symmetric matrix; ids are generated.
    pub fn from_matrix(matrix: DMatrix<f64>, n_ground: usize, metric: Metric, jitter: f64) -> Result<Self> {
        let ids = (0..matrix.nrows())
            .map(|i| if i < n_ground { format!("v{i}") } else { format!("x{}", i - n_ground) })
            .collect();
        let k = SimilarityKernel::from_matrix(matrix, ids, n_ground, metric, jitter)?;
        Ok(Context::from_kernel(&k))
    }

    /// Concept-only context (set cover, probabilistic set cover, ROUGE).
    pub fn from_concepts(data: ConceptData, n_ground: usize) -> Result<Self> {
        let ids = (0..data.n_items())
            .map(|i| if i < n_ground { format!("v{i}") } else { format!("x{}", i - n_ground) })
            .collect();
        let mut ctx = Context::bare(ids, n_ground)?;
        ctx.concepts = Some(data);
        Ok(ctx)
    }

    pub fn with_concepts(mut self, data: ConceptData) -> Result<Self> {
        if data.n_items() != self.n_total {
            return Err(Error::Format(format!(
                "concept data covers {} items but the context has {}",
                data.n_items(),
                self.n_total
            )));
        }
        self.concepts = Some(data);
        Ok(self)
    }

    /// Builds `Ω` as ground items, then queries, then private items. Records
    /// without a feature vector use their concept counts as features.
    pub fn from_collection(coll: &Collection, metric: Metric, jitter: f64) -> Result<Self> {
        let items: Vec<&ItemRecord> = coll
            .ground
            .items()
            .iter()
            .chain(coll.queries.items())
            .chain(coll.privates.items())
            .collect();
        let concepts = ConceptData::from_items(&coll.universe, &items)?;
        let with_features: Vec<ItemRecord> = items
            .iter()
            .map(|it| {
                let mut it = (*it).clone();
                if it.features.is_none() {
                    let mut v = vec![0.0; coll.universe.len()];
                    for (c, n) in coll.universe.counts_of(&it)? {
                        v[c] = n as f64;
                    }
                    it.features = Some(v);
                }
                Ok(it)
            })
            .collect::<Result<_>>()?;
        let ng = coll.ground.len();
        let ground = crate::data::GroundSet::new(with_features[..ng].to_vec())?;
        let aux = crate::data::AuxiliarySet::new(with_features[ng..].to_vec(), crate::data::AuxRole::Query)?;
        let kernel = build_kernel(&ground, &[&aux], metric, jitter)?;
        Context::from_kernel(&kernel).with_concepts(concepts)
    }

    pub fn n_ground(&self) -> usize {
        self.n_ground
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_ground(&self, i: usize) -> bool {
        i < self.n_ground
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn set_jitter(&mut self, jitter: f64) {
        self.jitter = jitter;
    }

    pub fn has_kernel(&self) -> bool {
        self.raw.is_some()
    }

    pub fn kernel(&self, view: KernelView) -> Result<&DMatrix<f64>> {
        let m = match view {
            KernelView::Raw => &self.raw,
            KernelView::Shifted => &self.shifted,
            KernelView::CrossOnly => &self.cross,
        };
        m.as_ref()
            .ok_or_else(|| Error::Config("this function needs a similarity kernel".into()))
    }

    pub fn concepts(&self) -> Result<&ConceptData> {
        self.concepts
            .as_ref()
            .ok_or_else(|| Error::Config("this function needs concept annotations".into()))
    }

    pub fn has_concepts(&self) -> bool {
        self.concepts.is_some()
    }
}

/// Role of an auxiliary item in the measure being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Other,
    Query,
    Private,
}

/// Kernel lookup with the cross entries between `V` and `Q` scaled by `eta`
/// and those between `V` and the auxiliary part of `P` scaled by `nu`.
/// Entries between two auxiliary items are never scaled.
#[derive(Debug, Clone)]
pub struct EvalKernel<'a> {
    m: &'a DMatrix<f64>,
    n_ground: usize,
    roles: Vec<Role>,
    pub eta: f64,
    pub nu: f64,
    diag: f64,
}

impl<'a> EvalKernel<'a> {
    pub fn new(m: &'a DMatrix<f64>, n_ground: usize, q: &[usize], p: &[usize], eta: f64, nu: f64, diag: f64) -> Self {
        let mut roles = vec![Role::Other; m.nrows()];
        for &i in q {
            if i >= n_ground {
                roles[i] = Role::Query;
            }
        }
        for &i in p {
            if i >= n_ground {
                roles[i] = Role::Private;
            }
        }
        EvalKernel {
            m,
            n_ground,
            roles,
            eta,
            nu,
            diag,
        }
    }

    /// The multiplier applied to entry `(i, j)` and whether it is `eta` or `nu`.
    #[inline]
    pub fn factor(&self, i: usize, j: usize) -> (f64, Role) {
        if (i < self.n_ground) == (j < self.n_ground) {
            return (1.0, Role::Other);
        }
        match self.roles[i.max(j)] {
            Role::Query => (self.eta, Role::Query),
            Role::Private => (self.nu, Role::Private),
            Role::Other => (1.0, Role::Other),
        }
    }

    #[inline]
    pub fn base(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let s = self.m[(i, j)] * self.factor(i, j).0;
        if i == j {
            s + self.diag
        } else {
            s
        }
    }

    pub fn n_ground(&self) -> usize {
        self.n_ground
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.get(rows[r], cols[c]))
    }
}
