//! Item collections: ground set `V`, auxiliary sets `V'` (queries, private
//! items, previously seen summaries) and the concept universe shared by both.
//!
//! A collection file is a single JSON document:
//!
//! ```json
//! {
//!   "concepts": ["aircraft", "sky", "person"],
//!   "concept_weights": {"sky": 0.5},
//!   "items": [{"id": "img1", "features": [0.9, 0.8, 0.0], "concepts": {"aircraft": 1, "sky": 2}}],
//!   "queries": [{"id": "q1", "concepts": ["aircraft", "sky"]}],
//!   "privates": [{"id": "p1", "concepts": ["person"]}],
//!   "references": [{"id": "h1", "items": ["img1"], "queries": ["q1"]}]
//! }
//! ```
//!
//! Every array except `items` is optional. Auxiliary records without
//! features are embedded as k-hot vectors over the concept universe.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(
        default,
        skip_serializing_if = "BTreeMap::is_empty",
        deserialize_with = "deserialize_concepts"
    )]
    pub concepts: BTreeMap<String, u32>,
}

impl ItemRecord {
    pub fn with_features(id: impl Into<String>, features: Vec<f64>) -> Self {
        ItemRecord {
            id: id.into(),
            features: Some(features),
            concepts: BTreeMap::new(),
        }
    }

    pub fn with_concepts<I, S>(id: impl Into<String>, concepts: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        ItemRecord {
            id: id.into(),
            features: None,
            concepts: concepts.into_iter().map(|(c, n)| (c.into(), n)).collect(),
        }
    }
}

/// Concepts may be written as a count map or, for queries, as a plain list.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConceptsField {
    Counts(BTreeMap<String, u32>),
    List(Vec<String>),
}

fn deserialize_concepts<'de, D>(de: D) -> std::result::Result<BTreeMap<String, u32>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(match ConceptsField::deserialize(de)? {
        ConceptsField::Counts(m) => m,
        ConceptsField::List(v) => v.into_iter().map(|c| (c, 1)).collect(),
    })
}

fn validate_records(items: &[ItemRecord], what: &str) -> Result<Option<usize>> {
    let mut seen = HashSet::new();
    let mut dim = None;
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(Error::Format(format!("duplicate {what} id '{}'", item.id)));
        }
        if item.features.is_none() && item.concepts.is_empty() {
            return Err(Error::Format(format!(
                "{what} '{}' has neither features nor concepts",
                item.id
            )));
        }
        if let Some(f) = &item.features {
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format(format!("{what} '{}' has non-finite features", item.id)));
            }
            match dim {
                None => dim = Some(f.len()),
                Some(d) if d != f.len() => {
                    return Err(Error::Format(format!(
                        "{what} '{}' has feature dimension {} but expected {d}",
                        item.id,
                        f.len()
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(dim)
}

/// The ground set `V` of summarizable items.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSet {
    items: Vec<ItemRecord>,
    dim: usize,
}

impl GroundSet {
    pub fn new(items: Vec<ItemRecord>) -> Result<Self> {
        let dim = validate_records(&items, "item")?.unwrap_or(0);
        Ok(GroundSet { items, dim })
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Feature dimension `L`; zero when no item carries features.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxRole {
    Query,
    Private,
    PreviousSummary,
}

/// Items of `V'` sharing one role.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    items: Vec<ItemRecord>,
    role: AuxRole,
    dim: usize,
}

impl AuxiliarySet {
    pub fn new(items: Vec<ItemRecord>, role: AuxRole) -> Result<Self> {
        let dim = validate_records(&items, "auxiliary item")?.unwrap_or(0);
        Ok(AuxiliarySet { items, role, dim })
    }

    pub fn empty(role: AuxRole) -> Self {
        AuxiliarySet {
            items: Vec::new(),
            role,
            dim: 0,
        }
    }

    /// Fails when an id also occurs in `ground`.
    pub fn check_disjoint(&self, ground: &GroundSet) -> Result<()> {
        let ids: HashSet<&str> = ground.items().iter().map(|it| it.id.as_str()).collect();
        match self.items.iter().find(|it| ids.contains(it.id.as_str())) {
            Some(it) => Err(Error::Format(format!(
                "auxiliary id '{}' collides with a ground item",
                it.id
            ))),
            None => Ok(()),
        }
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn role(&self) -> AuxRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Concept ids, their weights `w`, and an id → column map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptUniverse {
    concepts: Vec<String>,
    weights: Vec<f64>,
    index: HashMap<String, usize>,
}

impl ConceptUniverse {
    pub fn new(concepts: Vec<String>) -> Result<Self> {
        let weights = vec![1.0; concepts.len()];
        Self::with_weights(concepts, weights)
    }

    pub fn with_weights(concepts: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if concepts.len() != weights.len() {
            return Err(Error::Format(format!(
                "{} concepts but {} weights",
                concepts.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Format(format!("concept weight {w} is not a nonnegative number")));
        }
        let mut index = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate concept '{c}'")));
            }
        }
        Ok(ConceptUniverse {
            concepts,
            weights,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, concept: &str) -> Option<usize> {
        self.index.get(concept).copied()
    }

    /// Sparse count vector of an item over this universe.
    pub fn counts_of(&self, item: &ItemRecord) -> Result<Vec<(usize, u32)>> {
        item.concepts
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(c, &n)| {
                self.index_of(c)
                    .map(|i| (i, n))
                    .ok_or_else(|| Error::Lookup(format!("unknown concept '{c}' on '{}'", item.id)))
            })
            .collect()
    }
}

/// k-hot embedding of a concept query. Duplicate ids collapse.
pub fn embed_query<S: AsRef<str>>(concepts: &[S], universe: &ConceptUniverse) -> Result<Vec<f64>> {
    let mut v = vec![0.0; universe.len()];
    for c in concepts {
        let c = c.as_ref();
        let i = universe
            .index_of(c)
            .ok_or_else(|| Error::Lookup(format!("unknown concept '{c}'")))?;
        v[i] = 1.0;
    }
    Ok(v)
}

/// Concept ids whose entry in a k-hot vector is set.
pub fn embed_query_inverse(vector: &[f64], universe: &ConceptUniverse) -> Vec<String> {
    vector
        .iter()
        .zip(universe.concepts())
        .filter(|(x, _)| **x >= 0.5)
        .map(|(_, c)| c.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemFormat {
    Json,
    Csv,
}

impl FromStr for ItemFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ItemFormat::Json),
            "csv" => Ok(ItemFormat::Csv),
            other => Err(Error::Config(format!("unknown item format '{other}'"))),
        }
    }
}

/// Loads a ground set. JSON input may be a bare array of records or a full
/// collection document; CSV input has header `id,f0,..,f{L-1}`.
pub fn load_items(path: impl AsRef<Path>, format: ItemFormat) -> Result<GroundSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ItemFormat::Json => {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let items = match value {
                serde_json::Value::Array(_) => value,
                serde_json::Value::Object(mut o) => o
                    .remove("items")
                    .ok_or_else(|| Error::Format("document has no 'items' array".into()))?,
                _ => return Err(Error::Format("expected an array or an object".into())),
            };
            GroundSet::new(serde_json::from_value(items)?)
        }
        ItemFormat::Csv => parse_csv_items(text.as_bytes()),
    }
}

fn parse_csv_items(bytes: &[u8]) -> Result<GroundSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("id") {
        return Err(Error::Format("first CSV column must be 'id'".into()));
    }
    for (k, h) in headers.iter().skip(1).enumerate() {
        if h != format!("f{k}") {
            return Err(Error::Format(format!("expected header 'f{k}', found '{h}'")));
        }
    }
    let mut items = Vec::new();
    for row in reader.records() {
        let row = row?;
        let id = row.get(0).unwrap_or_default().to_string();
        let features = row
            .iter()
            .skip(1)
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| Error::Format(format!("item '{id}': bad number '{x}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        items.push(ItemRecord::with_features(id, features));
    }
    GroundSet::new(items)
}

/// A human (or generated) reference summary, optionally tied to the query and
/// private items it was written for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    #[serde(default)]
    pub id: String,
    pub items: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub privates: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum WeightsField {
    Map(BTreeMap<String, f64>),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize, Serialize)]
struct CollectionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    concepts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    concept_weights: Option<WeightsField>,
    items: Vec<ItemRecord>,
    #[serde(default)]
    queries: Vec<ItemRecord>,
    #[serde(default)]
    privates: Vec<ItemRecord>,
    #[serde(default)]
    references: Vec<ReferenceSummary>,
}

/// One collection: ground set, auxiliary sets, concept universe and references.
#[derive(Debug, Clone)]
pub struct Collection {
    pub name: Option<String>,
    pub ground: GroundSet,
    pub queries: AuxiliarySet,
    pub privates: AuxiliarySet,
    pub universe: ConceptUniverse,
    pub references: Vec<ReferenceSummary>,
}

impl Collection {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CollectionDoc = serde_json::from_str(text)?;
        let concepts = match doc.concepts {
            Some(c) => c,
            None => {
                let all: BTreeSet<&String> = doc
                    .items
                    .iter()
                    .chain(&doc.queries)
                    .chain(&doc.privates)
                    .flat_map(|it| it.concepts.keys())
                    .collect();
                all.into_iter().cloned().collect()
            }
        };
        let universe = match doc.concept_weights {
            None => ConceptUniverse::new(concepts)?,
            Some(WeightsField::List(w)) => ConceptUniverse::with_weights(concepts, w)?,
            Some(WeightsField::Map(m)) => {
                let mut w = vec![1.0; concepts.len()];
                for (c, x) in m {
                    let i = concepts
                        .iter()
                        .position(|k| *k == c)
                        .ok_or_else(|| Error::Lookup(format!("weight for unknown concept '{c}'")))?;
                    w[i] = x;
                }
                ConceptUniverse::with_weights(concepts, w)?
            }
        };
        let ground = GroundSet::new(doc.items)?;
        let queries = embed_aux(doc.queries, AuxRole::Query, &universe)?;
        let privates = embed_aux(doc.privates, AuxRole::Private, &universe)?;
        let collection = Collection {
            name: doc.name,
            ground,
            queries,
            privates,
            universe,
            references: doc.references,
        };
        collection.validate()?;
        Ok(collection)
    }

    fn validate(&self) -> Result<()> {
        self.queries.check_disjoint(&self.ground)?;
        self.privates.check_disjoint(&self.ground)?;
        let qids: HashSet<&str> = self.queries.items().iter().map(|q| q.id.as_str()).collect();
        if let Some(p) = self.privates.items().iter().find(|p| qids.contains(p.id.as_str())) {
            return Err(Error::Format(format!("id '{}' is both a query and a private item", p.id)));
        }
        for it in self.ground.items().iter().chain(self.queries.items()).chain(self.privates.items()) {
            self.universe.counts_of(it)?;
        }
        for r in &self.references {
            for id in &r.items {
                if self.ground.position(id).is_none() {
                    return Err(Error::Lookup(format!("reference '{}' names unknown item '{id}'", r.id)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CollectionDoc {
            name: self.name.clone(),
            concepts: Some(self.universe.concepts().to_vec()),
            concept_weights: Some(WeightsField::List(self.universe.weights().to_vec())),
            items: self.ground.items().to_vec(),
            queries: self.queries.items().to_vec(),
            privates: self.privates.items().to_vec(),
            references: self.references.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Gives feature-less auxiliary records their k-hot concept embedding.
fn embed_aux(items: Vec<ItemRecord>, role: AuxRole, universe: &ConceptUniverse) -> Result<AuxiliarySet> {
    let items = items
        .into_iter()
        .map(|mut it| {
            if it.features.is_none() {
                let ids: Vec<&str> = it.concepts.keys().map(String::as_str).collect();
                it.features = Some(embed_query(&ids, universe)?);
            }
            Ok(it)
        })
        .collect::<Result<Vec<_>>>()?;
    AuxiliarySet::new(items, role)
}
