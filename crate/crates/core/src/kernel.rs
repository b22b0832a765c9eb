//! Pairwise similarity kernels over `Ω = V ∪ V'`.
//!
//! Rows `0..n_ground` belong to `V`, the remaining rows to the auxiliary
//! items in the order they were supplied.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{AuxiliarySet, GroundSet, ItemRecord};
use crate::error::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    Dot,
    Rbf { sigma: f64 },
}

impl Default for Metric {
    fn default() -> Self {
        Metric::Cosine
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Cosine => write!(f, "cosine"),
            Metric::Dot => write!(f, "dot"),
            Metric::Rbf { sigma } => write!(f, "rbf:{sigma}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// `cosine`, `dot`, `rbf` (sigma 1) or `rbf:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "cosine" => Ok(Metric::Cosine),
            None if s == "dot" => Ok(Metric::Dot),
            None if s == "rbf" => Ok(Metric::Rbf { sigma: 1.0 }),
            Some(("rbf", sigma)) => match sigma.parse::<f64>() {
                Ok(sigma) if sigma > 0.0 => Ok(Metric::Rbf { sigma }),
                _ => Err(Error::Config(format!("bad rbf bandwidth '{sigma}'"))),
            },
            _ => Err(Error::Config(format!("unknown metric '{s}'"))),
        }
    }
}

/// Symmetric similarity matrix with an id index and the jitter used before
/// any factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityKernel {
    matrix: DMatrix<f64>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    n_ground: usize,
    metric: Metric,
    jitter: f64,
    degenerate: Vec<usize>,
}

impl SimilarityKernel {
    /// Wraps a precomputed matrix. Asymmetry beyond 1e-12 is rejected and the
    /// matrix is then symmetrized exactly.
    pub fn from_matrix(
        matrix: DMatrix<f64>,
        ids: Vec<String>,
        n_ground: usize,
        metric: Metric,
        jitter: f64,
    ) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || ids.len() != n || n_ground > n {
            return Err(Error::Format(format!(
                "kernel is {}x{} with {} ids and {n_ground} ground rows",
                matrix.nrows(),
                matrix.ncols(),
                ids.len()
            )));
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::Config(format!("jitter must be a nonnegative number, got {jitter}")));
        }
        let mut matrix = matrix;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if !(a.is_finite() && b.is_finite()) || (a - b).abs() > 1e-12 {
                    return Err(Error::Format(format!("kernel not symmetric at ({i}, {j})")));
                }
                matrix[(j, i)] = a;
            }
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate kernel id '{id}'")));
            }
        }
        Ok(SimilarityKernel {
            matrix,
            ids,
            index,
            n_ground,
            metric,
            jitter,
            degenerate: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn n_ground(&self) -> usize {
        self.n_ground
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    /// Rows whose feature vector was zero under cosine.
    pub fn degenerate_rows(&self) -> &[usize] {
        &self.degenerate
    }

    /// Succeeds when `matrix + εI` admits a Cholesky factorization.
    pub fn check_positive_definite(&self) -> Result<()> {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.jitter;
        }
        m.cholesky().map(|_| ()).ok_or_else(|| {
            Error::Numeric(format!(
                "kernel + {}·I is not positive definite; raise the jitter",
                self.jitter
            ))
        })
    }

    /// Writes the matrix as CSV with an `id` header row and column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend((0..self.size()).map(|j| format!("{}", self.matrix[(i, j)])));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<kernel csv>", e))?;
        Ok(())
    }
}

fn features_of<'a>(item: &'a ItemRecord, dim: usize) -> Result<&'a [f64]> {
    let f = item
        .features
        .as_deref()
        .ok_or_else(|| Error::Format(format!("item '{}' has no feature vector", item.id)))?;
    if f.len() != dim {
        return Err(Error::Format(format!(
            "item '{}' has dimension {} but the kernel uses {dim}",
            item.id,
            f.len()
        )));
    }
    Ok(f)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the kernel over `V` followed by every auxiliary set in order.
/// Zero vectors under cosine get similarity 0 to everything but themselves.
pub fn build_kernel(ground: &GroundSet, aux: &[&AuxiliarySet], metric: Metric, jitter: f64) -> Result<SimilarityKernel> {
    build(ground, aux, metric, jitter, false)
}

/// Like [`build_kernel`] but zero vectors under cosine are an error.
pub fn build_kernel_strict(
    ground: &GroundSet,
    aux: &[&AuxiliarySet],
    metric: Metric,
    jitter: f64,
) -> Result<SimilarityKernel> {
    build(ground, aux, metric, jitter, true)
}

fn build(ground: &GroundSet, aux: &[&AuxiliarySet], metric: Metric, jitter: f64, strict: bool) -> Result<SimilarityKernel> {
    let items: Vec<&ItemRecord> = ground
        .items()
        .iter()
        .chain(aux.iter().flat_map(|a| a.items()))
        .collect();
    for a in aux {
        a.check_disjoint(ground)?;
    }
    let dim = items
        .iter()
        .find_map(|it| it.features.as_ref().map(Vec::len))
        .unwrap_or(0);
    let feats = items.iter().map(|it| features_of(it, dim)).collect::<Result<Vec<_>>>()?;
    let n = feats.len();

    let norms: Vec<f64> = feats.iter().map(|f| dot(f, f).sqrt()).collect();
    let mut degenerate = Vec::new();
    if metric == Metric::Cosine {
        for (i, nrm) in norms.iter().enumerate() {
            if *nrm == 0.0 {
                if strict {
                    return Err(Error::Degenerate(format!(
                        "item '{}' has a zero feature vector under cosine",
                        items[i].id
                    )));
                }
                log::warn!("item '{}' has a zero feature vector; cosine similarities set to 0", items[i].id);
                degenerate.push(i);
            }
        }
    }

    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = match metric {
                Metric::Dot => dot(feats[i], feats[j]),
                Metric::Cosine => {
                    if i == j {
                        1.0
                    } else if norms[i] == 0.0 || norms[j] == 0.0 {
                        0.0
                    } else {
                        (dot(feats[i], feats[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                    }
                }
                Metric::Rbf { sigma } => {
                    let d2: f64 = feats[i].iter().zip(feats[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2 / (2.0 * sigma * sigma)).exp()
                }
            };
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let ids = items.iter().map(|it| it.id.clone()).collect();
    let mut k = SimilarityKernel::from_matrix(m, ids, ground.len(), metric, jitter)?;
    k.degenerate = degenerate;
    Ok(k)
}

/// Replaces the within-`V` and within-`V'` blocks by the identity, keeping
/// only the cross similarities.
pub fn cross_only_kernel(kernel: &SimilarityKernel) -> SimilarityKernel {
    let n = kernel.size();
    let ng = kernel.n_ground();
    let mut out = kernel.clone();
    for i in 0..n {
        for j in 0..n {
            if (i < ng) == (j < ng) {
                out.matrix[(i, j)] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    out
}
