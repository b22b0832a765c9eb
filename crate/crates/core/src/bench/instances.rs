//! Small random instances for cross-checking closed forms, states and
//! gradients against slower references.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{AuxRole, AuxiliarySet, GroundSet, ItemRecord};
use crate::error::Result;
use crate::functions::{logdet_pd, Concave, Family, FunctionSpec};
use crate::instance::{ConceptData, Context, EvalKernel};
use crate::kernel::{build_kernel, Metric};

/// Sizes and options for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_ground: usize,
    pub max_query: usize,
    pub max_private: usize,
    /// Chance that the conditioning set also takes ground items.
    pub p_in_ground: f64,
    pub concepts: usize,
    /// Allow cosine kernels, whose raw similarities can be negative.
    pub cosine: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_ground: 8,
            max_query: 3,
            max_private: 3,
            p_in_ground: 0.25,
            concepts: 5,
            cosine: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub spec: FunctionSpec,
    pub ctx: Context,
    /// A random subset of the ground set.
    pub a: Vec<usize>,
    pub q: Vec<usize>,
    pub p: Vec<usize>,
}

impl RandomInstance {
    pub fn ground(&self) -> Vec<usize> {
        (0..self.ctx.n_ground()).collect()
    }

    /// Ground items outside `A` and `P`.
    pub fn free(&self) -> Vec<usize> {
        (0..self.ctx.n_ground())
            .filter(|i| !self.a.contains(i) && !self.p.contains(i))
            .collect()
    }
}

fn subset<R: Rng>(rng: &mut R, from: &[usize], max: usize) -> Vec<usize> {
    let mut v = from.to_vec();
    v.shuffle(rng);
    v.truncate(rng.random_range(0..=max.min(from.len())));
    v
}

fn concept_data<R: Rng>(rng: &mut R, n: usize, u: usize) -> Result<ConceptData> {
    let weights = (0..u).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut counts = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = Vec::new();
        let mut p = Vec::new();
        for k in 0..u {
            if rng.random_bool(0.5) {
                c.push((k, rng.random_range(1..=3)));
            }
            if rng.random_bool(0.6) {
                p.push((k, rng.random_range(0.05..0.95)));
            }
        }
        counts.push(c);
        probs.push(p);
    }
    ConceptData::new(weights, counts)?.with_probabilities(probs)
}

fn kernel_context<R: Rng>(rng: &mut R, n_ground: usize, n_aux: usize, metric: Metric, jitter: f64) -> Result<Context> {
    let point = |rng: &mut R, id: String| {
        let x = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        ItemRecord::with_features(id, x)
    };
    let ground = GroundSet::new((0..n_ground).map(|i| point(rng, format!("v{i}"))).collect())?;
    let aux = AuxiliarySet::new(
        (0..n_aux).map(|i| point(rng, format!("x{i}"))).collect(),
        AuxRole::Query,
    )?;
    Ok(Context::from_kernel(&build_kernel(&ground, &[&aux], metric, jitter)?))
}

/// A random instance for `family`. Ground items come first, then `Q`, then
/// the auxiliary part of `P`.
pub fn random_instance<R: Rng>(rng: &mut R, family: Family, shape: Shape) -> Result<RandomInstance> {
    loop {
        let ng = rng.random_range(1..=shape.max_ground.max(1));
        let nq = rng.random_range(0..=shape.max_query);
        let npa = rng.random_range(0..=shape.max_private);
        let n_aux = nq + npa;
        let mut spec = FunctionSpec::new(family);
        spec.lambda = rng.random_range(0.0..1.5);
        spec.psi = [Concave::Sqrt, Concave::Log1p, Concave::Identity][rng.random_range(0..3)];
        spec.com_weights = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        let ctx = if family.uses_concepts() {
            Context::from_concepts(concept_data(rng, ng + n_aux, shape.concepts)?, ng)?
        } else if family == Family::LogDet {
            spec.eta = rng.random_range(0.0..1.0);
            spec.nu = rng.random_range(0.0..1.0);
            let sigma = rng.random_range(0.4..1.2);
            let jitter = rng.random_range(0.05..0.3);
            kernel_context(rng, ng, n_aux, Metric::Rbf { sigma }, jitter)?
        } else {
            spec.eta = rng.random_range(0.0..2.0);
            spec.nu = rng.random_range(0.0..2.0);
            let metric = if shape.cosine && rng.random_bool(0.5) {
                Metric::Cosine
            } else {
                Metric::Rbf {
                    sigma: rng.random_range(0.4..1.2),
                }
            };
            kernel_context(rng, ng, n_aux, metric, 1e-6)?
        };
        let ground: Vec<usize> = (0..ng).collect();
        let q: Vec<usize> = (ng..ng + nq).collect();
        let mut p: Vec<usize> = (ng + nq..ng + n_aux).collect();
        if rng.random_bool(shape.p_in_ground) {
            p.extend(subset(rng, &ground, 2));
        }
        let left: Vec<usize> = ground.iter().copied().filter(|i| !p.contains(i)).collect();
        let a = subset(rng, &left, left.len());
        if family == Family::LogDet {
            // every principal submatrix of a PD matrix is PD
            let all: Vec<usize> = (0..ctx.n_total()).collect();
            let m = ctx.kernel(family.view().unwrap())?;
            let ek = EvalKernel::new(m, ng, &q, &p, spec.eta, spec.nu, ctx.jitter());
            if logdet_pd(&ek.submatrix(&all, &all)).is_err() {
                continue;
            }
        }
        return Ok(RandomInstance { spec, ctx, a, q, p });
    }
}
