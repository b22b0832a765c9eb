//! Cardinality-constrained maximization: lazy and naive greedy, exhaustive
//! search, and the dispatcher for the summarization flavors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{make_state, Family, FunctionSpec, GainState, MeasureMode};
use crate::instance::{Context, KernelView};

/// A set function over `V` that can hand out marginal-gain states.
pub trait Objective: Sync {
    fn context(&self) -> &Context;

    /// Items that may be selected, in ascending index order.
    fn candidates(&self) -> Vec<usize>;

    fn start(&self) -> Result<Box<dyn GainState + '_>>;

    /// Lazy evaluation is only exact for submodular objectives.
    fn is_submodular(&self) -> bool {
        true
    }

    /// Value of a set, computed by committing its items to a fresh state.
    fn value_of(&self, set: &[usize]) -> Result<f64> {
        let mut st = self.start()?;
        for &j in set {
            st.commit(j)?;
        }
        Ok(st.value())
    }
}

/// One measure of one function family.
pub struct MeasureObjective<'a> {
    pub spec: FunctionSpec,
    pub ctx: &'a Context,
    pub mode: MeasureMode,
    pub q: Vec<usize>,
    pub p: Vec<usize>,
    /// Ground items that may not be picked (a previously seen summary).
    pub excluded: Vec<usize>,
}

impl<'a> MeasureObjective<'a> {
    pub fn new(spec: FunctionSpec, ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Self {
        MeasureObjective {
            spec,
            ctx,
            mode,
            q: q.to_vec(),
            p: p.to_vec(),
            excluded: Vec::new(),
        }
    }
}

impl Objective for MeasureObjective<'_> {
    fn context(&self) -> &Context {
        self.ctx
    }

    fn candidates(&self) -> Vec<usize> {
        let mut skip = vec![false; self.ctx.n_ground()];
        for &i in self.excluded.iter().chain(&self.p) {
            if i < skip.len() {
                skip[i] = true;
            }
        }
        (0..self.ctx.n_ground()).filter(|&i| !skip[i]).collect()
    }

    fn start(&self) -> Result<Box<dyn GainState + '_>> {
        make_state(&self.spec, self.ctx, self.mode, &self.q, &self.p)
    }

    fn is_submodular(&self) -> bool {
        lazy_is_exact(&self.spec, self.ctx, self.mode)
    }
}

/// Whether a measure is submodular in `A` on the given kernel, so that stale
/// gains are valid upper bounds.
pub fn lazy_is_exact(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode) -> bool {
    use MeasureMode::*;
    match (spec.family, mode) {
        (f, _) if !f.is_submodular() => false,
        (Family::LogDet, Smi | Csmi) => false,
        // a previous summary inside V turns the ROUGE value into a max of two coverages
        (Family::Rouge, Cg | Csmi) => false,
        // negative similarities make the diversity penalty supermodular
        (Family::GraphCut, Base | Cg) if spec.lambda > 0.0 => {
            let n = ctx.n_ground();
            match ctx.kernel(KernelView::Raw) {
                Ok(m) => !(0..n).any(|i| (0..n).any(|j| m[(i, j)] < 0.0)),
                Err(_) => false,
            }
        }
        _ => true,
    }
}

/// `Σ_{j∈A} w_j`; mostly for tests.
pub struct ModularObjective<'a> {
    pub ctx: &'a Context,
    pub weights: Vec<f64>,
}

struct ModularState<'a> {
    w: &'a [f64],
    sel: Vec<usize>,
    value: f64,
}

impl GainState for ModularState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        Ok(self.w[j])
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.w[j];
        self.sel.push(j);
        Ok(())
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn selected(&self) -> &[usize] {
        &self.sel
    }
}

impl Objective for ModularObjective<'_> {
    fn context(&self) -> &Context {
        self.ctx
    }

    fn candidates(&self) -> Vec<usize> {
        (0..self.weights.len().min(self.ctx.n_ground())).collect()
    }

    fn start(&self) -> Result<Box<dyn GainState + '_>> {
        Ok(Box::new(ModularState {
            w: &self.weights,
            sel: Vec::new(),
            value: 0.0,
        }))
    }
}

/// The summarization settings, each a choice of `(S, T)` in `max I_f(A; S | T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Generic,
    Query,
    Privacy,
    Irrelevance,
    Update,
    QueryUpdate,
    #[serde(alias = "joint")]
    QueryPrivacy,
}

impl Flavor {
    pub const ALL: [Flavor; 7] = [
        Flavor::Generic,
        Flavor::Query,
        Flavor::Privacy,
        Flavor::Irrelevance,
        Flavor::Update,
        Flavor::QueryUpdate,
        Flavor::QueryPrivacy,
    ];

    pub fn mode(self) -> MeasureMode {
        match self {
            Flavor::Generic => MeasureMode::Base,
            Flavor::Query => MeasureMode::Smi,
            Flavor::Privacy | Flavor::Irrelevance | Flavor::Update => MeasureMode::Cg,
            Flavor::QueryUpdate | Flavor::QueryPrivacy => MeasureMode::Csmi,
        }
    }

    pub fn needs_query(self) -> bool {
        matches!(self, Flavor::Query | Flavor::QueryUpdate | Flavor::QueryPrivacy)
    }

    pub fn needs_private(self) -> bool {
        matches!(self, Flavor::Privacy | Flavor::Irrelevance | Flavor::QueryPrivacy)
    }

    pub fn needs_previous(self) -> bool {
        matches!(self, Flavor::Update | Flavor::QueryUpdate)
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Generic => "generic",
            Flavor::Query => "query",
            Flavor::Privacy => "privacy",
            Flavor::Irrelevance => "irrelevance",
            Flavor::Update => "update",
            Flavor::QueryUpdate => "query_update",
            Flavor::QueryPrivacy => "query_privacy",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Flavor::ALL
            .into_iter()
            .find(|f| f.to_string() == key)
            .or((key == "joint").then_some(Flavor::QueryPrivacy))
            .ok_or_else(|| Error::Config(format!("unknown flavor '{s}'")))
    }
}

/// Ordered selection with the gain of each pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub items: Vec<String>,
    pub indices: Vec<usize>,
    pub gains: Vec<f64>,
    pub value: f64,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<Flavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
}

impl Selection {
    fn from_state(obj: &dyn Objective, st: &dyn GainState, gains: Vec<f64>, budget: usize) -> Self {
        let ids = obj.context().ids();
        Selection {
            items: st.selected().iter().map(|&i| ids[i].clone()).collect(),
            indices: st.selected().to_vec(),
            gains,
            value: st.value(),
            budget,
            flavor: None,
            function: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyOptions {
    pub lazy: bool,
    /// Stop as soon as the best gain is not positive instead of filling the budget.
    pub stop_on_nonpositive: bool,
    /// Evaluate candidate gains on the rayon pool (naive greedy only).
    pub parallel: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            lazy: true,
            stop_on_nonpositive: false,
            parallel: false,
        }
    }
}

impl GreedyOptions {
    pub fn naive() -> Self {
        GreedyOptions {
            lazy: false,
            ..Self::default()
        }
    }
}

fn finite(g: f64, j: usize) -> Result<f64> {
    if g.is_nan() {
        Err(Error::Numeric(format!("marginal gain of item {j} is NaN")))
    } else {
        Ok(g)
    }
}

/// Greedy maximization under `|A| ≤ k`. Ties go to the lowest index.
pub fn greedy_maximize(obj: &dyn Objective, k: usize, opts: GreedyOptions) -> Result<Selection> {
    let cands = obj.candidates();
    if k > cands.len() {
        return Err(Error::Config(format!(
            "budget {k} exceeds the {} selectable items",
            cands.len()
        )));
    }
    if opts.lazy && obj.is_submodular() {
        lazy_greedy(obj, &cands, k, opts)
    } else {
        if opts.lazy {
            log::debug!("objective is not submodular; using naive greedy");
        }
        naive_greedy(obj, &cands, k, opts)
    }
}

fn naive_greedy(obj: &dyn Objective, cands: &[usize], k: usize, opts: GreedyOptions) -> Result<Selection> {
    let mut st = obj.start()?;
    let mut taken = vec![false; obj.context().n_ground()];
    let mut gains = Vec::with_capacity(k);
    for _ in 0..k {
        let rest: Vec<usize> = cands.iter().copied().filter(|&j| !taken[j]).collect();
        let evals: Vec<f64> = if opts.parallel {
            let st_ref: &dyn GainState = st.as_ref();
            rest.par_iter()
                .map(|&j| st_ref.gain(j).and_then(|g| finite(g, j)))
                .collect::<Result<_>>()?
        } else {
            rest.iter()
                .map(|&j| st.gain(j).and_then(|g| finite(g, j)))
                .collect::<Result<_>>()?
        };
        let mut best: Option<(usize, f64)> = None;
        for (&j, &g) in rest.iter().zip(&evals) {
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((j, g));
            }
        }
        let Some((j, g)) = best else { break };
        if opts.stop_on_nonpositive && g <= 0.0 {
            break;
        }
        st.commit(j)?;
        taken[j] = true;
        gains.push(g);
    }
    Ok(Selection::from_state(obj, st.as_ref(), gains, k))
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    bound: f64,
    idx: usize,
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Entry {
    /// Larger bound first, then lower index. Bounds are finite, and -0 ties +0.
    fn cmp(&self, o: &Self) -> Ordering {
        let by_bound = self.bound.partial_cmp(&o.bound).unwrap_or(Ordering::Equal);
        by_bound.then_with(|| o.idx.cmp(&self.idx))
    }
}

/// Slack for stale bounds that floating point pushed just below the fresh gain.
fn near(g: f64) -> f64 {
    1e-10 * g.abs().max(1.0)
}

fn lazy_greedy(obj: &dyn Objective, cands: &[usize], k: usize, opts: GreedyOptions) -> Result<Selection> {
    let mut st = obj.start()?;
    let mut heap = BinaryHeap::with_capacity(cands.len());
    for &j in cands {
        let g = finite(st.gain(j)?, j)?;
        heap.push(Entry { bound: g, idx: j, round: 0 });
    }
    let mut gains = Vec::with_capacity(k);
    for round in 0..k {
        let chosen = loop {
            let Some(top) = heap.pop() else { break None };
            if top.round != round {
                let g = finite(st.gain(top.idx)?, top.idx)?;
                heap.push(Entry { bound: g, round, ..top });
                continue;
            }
            // Anything within floating-point reach of the fresh top must be fresh too.
            let mut close = Vec::new();
            while let Some(e) = heap.peek() {
                if e.bound >= top.bound - near(top.bound) {
                    close.push(heap.pop().unwrap());
                } else {
                    break;
                }
            }
            if close.iter().all(|e| e.round == round) {
                heap.extend(close);
                break Some(top);
            }
            heap.push(top);
            for e in close {
                let bound = if e.round == round { e.bound } else { finite(st.gain(e.idx)?, e.idx)? };
                heap.push(Entry { bound, round, ..e });
            }
        };
        let Some(top) = chosen else { break };
        if opts.stop_on_nonpositive && top.bound <= 0.0 {
            break;
        }
        st.commit(top.idx)?;
        gains.push(top.bound);
    }
    Ok(Selection::from_state(obj, st.as_ref(), gains, k))
}

/// Largest number of subsets [`brute_force_opt`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive maximum over all subsets of size at most `k`. The first
/// maximizer in lexicographic order wins ties.
pub fn brute_force_opt(obj: &dyn Objective, k: usize) -> Result<Selection> {
    let cands = obj.candidates();
    let n = cands.len();
    if k > n {
        return Err(Error::Config(format!("budget {k} exceeds the {n} selectable items")));
    }
    let total: f64 = (0..=k).map(|i| binomial(n, i)).sum();
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::Size(format!(
            "{total:.0} subsets of {n} items up to size {k}; the limit is {BRUTE_FORCE_LIMIT:.0}"
        )));
    }
    let mut best: (f64, Vec<usize>) = (obj.value_of(&[])?, Vec::new());
    for size in 1..=k {
        let mut pos: Vec<usize> = (0..size).collect();
        loop {
            let set: Vec<usize> = pos.iter().map(|&x| cands[x]).collect();
            let v = obj.value_of(&set)?;
            if v.is_nan() {
                return Err(Error::Numeric(format!("objective is NaN at {set:?}")));
            }
            if v > best.0 {
                best = (v, set);
            }
            // next combination
            let mut i = size;
            while i > 0 && pos[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            pos[i - 1] += 1;
            for x in i..size {
                pos[x] = pos[x - 1] + 1;
            }
        }
    }
    let mut st = obj.start()?;
    let mut gains = Vec::with_capacity(best.1.len());
    for &j in &best.1 {
        gains.push(st.gain(j)?);
        st.commit(j)?;
    }
    Ok(Selection::from_state(obj, st.as_ref(), gains, k))
}

/// Sets a flavor may draw on. `None` means not supplied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlavorSets {
    pub query: Option<Vec<usize>>,
    pub private: Option<Vec<usize>>,
    pub previous: Option<Vec<usize>>,
}

/// Measure mode plus the `S`-side, `T`-side and excluded sets of a flavor.
pub struct Resolved {
    pub mode: MeasureMode,
    pub q: Vec<usize>,
    pub p: Vec<usize>,
    pub excluded: Vec<usize>,
}

pub fn resolve_flavor(flavor: Flavor, sets: &FlavorSets) -> Result<Resolved> {
    let need = |s: &Option<Vec<usize>>, what: &str| {
        s.clone()
            .ok_or_else(|| Error::Config(format!("flavor {flavor} needs a {what} set")))
    };
    let (q, p, excluded) = match flavor {
        Flavor::Generic => (vec![], vec![], vec![]),
        Flavor::Query => (need(&sets.query, "query")?, vec![], vec![]),
        Flavor::Privacy | Flavor::Irrelevance => (vec![], need(&sets.private, "private")?, vec![]),
        Flavor::Update => {
            let a0 = need(&sets.previous, "previous-summary")?;
            (vec![], a0.clone(), a0)
        }
        Flavor::QueryUpdate => {
            let a0 = need(&sets.previous, "previous-summary")?;
            (need(&sets.query, "query")?, a0.clone(), a0)
        }
        Flavor::QueryPrivacy => (need(&sets.query, "query")?, need(&sets.private, "private")?, vec![]),
    };
    Ok(Resolved {
        mode: flavor.mode(),
        q,
        p,
        excluded,
    })
}

/// `max_{|A| ≤ k} I_f(A; S | T)` with `(S, T)` chosen by the flavor.
pub fn master_solve(
    flavor: Flavor,
    spec: &FunctionSpec,
    ctx: &Context,
    sets: &FlavorSets,
    k: usize,
    opts: GreedyOptions,
) -> Result<Selection> {
    let r = resolve_flavor(flavor, sets)?;
    if spec.family == Family::GraphCut && r.mode == MeasureMode::Csmi {
        return Err(Error::Unsupported(format!(
            "graph cut has no conditional mutual information, so flavor {flavor} is unavailable"
        )));
    }
    let obj = MeasureObjective {
        spec: spec.clone(),
        ctx,
        mode: r.mode,
        q: r.q,
        p: r.p,
        excluded: r.excluded,
    };
    let mut sel = greedy_maximize(&obj, k, opts)?;
    sel.flavor = Some(flavor);
    sel.function = Some(spec.clone());
    Ok(sel)
}
