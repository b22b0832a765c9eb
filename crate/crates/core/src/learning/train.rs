use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{EpochRecord, MixtureModel, ParamSlot, TrainingExample};
use crate::bench::metrics::vrouge;
use crate::bench::oracle::grad_error;
use crate::error::{Error, Result};
use crate::functions::{make_state, measure, param_gradient, GainState, ParamGrad};
use crate::instance::{ConceptData, Context};
use crate::optimizer::{greedy_maximize, lazy_is_exact, resolve_flavor, GreedyOptions, Objective, Resolved, Selection};

/// Margin `l_n(Y)` between a candidate and one reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginLoss {
    /// `1 − V-ROUGE(Y; R)`.
    #[default]
    OneMinusVrouge,
    /// 0 when `Y = R` as sets, else 1.
    ZeroOne,
}

impl fmt::Display for MarginLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginLoss::OneMinusVrouge => "one_minus_vrouge",
            MarginLoss::ZeroOne => "zero_one",
        })
    }
}

impl FromStr for MarginLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "one_minus_vrouge" | "vrouge" => Ok(MarginLoss::OneMinusVrouge),
            "zero_one" | "01" => Ok(MarginLoss::ZeroOne),
            _ => Err(Error::Config(format!("unknown margin loss '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub margin: MarginLoss,
    /// Independent runs; the first starts from the given model, the others
    /// from fresh random weights. The run with the lowest objective wins.
    pub restarts: usize,
    /// Compute per-example losses on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.05,
            momentum: 0.9,
            margin: MarginLoss::OneMinusVrouge,
            restarts: 1,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("at least one epoch is needed".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} is outside [0, 1)", self.momentum)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("at least one training run is needed".into()));
        }
        Ok(())
    }
}

fn resolve(model: &MixtureModel, ex: &TrainingExample) -> Result<Resolved> {
    resolve_flavor(model.task, &ex.sets())
}

fn component_values(model: &MixtureModel, ex: &TrainingExample, r: &Resolved, y: &[usize]) -> Result<Vec<f64>> {
    model
        .components
        .iter()
        .map(|c| measure(c, &ex.ctx, r.mode, y, &r.q, &r.p))
        .collect()
}

fn component_grads(model: &MixtureModel, ex: &TrainingExample, r: &Resolved, y: &[usize]) -> Result<Vec<ParamGrad>> {
    model
        .components
        .iter()
        .map(|c| param_gradient(c, &ex.ctx, r.mode, y, &r.q, &r.p))
        .collect()
}

/// `Σ_i w_i · m_i(Y)`.
pub fn mixture_eval(model: &MixtureModel, ex: &TrainingExample, y: &[usize]) -> Result<f64> {
    let r = resolve(model, ex)?;
    let vals = component_values(model, ex, &r, y)?;
    Ok(vals.iter().zip(&model.weights).map(|(v, w)| v * w).sum())
}

fn concept_data(ctx: &Context) -> Result<&ConceptData> {
    ctx.concepts()
        .map_err(|_| Error::Config("a V-ROUGE margin needs concept annotations".into()))
}

/// `l(Y)` against one reference.
pub fn margin_value(margin: MarginLoss, ctx: &Context, y: &[usize], reference: &[usize]) -> Result<f64> {
    match margin {
        MarginLoss::OneMinusVrouge => Ok(1.0 - vrouge(y, &[reference.to_vec()], concept_data(ctx)?)?),
        MarginLoss::ZeroOne => {
            let same = y.len() == reference.len() && y.iter().all(|i| reference.contains(i));
            Ok(if same { 0.0 } else { 1.0 })
        }
    }
}

/// Incremental margin for greedy.
struct MarginState<'a> {
    kind: MarginLoss,
    cd: Option<&'a ConceptData>,
    reference: Vec<usize>,
    target: Vec<f64>,
    norm: f64,
    counts: Vec<f64>,
    hits: usize,
    misses: usize,
}

impl<'a> MarginState<'a> {
    fn new(kind: MarginLoss, ctx: &'a Context, reference: &[usize]) -> Result<Self> {
        let (cd, target, norm) = match kind {
            MarginLoss::OneMinusVrouge => {
                let cd = concept_data(ctx)?;
                let target = cd.count_vector(reference);
                let norm: f64 = target.iter().zip(cd.weights()).map(|(c, w)| c * w).sum();
                if norm <= 0.0 {
                    return Err(Error::Degenerate("reference summary carries no concepts".into()));
                }
                (Some(cd), target, norm)
            }
            MarginLoss::ZeroOne => (None, Vec::new(), 1.0),
        };
        Ok(MarginState {
            kind,
            cd,
            reference: reference.to_vec(),
            counts: vec![0.0; target.len()],
            target,
            norm,
            hits: 0,
            misses: 0,
        })
    }

    fn value(&self) -> f64 {
        match self.kind {
            MarginLoss::OneMinusVrouge => {
                let cd = self.cd.unwrap();
                let s: f64 = (0..self.counts.len())
                    .map(|c| cd.weights()[c] * self.counts[c].min(self.target[c]))
                    .sum();
                1.0 - s / self.norm
            }
            MarginLoss::ZeroOne => {
                if self.misses == 0 && self.hits == self.reference.len() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    fn gain(&self, j: usize) -> f64 {
        match self.kind {
            MarginLoss::OneMinusVrouge => {
                let cd = self.cd.unwrap();
                let mut up = 0.0;
                for &(c, n) in cd.counts(j) {
                    let now = self.counts[c];
                    up += cd.weights()[c] * ((now + n as f64).min(self.target[c]) - now.min(self.target[c]));
                }
                -up / self.norm
            }
            MarginLoss::ZeroOne => {
                let inside = self.reference.contains(&j);
                let (h, m) = if inside { (self.hits + 1, self.misses) } else { (self.hits, self.misses + 1) };
                let after = if m == 0 && h == self.reference.len() { 0.0 } else { 1.0 };
                after - self.value()
            }
        }
    }

    fn commit(&mut self, j: usize) {
        match self.kind {
            MarginLoss::OneMinusVrouge => {
                for &(c, n) in self.cd.unwrap().counts(j) {
                    self.counts[c] += n as f64;
                }
            }
            MarginLoss::ZeroOne => {
                if self.reference.contains(&j) {
                    self.hits += 1;
                } else {
                    self.misses += 1;
                }
            }
        }
    }
}

/// `Σ w_i m_i(Y)`, optionally plus a margin against a reference.
struct MixtureObjective<'a> {
    model: &'a MixtureModel,
    ex: &'a TrainingExample,
    r: Resolved,
    margin: Option<(MarginLoss, &'a [usize])>,
}

struct MixtureState<'a> {
    parts: Vec<(f64, Box<dyn GainState + 'a>)>,
    margin: Option<MarginState<'a>>,
    sel: Vec<usize>,
    value: f64,
}

impl GainState for MixtureState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let mut g = 0.0;
        for (w, st) in &self.parts {
            if *w != 0.0 {
                g += w * st.gain(j)?;
            }
        }
        if let Some(m) = &self.margin {
            g += m.gain(j);
        }
        Ok(g)
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for (_, st) in &mut self.parts {
            st.commit(j)?;
        }
        if let Some(m) = &mut self.margin {
            m.commit(j);
        }
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

impl<'a> MixtureObjective<'a> {
    fn new(model: &'a MixtureModel, ex: &'a TrainingExample, margin: Option<(MarginLoss, &'a [usize])>) -> Result<Self> {
        Ok(MixtureObjective {
            model,
            ex,
            r: resolve(model, ex)?,
            margin,
        })
    }
}

impl Objective for MixtureObjective<'_> {
    fn context(&self) -> &Context {
        &self.ex.ctx
    }

    fn candidates(&self) -> Vec<usize> {
        let n = self.ex.ctx.n_ground();
        let mut skip = vec![false; n];
        for &i in self.r.excluded.iter().chain(&self.r.p) {
            if i < n {
                skip[i] = true;
            }
        }
        (0..n).filter(|&i| !skip[i]).collect()
    }

    fn start(&self) -> Result<Box<dyn GainState + '_>> {
        let parts = self
            .model
            .components
            .iter()
            .zip(&self.model.weights)
            .map(|(c, &w)| Ok((w, make_state(c, &self.ex.ctx, self.r.mode, &self.r.q, &self.r.p)?)))
            .collect::<Result<Vec<_>>>()?;
        let margin = match self.margin {
            Some((kind, reference)) => Some(MarginState::new(kind, &self.ex.ctx, reference)?),
            None => None,
        };
        let value = margin.as_ref().map_or(0.0, MarginState::value);
        Ok(Box::new(MixtureState {
            parts,
            margin,
            sel: Vec::new(),
            value,
        }))
    }

    fn is_submodular(&self) -> bool {
        self.margin.is_none()
            && self
                .model
                .components
                .iter()
                .all(|c| lazy_is_exact(c, &self.ex.ctx, self.r.mode))
    }
}

/// Plain greedy summary under the mixture.
pub fn summarize(model: &MixtureModel, ex: &TrainingExample) -> Result<Selection> {
    let obj = MixtureObjective::new(model, ex, None)?;
    let mut sel = greedy_maximize(&obj, ex.k, GreedyOptions::default())?;
    sel.flavor = Some(model.task);
    Ok(sel)
}

/// Greedy `argmax_{|Y| ≤ k} F(Y) + l(Y)` against one reference, stopping
/// early once no item improves the value. The augmented objective is not
/// submodular, so this is a heuristic.
pub fn loss_augmented_inference(
    model: &MixtureModel,
    ex: &TrainingExample,
    margin: MarginLoss,
    reference: &[usize],
) -> Result<(Vec<usize>, f64)> {
    let obj = MixtureObjective::new(model, ex, Some((margin, reference)))?;
    let opts = GreedyOptions {
        stop_on_nonpositive: true,
        ..GreedyOptions::naive()
    };
    let sel = greedy_maximize(&obj, ex.k, opts)?;
    Ok((sel.indices, sel.value))
}

/// `[F(Ŷ) + l(Ŷ)] − F(R)` for one reference, unclamped.
pub fn hinge_loss(model: &MixtureModel, ex: &TrainingExample, margin: MarginLoss, reference: &[usize]) -> Result<f64> {
    if let Some(&i) = reference.iter().find(|&&i| i >= ex.ctx.n_ground()) {
        return Err(Error::Config(format!("reference item {i} is not in the ground set")));
    }
    let (_, aug) = loss_augmented_inference(model, ex, margin, reference)?;
    Ok(aug - mixture_eval(model, ex, reference)?)
}

/// Loss and data gradient of one example, averaged over its references.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub kink: bool,
}

/// `∂L/∂Θ` with `Ŷ` held fixed.
fn hinge_gradient(model: &MixtureModel, ex: &TrainingExample, r: &Resolved, y_hat: &[usize], reference: &[usize]) -> Result<(Vec<f64>, bool)> {
    let fy = component_values(model, ex, r, y_hat)?;
    let fr = component_values(model, ex, r, reference)?;
    let gy = component_grads(model, ex, r, y_hat)?;
    let gr = component_grads(model, ex, r, reference)?;
    let kink = gy.iter().chain(&gr).any(|g| g.kink);
    let grad = model
        .layout()
        .into_iter()
        .map(|(i, slot)| {
            let w = model.weights[i];
            match slot {
                ParamSlot::Weight => fy[i] - fr[i],
                ParamSlot::Lambda => w * (gy[i].lambda - gr[i].lambda),
                ParamSlot::Eta => w * (gy[i].eta - gr[i].eta),
                ParamSlot::Nu => w * (gy[i].nu - gr[i].nu),
            }
        })
        .collect();
    Ok((grad, kink))
}

/// When greedy finds nothing more violating than the reference itself, the
/// reference is the maximizer: the loss and its gradient are zero.
pub fn example_loss(model: &MixtureModel, ex: &TrainingExample, margin: MarginLoss) -> Result<ExampleLoss> {
    let r = resolve(model, ex)?;
    let dim = model.layout().len();
    let mut out = ExampleLoss {
        loss: 0.0,
        grad: vec![0.0; dim],
        kink: false,
    };
    for reference in &ex.references {
        let (y_hat, aug) = loss_augmented_inference(model, ex, margin, reference)?;
        let at_ref = mixture_eval(model, ex, reference)? + margin_value(margin, &ex.ctx, reference, reference)?;
        // incremental and direct evaluation differ by roundoff
        if aug <= at_ref + 1e-10 * at_ref.abs().max(1.0) {
            continue;
        }
        out.loss += aug - mixture_eval(model, ex, reference)?;
        let (g, kink) = hinge_gradient(model, ex, &r, &y_hat, reference)?;
        out.kink |= kink;
        for (a, b) in out.grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let m = ex.references.len() as f64;
    out.loss /= m;
    out.grad.iter_mut().for_each(|g| *g /= m);
    Ok(out)
}

fn per_example<T: Send>(
    data: &[TrainingExample],
    parallel: bool,
    f: impl Fn(&TrainingExample) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if parallel {
        data.par_iter().map(f).collect()
    } else {
        data.iter().map(f).collect()
    }
}

/// Mean hinge, the regularized objective and its gradient at the model's `Θ`.
fn objective(model: &MixtureModel, data: &[TrainingExample], cfg: &TrainConfig) -> Result<(f64, f64, Vec<f64>)> {
    let losses = per_example(data, cfg.parallel, |ex| example_loss(model, ex, cfg.margin))?;
    let theta = model.theta();
    let n = data.len() as f64;
    let mean_hinge = losses.iter().map(|l| l.loss).sum::<f64>() / n;
    let mut grad: Vec<f64> = theta.iter().map(|t| model.reg_strength * t).collect();
    for l in &losses {
        for (g, x) in grad.iter_mut().zip(&l.grad) {
            *g += x / n;
        }
    }
    let reg = 0.5 * model.reg_strength * theta.iter().map(|t| t * t).sum::<f64>();
    Ok((mean_hinge + reg, mean_hinge, grad))
}

fn mean_vrouge(model: &MixtureModel, data: &[TrainingExample], parallel: bool) -> Result<Option<f64>> {
    if !data.iter().all(|ex| ex.ctx.has_concepts()) {
        return Ok(None);
    }
    let scores = per_example(data, parallel, |ex| {
        let sel = summarize(model, ex)?;
        vrouge(&sel.indices, &ex.references, ex.ctx.concepts()?)
    })?;
    Ok(Some(scores.iter().sum::<f64>() / scores.len() as f64))
}

fn project(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Full-batch Nesterov descent on `(1/N) Σ L_n(Θ) + (reg/2)‖Θ‖²` with
/// `Θ ≥ 0` enforced after every step. Returns the best `Θ` seen over all
/// restarts. Restart `r ≥ 1` draws its weights with seed `s + r`, where `s`
/// is the seed of `model0` (0 if it has none).
pub fn train(data: &[TrainingExample], model0: &MixtureModel, cfg: &TrainConfig) -> Result<MixtureModel> {
    if data.is_empty() {
        return Err(Error::Config("no training examples".into()));
    }
    cfg.validate()?;
    model0.validate()?;
    for ex in data {
        ex.validate()?;
    }
    let base = model0.metadata.seed.unwrap_or(0);
    let mut best = descend(data, model0.clone(), cfg)?;
    for r in 1..cfg.restarts as u64 {
        let start = MixtureModel::init(model0.components.clone(), model0.task, model0.reg_strength, base + r)?;
        let run = descend(data, start, cfg)?;
        log::info!("restart {r}: best objective {:.6}", run.0);
        if run.0 < best.0 {
            best = run;
        }
    }
    Ok(best.1)
}

/// One run from `model`; returns its best objective and model.
fn descend(data: &[TrainingExample], mut model: MixtureModel, cfg: &TrainConfig) -> Result<(f64, MixtureModel)> {
    let mut theta = model.theta();
    let mut velocity = vec![0.0; theta.len()];
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    let diverged = |what: &str, theta: &[f64]| {
        Error::Numeric(format!("training diverged ({what} is not finite); last finite parameters {theta:?}"))
    };
    for epoch in 0..=cfg.epochs {
        model.set_theta(&theta)?;
        let (obj, hinge, _) = objective(&model, data, cfg)?;
        if !obj.is_finite() {
            return Err(diverged("objective", &theta));
        }
        let vr = mean_vrouge(&model, data, cfg.parallel)?;
        log::info!("epoch {epoch}: objective {obj:.6} hinge {hinge:.6} vrouge {vr:?}");
        trace.push(EpochRecord {
            epoch,
            objective: obj,
            mean_hinge: hinge,
            mean_vrouge: vr,
        });
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, theta.clone(), epoch));
        }
        if epoch == cfg.epochs {
            break;
        }
        let mut look: Vec<f64> = theta.iter().zip(&velocity).map(|(t, v)| t + cfg.momentum * v).collect();
        project(&mut look);
        model.set_theta(&look)?;
        let (_, _, grad) = objective(&model, data, cfg)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged("gradient", &theta));
        }
        for ((v, g), t) in velocity.iter_mut().zip(&grad).zip(theta.iter_mut()) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *t += *v;
        }
        project(&mut theta);
    }
    let (obj, theta, epoch) = best.expect("at least one epoch ran");
    model.set_theta(&theta)?;
    model.metadata.epochs = cfg.epochs;
    model.metadata.best_epoch = Some(epoch);
    model.metadata.trace = trace;
    Ok((obj, model))
}

/// `epoch,objective,mean_hinge,mean_vrouge`.
pub fn write_trace_csv<W: Write>(out: W, trace: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "objective", "mean_hinge", "mean_vrouge"])?;
    for r in trace {
        w.write_record([
            r.epoch.to_string(),
            r.objective.to_string(),
            r.mean_hinge.to_string(),
            r.mean_vrouge.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdEntry {
    pub component: usize,
    pub slot: ParamSlot,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub max_error: f64,
    /// A component sat on a kink; the comparison is not meaningful.
    pub kink: bool,
    pub entries: Vec<FdEntry>,
}

/// Analytic vs central-difference gradient of the example's hinge loss,
/// with each `Ŷ` frozen at its value for the current `Θ`.
pub fn finite_diff_check(model: &MixtureModel, ex: &TrainingExample, margin: MarginLoss, h: f64) -> Result<FdReport> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step {h} must be positive")));
    }
    let r = resolve(model, ex)?;
    let mut frozen = Vec::new();
    for reference in &ex.references {
        let (y_hat, _) = loss_augmented_inference(model, ex, margin, reference)?;
        let l = margin_value(margin, &ex.ctx, &y_hat, reference)?;
        frozen.push((y_hat, l, reference.clone()));
    }
    let m = frozen.len() as f64;
    let loss_at = |model: &MixtureModel| -> Result<f64> {
        let mut total = 0.0;
        for (y_hat, l, reference) in &frozen {
            total += mixture_eval(model, ex, y_hat)? + l - mixture_eval(model, ex, reference)?;
        }
        Ok(total / m)
    };
    let mut analytic = vec![0.0; model.layout().len()];
    let mut kink = false;
    for (y_hat, _, reference) in &frozen {
        let (g, k) = hinge_gradient(model, ex, &r, y_hat, reference)?;
        kink |= k;
        for (a, b) in analytic.iter_mut().zip(g) {
            *a += b / m;
        }
    }
    let theta = model.theta();
    let mut entries = Vec::with_capacity(theta.len());
    let mut probe = model.clone();
    for (e, (i, slot)) in model.layout().into_iter().enumerate() {
        let at = |x: f64, probe: &mut MixtureModel| -> Result<f64> {
            let mut t = theta.clone();
            t[e] = x;
            probe.set_theta(&t)?;
            loss_at(probe)
        };
        let numeric = if theta[e] >= h {
            (at(theta[e] + h, &mut probe)? - at(theta[e] - h, &mut probe)?) / (2.0 * h)
        } else {
            (at(theta[e] + h, &mut probe)? - at(theta[e], &mut probe)?) / h
        };
        entries.push(FdEntry {
            component: i,
            slot,
            analytic: analytic[e],
            numeric,
            error: grad_error(analytic[e], numeric),
        });
    }
    Ok(FdReport {
        max_error: entries.iter().map(|e| e.error).fold(0.0, f64::max),
        kink,
        entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LooFold {
    pub held_out: String,
    pub vrouge: f64,
    pub model: MixtureModel,
}

#[derive(Debug, Clone, Serialize)]
pub struct LooReport {
    pub folds: Vec<LooFold>,
    pub mean_vrouge: f64,
}

/// Trains on every collection but one and scores the held-out one, for each collection.
pub fn leave_one_out(data: &[TrainingExample], model0: &MixtureModel, cfg: &TrainConfig) -> Result<LooReport> {
    let mut names: Vec<&str> = data.iter().map(|e| e.collection.as_str()).collect();
    names.dedup();
    names.sort_unstable();
    names.dedup();
    if names.len() < 2 {
        return Err(Error::Config("leave-one-out needs at least two collections".into()));
    }
    let mut folds = Vec::with_capacity(names.len());
    for name in names {
        let (test, train_set): (Vec<TrainingExample>, Vec<TrainingExample>) =
            data.iter().cloned().partition(|e| e.collection == name);
        let model = train(&train_set, model0, cfg)?;
        let mut total = 0.0;
        for ex in &test {
            let sel = summarize(&model, ex)?;
            total += vrouge(&sel.indices, &ex.references, concept_data(&ex.ctx)?)?;
        }
        folds.push(LooFold {
            held_out: name.to_string(),
            vrouge: total / test.len() as f64,
            model,
        });
    }
    let mean_vrouge = folds.iter().map(|f| f.vrouge).sum::<f64>() / folds.len() as f64;
    Ok(LooReport { folds, mean_vrouge })
}
