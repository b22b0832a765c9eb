//! Incremental marginal gains `m(A ∪ {j}) − m(A)` for greedy selection.

use nalgebra::DMatrix;

use super::closed::{fl_term, rouge_term};
use super::linalg::solve_pd;
use super::{check_sets, measure, union, Family, FunctionSpec, MeasureMode};
use crate::error::{Error, Result};
use crate::instance::{Context, EvalKernel};

/// Marginal-gain cache for one measure and a growing set `A ⊆ V`.
pub trait GainState: Send + Sync {
    /// Gain of adding `j ∉ A`.
    fn gain(&self, j: usize) -> Result<f64>;
    fn commit(&mut self, j: usize) -> Result<()>;
    /// Measure value at the current `A`.
    fn value(&self) -> f64;
    fn selected(&self) -> &[usize];
}

/// Picks the cached state for the family and mode, or a from-scratch fallback.
pub fn make_state<'a>(
    spec: &FunctionSpec,
    ctx: &'a Context,
    mode: MeasureMode,
    q: &[usize],
    p: &[usize],
) -> Result<Box<dyn GainState + 'a>> {
    spec.validate()?;
    check_sets(ctx, mode, &[], q, p)?;
    let q: Vec<usize> = if matches!(mode, MeasureMode::Smi | MeasureMode::Csmi) { q.to_vec() } else { Vec::new() };
    let p: Vec<usize> = if matches!(mode, MeasureMode::Cg | MeasureMode::Csmi) { p.to_vec() } else { Vec::new() };
    let spec = spec.clone();
    Ok(match (spec.family, mode) {
        (Family::SetCover, _) => Box::new(SetCoverState::new(ctx, mode, &q, &p)?),
        (Family::ProbSetCover, _) => Box::new(ProbCoverState::new(ctx, mode, &q, &p)?),
        (Family::GraphCut, MeasureMode::Csmi) => {
            return Err(Error::Unsupported(
                "conditional mutual information is not meaningful for graph cut".into(),
            ))
        }
        (Family::GraphCut, _) => Box::new(GraphCutState::new(&spec, ctx, mode, &q, &p)?),
        (Family::FacilityLocation1 | Family::FacilityLocation2, _) => Box::new(FlState::new(&spec, ctx, mode, &q, &p)?),
        (Family::LogDet, _) => Box::new(LogDetState::new(&spec, ctx, mode, &q, &p)?),
        (Family::Rouge, _) => Box::new(RougeState::new(ctx, mode, &q, &p)?),
        (Family::ConcaveOverModular, MeasureMode::Smi) => Box::new(ComState::new(&spec, ctx, &q)?),
        (Family::DisparitySum, MeasureMode::Base) => Box::new(DispSumState::new(ctx)?),
        _ => Box::new(Recompute {
            spec,
            ctx,
            mode,
            q,
            p,
            sel: Vec::new(),
            value: 0.0,
        }),
    })
}

struct Recompute<'a> {
    spec: FunctionSpec,
    ctx: &'a Context,
    mode: MeasureMode,
    q: Vec<usize>,
    p: Vec<usize>,
    sel: Vec<usize>,
    value: f64,
}

impl GainState for Recompute<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let mut s = self.sel.clone();
        s.push(j);
        Ok(measure(&self.spec, self.ctx, self.mode, &s, &self.q, &self.p)? - self.value)
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.sel.push(j);
        self.value = measure(&self.spec, self.ctx, self.mode, &self.sel, &self.q, &self.p)?;
        Ok(())
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn selected(&self) -> &[usize] {
        &self.sel
    }
}

fn coverage(ctx: &Context, set: &[usize]) -> Result<Vec<bool>> {
    let cd = ctx.concepts()?;
    let mut g = vec![false; cd.universe_size()];
    for &j in set {
        for &(c, n) in cd.counts(j) {
            g[c] |= n > 0;
        }
    }
    Ok(g)
}

struct SetCoverState<'a> {
    ctx: &'a Context,
    counts_toward: Vec<bool>,
    covered: Vec<bool>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> SetCoverState<'a> {
    fn new(ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let gq = coverage(ctx, q)?;
        let gp = coverage(ctx, p)?;
        let counts_toward = (0..gq.len())
            .map(|c| match mode {
                MeasureMode::Base => true,
                MeasureMode::Smi => gq[c],
                MeasureMode::Cg => !gp[c],
                MeasureMode::Csmi => gq[c] && !gp[c],
            })
            .collect();
        Ok(SetCoverState {
            ctx,
            counts_toward,
            covered: vec![false; gq.len()],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for SetCoverState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let cd = self.ctx.concepts()?;
        Ok(cd
            .counts(j)
            .iter()
            .filter(|&&(c, n)| n > 0 && self.counts_toward[c] && !self.covered[c])
            .map(|&(c, _)| cd.weights()[c])
            .sum())
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for &(c, n) in self.ctx.concepts()?.counts(j) {
            self.covered[c] |= n > 0;
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

struct ProbCoverState<'a> {
    ctx: &'a Context,
    /// Mode-dependent factor per concept: 1, 1 − P(Q), P(P) or their product.
    factor: Vec<f64>,
    miss: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> ProbCoverState<'a> {
    fn new(ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let cd = ctx.concepts()?;
        let l = cd.universe_size();
        let miss_of = |set: &[usize]| {
            let mut m = vec![1.0; l];
            for &j in set {
                for &(c, pr) in cd.probs(j) {
                    m[c] *= 1.0 - pr;
                }
            }
            m
        };
        let mq = miss_of(q);
        let mp = miss_of(p);
        let factor = (0..l)
            .map(|c| {
                cd.weights()[c]
                    * match mode {
                        MeasureMode::Base => 1.0,
                        MeasureMode::Smi => 1.0 - mq[c],
                        MeasureMode::Cg => mp[c],
                        MeasureMode::Csmi => (1.0 - mq[c]) * mp[c],
                    }
            })
            .collect();
        Ok(ProbCoverState {
            ctx,
            factor,
            miss: vec![1.0; l],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for ProbCoverState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        Ok(self
            .ctx
            .concepts()?
            .probs(j)
            .iter()
            .map(|&(c, pr)| self.factor[c] * self.miss[c] * pr)
            .sum())
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for &(c, pr) in self.ctx.concepts()?.probs(j) {
            self.miss[c] *= 1.0 - pr;
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

struct GraphCutState<'a> {
    m: &'a DMatrix<f64>,
    mode: MeasureMode,
    lambda: f64,
    /// Part of the gain that does not depend on `A`.
    fixed: Vec<f64>,
    /// `Σ_{a∈A} s_aj`.
    row_sums: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> GraphCutState<'a> {
    fn new(spec: &FunctionSpec, ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let m = ctx.kernel(Family::GraphCut.view().unwrap())?;
        let ng = ctx.n_ground();
        let lambda = spec.lambda;
        let fixed = (0..ng)
            .map(|j| {
                let rep = (0..ng).map(|i| m[(i, j)]).sum::<f64>() - lambda * m[(j, j)];
                match mode {
                    MeasureMode::Base => rep,
                    MeasureMode::Smi => 2.0 * lambda * q.iter().map(|&x| m[(j, x)]).sum::<f64>(),
                    MeasureMode::Cg => {
                        let cross: f64 = p
                            .iter()
                            .map(|&x| if x >= ng { spec.nu * m[(j, x)] } else { m[(j, x)] })
                            .sum();
                        rep - 2.0 * lambda * cross
                    }
                    MeasureMode::Csmi => unreachable!("rejected by make_state"),
                }
            })
            .collect();
        Ok(GraphCutState {
            m,
            mode,
            lambda,
            fixed,
            row_sums: vec![0.0; ng],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for GraphCutState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        Ok(match self.mode {
            MeasureMode::Smi => self.fixed[j],
            _ => self.fixed[j] - 2.0 * self.lambda * self.row_sums[j],
        })
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for (x, rs) in self.row_sums.iter_mut().enumerate() {
            *rs += self.m[(j, x)];
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

struct FlState<'a> {
    ek: EvalKernel<'a>,
    mode: MeasureMode,
    rows: usize,
    weight: Vec<f64>,
    qmax: Vec<f64>,
    pmax: Vec<f64>,
    cur: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> FlState<'a> {
    fn new(spec: &FunctionSpec, ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let ng = ctx.n_ground();
        let m = ctx.kernel(spec.family.view().unwrap())?;
        let fl1 = spec.family == Family::FacilityLocation1;
        let eta = if fl1 { spec.eta } else { 1.0 };
        let ek = EvalKernel::new(m, ng, q, p, eta, spec.nu, 0.0);
        let rows = if fl1 { ng } else { ctx.n_total() };
        let weight = (0..rows).map(|i| if !fl1 && i < ng { spec.eta } else { 1.0 }).collect();
        let mx = |i: usize, set: &[usize]| set.iter().map(|&j| ek.get(i, j)).fold(0.0, f64::max);
        let qmax = (0..rows).map(|i| mx(i, q)).collect();
        let pmax = (0..rows).map(|i| mx(i, p)).collect();
        Ok(FlState {
            ek,
            mode,
            rows,
            weight,
            qmax,
            pmax,
            cur: vec![0.0; rows],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for FlState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let mut g = 0.0;
        for i in 0..self.rows {
            let s = self.ek.get(i, j);
            if s > self.cur[i] {
                let (q, p) = (self.qmax[i], self.pmax[i]);
                g += self.weight[i] * (fl_term(self.mode, s, q, p) - fl_term(self.mode, self.cur[i], q, p));
            }
        }
        Ok(g)
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for i in 0..self.rows {
            self.cur[i] = self.cur[i].max(self.ek.get(i, j));
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

/// Incremental Cholesky over `V` for the kernel conditioned on a fixed set
/// `C`: `K = L_VV − L_VC L_C⁻¹ L_CV`. The gain of `j` is `log d_j²`, the
/// squared residual of `j` after projecting out the current selection.
struct CondCholesky {
    k: DMatrix<f64>,
    c: Vec<Vec<f64>>,
    d2: Vec<f64>,
}

impl CondCholesky {
    fn new(ek: &EvalKernel<'_>, cond: &[usize]) -> Result<Self> {
        let ng = ek.n_ground();
        let v: Vec<usize> = (0..ng).collect();
        let mut k = ek.submatrix(&v, &v);
        if !cond.is_empty() {
            let lvc = ek.submatrix(&v, cond);
            let t = solve_pd(&ek.submatrix(cond, cond), &lvc.transpose())?;
            k -= &lvc * t;
        }
        let d2 = (0..ng).map(|j| k[(j, j)]).collect();
        Ok(CondCholesky {
            k,
            c: vec![Vec::new(); ng],
            d2,
        })
    }

    /// `None` when the conditioned kernel is not positive definite at `j`.
    fn log_gain(&self, j: usize) -> Option<f64> {
        let d2 = self.d2[j];
        (d2 > 0.0).then(|| d2.ln())
    }

    fn commit(&mut self, s: usize) -> Result<()> {
        let ds = self.d2[s];
        if !(ds > 0.0) {
            return Err(Error::Numeric(format!("cannot add item {s}: residual {ds}")));
        }
        let ds = ds.sqrt();
        let cs = self.c[s].clone();
        for j in 0..self.d2.len() {
            let dot: f64 = cs.iter().zip(&self.c[j]).map(|(a, b)| a * b).sum();
            let e = (self.k[(s, j)] - dot) / ds;
            self.c[j].push(e);
            self.d2[j] -= e * e;
        }
        Ok(())
    }
}

struct LogDetState {
    /// Terms of the gain with their signs.
    parts: Vec<(f64, CondCholesky)>,
    sel: Vec<usize>,
    value: f64,
}

impl LogDetState {
    fn new(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let ek = EvalKernel::new(
            ctx.kernel(Family::LogDet.view().unwrap())?,
            ctx.n_ground(),
            q,
            p,
            spec.eta,
            spec.nu,
            ctx.jitter(),
        );
        let conds: Vec<(f64, Vec<usize>)> = match mode {
            MeasureMode::Base => vec![(1.0, vec![])],
            MeasureMode::Smi => vec![(1.0, vec![]), (-1.0, q.to_vec())],
            MeasureMode::Cg => vec![(1.0, p.to_vec())],
            MeasureMode::Csmi => vec![(1.0, p.to_vec()), (-1.0, union(p, q))],
        };
        let parts = conds
            .into_iter()
            .map(|(sign, c)| Ok((sign, CondCholesky::new(&ek, &c)?)))
            .collect::<Result<_>>()?;
        Ok(LogDetState {
            parts,
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for LogDetState {
    /// Items that would make a conditioned kernel indefinite get `-∞`, so
    /// greedy passes over them.
    fn gain(&self, j: usize) -> Result<f64> {
        let mut g = 0.0;
        for (sign, part) in &self.parts {
            match part.log_gain(j) {
                Some(x) => g += sign * x,
                None => return Ok(f64::NEG_INFINITY),
            }
        }
        Ok(g)
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        let g = self.gain(j)?;
        if g == f64::NEG_INFINITY {
            return Err(Error::Numeric(format!(
                "adding item {j} makes the conditioned log-det kernel indefinite; lower nu or eta, or raise the jitter"
            )));
        }
        self.value += g;
        for (_, part) in &mut self.parts {
            part.commit(j)?;
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

struct RougeState<'a> {
    ctx: &'a Context,
    mode: MeasureMode,
    a: Vec<f64>,
    q: Vec<f64>,
    pv: Vec<f64>,
    pw: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> RougeState<'a> {
    fn new(ctx: &'a Context, mode: MeasureMode, q: &[usize], p: &[usize]) -> Result<Self> {
        let cd = ctx.concepts()?;
        let ng = ctx.n_ground();
        let pv: Vec<usize> = p.iter().copied().filter(|&i| i < ng).collect();
        let pw: Vec<usize> = p.iter().copied().filter(|&i| i >= ng).collect();
        Ok(RougeState {
            ctx,
            mode,
            a: vec![0.0; cd.universe_size()],
            q: cd.count_vector(q),
            pv: cd.count_vector(&pv),
            pw: cd.count_vector(&pw),
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for RougeState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let cd = self.ctx.concepts()?;
        Ok(cd
            .counts(j)
            .iter()
            .map(|&(c, n)| {
                let t = |a: f64| rouge_term(self.mode, a, self.q[c], self.pv[c], self.pw[c]);
                cd.weights()[c] * (t(self.a[c] + n as f64) - t(self.a[c]))
            })
            .sum())
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for &(c, n) in self.ctx.concepts()?.counts(j) {
            self.a[c] += n as f64;
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

struct ComState<'a> {
    m: &'a DMatrix<f64>,
    spec: FunctionSpec,
    q: Vec<usize>,
    /// `δ1 ψ(Σ_{q∈Q} s_jq)`, independent of `A`.
    own: Vec<f64>,
    /// `Σ_{a∈A} s_qa` per query.
    col: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> ComState<'a> {
    fn new(spec: &FunctionSpec, ctx: &'a Context, q: &[usize]) -> Result<Self> {
        let m = ctx.kernel(Family::ConcaveOverModular.view().unwrap())?;
        let (d1, _) = spec.com_deltas();
        let own = (0..ctx.n_ground())
            .map(|j| d1 * spec.psi.apply(q.iter().map(|&x| m[(j, x)]).sum()))
            .collect();
        Ok(ComState {
            m,
            spec: spec.clone(),
            q: q.to_vec(),
            own,
            col: vec![0.0; q.len()],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for ComState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        let (_, d2) = self.spec.com_deltas();
        let psi = self.spec.psi;
        let g2: f64 = self
            .q
            .iter()
            .zip(&self.col)
            .map(|(&x, &c)| psi.apply(c + self.m[(x, j)]) - psi.apply(c))
            .sum();
        Ok(self.own[j] + d2 * g2)
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.gain(j)?;
        for (k, &x) in self.q.iter().enumerate() {
            self.col[k] += self.m[(x, j)];
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

struct DispSumState<'a> {
    m: &'a DMatrix<f64>,
    /// `Σ_{a∈A} (1 − s_aj)`.
    dist: Vec<f64>,
    sel: Vec<usize>,
    value: f64,
}

impl<'a> DispSumState<'a> {
    fn new(ctx: &'a Context) -> Result<Self> {
        Ok(DispSumState {
            m: ctx.kernel(Family::DisparitySum.view().unwrap())?,
            dist: vec![0.0; ctx.n_ground()],
            sel: Vec::new(),
            value: 0.0,
        })
    }
}

impl GainState for DispSumState<'_> {
    fn gain(&self, j: usize) -> Result<f64> {
        Ok(self.dist[j])
    }

    fn commit(&mut self, j: usize) -> Result<()> {
        self.value += self.dist[j];
        for (x, d) in self.dist.iter_mut().enumerate() {
            *d += 1.0 - self.m[(j, x)];
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
