//! Closed-form expressions of the measures, family by family.

use nalgebra::DMatrix;

use super::linalg::{logdet_general, logdet_pd, solve_pd};
use super::oracle::{definitional_oracle, restricted_f};
use super::{union, Family, FunctionSpec, MeasureMode};
use crate::error::{Error, Result};
use crate::instance::{Context, EvalKernel};

pub(super) fn evaluate(
    spec: &FunctionSpec,
    ctx: &Context,
    mode: MeasureMode,
    a: &[usize],
    q: &[usize],
    p: &[usize],
) -> Result<f64> {
    match spec.family {
        Family::SetCover => set_cover(ctx, mode, a, q, p),
        Family::ProbSetCover => prob_set_cover(ctx, mode, a, q, p),
        Family::GraphCut => graph_cut(spec, ctx, mode, a, q, p),
        Family::FacilityLocation1 => fl1(spec, ctx, mode, a, q, p),
        Family::FacilityLocation2 => fl2(spec, ctx, mode, a, q, p),
        Family::LogDet => log_det(spec, ctx, mode, a, q, p),
        Family::Rouge => rouge(ctx, mode, a, q, p),
        Family::ConcaveOverModular if mode == MeasureMode::Smi => com_smi(spec, ctx, a, q),
        Family::DisparitySum | Family::DisparityMin if mode == MeasureMode::Base => restricted_f(spec, ctx, &[], &[], a),
        // No simpler expression than the definition.
        _ => definitional_oracle(spec, ctx, mode, a, q, p),
    }
}

fn covered(ctx: &Context, set: &[usize]) -> Result<Vec<bool>> {
    let cd = ctx.concepts()?;
    let mut g = vec![false; cd.universe_size()];
    for &j in set {
        for &(c, n) in cd.counts(j) {
            if n > 0 {
                g[c] = true;
            }
        }
    }
    Ok(g)
}

/// `w(Γ(A))`, `w(Γ(A) ∩ Γ(Q))`, `w(Γ(A) \ Γ(P))`, `w(Γ(A) ∩ Γ(Q) \ Γ(P))`.
fn set_cover(ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let w = ctx.concepts()?.weights();
    let ga = covered(ctx, a)?;
    let gq = covered(ctx, q)?;
    let gp = covered(ctx, p)?;
    let keep = |c: usize| match mode {
        MeasureMode::Base => ga[c],
        MeasureMode::Smi => ga[c] && gq[c],
        MeasureMode::Cg => ga[c] && !gp[c],
        MeasureMode::Csmi => ga[c] && gq[c] && !gp[c],
    };
    Ok((0..w.len()).filter(|&c| keep(c)).map(|c| w[c]).sum())
}

/// `P_i(X) = Π_{j∈X} (1 − p_ij)`, the probability that `X` misses concept `i`.
fn miss_prob(ctx: &Context, set: &[usize]) -> Result<Vec<f64>> {
    let cd = ctx.concepts()?;
    let mut m = vec![1.0; cd.universe_size()];
    for &j in set {
        for &(c, pr) in cd.probs(j) {
            m[c] *= 1.0 - pr;
        }
    }
    Ok(m)
}

fn prob_set_cover(ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let w = ctx.concepts()?.weights();
    let pa = miss_prob(ctx, a)?;
    let pq = miss_prob(ctx, q)?;
    let pp = miss_prob(ctx, p)?;
    Ok((0..w.len())
        .map(|i| {
            let t = match mode {
                MeasureMode::Base => 1.0 - pa[i],
                MeasureMode::Smi => (1.0 - pa[i]) * (1.0 - pq[i]),
                MeasureMode::Cg => (1.0 - pa[i]) * pp[i],
                MeasureMode::Csmi => (1.0 - pa[i]) * (1.0 - pq[i]) * pp[i],
            };
            w[i] * t
        })
        .sum())
}

fn graph_cut(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let m = ctx.kernel(Family::GraphCut.view().unwrap())?;
    let ng = ctx.n_ground();
    let base = || {
        let rep: f64 = a.iter().map(|&j| (0..ng).map(|i| m[(i, j)]).sum::<f64>()).sum();
        let within: f64 = a.iter().map(|&i| a.iter().map(|&j| m[(i, j)]).sum::<f64>()).sum();
        rep - spec.lambda * within
    };
    match mode {
        MeasureMode::Base => Ok(base()),
        MeasureMode::Smi => {
            let cross: f64 = a.iter().map(|&i| q.iter().map(|&j| m[(i, j)]).sum::<f64>()).sum();
            Ok(2.0 * spec.lambda * cross)
        }
        MeasureMode::Cg => {
            let mut cross = 0.0;
            for &i in a {
                for &j in p {
                    let nu = if j >= ng { spec.nu } else { 1.0 };
                    cross += nu * m[(i, j)];
                }
            }
            Ok(base() - 2.0 * spec.lambda * cross)
        }
        MeasureMode::Csmi => Err(Error::Unsupported(
            "conditional mutual information is not meaningful for graph cut: P drops out".into(),
        )),
    }
}

fn max_row(m: &DMatrix<f64>, i: usize, set: impl Iterator<Item = usize>) -> f64 {
    set.map(|j| m[(i, j)]).fold(0.0, f64::max)
}

/// `Σ_{i∈V} min(max_A s, η max_Q s)` and friends, with `ν` on the private part.
fn fl1(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let m = ctx.kernel(Family::FacilityLocation1.view().unwrap())?;
    let ng = ctx.n_ground();
    let mut total = 0.0;
    for i in 0..ng {
        let ma = max_row(m, i, a.iter().copied());
        let mq = spec.eta * max_row(m, i, q.iter().copied());
        let mp = max_row(m, i, p.iter().copied().filter(|&j| j < ng))
            .max(spec.nu * max_row(m, i, p.iter().copied().filter(|&j| j >= ng)));
        total += match mode {
            MeasureMode::Base => ma,
            MeasureMode::Smi => ma.min(mq),
            MeasureMode::Cg => (ma - mp).max(0.0),
            MeasureMode::Csmi => (ma.min(mq) - mp).max(0.0),
        };
    }
    Ok(total)
}

/// Per-row term of the facility-location measures.
#[inline]
pub(crate) fn fl_term(mode: MeasureMode, m: f64, q: f64, p: f64) -> f64 {
    match mode {
        MeasureMode::Base => m,
        MeasureMode::Smi => m.min(q),
        MeasureMode::Cg => (m - p).max(0.0),
        MeasureMode::Csmi => (m.min(q) - p).max(0.0),
    }
}

/// `Σ_{i∈Q} max_A s + η Σ_{i∈A} max_Q s` on the cross-only kernel; the other
/// modes use the row-wise facility-location form over `U = Ω` with rows in
/// `V` weighted by `η`.
fn fl2(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let m = ctx.kernel(Family::FacilityLocation2.view().unwrap())?;
    let ng = ctx.n_ground();
    if mode == MeasureMode::Smi {
        let to_query: f64 = q.iter().map(|&i| max_row(m, i, a.iter().copied())).sum();
        let to_data: f64 = a.iter().map(|&i| max_row(m, i, q.iter().copied())).sum();
        return Ok(to_query + spec.eta * to_data);
    }
    let ek = EvalKernel::new(m, ng, q, p, 1.0, spec.nu, 0.0);
    let mx = |i: usize, set: &[usize]| set.iter().map(|&j| ek.get(i, j)).fold(0.0, f64::max);
    Ok((0..ctx.n_total())
        .map(|i| {
            let u = if i < ng { spec.eta } else { 1.0 };
            u * fl_term(mode, mx(i, a), mx(i, q), mx(i, p))
        })
        .sum())
}

/// `log det(I − L_X⁻¹ L_XQ L_Q⁻¹ L_XQᵀ)`, zero when either side is empty.
fn logdet_one_minus(ek: &EvalKernel<'_>, x: &[usize], q: &[usize]) -> Result<f64> {
    if x.is_empty() || q.is_empty() {
        return Ok(0.0);
    }
    let lx = ek.submatrix(x, x);
    let lq = ek.submatrix(q, q);
    let lxq = ek.submatrix(x, q);
    let t = solve_pd(&lq, &lxq.transpose())?;
    let m = solve_pd(&lx, &(&lxq * t))?;
    let id = DMatrix::identity(x.len(), x.len());
    logdet_general(&(id - m))
}

fn log_det(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let ek = EvalKernel::new(
        ctx.kernel(Family::LogDet.view().unwrap())?,
        ctx.n_ground(),
        q,
        p,
        spec.eta,
        spec.nu,
        ctx.jitter(),
    );
    match mode {
        MeasureMode::Base => logdet_pd(&ek.submatrix(a, a)),
        MeasureMode::Smi => Ok(-logdet_one_minus(&ek, a, q)?),
        MeasureMode::Cg => {
            if a.is_empty() {
                return Ok(0.0);
            }
            let la = ek.submatrix(a, a);
            if p.is_empty() {
                return logdet_pd(&la);
            }
            let lap = ek.submatrix(a, p);
            let t = solve_pd(&ek.submatrix(p, p), &lap.transpose())?;
            logdet_pd(&(la - &lap * t))
        }
        MeasureMode::Csmi => {
            if a.is_empty() || q.is_empty() {
                return Ok(0.0);
            }
            Ok(logdet_one_minus(&ek, p, q)? - logdet_one_minus(&ek, &union(a, p), q)?)
        }
    }
}

/// Per-concept counts of `A`, `Q`, and `P` split by side.
struct RougeCounts {
    w: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    pv: Vec<f64>,
    pw: Vec<f64>,
}

impl RougeCounts {
    fn new(ctx: &Context, a: &[usize], q: &[usize], p: &[usize]) -> Result<Self> {
        let cd = ctx.concepts()?;
        let ng = ctx.n_ground();
        let pv: Vec<usize> = p.iter().copied().filter(|&i| i < ng).collect();
        let pw: Vec<usize> = p.iter().copied().filter(|&i| i >= ng).collect();
        Ok(RougeCounts {
            w: cd.weights().to_vec(),
            a: cd.count_vector(a),
            q: cd.count_vector(q),
            pv: cd.count_vector(&pv),
            pw: cd.count_vector(&pw),
        })
    }
}

/// Per-concept value of the ROUGE measures given `A`'s count `a`.
#[inline]
pub(crate) fn rouge_term(mode: MeasureMode, a: f64, q: f64, pv: f64, pw: f64) -> f64 {
    match mode {
        MeasureMode::Base => a,
        MeasureMode::Smi => a.min(q),
        MeasureMode::Cg if pv == 0.0 => (a - pw).max(0.0),
        MeasureMode::Csmi if pv == 0.0 => (a - pw).max(0.0).min(q),
        // A previously seen summary inside V: expand f(X) = max(c_V(X), c_V'(X)).
        MeasureMode::Cg => (a + pv).max(pw) - pv.max(pw),
        MeasureMode::Csmi => (a + pv).max(pw) + pv.max(q + pw) - (a + pv).max(q + pw) - pv.max(pw),
    }
}

fn rouge(ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    let c = RougeCounts::new(ctx, a, q, p)?;
    Ok((0..c.w.len())
        .map(|i| c.w[i] * rouge_term(mode, c.a[i], c.q[i], c.pv[i], c.pw[i]))
        .sum())
}

/// `δ1 Σ_{i∈A} ψ(Σ_{j∈Q} s_ij) + δ2 Σ_{j∈Q} ψ(Σ_{i∈A} s_ij)`.
fn com_smi(spec: &FunctionSpec, ctx: &Context, a: &[usize], q: &[usize]) -> Result<f64> {
    let m = ctx.kernel(Family::ConcaveOverModular.view().unwrap())?;
    let (d1, d2) = spec.com_deltas();
    let t1: f64 = a
        .iter()
        .map(|&i| spec.psi.apply(q.iter().map(|&j| m[(i, j)]).sum()))
        .sum();
    let t2: f64 = q
        .iter()
        .map(|&j| spec.psi.apply(a.iter().map(|&i| m[(i, j)]).sum()))
        .sum();
    Ok(d1 * t1 + d2 * t2)
}
