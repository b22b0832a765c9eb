//! Measures computed only from evaluations of the (restricted) set function.

use super::linalg::logdet_pd;
use super::{check_sets, com_constant, union, Family, FunctionSpec, MeasureMode};
use crate::error::Result;
use crate::instance::{Context, EvalKernel};

/// The set function over `Ω` that every measure is built from, with the
/// `V × Q` entries scaled by `eta` and the `V × P` entries scaled by `nu`
/// for the families that take those parameters through the kernel.
pub fn restricted_f(spec: &FunctionSpec, ctx: &Context, q: &[usize], p: &[usize], s: &[usize]) -> Result<f64> {
    let ng = ctx.n_ground();
    let n = ctx.n_total();
    if s.is_empty() {
        return Ok(0.0);
    }
    match spec.family {
        Family::SetCover => {
            let cd = ctx.concepts()?;
            let mut covered = vec![false; cd.universe_size()];
            for &j in s {
                for &(c, k) in cd.counts(j) {
                    if k > 0 {
                        covered[c] = true;
                    }
                }
            }
            Ok(covered.iter().zip(cd.weights()).filter(|(c, _)| **c).map(|(_, w)| w).sum())
        }
        Family::ProbSetCover => {
            let cd = ctx.concepts()?;
            let mut miss = vec![1.0; cd.universe_size()];
            for &j in s {
                for &(c, pr) in cd.probs(j) {
                    miss[c] *= 1.0 - pr;
                }
            }
            Ok(miss.iter().zip(cd.weights()).map(|(m, w)| w * (1.0 - m)).sum())
        }
        Family::Rouge => {
            let cd = ctx.concepts()?;
            let sv: Vec<usize> = s.iter().copied().filter(|&i| i < ng).collect();
            let sw: Vec<usize> = s.iter().copied().filter(|&i| i >= ng).collect();
            let cv = cd.count_vector(&sv);
            let cw = cd.count_vector(&sw);
            Ok(cd.weights().iter().zip(cv.iter().zip(&cw)).map(|(w, (a, b))| w * a.max(*b)).sum())
        }
        Family::GraphCut => {
            let ek = EvalKernel::new(ctx.kernel(spec.family.view().unwrap())?, ng, q, p, 1.0, spec.nu, 0.0);
            let mut rep = 0.0;
            for i in 0..ng {
                for &j in s {
                    rep += ek.get(i, j);
                }
            }
            let mut within = 0.0;
            for &i in s {
                for &j in s {
                    within += ek.get(i, j);
                }
            }
            Ok(rep - spec.lambda * within)
        }
        Family::FacilityLocation1 => {
            let ek = EvalKernel::new(ctx.kernel(spec.family.view().unwrap())?, ng, q, p, spec.eta, spec.nu, 0.0);
            Ok((0..ng).map(|i| max_over(&ek, i, s)).sum())
        }
        Family::FacilityLocation2 => {
            let ek = EvalKernel::new(ctx.kernel(spec.family.view().unwrap())?, ng, q, p, 1.0, spec.nu, 0.0);
            let aux: f64 = (ng..n).map(|i| max_over(&ek, i, s)).sum();
            let ground: f64 = (0..ng).map(|i| max_over(&ek, i, s)).sum();
            Ok(aux + spec.eta * ground)
        }
        Family::LogDet => {
            let ek = EvalKernel::new(
                ctx.kernel(spec.family.view().unwrap())?,
                ng,
                q,
                p,
                spec.eta,
                spec.nu,
                ctx.jitter(),
            );
            logdet_pd(&ek.submatrix(s, s))
        }
        Family::ConcaveOverModular => {
            let (d1, d2) = spec.com_deltas();
            let (fv, fw) = com_parts(spec, ctx, s)?;
            Ok(d1 * fv + d2 * fw)
        }
        Family::DisparitySum => {
            let m = ctx.kernel(spec.family.view().unwrap())?;
            let mut total = 0.0;
            for (x, &i) in s.iter().enumerate() {
                for &j in &s[x + 1..] {
                    total += 1.0 - m[(i, j)];
                }
            }
            Ok(total)
        }
        Family::DisparityMin => {
            let m = ctx.kernel(spec.family.view().unwrap())?;
            let mut best = f64::INFINITY;
            for (x, &i) in s.iter().enumerate() {
                for &j in &s[x + 1..] {
                    best = best.min(1.0 - m[(i, j)]);
                }
            }
            Ok(if best.is_finite() { best } else { 0.0 })
        }
    }
}

fn max_over(ek: &EvalKernel<'_>, i: usize, s: &[usize]) -> f64 {
    s.iter().map(|&j| ek.get(i, j)).fold(0.0, f64::max)
}

/// The two unweighted halves of the restricted concave-over-modular
/// function: the sum over `V` rows (weighted by `δ1`) and over `V'` rows
/// (weighted by `δ2`).
pub fn com_parts(spec: &FunctionSpec, ctx: &Context, s: &[usize]) -> Result<(f64, f64)> {
    let m = ctx.kernel(Family::ConcaveOverModular.view().unwrap())?;
    let ng = ctx.n_ground();
    let c = com_constant(ctx);
    let psi = spec.psi;
    let row = |i: usize| -> f64 {
        let (mut same, mut other) = (0.0, 0.0);
        for &j in s {
            if (j < ng) == (i < ng) {
                same += m[(i, j)];
            } else {
                other += m[(i, j)];
            }
        }
        psi.apply(other).max(psi.apply(c * same))
    };
    let fv = (0..ng).map(row).sum();
    let fw = (ng..ctx.n_total()).map(row).sum();
    Ok((fv, fw))
}

/// The measure computed purely from set-function evaluations:
/// `f(A)`, `f(A) + f(Q) − f(A ∪ Q)`, `f(A ∪ P) − f(P)`, or
/// `f(A ∪ P) + f(Q ∪ P) − f(A ∪ Q ∪ P) − f(P)`.
pub fn definitional_oracle(
    spec: &FunctionSpec,
    ctx: &Context,
    mode: MeasureMode,
    a: &[usize],
    q: &[usize],
    p: &[usize],
) -> Result<f64> {
    spec.validate()?;
    check_sets(ctx, mode, a, q, p)?;
    let (q, p): (&[usize], &[usize]) = match mode {
        MeasureMode::Base => (&[], &[]),
        MeasureMode::Smi => (q, &[]),
        MeasureMode::Cg => (&[], p),
        MeasureMode::Csmi => (q, p),
    };
    let f = |s: &[usize]| restricted_f(spec, ctx, q, p, s);
    match mode {
        MeasureMode::Base => f(a),
        MeasureMode::Smi => Ok(f(a)? + f(q)? - f(&union(a, q))?),
        MeasureMode::Cg => Ok(f(&union(a, p))? - f(p)?),
        MeasureMode::Csmi => {
            let ap = union(a, p);
            let qp = union(q, p);
            let aqp = union(&ap, q);
            Ok(f(&ap)? + f(&qp)? - f(&aqp)? - f(p)?)
        }
    }
}
