//! Derivatives of a measure with respect to the internal parameters
//! `λ`, `η`, `ν`.

use serde::{Deserialize, Serialize};

use super::linalg::inverse_pd;
use super::oracle::com_parts;
use super::{check_sets, union, Family, FunctionSpec, MeasureMode};
use crate::error::{Error, Result};
use crate::instance::{Context, EvalKernel, Role};

/// Ties closer than this between branches with different slopes are reported as kinks.
pub const KINK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamGrad {
    pub lambda: f64,
    pub eta: f64,
    pub nu: f64,
    /// Set when the point sits on (or within [`KINK_TOL`] of) a nondifferentiable kink.
    pub kink: bool,
}

/// Which internal parameters a family actually uses under a mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveParams {
    pub lambda: bool,
    pub eta: bool,
    pub nu: bool,
}

pub fn active_params(family: Family, mode: MeasureMode) -> ActiveParams {
    use MeasureMode::*;
    let q = matches!(mode, Smi | Csmi);
    let p = matches!(mode, Cg | Csmi);
    match family {
        Family::GraphCut => ActiveParams {
            lambda: mode != Csmi,
            eta: false,
            nu: mode == Cg,
        },
        Family::FacilityLocation1 | Family::LogDet => ActiveParams {
            lambda: false,
            eta: q,
            nu: p,
        },
        Family::FacilityLocation2 => ActiveParams {
            lambda: false,
            eta: true,
            nu: p,
        },
        Family::ConcaveOverModular => ActiveParams {
            lambda: false,
            eta: true,
            nu: false,
        },
        _ => ActiveParams::default(),
    }
}

/// Partial derivatives of `measure(spec, ctx, mode, a, q, p)`.
pub fn param_gradient(
    spec: &FunctionSpec,
    ctx: &Context,
    mode: MeasureMode,
    a: &[usize],
    q: &[usize],
    p: &[usize],
) -> Result<ParamGrad> {
    spec.validate()?;
    check_sets(ctx, mode, a, q, p)?;
    let (q, p): (&[usize], &[usize]) = match mode {
        MeasureMode::Base => (&[], &[]),
        MeasureMode::Smi => (q, &[]),
        MeasureMode::Cg => (&[], p),
        MeasureMode::Csmi => (q, p),
    };
    match spec.family {
        Family::GraphCut => graph_cut(spec, ctx, mode, a, q, p),
        Family::FacilityLocation1 | Family::FacilityLocation2 => facility_location(spec, ctx, mode, a, q, p),
        Family::LogDet => log_det(spec, ctx, mode, a, q, p),
        Family::ConcaveOverModular => com(spec, ctx, mode, a, q, p),
        _ => Ok(ParamGrad::default()),
    }
}

fn graph_cut(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<ParamGrad> {
    let m = ctx.kernel(Family::GraphCut.view().unwrap())?;
    let ng = ctx.n_ground();
    let within: f64 = a.iter().map(|&i| a.iter().map(|&j| m[(i, j)]).sum::<f64>()).sum();
    let mut g = ParamGrad::default();
    match mode {
        MeasureMode::Base => g.lambda = -within,
        MeasureMode::Smi => {
            g.lambda = 2.0 * a.iter().map(|&i| q.iter().map(|&j| m[(i, j)]).sum::<f64>()).sum::<f64>();
        }
        MeasureMode::Cg => {
            let (mut inside, mut outside) = (0.0, 0.0);
            for &i in a {
                for &j in p {
                    if j >= ng {
                        outside += m[(i, j)];
                    } else {
                        inside += m[(i, j)];
                    }
                }
            }
            g.lambda = -within - 2.0 * (inside + spec.nu * outside);
            g.nu = -2.0 * spec.lambda * outside;
        }
        MeasureMode::Csmi => {
            return Err(Error::Unsupported(
                "conditional mutual information is not meaningful for graph cut".into(),
            ))
        }
    }
    Ok(g)
}

/// Value with derivatives in `(η, ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: f64,
    d: [f64; 2],
}

impl Dual {
    const ZERO: Dual = Dual { v: 0.0, d: [0.0, 0.0] };

    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1]],
        }
    }

    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
            ],
        }
    }

    fn slopes_differ(self, o: Dual) -> bool {
        (self.d[0] - o.d[0]).abs() > 1e-12 || (self.d[1] - o.d[1]).abs() > 1e-12
    }

    fn pick(self, o: Dual, take_larger: bool, kink: &mut bool) -> Dual {
        if (self.v - o.v).abs() < KINK_TOL && self.slopes_differ(o) {
            *kink = true;
        }
        if (self.v >= o.v) == take_larger {
            self
        } else {
            o
        }
    }

    fn max(self, o: Dual, kink: &mut bool) -> Dual {
        self.pick(o, true, kink)
    }

    fn min(self, o: Dual, kink: &mut bool) -> Dual {
        self.pick(o, false, kink)
    }
}

fn facility_location(
    spec: &FunctionSpec,
    ctx: &Context,
    mode: MeasureMode,
    a: &[usize],
    q: &[usize],
    p: &[usize],
) -> Result<ParamGrad> {
    let ng = ctx.n_ground();
    let fl1 = spec.family == Family::FacilityLocation1;
    let eta = if fl1 { spec.eta } else { 1.0 };
    let ek = EvalKernel::new(ctx.kernel(spec.family.view().unwrap())?, ng, q, p, eta, spec.nu, 0.0);
    let entry = |i: usize, j: usize| -> Dual {
        let s = ek.base(i, j);
        let (f, role) = ek.factor(i, j);
        let d = match role {
            Role::Query if fl1 => [s, 0.0],
            Role::Private => [0.0, s],
            _ => [0.0, 0.0],
        };
        Dual { v: f * s, d }
    };
    let mut kink = false;
    let max_over = |i: usize, set: &[usize], kink: &mut bool| -> Dual {
        let mut it = set.iter();
        match it.next() {
            None => Dual::ZERO,
            Some(&j0) => it.fold(entry(i, j0), |best, &j| best.max(entry(i, j), kink)),
        }
    };
    let rows = if fl1 { ng } else { ctx.n_total() };
    let mut total = Dual::ZERO;
    for i in 0..rows {
        let m = max_over(i, a, &mut kink);
        let qm = max_over(i, q, &mut kink);
        let pm = max_over(i, p, &mut kink);
        let term = match mode {
            MeasureMode::Base => m,
            MeasureMode::Smi => m.min(qm, &mut kink),
            MeasureMode::Cg => m.sub(pm).max(Dual::ZERO, &mut kink),
            MeasureMode::Csmi => m.min(qm, &mut kink).sub(pm).max(Dual::ZERO, &mut kink),
        };
        let u = if !fl1 && i < ng {
            Dual {
                v: spec.eta,
                d: [1.0, 0.0],
            }
        } else {
            Dual { v: 1.0, d: [0.0, 0.0] }
        };
        let t = u.mul(term);
        total = Dual {
            v: total.v + t.v,
            d: [total.d[0] + t.d[0], total.d[1] + t.d[1]],
        };
    }
    Ok(ParamGrad {
        lambda: 0.0,
        eta: total.d[0],
        nu: total.d[1],
        kink,
    })
}

/// Signed `log det` terms whose sum is the measure.
fn logdet_terms(mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Vec<(f64, Vec<usize>)> {
    match mode {
        MeasureMode::Base => vec![(1.0, a.to_vec())],
        MeasureMode::Smi => vec![(1.0, a.to_vec()), (1.0, q.to_vec()), (-1.0, union(a, q))],
        MeasureMode::Cg => vec![(1.0, union(a, p)), (-1.0, p.to_vec())],
        MeasureMode::Csmi => {
            let ap = union(a, p);
            vec![
                (1.0, ap.clone()),
                (1.0, union(q, p)),
                (-1.0, union(&ap, q)),
                (-1.0, p.to_vec()),
            ]
        }
    }
}

/// `∂ log det L_S / ∂θ = Tr(L_S⁻¹ ∂L_S/∂θ)`, summed over the signed terms.
fn log_det(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<ParamGrad> {
    let ek = EvalKernel::new(
        ctx.kernel(Family::LogDet.view().unwrap())?,
        ctx.n_ground(),
        q,
        p,
        spec.eta,
        spec.nu,
        ctx.jitter(),
    );
    let mut g = ParamGrad::default();
    for (sign, s) in logdet_terms(mode, a, q, p) {
        if s.is_empty() {
            continue;
        }
        let inv = inverse_pd(&ek.submatrix(&s, &s))?;
        for (x, &i) in s.iter().enumerate() {
            for (y, &j) in s.iter().enumerate() {
                let (_, role) = ek.factor(i, j);
                let t = sign * inv[(y, x)] * ek.base(i, j);
                match role {
                    Role::Query => g.eta += t,
                    Role::Private => g.nu += t,
                    Role::Other => {}
                }
            }
        }
    }
    Ok(g)
}

/// The measure is linear in `δ1 = η · com_weights.0`.
fn com(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<ParamGrad> {
    let fv = |s: &[usize]| -> Result<f64> {
        if s.is_empty() {
            Ok(0.0)
        } else {
            Ok(com_parts(spec, ctx, s)?.0)
        }
    };
    let d = match mode {
        MeasureMode::Base => fv(a)?,
        MeasureMode::Smi => fv(a)? + fv(q)? - fv(&union(a, q))?,
        MeasureMode::Cg => fv(&union(a, p))? - fv(p)?,
        MeasureMode::Csmi => {
            let ap = union(a, p);
            fv(&ap)? + fv(&union(q, p))? - fv(&union(&ap, q))? - fv(p)?
        }
    };
    Ok(ParamGrad {
        eta: spec.com_weights.0 * d,
        ..ParamGrad::default()
    })
}
