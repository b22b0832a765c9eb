//! Self-checks: closed forms against the definitional oracle, incremental
//! gains against recomputation, analytic gradients against central
//! differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::instances::{random_instance, RandomInstance, Shape};
use crate::error::Result;
use crate::functions::{
    active_params, definitional_oracle, make_state, measure, param_gradient, Family, FunctionSpec, MeasureMode,
    ParamGrad,
};
use crate::instance::Context;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Cases left out (kinks, unsupported combinations).
    pub skipped: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: String, tolerance: f64) -> Self {
        CheckOutcome {
            name,
            cases: 0,
            failures: 0,
            skipped: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        if !(err <= self.tolerance) {
            self.failures += 1;
        }
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `|x − y| / max(|x|, |y|, 1)`.
pub fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

/// Below this the difference is central-difference roundoff (`~ ε·|f| / h`).
pub const FD_NOISE: f64 = 1e-8;

/// `|analytic − numeric| / (|analytic| + 1e-12)`, or 0 when the two agree to
/// within [`FD_NOISE`] (a flat direction has no meaningful relative error).
pub fn grad_error(analytic: f64, numeric: f64) -> f64 {
    let d = (analytic - numeric).abs();
    if d <= FD_NOISE {
        0.0
    } else {
        d / (analytic.abs() + 1e-12)
    }
}

pub const MODES: [MeasureMode; 4] = [MeasureMode::Base, MeasureMode::Smi, MeasureMode::Cg, MeasureMode::Csmi];

/// Families whose closed forms are exercised, paired with the modes they support.
pub fn supported_modes(family: Family) -> Vec<MeasureMode> {
    MODES
        .into_iter()
        .filter(|&m| !(family == Family::GraphCut && m == MeasureMode::Csmi))
        .collect()
}

fn sampler(seed: u64, family: Family) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (family as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Closed form vs definitional oracle, `cases` instances per family, every mode.
pub fn closed_form_suite(seed: u64, cases: usize, families: &[Family]) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for &family in families {
        let mut rng = sampler(seed, family);
        let modes = supported_modes(family);
        let mut res: Vec<CheckOutcome> = modes
            .iter()
            .map(|m| CheckOutcome::new(format!("closed-form {family} {m}"), 1e-8))
            .collect();
        for _ in 0..cases {
            let inst = random_instance(&mut rng, family, Shape::default())?;
            for (mode, r) in modes.iter().zip(res.iter_mut()) {
                let c = measure(&inst.spec, &inst.ctx, *mode, &inst.a, &inst.q, &inst.p)?;
                let o = definitional_oracle(&inst.spec, &inst.ctx, *mode, &inst.a, &inst.q, &inst.p)?;
                r.record(rel_diff(c, o));
            }
        }
        out.extend(res);
    }
    Ok(out)
}

/// Incremental gains vs recomputed differences along a random order.
pub fn state_suite(seed: u64, cases: usize, families: &[Family]) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for &family in families {
        let mut rng = sampler(seed.wrapping_add(1), family);
        let mut r = CheckOutcome::new(format!("marginal-gain {family}"), 1e-8);
        for _ in 0..cases {
            let inst = random_instance(&mut rng, family, Shape::default())?;
            for mode in supported_modes(family) {
                let mut st = make_state(&inst.spec, &inst.ctx, mode, &inst.q, &inst.p)?;
                let mut a = Vec::new();
                let mut before = measure(&inst.spec, &inst.ctx, mode, &a, &inst.q, &inst.p)?;
                for j in inst.free() {
                    a.push(j);
                    let after = measure(&inst.spec, &inst.ctx, mode, &a, &inst.q, &inst.p)?;
                    r.record(rel_diff(st.gain(j)?, after - before));
                    st.commit(j)?;
                    before = after;
                }
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Central differences of a measure in `λ`, `η`, `ν`.
pub fn numeric_gradient(
    spec: &FunctionSpec,
    ctx: &Context,
    mode: MeasureMode,
    a: &[usize],
    q: &[usize],
    p: &[usize],
    h: f64,
) -> Result<ParamGrad> {
    let f = |s: &FunctionSpec| measure(s, ctx, mode, a, q, p);
    let diff = |set: &dyn Fn(&mut FunctionSpec, f64)| -> Result<f64> {
        let mut up = spec.clone();
        let mut down = spec.clone();
        set(&mut up, h);
        set(&mut down, -h);
        Ok((f(&up)? - f(&down)?) / (2.0 * h))
    };
    Ok(ParamGrad {
        lambda: diff(&|s, d| s.lambda += d)?,
        eta: diff(&|s, d| s.eta += d)?,
        nu: diff(&|s, d| s.nu += d)?,
        kink: false,
    })
}

/// Moves every parameter away from zero so both difference points are valid.
fn lift(inst: &mut RandomInstance) {
    let floor = 100.0 * FD_STEP;
    inst.spec.lambda = inst.spec.lambda.max(floor);
    inst.spec.eta = inst.spec.eta.max(floor);
    inst.spec.nu = inst.spec.nu.max(floor);
}

/// Analytic vs finite-difference parameter gradients until `smooth` non-kink
/// samples per family have been checked (at most `10 × smooth` draws).
pub fn gradient_suite(seed: u64, smooth: usize, families: &[Family]) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for &family in families {
        let mut rng = sampler(seed.wrapping_add(2), family);
        let mut r = CheckOutcome::new(format!("gradient {family}"), 1e-4);
        let modes = supported_modes(family);
        let mut draws = 0;
        while r.cases < smooth && draws < 10 * smooth {
            draws += 1;
            let mut inst = random_instance(&mut rng, family, Shape::default())?;
            lift(&mut inst);
            let mode = modes[draws % modes.len()];
            let g = param_gradient(&inst.spec, &inst.ctx, mode, &inst.a, &inst.q, &inst.p)?;
            if g.kink {
                r.skipped += 1;
                continue;
            }
            let n = numeric_gradient(&inst.spec, &inst.ctx, mode, &inst.a, &inst.q, &inst.p, FD_STEP)?;
            let act = active_params(family, mode);
            let mut err: f64 = 0.0;
            for (on, x, y) in [(act.lambda, g.lambda, n.lambda), (act.eta, g.eta, n.eta), (act.nu, g.nu, n.nu)] {
                // inactive entries must be flat on both sides
                let e = if on { grad_error(x, y) } else { grad_error(0.0, x.abs() + y.abs()) };
                err = err.max(e);
            }
            r.record(err);
        }
        out.push(r);
    }
    Ok(out)
}
