//! Function families, their information measures, and the definitional
//! oracle the closed forms are checked against.
//!
//! All sets are slices of indices into `Ω` (see [`Context`]). `A` must lie in
//! `V`, `Q` in `V'`; `P` may mix both (a previously seen summary lives in `V`).

mod closed;
mod grad;
mod linalg;
mod oracle;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Context, KernelView};

pub use grad::{active_params, param_gradient, ActiveParams, ParamGrad};
pub use linalg::{logdet_pd, logdet_general};
pub use oracle::{com_parts, definitional_oracle, restricted_f};
pub use state::{make_state, GainState};

/// Dominating constant used by the restricted concave-over-modular function.
pub(crate) fn com_constant(ctx: &Context) -> f64 {
    ctx.n_total() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(alias = "SC", alias = "SCMI", alias = "set_cover")]
    SetCover,
    #[serde(alias = "PSC", alias = "PSCMI", alias = "prob_set_cover")]
    ProbSetCover,
    #[serde(alias = "GC", alias = "GCMI", alias = "graph_cut")]
    GraphCut,
    #[serde(alias = "FL1", alias = "FL1MI", alias = "FL", alias = "facility_location")]
    FacilityLocation1,
    #[serde(alias = "FL2", alias = "FL2MI")]
    FacilityLocation2,
    #[serde(alias = "LOGDET", alias = "LogDetMI", alias = "log_det")]
    LogDet,
    #[serde(alias = "COM", alias = "concave_over_modular")]
    ConcaveOverModular,
    #[serde(alias = "ROUGE", alias = "rouge")]
    Rouge,
    #[serde(alias = "DSum", alias = "disparity_sum")]
    DisparitySum,
    #[serde(alias = "DMin", alias = "disparity_min")]
    DisparityMin,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::SetCover,
        Family::ProbSetCover,
        Family::GraphCut,
        Family::FacilityLocation1,
        Family::FacilityLocation2,
        Family::LogDet,
        Family::ConcaveOverModular,
        Family::Rouge,
        Family::DisparitySum,
        Family::DisparityMin,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Family::SetCover => "SC",
            Family::ProbSetCover => "PSC",
            Family::GraphCut => "GC",
            Family::FacilityLocation1 => "FL1",
            Family::FacilityLocation2 => "FL2",
            Family::LogDet => "LogDet",
            Family::ConcaveOverModular => "COM",
            Family::Rouge => "ROUGE",
            Family::DisparitySum => "DSum",
            Family::DisparityMin => "DMin",
        }
    }

    pub fn uses_concepts(self) -> bool {
        matches!(self, Family::SetCover | Family::ProbSetCover | Family::Rouge)
    }

    pub(crate) fn view(self) -> Option<KernelView> {
        match self {
            Family::GraphCut | Family::LogDet | Family::DisparitySum | Family::DisparityMin => Some(KernelView::Raw),
            Family::FacilityLocation1 => Some(KernelView::Shifted),
            Family::FacilityLocation2 | Family::ConcaveOverModular => Some(KernelView::CrossOnly),
            _ => None,
        }
    }

    /// Families whose `V × Q` kernel entries are multiplied by `eta`.
    pub fn eta_scales_kernel(self) -> bool {
        matches!(self, Family::FacilityLocation1 | Family::LogDet)
    }

    /// Families whose `V × P` kernel entries are multiplied by `nu`.
    pub fn nu_scales_kernel(self) -> bool {
        matches!(
            self,
            Family::GraphCut | Family::FacilityLocation1 | Family::FacilityLocation2 | Family::LogDet
        )
    }

    /// DisparityMin is not submodular; greedy on it is a heuristic.
    /// Pairwise disparity sums are supermodular and the min is neither, so
    /// lazy greedy is only exact for the other families.
    pub fn is_submodular(self) -> bool {
        !matches!(self, Family::DisparitySum | Family::DisparityMin)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        let fam = match key.as_str() {
            "sc" | "scmi" | "setcover" => Family::SetCover,
            "psc" | "pscmi" | "probsetcover" => Family::ProbSetCover,
            "gc" | "gcmi" | "graphcut" => Family::GraphCut,
            "fl" | "fl1" | "fl1mi" | "facilitylocation" | "facilitylocation1" => Family::FacilityLocation1,
            "fl2" | "fl2mi" | "facilitylocation2" => Family::FacilityLocation2,
            "logdet" | "logdetmi" => Family::LogDet,
            "com" | "concaveovermodular" => Family::ConcaveOverModular,
            "rouge" => Family::Rouge,
            "dsum" | "disparitysum" => Family::DisparitySum,
            "dmin" | "disparitymin" => Family::DisparityMin,
            _ => return Err(Error::Config(format!("unknown function family '{s}'"))),
        };
        Ok(fam)
    }
}

/// Concave function of the concave-over-modular family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concave {
    #[default]
    Sqrt,
    Log1p,
    Identity,
}

impl Concave {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Concave::Sqrt => x.max(0.0).sqrt(),
            Concave::Log1p => x.ln_1p(),
            Concave::Identity => x,
        }
    }
}

impl FromStr for Concave {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt" => Ok(Concave::Sqrt),
            "log1p" | "log" => Ok(Concave::Log1p),
            "identity" | "id" | "linear" => Ok(Concave::Identity),
            _ => Err(Error::Config(format!("unknown concave function '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    /// `f(A)`
    Base,
    /// `I_f(A; Q)`
    Smi,
    /// `f(A | P)`
    Cg,
    /// `I_f(A; Q | P)`
    Csmi,
}

impl fmt::Display for MeasureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureMode::Base => "base",
            MeasureMode::Smi => "smi",
            MeasureMode::Cg => "cg",
            MeasureMode::Csmi => "csmi",
        })
    }
}

fn one() -> f64 {
    1.0
}

fn unit_pair() -> (f64, f64) {
    (1.0, 1.0)
}

/// One function family with its parameters. Parameters a family does not use
/// are kept but ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub family: Family,
    /// Graph-cut diversity/representativeness trade-off.
    #[serde(default = "one")]
    pub lambda: f64,
    /// Query-relevance trade-off.
    #[serde(default = "one")]
    pub eta: f64,
    /// Multiplier on similarities to the private set.
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default)]
    pub psi: Concave,
    /// `(δ1, δ2)` of the concave-over-modular family; `δ1` is further multiplied by `eta`.
    #[serde(default = "unit_pair")]
    pub com_weights: (f64, f64),
}

impl FunctionSpec {
    pub fn new(family: Family) -> Self {
        FunctionSpec {
            family,
            lambda: 1.0,
            eta: 1.0,
            nu: 1.0,
            psi: Concave::Sqrt,
            com_weights: (1.0, 1.0),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_psi(mut self, psi: Concave) -> Self {
        self.psi = psi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("nu", self.nu),
            ("delta1", self.com_weights.0),
            ("delta2", self.com_weights.1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }

    /// `δ1 = eta · com_weights.0`, `δ2 = com_weights.1`.
    pub fn com_deltas(&self) -> (f64, f64) {
        (self.eta * self.com_weights.0, self.com_weights.1)
    }

    /// Compact form: `family[,key=value...]`, e.g. `fl2,eta=0.2` or `com,psi=log1p,d2=0.5`.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim).filter(|p| !p.is_empty());
        let family: Family = parts
            .next()
            .ok_or_else(|| Error::Config("empty function spec".into()))?
            .parse()?;
        let mut spec = FunctionSpec::new(family);
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))?;
            let num = || {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number '{v}' for '{k}'")))
            };
            match k.trim().to_ascii_lowercase().as_str() {
                "lambda" | "l" => spec.lambda = num()?,
                "eta" | "e" => spec.eta = num()?,
                "nu" | "n" => spec.nu = num()?,
                "psi" => spec.psi = v.parse()?,
                "d1" | "delta1" => spec.com_weights.0 = num()?,
                "d2" | "delta2" => spec.com_weights.1 = num()?,
                other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    /// Accepts a JSON object or the compact form.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('{') {
            let spec: FunctionSpec = serde_json::from_str(t).map_err(|e| Error::Config(e.to_string()))?;
            spec.validate()?;
            Ok(spec)
        } else {
            FunctionSpec::parse_compact(t)
        }
    }
}

pub(crate) fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

/// Range, membership and disjointness checks shared by every measure.
pub(crate) fn check_sets(ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<()> {
    let n = ctx.n_total();
    let ng = ctx.n_ground();
    let mut seen = vec![0u8; n];
    let mut mark = |set: &[usize], tag: u8, name: &str| -> Result<()> {
        for &i in set {
            if i >= n {
                return Err(Error::Config(format!("{name} index {i} outside Ω of size {n}")));
            }
            if seen[i] != 0 {
                return Err(Error::Config(format!("item {i} appears twice across or within the sets")));
            }
            seen[i] = tag;
        }
        Ok(())
    };
    mark(a, 1, "A")?;
    if let Some(&i) = a.iter().find(|&&i| i >= ng) {
        return Err(Error::Config(format!("A must lie in the ground set; item {i} does not")));
    }
    if matches!(mode, MeasureMode::Smi | MeasureMode::Csmi) {
        mark(q, 2, "Q")?;
        if let Some(&i) = q.iter().find(|&&i| i < ng) {
            return Err(Error::Config(format!("Q must lie in the auxiliary set; item {i} does not")));
        }
    }
    if matches!(mode, MeasureMode::Cg | MeasureMode::Csmi) {
        mark(p, 3, "P")?;
    }
    Ok(())
}

/// `f(S)` for `S ⊆ Ω` without any query or private scaling. `f(∅) = 0`.
pub fn eval_base(spec: &FunctionSpec, ctx: &Context, s: &[usize]) -> Result<f64> {
    spec.validate()?;
    restricted_f(spec, ctx, &[], &[], s)
}

/// Closed-form evaluation of the measure selected by `mode`. Arguments the
/// mode does not use are ignored.
pub fn measure(spec: &FunctionSpec, ctx: &Context, mode: MeasureMode, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    spec.validate()?;
    check_sets(ctx, mode, a, q, p)?;
    let (q, p): (&[usize], &[usize]) = match mode {
        MeasureMode::Base => (&[], &[]),
        MeasureMode::Smi => (q, &[]),
        MeasureMode::Cg => (&[], p),
        MeasureMode::Csmi => (q, p),
    };
    closed::evaluate(spec, ctx, mode, a, q, p)
}

pub fn smi(spec: &FunctionSpec, ctx: &Context, a: &[usize], q: &[usize]) -> Result<f64> {
    measure(spec, ctx, MeasureMode::Smi, a, q, &[])
}

pub fn cg(spec: &FunctionSpec, ctx: &Context, a: &[usize], p: &[usize]) -> Result<f64> {
    measure(spec, ctx, MeasureMode::Cg, a, &[], p)
}

pub fn csmi(spec: &FunctionSpec, ctx: &Context, a: &[usize], q: &[usize], p: &[usize]) -> Result<f64> {
    measure(spec, ctx, MeasureMode::Csmi, a, q, p)
}

#[cfg(test)]
mod tests;
