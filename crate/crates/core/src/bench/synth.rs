//! Seeded 2-D point clouds (four clusters and a few outliers) with query and
//! private points, plus the summary statistics used to read off behavior.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{AuxRole, AuxiliarySet, GroundSet, ItemRecord};
use crate::error::{Error, Result};
use crate::functions::FunctionSpec;
use crate::instance::Context;
use crate::kernel::{build_kernel, Metric, DEFAULT_JITTER};
use crate::optimizer::{master_solve, Flavor, FlavorSets, GreedyOptions, Selection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: [f64; 2],
    /// Isotropic standard deviation; samples are truncated at 3σ.
    pub sigma: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub clusters: Vec<Cluster>,
    pub outliers: Vec<[f64; 2]>,
    pub queries: Vec<[f64; 2]>,
    pub privates: Vec<[f64; 2]>,
    /// Bandwidth of the rbf kernel.
    pub kernel_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// Four tight clusters, two outliers, one query on a cluster center and
    /// one next to an outlier, one private point on another cluster center.
    fn default() -> Self {
        let cluster = |x: f64, y: f64| Cluster {
            center: [x, y],
            sigma: 0.5,
            points: 25,
        };
        SyntheticConfig {
            clusters: vec![cluster(0.0, 0.0), cluster(8.0, 0.0), cluster(0.0, 8.0), cluster(8.0, 8.0)],
            outliers: vec![[4.0, 4.5], [12.1, 3.0]],
            queries: vec![[8.0, 8.0], [13.0, 3.0]],
            privates: vec![[0.0, 8.0]],
            kernel_sigma: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub config: SyntheticConfig,
    pub ground: GroundSet,
    pub queries: AuxiliarySet,
    pub privates: AuxiliarySet,
    /// Cluster of each ground point; `None` for outliers.
    pub labels: Vec<Option<usize>>,
}

fn point(id: String, p: [f64; 2]) -> ItemRecord {
    ItemRecord::with_features(id, p.to_vec())
}

pub fn synth_generate(cfg: &SyntheticConfig) -> Result<SyntheticInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut items = Vec::new();
    let mut labels = Vec::new();
    for (c, cl) in cfg.clusters.iter().enumerate() {
        let normal = Normal::new(0.0, cl.sigma).map_err(|e| Error::Config(format!("cluster {c}: {e}")))?;
        for _ in 0..cl.points {
            let (dx, dy) = loop {
                let (dx, dy) = (normal.sample(&mut rng), normal.sample(&mut rng));
                if dx.hypot(dy) <= 3.0 * cl.sigma {
                    break (dx, dy);
                }
            };
            items.push(point(format!("p{}", items.len()), [cl.center[0] + dx, cl.center[1] + dy]));
            labels.push(Some(c));
        }
    }
    for &o in &cfg.outliers {
        items.push(point(format!("p{}", items.len()), o));
        labels.push(None);
    }
    let aux = |pts: &[[f64; 2]], tag: &str, role| {
        AuxiliarySet::new(
            pts.iter().enumerate().map(|(i, &p)| point(format!("{tag}{i}"), p)).collect(),
            role,
        )
    };
    Ok(SyntheticInstance {
        config: cfg.clone(),
        ground: GroundSet::new(items)?,
        queries: aux(&cfg.queries, "q", AuxRole::Query)?,
        privates: aux(&cfg.privates, "r", AuxRole::Private)?,
        labels,
    })
}

fn xy(it: &ItemRecord) -> [f64; 2] {
    let f = it.features.as_deref().unwrap_or(&[0.0, 0.0]);
    [f[0], f[1]]
}

impl SyntheticInstance {
    pub fn n(&self) -> usize {
        self.ground.len()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.ground.items().iter().map(xy).collect()
    }

    pub fn query_points(&self) -> Vec<[f64; 2]> {
        self.queries.items().iter().map(xy).collect()
    }

    pub fn private_points(&self) -> Vec<[f64; 2]> {
        self.privates.items().iter().map(xy).collect()
    }

    /// Ground items, then queries, then private points, under an rbf kernel.
    pub fn context(&self) -> Result<Context> {
        let k = build_kernel(
            &self.ground,
            &[&self.queries, &self.privates],
            Metric::Rbf {
                sigma: self.config.kernel_sigma,
            },
            DEFAULT_JITTER,
        )?;
        Ok(Context::from_kernel(&k))
    }

    pub fn query_indices(&self) -> Vec<usize> {
        (self.n()..self.n() + self.queries.len()).collect()
    }

    pub fn private_indices(&self) -> Vec<usize> {
        let s = self.n() + self.queries.len();
        (s..s + self.privates.len()).collect()
    }
}

/// Default neighborhood radius, in synthetic coordinate units.
pub const DEFAULT_RADIUS: f64 = 1.0;
/// Saturation threshold relative to the first gain.
pub const DEFAULT_SATURATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    /// Selected items within the radius of each query.
    pub query_match_count: Vec<usize>,
    /// Selected items within the radius of any query.
    pub query_matching: usize,
    /// Smallest per-query match count; `None` without queries.
    pub fairness: Option<usize>,
    /// 1-based step of the first gain below the saturation threshold.
    pub saturation_step: Option<usize>,
    /// Selected items within the radius of any private point; `None` without private points.
    pub privacy_violations: Option<usize>,
}

fn near(a: [f64; 2], b: [f64; 2], r: f64) -> bool {
    (a[0] - b[0]).hypot(a[1] - b[1]) <= r
}

/// Counts for one selection. `eps_sat` defaults to `1e-3 ×` the first gain.
pub fn behavior_metrics(
    selected: &[usize],
    points: &[[f64; 2]],
    queries: &[[f64; 2]],
    privates: &[[f64; 2]],
    radius: f64,
    eps_sat: Option<f64>,
    gains: &[f64],
) -> BehaviorReport {
    let query_match_count: Vec<usize> = queries
        .iter()
        .map(|&q| selected.iter().filter(|&&i| near(points[i], q, radius)).count())
        .collect();
    let query_matching = selected
        .iter()
        .filter(|&&i| queries.iter().any(|&q| near(points[i], q, radius)))
        .count();
    let privacy_violations = (!privates.is_empty()).then(|| {
        selected
            .iter()
            .filter(|&&i| privates.iter().any(|&p| near(points[i], p, radius)))
            .count()
    });
    let eps = eps_sat.unwrap_or_else(|| DEFAULT_SATURATION * gains.first().copied().unwrap_or(0.0).abs());
    let saturation_step = gains.iter().position(|&g| g < eps).map(|t| t + 1);
    BehaviorReport {
        fairness: query_match_count.iter().copied().min(),
        query_match_count,
        query_matching,
        saturation_step,
        privacy_violations,
    }
}

/// The four synthetic studies, each a summarization flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Generic,
    Query,
    Privacy,
    Joint,
}

impl Study {
    pub fn flavor(self) -> Flavor {
        match self {
            Study::Generic => Flavor::Generic,
            Study::Query => Flavor::Query,
            Study::Privacy => Flavor::Privacy,
            Study::Joint => Flavor::QueryPrivacy,
        }
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "generic" => Ok(Study::Generic),
            "query" => Ok(Study::Query),
            "privacy" => Ok(Study::Privacy),
            "joint" | "query_privacy" => Ok(Study::Joint),
            _ => Err(Error::Config(format!("unknown study '{s}'"))),
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::Generic => "generic",
            Study::Query => "query",
            Study::Privacy => "privacy",
            Study::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Lambda,
    Eta,
    Nu,
}

impl Param {
    pub fn set(self, spec: &mut FunctionSpec, v: f64) {
        match self {
            Param::Lambda => spec.lambda = v,
            Param::Eta => spec.eta = v,
            Param::Nu => spec.nu = v,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Lambda => "lambda",
            Param::Eta => "eta",
            Param::Nu => "nu",
        })
    }
}

/// `eta=0,0.2,1` into the parameter and its values.
pub fn parse_sweep(s: &str) -> Result<(Param, Vec<f64>)> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep '{s}' is not PARAM=v1,v2,...")))?;
    let param = match name.trim().to_ascii_lowercase().as_str() {
        "lambda" | "l" => Param::Lambda,
        "eta" | "e" => Param::Eta,
        "nu" | "n" => Param::Nu,
        other => return Err(Error::Config(format!("cannot sweep '{other}'"))),
    };
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| Error::Config(format!("bad sweep value '{v}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    Ok((param, values))
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRun {
    pub label: String,
    pub spec: FunctionSpec,
    pub selection: Selection,
    pub report: BehaviorReport,
}

/// One greedy summary of the synthetic instance under a study.
pub fn run_study(inst: &SyntheticInstance, ctx: &Context, study: Study, spec: &FunctionSpec, k: usize) -> Result<StudyRun> {
    let sets = FlavorSets {
        query: Some(inst.query_indices()),
        private: Some(inst.private_indices()),
        previous: None,
    };
    let selection = master_solve(study.flavor(), spec, ctx, &sets, k, GreedyOptions::default())?;
    let report = behavior_metrics(
        &selection.indices,
        &inst.points(),
        &inst.query_points(),
        &inst.private_points(),
        DEFAULT_RADIUS,
        None,
        &selection.gains,
    );
    Ok(StudyRun {
        label: spec.family.to_string(),
        spec: spec.clone(),
        selection,
        report,
    })
}

/// Runs the study once per value of `param`, sharing one kernel.
pub fn sweep(
    inst: &SyntheticInstance,
    study: Study,
    base: &FunctionSpec,
    param: Param,
    values: &[f64],
    k: usize,
) -> Result<Vec<StudyRun>> {
    let ctx = inst.context()?;
    values
        .iter()
        .map(|&v| {
            let mut spec = base.clone();
            param.set(&mut spec, v);
            let mut run = run_study(inst, &ctx, study, &spec, k)?;
            run.label = format!("{}:{param}={v}", spec.family);
            Ok(run)
        })
        .collect()
}

/// Plot data: `run,x,y,role,pick_order` with role in {data, query, private, selected}.
pub fn write_scatter_csv<W: Write>(out: W, inst: &SyntheticInstance, runs: &[StudyRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "x", "y", "role", "pick_order"])?;
    let pts = inst.points();
    for run in runs {
        let mut order = vec![None; pts.len()];
        for (t, &i) in run.selection.indices.iter().enumerate() {
            order[i] = Some(t + 1);
        }
        for (i, p) in pts.iter().enumerate() {
            let (role, pick) = match order[i] {
                Some(t) => ("selected", t.to_string()),
                None => ("data", String::new()),
            };
            w.write_record([run.label.as_str(), &p[0].to_string(), &p[1].to_string(), role, &pick])?;
        }
        for (role, set) in [("query", inst.query_points()), ("private", inst.private_points())] {
            for p in set {
                w.write_record([run.label.as_str(), &p[0].to_string(), &p[1].to_string(), role, ""])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One row per run: counts from the behavior report.
pub fn write_report_csv<W: Write>(out: W, runs: &[StudyRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run",
        "value",
        "query_matching",
        "query_match_count",
        "fairness",
        "saturation_step",
        "privacy_violations",
    ])?;
    let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in runs {
        let counts: Vec<String> = r.report.query_match_count.iter().map(|c| c.to_string()).collect();
        w.write_record([
            r.label.clone(),
            r.selection.value.to_string(),
            r.report.query_matching.to_string(),
            counts.join(";"),
            opt(r.report.fairness),
            opt(r.report.saturation_step),
            opt(r.report.privacy_violations),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_sized() {
        let cfg = SyntheticConfig::default();
        let a = synth_generate(&cfg).unwrap();
        let b = synth_generate(&cfg).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.n(), 102);
        let other = synth_generate(&SyntheticConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.points(), other.points());
    }

    #[test]
    fn without_outliers_every_point_is_near_a_center() {
        let cfg = SyntheticConfig {
            outliers: vec![],
            ..SyntheticConfig::default()
        };
        let inst = synth_generate(&cfg).unwrap();
        for p in inst.points() {
            assert!(cfg.clusters.iter().any(|c| near(p, c.center, 3.0 * c.sigma + 1e-12)));
        }
    }

    #[test]
    fn metrics_by_hand() {
        let pts = [[0.0, 0.0], [0.5, 0.0], [5.0, 5.0], [9.0, 9.0]];
        let r = behavior_metrics(&[0, 2, 3], &pts, &[[0.0, 0.3], [9.0, 9.5]], &[[5.0, 5.2]], 1.0, None, &[1.0, 0.5, 0.0]);
        assert_eq!(r.query_match_count, vec![1, 1]);
        assert_eq!(r.fairness, Some(1));
        assert_eq!(r.query_matching, 2);
        assert_eq!(r.privacy_violations, Some(1));
        assert_eq!(r.saturation_step, Some(3));
        let r = behavior_metrics(&[0], &pts, &[], &[], 1.0, Some(0.1), &[1.0]);
        assert_eq!((r.fairness, r.privacy_violations, r.saturation_step), (None, None, None));
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("nu=0,1,10").unwrap(), (Param::Nu, vec![0.0, 1.0, 10.0]));
        assert!(parse_sweep("nu").is_err());
        assert!(parse_sweep("mu=1").is_err());
        assert!(parse_sweep("eta=-1").is_err());
    }
}
