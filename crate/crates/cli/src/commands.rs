use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use subinfo::bench::oracle::{closed_form_suite, gradient_suite, state_suite, CheckOutcome};
use subinfo::bench::synth::{parse_sweep, run_study, sweep, write_report_csv, write_scatter_csv, Study};
use subinfo::bench::tasks::{default_components, learning_task, LearningTaskConfig};
use subinfo::bench::{synth_generate, vrouge, SyntheticConfig};
use subinfo::data::{embed_query, ReferenceSummary};
use subinfo::kernel::DEFAULT_JITTER;
use subinfo::learning::{leave_one_out, train, write_trace_csv, MarginLoss, MixtureModel, TrainConfig, TrainingExample};
use subinfo::optimizer::{master_solve, FlavorSets};
use subinfo::{
    AuxRole, AuxiliarySet, Collection, Context, Error, Family, Flavor, FunctionSpec, GreedyOptions, ItemRecord,
    MeasureMode, Metric, Result, Selection,
};

use crate::{io_error, sibling, write_file, write_manifest, Outcome};

fn default_manifest(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => sibling(p, "manifest.json"),
        None => PathBuf::from(format!("subinfo-{command}.manifest.json")),
    }
}

#[derive(Args, Serialize)]
pub struct SummarizeArgs {
    /// Collection JSON file.
    #[arg(long)]
    pub collection: PathBuf,
    #[arg(long, default_value = "generic")]
    pub flavor: Flavor,
    #[arg(long)]
    pub budget: usize,
    /// One query: an auxiliary item id or a comma-separated concept list. Repeatable.
    #[arg(long)]
    pub query: Vec<String>,
    /// One private item, given like a query. Repeatable.
    #[arg(long)]
    pub private: Vec<String>,
    /// Previous summary as comma-separated ground ids.
    #[arg(long, value_delimiter = ',')]
    pub prev: Option<Vec<String>>,
    /// Function spec, compact (`fl2,eta=0.5`) or JSON.
    #[arg(long = "fn", default_value = "fl1")]
    pub function: FunctionSpec,
    #[arg(long, default_value = "cosine")]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    pub jitter: f64,
    /// Write the selection here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Appends ad-hoc auxiliary items and returns the `Ω` indices of the request.
fn resolve_aux(coll: &mut Collection, role: AuxRole, specs: &[String]) -> Result<Vec<usize>> {
    let ng = coll.ground.len();
    let mut set = match role {
        AuxRole::Query => coll.queries.items().to_vec(),
        _ => coll.privates.items().to_vec(),
    };
    let mut picked = Vec::new();
    for (n, s) in specs.iter().enumerate() {
        if let Some(i) = set.iter().position(|it| it.id == *s) {
            picked.push(i);
            continue;
        }
        let concepts: Vec<&str> = s.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
        if let Some(c) = concepts.iter().find(|c| coll.universe.index_of(c).is_none()) {
            return Err(Error::Lookup(format!("'{c}' is neither an auxiliary item nor a concept")));
        }
        let prefix = if role == AuxRole::Query { "query" } else { "private" };
        let mut item = ItemRecord::with_concepts(format!("{prefix}:{n}:{s}"), concepts.iter().map(|c| (*c, 1)));
        if coll.ground.dim() > 0 {
            if coll.ground.dim() != coll.universe.len() {
                return Err(Error::Config(format!(
                    "concept queries need concept-space features, but items have dimension {} for {} concepts",
                    coll.ground.dim(),
                    coll.universe.len()
                )));
            }
            item.features = Some(embed_query(&concepts, &coll.universe)?);
        }
        set.push(item);
        picked.push(set.len() - 1);
    }
    let offset = if role == AuxRole::Query {
        coll.queries = AuxiliarySet::new(set, AuxRole::Query)?;
        ng
    } else {
        coll.privates = AuxiliarySet::new(set, AuxRole::Private)?;
        ng + coll.queries.len()
    };
    Ok(picked.into_iter().map(|i| offset + i).collect())
}

pub fn summarize(a: &SummarizeArgs) -> Result<Outcome> {
    let mut coll = Collection::load(&a.collection)?;
    if a.flavor.needs_query() && a.query.is_empty() {
        return Err(Error::Config(format!("flavor {} needs --query", a.flavor)));
    }
    if a.flavor.needs_private() && a.private.is_empty() {
        return Err(Error::Config(format!("flavor {} needs --private", a.flavor)));
    }
    if a.flavor.needs_previous() && a.prev.is_none() {
        return Err(Error::Config(format!("flavor {} needs --prev", a.flavor)));
    }
    // queries first: private indices shift by the number of queries
    let q = resolve_aux(&mut coll, AuxRole::Query, &a.query)?;
    let p = resolve_aux(&mut coll, AuxRole::Private, &a.private)?;
    let previous = a
        .prev
        .as_ref()
        .map(|ids| {
            ids.iter()
                .map(|id| {
                    coll.ground
                        .position(id)
                        .ok_or_else(|| Error::Lookup(format!("previous-summary item '{id}' is not in the collection")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let ctx = Context::from_collection(&coll, a.metric, a.jitter)?;
    let sets = FlavorSets {
        query: Some(q),
        private: Some(p),
        previous,
    };
    let sel = master_solve(a.flavor, &a.function, &ctx, &sets, a.budget, GreedyOptions::default())?;
    let json = sel.to_json()? + "\n";
    let mut outputs = Vec::new();
    match &a.out {
        Some(path) => {
            write_file(path, &json)?;
            outputs.push(path.as_path());
        }
        None => print!("{json}"),
    }
    let manifest = a.manifest.clone().unwrap_or_else(|| default_manifest(a.out.as_deref(), "summarize"));
    write_manifest(&manifest, "summarize", a, &outputs)?;
    Ok(Outcome::Done)
}

#[derive(Args, Serialize)]
pub struct LearnArgs {
    /// Directory of collection JSON files; one fold per file.
    #[arg(long)]
    pub train_dir: PathBuf,
    #[arg(long, default_value = "query")]
    pub task: Flavor,
    /// Mixture component spec. Repeatable; defaults to fl1, fl2, gc, com and logdet.
    #[arg(long = "component")]
    pub components: Vec<FunctionSpec>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Training runs from different random weights; the lowest objective wins.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub reg: f64,
    #[arg(long, default_value = "one_minus_vrouge")]
    pub margin: MarginLoss,
    /// Budget; defaults to the largest reference of each example.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "cosine")]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    pub jitter: f64,
    /// Also run leave-one-out over the collections.
    #[arg(long)]
    pub loo: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn collection_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.ends_with(".json") && !name.ends_with("manifest.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no collection files in {}", dir.display())));
    }
    Ok(files)
}

pub fn learn(a: &LearnArgs) -> Result<Outcome> {
    let mut data = Vec::new();
    for f in collection_files(&a.train_dir)? {
        let mut coll = Collection::load(&f)?;
        if coll.name.is_none() {
            coll.name = f.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        data.extend(TrainingExample::from_collection(&coll, a.metric, a.jitter, a.budget)?);
    }
    let mut components = if a.components.is_empty() { default_components() } else { a.components.clone() };
    if a.components.is_empty() && a.task.mode() == MeasureMode::Csmi {
        components.retain(|c| c.family != Family::GraphCut);
    }
    let model0 = MixtureModel::init(components, a.task, a.reg, a.seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        momentum: a.momentum,
        margin: a.margin,
        restarts: a.restarts,
        parallel: true,
    };
    let model = train(&data, &model0, &cfg)?;
    write_file(&a.out, model.to_json()? + "\n")?;
    let trace_path = sibling(&a.out, "trace.csv");
    let mut trace = Vec::new();
    write_trace_csv(&mut trace, &model.metadata.trace)?;
    write_file(&trace_path, trace)?;
    let mut outputs = vec![a.out.clone(), trace_path];
    if a.loo {
        let report = leave_one_out(&data, &model0, &cfg)?;
        let path = sibling(&a.out, "loo.json");
        write_file(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        println!("leave-one-out mean V-ROUGE {:.6}", report.mean_vrouge);
        outputs.push(path);
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&sibling(&a.out, "manifest.json"), "learn", a, &refs)?;
    Ok(Outcome::Done)
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub collection: PathBuf,
    /// Selection JSON written by `summarize`, or comma-separated ground ids.
    #[arg(long)]
    pub summary: String,
    /// JSON list of reference summaries (id lists or reference objects);
    /// defaults to the collection's own references.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RefEntry {
    Ids(Vec<String>),
    Full(ReferenceSummary),
}

#[derive(Serialize)]
struct EvalReport {
    summary: Vec<String>,
    references: usize,
    per_reference: Vec<Option<f64>>,
    vrouge: f64,
}

fn ground_indices(coll: &Collection, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            coll.ground
                .position(id)
                .ok_or_else(|| Error::Lookup(format!("item '{id}' is not in the collection")))
        })
        .collect()
}

pub fn eval(a: &EvalArgs) -> Result<Outcome> {
    let coll = Collection::load(&a.collection)?;
    let summary_ids: Vec<String> = if Path::new(&a.summary).is_file() {
        let path = Path::new(&a.summary);
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let sel: Selection = serde_json::from_str(&text)?;
        sel.items
    } else {
        a.summary.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    let refs: Vec<Vec<String>> = match &a.references {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let entries: Vec<RefEntry> = serde_json::from_str(&text)?;
            entries
                .into_iter()
                .map(|e| match e {
                    RefEntry::Ids(v) => v,
                    RefEntry::Full(r) => r.items,
                })
                .collect()
        }
        None => coll.references.iter().map(|r| r.items.clone()).collect(),
    };
    let y = ground_indices(&coll, &summary_ids)?;
    let refs = refs.iter().map(|r| ground_indices(&coll, r)).collect::<Result<Vec<_>>>()?;
    let ctx = Context::from_collection(&coll, Metric::Cosine, DEFAULT_JITTER)?;
    let cd = ctx.concepts()?;
    let per_reference = refs
        .iter()
        .map(|r| vrouge(&y, std::slice::from_ref(r), cd).ok())
        .collect();
    let report = EvalReport {
        summary: summary_ids,
        references: refs.len(),
        per_reference,
        vrouge: vrouge(&y, &refs, cd)?,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let mut outputs = Vec::new();
    match &a.out {
        Some(path) => {
            write_file(path, &json)?;
            outputs.push(path.as_path());
        }
        None => print!("{json}"),
    }
    let manifest = a.manifest.clone().unwrap_or_else(|| default_manifest(a.out.as_deref(), "eval"));
    write_manifest(&manifest, "eval", a, &outputs)?;
    Ok(Outcome::Done)
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "query")]
    pub study: Study,
    /// `PARAM=v1,v2,...` with PARAM one of lambda, eta, nu.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long = "fn", default_value = "fl2")]
    pub function: FunctionSpec,
    #[arg(long, default_value_t = 10)]
    pub budget: usize,
    /// SyntheticConfig JSON; the built-in layout otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn synth(a: &SynthArgs) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str(&text)?
        }
        None => SyntheticConfig::default(),
    };
    cfg.seed = a.seed;
    let inst = synth_generate(&cfg)?;
    let runs = match &a.sweep {
        Some(s) => {
            let (param, values) = parse_sweep(s)?;
            sweep(&inst, a.study, &a.function, param, &values, a.budget)?
        }
        None => vec![run_study(&inst, &inst.context()?, a.study, &a.function, a.budget)?],
    };
    let scatter = a.out_dir.join("scatter.csv");
    let report_csv = a.out_dir.join("report.csv");
    let report_json = a.out_dir.join("report.json");
    let mut buf = Vec::new();
    write_scatter_csv(&mut buf, &inst, &runs)?;
    write_file(&scatter, buf)?;
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &runs)?;
    write_file(&report_csv, buf)?;
    write_file(&report_json, serde_json::to_string_pretty(&runs)? + "\n")?;
    for r in &runs {
        println!("{}: {}", r.label, serde_json::to_string(&r.report)?);
    }
    #[derive(Serialize)]
    struct Echo<'a> {
        args: &'a SynthArgs,
        instance: &'a SyntheticConfig,
    }
    write_manifest(
        &a.out_dir.join("manifest.json"),
        "synth",
        &Echo { args: a, instance: &cfg },
        &[&scatter, &report_csv, &report_json],
    )?;
    Ok(Outcome::Done)
}

#[derive(Args, Serialize)]
pub struct TaskArgs {
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub collections: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn task(a: &TaskArgs) -> Result<Outcome> {
    let cfg = LearningTaskConfig {
        seed: a.seed,
        collections: a.collections,
        ..Default::default()
    };
    let mut outputs = Vec::new();
    for coll in learning_task(&cfg)? {
        let path = a.out_dir.join(format!("{}.json", coll.name.as_deref().unwrap_or("collection")));
        write_file(&path, coll.to_json()? + "\n")?;
        outputs.push(path);
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&a.out_dir.join("task.manifest.json"), "task", &cfg, &refs)?;
    Ok(Outcome::Done)
}

#[derive(Args, Serialize)]
pub struct CheckArgs {
    /// Run the closed-form, incremental-state and gradient suites.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random instances per family and mode.
    #[arg(long, default_value_t = 50)]
    pub cases: usize,
    /// Smooth gradient samples per family.
    #[arg(long, default_value_t = 20)]
    pub smooth: usize,
    /// Where to write the outcome JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn check(a: &CheckArgs) -> Result<Outcome> {
    if !a.oracle {
        return Err(Error::Config("nothing to check; pass --oracle".into()));
    }
    let families = Family::ALL;
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    outcomes.extend(closed_form_suite(a.seed, a.cases, &families)?);
    outcomes.extend(state_suite(a.seed, a.cases, &families)?);
    outcomes.extend(gradient_suite(a.seed, a.smooth, &families)?);
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name.as_str()).collect();
    for o in &outcomes {
        println!(
            "{} {}: {} cases, {} skipped, worst {:.3e} (tol {:.0e})",
            if o.passed() { "PASS" } else { "FAIL" },
            o.name,
            o.cases,
            o.skipped,
            o.worst,
            o.tolerance
        );
    }
    let mut outputs = Vec::new();
    if let Some(path) = &a.out {
        write_file(path, serde_json::to_string_pretty(&outcomes)? + "\n")?;
        outputs.push(path.as_path());
    }
    write_manifest(&default_manifest(a.out.as_deref(), "check"), "check", a, &outputs)?;
    if failed.is_empty() {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::CheckFailed(failed.join(", ")))
    }
}
