//! Experiment runner.
//!
//! A configuration is plain text with one `key = value` per line, grouped
//! into `[run]`, `[model]`, `[geometry]` and `[estimator]` sections; keys
//! before the first header belong to `[run]`. Lines starting with `#` are
//! comments. Unknown sections and keys are rejected, and every parameter an
//! experiment uses is parsed before anything is sampled.
//!
//! Each experiment produces one CSV table (fixed header, provenance columns
//! `experiment,seed,model` first) and a JSON summary, both deterministic in
//! the configuration and seed.

use crate::coupling::{derive_seed, CouplingField};
use crate::error::{Error, Result};
use crate::estimators::{
    betac_bracket, locality_sweep, pc_bracket, phi_value, theta_density_model, BracketSettings, Criterion, PhiMode,
};
use crate::kernel::{make_counterexample_1d, Kernel, ShortEdgeFunction};
use crate::lattice::{LatticeBox, Point};
use crate::metric::{mu_sequence, shape_replicate, MuTable};
use crate::renorm::{
    depth_no_pad_probe, directed_exploration, directed_survival, directed_survival_exact, DepthParams,
    DirectedModel, ExplorationParams,
};
use crate::sampler::{BoxConfig, EdgeModel, SamplePlan, DEFAULT_MISS_BUDGET};
use crate::stats::{mean_and_stderr, sample_sd};
use crate::walk::transience_probe;
use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Experiment names accepted by `run_experiment`.
pub const EXPERIMENTS: [&str; 13] = [
    "sample",
    "theta",
    "betac",
    "locality",
    "phi",
    "distance",
    "shape",
    "giant",
    "walk",
    "renorm",
    "dsb",
    "depthpad",
    "counterexample1d",
];

const SECTIONS: [(&str, &[&str]); 4] = [
    ("run", &["experiment", "seed", "replicates", "csv", "json"]),
    ("model", &["dim", "kind", "kernel", "short_edge", "beta", "betas"]),
    (
        "geometry",
        &["radius", "radii", "n", "n_values", "m", "delta", "direction", "t_values", "depth", "width", "box_radius"],
    ),
    (
        "estimator",
        &[
            "criterion", "tol", "miss_budget", "mode", "set", "truncations", "rho", "q1", "q2", "eps", "k_values", "r",
            "cutoff", "beta_tilde", "eta", "gamma", "horizon", "walks", "mu_n", "theta_radius",
        ],
    ),
];

/// The edge law an experiment runs on.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    BetaJ { kernel: Kernel, beta: Option<f64> },
    ShortEdge(ShortEdgeFunction),
}

impl ModelSpec {
    fn label(&self) -> String {
        match self {
            ModelSpec::BetaJ { kernel, beta: Some(b) } => format!("betaj beta={b} kernel={kernel}"),
            ModelSpec::BetaJ { kernel, beta: None } => format!("betaj kernel={kernel}"),
            ModelSpec::ShortEdge(sf) => format!("pf {sf}"),
        }
    }
}

/// A parsed configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub replicates: usize,
    pub dim: usize,
    pub model: ModelSpec,
    /// Every `section.key = value` pair as written.
    pub params: BTreeMap<String, String>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::ConfigParse(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut params = BTreeMap::new();
        let mut section = "run".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(cfg_err(format!("line {}: unknown section [{name}]", lineno + 1)));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(cfg_err(format!("line {}: unknown key `{key}` in [{section}]", lineno + 1)));
            }
            let full = format!("{section}.{key}");
            if params.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(cfg_err(format!("line {}: duplicate key `{full}`", lineno + 1)));
            }
        }
        let experiment = params.get("run.experiment").cloned().ok_or_else(|| cfg_err("missing run.experiment"))?;
        if !EXPERIMENTS.contains(&experiment.as_str()) {
            return Err(Error::UnknownExperiment(experiment));
        }
        let mut cfg = ExperimentConfig {
            experiment,
            seed: 0,
            replicates: 0,
            dim: 0,
            model: ModelSpec::BetaJ { kernel: Kernel::nearest_neighbor(1, 1.0)?, beta: None },
            params,
        };
        cfg.seed = cfg.parsed_or("run.seed", 0u64)?;
        cfg.replicates = cfg.parsed_or("run.replicates", 100usize)?;
        cfg.dim = cfg.parsed("model.dim")?;
        let kind = cfg.get("model.kind").unwrap_or("betaj");
        cfg.model = match kind {
            "betaj" => ModelSpec::BetaJ {
                kernel: Kernel::parse(cfg.get("model.kernel").ok_or_else(|| cfg_err("missing model.kernel"))?, cfg.dim)
                    .map_err(as_config)?,
                beta: cfg.opt_f64("model.beta")?,
            },
            "pf" => ModelSpec::ShortEdge(
                ShortEdgeFunction::parse(
                    cfg.get("model.short_edge").ok_or_else(|| cfg_err("missing model.short_edge"))?,
                    cfg.dim,
                )
                .map_err(as_config)?,
            ),
            other => return Err(cfg_err(format!("model.kind must be betaj or pf, got `{other}`"))),
        };
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key).ok_or_else(|| cfg_err(format!("missing {key}")))?;
        v.parse().map_err(|e| cfg_err(format!("{key} = `{v}`: {e}")))
    }

    fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(key).is_some() { self.parsed(key) } else { Ok(default) }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|_| self.parsed::<f64>(key)).transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(',')
            .map(|t| t.trim().parse::<T>().map_err(|e| cfg_err(format!("{key} = `{v}`: {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn list_or<T: std::str::FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.list(key)?.unwrap_or_else(|| default.to_vec()))
    }

    /// Single value of `single` or a comma list in `plural`.
    fn one_or_many(&self, single: &str, plural: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.list::<f64>(plural)? {
            return Ok(v);
        }
        Ok(vec![self.parsed::<f64>(single)?])
    }

    fn point(&self, key: &str, default: Point) -> Result<Point> {
        match self.get(key) {
            Some(v) => Point::parse_dim(v, self.dim).map_err(as_config),
            None => Ok(default),
        }
    }

    /// Points separated by `;`, coordinates by `,`.
    fn points(&self, key: &str) -> Result<Option<Vec<Point>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(';').map(|p| Point::parse_dim(p.trim(), self.dim).map_err(as_config)).collect::<Result<_>>().map(Some)
    }

    fn kernel(&self) -> Result<(&Kernel, Option<f64>)> {
        match &self.model {
            ModelSpec::BetaJ { kernel, beta } => Ok((kernel, *beta)),
            ModelSpec::ShortEdge(_) => Err(cfg_err(format!("`{}` needs model.kind = betaj", self.experiment))),
        }
    }

    fn beta(&self) -> Result<(&Kernel, f64)> {
        let (k, b) = self.kernel()?;
        Ok((k, b.ok_or_else(|| cfg_err(format!("`{}` needs model.beta", self.experiment)))?))
    }

    fn miss_budget(&self) -> Result<f64> {
        self.parsed_or("estimator.miss_budget", DEFAULT_MISS_BUDGET)
    }

    fn bracket_settings(&self) -> Result<BracketSettings> {
        let radii = self.list::<i64>("geometry.radii")?.ok_or_else(|| cfg_err("missing geometry.radii"))?;
        let criterion: Criterion =
            self.get("estimator.criterion").unwrap_or("boundary_crossing_half").parse().map_err(as_config)?;
        let mut s = BracketSettings::new(radii, criterion, self.parsed_or("estimator.tol", 0.05)?, self.replicates, self.seed);
        s.miss_budget = self.miss_budget()?;
        Ok(s)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::ConfigParse(_) => e,
        other => Error::ConfigParse(other.to_string()),
    }
}

/// CSV text and JSON summary of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub json: Value,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Table {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, cfg: &ExperimentConfig) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut head = vec!["experiment", "seed", "model"];
        head.extend(&self.header);
        w.write_record(&head).map_err(io)?;
        let model = cfg.model.label();
        let seed = cfg.seed.to_string();
        for row in &self.rows {
            let mut rec = vec![cfg.experiment.as_str(), seed.as_str(), model.as_str()];
            rec.extend(row.iter().map(String::as_str));
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

fn s<T: ToString>(x: T) -> String {
    x.to_string()
}

fn summary<T: Serialize>(cfg: &ExperimentConfig, results: &T) -> Result<Value> {
    Ok(json!({
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "dim": cfg.dim,
        "model": cfg.model.label(),
        "config": cfg.params,
        "results": serde_json::to_value(results).map_err(|e| Error::Io(e.to_string()))?,
    }))
}

/// Runs one experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (table, results) = match cfg.experiment.as_str() {
        "sample" => run_sample(cfg)?,
        "theta" => run_theta(cfg)?,
        "betac" => run_betac(cfg)?,
        "locality" => run_locality(cfg)?,
        "phi" => run_phi(cfg)?,
        "distance" => run_distance(cfg)?,
        "shape" => run_shape(cfg)?,
        "giant" => run_giant(cfg)?,
        "walk" => run_walk(cfg)?,
        "renorm" => run_renorm(cfg)?,
        "dsb" => run_dsb(cfg)?,
        "depthpad" => run_depthpad(cfg)?,
        "counterexample1d" => run_counterexample(cfg)?,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    Ok(ExperimentOutput { csv: table.render(cfg)?, json: summary(cfg, &results)? })
}

type Run = Result<(Table, Value)>;

fn to_json<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Io(e.to_string()))
}

fn run_sample(cfg: &ExperimentConfig) -> Run {
    let radius: i64 = cfg.parsed_or("geometry.radius", 8)?;
    let budget = cfg.miss_budget()?;
    let g = LatticeBox::centered(cfg.dim, radius)?;
    let model = match &cfg.model {
        ModelSpec::ShortEdge(sf) => EdgeModel::ShortEdge(sf.clone()),
        ModelSpec::BetaJ { .. } => {
            let (k, b) = cfg.beta()?;
            EdgeModel::beta_j(k.clone(), b)?
        }
    };
    let plan = SamplePlan::new(model, g, budget)?;
    let c = plan.sample(CouplingField::new(cfg.seed, 0));
    let mut t = Table::new(&["a", "b", "linf"]);
    for &(a, b) in c.edges() {
        let (pa, pb) = (c.point(a as usize), c.point(b as usize));
        t.push(vec![pa.fmt_dim(cfg.dim), pb.fmt_dim(cfg.dim), s((pb - pa).linf())]);
    }
    let (largest, _) = crate::cluster::components(&c).largest();
    let res = json!({
        "vertices": c.num_vertices(),
        "edges": c.num_edges(),
        "largest_cluster": largest,
        "cutoff": plan.cutoff(),
        "miss_bound": plan.miss_bound(),
    });
    Ok((t, res))
}

fn run_theta(cfg: &ExperimentConfig) -> Run {
    let radii = cfg.list_or::<i64>("geometry.radii", &[cfg.parsed_or("geometry.radius", 16)?])?;
    let models: Vec<(f64, EdgeModel)> = match &cfg.model {
        ModelSpec::BetaJ { kernel, .. } => cfg
            .one_or_many("model.beta", "model.betas")?
            .into_iter()
            .map(|b| Ok((b, EdgeModel::beta_j(kernel.clone(), b)?)))
            .collect::<Result<_>>()?,
        ModelSpec::ShortEdge(sf) => vec![(sf.nn_probability(), EdgeModel::ShortEdge(sf.clone()))],
    };
    let mut t = Table::new(&["parameter", "n", "value", "stderr", "replicates"]);
    let mut out = Vec::new();
    for (b, m) in &models {
        for &n in &radii {
            let e = theta_density_model(m.clone(), n, cfg.replicates, cfg.seed)?;
            t.push(vec![s(b), s(n), s(e.value), s(e.stderr), s(e.replicates)]);
            out.push(json!({"parameter": b, "n": n, "estimate": to_json(&e)?}));
        }
    }
    Ok((t, Value::Array(out)))
}

fn bracket_rows(t: &mut Table, label: &str, b: &crate::estimators::BetaBracket) {
    let r = s(b.radii.last().copied().unwrap_or(0));
    t.push(vec![label.into(), "low".into(), r.clone(), s(b.low), String::new()]);
    t.push(vec![label.into(), "high".into(), r.clone(), s(b.high), String::new()]);
    t.push(vec![label.into(), "midpoint".into(), r.clone(), s(b.midpoint), s(b.stderr)]);
    t.push(vec![label.into(), "lower_bound".into(), r, s(b.lower_bound), String::new()]);
    for c in &b.curves {
        t.push(vec![label.into(), "median_threshold".into(), s(c.radius), s(c.median_threshold), String::new()]);
    }
}

fn run_betac(cfg: &ExperimentConfig) -> Run {
    let settings = cfg.bracket_settings()?;
    let b = match &cfg.model {
        ModelSpec::BetaJ { kernel, .. } => betac_bracket(kernel, &settings)?,
        ModelSpec::ShortEdge(sf) => pc_bracket(sf, &settings)?,
    };
    let mut t = Table::new(&["label", "record", "radius", "value", "stderr"]);
    bracket_rows(&mut t, "full", &b);
    Ok((t, to_json(&b)?))
}

fn run_locality(cfg: &ExperimentConfig) -> Run {
    let (k, _) = cfg.kernel()?;
    let settings = cfg.bracket_settings()?;
    let truncations = cfg.list::<f64>("estimator.truncations")?.ok_or_else(|| cfg_err("missing estimator.truncations"))?;
    let rows = locality_sweep(k, &truncations, &settings)?;
    let mut t = Table::new(&["truncation", "l1_distance", "low", "high", "midpoint", "stderr"]);
    for r in &rows {
        let (label, gap) = match r.truncation {
            Some(n) => (s(n), k.l1_distance(&k.truncate(n)?)?),
            None => ("inf".to_string(), 0.0),
        };
        let b = &r.bracket;
        t.push(vec![label, s(gap), s(b.low), s(b.high), s(b.midpoint), s(b.stderr)]);
    }
    Ok((t, to_json(&rows)?))
}

fn run_phi(cfg: &ExperimentConfig) -> Run {
    let (k, _) = cfg.kernel()?;
    let betas = cfg.one_or_many("model.beta", "model.betas")?;
    let set = cfg.points("estimator.set")?.unwrap_or_else(|| vec![Point::ORIGIN]);
    let mode = match cfg.get("estimator.mode").unwrap_or("exact") {
        "exact" => PhiMode::Exact,
        "mc" => PhiMode::MonteCarlo { replicates: cfg.replicates, seed: cfg.seed },
        other => return Err(cfg_err(format!("estimator.mode must be exact or mc, got `{other}`"))),
    };
    let mut t = Table::new(&["beta", "set_size", "value", "upper", "certified"]);
    let mut out = Vec::new();
    for b in betas {
        let r = phi_value(k, b, &set, mode)?;
        t.push(vec![s(b), s(set.len()), s(r.value), s(r.upper), s(r.certified)]);
        out.push(json!({"beta": b, "phi": to_json(&r)?}));
    }
    Ok((t, Value::Array(out)))
}

fn run_distance(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let dir = cfg.point("geometry.direction", Point::unit(0))?;
    let ns = cfg.list_or::<i64>("geometry.n_values", &[16, 32, 64])?;
    let rows = mu_sequence(k, beta, &dir, &ns, cfg.replicates, cfg.seed, cfg.miss_budget()?)?;
    let mut t = Table::new(&["n", "mean_ratio", "stderr", "subadditivity_violations", "used", "empty_proxy"]);
    for r in &rows {
        t.push(vec![s(r.n), s(r.mean), s(r.stderr), s(r.subadditivity_violations), s(r.used), s(r.empty_proxy)]);
    }
    Ok((t, to_json(&rows)?))
}

/// `μ(u) ≈ D̂(0, n u)/n` on the standard directions `e_1`, `e_1+e_2`, ….
pub fn estimate_mu_table(k: &Kernel, beta: f64, n: i64, replicates: usize, seed: u64, budget: f64) -> Result<MuTable> {
    let d = k.dim();
    let mut entries = Vec::new();
    for j in 1..=d {
        let mut c = vec![0i64; d];
        c[..j].fill(1);
        let u = Point::new(&c);
        let row = mu_sequence(k, beta, &u, &[n], replicates, derive_seed(seed, j as u64), budget)?.remove(0);
        entries.push((u, row.mean));
    }
    MuTable::new(d, entries)
}

fn run_shape(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let ts = cfg.list_or::<u32>("geometry.t_values", &[32, 64])?;
    let eps: f64 = cfg.parsed_or("estimator.eps", 0.25)?;
    let mu_n: i64 = cfg.parsed_or("estimator.mu_n", 16)?;
    let budget = cfg.miss_budget()?;
    let mu = estimate_mu_table(k, beta, mu_n, cfg.replicates, cfg.seed, budget)?;
    let mut t = Table::new(&["t", "replicate", "magnitude", "outer_excess", "inner_deficit", "passes"]);
    let mut out = Vec::new();
    for &tv in &ts {
        let reports: Vec<Result<_>> = (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| shape_replicate(k, beta, &mu, tv, eps, derive_seed(cfg.seed, r), budget))
            .collect();
        for (r, rep) in reports.into_iter().enumerate() {
            let rep = rep?;
            t.push(vec![s(tv), s(r), s(rep.magnitude), s(rep.outer_excess), s(rep.inner_deficit), s(rep.passes)]);
            out.push(json!({"t": tv, "replicate": r, "report": to_json(&rep)?}));
        }
    }
    Ok((t, json!({"mu": mu.entries().iter().map(|(u, m)| json!([u.fmt_dim(cfg.dim), m])).collect::<Vec<_>>(), "checks": out})))
}

/// Largest-cluster densities `|K_max(B_n)|/|B_n|` per replicate.
pub fn giant_densities(k: &Kernel, beta: f64, n: i64, replicates: usize, seed: u64, budget: f64) -> Result<Vec<f64>> {
    let g = LatticeBox::centered(k.dim(), n)?;
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, g, budget)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let c: BoxConfig = plan.sample(CouplingField::new(derive_seed(seed, r), 0));
            crate::estimators::largest_density(&c)
        })
        .collect())
}

fn run_giant(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let radii = cfg.list_or::<i64>("geometry.radii", &[64, 128])?;
    let theta_radius: i64 = cfg.parsed_or("estimator.theta_radius", 2 * radii.iter().max().copied().unwrap_or(64))?;
    let budget = cfg.miss_budget()?;
    let reference = giant_densities(k, beta, theta_radius, cfg.replicates, derive_seed(cfg.seed, u64::MAX), budget)?;
    let (theta, theta_se) = mean_and_stderr(&reference);
    let mut t = Table::new(&["n", "mean_density", "sd_density", "theta_reference", "theta_stderr"]);
    let mut out = Vec::new();
    for &n in &radii {
        let xs = giant_densities(k, beta, n, cfg.replicates, cfg.seed, budget)?;
        let (m, _) = mean_and_stderr(&xs);
        let sd = sample_sd(&xs, m);
        t.push(vec![s(n), s(m), s(sd), s(theta), s(theta_se)]);
        out.push(json!({"n": n, "mean": m, "sd": sd, "densities": xs}));
    }
    Ok((t, json!({"theta_reference": theta, "theta_radius": theta_radius, "rows": out})))
}

fn run_walk(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let radii = cfg.list_or::<i64>("geometry.radii", &[16, 32])?;
    let horizon: u64 = cfg.parsed_or("estimator.horizon", 10_000)?;
    let walks: usize = cfg.parsed_or("estimator.walks", 200)?;
    let p = transience_probe(k, beta, &radii, horizon, walks, cfg.replicates, cfg.seed, cfg.miss_budget()?)?;
    let mut t = Table::new(&["d", "beta", "quantity", "scale", "value", "stderr"]);
    for (n, e) in p.radii.iter().zip(&p.resistance) {
        t.push(vec![s(p.dim), s(beta), "resistance".into(), s(n), s(e.value), s(e.stderr)]);
    }
    t.push(vec![s(p.dim), s(beta), "return".into(), s(horizon), s(p.returns.value), s(p.returns.stderr)]);
    Ok((t, to_json(&p)?))
}

fn exploration_params(cfg: &ExperimentConfig, beta: f64) -> Result<ExplorationParams> {
    let p = ExplorationParams::new(
        beta,
        cfg.parsed("geometry.n")?,
        cfg.parsed("geometry.m")?,
        cfg.parsed("estimator.cutoff")?,
        cfg.parsed("geometry.depth")?,
    )?;
    match (cfg.opt_f64("estimator.beta_tilde")?, cfg.opt_f64("estimator.eta")?) {
        (Some(bt), Some(eta)) => p.with_split(bt, eta),
        (None, None) => Ok(p),
        _ => Err(cfg_err("give both estimator.beta_tilde and estimator.eta, or neither")),
    }
}

fn run_renorm(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let params = exploration_params(cfg, beta)?;
    let runs: Vec<Result<_>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| directed_exploration(k, &params, derive_seed(cfg.seed, r)))
        .collect();
    let mut t = Table::new(&["replicate", "survived", "depth", "verified", "max_edge_linf", "final_active"]);
    let mut survived = 0;
    let mut traces = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        survived += usize::from(run.survived);
        let depth = run.survival_depth.map_or("none".to_string(), s);
        let (verified, longest) = match &run.certificate {
            Some(c) => (s(c.verified), s(c.max_edge_linf)),
            None => (String::new(), String::new()),
        };
        t.push(vec![s(r), s(run.survived), depth, verified, longest, s(run.active.last().map_or(0, Vec::len))]);
        traces.push(to_json(&run.trace)?);
    }
    Ok((t, json!({"params": to_json(&params)?, "survived": survived, "traces": traces})))
}

fn run_dsb(cfg: &ExperimentConfig) -> Run {
    let rhos = cfg.list::<f64>("estimator.rho")?.ok_or_else(|| cfg_err("missing estimator.rho"))?;
    let q1 = cfg.opt_f64("estimator.q1")?;
    let q2 = cfg.opt_f64("estimator.q2")?;
    let depth: usize = cfg.parsed_or("geometry.depth", 40)?;
    let width: Option<usize> = cfg.get("geometry.width").map(|_| cfg.parsed("geometry.width")).transpose()?;
    let models: Vec<DirectedModel> = rhos
        .iter()
        .map(|&r| {
            let m = DirectedModel::new(r, q1.unwrap_or(r), q2.unwrap_or(r)).map_err(as_config)?;
            Ok(match width {
                Some(w) => m.with_width(w),
                None => m,
            })
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["rho", "q1", "q2", "width", "depth", "survival", "stderr", "exact"]);
    let mut out = Vec::new();
    for m in &models {
        let e = directed_survival(m, depth, cfg.replicates, cfg.seed);
        let exact = if m.width.is_some() { Some(directed_survival_exact(m, depth)?) } else { None };
        t.push(vec![
            s(m.rho),
            s(m.q[0]),
            s(m.q[1]),
            m.width.map_or("inf".into(), s),
            s(depth),
            s(e.value),
            s(e.stderr),
            exact.map_or(String::new(), s),
        ]);
        out.push(json!({"model": to_json(m)?, "estimate": to_json(&e)?, "exact": exact}));
    }
    Ok((t, Value::Array(out)))
}

fn run_depthpad(cfg: &ExperimentConfig) -> Run {
    let (k, beta) = cfg.beta()?;
    let ks = cfg.list_or::<usize>("estimator.k_values", &[16, 64, 256])?;
    let r = match cfg.get("estimator.r") {
        None | Some("inf") => None,
        Some(_) => Some(cfg.parsed::<i64>("estimator.r")?),
    };
    let truncation: i64 = cfg.parsed("estimator.cutoff")?;
    let box_radius: Option<i64> = cfg.get("geometry.box_radius").map(|_| cfg.parsed("geometry.box_radius")).transpose()?;
    let mut t = Table::new(&["k", "block_side", "probability", "stderr", "mean_blocks", "truncated"]);
    let mut out = Vec::new();
    for &kv in &ks {
        let params = DepthParams { r, truncation, k: kv, box_radius };
        let p = depth_no_pad_probe(k, beta, &params, cfg.replicates, cfg.seed)?;
        t.push(vec![s(kv), s(p.block_side), s(p.estimate.value), s(p.estimate.stderr), s(p.mean_blocks), s(p.truncated)]);
        out.push(to_json(&p)?);
    }
    Ok((t, Value::Array(out)))
}

fn run_counterexample(cfg: &ExperimentConfig) -> Run {
    let ModelSpec::ShortEdge(f) = &cfg.model else {
        return Err(cfg_err("counterexample1d needs model.kind = pf"));
    };
    let gamma: f64 = cfg.parsed_or("estimator.gamma", 1.5)?;
    let ns = cfg.list_or::<i64>("geometry.n_values", &[2, 4, 8])?;
    let settings = cfg.bracket_settings()?;
    let gap_cutoff = 4 * settings.radii.last().copied().unwrap_or(1);
    let fns: Vec<(i64, ShortEdgeFunction)> =
        ns.iter().map(|&n| Ok((n, make_counterexample_1d(f, gamma, n).map_err(as_config)?))).collect::<Result<_>>()?;
    let mut t = Table::new(&["n", "l1_gap", "low", "high", "midpoint", "stderr"]);
    let mut out = Vec::new();
    let base = pc_bracket(f, &settings)?;
    t.push(vec!["base".into(), "0".into(), s(base.low), s(base.high), s(base.midpoint), s(base.stderr)]);
    for (n, fnn) in &fns {
        let b = pc_bracket(fnn, &settings)?;
        let gap = f.l1_gap(fnn, gap_cutoff)?;
        t.push(vec![s(n), s(gap), s(b.low), s(b.high), s(b.midpoint), s(b.stderr)]);
        out.push(json!({"n": n, "l1_gap": gap, "bracket": to_json(&b)?}));
    }
    Ok((t, json!({"base": to_json(&base)?, "spliced": out})))
}

/// Writes `<experiment>.csv` and `<experiment>.json` (or the names given by
/// `run.csv` / `run.json`) into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(cfg.get("run.csv").map_or(format!("{}.csv", cfg.experiment), str::to_string));
    let json_path = dir.join(cfg.get("run.json").map_or(format!("{}.json", cfg.experiment), str::to_string));
    std::fs::write(&csv_path, &out.csv)?;
    let text = serde_json::to_string_pretty(&out.json).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&json_path, text + "\n")?;
    Ok((csv_path, json_path))
}

/// Exit status for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParse(_) | Error::UnknownExperiment(_) => 2,
        _ => 3,
    }
}

/// Command-line flags of the `lrperc` binary.
#[derive(Debug, Parser)]
#[command(name = "lrperc", about = "Run a long-range percolation experiment from a config file")]
pub struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses, runs and writes one experiment; returns the output paths.
pub fn execute(args: &Args) -> Result<(PathBuf, PathBuf)> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(cfg_err("--workers must be positive"));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
    let out = pool.install(|| run_experiment(&cfg))?;
    write_outputs(&cfg, &out, &args.out)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    match execute(&args) {
        Ok((csv, json)) => {
            println!("{}\n{}", csv.display(), json.display());
            0
        }
        Err(e) => {
            eprintln!("lrperc: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THETA: &str = "experiment = theta\nseed = 5\nreplicates = 4\n\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbetas = 0.5,1\n\n[geometry]\nradii = 4,6\n";

    #[test]
    fn parses_sections_and_lists() {
        let c = ExperimentConfig::parse(THETA).unwrap();
        assert_eq!(c.experiment, "theta");
        assert_eq!(c.seed, 5);
        assert_eq!(c.replicates, 4);
        assert_eq!(c.list::<i64>("geometry.radii").unwrap(), Some(vec![4, 6]));
        assert_eq!(c.one_or_many("model.beta", "model.betas").unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let unknown_key = THETA.replace("radii = 4,6", "radius_typo = 3");
        assert!(matches!(ExperimentConfig::parse(&unknown_key), Err(Error::ConfigParse(_))));
        let unknown_exp = THETA.replace("experiment = theta", "experiment = nope");
        let e = ExperimentConfig::parse(&unknown_exp).unwrap_err();
        assert_eq!(e, Error::UnknownExperiment("nope".into()));
        assert_eq!(exit_code(&e), 2);
        assert!(ExperimentConfig::parse(&THETA.replace("[geometry]", "[geom]")).is_err());
        assert!(ExperimentConfig::parse(&THETA.replace("dim = 2", "dim = two")).is_err());
        assert!(ExperimentConfig::parse(&format!("{THETA}radii = 3,4\n")).is_err());
    }

    #[test]
    fn theta_output_is_deterministic() {
        let c = ExperimentConfig::parse(THETA).unwrap();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        let lines: Vec<&str> = a.csv.lines().collect();
        assert_eq!(lines[0], "experiment,seed,model,parameter,n,value,stderr,replicates");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn zero_kernel_betac_fails_with_estimator_code() {
        let text = "experiment = betac\nreplicates = 4\n[model]\ndim = 2\nkernel = nn(w=0)\n[geometry]\nradii = 2,3,4\n";
        let c = ExperimentConfig::parse(text).unwrap();
        let e = run_experiment(&c).unwrap_err();
        assert_eq!(e, Error::NoCrossing);
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn missing_parameters_are_config_errors() {
        let text = "experiment = renorm\n[model]\ndim = 2\nkernel = power_law(C=1,s=4)\nbeta = 1\n[geometry]\nn = 4\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert!(matches!(run_experiment(&c), Err(Error::ConfigParse(_))));
    }
}
