//! Experiment files: configuration, execution, characterisation sweeps and output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DistributionEngine, PhotonInput};
use crate::hyperopt::{
    objective_value, optimize, score_features, Evaluation, IntDim, Dim, OptimizeResult, Params,
    SamplerKind, SearchSpace, Trial, TrialStatus, DEFAULT_BUDGET,
};
use crate::readout::{MetricsReport, ReadoutSettings, SplitSpec};
use crate::reservoir::{
    FeatureMatrix, FeedbackMode, Reservoir, ReservoirConfig, ShotBudget, StepRecord,
};
use crate::tasks::{generate, Dataset, TaskKind, TaskSpec};

/// Version string embedded in every result file.
pub const VERSION: &str = concat!("qrc ", env!("CARGO_PKG_VERSION"));

/// Keyword form of the readout setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizeKeyword {
    #[serde(rename = "optimize")]
    Optimize,
}

/// Fixed readout hyperparameters, or `"optimize"` to search them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadoutChoice {
    Fixed(ReadoutSettings),
    Search(OptimizeKeyword),
}

impl Default for ReadoutChoice {
    fn default() -> Self {
        ReadoutChoice::Fixed(ReadoutSettings::default())
    }
}

/// Search settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperoptSettings {
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub space: SearchSpace,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

impl Default for HyperoptSettings {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            seed: 0,
            sampler: SamplerKind::default(),
            space: SearchSpace::default(),
        }
    }
}

fn default_replicas() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// A runnable experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub task: TaskSpec,
    pub photon: PhotonInput,
    pub reservoir: ReservoirConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub readout: ReadoutChoice,
    #[serde(default)]
    pub hyperopt: Option<HyperoptSettings>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Command-line overrides applied on top of a configuration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// Replaces the task, reservoir and search seeds.
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Exact probabilities instead of sampled counts.
    pub noiseless: bool,
}

/// Where in the configuration text a validation message points.
fn field_line(text: &str, field: &str) -> Option<usize> {
    let needle = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

const KNOWN_FIELDS: [&str; 16] = [
    "mu_prime", "mu_dprime", "mu_tprime", "a_in", "a_fb_D", "a_fb_4", "a_fb_B", "phase_step",
    "n_shot", "visibility", "input_modes", "train_fraction", "washout", "replicas", "length",
    "budget",
];

impl ExperimentConfig {
    /// Parses JSON text; errors carry the line and column of the problem.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads and validates a configuration file, formatting errors as `path:line: message`.
    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg = Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(j) => format!("{}:{}:{}: {j}", path.display(), j.line(), j.column()),
            other => format!("{}: {other}", path.display()),
        })?;
        cfg.validate().map_err(|e| {
            let msg = e.to_string();
            let line = KNOWN_FIELDS
                .iter()
                .find(|f| msg.contains(*f))
                .and_then(|f| field_line(&text, f));
            match line {
                Some(l) => format!("{}:{l}: {msg}", path.display()),
                None => format!("{}: {msg}", path.display()),
            }
        })?;
        Ok(cfg)
    }

    /// Cross-field validation; returns the number of measurement outcomes.
    pub fn validate(&self) -> Result<usize> {
        self.task.validate()?;
        let engine = DistributionEngine::new(self.reservoir.circuit.modes(), self.photon.clone())?;
        let outcomes = engine.outcomes();
        self.reservoir.validate(outcomes)?;
        let (k_tr, _) = self.split.resolve(self.task.length)?;
        if let ReadoutChoice::Fixed(r) = &self.readout {
            if !(r.alpha.is_finite() && r.alpha >= 0.0) {
                return Err(Error::Config(format!("readout alpha must be >= 0, got {}", r.alpha)));
            }
            if r.washout >= k_tr {
                return Err(Error::Config(format!(
                    "washout {} leaves no training rows before the split at {k_tr}",
                    r.washout
                )));
            }
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if let Some(h) = self.resolved_hyperopt() {
            if h.budget == 0 {
                return Err(Error::Config("hyperopt budget must be at least 1".into()));
            }
            h.space.validate(outcomes)?;
        }
        Ok(outcomes)
    }

    /// Search settings in effect, with the readout pinned when it is fixed.
    pub fn resolved_hyperopt(&self) -> Option<HyperoptSettings> {
        let mut h = match (&self.hyperopt, &self.readout) {
            (Some(h), _) => h.clone(),
            (None, ReadoutChoice::Search(_)) => HyperoptSettings {
                space: readout_only_space(&self.reservoir),
                seed: self.reservoir.seed,
                ..HyperoptSettings::default()
            },
            (None, ReadoutChoice::Fixed(_)) => return None,
        };
        if let ReadoutChoice::Fixed(r) = &self.readout {
            h.space.alpha = Dim::Fixed(r.alpha);
            h.space.washout = IntDim::Fixed(r.washout);
        }
        Some(h)
    }

    /// Configuration with defaults materialised.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.hyperopt = self.resolved_hyperopt();
        c
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.task.seed = seed;
            self.reservoir.seed = seed;
            if let Some(h) = self.hyperopt.as_mut() {
                h.seed = seed;
            }
        }
        if let Some(r) = o.replicas {
            self.replicas = r;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if o.noiseless {
            self.reservoir.n_shot = ShotBudget::Infinite;
        }
    }

    /// Replica count actually run: exact probabilities make replicas identical.
    pub fn effective_replicas(&self) -> usize {
        if self.reservoir.n_shot.is_finite() {
            self.replicas
        } else {
            1
        }
    }

    fn standardize(&self) -> bool {
        match &self.readout {
            ReadoutChoice::Fixed(r) => r.standardize,
            ReadoutChoice::Search(_) => false,
        }
    }
}

/// Search space that keeps the reservoir as configured and tunes only the readout.
pub fn readout_only_space(r: &ReservoirConfig) -> SearchSpace {
    SearchSpace {
        a_in: Dim::Fixed(r.a_in),
        a_fb_d: Dim::Fixed(r.a_fb_d),
        a_fb_4: Dim::Fixed(r.a_fb_4),
        a_fb_b: Dim::Fixed(r.a_fb_b),
        mu_prime: Some(vec![r.mu_prime]),
        mu_dprime: Some(vec![r.mu_dprime]),
        mu_tprime: Some(vec![r.mu_tprime]),
        ..SearchSpace::default()
    }
}

/// Summary statistics of one metric across replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single replica.
    pub std: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            median,
            mean,
            std,
            count: n,
        }
    }
}

/// Named scalar metrics of a report.
pub fn metric_values(report: &MetricsReport) -> Vec<(String, f64)> {
    let mut out = vec![
        ("mse".to_string(), report.mse),
        ("r2".to_string(), report.r2),
        ("gram_rank".to_string(), report.gram_rank as f64),
    ];
    if let Some(a) = report.accuracy {
        out.push(("accuracy".into(), a));
    }
    if let Some(c) = report.capacity {
        out.push(("capacity".into(), c));
    }
    if let Some(per) = &report.per_delay_r2 {
        for (d, r2) in per.iter().enumerate() {
            out.push((format!("r2_delay_{d}"), *r2));
        }
    }
    out
}

/// Aggregates every named metric across replicas.
pub fn aggregate(reports: &[MetricsReport]) -> BTreeMap<String, Stats> {
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (name, v) in metric_values(r) {
            columns.entry(name).or_default().push(v);
        }
    }
    columns.into_iter().map(|(k, v)| (k, Stats::of(&v))).collect()
}

/// Outcome of the search stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub best: Params,
    pub objective: f64,
    pub best_trial: usize,
    pub trials: usize,
    pub failed: usize,
    pub sampler: SamplerKind,
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub version: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
    /// Configuration actually evaluated (searched values applied).
    pub evaluated: EvaluatedSettings,
    pub replicas: Vec<MetricsReport>,
    pub aggregate: BTreeMap<String, Stats>,
    #[serde(skip)]
    pub evaluations: Vec<Evaluation>,
    #[serde(skip)]
    pub trace: Vec<StepRecord>,
    #[serde(skip)]
    pub trace_labels: Vec<String>,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSettings {
    pub reservoir: ReservoirConfig,
    pub readout: ReadoutSettings,
    pub replicas: usize,
}

fn features_for(
    config: &ReservoirConfig,
    photon: &PhotonInput,
    dataset: &Dataset,
) -> Result<(FeatureMatrix, Vec<StepRecord>)> {
    let records = Reservoir::new(config.clone(), photon.clone())?.run(&dataset.inputs)?;
    Ok((FeatureMatrix::from_records(&records), records))
}

/// Searches reservoir and readout settings for `config` on `dataset`.
pub fn search(config: &ExperimentConfig, dataset: &Dataset) -> Result<Option<OptimizeResult>> {
    let Some(h) = config.resolved_hyperopt() else {
        return Ok(None);
    };
    let outcomes = config.validate()?;
    let standardize = config.standardize();
    let objective = |p: &Params, _seed: u64| {
        let rc = p.apply(&config.reservoir);
        let (features, _) = features_for(&rc, &config.photon, dataset)?;
        let eval = score_features(
            config.task.kind,
            dataset,
            &features,
            &config.split,
            &p.readout(standardize),
        )?;
        Ok(objective_value(config.task.kind, &eval.report))
    };
    let sampler = h.sampler.build();
    optimize(&h.space, outcomes, objective, h.budget, h.seed, sampler.as_ref()).map(Some)
}

/// Runs search (if configured) and every replica, without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ResultBundle> {
    let outcomes = config.validate()?;
    let dataset = generate(&config.task)?;
    let found = search(config, &dataset)?;
    let standardize = config.standardize();

    let (reservoir, readout) = match (&found, &config.readout) {
        (Some(r), _) => (r.best.params.apply(&config.reservoir), r.best.params.readout(standardize)),
        (None, ReadoutChoice::Fixed(ro)) => (config.reservoir.clone(), *ro),
        (None, ReadoutChoice::Search(_)) => unreachable!("resolved_hyperopt covers this case"),
    };
    reservoir.validate(outcomes)?;

    let n_rep = config.effective_replicas();
    let engine = Reservoir::new(reservoir.clone(), config.photon.clone())?;
    let runs = if n_rep > 1 || reservoir.n_shot.is_finite() {
        engine.replicas(&dataset.inputs, n_rep)?
    } else {
        vec![engine.run(&dataset.inputs)?]
    };
    let evaluations = runs
        .iter()
        .map(|recs| {
            score_features(
                config.task.kind,
                &dataset,
                &FeatureMatrix::from_records(recs),
                &config.split,
                &readout,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = evaluations.iter().map(|e| e.report.clone()).collect();
    let search = found.as_ref().map(|r| SearchSummary {
        best: r.best.params.clone(),
        objective: r.best.objective.unwrap_or(f64::NAN),
        best_trial: r.best.index,
        trials: r.trials.len(),
        failed: r.trials.iter().filter(|t| t.status == TrialStatus::Failed).count(),
        sampler: config.resolved_hyperopt().map(|h| h.sampler).unwrap_or_default(),
    });
    Ok(ResultBundle {
        version: VERSION.to_string(),
        config: config.resolved(),
        search,
        evaluated: EvaluatedSettings {
            reservoir,
            readout,
            replicas: n_rep,
        },
        aggregate: aggregate(&reports),
        replicas: reports,
        evaluations,
        trace: runs.into_iter().next().unwrap_or_default(),
        trace_labels: engine.engine().basis().labels(),
        trials: found.map(|r| r.trials).unwrap_or_default(),
    })
}

/// Floats in CSV output: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Trace CSV: `k,s_k,phi_B,phi_D,phi_4` then one column per outcome label.
pub fn trace_csv(records: &[StepRecord], labels: &[String]) -> String {
    let mut out = String::from("k,s_k,phi_B,phi_D,phi_4");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_float(r.s_k),
            fmt_float(r.phases.phi_b),
            fmt_float(r.phases.phi_d),
            fmt_float(r.phases.phi_4)
        );
        for p in r.probs.probs() {
            out.push(',');
            out.push_str(&fmt_float(*p));
        }
        out.push('\n');
    }
    out
}

/// Predictions CSV: `replica,k,target,prediction` over the test suffix.
pub fn predictions_csv(evaluations: &[Evaluation]) -> String {
    let mut out = String::from("replica,k,target,prediction\n");
    for (i, e) in evaluations.iter().enumerate() {
        for (j, (t, p)) in e.targets.iter().zip(&e.predictions).enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", e.test_start + j, fmt_float(*t), fmt_float(*p));
        }
    }
    out
}

fn trials_jsonl(trials: &[Trial]) -> Result<String> {
    let mut out = String::new();
    for t in trials {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `files` into `dir` all-or-nothing: everything is staged first and
/// only moved into place once every file was written.
pub fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stage = dir.join(format!(".staging-{}", std::process::id()));
    if stage.exists() {
        fs::remove_dir_all(&stage)?;
    }
    fs::create_dir(&stage)?;
    let staged = files
        .iter()
        .try_for_each(|(name, body)| fs::write(stage.join(name), body));
    let moved = staged.and_then(|_| {
        files
            .iter()
            .try_for_each(|(name, _)| fs::rename(stage.join(name), dir.join(name)))
    });
    let cleanup = fs::remove_dir_all(&stage);
    moved?;
    cleanup?;
    Ok(())
}

impl ResultBundle {
    pub fn results_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Output files keyed by name.
    pub fn files(&self) -> Result<Vec<(&'static str, String)>> {
        let mut files = vec![
            ("results.json", self.results_json()?),
            ("predictions.csv", predictions_csv(&self.evaluations)),
            ("trace.csv", trace_csv(&self.trace, &self.trace_labels)),
        ];
        if !self.trials.is_empty() {
            files.push(("trials.jsonl", trials_jsonl(&self.trials)?));
        }
        Ok(files)
    }

    pub fn persist(&self, dir: &Path) -> Result<()> {
        write_outputs(dir, &self.files()?)
    }
}

/// Loads, executes and persists; returns the bundle.
pub fn run(config: &ExperimentConfig) -> Result<ResultBundle> {
    let bundle = execute(config)?;
    bundle.persist(&config.output_dir)?;
    Ok(bundle)
}

/// Characterisation sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Recall quality per delay.
    Memory,
    /// Monomial degree and polynomial order sweeps.
    Expressivity,
    /// Sweep of the configured task's own parameter.
    TaskSweep,
    CountsSweep,
    VisibilitySweep,
    PhotonSweep,
    FeedbackSweep,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Memory,
        Suite::Expressivity,
        Suite::TaskSweep,
        Suite::CountsSweep,
        Suite::VisibilitySweep,
        Suite::PhotonSweep,
        Suite::FeedbackSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Memory => "memory",
            Suite::Expressivity => "expressivity",
            Suite::TaskSweep => "task_sweep",
            Suite::CountsSweep => "counts_sweep",
            Suite::VisibilitySweep => "visibility_sweep",
            Suite::PhotonSweep => "photon_sweep",
            Suite::FeedbackSweep => "feedback_sweep",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::Config(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// One row of the long-format sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_variable: String,
    pub value: f64,
    pub metric: String,
    pub replica: usize,
    pub result: f64,
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        fmt_float(v)
    }
}

/// Sweep CSV: `sweep_variable,value,metric,replica,result`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep_variable,value,metric,replica,result\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sweep_variable,
            fmt_value(r.value),
            r.metric,
            r.replica,
            fmt_float(r.result)
        );
    }
    out
}

fn push_reports(rows: &mut Vec<SweepRow>, var: &str, value: f64, reports: &[MetricsReport]) {
    for (i, rep) in reports.iter().enumerate() {
        for (metric, v) in metric_values(rep) {
            if metric.starts_with("r2_delay_") {
                continue;
            }
            rows.push(SweepRow {
                sweep_variable: var.to_string(),
                value,
                metric,
                replica: i,
                result: v,
            });
        }
    }
}

fn default_task_grid(kind: TaskKind) -> Vec<f64> {
    let r: std::ops::RangeInclusive<usize> = match kind {
        TaskKind::Memory(_) => 0..=6,
        TaskKind::Monomial(_) => 2..=13,
        TaskKind::Polynomial(_) => 1..=7,
        TaskKind::Xor(_) => 1..=4,
        TaskKind::Narma(_) => 1..=8,
        TaskKind::MackeyGlass(_) => 0..=12,
    };
    r.map(|v| v as f64).collect()
}

fn task_variable(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Memory(_) => "memory_d",
        TaskKind::Monomial(_) => "monomial_n",
        TaskKind::Polynomial(_) => "polynomial_N",
        TaskKind::Xor(_) => "xor_d",
        TaskKind::Narma(_) => "narma_N",
        TaskKind::MackeyGlass(_) => "mackey_glass_t_f",
    }
}

fn as_index(v: f64, what: &str) -> Result<usize> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{what} grid value {v} is not a non-negative integer")))
    }
}

fn task_sweep(
    base: &ExperimentConfig,
    kind: TaskKind,
    grid: &[f64],
    rows: &mut Vec<SweepRow>,
) -> Result<()> {
    let var = task_variable(kind);
    for &v in grid {
        let mut cfg = base.clone();
        cfg.task.kind = kind.with_parameter(as_index(v, var)?);
        let bundle = execute(&cfg)?;
        push_reports(rows, var, v, &bundle.replicas);
    }
    Ok(())
}

/// Runs a characterisation suite and returns the long-format rows.
pub fn characterize(suite: Suite, config: &ExperimentConfig, grid: Option<&[f64]>) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    match suite {
        Suite::Memory => {
            let delays: Vec<f64> = grid.map(<[f64]>::to_vec).unwrap_or_else(|| default_task_grid(TaskKind::Memory(0)));
            let max = delays
                .iter()
                .map(|&d| as_index(d, "delay"))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max()
                .unwrap_or(0);
            let mut cfg = config.clone();
            cfg.task.kind = TaskKind::Memory(max);
            let bundle = execute(&cfg)?;
            for (i, rep) in bundle.replicas.iter().enumerate() {
                let per = rep.per_delay_r2.as_deref().unwrap_or(&[]);
                for &d in &delays {
                    rows.push(SweepRow {
                        sweep_variable: "d".into(),
                        value: d,
                        metric: "r2".into(),
                        replica: i,
                        result: per[d as usize],
                    });
                }
                if let Some(c) = rep.capacity {
                    rows.push(SweepRow {
                        sweep_variable: "d".into(),
                        value: max as f64,
                        metric: "capacity".into(),
                        replica: i,
                        result: c,
                    });
                }
            }
        }
        Suite::Expressivity => {
            for kind in [TaskKind::Monomial(1), TaskKind::Polynomial(1)] {
                let g = grid.map(<[f64]>::to_vec).unwrap_or_else(|| default_task_grid(kind));
                task_sweep(config, kind, &g, &mut rows)?;
            }
        }
        Suite::TaskSweep => {
            let g = grid
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| default_task_grid(config.task.kind));
            task_sweep(config, config.task.kind, &g, &mut rows)?;
        }
        Suite::CountsSweep => {
            let g = grid
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![1e2, 1e3, 1e4, f64::INFINITY]);
            for &v in &g {
                let mut cfg = config.clone();
                cfg.reservoir.n_shot = if v.is_infinite() {
                    ShotBudget::Infinite
                } else {
                    let n = as_index(v, "n_shot")?;
                    if n == 0 {
                        return Err(Error::Config("n_shot grid values must be >= 1".into()));
                    }
                    ShotBudget::Finite(n as u64)
                };
                let bundle = execute(&cfg)?;
                push_reports(&mut rows, "n_shot", v, &bundle.replicas);
            }
        }
        Suite::VisibilitySweep => {
            if config.photon.n_ph() != 2 {
                return Err(Error::Unsupported(
                    "visibility sweeps need a two-photon input".into(),
                ));
            }
            let g = grid.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
            for &v in &g {
                let mut cfg = config.clone();
                cfg.photon.visibility = v;
                let bundle = execute(&cfg)?;
                push_reports(&mut rows, "V", v, &bundle.replicas);
            }
        }
        Suite::PhotonSweep => {
            let g = grid.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0]);
            let v = if config.photon.visibility == 0.0 { 0.0 } else { 1.0 };
            for &n in &g {
                let mut cfg = config.clone();
                cfg.photon = PhotonInput::default_for(as_index(n, "photon number")?, v)?;
                let outcomes = DistributionEngine::new(4, cfg.photon.clone())?.outcomes();
                for mu in [
                    &mut cfg.reservoir.mu_prime,
                    &mut cfg.reservoir.mu_dprime,
                    &mut cfg.reservoir.mu_tprime,
                ] {
                    *mu %= outcomes;
                }
                if let Some(h) = cfg.hyperopt.as_mut() {
                    for set in [&mut h.space.mu_prime, &mut h.space.mu_dprime, &mut h.space.mu_tprime] {
                        if let Some(s) = set {
                            s.retain(|&m| m < outcomes);
                            if s.is_empty() {
                                s.push(0);
                            }
                        }
                    }
                }
                let bundle = execute(&cfg)?;
                push_reports(&mut rows, "n_ph", n, &bundle.replicas);
            }
        }
        Suite::FeedbackSweep => {
            let g = grid.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0]);
            for &loops in &g {
                let mut cfg = config.clone();
                cfg.reservoir.feedback_mode = match as_index(loops, "feedback loop count")? {
                    0 => FeedbackMode::Off,
                    1 => FeedbackMode::OneStep,
                    2 => FeedbackMode::TwoStep,
                    3 => FeedbackMode::ThreeLoop,
                    n => return Err(Error::Config(format!("no feedback mode with {n} loops"))),
                };
                if cfg.reservoir.feedback_mode == FeedbackMode::ThreeLoop {
                    if let Some(h) = cfg.hyperopt.as_mut() {
                        if h.space.a_fb_b == Dim::Fixed(0.0) {
                            h.space.a_fb_b = Dim::Range([-std::f64::consts::PI, std::f64::consts::PI]);
                            h.space.mu_tprime = None;
                        }
                    }
                }
                let bundle = execute(&cfg)?;
                push_reports(&mut rows, "feedback_loops", loops, &bundle.replicas);
            }
        }
    }
    Ok(rows)
}

/// Runs a suite and writes `sweep.csv` into the configured output directory.
pub fn characterize_to_dir(
    suite: Suite,
    config: &ExperimentConfig,
    grid: Option<&[f64]>,
) -> Result<Vec<SweepRow>> {
    let rows = characterize(suite, config, grid)?;
    write_outputs(&config.output_dir, &[("sweep.csv", sweep_csv(&rows))])?;
    Ok(rows)
}

/// Sets the worker thread count for parallel replicas and trials.
pub fn configure_threads(jobs: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {jobs} worker threads: {e}")))
}
