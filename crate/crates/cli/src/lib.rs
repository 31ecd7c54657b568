//! The `rankforge` pipeline: generate, train, tune, predict, evaluate, plot.
//!
//! Every command reads one JSON [`RunConfig`]. Relative paths inside a config
//! file resolve against the file's directory. Training and tuning write a run
//! directory (`output_dir`) with this layout:
//!
//! ```text
//! config.json          resolved config of the run
//! params.json          GBDT parameters the fold models were trained with
//! preprocess.json      fitted label encoder and imputer
//! models/fold_<k>.json one model per fold, k = 0..K-1
//! oof.csv              query_id,product_id,fold,is_click,probability
//! oof_submission.csv   out-of-fold predictions in submission format
//! losscurve.csv        iteration,fold,train_logloss,valid_logloss
//! report.json          out-of-fold logloss and MRR
//! trials.jsonl         tune only: one JSON trial per line
//! best_params.json     tune only
//! ```

mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rankforge_core::dataset::{self, IMPRESSION_SIZE};
use rankforge_core::evalrank::{self, LabelMap};
use rankforge_core::tpe::{self, Study};
use rankforge_core::trainer::{self, CvResult};
use rankforge_core::{
    Error, FeatureMatrix, GbdtModel, GbdtParams, JoinedTable, MetricReport, Preprocessor, SearchSpace,
    SyntheticConfig, TpeConfig, ZeroClickPolicy,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{role} file {path:?} does not exist")]
    MissingInput { role: &'static str, path: PathBuf },

    #[error("{0}")]
    Config(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(Error::Csv(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

impl CliError {
    /// Stable name printed as the first token of the error line.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            // A run without its product table cannot resolve any product.
            CliError::MissingInput { role: "products", .. } => "MissingProduct",
            CliError::MissingInput { .. } => "IoError",
            CliError::Config(_) => "InvalidConfig",
        }
    }

    /// `error: <Category>: <message>`, always a single line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: {}: {msg}", self.category())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Labeled impressions used by `train` and `tune`; `generate` writes here.
    pub impressions: PathBuf,
    pub products: PathBuf,
    /// Impressions ranked by `predict`. Labels, if present, are ignored.
    pub predict_impressions: Option<PathBuf>,
    /// Submission written by `predict` and read by `evaluate`.
    /// Defaults to `<output_dir>/submission.csv`.
    pub submission: Option<PathBuf>,
    /// Labels for `evaluate`. Defaults to `predict_impressions`, then
    /// `impressions`.
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub generate: SyntheticConfig,
    pub gbdt: GbdtParams,
    pub folds: usize,
    pub cv_seed: u64,
    pub tpe: TpeConfig,
    /// Total trials of a tune, counting trials resumed from the log.
    pub n_trials: usize,
    pub search_space: SearchSpace,
    /// Leave queries without a click out of the MRR mean instead of
    /// scoring them 0.
    pub exclude_unclicked: bool,
    pub submission_probabilities: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            impressions: "impressions.csv".into(),
            products: "products.csv".into(),
            predict_impressions: None,
            submission: None,
            labels: None,
            output_dir: "run".into(),
            generate: SyntheticConfig::default(),
            gbdt: GbdtParams::default(),
            folds: 5,
            cv_seed: 0,
            tpe: TpeConfig::default(),
            n_trials: 25,
            search_space: SearchSpace::gbdt_default(),
            exclude_unclicked: false,
            submission_probabilities: true,
        }
    }
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(CliError::MissingInput {
                role: "config",
                path: path.to_owned(),
            });
        }
        let mut cfg: RunConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.impressions);
        fix(&mut self.products);
        fix(&mut self.output_dir);
        for p in [&mut self.predict_impressions, &mut self.submission, &mut self.labels]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Replaces every seed: generator, boosting, folds and TPE.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.generate.seed = seed;
        self.gbdt.seed = seed;
        self.cv_seed = seed;
        self.tpe.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.gbdt.validate()?;
        self.tpe.validate()?;
        self.search_space.validate()?;
        if self.folds < 2 {
            return Err(Error::BadK(self.folds).into());
        }
        Ok(())
    }

    pub fn policy(&self) -> ZeroClickPolicy {
        if self.exclude_unclicked {
            ZeroClickPolicy::Exclude
        } else {
            ZeroClickPolicy::CountAsZero
        }
    }

    pub fn submission_path(&self) -> PathBuf {
        self.submission
            .clone()
            .unwrap_or_else(|| self.output_dir.join("submission.csv"))
    }

    pub fn labels_path(&self) -> PathBuf {
        self.labels
            .clone()
            .or_else(|| self.predict_impressions.clone())
            .unwrap_or_else(|| self.impressions.clone())
    }
}

/// Parses `RANKFORGE_THREADS`; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("RANKFORGE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "RANKFORGE_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn require(path: &Path, role: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingInput {
            role,
            path: path.to_owned(),
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

/// Loads and joins an impressions file with the config's product table.
pub fn load_table(impressions: &Path, products: &Path) -> Result<JoinedTable> {
    require(impressions, "impressions")?;
    require(products, "products")?;
    let imps = dataset::load_impressions(impressions)?;
    let prods = dataset::load_products(products)?;
    Ok(dataset::join(&imps, &prods)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateOutput {
    pub impressions: PathBuf,
    pub products: PathBuf,
    pub n_rows: usize,
}

/// Writes the synthetic `impressions` and `products` CSVs.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateOutput> {
    let (imps, prods) = dataset::generate_synthetic(&cfg.generate)?;
    create_parent(&cfg.impressions)?;
    create_parent(&cfg.products)?;
    dataset::save_impressions(&cfg.impressions, &imps)?;
    dataset::save_products(&cfg.products, &prods)?;
    Ok(GenerateOutput {
        impressions: cfg.impressions.clone(),
        products: cfg.products.clone(),
        n_rows: imps.len(),
    })
}

fn training_matrix(cfg: &RunConfig) -> Result<(Preprocessor, FeatureMatrix)> {
    cfg.validate()?;
    let table = load_table(&cfg.impressions, &cfg.products)?;
    let pre = Preprocessor::fit(&table)?;
    let x = pre.transform(&table)?;
    if x.labels.is_none() {
        return Err(Error::Unlabeled.into());
    }
    Ok((pre, x))
}

fn fold_plan(cfg: &RunConfig, x: &FeatureMatrix) -> Result<rankforge_core::FoldPlan> {
    let y = x.labels.as_deref().ok_or(Error::Unlabeled)?;
    Ok(trainer::stratified_group_kfold(y, &x.groups, cfg.folds, cfg.cv_seed)?)
}

fn train_and_persist(
    cfg: &RunConfig,
    pre: &Preprocessor,
    x: &FeatureMatrix,
    params: &GbdtParams,
) -> Result<MetricReport> {
    let plan = fold_plan(cfg, x)?;
    let cv = trainer::cv_train_with_plan(x, params, &plan, cfg.policy())?;
    persist_run(cfg, pre, x, params, &cv)?;
    Ok(cv.report)
}

fn persist_run(cfg: &RunConfig, pre: &Preprocessor, x: &FeatureMatrix, params: &GbdtParams, cv: &CvResult) -> Result<()> {
    let dir = &cfg.output_dir;
    let models = dir.join("models");
    if models.exists() {
        fs::remove_dir_all(&models)?;
    }
    fs::create_dir_all(&models)?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("params.json"), params)?;
    pre.save(dir.join("preprocess.json"))?;
    for (k, m) in cv.models.iter().enumerate() {
        m.save(models.join(format!("fold_{k}.json")))?;
    }

    let y = x.labels.as_deref().ok_or(Error::Unlabeled)?;
    let mut oof = csv::Writer::from_path(dir.join("oof.csv"))?;
    oof.write_record(["query_id", "product_id", "fold", "is_click", "probability"])?;
    for (r, (q, item)) in x.groups.iter().zip(&x.items).enumerate() {
        oof.write_record([
            q.as_str(),
            item.as_str(),
            &cv.plan.assignment[r].to_string(),
            &y[r].to_string(),
            &cv.oof[r].to_string(),
        ])?;
    }
    oof.flush()?;

    let rankings = evalrank::rank_queries(&trainer::scored_rows(x, &cv.oof))?;
    evalrank::save_submission(dir.join("oof_submission.csv"), &rankings, true)?;

    let mut curve = csv::Writer::from_path(dir.join("losscurve.csv"))?;
    curve.write_record(["iteration", "fold", "train_logloss", "valid_logloss"])?;
    for (fold, h) in cv.histories.iter().enumerate() {
        for (i, train) in h.train_logloss.iter().enumerate() {
            let valid = h.valid_logloss.get(i).map_or(String::new(), f64::to_string);
            curve.write_record([(i + 1).to_string(), fold.to_string(), train.to_string(), valid])?;
        }
    }
    curve.flush()?;

    write_json(&dir.join("report.json"), &cv.report)?;
    Ok(())
}

/// K-fold training on `impressions`; returns the out-of-fold report.
pub fn cmd_train(cfg: &RunConfig) -> Result<MetricReport> {
    let (pre, x) = training_matrix(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    train_and_persist(cfg, &pre, &x, &cfg.gbdt)
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub best_trial: usize,
    pub best_value: f64,
    pub best_params: GbdtParams,
    pub n_trials: usize,
    /// Out-of-fold report of the final training with the best parameters.
    pub report: MetricReport,
}

/// TPE search over `search_space`, resumable through `trials.jsonl`,
/// followed by a final training run with the best parameters.
pub fn cmd_tune(cfg: &RunConfig) -> Result<TuneSummary> {
    let (pre, x) = training_matrix(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let log = cfg.output_dir.join("trials.jsonl");
    let previous = if log.exists() { tpe::read_trial_log(&log)? } else { Vec::new() };
    let names: BTreeSet<&str> = cfg.search_space.dims.iter().map(|d| d.name.as_str()).collect();
    for t in &previous {
        if t.point.keys().map(String::as_str).ne(names.iter().copied()) {
            return Err(CliError::Config(format!(
                "trial {} in {} does not match the configured search space",
                t.number,
                log.display()
            )));
        }
    }
    let mut study = Study::resume(cfg.search_space.clone(), cfg.tpe.clone(), previous)?;
    let plan = fold_plan(cfg, &x)?;
    let outcome = trainer::tune_study(&x, &mut study, cfg.n_trials, &plan, &cfg.gbdt, |t| {
        tpe::append_trial_log(&log, t)
    })?;
    let best_trial = study.best().ok_or(Error::AllTrialsFailed)?.number;
    write_json(&cfg.output_dir.join("best_params.json"), &outcome.best_params)?;
    let report = train_and_persist(cfg, &pre, &x, &outcome.best_params)?;
    Ok(TuneSummary {
        best_trial,
        best_value: outcome.best_value,
        best_params: outcome.best_params,
        n_trials: outcome.trials.len(),
        report,
    })
}

/// Loads `models/fold_<k>.json` for k = 0, 1, ... in fold order.
pub fn load_models(run_dir: &Path) -> Result<Vec<GbdtModel>> {
    let mut found = BTreeMap::new();
    for entry in fs::read_dir(run_dir.join("models"))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(k) = name
            .strip_prefix("fold_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            found.insert(k, GbdtModel::load(run_dir.join("models").join(name.as_ref()))?);
        }
    }
    if found.is_empty() {
        return Err(io::Error::new(io::ErrorKind::NotFound, format!("no fold models in {}", run_dir.display())).into());
    }
    Ok(found.into_values().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictOutput {
    pub submission: PathBuf,
    pub n_queries: usize,
    pub n_rows: usize,
}

/// Ranks `predict_impressions` with the fold ensemble of the run directory.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictOutput> {
    let input = cfg
        .predict_impressions
        .as_deref()
        .ok_or_else(|| CliError::Config("predict needs predict_impressions".into()))?;
    let table = load_table(input, &cfg.products)?;
    require(&cfg.output_dir.join("preprocess.json"), "preprocess")?;
    let pre = Preprocessor::load(cfg.output_dir.join("preprocess.json"))?;
    let models = load_models(&cfg.output_dir)?;
    let x = pre.transform(&table)?;
    let p = trainer::predict_ensemble(&models, &x)?;
    let rankings = evalrank::rank_queries(&trainer::scored_rows(&x, &p))?;
    let out = cfg.submission_path();
    create_parent(&out)?;
    evalrank::save_submission(&out, &rankings, cfg.submission_probabilities)?;
    Ok(PredictOutput {
        submission: out,
        n_queries: rankings.len(),
        n_rows: x.n_rows(),
    })
}

/// Scores a submission against labeled impressions. Logloss is reported
/// only when the submission carries probabilities.
pub fn evaluate_submission(
    rankings: &[rankforge_core::QueryRanking],
    labels: &LabelMap,
    policy: ZeroClickPolicy,
) -> Result<MetricReport> {
    for q in rankings {
        if q.items.len() != IMPRESSION_SIZE {
            return Err(Error::GroupSize {
                query_id: q.query_id.clone(),
                size: q.items.len(),
            }
            .into());
        }
    }
    let mrr = evalrank::mrr(rankings, labels, policy)?;
    let mean_logloss = if evalrank::submission_has_probabilities(rankings) {
        let mut y = Vec::new();
        let mut p = Vec::new();
        for q in rankings {
            for item in &q.items {
                // mrr has already checked every key.
                y.push(labels[&(q.query_id.clone(), item.product_id.clone())]);
                p.push(item.probability);
            }
        }
        Some(evalrank::logloss(&y, &p)?)
    } else {
        None
    };
    Ok(MetricReport {
        mean_logloss,
        mrr,
        n_queries: rankings.len(),
        n_rows: rankings.iter().map(|q| q.items.len()).sum(),
    })
}

/// Labels of every impression row that has one.
pub fn label_map(impressions: &[rankforge_core::ImpressionRow]) -> LabelMap {
    impressions
        .iter()
        .filter_map(|r| r.is_click.map(|c| ((r.query_id.clone(), r.product_id.clone()), c)))
        .collect()
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<MetricReport> {
    let sub = cfg.submission_path();
    let labels = cfg.labels_path();
    require(&sub, "submission")?;
    require(&labels, "labels")?;
    let rankings = evalrank::load_submission(&sub)?;
    let labels = label_map(&dataset::load_impressions(&labels)?);
    let report = evaluate_submission(&rankings, &labels, cfg.policy())?;
    if cfg.output_dir.is_dir() {
        write_json(&cfg.output_dir.join("evaluation.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    iteration: usize,
    fold: usize,
    train_logloss: f64,
    valid_logloss: Option<f64>,
}

/// Mean importance over the fold models, renormalized to sum to 100.
pub fn ensemble_importance(models: &[GbdtModel]) -> Vec<(String, f64)> {
    let mut total: Vec<(String, f64)> = Vec::new();
    for m in models {
        for (i, (name, v)) in m.feature_importance().into_iter().enumerate() {
            match total.get_mut(i) {
                Some(t) => t.1 += v,
                None => total.push((name, v)),
            }
        }
    }
    let sum: f64 = total.iter().map(|t| t.1).sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|t| t.1 *= 100.0 / sum);
    }
    total.sort_by(|a, b| b.1.total_cmp(&a.1));
    total
}

/// Feature importance table plus SVG charts of the loss curves, the
/// importances and, after a tune, the trial objectives.
pub fn cmd_plot(cfg: &RunConfig) -> Result<PlotOutput> {
    let dir = &cfg.output_dir;
    let curve_path = dir.join("losscurve.csv");
    require(&curve_path, "losscurve")?;
    let rows: Vec<CurveRow> = csv::Reader::from_path(&curve_path)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    let models = load_models(dir)?;
    let mut files = Vec::new();

    let importance = ensemble_importance(&models);
    let imp_path = dir.join("importance.csv");
    let mut w = csv::Writer::from_path(&imp_path)?;
    w.write_record(["feature", "importance"])?;
    for (name, v) in &importance {
        w.write_record([name.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    files.push(imp_path);

    // Mean over folds per iteration.
    let mut by_iter: BTreeMap<usize, (f64, f64, usize, usize)> = BTreeMap::new();
    for r in &rows {
        let e = by_iter.entry(r.iteration).or_default();
        e.0 += r.train_logloss;
        e.2 += 1;
        if let Some(v) = r.valid_logloss {
            e.1 += v;
            e.3 += 1;
        }
    }
    let train: Vec<(f64, f64)> = by_iter.iter().map(|(&i, e)| (i as f64, e.0 / e.2 as f64)).collect();
    let valid: Vec<(f64, f64)> = by_iter
        .iter()
        .filter(|(_, e)| e.3 > 0)
        .map(|(&i, e)| (i as f64, e.1 / e.3 as f64))
        .collect();
    let n_folds = rows.iter().map(|r| r.fold + 1).max().unwrap_or(0);
    let chart = svg::line_chart(
        &format!("Training and validation logloss ({n_folds} folds)"),
        "iteration",
        "logloss",
        &[("train".into(), train), ("validation".into(), valid)],
    );
    files.push(write_svg(dir, "losscurve.svg", &chart));

    let bars = svg::bar_chart("Feature importance", "share of split gain (%)", &importance);
    files.push(write_svg(dir, "importance.svg", &bars));

    let log = dir.join("trials.jsonl");
    if log.exists() {
        let trials = tpe::read_trial_log(&log)?;
        let mut best = f64::INFINITY;
        let mut objective = Vec::new();
        let mut running = Vec::new();
        for t in &trials {
            if let Some(v) = t.objective.filter(|v| v.is_finite()) {
                best = best.min(v);
                objective.push((t.number as f64, v));
            }
            if best.is_finite() {
                running.push((t.number as f64, best));
            }
        }
        let chart = svg::line_chart(
            "Out-of-fold logloss per trial",
            "trial",
            "logloss",
            &[("trial".into(), objective), ("best so far".into(), running)],
        );
        files.push(write_svg(dir, "trials.svg", &chart));
    }
    files.retain(|f| f.exists());
    Ok(PlotOutput { files })
}

/// SVG output is best effort: a failed write leaves the CSV tables intact.
fn write_svg(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    if let Err(e) = fs::write(&path, content) {
        eprintln!("warning: could not write {}: {e}", path.display());
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_lines_are_single_line_with_category() {
        let e = CliError::MissingInput {
            role: "products",
            path: "a\nb.csv".into(),
        };
        assert_eq!(e.category(), "MissingProduct");
        assert!(!e.line().contains('\n'));
        assert!(e.line().starts_with("error: MissingProduct: "));

        let e: CliError = Error::BadK(1).into();
        assert!(e.line().starts_with("error: BadK: "));
    }

    #[test]
    fn default_config_serializes_the_tuning_space() {
        let json = serde_json::to_value(RunConfig::default()).unwrap();
        let space = &json["search_space"];
        assert_eq!(space[0]["name"], "learning_rate");
        assert_eq!(space[0]["type"], "uniform");
        assert_eq!(space[0]["low"], 1e-3);
        assert_eq!(space[0]["high"], 0.5);
        assert_eq!(space[1]["name"], "l2_leaf_reg");
        assert_eq!(space[1]["type"], "qloguniform");
        assert_eq!(space[1]["low"], 0.0);
        assert_eq!(space[1]["high"], 2.0);
        assert_eq!(space[1]["q"], 1.0);
        let back: RunConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_typos() {
        let cfg: RunConfig = serde_json::from_str(r#"{"folds": 3, "gbdt": {"n_trees": 10}}"#).unwrap();
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.gbdt.n_trees, 10);
        assert_eq!(cfg.gbdt.learning_rate, 0.03);
        assert!(serde_json::from_str::<RunConfig>(r#"{"fold": 3}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = RunConfig {
            labels: Some("l.csv".into()),
            products: "/abs/p.csv".into(),
            ..Default::default()
        };
        cfg.resolve(Path::new("/cfg"));
        assert_eq!(cfg.impressions, Path::new("/cfg/impressions.csv"));
        assert_eq!(cfg.products, Path::new("/abs/p.csv"));
        assert_eq!(cfg.labels_path(), Path::new("/cfg/l.csv"));
        assert_eq!(cfg.submission_path(), Path::new("/cfg/run/submission.csv"));
    }

    #[test]
    fn seed_override_reaches_every_component() {
        let cfg = RunConfig::default().with_seed(42);
        assert_eq!(
            [cfg.generate.seed, cfg.gbdt.seed, cfg.cv_seed, cfg.tpe.seed],
            [42; 4]
        );
    }

    #[test]
    fn one_fold_is_rejected() {
        let cfg = RunConfig {
            folds: 1,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().category(), "BadK");
    }
}
