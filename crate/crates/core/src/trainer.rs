//! Stratified K-fold training, fold-ensemble prediction and the tuning loop.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalrank::{self, MetricReport, ScoredRow, ZeroClickPolicy};
use crate::gbdt::{fit_with_eval, GbdtModel, GbdtParams, TrainingHistory};
use crate::preprocess::FeatureMatrix;
use crate::tpe::{run_study, Point, SearchSpace, Study, TpeConfig, Trial};

/// Assignment of every row to one of `k` validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold of each row, `0..k`.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] == fold)
            .collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&r| self.assignment[r] != fold)
            .collect()
    }
}

/// Positives and negatives are shuffled separately, then dealt round-robin
/// (positives first), so fold sizes and per-fold positive counts each
/// differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > labels.len() {
        return Err(Error::BadK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] != 1).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignment = vec![0; labels.len()];
    for (i, r) in pos.into_iter().chain(neg).enumerate() {
        assignment[r] = i % k;
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}

/// Stratified folds that never split a group (query) across folds.
///
/// Groups are shuffled, ordered by their positive count (stable) and dealt
/// round-robin, so group counts per fold differ by at most one, and so do
/// positive counts when every group holds at most one positive. Splitting a
/// query's rows across folds would let per-query categoricals such as
/// `session_id` leak the held-out click through their target statistics.
pub fn stratified_group_kfold(labels: &[u8], groups: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if groups.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: groups.len(),
        });
    }
    let mut index: IndexMap<&str, usize> = IndexMap::new();
    let mut positives: Vec<usize> = Vec::new();
    let row_group: Vec<usize> = groups
        .iter()
        .zip(labels)
        .map(|(g, &l)| {
            let next = index.len();
            let gi = *index.entry(g.as_str()).or_insert(next);
            if gi == positives.len() {
                positives.push(0);
            }
            positives[gi] += usize::from(l == 1);
            gi
        })
        .collect();
    if k < 2 || k > index.len() {
        return Err(Error::BadK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..index.len()).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&g| std::cmp::Reverse(positives[g]));
    let mut fold_of = vec![0; order.len()];
    for (i, g) in order.into_iter().enumerate() {
        fold_of[g] = i % k;
    }
    Ok(FoldPlan {
        k,
        assignment: row_group.into_iter().map(|g| fold_of[g]).collect(),
        seed,
    })
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// One model per fold, in fold order.
    pub models: Vec<GbdtModel>,
    /// Per-tree train/validation loss of each fold model.
    pub histories: Vec<TrainingHistory>,
    /// Out-of-fold click probability of every row.
    pub oof: Vec<f64>,
    pub plan: FoldPlan,
    /// Logloss and MRR of the out-of-fold predictions.
    pub report: MetricReport,
}

pub fn cv_train(x: &FeatureMatrix, params: &GbdtParams, k: usize, seed: u64) -> Result<CvResult> {
    let y = x.labels.as_deref().ok_or(Error::Unlabeled)?;
    let plan = stratified_group_kfold(y, &x.groups, k, seed)?;
    cv_train_with_plan(x, params, &plan, ZeroClickPolicy::default())
}

/// Trains one model per fold of `plan`; folds run in parallel.
pub fn cv_train_with_plan(
    x: &FeatureMatrix,
    params: &GbdtParams,
    plan: &FoldPlan,
    policy: ZeroClickPolicy,
) -> Result<CvResult> {
    let y = x.labels.as_deref().ok_or(Error::Unlabeled)?;
    if plan.assignment.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            expected: x.n_rows(),
            found: plan.assignment.len(),
        });
    }
    let folds: Vec<(GbdtModel, TrainingHistory, Vec<usize>, Vec<f64>)> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let train_rows = plan.training_rows(fold);
            let valid_rows = plan.validation_rows(fold);
            let valid = x.select_rows(&valid_rows);
            let (model, history) = fit_with_eval(&x.select_rows(&train_rows), params, Some(&valid))?;
            let p = model.predict_proba(&valid)?;
            Ok((model, history, valid_rows, p))
        })
        .collect::<Result<_>>()?;

    let mut oof = vec![f64::NAN; x.n_rows()];
    let mut models = Vec::with_capacity(plan.k);
    let mut histories = Vec::with_capacity(plan.k);
    for (model, history, rows, p) in folds {
        for (r, v) in rows.into_iter().zip(p) {
            oof[r] = v;
        }
        models.push(model);
        histories.push(history);
    }
    let report = evalrank::evaluate(&scored_rows(x, &oof), y, policy)?;
    Ok(CvResult {
        models,
        histories,
        oof,
        plan: plan.clone(),
        report,
    })
}

/// Pairs each row's group and item ids with a probability.
pub fn scored_rows(x: &FeatureMatrix, probabilities: &[f64]) -> Vec<ScoredRow> {
    x.groups
        .iter()
        .zip(&x.items)
        .zip(probabilities)
        .map(|((q, p), &probability)| ScoredRow {
            query_id: q.clone(),
            product_id: p.clone(),
            probability,
        })
        .collect()
}

/// Mean of the fold models' probabilities.
pub fn predict_ensemble(models: &[GbdtModel], x: &FeatureMatrix) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::InvalidParam("no models to ensemble".into()));
    }
    let mut sum = vec![0.0; x.n_rows()];
    for m in models {
        for (s, p) in sum.iter_mut().zip(m.predict_proba(x)?) {
            *s += p;
        }
    }
    let k = models.len() as f64;
    Ok(sum.into_iter().map(|s| s / k).collect())
}

/// Names a search space may use, beyond `learning_rate` and `l2_leaf_reg`.
pub const EXTRA_TUNABLES: [&str; 4] = ["n_trees", "max_depth", "n_bins", "prior_weight"];

/// `base` with the values of `point` substituted.
pub fn apply_point(base: &GbdtParams, point: &Point) -> Result<GbdtParams> {
    let mut p = base.clone();
    for (name, &v) in point {
        let count = || v.round().max(0.0) as usize;
        match name.as_str() {
            "learning_rate" => p.learning_rate = v,
            "l2_leaf_reg" => p.l2_leaf_reg = v,
            "n_trees" => p.n_trees = count(),
            "max_depth" => p.max_depth = count(),
            "n_bins" => p.n_bins = count(),
            "prior_weight" => p.prior_weight = v,
            other => return Err(Error::InvalidParam(format!("unknown tunable parameter {other}"))),
        }
    }
    Ok(p)
}

fn check_space(space: &SearchSpace, base: &GbdtParams) -> Result<()> {
    let probe: Point = space
        .dims
        .iter()
        .map(|d| (d.name.clone(), d.dimension.model_bounds().0))
        .collect();
    apply_point(base, &probe).map(|_| ())
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub best_params: GbdtParams,
    pub best_value: f64,
    pub trials: Vec<Trial>,
}

/// Minimizes out-of-fold logloss over `space` with TPE. Every trial uses
/// the same fold plan; failed fits count as failed trials.
pub fn tune(
    x: &FeatureMatrix,
    space: &SearchSpace,
    n_trials: usize,
    plan: &FoldPlan,
    cfg: &TpeConfig,
    base: &GbdtParams,
) -> Result<TuneOutcome> {
    let mut study = Study::new(space.clone(), cfg.clone())?;
    tune_study(x, &mut study, n_trials, plan, base, |_| Ok(()))
}

/// Like [`tune`], but extends an existing study (possibly resumed from a
/// trial log) until it holds `n_trials` trials.
pub fn tune_study<C>(
    x: &FeatureMatrix,
    study: &mut Study,
    n_trials: usize,
    plan: &FoldPlan,
    base: &GbdtParams,
    on_trial: C,
) -> Result<TuneOutcome>
where
    C: FnMut(&Trial) -> Result<()>,
{
    check_space(&study.space, base)?;
    let objective = |point: &Point| {
        let params = apply_point(base, point).ok()?;
        let cv = cv_train_with_plan(x, &params, plan, ZeroClickPolicy::default()).ok()?;
        cv.report.mean_logloss
    };
    run_study(study, objective, n_trials, on_trial)?;
    let best = study.best().ok_or(Error::AllTrialsFailed)?;
    Ok(TuneOutcome {
        best_params: apply_point(base, &best.point)?,
        best_value: best.objective.expect("complete trial"),
        trials: study.trials.clone(),
    })
}
