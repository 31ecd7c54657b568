//! Sequential model-based hyperparameter search with the Tree-structured
//! Parzen Estimator (TPE), plus plain random search as a baseline.
//!
//! TPE minimizes. After `n_startup` random trials it ranks the completed
//! trials, models the best `ceil(gamma * n)` with a density `l(x)` and the
//! rest with `g(x)`, draws `n_candidates` points from `l` and proposes the
//! one with the largest `l(x) / g(x)`. Dimensions are modelled
//! independently; a candidate's score is the sum of per-dimension log ratios.

mod parzen;
mod space;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use parzen::Parzen;
pub use space::{Dimension, NamedDimension, Point, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    /// Random trials before the densities are used.
    pub n_startup: usize,
    /// Fraction of completed trials treated as good.
    pub gamma: f64,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup: 20,
            gamma: 0.25,
            n_candidates: 24,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup == 0 || self.n_candidates == 0 {
            return Err(Error::InvalidParam(
                "n_startup and n_candidates must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParam("gamma must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub number: usize,
    pub point: Point,
    /// Finite for complete trials, `None` for failed ones.
    pub objective: Option<f64>,
    pub status: TrialStatus,
}

impl Trial {
    pub fn new(number: usize, point: Point, objective: Option<f64>) -> Self {
        match objective.filter(|v| v.is_finite()) {
            Some(v) => Trial {
                number,
                point,
                objective: Some(v),
                status: TrialStatus::Complete,
            },
            None => Trial {
                number,
                point,
                objective: None,
                status: TrialStatus::Failed,
            },
        }
    }

    fn value(&self) -> Option<f64> {
        match self.status {
            TrialStatus::Complete => self.objective,
            TrialStatus::Failed => None,
        }
    }
}

/// Completed trials split into the best `ceil(gamma * n)` and the rest.
/// Ties in the objective keep trial order.
pub fn split_trials(history: &[Trial], gamma: f64) -> (Vec<&Trial>, Vec<&Trial>) {
    let mut done: Vec<&Trial> = history.iter().filter(|t| t.value().is_some()).collect();
    done.sort_by(|a, b| a.value().unwrap().total_cmp(&b.value().unwrap()));
    let n_good = ((gamma * done.len() as f64).ceil() as usize).min(done.len());
    let bad = done.split_off(n_good);
    (done, bad)
}

fn suggestion_rng(seed: u64, n_history: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (n_history as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Proposes the next point to evaluate. Pure in its arguments.
pub fn suggest(history: &[Trial], space: &SearchSpace, cfg: &TpeConfig) -> Point {
    let mut rng = suggestion_rng(cfg.seed, history.len());
    let n_complete = history.iter().filter(|t| t.value().is_some()).count();
    if n_complete < cfg.n_startup || space.dims.is_empty() {
        return space.sample_prior(&mut rng);
    }
    let (good, bad) = split_trials(history, cfg.gamma);

    let models: Vec<(Parzen, Parzen)> = space
        .dims
        .iter()
        .map(|d| {
            let (low, high) = d.dimension.model_bounds();
            let obs = |set: &[&Trial]| -> Vec<f64> {
                set.iter()
                    .filter_map(|t| t.point.get(&d.name))
                    .map(|&x| d.dimension.value_to_model(x))
                    .collect()
            };
            (
                Parzen::new(&obs(&good), low, high, 1.0),
                Parzen::new(&obs(&bad), low, high, 1.0),
            )
        })
        .collect();

    let mut best: Option<(f64, Point)> = None;
    for _ in 0..cfg.n_candidates {
        let mut point = Point::new();
        let mut score = 0.0;
        for (d, (l, g)) in space.dims.iter().zip(&models) {
            let u = l.sample(&mut rng);
            let x = d.dimension.model_to_value(u);
            score += match d.dimension {
                Dimension::Uniform { .. } => l.log_pdf(x) - g.log_pdf(x),
                Dimension::QLogUniform { q, .. } => {
                    let a = (x - 0.5 * q).max(f64::MIN_POSITIVE).ln();
                    let b = (x + 0.5 * q).ln();
                    l.log_mass(a, b) - g.log_mass(a, b)
                }
            };
            point.insert(d.name.clone(), x);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, point));
        }
    }
    best.map(|(_, p)| p).expect("n_candidates is positive")
}

/// Ask/tell driver over a growing trial history.
#[derive(Debug, Clone)]
pub struct Study {
    pub space: SearchSpace,
    pub config: TpeConfig,
    pub trials: Vec<Trial>,
}

impl Study {
    pub fn new(space: SearchSpace, config: TpeConfig) -> Result<Self> {
        Self::resume(space, config, Vec::new())
    }

    /// Continues from earlier trials; new trials are numbered after them.
    pub fn resume(space: SearchSpace, config: TpeConfig, trials: Vec<Trial>) -> Result<Self> {
        space.validate()?;
        config.validate()?;
        Ok(Study {
            space,
            config,
            trials,
        })
    }

    pub fn ask(&self) -> Point {
        suggest(&self.trials, &self.space, &self.config)
    }

    pub fn tell(&mut self, point: Point, objective: Option<f64>) -> &Trial {
        let number = self.trials.iter().map(|t| t.number + 1).max().unwrap_or(0);
        self.trials.push(Trial::new(number, point, objective));
        self.trials.last().unwrap()
    }

    pub fn best(&self) -> Option<&Trial> {
        best_trial(&self.trials)
    }
}

/// Complete trial with the lowest objective; the earliest wins ties.
pub fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| t.value().is_some())
        .fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if b.value() <= t.value() => Some(b),
            _ => Some(t),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub best_point: Point,
    pub best_value: f64,
    pub trials: Vec<Trial>,
}

impl Optimum {
    fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        let best = best_trial(&trials).ok_or(Error::AllTrialsFailed)?;
        Ok(Optimum {
            best_point: best.point.clone(),
            best_value: best.objective.expect("complete trial"),
            trials,
        })
    }
}

/// Runs `n_trials` TPE trials. `objective` returns `None` (or a non-finite
/// value) for a failed evaluation.
pub fn minimize<F>(objective: F, space: &SearchSpace, n_trials: usize, cfg: &TpeConfig) -> Result<Optimum>
where
    F: FnMut(&Point) -> Option<f64>,
{
    let mut study = Study::new(space.clone(), cfg.clone())?;
    run_study(&mut study, objective, n_trials, |_| Ok(()))?;
    Optimum::from_trials(study.trials)
}

/// Extends `study` until it holds `n_trials` trials, calling `on_trial`
/// after each new one.
pub fn run_study<F, C>(study: &mut Study, mut objective: F, n_trials: usize, mut on_trial: C) -> Result<()>
where
    F: FnMut(&Point) -> Option<f64>,
    C: FnMut(&Trial) -> Result<()>,
{
    while study.trials.len() < n_trials {
        let point = study.ask();
        let value = objective(&point);
        let trial = study.tell(point, value);
        on_trial(trial)?;
    }
    Ok(())
}

/// Baseline: `n_trials` independent draws from the prior.
pub fn random_search<F>(mut objective: F, space: &SearchSpace, n_trials: usize, seed: u64) -> Result<Optimum>
where
    F: FnMut(&Point) -> Option<f64>,
{
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = (0..n_trials)
        .map(|number| {
            let point = space.sample_prior(&mut rng);
            let value = objective(&point);
            Trial::new(number, point, value)
        })
        .collect();
    Optimum::from_trials(trials)
}

#[derive(Serialize, Deserialize)]
struct TrialRecord {
    #[serde(flatten)]
    trial: Trial,
    timestamp: u64,
}

/// Appends one JSON line for `trial`, stamped with the current Unix time.
pub fn append_trial_log(path: impl AsRef<Path>, trial: &Trial) -> Result<()> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(&TrialRecord {
        trial: trial.clone(),
        timestamp,
    })?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn read_trial_log(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord = serde_json::from_str(&line)?;
        trials.push(rec.trial);
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> SearchSpace {
        SearchSpace::new([("x", Dimension::Uniform { low: 0.0, high: 1.0 })]).unwrap()
    }

    fn quad(p: &Point) -> Option<f64> {
        Some((p["x"] - 0.3).powi(2))
    }

    fn grid_oracle_min() -> f64 {
        (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .min_by(|a, b| (a - 0.3).powi(2).total_cmp(&(b - 0.3).powi(2)))
            .unwrap()
    }

    #[test]
    fn empty_history_samples_prior() {
        let space = SearchSpace::gbdt_default();
        let p = suggest(&[], &space, &TpeConfig::default());
        assert!(space.contains(&p));
        assert!((1e-3..=5e-1).contains(&p["learning_rate"]));
    }

    #[test]
    fn quantile_split_sizes() {
        let trials: Vec<Trial> = (0..8)
            .map(|i| Trial::new(i, Point::new(), Some((7 - i) as f64)))
            .collect();
        let (good, bad) = split_trials(&trials, 0.25);
        assert_eq!(good.len(), 2);
        assert_eq!(bad.len(), 6);
        let worst_good = good.iter().map(|t| t.objective.unwrap()).fold(f64::MIN, f64::max);
        let best_bad = bad.iter().map(|t| t.objective.unwrap()).fold(f64::MAX, f64::min);
        assert!(worst_good <= best_bad);
    }

    #[test]
    fn failed_trials_are_not_modelled() {
        let mut trials: Vec<Trial> = (0..4).map(|i| Trial::new(i, Point::new(), Some(i as f64))).collect();
        trials.push(Trial::new(4, Point::new(), None));
        trials.push(Trial::new(5, Point::new(), Some(f64::NAN)));
        assert_eq!(trials[5].status, TrialStatus::Failed);
        let (good, bad) = split_trials(&trials, 0.5);
        assert_eq!(good.len() + bad.len(), 4);
    }

    #[test]
    fn converges_on_quadratic() {
        let oracle = grid_oracle_min();
        assert!((oracle - 0.3).abs() < 1e-12);
        let cfg = TpeConfig {
            seed: 11,
            ..Default::default()
        };
        let opt = minimize(quad, &unit(), 50, &cfg).unwrap();
        assert_eq!(opt.trials.len(), 50);
        assert!((opt.best_point["x"] - oracle).abs() < 0.05, "{:?}", opt.best_point);
    }

    #[test]
    fn constant_objective() {
        let opt = minimize(|_| Some(4.5), &unit(), 10, &TpeConfig::default()).unwrap();
        assert_eq!(opt.best_value, 4.5);
        let opt = random_search(|_| Some(4.5), &unit(), 10, 0).unwrap();
        assert_eq!(opt.best_value, 4.5);
    }

    #[test]
    fn single_trial() {
        let opt = minimize(quad, &unit(), 1, &TpeConfig::default()).unwrap();
        assert_eq!(opt.trials.len(), 1);
        assert_eq!(opt.best_point, opt.trials[0].point);
        let opt = random_search(quad, &unit(), 1, 3).unwrap();
        assert_eq!(opt.best_point, opt.trials[0].point);
    }

    #[test]
    fn all_failed() {
        assert!(matches!(
            minimize(|_| None, &unit(), 5, &TpeConfig::default()),
            Err(Error::AllTrialsFailed)
        ));
        assert!(matches!(
            random_search(|_| None, &unit(), 5, 0),
            Err(Error::AllTrialsFailed)
        ));
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = TpeConfig {
            seed: 5,
            n_startup: 5,
            ..Default::default()
        };
        let space = SearchSpace::gbdt_default();
        let f = |p: &Point| Some((p["learning_rate"] - 0.17).powi(2) + (p["l2_leaf_reg"] - 2.0).abs());
        assert_eq!(minimize(f, &space, 30, &cfg).unwrap(), minimize(f, &space, 30, &cfg).unwrap());
        assert_eq!(random_search(f, &space, 30, 9).unwrap(), random_search(f, &space, 30, 9).unwrap());
    }

    #[test]
    fn resumed_study_continues_numbering() {
        let cfg = TpeConfig {
            n_startup: 3,
            ..Default::default()
        };
        let mut study = Study::new(unit(), cfg.clone()).unwrap();
        run_study(&mut study, quad, 4, |_| Ok(())).unwrap();
        let mut resumed = Study::resume(unit(), cfg, study.trials.clone()).unwrap();
        run_study(&mut resumed, quad, 7, |_| Ok(())).unwrap();
        let numbers: Vec<usize> = resumed.trials.iter().map(|t| t.number).collect();
        assert_eq!(numbers, (0..7).collect::<Vec<_>>());
        assert_eq!(resumed.trials[..4], study.trials[..]);
    }

    #[test]
    fn trial_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let opt = minimize(quad, &unit(), 6, &TpeConfig::default()).unwrap();
        for t in &opt.trials {
            append_trial_log(&path, t).unwrap();
        }
        append_trial_log(&path, &Trial::new(6, Point::new(), None)).unwrap();
        let back = read_trial_log(&path).unwrap();
        assert_eq!(&back[..6], &opt.trials[..]);
        assert_eq!(back[6].status, TrialStatus::Failed);
        let first = std::fs::read_to_string(&path).unwrap();
        let first = first.lines().next().unwrap();
        for key in ["\"number\"", "\"point\"", "\"objective\"", "\"status\":\"complete\"", "\"timestamp\""] {
            assert!(first.contains(key), "{first}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn suggestions_stay_in_support(seed in any::<u64>(), n in 0usize..40) {
            let space = SearchSpace::gbdt_default();
            let cfg = TpeConfig { seed, n_startup: 5, ..Default::default() };
            let mut study = Study::new(space.clone(), cfg).unwrap();
            let f = |p: &Point| Some(p["learning_rate"] * p["l2_leaf_reg"]);
            run_study(&mut study, f, n, |_| Ok(())).unwrap();
            let next = study.ask();
            prop_assert!(space.contains(&next), "{:?}", next);
            prop_assert_eq!(next, study.ask());
        }
    }
}
