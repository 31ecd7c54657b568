//! Gradient-boosted oblivious decision trees for click probability.
//!
//! Categorical features enter the trees through ordered target statistics
//! ([`ordered_ts`]): during training each tree sees encodings computed over
//! one of several random permutations, so no row is encoded with its own
//! label. At prediction time categories are encoded from the statistics of
//! the full training set.
//!
//! Every tree is oblivious: all nodes of a level share one split, so a row's
//! leaf is the bit vector of its per-level split outcomes.

mod binning;
pub mod loss;
pub mod ordered_ts;
mod train;

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

pub use loss::{logloss_grad, sigmoid, GradientPair};
pub use ordered_ts::{blocked_target_statistics, ordered_target_statistics, CategoryStat, CategoryTable};
pub use train::{fit, fit_with_eval, TrainingHistory};

/// Version written into every serialized model.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub learning_rate: f64,
    /// L2 coefficient added to the hessian sum of every leaf.
    pub l2_leaf_reg: f64,
    pub n_trees: usize,
    /// Upper bound on tree depth. Depth 0 trees are a single leaf.
    pub max_depth: usize,
    /// Histogram resolution for continuous split candidates.
    pub n_bins: usize,
    /// Histogram resolution for target-statistic encodings of categorical
    /// columns.
    pub ts_bins: usize,
    /// Pseudo-count `a` of the target-statistic prior.
    pub prior_weight: f64,
    /// Pseudo-mean `p` of the target-statistic prior. `None` uses the
    /// training positive rate.
    pub prior: Option<f64>,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            l2_leaf_reg: 3.0,
            n_trees: 500,
            max_depth: 6,
            n_bins: 255,
            ts_bins: 16,
            prior_weight: 1.0,
            prior: None,
            n_permutations: 4,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_owned()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_leaf_reg.is_finite() && self.l2_leaf_reg >= 0.0) {
            return bad("l2_leaf_reg must be non-negative");
        }
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth > 16 {
            return bad("max_depth must be at most 16");
        }
        if !(1..=usize::from(u16::MAX)).contains(&self.n_bins) {
            return bad("n_bins must lie in 1..=65535");
        }
        if !(1..=usize::from(u16::MAX)).contains(&self.ts_bins) {
            return bad("ts_bins must lie in 1..=65535");
        }
        if !(self.prior_weight.is_finite() && self.prior_weight > 0.0) {
            return bad("prior_weight must be positive");
        }
        if let Some(p) = self.prior {
            if !(p > 0.0 && p < 1.0) {
                return bad("prior must lie in (0, 1)");
            }
        }
        if self.n_permutations == 0 {
            return bad("n_permutations must be positive");
        }
        Ok(())
    }
}

/// Column of a [`FeatureMatrix`] used by a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Categorical(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: Feature,
    /// Rows with value `> threshold` take the 1-branch of this level.
    pub threshold: f64,
    /// Loss reduction achieved when the split was chosen.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousTree {
    /// One split per level, root first.
    pub splits: Vec<Split>,
    /// `2^depth` log-odds increments.
    pub leaves: Vec<f64>,
}

impl ObliviousTree {
    pub fn depth(&self) -> usize {
        self.splits.len()
    }

    /// Leaf of a row: bit `l` is set when the row goes right at level `l`.
    pub fn leaf_index(&self, value: impl Fn(Feature) -> f64) -> usize {
        self.splits
            .iter()
            .enumerate()
            .fold(0, |idx, (level, s)| {
                idx | (usize::from(value(s.feature) > s.threshold) << level)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub params: GbdtParams,
    /// Initial log-odds, `ln(pos / neg)` of the training labels.
    pub base_score: f64,
    pub trees: Vec<ObliviousTree>,
    pub categorical_names: Vec<String>,
    pub continuous_names: Vec<String>,
    /// Full-training-set label statistics per categorical column.
    pub category_stats: Vec<CategoryTable>,
    /// Target-statistic prior `p` actually used.
    pub prior: f64,
    /// Fingerprint of the encoder the training matrix came from.
    pub provenance: String,
}

impl GbdtModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// The same model restricted to its first `n` trees.
    pub fn truncated(&self, n: usize) -> GbdtModel {
        GbdtModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    fn check_compatible(&self, x: &FeatureMatrix) -> Result<()> {
        if x.provenance != self.provenance {
            return Err(Error::EncoderMismatch {
                expected: self.provenance.clone(),
                found: x.provenance.clone(),
            });
        }
        if x.categorical_names != self.categorical_names
            || x.continuous_names != self.continuous_names
        {
            return Err(Error::EncoderMismatch {
                expected: self.feature_names().join(","),
                found: x.feature_names().join(","),
            });
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.categorical_names
            .iter()
            .chain(&self.continuous_names)
            .cloned()
            .collect()
    }

    /// Categorical columns mapped through the full-data target statistics.
    pub(crate) fn encode_categoricals(&self, x: &FeatureMatrix) -> Vec<Vec<f64>> {
        let a = self.params.prior_weight;
        x.categorical
            .iter()
            .zip(&self.category_stats)
            .map(|(col, table)| col.iter().map(|&c| table.encode(c, a, self.prior)).collect())
            .collect()
    }

    /// Raw log-odds scores.
    pub fn predict_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_compatible(x)?;
        let cats = self.encode_categoricals(x);
        let mut scores = vec![self.base_score; x.n_rows()];
        for tree in &self.trees {
            add_tree(tree, &cats, &x.continuous, &mut scores);
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.predict_scores(x)?.into_iter().map(sigmoid).collect())
    }

    /// Total split gain per feature, normalized to sum to 100. A model
    /// without splits reports zeros.
    pub fn feature_importance(&self) -> IndexMap<String, f64> {
        let n_cat = self.categorical_names.len();
        let mut gains = vec![0.0; n_cat + self.continuous_names.len()];
        for s in self.trees.iter().flat_map(|t| &t.splits) {
            let idx = match s.feature {
                Feature::Categorical(i) => i,
                Feature::Continuous(i) => n_cat + i,
            };
            gains[idx] += s.gain;
        }
        let total: f64 = gains.iter().sum();
        if total > 0.0 {
            gains.iter_mut().for_each(|g| *g *= 100.0 / total);
        }
        self.feature_names().into_iter().zip(gains).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(s)?;
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(header.format_version));
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub(crate) fn add_tree(
    tree: &ObliviousTree,
    cats: &[Vec<f64>],
    conts: &[Vec<f64>],
    scores: &mut [f64],
) {
    for (r, s) in scores.iter_mut().enumerate() {
        let leaf = tree.leaf_index(|f| match f {
            Feature::Categorical(i) => cats[i][r],
            Feature::Continuous(i) => conts[i][r],
        });
        *s += tree.leaves[leaf];
    }
}
