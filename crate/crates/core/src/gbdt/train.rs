use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binning::{bin_values, quantile_cuts};
use super::loss::{logloss_grad, score_logloss};
use super::ordered_ts::{blocked_target_statistics, CategoryTable};
use super::{add_tree, Feature, GbdtModel, GbdtParams, ObliviousTree, Split, MODEL_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;

/// Splits must reduce the loss by more than this.
const MIN_GAIN: f64 = 1e-10;
/// Leaf steps that fail to lower their leaf's loss are halved at most this
/// many times before being dropped.
const MAX_HALVINGS: usize = 40;

/// Mean logloss after each tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    /// Loss of the running training scores, one entry per tree.
    pub train_logloss: Vec<f64>,
    /// Loss on the evaluation matrix, empty when none was given.
    pub valid_logloss: Vec<f64>,
}

pub fn fit(x: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel> {
    fit_with_eval(x, params, None).map(|(m, _)| m)
}

/// Binned view of one feature under one permutation.
struct BinnedFeature<'a> {
    bins: &'a [u16],
    cuts: &'a [f64],
}

/// Trains on `x`, tracking the loss per tree on `x` and optionally `eval`.
///
/// Categorical columns are encoded with ordered target statistics over
/// `n_permutations` seeded permutations of the row groups (queries), so a
/// row never sees labels from its own query; tree `t` uses permutation
/// `t % n_permutations` both to choose its splits and to update the training
/// scores. Evaluation rows are encoded with full-training-set statistics, as
/// at prediction time.
pub fn fit_with_eval(
    x: &FeatureMatrix,
    params: &GbdtParams,
    eval: Option<&FeatureMatrix>,
) -> Result<(GbdtModel, TrainingHistory)> {
    params.validate()?;
    let y = x.labels.as_deref().ok_or(Error::Unlabeled)?;
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::EmptyMatrix);
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }
    let prior = params.prior.unwrap_or(pos as f64 / n as f64);
    let a = params.prior_weight;
    let base_score = (pos as f64 / (n - pos) as f64).ln();

    let mut groups: IndexMap<&str, Vec<usize>> = IndexMap::new();
    for (r, g) in x.groups.iter().enumerate() {
        groups.entry(g.as_str()).or_default().push(r);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let permutations: Vec<Vec<Vec<usize>>> = (0..params.n_permutations)
        .map(|_| {
            let mut p = groups.clone();
            p.shuffle(&mut rng);
            p
        })
        .collect();

    let n_cat = x.categorical.len();
    let n_features = x.n_features();

    let cont_cuts: Vec<Vec<f64>> = x
        .continuous
        .par_iter()
        .map(|c| quantile_cuts(c, params.n_bins))
        .collect();
    let cont_bins: Vec<Vec<u16>> = x
        .continuous
        .par_iter()
        .zip(&cont_cuts)
        .map(|(c, cuts)| bin_values(c, cuts))
        .collect();

    // [permutation][categorical feature]
    let cat_binned: Vec<Vec<(Vec<f64>, Vec<u16>)>> = permutations
        .par_iter()
        .map(|perm| {
            x.categorical
                .par_iter()
                .map(|col| {
                    let ts = blocked_target_statistics(col, y, perm, a, prior)?;
                    let cuts = quantile_cuts(&ts, params.ts_bins);
                    let bins = bin_values(&ts, &cuts);
                    Ok((cuts, bins))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let category_stats: Vec<CategoryTable> = x
        .categorical
        .iter()
        .map(|col| CategoryTable::from_column(col, y))
        .collect();

    let mut model = GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        params: params.clone(),
        base_score,
        trees: Vec::with_capacity(params.n_trees),
        categorical_names: x.categorical_names.clone(),
        continuous_names: x.continuous_names.clone(),
        category_stats,
        prior,
        provenance: x.provenance.clone(),
    };

    let eval_data = match eval {
        Some(e) => {
            model.check_compatible(e)?;
            let labels = e.labels.as_deref().ok_or(Error::Unlabeled)?;
            Some((model.encode_categoricals(e), &e.continuous, labels))
        }
        None => None,
    };
    let mut eval_scores = vec![base_score; eval.map_or(0, FeatureMatrix::n_rows)];

    let mut scores = vec![base_score; n];
    // Per-row training loss at `scores`, and scratch for a candidate tree.
    let mut row_loss: Vec<f64> = y.iter().map(|&l| score_logloss(l, base_score)).collect();
    let mut trial_loss = vec![0.0; n];
    let mut loss_sum: f64 = row_loss.iter().sum();
    let mut history = TrainingHistory::default();
    let mut leaf = vec![0u32; n];
    let mut grads = vec![(0.0, 0.0); n];
    // Histogram buffers, reused across levels and trees.
    let mut hists: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_features];
    let mut spare: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_features];

    for t in 0..params.n_trees {
        let perm = t % params.n_permutations;
        let feature = |f: usize| -> BinnedFeature<'_> {
            if f < n_cat {
                let (cuts, bins) = &cat_binned[perm][f];
                BinnedFeature { bins, cuts }
            } else {
                BinnedFeature {
                    bins: &cont_bins[f - n_cat],
                    cuts: &cont_cuts[f - n_cat],
                }
            }
        };

        for (gh, (&l, &s)) in grads.iter_mut().zip(y.iter().zip(&scores)) {
            let gp = logloss_grad(l, s);
            *gh = (gp.g, gp.h);
        }
        leaf.fill(0);

        // Rows of each current leaf, and per-feature histograms laid out
        // bin-major (`hist[bin * n_leaves + leaf]`).
        let mut members: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
        hists
            .par_iter_mut()
            .enumerate()
            .for_each(|(f, hist)| root_histogram(feature(f).bins, feature(f).cuts.len(), &grads, hist));

        let mut splits = Vec::new();
        for level in 0..params.max_depth {
            let n_leaves = 1usize << level;
            let mut totals = vec![(0.0, 0.0); n_leaves];
            for (&l, &(g, h)) in leaf.iter().zip(&grads) {
                let t = &mut totals[l as usize];
                t.0 += g;
                t.1 += h;
            }
            let parent: f64 = totals
                .iter()
                .map(|&(g, h)| leaf_score(g, h, params.l2_leaf_reg))
                .sum();

            let candidates: Vec<Option<(f64, usize)>> = hists
                .par_iter()
                .enumerate()
                .map(|(f, hist)| {
                    best_threshold(
                        hist,
                        feature(f).cuts.len(),
                        &totals,
                        parent,
                        params.l2_leaf_reg,
                    )
                })
                .collect();
            let best = candidates
                .iter()
                .enumerate()
                .filter_map(|(f, c)| c.map(|(gain, j)| (f, gain, j)))
                .fold(None, |best: Option<(usize, f64, usize)>, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                });
            let Some((f, gain, j)) = best.filter(|b| b.1 > MIN_GAIN) else {
                break;
            };
            let bf = feature(f);
            for (l, &b) in leaf.iter_mut().zip(bf.bins) {
                if usize::from(b) > j {
                    *l |= 1 << level;
                }
            }
            if level + 1 < params.max_depth {
                let bit = 1usize << level;
                let mut next = vec![Vec::new(); 2 * n_leaves];
                for (l, rows) in members.iter().enumerate() {
                    let (low, high): (Vec<u32>, Vec<u32>) =
                        rows.iter().partition(|&&r| usize::from(bf.bins[r as usize]) <= j);
                    next[l] = low;
                    next[l | bit] = high;
                }
                members = next;
                spare
                    .par_iter_mut()
                    .zip(&hists)
                    .enumerate()
                    .for_each(|(f, (out, hist))| {
                        child_histogram(hist, feature(f).bins, feature(f).cuts.len(), &members, &grads, level, out)
                    });
                std::mem::swap(&mut hists, &mut spare);
            }
            splits.push(Split {
                feature: if f < n_cat {
                    Feature::Categorical(f)
                } else {
                    Feature::Continuous(f - n_cat)
                },
                threshold: bf.cuts[j],
                gain,
            });
        }

        let n_leaves = 1usize << splits.len();
        let mut sums = vec![(0.0, 0.0); n_leaves];
        for (&l, &(g, h)) in leaf.iter().zip(&grads) {
            sums[l as usize].0 += g;
            sums[l as usize].1 += h;
        }
        let mut leaves: Vec<f64> = sums
            .iter()
            .map(|&(g, h)| leaf_value(g, h, params.l2_leaf_reg, params.learning_rate))
            .collect();
        backtrack_leaves(&leaf, y, &scores, &row_loss, &mut leaves, &mut trial_loss);

        let new_sum: f64 = trial_loss.iter().sum();
        if new_sum > loss_sum {
            leaves.fill(0.0);
        } else {
            for (s, &lf) in scores.iter_mut().zip(&leaf) {
                *s += leaves[lf as usize];
            }
            std::mem::swap(&mut row_loss, &mut trial_loss);
            loss_sum = new_sum;
        }
        history.train_logloss.push(loss_sum / n as f64);

        let tree = ObliviousTree { splits, leaves };
        if let Some((cats, conts, labels)) = &eval_data {
            add_tree(&tree, cats, conts, &mut eval_scores);
            history
                .valid_logloss
                .push(total_loss(labels, &eval_scores) / labels.len().max(1) as f64);
        }
        model.trees.push(tree);
    }
    Ok((model, history))
}

fn total_loss(y: &[u8], scores: &[f64]) -> f64 {
    y.iter().zip(scores).map(|(&l, &s)| score_logloss(l, s)).sum()
}

fn leaf_score(g: f64, h: f64, l2: f64) -> f64 {
    let d = h + l2;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

/// Newton step `-G / (H + l2)` scaled by the learning rate.
pub(crate) fn leaf_value(g: f64, h: f64, l2: f64, learning_rate: f64) -> f64 {
    let d = h + l2;
    if d > 0.0 {
        -learning_rate * g / d
    } else {
        0.0
    }
}

/// Histogram of one feature with every row in a single leaf.
fn root_histogram(bins: &[u16], n_cuts: usize, grads: &[(f64, f64)], hist: &mut Vec<(f64, f64)>) {
    if hist.len() < n_cuts + 1 {
        hist.resize(n_cuts + 1, (0.0, 0.0));
    }
    hist[..=n_cuts].fill((0.0, 0.0));
    for (&b, &(g, h)) in bins.iter().zip(grads) {
        let cell = &mut hist[usize::from(b)];
        cell.0 += g;
        cell.1 += h;
    }
}

/// Histogram after splitting every leaf on bit `level`. Only the smaller
/// child of each leaf is accumulated from its rows; its sibling is the
/// parent's histogram minus that. Buffers may be longer than needed; only
/// the prefix for the current level is meaningful.
fn child_histogram(
    parent: &[(f64, f64)],
    bins: &[u16],
    n_cuts: usize,
    members: &[Vec<u32>],
    grads: &[(f64, f64)],
    level: usize,
    hist: &mut Vec<(f64, f64)>,
) {
    let n_parents = 1usize << level;
    let n_leaves = 2 * n_parents;
    let n_bins = n_cuts + 1;
    // Every cell is written below, so a reused buffer needs no clearing
    // beyond the smaller children's cells.
    if hist.len() < n_bins * n_leaves {
        hist.resize(n_bins * n_leaves, (0.0, 0.0));
    }
    for p in 0..n_parents {
        let (a, b) = (p, p | n_parents);
        let (small, large) = if members[a].len() <= members[b].len() { (a, b) } else { (b, a) };
        for bin in 0..n_bins {
            hist[bin * n_leaves + small] = (0.0, 0.0);
        }
        for &r in &members[small] {
            let (g, h) = grads[r as usize];
            let cell = &mut hist[usize::from(bins[r as usize]) * n_leaves + small];
            cell.0 += g;
            cell.1 += h;
        }
        for bin in 0..n_bins {
            let (pg, ph) = parent[bin * n_parents + p];
            let (sg, sh) = hist[bin * n_leaves + small];
            hist[bin * n_leaves + large] = (pg - sg, ph - sh);
        }
    }
}

/// Best cut of one feature for the current leaf partition, as
/// `(gain, cut index)`.
fn best_threshold(
    hist: &[(f64, f64)],
    n_cuts: usize,
    totals: &[(f64, f64)],
    parent: f64,
    l2: f64,
) -> Option<(f64, usize)> {
    if n_cuts == 0 {
        return None;
    }
    let n_leaves = totals.len();
    // Children score of each leaf for the current cut; an empty cell leaves
    // its leaf's entry unchanged.
    let mut left = vec![(0.0, 0.0); n_leaves];
    let mut contrib: Vec<f64> = totals
        .iter()
        .map(|&(tg, th)| leaf_score(0.0, 0.0, l2) + leaf_score(tg, th, l2))
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for (j, row) in hist.chunks_exact(n_leaves).take(n_cuts).enumerate() {
        for (leaf_idx, &(cg, ch)) in row.iter().enumerate() {
            if cg == 0.0 && ch == 0.0 {
                continue;
            }
            let lf = &mut left[leaf_idx];
            lf.0 += cg;
            lf.1 += ch;
            let (tg, th) = totals[leaf_idx];
            contrib[leaf_idx] = leaf_score(lf.0, lf.1, l2) + leaf_score(tg - lf.0, th - lf.1, l2);
        }
        let gain = contrib.iter().sum::<f64>() - parent;
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, j));
        }
    }
    best
}

/// Halves any leaf step that does not lower the loss of its own rows, and
/// leaves the per-row losses under the final steps in `trial_loss`.
fn backtrack_leaves(
    leaf: &[u32],
    y: &[u8],
    scores: &[f64],
    row_loss: &[f64],
    leaves: &mut [f64],
    trial_loss: &mut [f64],
) {
    let mut old = vec![0.0; leaves.len()];
    for (&lf, &loss) in leaf.iter().zip(row_loss) {
        old[lf as usize] += loss;
    }
    for round in 0..=MAX_HALVINGS {
        let mut new = vec![0.0; leaves.len()];
        for (((&lf, &l), &s), out) in leaf.iter().zip(y).zip(scores).zip(trial_loss.iter_mut()) {
            *out = score_logloss(l, s + leaves[lf as usize]);
            new[lf as usize] += *out;
        }
        let mut retry = false;
        let mut dropped = false;
        for ((v, o), nw) in leaves.iter_mut().zip(&old).zip(&new) {
            if *v != 0.0 && nw > o {
                if round == MAX_HALVINGS {
                    *v = 0.0;
                    dropped = true;
                } else {
                    *v *= 0.5;
                    retry = true;
                }
            }
        }
        if dropped {
            for ((&lf, &loss), out) in leaf.iter().zip(row_loss).zip(trial_loss.iter_mut()) {
                if leaves[lf as usize] == 0.0 {
                    *out = loss;
                }
            }
        }
        if !retry {
            return;
        }
    }
}
