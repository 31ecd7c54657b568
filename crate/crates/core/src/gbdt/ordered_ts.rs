//! Ordered target statistics for categorical features.
//!
//! A row's encoding uses only the labels of rows that precede it in a
//! permutation, blended with a prior `p` of weight `a`:
//! `(sum_y + a*p) / (count + a)`. A category not yet seen in the prefix
//! therefore encodes to `p`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encodes `col` in the order given by `permutation` (a list of row indices).
pub fn ordered_target_statistics(
    col: &[i64],
    y: &[u8],
    permutation: &[usize],
    prior_weight: f64,
    prior: f64,
) -> Result<Vec<f64>> {
    let n = col.len();
    for len in [y.len(), permutation.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    let mut stats: HashMap<i64, (u32, u32)> = HashMap::new();
    for &r in permutation {
        if r >= n || std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidParam(
                "permutation is not a bijection on rows".into(),
            ));
        }
        let (clicks, count) = stats.entry(col[r]).or_default();
        out[r] = (f64::from(*clicks) + prior_weight * prior) / (f64::from(*count) + prior_weight);
        *clicks += u32::from(y[r]);
        *count += 1;
    }
    Ok(out)
}

/// Ordered statistics over a sequence of row blocks: a row sees only the
/// rows of earlier blocks, never those sharing its block. With one row per
/// block this is [`ordered_target_statistics`].
///
/// Rows of one query share a block during training, because their labels
/// are dependent (one click per query) and a within-query prefix would
/// reveal whether the click has already been seen.
pub fn blocked_target_statistics(
    col: &[i64],
    y: &[u8],
    blocks: &[Vec<usize>],
    prior_weight: f64,
    prior: f64,
) -> Result<Vec<f64>> {
    let n = col.len();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let covered: usize = blocks.iter().map(Vec::len).sum();
    if covered != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: covered,
        });
    }
    // Dense category indices keep the hot loop free of hashing.
    let mut categories = col.to_vec();
    categories.sort_unstable();
    categories.dedup();
    let dense: Vec<usize> = col
        .iter()
        .map(|c| categories.binary_search(c).expect("category present"))
        .collect();
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    let mut stats = vec![(0u32, 0u32); categories.len()];
    for block in blocks {
        for &r in block {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidParam("blocks do not partition the rows".into()));
            }
            let (clicks, count) = stats[dense[r]];
            out[r] = (f64::from(clicks) + prior_weight * prior) / (f64::from(count) + prior_weight);
        }
        for &r in block {
            let (clicks, count) = &mut stats[dense[r]];
            *clicks += u32::from(y[r]);
            *count += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryStat {
    pub sum_y: f64,
    pub count: u32,
}

/// Label statistics of one categorical column over a whole training set,
/// used to encode rows at prediction time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryTable {
    pub stats: BTreeMap<i64, CategoryStat>,
}

impl CategoryTable {
    pub fn from_column(col: &[i64], y: &[u8]) -> Self {
        let mut stats: BTreeMap<i64, CategoryStat> = BTreeMap::new();
        for (&c, &l) in col.iter().zip(y) {
            let s = stats.entry(c).or_default();
            s.sum_y += f64::from(l);
            s.count += 1;
        }
        CategoryTable { stats }
    }

    pub fn encode(&self, category: i64, prior_weight: f64, prior: f64) -> f64 {
        let s = self.stats.get(&category).copied().unwrap_or_default();
        (s.sum_y + prior_weight * prior) / (f64::from(s.count) + prior_weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recomputes every row's prefix from scratch.
    fn prefix_oracle(col: &[i64], y: &[u8], perm: &[usize], a: f64, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; col.len()];
        for (pos, &r) in perm.iter().enumerate() {
            let mut sum = 0.0;
            let mut cnt = 0.0;
            for &q in &perm[..pos] {
                if col[q] == col[r] {
                    sum += y[q] as f64;
                    cnt += 1.0;
                }
            }
            out[r] = (sum + a * p) / (cnt + a);
        }
        out
    }

    #[test]
    fn identity_permutation_example() {
        let col = [1, 1, 2, 1];
        let y = [1, 0, 1, 1];
        let out = ordered_target_statistics(&col, &y, &[0, 1, 2, 3], 1.0, 0.5).unwrap();
        assert_eq!(out, vec![0.5, 0.75, 0.5, 0.5]);
        assert_eq!(out, prefix_oracle(&col, &y, &[0, 1, 2, 3], 1.0, 0.5));
    }

    #[test]
    fn reversed_permutation_example() {
        let out = ordered_target_statistics(&[1, 1], &[1, 0], &[1, 0], 1.0, 0.5).unwrap();
        assert_eq!(out, vec![0.25, 0.5]);
    }

    #[test]
    fn first_occurrences_get_prior() {
        let col = [5, 6, 7, -999];
        let out = ordered_target_statistics(&col, &[1, 1, 0, 1], &[2, 0, 3, 1], 1.0, 0.5).unwrap();
        assert!(out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn length_and_permutation_errors() {
        assert!(matches!(
            ordered_target_statistics(&[1, 2], &[1], &[0, 1], 1.0, 0.5),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            ordered_target_statistics(&[1, 2], &[1, 0], &[0, 0], 1.0, 0.5),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn blocks_hide_their_own_labels() {
        // Rows 0 and 1 share a block, so neither sees the other's click.
        let col = [1, 1, 1];
        let y = [1, 0, 0];
        let out = blocked_target_statistics(&col, &y, &[vec![0, 1], vec![2]], 1.0, 0.5).unwrap();
        assert_eq!(out, vec![0.5, 0.5, (1.0 + 0.5) / 3.0]);
    }

    #[test]
    fn blocked_errors() {
        assert!(matches!(
            blocked_target_statistics(&[1, 2], &[1, 0], &[vec![0]], 1.0, 0.5),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            blocked_target_statistics(&[1, 2], &[1, 0], &[vec![0], vec![0]], 1.0, 0.5),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn full_table_encoding() {
        let t = CategoryTable::from_column(&[1, 1, 2], &[1, 0, 1]);
        assert_eq!(t.encode(1, 1.0, 0.5), (1.0 + 0.5) / 3.0);
        assert_eq!(t.encode(42, 1.0, 0.5), 0.5);
    }

    fn dataset() -> impl Strategy<Value = (Vec<i64>, Vec<u8>, Vec<usize>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(0i64..5, n),
                prop::collection::vec(0u8..2, n),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    /// Encodes each row from the rows of strictly earlier blocks.
    fn block_oracle(col: &[i64], y: &[u8], blocks: &[Vec<usize>], a: f64, p: f64) -> Vec<f64> {
        let mut out = vec![0.0; col.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &r in block {
                let earlier = blocks[..b].iter().flatten().filter(|&&q| col[q] == col[r]);
                let (sum, cnt) = earlier.fold((0.0, 0.0), |(s, c), &q| (s + y[q] as f64, c + 1.0));
                out[r] = (sum + a * p) / (cnt + a);
            }
        }
        out
    }

    fn blocked_dataset() -> impl Strategy<Value = (Vec<i64>, Vec<u8>, Vec<Vec<usize>>)> {
        dataset().prop_flat_map(|(col, y, perm)| {
            let n = perm.len();
            prop::collection::vec(1usize..4, n).prop_map(move |sizes| {
                let mut blocks = Vec::new();
                let mut rest = perm.as_slice();
                for s in sizes {
                    if rest.is_empty() {
                        break;
                    }
                    let (head, tail) = rest.split_at(s.min(rest.len()));
                    blocks.push(head.to_vec());
                    rest = tail;
                }
                (col.clone(), y.clone(), blocks)
            })
        })
    }

    proptest! {
        #[test]
        fn blocked_matches_oracle((col, y, blocks) in blocked_dataset(), a in 0.1f64..5.0, p in 0.01f64..0.99) {
            let got = blocked_target_statistics(&col, &y, &blocks, a, p).unwrap();
            let want = block_oracle(&col, &y, &blocks, a, p);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
            }
        }

        #[test]
        fn singleton_blocks_are_ordered_statistics((col, y, perm) in dataset()) {
            let blocks: Vec<Vec<usize>> = perm.iter().map(|&r| vec![r]).collect();
            prop_assert_eq!(
                blocked_target_statistics(&col, &y, &blocks, 1.0, 0.3).unwrap(),
                ordered_target_statistics(&col, &y, &perm, 1.0, 0.3).unwrap()
            );
        }

        #[test]
        fn matches_prefix_oracle((col, y, perm) in dataset(), a in 0.1f64..5.0, p in 0.01f64..0.99) {
            let got = ordered_target_statistics(&col, &y, &perm, a, p).unwrap();
            let want = prefix_oracle(&col, &y, &perm, a, p);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
            }
        }

        #[test]
        fn label_of_a_row_never_leaks_into_it((col, y, perm) in dataset(), pick in any::<prop::sample::Index>()) {
            let r = pick.index(col.len());
            let before = ordered_target_statistics(&col, &y, &perm, 1.0, 0.5).unwrap();
            let mut flipped = y.clone();
            flipped[r] ^= 1;
            let after = ordered_target_statistics(&col, &flipped, &perm, 1.0, 0.5).unwrap();
            let pos = perm.iter().position(|&q| q == r).unwrap();
            for (q, (b, a)) in before.iter().zip(&after).enumerate() {
                let q_pos = perm.iter().position(|&x| x == q).unwrap();
                if q_pos <= pos {
                    prop_assert_eq!(b, a);
                }
            }
        }
    }
}
