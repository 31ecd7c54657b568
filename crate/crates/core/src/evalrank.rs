//! Per-query ranking and the two evaluation metrics: mean logloss and mean
//! reciprocal rank (MRR).

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::IMPRESSION_SIZE;
use crate::error::{Error, Result};

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-15;

/// Mean binary logloss of probabilities `p` against labels `y`.
pub fn logloss(y: &[u8], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: p.len(),
        });
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = y
        .iter()
        .zip(p)
        .map(|(&l, &p)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            if l == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub product_id: String,
    pub probability: f64,
    /// 1-based position, 1 being the most likely click.
    pub rank: usize,
}

/// The six products of one query in descending probability order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRanking {
    pub query_id: String,
    pub items: Vec<RankedItem>,
}

/// Input row for [`rank_queries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub query_id: String,
    pub product_id: String,
    pub probability: f64,
}

/// Groups rows by query and ranks each group by descending probability.
///
/// Queries keep their order of first appearance. Ties keep input order.
pub fn rank_queries(rows: &[ScoredRow]) -> Result<Vec<QueryRanking>> {
    let mut groups: IndexMap<&str, Vec<&ScoredRow>> = IndexMap::new();
    for r in rows {
        groups.entry(r.query_id.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(query_id, mut members)| {
            if members.len() != IMPRESSION_SIZE {
                return Err(Error::GroupSize {
                    query_id: query_id.to_owned(),
                    size: members.len(),
                });
            }
            members.sort_by(|a, b| b.probability.total_cmp(&a.probability));
            Ok(QueryRanking {
                query_id: query_id.to_owned(),
                items: members
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| RankedItem {
                        product_id: r.product_id.clone(),
                        probability: r.probability,
                        rank: i + 1,
                    })
                    .collect(),
            })
        })
        .collect()
}

/// How [`mrr`] treats a query none of whose products was clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroClickPolicy {
    /// The query contributes a reciprocal rank of 0.
    #[default]
    CountAsZero,
    /// The query is left out of the mean.
    Exclude,
}

/// Click labels keyed by `(query_id, product_id)`.
pub type LabelMap = HashMap<(String, String), u8>;

/// Mean over queries of `1 / rank` of the best-ranked clicked product.
pub fn mrr(rankings: &[QueryRanking], labels: &LabelMap, policy: ZeroClickPolicy) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for q in rankings {
        let mut first = None;
        for item in &q.items {
            let key = (q.query_id.clone(), item.product_id.clone());
            let clicked = labels.get(&key).ok_or_else(|| Error::MissingLabel {
                query_id: q.query_id.clone(),
                product_id: item.product_id.clone(),
            })?;
            if *clicked == 1 {
                first = Some(first.map_or(item.rank, |r: usize| r.min(item.rank)));
            }
        }
        match (first, policy) {
            (Some(rank), _) => {
                total += 1.0 / rank as f64;
                counted += 1;
            }
            (None, ZeroClickPolicy::CountAsZero) => counted += 1,
            (None, ZeroClickPolicy::Exclude) => {}
        }
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Absent when probabilities were not available.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_logloss: Option<f64>,
    pub mrr: f64,
    pub n_queries: usize,
    pub n_rows: usize,
}

/// Ranks `rows`, then scores them with logloss and MRR against `y`
/// (aligned with `rows`).
pub fn evaluate(rows: &[ScoredRow], y: &[u8], policy: ZeroClickPolicy) -> Result<MetricReport> {
    let probs: Vec<f64> = rows.iter().map(|r| r.probability).collect();
    let mean_logloss = logloss(y, &probs)?;
    let labels: LabelMap = rows
        .iter()
        .zip(y)
        .map(|(r, &l)| ((r.query_id.clone(), r.product_id.clone()), l))
        .collect();
    let rankings = rank_queries(rows)?;
    Ok(MetricReport {
        mean_logloss: Some(mean_logloss),
        mrr: mrr(&rankings, &labels, policy)?,
        n_queries: rankings.len(),
        n_rows: rows.len(),
    })
}

pub const SUBMISSION_HEADER: [&str; 3] = ["query_id", "product_id", "rank"];

/// Writes `query_id,product_id,rank`, six lines per query in rank order,
/// optionally followed by a `probability` column.
pub fn write_submission<W: Write>(w: W, rankings: &[QueryRanking], with_probability: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if with_probability {
        wtr.write_record(["query_id", "product_id", "rank", "probability"])?;
    } else {
        wtr.write_record(SUBMISSION_HEADER)?;
    }
    for q in rankings {
        for item in &q.items {
            let rank = item.rank.to_string();
            if with_probability {
                let p = item.probability.to_string();
                wtr.write_record([q.query_id.as_str(), &item.product_id, &rank, &p])?;
            } else {
                wtr.write_record([q.query_id.as_str(), &item.product_id, &rank])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_submission(path: impl AsRef<Path>, rankings: &[QueryRanking], with_probability: bool) -> Result<()> {
    write_submission(File::create(path)?, rankings, with_probability)
}

/// Reads a submission back. Probabilities are `NaN` when the file has no
/// `probability` column; [`submission_has_probabilities`] tells the cases apart.
pub fn read_submission<R: Read>(r: R) -> Result<Vec<QueryRanking>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers()?.clone();
    let with_p = header.len() == 4 && &header[3] == "probability";
    for (i, name) in SUBMISSION_HEADER.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::UnknownColumn {
                position: i,
                expected: (*name).to_owned(),
                found: header.get(i).unwrap_or("").to_owned(),
            });
        }
    }
    let mut out: IndexMap<String, Vec<RankedItem>> = IndexMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        if rec.len() != header.len() {
            return Err(malformed(format!("expected {} fields", header.len())));
        }
        let rank: usize = rec[2]
            .parse()
            .map_err(|_| malformed(format!("bad rank {:?}", &rec[2])))?;
        let probability = if with_p {
            rec[3]
                .parse()
                .map_err(|_| malformed(format!("bad probability {:?}", &rec[3])))?
        } else {
            f64::NAN
        };
        out.entry(rec[0].to_owned()).or_default().push(RankedItem {
            product_id: rec[1].to_owned(),
            probability,
            rank,
        });
    }
    Ok(out
        .into_iter()
        .map(|(query_id, mut items)| {
            items.sort_by_key(|i| i.rank);
            QueryRanking { query_id, items }
        })
        .collect())
}

pub fn load_submission(path: impl AsRef<Path>) -> Result<Vec<QueryRanking>> {
    read_submission(File::open(path)?)
}

pub fn submission_has_probabilities(rankings: &[QueryRanking]) -> bool {
    rankings
        .iter()
        .flat_map(|q| &q.items)
        .all(|i| !i.probability.is_nan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(q: &str, probs: &[f64]) -> Vec<ScoredRow> {
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| ScoredRow {
                query_id: q.into(),
                product_id: format!("p{i}"),
                probability: p,
            })
            .collect()
    }

    fn ranks_in_input_order(r: &QueryRanking) -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = r
            .items
            .iter()
            .map(|i| (i.product_id[1..].parse().unwrap(), i.rank))
            .collect();
        v.sort();
        v.into_iter().map(|(_, r)| r).collect()
    }

    #[test]
    #[allow(clippy::approx_constant)] // the documented six-digit values
    fn closed_form_logloss() {
        assert!((logloss(&[1], &[0.5]).unwrap() - 0.693147).abs() < 1e-6);
        assert_eq!(logloss(&[1], &[0.5]).unwrap(), std::f64::consts::LN_2);
        assert!((logloss(&[0], &[0.9]).unwrap() - 2.302585).abs() < 1e-6);
        let perfect = logloss(&[1, 0], &[1.0, 0.0]).unwrap();
        assert!(perfect > 0.0 && perfect < 1e-13);
        assert!(matches!(logloss(&[1], &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ranks_by_descending_probability() {
        let r = rank_queries(&rows("q", &[0.1, 0.9, 0.5, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(ranks_in_input_order(&r[0]), vec![6, 1, 2, 5, 4, 3]);
    }

    #[test]
    fn ties_keep_input_order() {
        let r = rank_queries(&rows("q", &[0.3; 6])).unwrap();
        assert_eq!(ranks_in_input_order(&r[0]), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn five_rows_is_group_error() {
        assert!(matches!(
            rank_queries(&rows("q", &[0.3; 5])),
            Err(Error::GroupSize { size: 5, .. })
        ));
    }

    fn labels_for(r: &[QueryRanking], clicked: &[(&str, usize)]) -> LabelMap {
        let mut m = LabelMap::new();
        for q in r {
            for item in &q.items {
                let hit = clicked
                    .iter()
                    .any(|(qq, rank)| *qq == q.query_id && *rank == item.rank);
                m.insert((q.query_id.clone(), item.product_id.clone()), u8::from(hit));
            }
        }
        m
    }

    #[test]
    fn mrr_examples() {
        let mut all = rows("a", &[0.9, 0.8, 0.7, 0.6, 0.5, 0.4]);
        all.extend(rows("b", &[0.9, 0.8, 0.7, 0.6, 0.5, 0.4]));
        let r = rank_queries(&all).unwrap();
        let one = labels_for(&r[..1], &[("a", 1)]);
        assert_eq!(mrr(&r[..1], &one, ZeroClickPolicy::CountAsZero).unwrap(), 1.0);
        let two = labels_for(&r, &[("a", 1), ("b", 4)]);
        assert_eq!(mrr(&r, &two, ZeroClickPolicy::CountAsZero).unwrap(), 0.625);
    }

    #[test]
    fn multiple_clicks_use_best_rank() {
        let r = rank_queries(&rows("a", &[0.9, 0.8, 0.7, 0.6, 0.5, 0.4])).unwrap();
        let l = labels_for(&r, &[("a", 5), ("a", 2)]);
        assert_eq!(mrr(&r, &l, ZeroClickPolicy::CountAsZero).unwrap(), 0.5);
    }

    #[test]
    fn zero_click_policies() {
        let mut all = rows("a", &[0.9, 0.8, 0.7, 0.6, 0.5, 0.4]);
        all.extend(rows("b", &[0.9, 0.8, 0.7, 0.6, 0.5, 0.4]));
        let r = rank_queries(&all).unwrap();
        let l = labels_for(&r, &[("a", 2)]);
        assert_eq!(mrr(&r, &l, ZeroClickPolicy::CountAsZero).unwrap(), 0.25);
        assert_eq!(mrr(&r, &l, ZeroClickPolicy::Exclude).unwrap(), 0.5);
    }

    #[test]
    fn missing_label() {
        let r = rank_queries(&rows("a", &[0.1; 6])).unwrap();
        let mut l = labels_for(&r, &[("a", 1)]);
        l.remove(&("a".to_owned(), "p3".to_owned()));
        assert!(matches!(
            mrr(&r, &l, ZeroClickPolicy::CountAsZero),
            Err(Error::MissingLabel { .. })
        ));
    }

    #[test]
    fn submission_files() {
        let mut all = rows("a", &[0.9, 0.1, 0.7, 0.6, 0.5, 0.4]);
        all.extend(rows("b", &[0.2, 0.8, 0.7, 0.6, 0.5, 0.4]));
        let r = rank_queries(&all).unwrap();
        let mut buf = Vec::new();
        write_submission(&mut buf, &r, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert_eq!(text.lines().next(), Some("query_id,product_id,rank"));
        assert_eq!(text.lines().nth(1), Some("a,p0,1"));
        let back = read_submission(buf.as_slice()).unwrap();
        assert!(!submission_has_probabilities(&back));
        for (x, y) in back.iter().zip(&r) {
            assert_eq!(x.query_id, y.query_id);
            let ids = |q: &QueryRanking| q.items.iter().map(|i| (i.product_id.clone(), i.rank)).collect::<Vec<_>>();
            assert_eq!(ids(x), ids(y));
        }

        let mut buf = Vec::new();
        write_submission(&mut buf, &r, true).unwrap();
        let back = read_submission(buf.as_slice()).unwrap();
        assert_eq!(back, r);

        let mut empty = Vec::new();
        write_submission(&mut empty, &[], false).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "query_id,product_id,rank\n");
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_ranking(probs in prop::collection::vec(0.0f64..1.0, 6)) {
            let a = rank_queries(&rows("q", &probs)).unwrap();
            let squashed: Vec<f64> = probs.iter().map(|p| (3.0 * p - 1.0).exp() / 7.0).collect();
            let b = rank_queries(&rows("q", &squashed)).unwrap();
            prop_assert_eq!(ranks_in_input_order(&a[0]), ranks_in_input_order(&b[0]));
        }

        #[test]
        fn mrr_bounds(probs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 1..20),
                      clicks in prop::collection::vec(prop::option::of(0usize..6), 20)) {
            let mut all = Vec::new();
            for (i, p) in probs.iter().enumerate() {
                all.extend(rows(&format!("q{i}"), p));
            }
            let r = rank_queries(&all).unwrap();
            let mut labels = LabelMap::new();
            for (i, row) in all.iter().enumerate() {
                let q = i / 6;
                labels.insert((row.query_id.clone(), row.product_id.clone()), u8::from(clicks[q] == Some(i % 6)));
            }
            let v = mrr(&r, &labels, ZeroClickPolicy::CountAsZero).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            if clicks[..probs.len()].iter().all(Option::is_some) {
                prop_assert!(v >= 1.0 / 6.0 - 1e-15);
            }
        }

        #[test]
        fn perfect_model_scores_one(probs in prop::collection::vec(0.0f64..0.5, 6), hit in 0usize..6) {
            let mut probs = probs;
            probs[hit] = 0.9;
            let all = rows("q", &probs);
            let r = rank_queries(&all).unwrap();
            let labels: LabelMap = all.iter().enumerate()
                .map(|(i, row)| ((row.query_id.clone(), row.product_id.clone()), u8::from(i == hit)))
                .collect();
            prop_assert_eq!(mrr(&r, &labels, ZeroClickPolicy::CountAsZero).unwrap(), 1.0);
        }

        #[test]
        fn logloss_non_negative(y in prop::collection::vec(0u8..2, 1..30), seed in any::<u64>()) {
            let p: Vec<f64> = (0..y.len()).map(|i| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64) / 999.0).collect();
            prop_assert!(logloss(&y, &p).unwrap() >= 0.0);
        }
    }
}
