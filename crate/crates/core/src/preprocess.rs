//! Label encoding and imputation of a [`JoinedTable`] into a [`FeatureMatrix`].
//!
//! Categorical values are numbered `1..=m` in order of first appearance in the
//! training table. At transform time, values unseen during fit continue the
//! numbering (`m+1`, `m+2`, ...) in order of first appearance in the table
//! being transformed. Missing categoricals become [`MISSING_CATEGORY`];
//! missing continuous values take the training mean.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{ColumnData, JoinedTable};
use crate::error::{Error, Result};

/// Id given to a missing categorical cell.
pub const MISSING_CATEGORY: i64 = -999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub column: String,
    pub ids: IndexMap<String, i64>,
}

impl CategoryMap {
    /// Cardinality of the fitted column.
    pub fn cardinality(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelEncoder {
    pub columns: Vec<CategoryMap>,
}

impl LabelEncoder {
    pub fn fit(table: &JoinedTable) -> Self {
        let columns = table
            .columns
            .iter()
            .filter_map(|c| match &c.data {
                ColumnData::Categorical(values) => {
                    let mut ids = IndexMap::new();
                    for v in values.iter().flatten() {
                        let next = ids.len() as i64 + 1;
                        ids.entry(v.clone()).or_insert(next);
                    }
                    Some(CategoryMap {
                        column: c.name.clone(),
                        ids,
                    })
                }
                ColumnData::Continuous(_) => None,
            })
            .collect();
        LabelEncoder { columns }
    }

    pub fn column(&self, name: &str) -> Option<&CategoryMap> {
        self.columns.iter().find(|c| c.column == name)
    }

    /// Stable fingerprint of the fitted mapping. Models record it so that
    /// prediction refuses matrices encoded by a different fit.
    pub fn provenance(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.column.as_bytes());
            h.update([0xff]);
            for (value, id) in &c.ids {
                h.update(value.as_bytes());
                h.update([0xfe]);
                h.update(id.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    fn encode(&self, column: &str, values: &[Option<String>]) -> Result<Vec<i64>> {
        let map = self.column(column).ok_or_else(|| Error::EncoderMismatch {
            expected: self.columns.iter().map(|c| c.column.as_str()).collect::<Vec<_>>().join(","),
            found: column.to_owned(),
        })?;
        let mut fresh: HashMap<&str, i64> = HashMap::new();
        let mut next = map.ids.len() as i64 + 1;
        Ok(values
            .iter()
            .map(|v| match v {
                None => MISSING_CATEGORY,
                Some(v) => match map.ids.get(v) {
                    Some(&id) => id,
                    None => *fresh.entry(v.as_str()).or_insert_with(|| {
                        next += 1;
                        next - 1
                    }),
                },
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Imputer {
    pub means: IndexMap<String, f64>,
}

impl Imputer {
    /// Means over the non-missing training values of each continuous column.
    pub fn fit(table: &JoinedTable) -> Result<Self> {
        let mut means = IndexMap::new();
        for c in &table.columns {
            if let ColumnData::Continuous(values) = &c.data {
                let (sum, n) = values
                    .iter()
                    .flatten()
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    return Err(Error::AllMissingColumn(c.name.clone()));
                }
                means.insert(c.name.clone(), sum / n as f64);
            }
        }
        Ok(Imputer { means })
    }
}

/// Encoder and imputer fitted together on one training table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preprocessor {
    pub encoder: LabelEncoder,
    pub imputer: Imputer,
}

impl Preprocessor {
    pub fn fit(table: &JoinedTable) -> Result<Self> {
        Ok(Preprocessor {
            encoder: LabelEncoder::fit(table),
            imputer: Imputer::fit(table)?,
        })
    }

    pub fn transform(&self, table: &JoinedTable) -> Result<FeatureMatrix> {
        transform(table, &self.encoder, &self.imputer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Encoded, fully imputed features in column-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub categorical_names: Vec<String>,
    pub categorical: Vec<Vec<i64>>,
    pub continuous_names: Vec<String>,
    pub continuous: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    /// `query_id` of each row.
    pub groups: Vec<String>,
    /// `product_id` of each row.
    pub items: Vec<String>,
    /// Fingerprint of the encoder that produced the categorical ids.
    pub provenance: String,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.groups.len()
    }

    pub fn n_features(&self) -> usize {
        self.categorical.len() + self.continuous.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.categorical_names
            .iter()
            .chain(&self.continuous_names)
            .cloned()
            .collect()
    }

    /// Builds a matrix directly from encoded columns, checking lengths.
    pub fn from_columns(
        categorical: Vec<(String, Vec<i64>)>,
        continuous: Vec<(String, Vec<f64>)>,
        labels: Option<Vec<u8>>,
        groups: Vec<String>,
        items: Vec<String>,
    ) -> Result<Self> {
        let n = groups.len();
        let check = |len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                })
            }
        };
        check(items.len())?;
        if let Some(l) = &labels {
            check(l.len())?;
        }
        for (_, c) in &categorical {
            check(c.len())?;
        }
        for (_, c) in &continuous {
            check(c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("continuous values must be finite".into()));
            }
        }
        let (categorical_names, categorical) = categorical.into_iter().unzip();
        let (continuous_names, continuous) = continuous.into_iter().unzip();
        Ok(FeatureMatrix {
            categorical_names,
            categorical,
            continuous_names,
            continuous,
            labels,
            groups,
            items,
            provenance: "manual".into(),
        })
    }

    /// Rows `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let pick_i = |c: &Vec<i64>| rows.iter().map(|&r| c[r]).collect();
        let pick_f = |c: &Vec<f64>| rows.iter().map(|&r| c[r]).collect();
        let pick_s = |c: &Vec<String>| rows.iter().map(|&r| c[r].clone()).collect();
        FeatureMatrix {
            categorical_names: self.categorical_names.clone(),
            categorical: self.categorical.iter().map(pick_i).collect(),
            continuous_names: self.continuous_names.clone(),
            continuous: self.continuous.iter().map(pick_f).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r]).collect()),
            groups: pick_s(&self.groups),
            items: pick_s(&self.items),
            provenance: self.provenance.clone(),
        }
    }
}

/// Encodes a raw table with a fitted encoder and imputer.
///
/// Only [`JoinedTable`] is accepted, so an already encoded matrix cannot be
/// transformed a second time.
pub fn transform(table: &JoinedTable, enc: &LabelEncoder, imp: &Imputer) -> Result<FeatureMatrix> {
    let mut categorical_names = Vec::new();
    let mut categorical = Vec::new();
    let mut continuous_names = Vec::new();
    let mut continuous = Vec::new();
    for c in &table.columns {
        match &c.data {
            ColumnData::Categorical(values) => {
                categorical_names.push(c.name.clone());
                categorical.push(enc.encode(&c.name, values)?);
            }
            ColumnData::Continuous(values) => {
                let mean = *imp.means.get(&c.name).ok_or_else(|| Error::EncoderMismatch {
                    expected: imp.means.keys().cloned().collect::<Vec<_>>().join(","),
                    found: c.name.clone(),
                })?;
                continuous_names.push(c.name.clone());
                continuous.push(values.iter().map(|v| v.unwrap_or(mean)).collect());
            }
        }
    }
    if categorical_names.len() != enc.columns.len() || continuous_names.len() != imp.means.len() {
        return Err(Error::EncoderMismatch {
            expected: format!(
                "{} categorical + {} continuous columns",
                enc.columns.len(),
                imp.means.len()
            ),
            found: format!(
                "{} categorical + {} continuous columns",
                categorical_names.len(),
                continuous_names.len()
            ),
        });
    }
    Ok(FeatureMatrix {
        categorical_names,
        categorical,
        continuous_names,
        continuous,
        labels: table.complete_labels(),
        groups: table.query_ids.clone(),
        items: table.product_ids.clone(),
        provenance: enc.provenance(),
    })
}
