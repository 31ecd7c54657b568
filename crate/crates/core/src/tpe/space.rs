use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampled hyperparameter assignment, keyed by dimension name.
pub type Point = BTreeMap<String, f64>;

/// Domain of one hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dimension {
    /// Reals drawn uniformly from `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// `round(exp(u) / q) * q` with `u` uniform on `[low, high]`.
    #[serde(rename = "qloguniform")]
    QLogUniform { low: f64, high: f64, q: f64 },
}

impl Dimension {
    pub fn validate(&self) -> Result<()> {
        let (low, high, q) = match *self {
            Dimension::Uniform { low, high } => (low, high, 1.0),
            Dimension::QLogUniform { low, high, q } => (low, high, q),
        };
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidParam(format!("dimension needs low < high, got [{low}, {high}]")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParam(format!("quantum q must be positive, got {q}")));
        }
        Ok(())
    }

    /// Bounds of the continuous domain the sampler draws from (the log
    /// domain for quantized dimensions).
    pub(crate) fn model_bounds(&self) -> (f64, f64) {
        match *self {
            Dimension::Uniform { low, high } | Dimension::QLogUniform { low, high, .. } => (low, high),
        }
    }

    /// Maps a draw from the model domain onto the dimension's support.
    pub(crate) fn model_to_value(self, u: f64) -> f64 {
        match self {
            Dimension::Uniform { low, high } => u.clamp(low, high),
            Dimension::QLogUniform { q, .. } => quantize(u.exp(), q),
        }
    }

    /// Maps an observed value back into the model domain.
    pub(crate) fn value_to_model(self, x: f64) -> f64 {
        let (low, high) = self.model_bounds();
        match self {
            Dimension::Uniform { .. } => x.clamp(low, high),
            Dimension::QLogUniform { .. } => x.max(f64::MIN_POSITIVE).ln().clamp(low, high),
        }
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (low, high) = self.model_bounds();
        self.model_to_value(rng.random_range(low..=high))
    }

    /// Whether `x` can be produced by [`Dimension::sample_prior`].
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Dimension::Uniform { low, high } => (low..=high).contains(&x),
            Dimension::QLogUniform { low, high, q } => {
                let lo = quantize(low.exp(), q);
                let hi = quantize(high.exp(), q);
                let k = x / q;
                (lo..=hi).contains(&x) && (k - k.round()).abs() < 1e-9
            }
        }
    }
}

fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDimension {
    pub name: String,
    #[serde(flatten)]
    pub dimension: Dimension,
}

/// An ordered set of named dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub dims: Vec<NamedDimension>,
}

impl SearchSpace {
    pub fn new(dims: impl IntoIterator<Item = (impl Into<String>, Dimension)>) -> Result<Self> {
        let dims: Vec<NamedDimension> = dims
            .into_iter()
            .map(|(name, dimension)| NamedDimension {
                name: name.into(),
                dimension,
            })
            .collect();
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    /// `learning_rate` uniform on `[1e-3, 0.5]` and `l2_leaf_reg`
    /// quantized log-uniform with `low = 0, high = 2, q = 1`.
    pub fn gbdt_default() -> Self {
        SearchSpace::new([
            ("learning_rate", Dimension::Uniform { low: 1e-3, high: 5e-1 }),
            ("l2_leaf_reg", Dimension::QLogUniform { low: 0.0, high: 2.0, q: 1.0 }),
        ])
        .expect("static space is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.dims.iter().enumerate() {
            d.dimension.validate()?;
            if self.dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::InvalidParam(format!("duplicate dimension {}", d.name)));
            }
        }
        Ok(())
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.dims
            .iter()
            .map(|d| (d.name.clone(), d.dimension.sample_prior(rng)))
            .collect()
    }

    pub fn contains(&self, point: &Point) -> bool {
        point.len() == self.dims.len()
            && self
                .dims
                .iter()
                .all(|d| point.get(&d.name).is_some_and(|&x| d.dimension.contains(x)))
    }
}
