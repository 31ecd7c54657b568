//! Binary logloss on raw log-odds scores.

use serde::{Deserialize, Serialize};

/// First and second derivative of the loss with respect to the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub g: f64,
    pub h: f64,
}

pub fn sigmoid(score: f64) -> f64 {
    if score >= 0.0 {
        1.0 / (1.0 + (-score).exp())
    } else {
        let e = score.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logloss of label `y` at log-odds `score`: `-(y ln p + (1-y) ln(1-p))`
/// with `p = sigmoid(score)`, evaluated stably in the score domain.
pub fn score_logloss(y: u8, score: f64) -> f64 {
    softplus(score) - f64::from(y) * score
}

pub fn logloss_grad(y: u8, score: f64) -> GradientPair {
    let p = sigmoid(score);
    GradientPair {
        g: p - f64::from(y),
        h: p * (1.0 - p),
    }
}
