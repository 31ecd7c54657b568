//! Adaptive Parzen estimator: a truncated Gaussian mixture with one
//! component per observation plus one prior component.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// Rejection attempts before falling back to clamping a draw.
const MAX_REJECTIONS: usize = 256;

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

#[derive(Debug, Clone)]
pub(crate) struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    weights: Vec<f64>,
    /// Mass of each component inside `[low, high]`.
    masses: Vec<f64>,
    low: f64,
    high: f64,
}

impl Parzen {
    /// Builds the mixture over observations in `[low, high]`.
    ///
    /// Each observation's bandwidth is the larger gap to its sorted
    /// neighbours (the prior mean counts as a neighbour), clipped to
    /// `[range / min(100, n + 1), range]`. The prior component sits at the
    /// midpoint with bandwidth equal to the range.
    pub(crate) fn new(observations: &[f64], low: f64, high: f64, prior_weight: f64) -> Self {
        let range = high - low;
        let prior_mu = 0.5 * (low + high);
        let mut pts: Vec<(f64, bool)> = observations.iter().map(|&x| (x, false)).collect();
        pts.push((prior_mu, true));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));

        let min_sigma = range / (observations.len() as f64 + 1.0).min(100.0);
        let n = pts.len();
        let mut mus = Vec::with_capacity(n);
        let mut sigmas = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let (mu, is_prior) = pts[i];
            let sigma = if is_prior {
                range
            } else {
                let left = if i > 0 { mu - pts[i - 1].0 } else { mu - low };
                let right = if i + 1 < n { pts[i + 1].0 - mu } else { high - mu };
                left.max(right).clamp(min_sigma, range)
            };
            mus.push(mu);
            sigmas.push(sigma);
            weights.push(if is_prior { prior_weight } else { 1.0 });
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| (normal_cdf((high - m) / s) - normal_cdf((low - m) / s)).max(1e-300))
            .collect();
        Parzen {
            mus,
            sigmas,
            weights,
            masses,
            low,
            high,
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        let mut k = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            if u < w {
                k = i;
                break;
            }
            u -= w;
        }
        let (mu, sigma) = (self.mus[k], self.sigmas[k]);
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = StandardNormal.sample(rng);
            let x = mu + sigma * z;
            if (self.low..=self.high).contains(&x) {
                return x;
            }
        }
        mu.clamp(self.low, self.high)
    }

    pub(crate) fn log_pdf(&self, x: f64) -> f64 {
        let density: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(self.weights.iter().zip(&self.masses))
            .map(|((&m, &s), (&w, &z))| {
                let t = (x - m) / s;
                w * (-0.5 * t * t).exp() / (s * (2.0 * std::f64::consts::PI).sqrt() * z)
            })
            .sum();
        density.max(1e-300).ln()
    }

    /// Log of the mixture mass on `[a, b]` (intersected with the support).
    pub(crate) fn log_mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.low);
        let b = b.min(self.high);
        if b <= a {
            return (1e-300f64).ln();
        }
        let mass: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(self.weights.iter().zip(&self.masses))
            .map(|((&m, &s), (&w, &z))| w * (normal_cdf((b - m) / s) - normal_cdf((a - m) / s)) / z)
            .sum();
        mass.max(1e-300).ln()
    }
}
