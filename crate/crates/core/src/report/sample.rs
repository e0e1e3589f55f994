use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 20_250_101;
/// Size of the manually reviewed issue set in the original study.
pub const REFERENCE_REVIEW_SIZE: usize = 380;

/// Cochran's sample size for a proportion at p = 0.5, with finite-population
/// correction when `population` is given, rounded up.
pub fn sample_size(population: Option<u64>, confidence: f64, margin: f64) -> Result<u64> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::Argument(format!("margin {margin} must lie in (0, 1)")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Argument(format!("confidence {confidence} must lie in (0, 1)")));
    }
    if population == Some(0) {
        return Err(Error::Argument("population must be at least 1".into()));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n0 = z * z * 0.25 / (margin * margin);
    let n = match population {
        None => n0,
        Some(n_pop) => n0 / (1.0 + (n0 - 1.0) / n_pop as f64),
    };
    // Guard against 191.0000000001 style noise before rounding up.
    let n = (n - 1e-9).ceil() as u64;
    Ok(population.map_or(n, |p| n.min(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub population: usize,
    pub confidence: f64,
    pub margin: f64,
    pub sample_size: usize,
    pub seed: u64,
    pub selected: Vec<String>,
}

/// Indices of `n` of `population` items, uniform without replacement,
/// ascending.
pub fn draw_indices(population: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > population {
        return Err(Error::Argument(format!("cannot draw {n} from {population} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, population, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn draw_sample(ids: &[String], n: usize, seed: u64) -> Result<SampleSet> {
    let selected = draw_indices(ids.len(), n, seed)?.into_iter().map(|i| ids[i].clone()).collect();
    Ok(SampleSet {
        population: ids.len(),
        confidence: DEFAULT_CONFIDENCE,
        margin: DEFAULT_MARGIN,
        sample_size: n,
        seed,
        selected,
    })
}

/// Sizes the sample with [`sample_size`] and draws it.
pub fn review_sample(ids: &[String], confidence: f64, margin: f64, seed: u64) -> Result<SampleSet> {
    if ids.is_empty() {
        return Ok(SampleSet {
            population: 0,
            confidence,
            margin,
            sample_size: 0,
            seed,
            selected: Vec::new(),
        });
    }
    let n = sample_size(Some(ids.len() as u64), confidence, margin)? as usize;
    Ok(SampleSet {
        confidence,
        margin,
        ..draw_sample(ids, n, seed)?
    })
}
