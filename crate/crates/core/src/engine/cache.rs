//! Warm-start configuration cache and its post-processing.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::Rng;

use super::lower::LowerSolverState;
use super::{UraParams, WarmStartMode};
use crate::cma::{self, SearchDistribution};
use crate::error::{Error, Result};
use crate::problems::BilevelProblem;

/// Scores live on a 1e-12 grid so repeated decrements hit the threshold
/// after the exact number of generations.
const SCORE_GRID: f64 = 1e12;

/// One inheritable lower-level configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub y: DVector<f64>,
    pub omega: SearchDistribution,
    pub score: f64,
}

impl CacheEntry {
    /// Random configuration over the lower box; `y` is the new mean and the
    /// score is 1.
    pub fn random<R: Rng + ?Sized>(problem: &BilevelProblem, rng: &mut R) -> Result<Self> {
        let omega = cma::init_distribution(&problem.lower_bounds_y, &problem.upper_bounds_y, rng)?;
        Ok(Self {
            y: omega.mean.clone(),
            omega,
            score: 1.0,
        })
    }
}

/// The warm-start cache `{(y_k, ω_k, p_k)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigCache {
    pub entries: Vec<CacheEntry>,
}

impl ConfigCache {
    pub fn random<R: Rng + ?Sized>(problem: &BilevelProblem, size: usize, rng: &mut R) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("cache size must be positive"));
        }
        let entries = (0..size)
            .map(|_| CacheEntry::random(problem, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn snap(score: f64) -> f64 {
    (score * SCORE_GRID).round() / SCORE_GRID
}

/// Post-processing after one ranking approximation.
///
/// Every selected entry is overwritten by the solver with the smallest `phi`
/// among those that selected it (ties: lowest solver index) and its score is
/// raised by `p_plus` (capped at 1). Unselected entries lose `p_minus`.
/// Entries whose score falls below `p_threshold` are re-drawn at random; in
/// [`WarmStartMode::SingleConfigRefresh`] every entry is re-drawn.
pub fn post_process<R: Rng + ?Sized>(
    cache: &mut ConfigCache,
    states: &[LowerSolverState],
    phi: &[f64],
    params: &UraParams,
    problem: &BilevelProblem,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if states.len() != phi.len() {
        return Err(Error::config("post_process: one value per solver required"));
    }
    if let Some(s) = states.iter().find(|s| s.cache_index >= cache.len()) {
        return Err(Error::config(format!("solver references cache entry {}", s.cache_index)));
    }
    let selected: BTreeSet<usize> = states.iter().map(|s| s.cache_index).collect();
    for &k in &selected {
        let winner = states
            .iter()
            .zip(phi)
            .filter(|(s, _)| s.cache_index == k)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(s, _)| s)
            .expect("selected entries have at least one solver");
        let entry = &mut cache.entries[k];
        entry.y = winner.y_hat.clone();
        entry.omega = winner.omega.clone();
        entry.score = snap((entry.score + params.p_plus).min(1.0));
    }
    for (k, entry) in cache.entries.iter_mut().enumerate() {
        if !selected.contains(&k) {
            entry.score = snap(entry.score - params.p_minus);
        }
    }
    let mut refreshed = Vec::new();
    for (k, entry) in cache.entries.iter_mut().enumerate() {
        if entry.score < params.p_threshold || params.warm_starting_mode == WarmStartMode::SingleConfigRefresh {
            *entry = CacheEntry::random(problem, rng)?;
            refreshed.push(k);
        }
    }
    Ok(refreshed)
}
