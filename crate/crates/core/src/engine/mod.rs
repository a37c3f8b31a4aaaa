//! Upper-level ranking approximation: warm-started lower-level solvers,
//! rank-based early stopping and the configuration cache.

mod cache;
mod kendall;
mod lower;

pub use cache::{post_process, CacheEntry, ConfigCache};
pub use kendall::{kendall_tau, KendallTau};
pub use lower::{covariance_floor, lower_round, LowerSolverState, RoundReport};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cma::default_population_size;
use crate::error::{Error, Result};
use crate::problems::{BilevelProblem, FeMeter};

/// How lower-level solvers are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartMode {
    /// `n_omega` cached configurations, scored and refreshed on decay.
    Full,
    /// A single cached configuration.
    SingleConfig,
    /// A single configuration, re-drawn after every call.
    SingleConfigRefresh,
}

/// Hyperparameters of the ranking approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UraParams {
    pub tau_threshold: f64,
    pub p_threshold: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub n_omega: usize,
    pub c_max: usize,
    pub t_min: u64,
    pub v_min_y: f64,
    pub cond_max_y: f64,
    pub lambda_y: usize,
    pub max_rounds: usize,
    /// A candidate stops taking rounds after this many consecutive rounds
    /// with `f_y` improving by less than `stall_tolerance`.
    pub stall_rounds: usize,
    pub stall_tolerance: f64,
    pub early_stopping_enabled: bool,
    pub warm_starting_mode: WarmStartMode,
}

impl UraParams {
    pub fn defaults(d_x: usize, d_y: usize) -> Self {
        Self {
            tau_threshold: 0.7,
            p_threshold: 0.1,
            p_plus: 0.4,
            p_minus: 0.05,
            n_omega: 3 * default_population_size(d_x),
            c_max: 1,
            t_min: 10,
            v_min_y: 1e-4,
            cond_max_y: 1e7,
            lambda_y: default_population_size(d_y),
            max_rounds: 50,
            stall_rounds: 20,
            stall_tolerance: 1e-6,
            early_stopping_enabled: true,
            warm_starting_mode: WarmStartMode::Full,
        }
    }

    /// Switches the warm-start mode; the single-config modes force `n_omega = 1`.
    pub fn with_mode(mut self, mode: WarmStartMode) -> Self {
        self.warm_starting_mode = mode;
        if mode != WarmStartMode::Full {
            self.n_omega = 1;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.tau_threshold > -1.0 && self.tau_threshold <= 1.0) {
            return Err(Error::config("tau_threshold must lie in (-1, 1]"));
        }
        if !(unit(self.p_threshold) && unit(self.p_plus) && unit(self.p_minus)) {
            return Err(Error::config("cache scores parameters must lie in (0, 1]"));
        }
        if self.n_omega == 0 || self.c_max == 0 || self.max_rounds == 0 || self.stall_rounds == 0 {
            return Err(Error::config("n_omega, c_max, max_rounds and stall_rounds must be positive"));
        }
        if self.lambda_y < 4 {
            return Err(Error::config("lambda_y must be at least 4"));
        }
        if !(self.v_min_y > 0.0 && self.cond_max_y >= 1.0 && self.stall_tolerance >= 0.0) {
            return Err(Error::config("v_min_y must be positive and cond_max_y at least 1"));
        }
        if self.warm_starting_mode != WarmStartMode::Full && self.n_omega != 1 {
            return Err(Error::config("single-config modes require n_omega = 1"));
        }
        Ok(())
    }
}

/// Initializes one lower solver per candidate from the cache entry with the
/// smallest `f(x_i, y_k)` (ties: lowest `k`). Returns the solvers and the
/// initial estimates `Φ̃⁰_i = F(x_i, y_kmin)`.
pub fn warm_start(
    x_batch: &[DVector<f64>],
    cache: &ConfigCache,
    problem: &BilevelProblem,
    meter: &FeMeter,
) -> Result<(Vec<LowerSolverState>, Vec<f64>)> {
    if x_batch.is_empty() {
        return Err(Error::config("warm_start: empty batch"));
    }
    if cache.is_empty() {
        return Err(Error::config("warm_start: empty cache"));
    }
    let mut states = Vec::with_capacity(x_batch.len());
    let mut phi = Vec::with_capacity(x_batch.len());
    for (i, x) in x_batch.iter().enumerate() {
        let xs = x.as_slice();
        let mut best: Option<(usize, f64)> = None;
        for (k, entry) in cache.entries.iter().enumerate() {
            let v = problem
                .eval_lower(xs, entry.y.as_slice(), meter)
                .map_err(|e| Error::evaluation(format!("warm start (i={i}, k={k}): {e}")))?;
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        let (k_min, f0) = best.expect("cache is non-empty");
        let entry = &cache.entries[k_min];
        let phi0 = problem
            .eval_upper(xs, entry.y.as_slice(), meter)
            .map_err(|e| Error::evaluation(format!("warm start (i={i}, k={k_min}): {e}")))?;
        let mut omega = entry.omega.clone();
        omega.reset_auxiliary();
        states.push(LowerSolverState {
            x: x.clone(),
            y_hat: entry.y.clone(),
            f_y: f0,
            omega,
            terminated: false,
            cache_index: k_min,
            inner_iterations: 0,
            stalled_rounds: 0,
        });
        phi.push(phi0);
    }
    Ok((states, phi))
}

/// Per-call record of the ranking approximation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UraDiagnostics {
    /// Completed rounds (each one evaluated `Φ̃` for the whole batch).
    pub rounds: usize,
    /// Kendall τ after each completed round.
    pub taus: Vec<f64>,
    pub early_stopped: bool,
    pub budget_exhausted: bool,
    /// Inner CMA-ES iterations summed over candidates.
    pub inner_iterations: u64,
    /// Cache entry chosen by each candidate.
    pub selected: Vec<usize>,
    /// Cache entries re-drawn by post-processing.
    pub refreshed: Vec<usize>,
    /// Lower-level point each returned `Φ̃_i` was computed at (mirrored).
    pub y_at_phi: Vec<DVector<f64>>,
    /// `f` at those points.
    pub f_at_phi: Vec<f64>,
}

/// Approximates `Φ(x_i) = F(x_i, y*(x_i))` for a batch of upper candidates
/// and updates the cache.
pub fn ura_evaluate<R: Rng + ?Sized>(
    x_batch: &[DVector<f64>],
    cache: &mut ConfigCache,
    params: &UraParams,
    problem: &BilevelProblem,
    rng: &mut R,
    meter: &FeMeter,
) -> Result<(Vec<f64>, UraDiagnostics)> {
    if x_batch.len() < 2 {
        return Err(Error::config("ura_evaluate needs at least two candidates"));
    }
    if cache.len() != params.n_omega {
        return Err(Error::config(format!(
            "cache holds {} entries, expected n_omega = {}",
            cache.len(),
            params.n_omega
        )));
    }
    let (mut states, mut phi) = warm_start(x_batch, cache, problem, meter)?;
    let mut diag = UraDiagnostics {
        selected: states.iter().map(|s| s.cache_index).collect(),
        y_at_phi: states.iter().map(|s| s.y_hat.clone()).collect(),
        f_at_phi: states.iter().map(|s| s.f_y).collect(),
        ..Default::default()
    };

    for _ in 0..params.max_rounds {
        if meter.exhausted() {
            diag.budget_exhausted = true;
            break;
        }
        for state in states.iter_mut() {
            if state.stalled_rounds >= params.stall_rounds {
                continue;
            }
            let before = state.f_y;
            let report = lower_round(state, params, problem, rng, meter)?;
            diag.inner_iterations += report.inner_iterations;
            if before - state.f_y < params.stall_tolerance {
                state.stalled_rounds += 1;
            } else {
                state.stalled_rounds = 0;
            }
            if report.budget_exhausted {
                diag.budget_exhausted = true;
                break;
            }
        }
        if diag.budget_exhausted {
            break;
        }

        let mut next = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            let v = problem
                .eval_upper(s.x.as_slice(), s.y_hat.as_slice(), meter)
                .map_err(|e| Error::evaluation(format!("round {} (i={i}): {e}", diag.rounds + 1)))?;
            next.push(v);
        }
        let tau = kendall_tau(&phi, &next)?.tau;
        phi = next;
        diag.rounds += 1;
        diag.taus.push(tau);
        diag.y_at_phi = states.iter().map(|s| s.y_hat.clone()).collect();
        diag.f_at_phi = states.iter().map(|s| s.f_y).collect();
        if params.early_stopping_enabled && tau > params.tau_threshold {
            diag.early_stopped = true;
            break;
        }
    }

    diag.refreshed = post_process(cache, &states, &phi, params, problem, rng)?;
    for y in diag.y_at_phi.iter_mut() {
        *y = DVector::from_vec(problem.mirror_y(y.as_slice())?);
    }
    Ok((phi, diag))
}
