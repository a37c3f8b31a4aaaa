//! One lower-level round: CMA-ES iterations on `f(x, ·)` until `c_max`
//! improvements of the incumbent are accepted or the covariance triggers
//! termination.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::UraParams;
use crate::cma::{self, RankedPopulation, SearchDistribution};
use crate::error::Result;
use crate::problems::{BilevelProblem, FeMeter};

/// Lower-level solver attached to one upper candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerSolverState {
    /// Upper candidate, fixed for the lifetime of the solver.
    pub x: DVector<f64>,
    /// Incumbent optimal-response estimate.
    pub y_hat: DVector<f64>,
    /// `f(x, y_hat)`.
    pub f_y: f64,
    /// Distribution; its `iteration` field is the solver's iteration count.
    pub omega: SearchDistribution,
    /// Termination flag of the last round.
    pub terminated: bool,
    /// Cache entry this solver was warm-started from.
    pub cache_index: usize,
    /// Inner CMA-ES iterations performed so far.
    pub inner_iterations: u64,
    /// Consecutive rounds with improvement below the stall tolerance.
    pub stalled_rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundReport {
    pub inner_iterations: u64,
    pub improvements: usize,
    pub budget_exhausted: bool,
}

/// Scales coordinates whose standard deviation `step · √C_ii` is below
/// `v_min` up to exactly `v_min`: `C ← D C D` with
/// `D_ii = max(1, v_min / (step · √C_ii))`.
pub fn covariance_floor(covariance: &DMatrix<f64>, step_size: f64, v_min: f64) -> DMatrix<f64> {
    let d: Vec<f64> = covariance
        .diagonal()
        .iter()
        .map(|c| (v_min / (step_size * c.sqrt())).max(1.0))
        .collect();
    DMatrix::from_fn(covariance.nrows(), covariance.ncols(), |i, j| d[i] * covariance[(i, j)] * d[j])
}

/// Runs one round on `state`. Returns early, with the budget flag set, when
/// the meter is exhausted before a new batch would be sampled.
pub fn lower_round<R: Rng + ?Sized>(
    state: &mut LowerSolverState,
    params: &UraParams,
    problem: &BilevelProblem,
    rng: &mut R,
    meter: &FeMeter,
) -> Result<RoundReport> {
    let init_covariance = state.omega.covariance.clone();
    let init_step = state.omega.step_size;
    let mut report = RoundReport::default();
    state.terminated = false;
    let x = state.x.as_slice().to_vec();

    while report.improvements < params.c_max && !state.terminated {
        if meter.exhausted() {
            report.budget_exhausted = true;
            break;
        }
        let samples = cma::sample_population(&state.omega, params.lambda_y, rng)?;
        let values = samples
            .iter()
            .map(|y| problem.eval_lower(&x, y.as_slice(), meter))
            .collect::<Result<Vec<f64>>>()?;

        let population = RankedPopulation::new(samples, values)?;
        let best = population.best();
        if population.objective_values[best] <= state.f_y {
            state.f_y = population.objective_values[best];
            state.y_hat = population.candidates[best].clone();
            report.improvements += 1;
        }

        let t_prime = state.omega.iteration;
        state.omega = cma::update_distribution(&state.omega, &population)?;
        report.inner_iterations += 1;
        state.inner_iterations += 1;

        if cma::max_coord_std(&state.omega.covariance, state.omega.step_size)? < params.v_min_y
            && t_prime >= params.t_min
        {
            state.omega.covariance =
                covariance_floor(&state.omega.covariance, state.omega.step_size, params.v_min_y);
            // the step size keeps shrinking on cusps while the floor inflates C
            state.omega.rebalance();
            state.terminated = true;
        }
        if cma::condition_number(&state.omega.covariance)? > params.cond_max_y {
            state.omega.covariance = init_covariance.clone();
            state.omega.step_size = init_step;
            state.terminated = true;
        }
    }
    Ok(report)
}
