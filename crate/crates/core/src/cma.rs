//! Rank-based CMA-ES primitive.
//!
//! The search state is a plain value ([`SearchDistribution`]); sampling and
//! updating are free functions from state to state. The update consumes only
//! the ranking of a population, never the raw objective values, so any
//! strictly increasing transformation of the objective yields the same
//! trajectory.
//!
//! The effective sampling covariance is `step_size² · covariance`. The
//! parameterization (recombination weights, learning rates, damping) is the
//! standard default for a given dimension and population size, with positive
//! recombination weights only.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default population size `⌊4 + 3 ln d⌋`.
pub fn default_population_size(dim: usize) -> usize {
    let d = dim.max(1) as f64;
    (4.0 + 3.0 * d.ln()).floor() as usize
}

/// Multivariate normal search state of one CMA-ES instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDistribution {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub step_size: f64,
    pub path_sigma: DVector<f64>,
    pub path_c: DVector<f64>,
    pub iteration: u64,
}

impl SearchDistribution {
    /// Builds a distribution with zero evolution paths.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, step_size: f64) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::config("distribution dimension must be positive"));
        }
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::config(format!(
                "covariance is {}x{}, expected {n}x{n}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::config(format!("step size must be positive, got {step_size}")));
        }
        Ok(Self {
            mean,
            covariance,
            step_size,
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            iteration: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `step_size² · covariance`, the covariance candidates are drawn from.
    pub fn effective_covariance(&self) -> DMatrix<f64> {
        &self.covariance * (self.step_size * self.step_size)
    }

    /// Zeroes the evolution paths and the iteration counter, keeping mean,
    /// covariance and step size.
    pub fn reset_auxiliary(&mut self) {
        self.path_sigma.fill(0.0);
        self.path_c.fill(0.0);
        self.iteration = 0;
    }

    /// Moves the scale of `covariance` into `step_size` so that its largest
    /// diagonal element is 1. The sampling distribution is unchanged and
    /// `path_c` is rescaled with the covariance, so later updates are
    /// equivalent up to rounding.
    pub fn rebalance(&mut self) {
        let a = self.covariance.diagonal().max();
        if !(a.is_finite() && a > 0.0) || a == 1.0 {
            return;
        }
        let s = a.sqrt();
        self.covariance /= a;
        self.path_c /= s;
        self.step_size *= s;
    }
}

/// Strategy constants derived from dimension and population size.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// Expected norm of a standard normal vector.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, lambda: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        if lambda < 2 {
            return Err(Error::config(format!("population size must be at least 2, got {lambda}")));
        }
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Ok(Self {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }
}

/// Candidates with their objective values and the ascending ranking.
///
/// `ranks[j]` is the index of the `j`-th best candidate. Ties keep sampling
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    pub candidates: Vec<DVector<f64>>,
    pub objective_values: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl RankedPopulation {
    pub fn new(candidates: Vec<DVector<f64>>, objective_values: Vec<f64>) -> Result<Self> {
        if candidates.len() != objective_values.len() {
            return Err(Error::config(format!(
                "{} candidates but {} objective values",
                candidates.len(),
                objective_values.len()
            )));
        }
        if let Some(i) = objective_values.iter().position(|v| v.is_nan()) {
            return Err(Error::numerical(format!("objective value of candidate {i} is NaN")));
        }
        let ranks = argsort(&objective_values);
        Ok(Self {
            candidates,
            objective_values,
            ranks,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Index of the best candidate.
    pub fn best(&self) -> usize {
        self.ranks[0]
    }
}

/// Stable ascending argsort of finite-or-infinite values.
pub(crate) fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Initial distribution over a box: one uniform scalar shared by all
/// coordinates places the mean, the covariance is `diag((u - l)/4)²` and the
/// step size is one.
pub fn init_distribution<R: Rng + ?Sized>(lower: &[f64], upper: &[f64], rng: &mut R) -> Result<SearchDistribution> {
    validate_box(lower, upper)?;
    let u01: f64 = rng.random();
    init_distribution_at(lower, upper, u01)
}

/// [`init_distribution`] with the uniform draw supplied by the caller.
pub fn init_distribution_at(lower: &[f64], upper: &[f64], u01: f64) -> Result<SearchDistribution> {
    validate_box(lower, upper)?;
    if !(0.0..=1.0).contains(&u01) {
        return Err(Error::config(format!("uniform draw {u01} outside [0, 1]")));
    }
    let n = lower.len();
    let mean = DVector::from_iterator(n, lower.iter().zip(upper).map(|(l, u)| l + u01 * (u - l)));
    let diag = DVector::from_iterator(n, lower.iter().zip(upper).map(|(l, u)| ((u - l) / 4.0).powi(2)));
    SearchDistribution::new(mean, DMatrix::from_diagonal(&diag), 1.0)
}

pub(crate) fn validate_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != upper.len() {
        return Err(Error::config(format!(
            "bound dimensions differ: {} lower vs {} upper",
            lower.len(),
            upper.len()
        )));
    }
    if lower.is_empty() {
        return Err(Error::config("bounds are empty"));
    }
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !l.is_finite() || !u.is_finite() {
            return Err(Error::config(format!("non-finite bound in coordinate {i}: [{l}, {u}]")));
        }
        if l >= u {
            return Err(Error::config(format!("empty box in coordinate {i}: [{l}, {u}]")));
        }
    }
    Ok(())
}

/// Eigen-factorization `C = B diag(d) Bᵀ` with strictly positive eigenvalues.
struct Factorization {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl Factorization {
    fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "covariance has non-finite entries: {}",
                matrix_diagnostics(covariance)
            )));
        }
        let eig = SymmetricEigen::new(covariance.clone());
        let min = eig.eigenvalues.min();
        if min <= 0.0 || !min.is_finite() {
            return Err(Error::numerical(format!(
                "covariance is not positive definite (smallest eigenvalue {min:e}): {}",
                matrix_diagnostics(covariance)
            )));
        }
        Ok(Self {
            basis: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
        })
    }

    /// `B diag(√d)`, maps standard normal draws to `N(0, C)`.
    fn sqrt_factor(&self) -> DMatrix<f64> {
        let mut m = self.basis.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= self.eigenvalues[j].sqrt();
        }
        m
    }

    /// `C^{-1/2} = B diag(1/√d) Bᵀ`.
    fn inv_sqrt(&self) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col /= self.eigenvalues[j].sqrt();
        }
        scaled * self.basis.transpose()
    }
}

fn matrix_diagnostics(m: &DMatrix<f64>) -> String {
    let diag_min = m.diagonal().iter().cloned().fold(f64::INFINITY, f64::min);
    let diag_max = m.diagonal().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let asym = (m - m.transpose()).abs().max();
    format!(
        "{}x{} matrix, diagonal range [{diag_min:e}, {diag_max:e}], max asymmetry {asym:e}",
        m.nrows(),
        m.ncols()
    )
}

/// Draws `lambda` i.i.d. candidates from `N(mean, step_size² · covariance)`.
/// Candidates are not clipped to any box.
pub fn sample_population<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    lambda: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    if lambda == 0 {
        return Err(Error::config("population size must be positive"));
    }
    let factor = Factorization::new(&dist.covariance)?.sqrt_factor() * dist.step_size;
    let n = dist.dim();
    Ok((0..lambda)
        .map(|_| {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            &dist.mean + &factor * z
        })
        .collect())
}

/// One CMA-ES generation: weighted recombination, cumulative step-size
/// adaptation and rank-one plus rank-μ covariance update.
///
/// Only `population.ranks` and the candidates enter the computation.
pub fn update_distribution(dist: &SearchDistribution, population: &RankedPopulation) -> Result<SearchDistribution> {
    let lambda = population.len();
    if lambda < 4 {
        return Err(Error::config(format!("update needs at least 4 candidates, got {lambda}")));
    }
    let n = dist.dim();
    if let Some(i) = population
        .candidates
        .iter()
        .position(|c| c.len() != n || c.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::numerical(format!("candidate {i} is non-finite or has the wrong dimension")));
    }
    let params = CmaParams::new(n, lambda)?;
    let fact = Factorization::new(&dist.covariance)?;
    let sigma = dist.step_size;
    let nf = n as f64;

    let steps: Vec<DVector<f64>> = population.ranks[..params.mu]
        .iter()
        .map(|&i| (&population.candidates[i] - &dist.mean) / sigma)
        .collect();
    let mut y_w = DVector::zeros(n);
    for (w, y) in params.weights.iter().zip(&steps) {
        y_w.axpy(*w, y, 1.0);
    }

    let mean = &dist.mean + &y_w * sigma;

    let cs = params.c_sigma;
    let path_sigma =
        &dist.path_sigma * (1.0 - cs) + fact.inv_sqrt() * &y_w * (cs * (2.0 - cs) * params.mu_eff).sqrt();
    let generation = dist.iteration as f64 + 1.0;
    let ps_norm = path_sigma.norm();
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * generation)).sqrt()
        < (1.4 + 2.0 / (nf + 1.0)) * params.chi_n;

    let cc = params.c_c;
    let path_c = if h_sigma {
        &dist.path_c * (1.0 - cc) + &y_w * (cc * (2.0 - cc) * params.mu_eff).sqrt()
    } else {
        &dist.path_c * (1.0 - cc)
    };
    let delta = if h_sigma { 0.0 } else { cc * (2.0 - cc) };

    let (c1, cmu) = (params.c_1, params.c_mu);
    let mut covariance = &dist.covariance * (1.0 - c1 - cmu + c1 * delta);
    covariance.ger(c1, &path_c, &path_c, 1.0);
    for (w, y) in params.weights.iter().zip(&steps) {
        covariance.ger(cmu * w, y, y, 1.0);
    }
    let covariance = (&covariance + covariance.transpose()) * 0.5;

    let step_size = sigma * ((cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0)).exp();
    if !(step_size.is_finite() && step_size > 0.0) || mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "update produced invalid state (step size {step_size:e})"
        )));
    }

    Ok(SearchDistribution {
        mean,
        covariance,
        step_size,
        path_sigma,
        path_c,
        iteration: dist.iteration + 1,
    })
}

/// `step_size · max_l √C_ll`.
pub fn max_coord_std(covariance: &DMatrix<f64>, step_size: f64) -> Result<f64> {
    if !covariance.is_square() {
        return Err(Error::numerical("covariance is not square"));
    }
    let mut max = 0.0f64;
    for (i, v) in covariance.diagonal().iter().enumerate() {
        if *v < 0.0 || v.is_nan() {
            return Err(Error::numerical(format!("negative diagonal element {v:e} at {i}")));
        }
        max = max.max(*v);
    }
    Ok(step_size * max.sqrt())
}

/// Ratio of largest to smallest eigenvalue.
pub fn condition_number(covariance: &DMatrix<f64>) -> Result<f64> {
    if !covariance.is_square() {
        return Err(Error::numerical("covariance is not square"));
    }
    if covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("covariance has non-finite entries"));
    }
    let eig = SymmetricEigen::new(covariance.clone());
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if min <= 0.0 {
        return Err(Error::numerical(format!(
            "lost positive definiteness (smallest eigenvalue {min:e})"
        )));
    }
    Ok(max / min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Continue,
    StdFloor,
    IllConditioned,
}

/// Covariance-based stopping test. The standard-deviation floor is checked on
/// the effective covariance and wins when both criteria hold.
pub fn check_termination(dist: &SearchDistribution, v_min: f64, cond_max: f64) -> Result<Termination> {
    if max_coord_std(&dist.covariance, dist.step_size)? < v_min {
        return Ok(Termination::StdFloor);
    }
    if condition_number(&dist.covariance)? > cond_max {
        return Ok(Termination::IllConditioned);
    }
    Ok(Termination::Continue)
}
