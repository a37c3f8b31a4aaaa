//! Experiment driver: the full upper-level loop with restarts, multi-seed
//! runs and ablations.

mod report;

pub use report::{
    aggregate, floor_gap, median, quartiles_iqr, write_outputs, AblationReport, MetricSummary, PairedSeed,
    SeedFailure, SuiteReport, GAP_FLOOR,
};

use std::time::Instant;

use clap::ValueEnum;
use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cma::{self, default_population_size, RankedPopulation, SearchDistribution, Termination};
use crate::engine::{ura_evaluate, ConfigCache, UraParams, WarmStartMode};
use crate::error::{Error, Result};
use crate::problems::{make_problem, BilevelProblem, FeMeter, Suite};

/// Variant of the method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    None,
    /// Rounds always run to `max_rounds`.
    EarlyStop,
    /// A single cached configuration.
    WarmStart,
    /// A single configuration, re-drawn every generation.
    WarmStartRefresh,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub suite: Suite,
    pub problem: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub ura: UraParams,
    pub v_min_x: f64,
    pub cond_max_x: f64,
    /// Generations without improvement of the epoch-best `Φ̃` before a restart.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    /// `|F - F*|` at which a trial counts as converged.
    pub tolerance: f64,
    pub ablation: Ablation,
    pub trace: bool,
}

impl RunConfig {
    pub fn new(suite: Suite, problem: usize, d_x: usize, d_y: usize) -> Self {
        Self {
            suite,
            problem,
            d_x,
            d_y,
            seeds: (1..=20).collect(),
            budget: 10_000_000,
            ura: UraParams::defaults(d_x, d_y),
            v_min_x: 1e-12,
            cond_max_x: 1e7,
            stall_window: 60,
            stall_tolerance: 1e-6,
            tolerance: 1e-6,
            ablation: Ablation::None,
            trace: false,
        }
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    /// Lower-level parameters with the ablation applied.
    pub fn params(&self) -> UraParams {
        let base = self.ura.clone();
        match self.ablation {
            Ablation::None => base,
            Ablation::EarlyStop => UraParams {
                early_stopping_enabled: false,
                ..base
            },
            Ablation::WarmStart => base.with_mode(WarmStartMode::SingleConfig),
            Ablation::WarmStartRefresh => base.with_mode(WarmStartMode::SingleConfigRefresh),
        }
    }

    pub fn build_problem(&self) -> Result<BilevelProblem> {
        make_problem(self.suite, self.problem, self.d_x, self.d_y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.budget == 0 {
            return Err(Error::config("budget must be positive"));
        }
        if !(self.v_min_x > 0.0 && self.cond_max_x >= 1.0 && self.tolerance >= 0.0) {
            return Err(Error::config("invalid upper-level termination settings"));
        }
        if self.stall_window == 0 {
            return Err(Error::config("stall window must be positive"));
        }
        self.params().validate()
    }
}

/// Best gap found so far, after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub upper_fes: u64,
    pub lower_fes: u64,
    pub best_upper_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub problem: String,
    pub seed: u64,
    /// `Φ̃ = F(best_x, best_y)` at the recorded point.
    pub best_phi: f64,
    /// Smallest `|Φ̃ - F*|` over the generation-best candidates of all restarts.
    pub best_upper_gap: f64,
    /// `|f - f*|` at the same point.
    pub best_lower_gap: f64,
    pub upper_fes: u64,
    pub lower_fes: u64,
    pub restarts: usize,
    pub generations: usize,
    pub converged: bool,
    /// Mirrored (feasible) point the best gap was measured at.
    pub best_x: Vec<f64>,
    pub best_y: Vec<f64>,
    pub wall_time: f64,
    pub trace: Option<Vec<TracePoint>>,
}

impl TrialResult {
    pub fn total_fes(&self) -> u64 {
        self.upper_fes + self.lower_fes
    }

    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time: 0.0,
            ..self.clone()
        } == Self {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

struct Best {
    phi: f64,
    gap: f64,
    lower_gap: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

enum EpochEnd {
    Restart,
    Finished,
}

/// Independent random stream for restart epoch `epoch` of trial `seed`.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

/// Fresh state at the start of a restart epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStart {
    pub distribution: SearchDistribution,
    pub cache: ConfigCache,
    pub rng: ChaCha8Rng,
}

/// Upper distribution and cache for epoch `epoch`, a function of
/// `(seed, epoch)` only.
pub fn start_epoch(problem: &BilevelProblem, params: &UraParams, seed: u64, epoch: u64) -> Result<EpochStart> {
    let mut rng = epoch_rng(seed, epoch);
    let distribution = cma::init_distribution(&problem.lower_bounds_x, &problem.upper_bounds_x, &mut rng)?;
    let cache = ConfigCache::random(problem, params.n_omega, &mut rng)?;
    Ok(EpochStart {
        distribution,
        cache,
        rng,
    })
}

/// One run of the full method with restarts until convergence or budget.
pub fn run_trial(problem: &BilevelProblem, config: &RunConfig, seed: u64) -> Result<TrialResult> {
    config.validate()?;
    let optimum = problem
        .optimum
        .clone()
        .ok_or_else(|| Error::config(format!("{} has no known optimum", problem.name)))?;
    let params = config.params();
    let lambda_x = default_population_size(problem.d_x) as u64;
    let meter = FeMeter::new(config.budget);
    let start = Instant::now();

    let mut best = Best {
        phi: f64::INFINITY,
        gap: f64::INFINITY,
        lower_gap: f64::INFINITY,
        x: Vec::new(),
        y: Vec::new(),
    };
    let mut trace = Vec::new();
    let mut restarts = 0;
    let mut generations = 0;
    let mut converged = false;

    'epochs: for epoch in 0.. {
        let EpochStart {
            distribution: mut dist,
            mut cache,
            mut rng,
        } = start_epoch(problem, &params, seed, epoch)?;
        let mut epoch_best = f64::INFINITY;
        let mut stalled = 0;

        let end = loop {
            if meter.total() + lambda_x > config.budget {
                break EpochEnd::Finished;
            }
            let xs = cma::sample_population(&dist, lambda_x as usize, &mut rng)?;
            let (phi, diag) = match ura_evaluate(&xs, &mut cache, &params, problem, &mut rng, &meter) {
                Ok(out) => out,
                Err(Error::Numerical(msg)) => {
                    warn!("{} seed {seed}: lower level failed ({msg}), restarting", problem.name);
                    break EpochEnd::Restart;
                }
                Err(e) => return Err(e),
            };
            generations += 1;

            let b = cma::argsort(&phi)[0];
            let gap = (phi[b] - optimum.upper_value).abs();
            if gap < best.gap {
                best = Best {
                    phi: phi[b],
                    gap,
                    lower_gap: (diag.f_at_phi[b] - optimum.lower_value).abs(),
                    x: problem.mirror_x(xs[b].as_slice())?,
                    y: diag.y_at_phi[b].as_slice().to_vec(),
                };
            }
            if config.trace {
                trace.push(TracePoint {
                    upper_fes: meter.upper(),
                    lower_fes: meter.lower(),
                    best_upper_gap: best.gap,
                });
            }
            debug!(
                "{} seed {seed} gen {generations}: phi {:.3e} gap {:.3e} rounds {} sigma {:.3e} stalled {stalled}",
                problem.name, phi[b], best.gap, diag.rounds, dist.step_size
            );
            if best.gap <= config.tolerance {
                converged = true;
                break EpochEnd::Finished;
            }
            if diag.budget_exhausted {
                break EpochEnd::Finished;
            }

            if phi[b] < epoch_best - config.stall_tolerance {
                stalled = 0;
            } else {
                stalled += 1;
            }
            epoch_best = epoch_best.min(phi[b]);

            let population = RankedPopulation::new(xs, phi)?;
            dist = match cma::update_distribution(&dist, &population) {
                Ok(d) => d,
                Err(Error::Numerical(msg)) => {
                    warn!("{} seed {seed}: upper update failed ({msg}), restarting", problem.name);
                    break EpochEnd::Restart;
                }
                Err(e) => return Err(e),
            };
            if stalled >= config.stall_window {
                break EpochEnd::Restart;
            }
            match cma::check_termination(&dist, config.v_min_x, config.cond_max_x) {
                Ok(Termination::Continue) => {}
                Ok(_) | Err(Error::Numerical(_)) => break EpochEnd::Restart,
                Err(e) => return Err(e),
            }
        };
        match end {
            EpochEnd::Finished => break 'epochs,
            EpochEnd::Restart => {
                restarts += 1;
                debug!("{} seed {seed}: restart {restarts}", problem.name);
            }
        }
    }

    info!(
        "{} seed {seed}: gap {:.3e} after {} FEs, {restarts} restarts",
        problem.name,
        best.gap,
        meter.total()
    );
    Ok(TrialResult {
        problem: problem.name.clone(),
        seed,
        best_phi: best.phi,
        best_upper_gap: best.gap,
        best_lower_gap: best.lower_gap,
        upper_fes: meter.upper(),
        lower_fes: meter.lower(),
        restarts,
        generations,
        converged,
        best_x: best.x,
        best_y: best.y,
        wall_time: start.elapsed().as_secs_f64(),
        trace: config.trace.then_some(trace),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("URA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::config(format!("URA_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::config(e.to_string()))
}

/// Runs every seed of `config` (in parallel) and aggregates the results.
pub fn run_suite(config: &RunConfig) -> Result<SuiteReport> {
    config.validate()?;
    let problem = config.build_problem()?;
    let pool = thread_pool()?;
    let outcomes: Vec<(u64, Result<TrialResult>)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_trial(&problem, config, seed)))
            .collect()
    });
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                warn!("{} seed {seed} failed: {e}", problem.name);
                failures.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    trials.sort_by_key(|t| t.seed);
    failures.sort_by_key(|f| f.seed);
    Ok(SuiteReport {
        problem: problem.name.clone(),
        comment: problem.comment.clone(),
        expected_failure: problem.expected_failure.clone(),
        aggregate: aggregate(&trials),
        config: config.clone(),
        trials,
        failures,
    })
}

/// Runs the full method and the ablated variant on the same seeds.
pub fn run_ablation(config: &RunConfig, mode: Ablation) -> Result<AblationReport> {
    if mode == Ablation::None {
        return Err(Error::config("ablation mode must differ from none"));
    }
    let full = run_suite(&config.clone().with_ablation(Ablation::None))?;
    let ablated = run_suite(&config.clone().with_ablation(mode))?;
    let paired = full
        .trials
        .iter()
        .filter_map(|f| {
            ablated.trials.iter().find(|a| a.seed == f.seed).map(|a| PairedSeed {
                seed: f.seed,
                full_total_fes: f.total_fes(),
                ablated_total_fes: a.total_fes(),
                full_converged: f.converged,
                ablated_converged: a.converged,
            })
        })
        .collect();
    Ok(AblationReport {
        mode,
        full,
        ablated,
        paired,
    })
}
