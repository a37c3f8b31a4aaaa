use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ura::cma::{
    check_termination, condition_number, default_population_size, max_coord_std, sample_population,
    update_distribution, RankedPopulation, SearchDistribution, Termination,
};

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> SearchDistribution {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let mean = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let mut d = SearchDistribution::new(mean, cov, rng.random_range(0.1..2.0)).unwrap();
    d.path_sigma = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    d.path_c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    d.iteration = rng.random_range(0..50);
    d
}

#[test]
fn update_is_invariant_to_monotone_transforms() {
    let transforms: [fn(f64) -> f64; 3] = [f64::exp, |v| v * v * v + v, |v| 10.0 * v - 7.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in transforms {
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let d = random_distribution(&mut rng, n);
            let lambda = default_population_size(n).max(6);
            let xs = sample_population(&d, lambda, &mut rng).unwrap();
            let values: Vec<f64> = (0..lambda).map(|_| rng.random_range(-10.0..10.0)).collect();
            let mapped: Vec<f64> = values.iter().map(|&v| g(v)).collect();
            let a = update_distribution(&d, &RankedPopulation::new(xs.clone(), values).unwrap()).unwrap();
            let b = update_distribution(&d, &RankedPopulation::new(xs, mapped).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn update_is_invariant_to_candidate_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let d = random_distribution(&mut rng, 4);
        let xs = sample_population(&d, 8, &mut rng).unwrap();
        let values: Vec<f64> = xs.iter().map(|x| x.norm_squared()).collect();
        let mut order: Vec<usize> = (0..8).collect();
        order.reverse();
        order.swap(1, 5);
        let xs2 = order.iter().map(|&i| xs[i].clone()).collect();
        let values2 = order.iter().map(|&i| values[i]).collect();
        let a = update_distribution(&d, &RankedPopulation::new(xs, values).unwrap()).unwrap();
        let b = update_distribution(&d, &RankedPopulation::new(xs2, values2).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn covariance_stays_symmetric_positive_definite() {
    for n in [2, 5, 10] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut d = SearchDistribution::new(DVector::from_element(n, 1.0), DMatrix::identity(n, n), 1.0).unwrap();
        let lambda = default_population_size(n);
        for _ in 0..1000 {
            let xs = sample_population(&d, lambda, &mut rng).unwrap();
            // random objective: the distribution does a random walk
            let values = (0..lambda).map(|_| rng.random::<f64>()).collect();
            d = update_distribution(&d, &RankedPopulation::new(xs, values).unwrap()).unwrap();
            let c = &d.covariance;
            let asym = (c - c.transpose()).abs().max();
            assert!(asym <= 1e-12 * c.abs().max(), "asymmetry {asym}");
            assert!(SymmetricEigen::new(c.clone()).eigenvalues.min() > 0.0);
            assert!(d.step_size > 0.0);
        }
        assert_eq!(d.iteration, 1000);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut d = SearchDistribution::new(DVector::from_element(3, 2.0), DMatrix::identity(3, 3), 0.5).unwrap();
        let mut all = Vec::new();
        for _ in 0..30 {
            let xs = sample_population(&d, 7, &mut rng).unwrap();
            let values = xs.iter().map(|x| x.abs().sum()).collect();
            all.extend(xs.iter().cloned());
            d = update_distribution(&d, &RankedPopulation::new(xs, values).unwrap()).unwrap();
        }
        (all, d)
    };
    assert_eq!(run(), run());
}

#[test]
fn termination_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (v_min, cond_max) = (1e-3, 1e3);
    let mut seen = [0usize; 3];
    for _ in 0..100 {
        let n = rng.random_range(2..6);
        let q = SymmetricEigen::new({
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            &a + a.transpose()
        })
        .eigenvectors;
        let spectrum = DVector::from_fn(n, |_, _| 10f64.powf(rng.random_range(-9.0..2.0)));
        let cov = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        let step = 10f64.powf(rng.random_range(-2.0..0.5));
        let d = SearchDistribution::new(DVector::zeros(n), cov.clone(), step).unwrap();

        let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
        let oracle_std = step * cov.diagonal().max().sqrt();
        let oracle_cond = eig.max() / eig.min();
        let expected = if oracle_std < v_min {
            Termination::StdFloor
        } else if oracle_cond > cond_max {
            Termination::IllConditioned
        } else {
            Termination::Continue
        };
        assert!((max_coord_std(&cov, step).unwrap() / oracle_std - 1.0).abs() < 1e-12);
        assert!((condition_number(&cov).unwrap() / oracle_cond - 1.0).abs() < 1e-6);
        assert_eq!(check_termination(&d, v_min, cond_max).unwrap(), expected);
        seen[expected as usize] += 1;
    }
    assert!(seen.iter().all(|&c| c > 0), "all outcomes exercised: {seen:?}");
}

proptest! {
    #[test]
    fn ranks_sort_values(values in prop::collection::vec(-1e6f64..1e6, 1..40)) {
        let xs = vec![DVector::zeros(1); values.len()];
        let pop = RankedPopulation::new(xs, values.clone()).unwrap();
        let mut seen = pop.ranks.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..values.len()).collect::<Vec<_>>());
        for w in pop.ranks.windows(2) {
            prop_assert!(values[w[0]] < values[w[1]] || (values[w[0]] == values[w[1]] && w[0] < w[1]));
        }
    }
}
