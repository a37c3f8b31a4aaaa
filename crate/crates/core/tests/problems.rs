use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ura::problems::{
    make_smd, make_synthetic_quadratic, make_wra, mirror, synthetic_response, BilevelProblem, FeMeter,
};

struct Probe {
    name: String,
    x: Vec<f64>,
    y: Vec<f64>,
    upper: f64,
    lower: f64,
}

fn load(file: &str, d_x: usize, d_y: usize) -> Vec<Probe> {
    let path = format!("{}/fixtures/{file}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split(',').map(str::trim);
            let name = parts.next().unwrap().to_string();
            let v: Vec<f64> = parts.map(|p| p.parse().unwrap()).collect();
            assert_eq!(v.len(), d_x + d_y + 2, "{path}: {name}");
            Probe {
                name,
                x: v[..d_x].to_vec(),
                y: v[d_x..d_x + d_y].to_vec(),
                upper: v[d_x + d_y],
                lower: v[d_x + d_y + 1],
            }
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

fn check_fixture(file: &str, d_x: usize, d_y: usize, make: impl Fn(usize) -> BilevelProblem, prefix: &str) {
    let probes = load(file, d_x, d_y);
    assert!(!probes.is_empty());
    for p in probes {
        let index: usize = p.name.trim_start_matches(prefix).parse().unwrap();
        let problem = make(index);
        let (upper, lower) = (problem.upper_raw(&p.x, &p.y), problem.lower_raw(&p.x, &p.y));
        assert!(close(upper, p.upper), "{}: F = {upper}, fixture {}", p.name, p.upper);
        assert!(close(lower, p.lower), "{}: f = {lower}, fixture {}", p.name, p.lower);
    }
}

#[test]
fn smd_matches_reference_probes() {
    check_fixture("smd_5_10.txt", 5, 10, |k| make_smd(k, 5, 10).unwrap(), "smd");
}

#[test]
fn wra_matches_reference_probes() {
    check_fixture("wra_5_5.txt", 5, 5, |k| make_wra(k, 5, 5).unwrap(), "wra");
}

#[test]
fn mirror_examples() {
    assert_eq!(mirror(&[0.5], &[0.0], &[1.0]).unwrap(), vec![0.5]);
    assert!((mirror(&[1.2], &[0.0], &[1.0]).unwrap()[0] - 0.8).abs() < 1e-15);
    assert!((mirror(&[-0.3], &[0.0], &[1.0]).unwrap()[0] - 0.3).abs() < 1e-15);
    assert!(mirror(&[f64::NAN], &[0.0], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mirror_lands_in_box_and_is_idempotent(l in -50.0f64..50.0, w in 0.01f64..20.0, t in -10.0f64..11.0) {
        let u = l + w;
        let q = l + t * w;
        let m = mirror(&[q], &[l], &[u]).unwrap()[0];
        prop_assert!((l..=u).contains(&m));
        prop_assert_eq!(mirror(&[m], &[l], &[u]).unwrap()[0], m);
    }

    #[test]
    fn mirror_is_periodic(l in -5.0f64..5.0, w in 0.5f64..4.0, t in -10.0f64..10.0) {
        let u = l + w;
        let q = l + t * w;
        let a = mirror(&[q], &[l], &[u]).unwrap()[0];
        let b = mirror(&[q + 2.0 * w], &[l], &[u]).unwrap()[0];
        // the shift itself is rounded, so equality holds up to a few ulps of q
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + q.abs() + w));
    }

    #[test]
    fn mirror_keeps_feasible_points(l in -5.0f64..5.0, w in 0.1f64..4.0, t in 0.0f64..=1.0) {
        let u = l + w;
        let q = (l + t * w).min(u);
        prop_assert_eq!(mirror(&[q], &[l], &[u]).unwrap()[0], q);
    }
}

#[test]
fn wra_lower_is_exact_negation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 1..=11 {
        let p = make_wra(k, 5, 5).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m = FeMeter::unlimited();
            assert_eq!(p.eval_lower(&x, &y, &m).unwrap(), -p.eval_upper(&x, &y, &m).unwrap());
        }
    }
}

#[test]
fn synthetic_response_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = make_synthetic_quadratic(2, 2, 1.0).unwrap();
    let step = 0.05;
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-4.5..4.5)).collect();
        let mut best = (f64::INFINITY, [0.0; 2]);
        for i in 0..=200 {
            for j in 0..=200 {
                let y = [-5.0 + step * i as f64, -5.0 + step * j as f64];
                let v = p.lower_raw(&x, &y);
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        let analytic = synthetic_response(&x, 2, 1.0);
        for (g, a) in best.1.iter().zip(&analytic) {
            assert!((g - a).abs() <= step / 2.0 + 1e-12, "x = {x:?}: grid {g}, analytic {a}");
        }
        let phi: f64 = x.iter().map(|v| v * v).sum();
        assert!((p.upper_raw(&x, &analytic) - phi).abs() < 1e-12);
    }
}

#[test]
fn evaluation_counts_one_per_call() {
    let p = make_smd(1, 5, 10).unwrap();
    let m = FeMeter::new(1000);
    let (x, y) = (vec![0.5; 5], vec![0.1; 10]);
    for _ in 0..100 {
        p.eval_upper(&x, &y, &m).unwrap();
    }
    for _ in 0..37 {
        p.eval_lower(&x, &y, &m).unwrap();
    }
    assert_eq!((m.upper(), m.lower(), m.total()), (100, 37, 137));
}

#[test]
fn meter_is_exact_under_concurrent_callers() {
    let p = Arc::new(make_wra(5, 3, 3).unwrap());
    let m = Arc::new(FeMeter::unlimited());
    std::thread::scope(|s| {
        for t in 0..8 {
            let (p, m) = (p.clone(), m.clone());
            s.spawn(move || {
                let x = [0.1 * t as f64, 0.2, -0.3];
                for _ in 0..2500 {
                    p.eval_upper(&x, &x, &m).unwrap();
                    p.eval_lower(&x, &x, &m).unwrap();
                }
            });
        }
    });
    assert_eq!((m.upper(), m.lower()), (20_000, 20_000));
}

#[test]
fn infeasible_points_are_evaluated_at_their_reflection() {
    let p = make_wra(5, 2, 2).unwrap();
    let m = FeMeter::unlimited();
    let inside = p.eval_upper(&[2.5, 0.0], &[1.0, -1.0], &m).unwrap();
    let outside = p.eval_upper(&[3.5, 0.0], &[1.0, -1.0], &m).unwrap();
    assert_eq!(inside, outside);
}

#[test]
fn expected_failures_are_marked() {
    assert!(make_smd(6, 5, 10).unwrap().expected_failure.is_some());
    assert!(make_wra(4, 5, 5).unwrap().expected_failure.is_some());
    assert!(make_wra(1, 5, 5).unwrap().comment.contains("Bilinear"));
}
