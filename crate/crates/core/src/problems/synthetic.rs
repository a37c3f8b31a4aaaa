//! Quadratic bilevel problem with a closed-form optimal response.

use std::sync::Arc;

use super::{BilevelProblem, KnownOptimum};
use crate::error::{Error, Result};

/// `F(x, y) = ‖x‖² + ‖y - c·x̂‖²`, `f(x, y) = ‖y - c·x̂‖²`, where `x̂` is the
/// first `min(d_x, d_y)` coordinates of `x` zero-padded to `d_y`.
///
/// The optimal response is `y*(x) = c·x̂` and the value function is
/// `Φ(x) = ‖x‖²`, minimized at the origin with `F* = f* = 0`. Boxes are
/// `[-5, 5]` at both levels.
pub fn make_synthetic_quadratic(d_x: usize, d_y: usize, conflict: f64) -> Result<BilevelProblem> {
    if d_x == 0 || d_y == 0 {
        return Err(Error::config("synthetic dimensions must be positive"));
    }
    if !conflict.is_finite() {
        return Err(Error::config("coupling must be finite"));
    }
    let c = conflict;
    let residual = move |x: &[f64], y: &[f64]| -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, yi)| {
                let target = x.get(i).map_or(0.0, |xi| c * xi);
                (yi - target).powi(2)
            })
            .sum()
    };
    let optimum = KnownOptimum {
        x: vec![0.0; d_x],
        y: vec![0.0; d_y],
        upper_value: 0.0,
        lower_value: 0.0,
    };
    Ok(BilevelProblem::new(
        format!("synthetic_c{c}"),
        vec![-5.0; d_x],
        vec![5.0; d_x],
        vec![-5.0; d_y],
        vec![5.0; d_y],
        Arc::new(move |x, y| x.iter().map(|v| v * v).sum::<f64>() + residual(x, y)),
        Arc::new(residual),
        Some(optimum),
    )?
    .with_comment("Quadratic with closed-form optimal response"))
}

/// Analytic optimal response `c·x̂` of the synthetic problem.
pub fn synthetic_response(x: &[f64], d_y: usize, conflict: f64) -> Vec<f64> {
    (0..d_y).map(|i| x.get(i).map_or(0.0, |xi| conflict * xi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_optimal_for_any_coupling() {
        for c in [0.0, 1.0, -0.5] {
            let p = make_synthetic_quadratic(3, 2, c).unwrap();
            assert_eq!(synthetic_response(&[0.0; 3], 2, c), vec![0.0, 0.0]);
            assert_eq!(p.upper_raw(&[0.0; 3], &[0.0; 2]), 0.0);
        }
    }

    #[test]
    fn grid_search_agrees_with_closed_form() {
        let p = make_synthetic_quadratic(2, 2, 1.0).unwrap();
        let x = [1.0, 2.0];
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=100 {
            for j in 0..=100 {
                let y = [-5.0 + 0.1 * i as f64, -5.0 + 0.1 * j as f64];
                let v = p.lower_raw(&x, &y);
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        assert!((best.1[0] - 1.0).abs() <= 0.05 && (best.1[1] - 2.0).abs() <= 0.05);
        let y_star = synthetic_response(&x, 2, 1.0);
        assert_eq!(y_star, vec![1.0, 2.0]);
        assert_eq!(p.upper_raw(&x, &y_star), 5.0);
    }

    #[test]
    fn zero_coupling_decouples_levels() {
        let p = make_synthetic_quadratic(2, 2, 0.0).unwrap();
        let y = [0.3, -0.7];
        assert_eq!(p.lower_raw(&[1.0, 2.0], &y), p.lower_raw(&[-4.0, 0.5], &y));
    }
}
