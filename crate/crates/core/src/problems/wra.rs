//! Min-max test problems `min_x max_y F(x, y)` wrapped as bilevel problems
//! with lower objective `f = -F`.
//!
//! The interaction matrix is the rectangular identity, so the bilinear term
//! is `xᵀBy = Σ_{i<m} x_i y_i` with `m = min(d_x, d_y)`. Both boxes are
//! `[-3, 3]`.
//!
//! | # | `F(x, y)` | saddle / optimum |
//! |---|-----------|------------------|
//! | 1 | `xᵀBy` | `x* = 0`, `F* = 0` |
//! | 2 | `(x - 1)ᵀB(y - 1)` | `x* = 1`, `F* = 0` |
//! | 3 | `½‖x‖² + xᵀBy` | `x* = 0`, `F* = 0` |
//! | 4 | `½‖x‖² + xᵀBy + ½‖y‖²` | `x* = 0`, `y*` any vertex, `F* = 4.5 d_y` |
//! | 5 | `½‖x‖² + xᵀBy - ½‖y‖²` | `(0, 0)`, `F* = 0` |
//! | 6 | `½‖x - 1‖² + (x - 1)ᵀB(y + 1) - ½‖y + 1‖²` | `(1, -1)`, `F* = 0` |
//! | 7 | `‖x‖₁ + xᵀBy - ‖y‖²/20` | `(0, 0)`, `F* = 0` |
//! | 8 | `‖x‖² + xᵀBy - ‖y‖²` | `(0, 0)`, `F* = 0` |
//! | 9 | `½‖x‖² + xᵀBy - ½‖y‖² - Σ(1 - cos 2πy_i)` | `(0, 0)`, `F* = 0` |
//! | 10 | `-¼‖x‖² + xᵀBy - ½‖y‖²` | `(0, 0)`, `F* = 0` when `d_x <= d_y` |
//! | 11 | `½Σκ_i x_i² + xᵀBy - ½Σκ_j y_j²`, `κ_i = 10^{6i/(d-1)}` | `(0, 0)`, `F* = 0` |

use std::f64::consts::PI;
use std::sync::Arc;

use super::{BilevelProblem, KnownOptimum};
use crate::error::{Error, Result};

const BOX: f64 = 3.0;

const COMMENTS: [&str; 11] = [
    "Bilinear",
    "Contains bilinear term",
    "Bilinear + convex term in x",
    "Very large optimal response set",
    "Strictly convex-concave",
    "Strictly convex-concave",
    "Contains bilinear term",
    "Strictly convex-concave",
    "Multimodal in y",
    "Concave in both x and y",
    "Ill-conditioned",
];

fn bilinear(x: &[f64], y: &[f64], shift_x: f64, shift_y: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - shift_x) * (b - shift_y)).sum()
}

fn sum_sq_shifted(v: &[f64], shift: f64) -> f64 {
    v.iter().map(|a| (a - shift).powi(2)).sum()
}

/// Log-spaced scaling `10^{6i/(d-1)}`, all ones in one dimension.
fn scaling(d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d).map(|i| 10f64.powf(6.0 * i as f64 / (d - 1) as f64)).collect()
}

fn value(index: usize, x: &[f64], y: &[f64], kx: &[f64], ky: &[f64]) -> f64 {
    let xy = || bilinear(x, y, 0.0, 0.0);
    match index {
        1 => xy(),
        2 => bilinear(x, y, 1.0, 1.0),
        3 => 0.5 * sum_sq_shifted(x, 0.0) + xy(),
        4 => 0.5 * sum_sq_shifted(x, 0.0) + xy() + 0.5 * sum_sq_shifted(y, 0.0),
        5 => 0.5 * sum_sq_shifted(x, 0.0) + xy() - 0.5 * sum_sq_shifted(y, 0.0),
        6 => 0.5 * sum_sq_shifted(x, 1.0) + bilinear(x, y, 1.0, -1.0) - 0.5 * sum_sq_shifted(y, -1.0),
        7 => x.iter().map(|a| a.abs()).sum::<f64>() + xy() - sum_sq_shifted(y, 0.0) / 20.0,
        8 => sum_sq_shifted(x, 0.0) + xy() - sum_sq_shifted(y, 0.0),
        9 => {
            0.5 * sum_sq_shifted(x, 0.0) + xy()
                - 0.5 * sum_sq_shifted(y, 0.0)
                - y.iter().map(|b| 1.0 - (2.0 * PI * b).cos()).sum::<f64>()
        }
        10 => -0.25 * sum_sq_shifted(x, 0.0) + xy() - 0.5 * sum_sq_shifted(y, 0.0),
        11 => {
            let ux: f64 = x.iter().zip(kx).map(|(a, k)| k * a * a).sum();
            let uy: f64 = y.iter().zip(ky).map(|(b, k)| k * b * b).sum();
            0.5 * ux + xy() - 0.5 * uy
        }
        _ => unreachable!("index validated at construction"),
    }
}

fn optimum(index: usize, d_x: usize, d_y: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let m = d_x.min(d_y);
    match index {
        2 => (vec![1.0; d_x], vec![1.0; d_y], 0.0),
        4 => (vec![0.0; d_x], vec![BOX; d_y], 0.5 * BOX * BOX * d_y as f64),
        6 => (vec![1.0; d_x], vec![-1.0; d_y], 0.0),
        10 => {
            // uncoupled x coordinates are concave and sit on the box edge
            let mut x = vec![0.0; d_x];
            x[m..].fill(BOX);
            (x, vec![0.0; d_y], -0.25 * BOX * BOX * (d_x - m) as f64)
        }
        _ => (vec![0.0; d_x], vec![0.0; d_y], 0.0),
    }
}

/// Builds WRA`index` at `(d_x + d_y)` dimensions.
pub fn make_wra(index: usize, d_x: usize, d_y: usize) -> Result<BilevelProblem> {
    if !(1..=11).contains(&index) {
        return Err(Error::config(format!("WRA index must be in 1..=11, got {index}")));
    }
    if d_x == 0 || d_y == 0 {
        return Err(Error::config("WRA dimensions must be positive"));
    }
    let kx = Arc::new(scaling(d_x));
    let ky = Arc::new(scaling(d_y));
    let (kx2, ky2) = (kx.clone(), ky.clone());
    let (x_opt, y_opt, f_star) = optimum(index, d_x, d_y);
    let problem = BilevelProblem::new(
        format!("wra{index}"),
        vec![-BOX; d_x],
        vec![BOX; d_x],
        vec![-BOX; d_y],
        vec![BOX; d_y],
        Arc::new(move |x, y| value(index, x, y, &kx, &ky)),
        Arc::new(move |x, y| -value(index, x, y, &kx2, &ky2)),
        Some(KnownOptimum {
            x: x_opt,
            y: y_opt,
            upper_value: f_star,
            lower_value: -f_star,
        }),
    )?
    .with_comment(COMMENTS[index - 1]);
    Ok(if index == 4 {
        problem.with_expected_failure("very large optimal response set")
    } else {
        problem
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force `max_y F(x, y)` over a lattice in one dimension.
    fn inner_max(p: &BilevelProblem, x: f64) -> f64 {
        (0..=6000)
            .map(|k| p.upper_raw(&[x], &[-3.0 + k as f64 * 1e-3]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn published_optimum_is_a_saddle_in_one_dimension() {
        for index in 1..=11 {
            let p = make_wra(index, 1, 1).unwrap();
            let opt = p.optimum.clone().unwrap();
            let phi_star = inner_max(&p, opt.x[0]);
            assert!((phi_star - opt.upper_value).abs() < 1e-5, "wra{index}: {phi_star}");
            for k in 0..=60 {
                let x = -3.0 + 0.1 * k as f64;
                assert!(inner_max(&p, x) >= phi_star - 1e-9, "wra{index} at x={x}");
            }
        }
    }

    #[test]
    fn lower_is_negated_upper() {
        let p = make_wra(9, 3, 4).unwrap();
        let (x, y) = ([0.3, -1.2, 2.0], [1.0, -0.4, 0.0, 2.9]);
        assert_eq!(p.lower_raw(&x, &y), -p.upper_raw(&x, &y));
    }

    #[test]
    fn rejects_unknown_index() {
        assert!(make_wra(0, 2, 2).is_err());
        assert!(make_wra(12, 2, 2).is_err());
    }
}
