//! Unconstrained SMD bilevel test suite (SMD1-SMD8).
//!
//! Upper variables split as `x = (xu1, xu2)` with `|xu1| = p`, `|xu2| = r`;
//! lower variables as `y = (xl1, xl2)` with `|xl1| = q` (`q + s` for SMD6) and
//! `|xl2| = r`. Both objectives are sums of three parts:
//! `F = F1(xu1) + F2(xl1) + F3(xu2, xl2)` and
//! `f = f1(xu1, xu2) + f2(xl1) + f3(xu2, xl2)`.
//!
//! Dimension split: `r = ⌊d_x/2⌋`, `p = d_x - r`, `q = d_y - r`; SMD6 further
//! splits its `q` block into `q - s` plain and `s = 2⌊(d_y - r)/4⌋` paired
//! coordinates.
//!
//! Open bound ends (`(0, e]`, `(-π/2, π/2)`, ...) are pulled inward by
//! [`OPEN_EPS`] so that mirrored points never hit a pole of `ln` or `tan`.

use std::f64::consts::{E, FRAC_PI_2, PI};
use std::sync::Arc;

use super::{BilevelProblem, KnownOptimum};
use crate::error::{Error, Result};

pub(crate) const OPEN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Layout {
    p: usize,
    q: usize,
    r: usize,
    /// Paired lower coordinates of SMD6 (zero elsewhere).
    s: usize,
}

impl Layout {
    fn new(index: usize, d_x: usize, d_y: usize) -> Result<Self> {
        if d_x == 0 || d_y == 0 {
            return Err(Error::config("SMD dimensions must be positive"));
        }
        if d_x > d_y {
            return Err(Error::config(format!("SMD requires d_x <= d_y, got ({d_x}+{d_y})")));
        }
        let r = d_x / 2;
        let p = d_x - r;
        let lower_free = d_y - r;
        let (q, s) = if index == 6 {
            let s = 2 * (lower_free / 4);
            (lower_free - s, s)
        } else {
            (lower_free, 0)
        };
        if matches!(index, 5 | 8) && q < 2 {
            return Err(Error::config(format!("SMD{index} needs at least two Rosenbrock coordinates")));
        }
        Ok(Self { p, q, r, s })
    }

    fn split_x<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.p)
    }

    /// `(xl1, xl2)`; for SMD6 `xl1` has `q + s` entries.
    fn split_y<'a>(&self, y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        y.split_at(self.q + self.s)
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn rosenbrock(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn rastrigin_like(v: &[f64]) -> f64 {
    v.len() as f64 + v.iter().map(|a| a * a - (2.0 * PI * a).cos()).sum::<f64>()
}

fn paired_sq<F: Fn(f64, f64) -> f64>(a: &[f64], b: &[f64], g: F) -> f64 {
    a.iter().zip(b).map(|(&u, &l)| g(u, l).powi(2)).sum()
}

fn upper_value(index: usize, lay: Layout, x: &[f64], y: &[f64]) -> f64 {
    let (xu1, xu2) = lay.split_x(x);
    let (xl1, xl2) = lay.split_y(y);
    match index {
        1 => sum_sq(xu1) + sum_sq(xl1) + sum_sq(xu2) + paired_sq(xu2, xl2, |u, l| u - l.tan()),
        2 => sum_sq(xu1) - sum_sq(xl1) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u - l.ln()),
        3 => sum_sq(xu1) + sum_sq(xl1) + sum_sq(xu2) + paired_sq(xu2, xl2, |u, l| u * u - l.tan()),
        4 => sum_sq(xu1) - sum_sq(xl1) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u.abs() - (1.0 + l).ln()),
        5 => sum_sq(xu1) - rosenbrock(xl1) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u.abs() - l * l),
        6 => {
            let (plain, paired) = xl1.split_at(lay.q);
            sum_sq(xu1) - sum_sq(plain) + sum_sq(paired) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u - l)
        }
        7 => {
            let griewank = 1.0 + sum_sq(xu1) / 400.0
                - xu1
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a / ((i + 1) as f64).sqrt()).cos())
                    .product::<f64>();
            griewank - sum_sq(xl1) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u - l.ln())
        }
        8 => {
            let n = xu1.len() as f64;
            let ackley = 20.0 + E
                - 20.0 * (-0.2 * (sum_sq(xu1) / n).sqrt()).exp()
                - (xu1.iter().map(|a| (2.0 * PI * a).cos()).sum::<f64>() / n).exp();
            ackley - rosenbrock(xl1) + sum_sq(xu2) - paired_sq(xu2, xl2, |u, l| u - l.powi(3))
        }
        _ => unreachable!("index validated at construction"),
    }
}

fn lower_value(index: usize, lay: Layout, x: &[f64], y: &[f64]) -> f64 {
    let (xu1, xu2) = lay.split_x(x);
    let (xl1, xl2) = lay.split_y(y);
    match index {
        1 => sum_sq(xu1) + sum_sq(xl1) + paired_sq(xu2, xl2, |u, l| u - l.tan()),
        2 => sum_sq(xu1) + sum_sq(xl1) + paired_sq(xu2, xl2, |u, l| u - l.ln()),
        3 => sum_sq(xu1) + rastrigin_like(xl1) + paired_sq(xu2, xl2, |u, l| u * u - l.tan()),
        4 => sum_sq(xu1) + rastrigin_like(xl1) + paired_sq(xu2, xl2, |u, l| u.abs() - (1.0 + l).ln()),
        5 => sum_sq(xu1) + rosenbrock(xl1) + paired_sq(xu2, xl2, |u, l| u.abs() - l * l),
        6 => {
            let (plain, paired) = xl1.split_at(lay.q);
            let pairs: f64 = paired.chunks_exact(2).map(|c| (c[1] - c[0]).powi(2)).sum();
            sum_sq(xu1) + sum_sq(plain) + pairs + paired_sq(xu2, xl2, |u, l| u - l)
        }
        7 => xu1.iter().map(|a| a.powi(3)).sum::<f64>() + sum_sq(xl1) + paired_sq(xu2, xl2, |u, l| u - l.ln()),
        8 => xu1.iter().map(|a| a.abs()).sum::<f64>() + rosenbrock(xl1) + paired_sq(xu2, xl2, |u, l| u - l.powi(3)),
        _ => unreachable!("index validated at construction"),
    }
}

const COMMENTS: [&str; 8] = [
    "Cooperative, convex at both levels",
    "Conflicting, convex at both levels",
    "Cooperative, convex u.l., multimodal l.l.",
    "Conflicting, convex u.l., multimodal l.l.",
    "Conflicting, convex u.l., Rosenbrock l.l.",
    "Unique u.l. y*, infinite l.l. solution set",
    "Conflicting, multimodal u.l., convex l.l.",
    "Conflicting, multimodal u.l., Rosenbrock l.l.",
];

/// `(xu2 range, xl2 range)` per index; `xu1` and `xl1` are always `[-5, 10]`.
fn coupled_bounds(index: usize) -> ((f64, f64), (f64, f64)) {
    let open_tan = (-FRAC_PI_2 + OPEN_EPS, FRAC_PI_2 - OPEN_EPS);
    let open_log = (OPEN_EPS, E);
    match index {
        1 | 3 => ((-5.0, 10.0), open_tan),
        2 | 7 => ((-5.0, 1.0), open_log),
        4 => ((-1.0, 1.0), (-1.0 + OPEN_EPS, -1.0 + E)),
        5 | 6 | 8 => ((-5.0, 10.0), (-5.0, 10.0)),
        _ => unreachable!(),
    }
}

/// Builds SMD`index` at `(d_x + d_y)` dimensions.
pub fn make_smd(index: usize, d_x: usize, d_y: usize) -> Result<BilevelProblem> {
    if !(1..=8).contains(&index) {
        return Err(Error::config(format!("SMD index must be in 1..=8, got {index}")));
    }
    let lay = Layout::new(index, d_x, d_y)?;
    let ((xu2_lo, xu2_hi), (xl2_lo, xl2_hi)) = coupled_bounds(index);

    let mut lx = vec![-5.0; lay.p];
    let mut ux = vec![10.0; lay.p];
    lx.extend(std::iter::repeat_n(xu2_lo, lay.r));
    ux.extend(std::iter::repeat_n(xu2_hi, lay.r));
    let mut ly = vec![-5.0; lay.q + lay.s];
    let mut uy = vec![10.0; lay.q + lay.s];
    ly.extend(std::iter::repeat_n(xl2_lo, lay.r));
    uy.extend(std::iter::repeat_n(xl2_hi, lay.r));

    // optimum: x = 0, xl1 = 0 (1 for Rosenbrock), xl2 solves f3 at xu2 = 0
    let xl1_opt = if matches!(index, 5 | 8) { 1.0 } else { 0.0 };
    let xl2_opt = if matches!(index, 2 | 7) { 1.0 } else { 0.0 };
    let x_opt = vec![0.0; d_x];
    let mut y_opt = vec![xl1_opt; lay.q + lay.s];
    y_opt.extend(std::iter::repeat_n(xl2_opt, lay.r));
    let optimum = KnownOptimum {
        upper_value: 0.0,
        lower_value: 0.0,
        x: x_opt,
        y: y_opt,
    };

    let problem = BilevelProblem::new(
        format!("smd{index}"),
        lx,
        ux,
        ly,
        uy,
        Arc::new(move |x, y| upper_value(index, lay, x, y)),
        Arc::new(move |x, y| lower_value(index, lay, x, y)),
        Some(optimum),
    )?
    .with_comment(COMMENTS[index - 1]);
    Ok(if index == 6 {
        problem.with_expected_failure("infinite lower-level solution set")
    } else {
        problem
    })
}
