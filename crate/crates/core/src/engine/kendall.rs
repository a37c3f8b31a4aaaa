//! Kendall rank correlation (tau-b) in `O(n log n)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau: f64,
    /// One of the sequences is constant; `tau` is reported as 0.
    pub degenerate: bool,
}

/// Tie-corrected Kendall tau-b between two equally long sequences.
///
/// `(n0 - n1 - n2 + n3 - 2·swaps) / √((n0 - n1)(n0 - n2))` where `n1`, `n2`
/// count pairs tied in `a` and `b`, `n3` pairs tied in both, and `swaps` is
/// the number of inversions of `b` after sorting by `(a, b)`.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<KendallTau> {
    if a.len() != b.len() {
        return Err(Error::config(format!("kendall: lengths differ ({} vs {})", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::config("kendall: need at least two observations"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::numerical("kendall: NaN in input"));
    }

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let n0 = choose2(n as u64);
    let n1 = tied_pairs(&pairs, |p, q| p.0 == q.0);
    let n3 = tied_pairs(&pairs, |p, q| p.0 == q.0 && p.1 == q.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = {
        let mut ties = 0u64;
        let mut run = 1u64;
        for w in ys.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                ties += choose2(run);
                run = 1;
            }
        }
        ties + choose2(run)
    };

    let (left, right) = (n0 - n1, n0 - n2);
    if left == 0 || right == 0 {
        return Ok(KendallTau {
            tau: 0.0,
            degenerate: true,
        });
    }
    let numerator = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    let tau = numerator as f64 / (left as f64 * right as f64).sqrt();
    Ok(KendallTau {
        tau,
        degenerate: false,
    })
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

fn tied_pairs<F: Fn(&(f64, f64), &(f64, f64)) -> bool>(sorted: &[(f64, f64)], same: F) -> u64 {
    let mut ties = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            ties += choose2(run);
            run = 1;
        }
    }
    ties + choose2(run)
}

/// Stable merge sort of `v`, returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
