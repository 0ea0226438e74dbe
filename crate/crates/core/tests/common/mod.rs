//! Reference implementations used only as oracles by the integration tests.
//! They share no code with the library.

#![allow(dead_code)]

use ndarray::Array2;

/// Singular values by one-sided (Hestenes) Jacobi rotations, descending.
pub fn jacobi_singular_values(a: &Array2<f64>) -> Vec<f64> {
    // Work on the orientation with fewer columns.
    let mut w = if a.ncols() <= a.nrows() {
        a.clone()
    } else {
        a.t().to_owned()
    };
    let (rows, cols) = w.dim();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (w[[i, p]], w[[i, q]]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 {
                    continue;
                }
                let denom = (alpha * beta).sqrt();
                if denom == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / denom);
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (w[[i, p]], w[[i, q]]);
                    w[[i, p]] = c * x - s * y;
                    w[[i, q]] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| w.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Largest `k_m x k_n` block sum, by enumerating every row subset and every
/// column subset.
pub fn brute_force_best_sum(x: &Array2<f64>, k_m: usize, k_n: usize) -> f64 {
    let row_sets = subsets(x.nrows(), k_m);
    let col_sets = subsets(x.ncols(), k_n);
    let mut best = f64::NEG_INFINITY;
    for rows in &row_sets {
        for cols in &col_sets {
            let mut s = 0.0;
            for &i in rows {
                for &j in cols {
                    s += x[[i, j]];
                }
            }
            best = best.max(s);
        }
    }
    best
}

pub fn block_sum(x: &Array2<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    rows.iter()
        .flat_map(|&i| cols.iter().map(move |&j| x[[i, j]]))
        .sum()
}
