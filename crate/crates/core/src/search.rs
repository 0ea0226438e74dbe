//! Exhaustive largest-sum submatrix search and its greedy multi-block
//! extension.
//!
//! For a fixed column subset `J` the best row subset is simply the `k_m`
//! rows with the largest partial sums over `J`, so only one axis needs to be
//! enumerated. The axis with fewer subsets is chosen.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{LocalizationResult, Observation, SupportBlock};

pub const DEFAULT_MAX_ENUMERATIONS: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_enumerations: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_enumerations: DEFAULT_MAX_ENUMERATIONS,
        }
    }
}

impl SearchBudget {
    pub fn new(max_enumerations: u64) -> Result<Self> {
        if max_enumerations == 0 {
            return Err(Error::validation("search budget must be positive"));
        }
        Ok(SearchBudget { max_enumerations })
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Subsets that [`combinatorial_search`] would enumerate for these sizes.
pub fn enumeration_count(m: usize, n: usize, k_m: usize, k_n: usize) -> u128 {
    binomial(m, k_m).min(binomial(n, k_n))
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let mut v = next;
        loop {
            let count = binomial(n - v - 1, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}

/// Advances `c` to the next `k`-subset of `0..n`; false after the last one.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Clone, Debug)]
struct Candidate {
    sum: f64,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// Larger sum first, then lexicographically smaller `(rows, cols)`.
fn better(a: &Candidate, b: &Candidate) -> Ordering {
    b.sum
        .total_cmp(&a.sum)
        .then_with(|| a.rows.cmp(&b.rows))
        .then_with(|| a.cols.cmp(&b.cols))
}

fn pick_best(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better(&a, &b) == Ordering::Greater {
            b
        } else {
            a
        }),
        (a, b) => a.or(b),
    }
}

/// Search over a `p x q` matrix `a`, enumerating `kq`-subsets of its
/// columns and choosing `kp` rows by sorting. With `transposed` set, `a` is
/// the transpose of the problem and candidates are reported (and compared)
/// in the original orientation.
fn search_local(a: &Array2<f64>, kp: usize, kq: usize, transposed: bool) -> Candidate {
    let (p, q) = a.dim();
    let total = binomial(q, kq);
    let chunks = (rayon::current_num_threads() as u128 * 8).min(total).max(1);
    let per = total.div_ceil(chunks);
    (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let start = c as u128 * per;
            let end = (start + per).min(total);
            if start >= end {
                return None;
            }
            let mut enumerated = unrank(q, kq, start);
            let mut order: Vec<usize> = (0..p).collect();
            let mut sums = vec![0.0; p];
            let mut best: Option<Candidate> = None;
            let mut rank = start;
            loop {
                for (i, s) in sums.iter_mut().enumerate() {
                    let row = a.row(i);
                    *s = enumerated.iter().map(|&j| row[j]).sum();
                }
                let by_score = |x: &usize, y: &usize| sums[*y].total_cmp(&sums[*x]).then(x.cmp(y));
                if kp < p {
                    order.select_nth_unstable_by(kp - 1, by_score);
                }
                let mut picked = order[..kp].to_vec();
                picked.sort_unstable();
                let sum = picked.iter().map(|&i| sums[i]).sum();
                let cand = if transposed {
                    Candidate {
                        sum,
                        rows: enumerated.clone(),
                        cols: picked,
                    }
                } else {
                    Candidate {
                        sum,
                        rows: picked,
                        cols: enumerated.clone(),
                    }
                };
                if best
                    .as_ref()
                    .is_none_or(|b| better(&cand, b) == Ordering::Less)
                {
                    best = Some(cand);
                }
                rank += 1;
                if rank >= end || !next_combination(&mut enumerated, q) {
                    break;
                }
            }
            best
        })
        .reduce(|| None, pick_best)
        .expect("at least one subset")
}

/// Best block within the given row and column pools (sorted global indices).
fn search_pools(
    x: &Observation,
    row_pool: &[usize],
    col_pool: &[usize],
    k_m: usize,
    k_n: usize,
    budget: &SearchBudget,
) -> Result<Candidate> {
    let (p, q) = (row_pool.len(), col_pool.len());
    if k_m == 0 || k_n == 0 || k_m > p || k_n > q {
        return Err(Error::domain(format!(
            "block size {k_m}x{k_n} does not fit in {p}x{q} available rows/columns"
        )));
    }
    let required = enumeration_count(p, q, k_m, k_n);
    if required > budget.max_enumerations as u128 {
        return Err(Error::BudgetExceeded {
            required,
            budget: budget.max_enumerations,
        });
    }
    let data = x.data();
    let sub = Array2::from_shape_fn((p, q), |(i, j)| data[[row_pool[i], col_pool[j]]]);
    // Pools are sorted, so local lexicographic order is global order.
    let cand = if binomial(q, k_n) <= binomial(p, k_m) {
        search_local(&sub, k_m, k_n, false)
    } else {
        search_local(&sub.t().as_standard_layout().into_owned(), k_n, k_m, true)
    };
    Ok(Candidate {
        sum: cand.sum,
        rows: cand.rows.iter().map(|&i| row_pool[i]).collect(),
        cols: cand.cols.iter().map(|&j| col_pool[j]).collect(),
    })
}

/// Exact maximizer of the block sum over all `k_m x k_n` submatrices.
/// Ties go to the lexicographically smallest sorted `(rows, cols)`.
pub fn combinatorial_search(
    x: &Observation,
    k_m: usize,
    k_n: usize,
    budget: &SearchBudget,
) -> Result<LocalizationResult> {
    greedy_multi_search(x, k_m, k_n, 1, budget)
}

/// `r` rounds of [`combinatorial_search`], each restricted to the rows and
/// columns not used by earlier rounds. Blocks are in extraction order.
pub fn greedy_multi_search(
    x: &Observation,
    k_m: usize,
    k_n: usize,
    r: usize,
    budget: &SearchBudget,
) -> Result<LocalizationResult> {
    let (m, n) = (x.m(), x.n());
    if r == 0 || r.saturating_mul(k_m) > m || r.saturating_mul(k_n) > n {
        return Err(Error::domain(format!(
            "{r} blocks of {k_m}x{k_n} do not fit in {m}x{n}"
        )));
    }
    let mut row_pool: Vec<usize> = (0..m).collect();
    let mut col_pool: Vec<usize> = (0..n).collect();
    let mut out = LocalizationResult::default();
    for round in 0..r {
        let best = search_pools(x, &row_pool, &col_pool, k_m, k_n, budget)?;
        row_pool.retain(|i| best.rows.binary_search(i).is_err());
        col_pool.retain(|j| best.cols.binary_search(j).is_err());
        out.diagnostics
            .insert(format!("block_sum_{round}"), best.sum);
        out.blocks.push(SupportBlock {
            rows: best.rows,
            cols: best.cols,
        });
    }
    out.diagnostics.insert(
        "enumerations".into(),
        enumeration_count(m, n, k_m, k_n) as f64,
    );
    Ok(out)
}
