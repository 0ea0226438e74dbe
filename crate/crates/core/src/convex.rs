//! Convex relaxation of single-block localization.
//!
//! maximize `<X, M>` subject to `0 <= M <= 1`, `||M||_* <= sqrt(k_m k_n)` and
//! `<M, 1 1^T> = k_m k_n`, solved by ADMM with projections onto the
//! constraint sets. Every projection is closed form; the nuclear-ball step
//! takes a full SVD, so this is meant for matrices up to about 100 x 100.

use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{top_singular, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::localize::split_1d;
use crate::model::{LocalizationResult, Observation, SupportBlock};

pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_ADMM_ITER: usize = 2000;
pub const DEFAULT_FEAS_TOL: f64 = 1e-5;
pub const DEFAULT_ZERO_TOL: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct RelaxationSolution {
    pub m_hat: Array2<f64>,
    /// `<X, M_hat>`.
    pub objective: f64,
    /// Largest of the consensus residual and the constraint violations of
    /// `m_hat` (box, relative nuclear norm, relative total).
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Nuclear-norm radius `sqrt(k_m k_n)`.
    pub radius: f64,
    pub target_sum: f64,
    /// `rho * (b ||dz||^2 + sum_i ||du_i||^2)` per iteration, `b` the number
    /// of copies; non-increasing for exact projections.
    pub merit_trace: Vec<f64>,
}

/// Violations of the three constraints, each scaled like the tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violations {
    /// `max(0, -min M, max M - 1)`.
    pub bx: f64,
    /// `max(0, ||M||_* / radius - 1)`.
    pub nuclear: f64,
    /// `|<M, 1 1^T> - target| / target`.
    pub total: f64,
}

impl Violations {
    pub fn max(&self) -> f64 {
        self.bx.max(self.nuclear).max(self.total)
    }
}

impl RelaxationSolution {
    pub fn violations(&self) -> Violations {
        violations(&self.m_hat, self.radius, self.target_sum)
    }

    /// Writes `m_hat` in the model's binary matrix format.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        Observation::new(self.m_hat.clone())?.write_binary(w)
    }
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (m, n) = a.dim();
    DMatrix::from_row_slice(m, n, a.as_slice().expect("standard layout"))
}

pub fn nuclear_norm(a: &Array2<f64>) -> f64 {
    to_dmatrix(a).singular_values().iter().sum()
}

pub fn violations(m_hat: &Array2<f64>, radius: f64, target: f64) -> Violations {
    let lo = m_hat.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Violations {
        bx: (-lo).max(hi - 1.0).max(0.0),
        nuclear: (nuclear_norm(m_hat) / radius - 1.0).max(0.0),
        total: (m_hat.sum() - target).abs() / target,
    }
}

/// Euclidean projection of a non-negative vector onto
/// `{s >= 0, sum(s) <= radius}`.
pub fn project_l1_ball(s: &[f64], radius: f64) -> Vec<f64> {
    if s.iter().sum::<f64>() <= radius {
        return s.to_vec();
    }
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - radius) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    s.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projection onto the nuclear-norm ball of the given radius: soft-threshold
/// the singular values, keep the singular vectors.
pub fn project_nuclear_ball(a: &Array2<f64>, radius: f64) -> Array2<f64> {
    let svd = to_dmatrix(a).svd(true, true);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    if s.iter().sum::<f64>() <= radius {
        return a.clone();
    }
    let shrunk = project_l1_ball(&s, radius);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let (m, n) = a.dim();
    let mut out = Array2::zeros((m, n));
    for (c, &sc) in shrunk.iter().enumerate() {
        if sc == 0.0 {
            continue;
        }
        for i in 0..m {
            let ui = u[(i, c)] * sc;
            if ui == 0.0 {
                continue;
            }
            let mut row = out.row_mut(i);
            for j in 0..n {
                row[j] += ui * vt[(c, j)];
            }
        }
    }
    out
}

fn sq_dist(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projection onto `{0 <= M <= 1, sum(M) = target}`: `clip(v - theta, 0, 1)`
/// with `theta` found by bisection and then solved exactly on the free set.
pub fn project_capped_simplex(v: &Array2<f64>, target: f64) -> Array2<f64> {
    let total = |theta: f64| v.iter().map(|&e| (e - theta).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    let (mut free_sum, mut free, mut ones) = (0.0, 0usize, 0usize);
    for &e in v.iter() {
        let t = e - theta;
        if t >= 1.0 {
            ones += 1;
        } else if t > 0.0 {
            free += 1;
            free_sum += e;
        }
    }
    if free > 0 {
        let exact = (free_sum - (target - ones as f64)) / free as f64;
        // Keep the exact value only if it leaves every entry in its class.
        if v.iter().all(|&e| {
            let (a, b) = (e - theta, e - exact);
            (a >= 1.0) == (b >= 1.0) && (a > 0.0) == (b > 0.0)
        }) {
            theta = exact;
        }
    }
    v.mapv(|e| (e - theta).clamp(0.0, 1.0))
}

/// How the three constraint sets are split among ADMM blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Splitting {
    /// Two blocks: box and total jointly (with the linear objective), and
    /// the nuclear ball. The returned matrix satisfies the box and total
    /// constraints exactly.
    #[default]
    BoxTotal,
    /// One consensus copy per constraint set.
    Consensus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationOptions {
    pub rho: f64,
    pub max_iter: usize,
    pub feas_tol: f64,
    pub splitting: Splitting,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        RelaxationOptions {
            rho: DEFAULT_RHO,
            max_iter: DEFAULT_ADMM_ITER,
            feas_tol: DEFAULT_FEAS_TOL,
            splitting: Splitting::default(),
        }
    }
}

/// Solves the relaxation with the default options.
pub fn solve_relaxation_default(
    x: &Observation,
    k_m: usize,
    k_n: usize,
) -> Result<RelaxationSolution> {
    solve_relaxation_with(x, k_m, k_n, &RelaxationOptions::default())
}

pub fn solve_relaxation(
    x: &Observation,
    k_m: usize,
    k_n: usize,
    rho: f64,
    max_iter: usize,
    feas_tol: f64,
) -> Result<RelaxationSolution> {
    solve_relaxation_with(
        x,
        k_m,
        k_n,
        &RelaxationOptions {
            rho,
            max_iter,
            feas_tol,
            ..Default::default()
        },
    )
}

/// ADMM on the relaxation. With [`Splitting::BoxTotal`]:
///
/// ```text
/// x = P_{box, total}(z - u + X / rho)
/// z = P_nuclear(x + u)
/// u += x - z
/// ```
///
/// and `x` is returned. With [`Splitting::Consensus`]:
///
/// ```text
/// x1 = clip(z - u1 + X / rho, 0, 1)
/// x2 = P_nuclear(z - u2)
/// x3 = P_total(z - u3)
/// z  = mean(x_i + u_i),  u_i += x_i - z
/// ```
///
/// and `z` is returned. Either way the run stops once both residuals and
/// every constraint violation of the returned matrix are at most `feas_tol`;
/// otherwise the last iterate comes back with `converged = false`.
pub fn solve_relaxation_with(
    x: &Observation,
    k_m: usize,
    k_n: usize,
    opts: &RelaxationOptions,
) -> Result<RelaxationSolution> {
    let (m, n) = (x.m(), x.n());
    if k_m == 0 || k_n == 0 || k_m > m || k_n > n {
        return Err(Error::domain(format!(
            "block size {k_m}x{k_n} infeasible for a {m}x{n} matrix"
        )));
    }
    let rho = opts.rho;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    if !(opts.feas_tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::domain("feas_tol and max_iter must be positive"));
    }
    let target = (k_m * k_n) as f64;
    let radius = target.sqrt();
    let size = (m * n) as f64;
    let xs = x.data() / rho;
    let start = Array2::from_elem((m, n), target / size);
    let blocks = match opts.splitting {
        Splitting::BoxTotal => 1.0,
        Splitting::Consensus => 3.0,
    };

    let mut z = start.clone();
    let mut out = start;
    let mut u = vec![Array2::<f64>::zeros((m, n)); blocks as usize];
    let mut merit_trace = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (z_new, du2) = match opts.splitting {
            Splitting::BoxTotal => {
                let xb = project_capped_simplex(&(&z - &u[0] + &xs), target);
                let z_new = project_nuclear_ball(&(&xb + &u[0]), radius);
                let step = &xb - &z_new;
                u[0] += &step;
                out = xb;
                (z_new, step.iter().map(|v| v * v).sum::<f64>())
            }
            Splitting::Consensus => {
                let x1 = (&z - &u[0] + &xs).mapv(|v| v.clamp(0.0, 1.0));
                let x2 = project_nuclear_ball(&(&z - &u[1]), radius);
                let mut x3 = &z - &u[2];
                let shift = (target - x3.sum()) / size;
                x3.mapv_inplace(|v| v + shift);
                let copies = [x1, x2, x3];
                let mut z_new = Array2::zeros((m, n));
                for (xi, ui) in copies.iter().zip(&u) {
                    z_new += xi;
                    z_new += ui;
                }
                z_new /= 3.0;
                // The dual update equals the consensus gap.
                let mut du2 = 0.0;
                for (xi, ui) in copies.iter().zip(u.iter_mut()) {
                    let step = xi - &z_new;
                    du2 += step.iter().map(|v| v * v).sum::<f64>();
                    *ui += &step;
                }
                out = z_new.clone();
                (z_new, du2)
            }
        };
        let dz2 = sq_dist(&z_new, &z);
        z = z_new;
        merit_trace.push(rho * (blocks * dz2 + du2));

        let consensus = du2.sqrt();
        dual = rho * (blocks * dz2).sqrt();
        primal = consensus;
        if consensus <= opts.feas_tol && dual <= opts.feas_tol {
            primal = consensus.max(violations(&out, radius, target).max());
            if primal <= opts.feas_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        primal = primal.max(violations(&out, radius, target).max());
    }
    let objective = (x.data() * &out).sum();
    Ok(RelaxationSolution {
        m_hat: out,
        objective,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        radius,
        target_sum: target,
        merit_trace,
    })
}

/// Supports from the top singular pair of `M_hat`: rows with
/// `|u_i| > zero_tol * max |u|`, columns likewise.
pub fn extract_support(sol: &RelaxationSolution, zero_tol: f64) -> Result<LocalizationResult> {
    if !(0.0..1.0).contains(&zero_tol) {
        return Err(Error::domain(format!(
            "zero_tol must lie in [0, 1), got {zero_tol}"
        )));
    }
    let scale = sol.m_hat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale <= 1e-12 {
        return Ok(LocalizationResult::degenerate());
    }
    let f = top_singular(&sol.m_hat, 1, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let pick = |v: Vec<f64>| -> Vec<usize> {
        let top = v.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        (0..v.len())
            .filter(|&i| v[i].abs() > zero_tol * top)
            .collect()
    };
    let rows = pick(f.u_col(0));
    let cols = pick(f.v_col(0));
    Ok(LocalizationResult {
        blocks: vec![SupportBlock { rows, cols }],
        ..Default::default()
    }
    .with_diag("sigma1", f.s[0])
    .with_diag("admm_iterations", sol.iterations as f64)
    .with_diag("admm_converged", sol.converged as u8 as f64)
    .with_diag("primal_residual", sol.primal_residual))
}

/// Same singular pair, but rows and columns split by the max-gap rule on
/// `|u|` and `|v|`.
pub fn extract_support_gap(sol: &RelaxationSolution) -> Result<LocalizationResult> {
    use crate::localize::{Axis, ScoreVector};
    let f = top_singular(&sol.m_hat, 1, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let abs = |v: Vec<f64>| v.into_iter().map(f64::abs).collect::<Vec<_>>();
    let rows = split_1d(&ScoreVector {
        values: abs(f.u_col(0)),
        axis: Axis::Rows,
    })?;
    let cols = split_1d(&ScoreVector {
        values: abs(f.v_col(0)),
        axis: Axis::Columns,
    })?;
    if rows.degenerate || cols.degenerate {
        return Ok(LocalizationResult::degenerate());
    }
    Ok(LocalizationResult {
        blocks: vec![SupportBlock {
            rows: rows.inside,
            cols: cols.inside,
        }],
        ..Default::default()
    })
}

/// Relaxation followed by [`extract_support`] with the defaults.
pub fn localize_convex(x: &Observation, k_m: usize, k_n: usize) -> Result<LocalizationResult> {
    let sol = solve_relaxation_default(x, k_m, k_n)?;
    extract_support(&sol, DEFAULT_ZERO_TOL)
}
