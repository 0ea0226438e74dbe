//! Dense linear algebra for the localizers.
//!
//! Only what the algorithms need: top-r singular triplets by block subspace
//! iteration (never forming `X^T X`), orthogonal projection, and the spectral
//! norm. Blocks of vectors are kept as `Vec<Vec<f64>>` columns; matrices are
//! row-major `ndarray` arrays.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Seed of the start block. Fixed so that every call is reproducible.
pub const START_SEED: u64 = 0xC0FFEE;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Extra block columns carried by default. Near-degenerate leading singular
/// values (pure noise, signals at the detection boundary) otherwise need
/// thousands of sweeps.
pub const DEFAULT_OVERSAMPLE: usize = 2;
pub const DEFAULT_MAX_ITER: usize = 2000;

/// Truncated SVD `X ~ U diag(S) V^T` with convergence information.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// `m x r`, orthonormal columns.
    pub u: Array2<f64>,
    /// Descending, non-negative.
    pub s: Vec<f64>,
    /// `n x r`, orthonormal columns.
    pub v: Array2<f64>,
    pub iterations: usize,
    /// Frobenius norm of `X V - U diag(S)`.
    pub residual: f64,
    pub converged: bool,
}

impl SvdFactors {
    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }

    pub fn u_col(&self, c: usize) -> Vec<f64> {
        self.u.column(c).to_vec()
    }

    pub fn v_col(&self, c: usize) -> Vec<f64> {
        self.v.column(c).to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block columns carried along to speed up convergence of the
    /// wanted `r`. Zero reproduces plain subspace iteration.
    pub oversample: usize,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        SubspaceOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `X * cols[c]` for every column of the block.
fn mul_block(x: &[f64], m: usize, n: usize, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; m]; cols.len()];
    for (i, row) in x.chunks_exact(n).enumerate() {
        for (o, c) in out.iter_mut().zip(cols) {
            o[i] = dot(row, c);
        }
    }
    out
}

/// `X^T * cols[c]` for every column of the block.
fn mul_t_block(x: &[f64], m: usize, n: usize, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; cols.len()];
    for (i, row) in x.chunks_exact(n).enumerate().take(m) {
        for (o, c) in out.iter_mut().zip(cols) {
            let a = c[i];
            if a != 0.0 {
                axpy(o, a, row);
            }
        }
    }
    out
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// vanish (rank deficiency) are replaced by the first standard basis vector
/// that is not yet in the span, so the result is always orthonormal.
pub(crate) fn orthonormalize(cols: &mut [Vec<f64>]) {
    let dim = cols.first().map_or(0, |c| c.len());
    let mut next_basis = 0usize;
    for c in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(c);
        let v = &mut rest[0];
        let original = norm(v);
        for _ in 0..2 {
            for q in done.iter() {
                let h = dot(q, v);
                axpy(v, -h, q);
            }
        }
        let mut nv = norm(v);
        if !(nv > 1e-12 * original.max(f64::MIN_POSITIVE)) || original == 0.0 {
            // Fall back to a basis vector outside the current span.
            loop {
                assert!(next_basis < dim, "cannot complete an orthonormal basis");
                v.iter_mut().for_each(|e| *e = 0.0);
                v[next_basis] = 1.0;
                next_basis += 1;
                for _ in 0..2 {
                    for q in done.iter() {
                        let h = dot(q, v);
                        axpy(v, -h, q);
                    }
                }
                nv = norm(v);
                if nv > 1e-8 {
                    break;
                }
            }
        }
        v.iter_mut().for_each(|e| *e /= nv);
    }
}

/// Full SVD of a small square matrix (given as rows) by one-sided Jacobi.
/// Returns `(P, sigma, Q)` with `B = P diag(sigma) Q^T`, descending sigma,
/// `P` and `Q` as column lists.
fn small_svd(b: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let k = b.len();
    // Columns of B.
    let mut a: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|i| b[i][j]).collect()).collect();
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..k {
            for r in (p + 1)..k {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[r], &a[r]);
                let gamma = dot(&a[p], &a[r]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut q] {
                    for i in 0..k {
                        let x = mat[p][i];
                        let y = mat[r][i];
                        mat[p][i] = c * x - s * y;
                        mat[r][i] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let sig: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    order.sort_by(|&x, &y| sig[y].total_cmp(&sig[x]).then(x.cmp(&y)));
    let sigma: Vec<f64> = order.iter().map(|&j| sig[j]).collect();
    let mut p: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| {
            if sig[j] > 0.0 {
                a[j].iter().map(|e| e / sig[j]).collect()
            } else {
                vec![0.0; k]
            }
        })
        .collect();
    let q: Vec<Vec<f64>> = order.iter().map(|&j| q[j].clone()).collect();
    // Tiny or zero singular values leave P columns inaccurate; re-orthonormalize.
    orthonormalize(&mut p);
    (p, sigma, q)
}

fn to_array(cols: &[Vec<f64>], rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols.len()), |(i, c)| cols[c][i])
}

/// Top `r` singular triplets of `x` with default options.
pub fn top_singular(x: &Array2<f64>, r: usize, tol: f64, max_iter: usize) -> Result<SvdFactors> {
    top_singular_with(
        x.view(),
        r,
        &SubspaceOptions {
            tol,
            max_iter,
            oversample: DEFAULT_OVERSAMPLE,
        },
    )
}

/// Block subspace iteration `V <- orth(X^T orth(X V))`.
///
/// Stops when every wanted Ritz value changes by less than `tol` relative
/// and `||X V - U S||_F <= tol * S[0]`. On hitting `max_iter` the last
/// iterate is returned with `converged = false`. Columns of `U` are signed so
/// that their largest-magnitude entry is positive.
pub fn top_singular_with(
    x: ArrayView2<f64>,
    r: usize,
    opts: &SubspaceOptions,
) -> Result<SvdFactors> {
    let (m, n) = x.dim();
    if r == 0 || r > m.min(n) {
        return Err(Error::domain(format!(
            "rank {r} outside 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::domain("max_iter must be positive"));
    }
    let owned;
    let data: &[f64] = match x.as_slice() {
        Some(s) => s,
        None => {
            owned = x.as_standard_layout().into_owned();
            owned.as_slice().expect("standard layout")
        }
    };
    let b = (r + opts.oversample).min(m.min(n));

    let mut rng = rng_from_seed(START_SEED);
    let mut v: Vec<Vec<f64>> = (0..b)
        .map(|_| {
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    orthonormalize(&mut v);
    let mut w = mul_block(data, m, n, &v);

    let mut prev: Option<Vec<f64>> = None;
    let mut iter = 0;
    loop {
        iter += 1;
        let mut u = w;
        orthonormalize(&mut u);
        let mut y = mul_t_block(data, m, n, &u);
        orthonormalize(&mut y);
        v = y;
        w = mul_block(data, m, n, &v);

        // Rayleigh-Ritz on span(U) x span(V): B = U^T X V.
        let bmat: Vec<Vec<f64>> = (0..b)
            .map(|i| (0..b).map(|j| dot(&u[i], &w[j])).collect())
            .collect();
        let (p, sigma, q) = small_svd(&bmat);

        let mut ritz_u = vec![vec![0.0; m]; r];
        let mut ritz_v = vec![vec![0.0; n]; r];
        let mut xv = vec![vec![0.0; m]; r];
        for c in 0..r {
            for k in 0..b {
                axpy(&mut ritz_u[c], p[c][k], &u[k]);
                axpy(&mut ritz_v[c], q[c][k], &v[k]);
                axpy(&mut xv[c], q[c][k], &w[k]);
            }
        }
        let mut res2 = 0.0;
        for c in 0..r {
            for i in 0..m {
                let d = xv[c][i] - ritz_u[c][i] * sigma[c];
                res2 += d * d;
            }
        }
        let residual = res2.sqrt();
        let top = sigma[0];
        let values_settled = prev.as_ref().is_some_and(|old| {
            (0..r).all(|c| {
                (sigma[c] - old[c]).abs() <= opts.tol * sigma[c] + 16.0 * f64::EPSILON * top
            })
        });
        let residual_ok = residual <= opts.tol * top || (top == 0.0 && residual == 0.0);
        let converged = values_settled && residual_ok;

        if converged || iter >= opts.max_iter {
            for c in 0..r {
                let lead = ritz_u[c]
                    .iter()
                    .enumerate()
                    .fold((0usize, 0.0f64), |best, (i, &e)| {
                        if e.abs() > best.1 {
                            (i, e.abs())
                        } else {
                            best
                        }
                    })
                    .0;
                if ritz_u[c][lead] < 0.0 {
                    ritz_u[c].iter_mut().for_each(|e| *e = -*e);
                    ritz_v[c].iter_mut().for_each(|e| *e = -*e);
                }
            }
            return Ok(SvdFactors {
                u: to_array(&ritz_u, m),
                s: sigma[..r].to_vec(),
                v: to_array(&ritz_v, n),
                iterations: iter,
                residual,
                converged,
            });
        }
        prev = Some(sigma[..r].to_vec());
    }
}

/// Orthogonal projection `U U^T x` onto the span of orthonormal columns `U`.
pub fn project_onto(u: &Array2<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if u.nrows() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {}", u.nrows()),
            got: format!("length {}", x.len()),
        });
    }
    let coeffs = coordinates(u, x)?;
    let mut out = vec![0.0; x.len()];
    for (c, &a) in coeffs.iter().enumerate() {
        for (o, &e) in out.iter_mut().zip(u.column(c)) {
            *o += a * e;
        }
    }
    Ok(out)
}

/// Coordinates `U^T x` of the projection in the orthonormal basis `U`.
pub fn coordinates(u: &Array2<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if u.nrows() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {}", u.nrows()),
            got: format!("length {}", x.len()),
        });
    }
    Ok(u.columns()
        .into_iter()
        .map(|col| col.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// Largest singular value (`r = 1`, `tol = 1e-8`).
pub fn spectral_norm(x: &Array2<f64>) -> Result<f64> {
    let f = top_singular(x, 1, DEFAULT_TOL, DEFAULT_MAX_ITER)?.ensure_converged()?;
    Ok(f.s[0])
}
