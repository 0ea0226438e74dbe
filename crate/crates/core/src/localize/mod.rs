//! Polynomial-time localizers.
//!
//! * [`localize_spectral`]: project every column on the top left singular
//!   vector and every row on the top right singular vector, then split each
//!   score vector in two.
//! * [`localize_denoised`]: the same pipeline on the soft-thresholded matrix,
//!   for small blocks.
//! * [`localize_multi`]: rank-r projections clustered by k-means into `r`
//!   signal clusters plus background.

mod kmeans;
mod mad;
mod split;

pub use kmeans::{kmeans, kmeans_with, KMeansResult, DEFAULT_MAX_LLOYD, DEFAULT_RESTARTS};
pub use mad::{mad_of, mad_sigma, MAD_SCALE};
pub use split::{split_1d, Axis, ScoreVector, Split};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, top_singular_with, SubspaceOptions, SvdFactors};
use crate::model::{LocalizationResult, NoiseSpec, Observation, SupportBlock};
use crate::rng::rng_from_seed;

/// Fresh Gaussian noise used to decouple the singular vectors from the
/// scores: vectors come from `X + Z'`, scores from `X - Z'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloneNoise {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpectralOptions {
    pub svd: SubspaceOptions,
    /// `None` runs on the single observation as given.
    pub clone: Option<CloneNoise>,
}

/// Soft threshold `sign(y) * max(|y| - t, 0)`.
#[inline]
pub fn soft_threshold(y: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let mag = y.abs() - t;
    if mag > 0.0 {
        mag.copysign(y)
    } else {
        0.0
    }
}

/// Column scores `X^T u` and row scores `X v`.
fn projection_scores(x: &Array2<f64>, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = x.dim();
    let data = x.as_slice().expect("standard layout");
    let mut cols = vec![0.0; n];
    let mut rows = vec![0.0; m];
    for (i, row) in data.chunks_exact(n).enumerate() {
        rows[i] = dot(row, v);
        axpy(&mut cols, u[i], row);
    }
    (cols, rows)
}

fn check_shape(x: &Observation) -> Result<()> {
    if x.m() < 2 || x.n() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 rows and 2 columns, got {}x{}",
            x.m(),
            x.n()
        )));
    }
    Ok(())
}

/// Singular vectors from `vec_src`, scores from `score_src`, two-way splits.
fn spectral_pipeline(
    vec_src: &Array2<f64>,
    score_src: &Array2<f64>,
    svd: &SubspaceOptions,
) -> Result<LocalizationResult> {
    let f: SvdFactors = top_singular_with(vec_src.view(), 1, svd)?.ensure_converged()?;
    let (col_scores, row_scores) = projection_scores(score_src, &f.u_col(0), &f.v_col(0));
    let rows = split::split_values(&row_scores)?;
    let cols = split::split_values(&col_scores)?;
    let base = if rows.degenerate || cols.degenerate {
        LocalizationResult::degenerate()
    } else {
        LocalizationResult {
            blocks: vec![SupportBlock {
                rows: rows.inside,
                cols: cols.inside,
            }],
            ..Default::default()
        }
    };
    Ok(base
        .with_diag("row_gap", rows.gap)
        .with_diag("col_gap", cols.gap)
        .with_diag("sigma1", f.s[0])
        .with_diag("svd_iterations", f.iterations as f64)
        .with_diag("svd_residual", f.residual))
}

fn cloned_pair(x: &Array2<f64>, clone: &CloneNoise) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(clone.sigma > 0.0 && clone.sigma.is_finite()) {
        return Err(Error::domain(format!(
            "clone noise sigma must be positive, got {}",
            clone.sigma
        )));
    }
    let (m, n) = x.dim();
    let z = NoiseSpec::gaussian(clone.sigma).sample_matrix(m, n, &mut rng_from_seed(clone.seed));
    Ok((x + &z, x - &z))
}

/// Vanilla spectral projection localizer for the dense regime.
pub fn localize_spectral(x: &Observation) -> Result<LocalizationResult> {
    localize_spectral_with(x, &SpectralOptions::default())
}

pub fn localize_spectral_with(
    x: &Observation,
    opts: &SpectralOptions,
) -> Result<LocalizationResult> {
    check_shape(x)?;
    match &opts.clone {
        None => spectral_pipeline(x.data(), x.data(), &opts.svd),
        Some(c) => {
            let (plus, minus) = cloned_pair(x.data(), c)?;
            Ok(spectral_pipeline(&plus, &minus, &opts.svd)?.with_diag("clone_sigma", c.sigma))
        }
    }
}

/// Threshold level for the de-noised localizer:
/// `t_mult * sigma * sqrt(ln max(m, n))` without size information, or
/// `t_mult * sigma * sqrt(ln(max(m, n) / (k_m k_n)))` (floored at 0) with it.
pub fn denoise_threshold(
    m: usize,
    n: usize,
    sigma: f64,
    t_mult: f64,
    sizes: Option<(usize, usize)>,
) -> f64 {
    let big = m.max(n) as f64;
    let log_term = match sizes {
        None => big.ln(),
        Some((km, kn)) => (big / (km as f64 * kn as f64)).ln().max(0.0),
    };
    t_mult * sigma * log_term.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseOptions {
    pub t_mult: f64,
    /// Block sizes `(k_m, k_n)` when known.
    pub sizes: Option<(usize, usize)>,
    pub spectral: SpectralOptions,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        DenoiseOptions {
            t_mult: 1.0,
            sizes: None,
            spectral: SpectralOptions::default(),
        }
    }
}

/// De-noised spectral localizer for the sparse regime: soft-threshold every
/// entry, then run the spectral pipeline (vectors and scores) on `eta_t(X)`.
/// `x` itself is not modified.
pub fn localize_denoised(x: &Observation, sigma: f64, t_mult: f64) -> Result<LocalizationResult> {
    localize_denoised_with(
        x,
        sigma,
        &DenoiseOptions {
            t_mult,
            ..Default::default()
        },
    )
}

pub fn localize_denoised_with(
    x: &Observation,
    sigma: f64,
    opts: &DenoiseOptions,
) -> Result<LocalizationResult> {
    check_shape(x)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(opts.t_mult > 0.0 && opts.t_mult.is_finite()) {
        return Err(Error::domain(format!(
            "t_mult must be positive, got {}",
            opts.t_mult
        )));
    }
    let t = denoise_threshold(x.m(), x.n(), sigma, opts.t_mult, opts.sizes);
    let y = x.data().mapv(|v| soft_threshold(v, t));
    let out = match &opts.spectral.clone {
        None => spectral_pipeline(&y, &y, &opts.spectral.svd)?,
        Some(c) => {
            let (plus, minus) = cloned_pair(x.data(), c)?;
            let plus = plus.mapv(|v| soft_threshold(v, t));
            let minus = minus.mapv(|v| soft_threshold(v, t));
            spectral_pipeline(&plus, &minus, &opts.spectral.svd)?.with_diag("clone_sigma", c.sigma)
        }
    };
    Ok(out.with_diag("threshold", t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiOptions {
    pub svd: SubspaceOptions,
    pub kmeans_seed: u64,
    pub restarts: usize,
}

impl Default for MultiOptions {
    fn default() -> Self {
        MultiOptions {
            svd: SubspaceOptions::default(),
            kmeans_seed: 0,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Clusters of a k-means run, with the background (smallest center norm)
/// removed. Returned clusters are sorted index lists in label order.
fn signal_clusters(km: &KMeansResult) -> (usize, Vec<Vec<usize>>) {
    let k = km.centers.nrows();
    let norms: Vec<f64> = km
        .centers
        .rows()
        .into_iter()
        .map(|c| c.iter().map(|e| e * e).sum::<f64>())
        .collect();
    let background = (0..k)
        .min_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)))
        .expect("k >= 1");
    let mut clusters = vec![Vec::new(); k];
    for (i, &l) in km.assignments.iter().enumerate() {
        clusters[l].push(i);
    }
    let signal = (0..k)
        .filter(|&c| c != background)
        .map(|c| std::mem::take(&mut clusters[c]))
        .collect();
    (background, signal)
}

fn block_mean(x: &Array2<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &i in rows {
        let row = x.row(i);
        for &j in cols {
            sum += row[j];
        }
    }
    sum / (rows.len() * cols.len()) as f64
}

/// Spectral localizer for `r` non-overlapping blocks.
///
/// Columns are projected onto span(U_r) and rows onto span(V_r); each set of
/// projections is clustered into `r + 1` groups. The group whose center has
/// the smallest norm is background. The `r` row groups are then paired with
/// the `r` column groups greedily by descending block mean of `X`, which is
/// also the order of the returned blocks.
pub fn localize_multi(x: &Observation, r: usize) -> Result<LocalizationResult> {
    localize_multi_with(x, r, &MultiOptions::default())
}

pub fn localize_multi_with(
    x: &Observation,
    r: usize,
    opts: &MultiOptions,
) -> Result<LocalizationResult> {
    let (m, n) = (x.m(), x.n());
    if r == 0 || r + 1 > m.min(n) {
        return Err(Error::domain(format!(
            "need 1 <= r and r + 1 <= min(m, n); got r = {r} for {m}x{n}"
        )));
    }
    let f = top_singular_with(x.data().view(), r, &opts.svd)?.ensure_converged()?;
    let data = x.as_slice();

    // Coordinates in the orthonormal bases: U_r^T X_{.j} and X_{i.} V_r.
    let mut col_coords = Array2::<f64>::zeros((n, r));
    let mut row_coords = Array2::<f64>::zeros((m, r));
    let u_cols: Vec<Vec<f64>> = (0..r).map(|c| f.u_col(c)).collect();
    let v_cols: Vec<Vec<f64>> = (0..r).map(|c| f.v_col(c)).collect();
    for c in 0..r {
        let mut acc = vec![0.0; n];
        for (i, row) in data.chunks_exact(n).enumerate() {
            axpy(&mut acc, u_cols[c][i], row);
            row_coords[[i, c]] = dot(row, &v_cols[c]);
        }
        col_coords.column_mut(c).assign(&ndarray::Array1::from(acc));
    }

    let row_km = kmeans(&row_coords, r + 1, opts.kmeans_seed, opts.restarts)?;
    let col_km = kmeans(&col_coords, r + 1, opts.kmeans_seed, opts.restarts)?;
    let (_, row_groups) = signal_clusters(&row_km);
    let (_, col_groups) = signal_clusters(&col_km);

    let diag = |res: LocalizationResult| {
        res.with_diag("row_inertia", row_km.inertia)
            .with_diag("col_inertia", col_km.inertia)
            .with_diag("sigma_r", f.s[r - 1])
            .with_diag("svd_iterations", f.iterations as f64)
    };
    if row_groups.iter().chain(&col_groups).any(|g| g.is_empty()) {
        return Ok(diag(LocalizationResult::degenerate()));
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(r * r);
    for (a, rg) in row_groups.iter().enumerate() {
        for (b, cg) in col_groups.iter().enumerate() {
            pairs.push((block_mean(x.data(), rg, cg), a, b));
        }
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut row_used = vec![false; r];
    let mut col_used = vec![false; r];
    let mut result = LocalizationResult::default();
    for (mean, a, b) in pairs {
        if row_used[a] || col_used[b] {
            continue;
        }
        row_used[a] = true;
        col_used[b] = true;
        let s = result.blocks.len();
        result.blocks.push(SupportBlock {
            rows: row_groups[a].clone(),
            cols: col_groups[b].clone(),
        });
        result.diagnostics.insert(format!("block_mean_{s}"), mean);
    }
    Ok(diag(result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, random_signal, snr_thresholds, Block, PlantedSignal};
    use proptest::prelude::*;

    fn noiseless(signal: &PlantedSignal) -> Observation {
        generate_instance(signal, &NoiseSpec::gaussian(0.0), 0)
            .unwrap()
            .0
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        for y in [-3.5, 0.0, 7.0] {
            assert_eq!(soft_threshold(y, 0.0), y);
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_properties(y in -50.0f64..50.0, z in -50.0f64..50.0, t in 0.0f64..10.0) {
            prop_assert_eq!(soft_threshold(-y, t), -soft_threshold(y, t));
            prop_assert!(soft_threshold(y, t).abs() <= y.abs());
            prop_assert!((soft_threshold(y, t) - soft_threshold(z, t)).abs() <= (y - z).abs() + 1e-12);
        }
    }

    #[test]
    fn spectral_noiseless_exact() {
        let s = random_signal(20, 20, 5, 5, 1, 1.0, 4).unwrap();
        let x = noiseless(&s);
        let r = localize_spectral(&x).unwrap();
        assert!(r.matches(&s), "{r:?}");
        assert!(r.diagnostics["row_gap"] > 0.0);
    }

    #[test]
    fn spectral_is_scale_equivariant() {
        let s = random_signal(60, 50, 12, 10, 1, 2.0, 8).unwrap();
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 3).unwrap();
        let base = localize_spectral(&x).unwrap();
        for c in [0.25, 3.0, 1000.0] {
            let scaled = localize_spectral(&x.map(|v| c * v).unwrap()).unwrap();
            assert_eq!(scaled.blocks, base.blocks, "scale {c}");
        }
    }

    #[test]
    fn spectral_rejects_tiny_shapes() {
        let x = Observation::new(Array2::from_elem((1, 5), 1.0)).unwrap();
        assert!(matches!(localize_spectral(&x), Err(Error::Domain(_))));
    }

    #[test]
    fn spectral_clone_mode() {
        let s = random_signal(200, 200, 40, 40, 1, 3.0, 2).unwrap();
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 5).unwrap();
        let opts = SpectralOptions {
            clone: Some(CloneNoise {
                sigma: 1.0,
                seed: 17,
            }),
            ..Default::default()
        };
        let r = localize_spectral_with(&x, &opts).unwrap();
        assert!(r.matches(&s));
        assert_eq!(r.diagnostics["clone_sigma"], 1.0);
    }

    #[test]
    fn spectral_pure_noise_rarely_matches() {
        let mut hits = 0;
        for t in 0..200u64 {
            let s = random_signal(40, 40, 5, 5, 1, 0.0, 1000 + t).unwrap();
            let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 5000 + t).unwrap();
            if let Ok(r) = localize_spectral(&x) {
                hits += r.matches(&s) as usize;
            }
        }
        assert!(hits <= 10, "{hits} chance matches");
    }

    #[test]
    fn spectral_dense_regime_monte_carlo() {
        let (n, k) = (500, 50);
        let t = snr_thresholds(n as f64, n as f64, k as f64, k as f64).unwrap();
        let lambda = 4.0 * t.snr_c_dense;
        let mut hits = 0;
        for trial in 0..100u64 {
            let s = random_signal(n, n, k, k, 1, lambda, trial).unwrap();
            let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 10_000 + trial).unwrap();
            hits += localize_spectral(&x)
                .map(|r| r.matches(&s))
                .unwrap_or(false) as usize;
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn denoised_noiseless_exact() {
        let s = random_signal(30, 25, 4, 6, 1, 2.0, 9).unwrap();
        let x = noiseless(&s);
        let r = localize_denoised(&x, 1e-9, 1.0).unwrap();
        assert!(r.matches(&s));
        assert!(r.diagnostics["threshold"] < 1e-8);
    }

    #[test]
    fn denoised_constant_matrix_is_degenerate() {
        let x = Observation::new(Array2::from_elem((8, 6), 4.0)).unwrap();
        let r = localize_denoised(&x, 1.0, 1.0).unwrap();
        assert!(r.is_degenerate());
        assert!(r.blocks.is_empty());
        assert!(matches!(
            localize_denoised(&x, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(localize_denoised(&x, 1.0, 0.0).is_err());
    }

    #[test]
    fn denoised_does_not_touch_input() {
        let s = random_signal(20, 20, 4, 4, 1, 3.0, 1).unwrap();
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 2).unwrap();
        let copy = x.clone();
        localize_denoised(&x, 1.0, 1.0).unwrap();
        assert_eq!(x, copy);
    }

    #[test]
    fn threshold_levels() {
        let t = denoise_threshold(400, 300, 2.0, 1.5, None);
        assert!((t - 3.0 * 400f64.ln().sqrt()).abs() < 1e-12);
        let t = denoise_threshold(400, 300, 1.0, 1.0, Some((10, 10)));
        assert!((t - 4f64.ln().sqrt()).abs() < 1e-12);
        assert_eq!(denoise_threshold(10, 10, 1.0, 1.0, Some((5, 5))), 0.0);
    }

    #[test]
    fn multi_noiseless_two_blocks() {
        let s = PlantedSignal::new(
            12,
            10,
            vec![
                Block {
                    rows: vec![0, 3, 5],
                    cols: vec![1, 2],
                    lambda: 2.0,
                },
                Block {
                    rows: vec![7, 8, 9],
                    cols: vec![5, 6, 9],
                    lambda: 1.0,
                },
            ],
        )
        .unwrap();
        let r = localize_multi(&noiseless(&s), 2).unwrap();
        assert!(r.matches(&s));
        // Ordered by descending block mean.
        assert_eq!(r.blocks[0].rows, vec![0, 3, 5]);
        assert!(r.diagnostics["block_mean_0"] > r.diagnostics["block_mean_1"]);
    }

    #[test]
    fn multi_domain_errors() {
        let x = Observation::new(Array2::from_elem((3, 3), 1.0)).unwrap();
        assert!(matches!(localize_multi(&x, 3), Err(Error::Domain(_))));
        assert!(localize_multi(&x, 0).is_err());
    }

    #[test]
    fn multi_r1_agrees_with_spectral() {
        let (n, k) = (200, 40);
        let t = snr_thresholds(n as f64, n as f64, k as f64, k as f64).unwrap();
        let lambda = 4.0 * t.snr_c_dense;
        let mut agree = 0;
        for trial in 0..50u64 {
            let s = random_signal(n, n, k, k, 1, lambda, 300 + trial).unwrap();
            let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 900 + trial).unwrap();
            let a = localize_spectral(&x).unwrap();
            let b = localize_multi(&x, 1).unwrap();
            agree += (a.blocks == b.blocks) as usize;
        }
        assert!(agree >= 45, "{agree}/50");
    }
}
