use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_stream;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_LLOYD: usize = 100;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    /// Cluster label of every point, each `< k`.
    pub assignments: Vec<usize>,
    /// `k x d` centers.
    pub centers: Array2<f64>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
    /// Inertia after every assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, then D^2-weighted draws.
fn seed_centers<R: Rng>(points: &Array2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let p = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..p);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|x| sq_dist(x, centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = p - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding leaving us on a zero-weight point.
            if d2[chosen] == 0.0 {
                chosen = d2
                    .iter()
                    .enumerate()
                    .rev()
                    .find(|(_, &w)| w > 0.0)
                    .map(|(i, _)| i)
                    .unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..p)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, x) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, centers.row(c)));
        }
    }
    centers
}

/// Nearest center per point (ties to the lowest center index) and the
/// resulting inertia.
fn assign(
    points: &Array2<f64>,
    centers: &Array2<f64>,
    labels: &mut [usize],
    dists: &mut [f64],
) -> f64 {
    let mut inertia = 0.0;
    for (i, x) in points.rows().into_iter().enumerate() {
        let mut best = (0usize, f64::INFINITY);
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d = sq_dist(x, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        labels[i] = best.0;
        dists[i] = best.1;
        inertia += best.1;
    }
    inertia
}

struct Run {
    labels: Vec<usize>,
    centers: Array2<f64>,
    inertia: f64,
    trace: Vec<f64>,
}

fn lloyd<R: Rng>(points: &Array2<f64>, k: usize, max_iter: usize, rng: &mut R) -> Run {
    let (p, d) = points.dim();
    let mut centers = seed_centers(points, k, rng);
    let mut labels = vec![0usize; p];
    let mut dists = vec![0.0; p];
    let mut inertia = assign(points, &centers, &mut labels, &mut dists);
    let mut trace = vec![inertia];
    for _ in 0..max_iter {
        // Update step.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, x) in points.rows().into_iter().enumerate() {
            let mut row = sums.row_mut(labels[i]);
            row += &x;
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centers.row_mut(c).assign(&mean);
            }
        }
        // Empty clusters move to the point farthest from its center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..p)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    centers.row_mut(c).assign(&points.row(i));
                    counts[labels[i]] -= 1;
                    counts[c] = 1;
                    labels[i] = c;
                    dists[i] = 0.0;
                }
            }
        }
        let previous = labels.clone();
        inertia = assign(points, &centers, &mut labels, &mut dists);
        trace.push(inertia);
        if labels == previous {
            break;
        }
    }
    Run {
        labels,
        centers,
        inertia,
        trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding; the lowest-inertia run out of
/// `restarts` is returned. Restart `i` draws from stream `i` of `seed`.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    kmeans_with(points, k, seed, restarts, DEFAULT_MAX_LLOYD)
}

pub fn kmeans_with(
    points: &Array2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<KMeansResult> {
    let p = points.nrows();
    if k == 0 || k > p {
        return Err(Error::domain(format!("k = {k} must lie in 1..={p}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("k-means points must be finite"));
    }
    let restarts = restarts.max(1);
    let mut best: Option<Run> = None;
    let mut restart_inertias = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let mut rng = rng_stream(seed, r as u64);
        let run = lloyd(points, k, max_iter, &mut rng);
        restart_inertias.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(KMeansResult {
        assignments: best.labels,
        centers: best.centers,
        inertia: best.inertia,
        inertia_trace: best.trace,
        restart_inertias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand_distr::StandardNormal;

    /// Same partition up to relabeling.
    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        let mut map = std::collections::HashMap::new();
        let mut rev = std::collections::HashMap::new();
        a.iter()
            .zip(b)
            .all(|(x, y)| *map.entry(*x).or_insert(*y) == *y && *rev.entry(*y).or_insert(*x) == *x)
    }

    #[test]
    fn separated_pairs() {
        let pts = array![[0.0], [0.0], [10.0], [10.0]];
        let r = kmeans(&pts, 2, 1, 3).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut c: Vec<f64> = r.centers.column(0).to_vec();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert!(same_partition(&r.assignments, &[0, 0, 1, 1]));
    }

    #[test]
    fn k_equals_p() {
        let pts = array![[0.0, 1.0], [3.0, -2.0], [5.0, 5.0], [-1.0, 0.5]];
        let r = kmeans(&pts, 4, 9, 2).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut labels = r.assignments.clone();
        labels.sort_unstable();
        assert_eq!(labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn domain_errors() {
        let pts = array![[0.0], [1.0]];
        assert!(matches!(kmeans(&pts, 3, 0, 1), Err(Error::Domain(_))));
        assert!(kmeans(&pts, 0, 0, 1).is_err());
    }

    fn blobs(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut rng = rng_from_seed(seed);
        let mut pts = Array2::zeros((300, 2));
        let mut labels = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for i in 0..100 {
                for d in 0..2 {
                    let z: f64 = rng.sample(StandardNormal);
                    pts[[c * 100 + i, d]] = center[d] + 0.1 * z;
                }
                labels.push(c);
            }
        }
        (pts, labels)
    }

    /// Brute-force minimum-inertia partition over all k^p labelings.
    fn exhaustive_best(pts: &Array2<f64>, k: usize) -> (Vec<usize>, f64) {
        let p = pts.nrows();
        let d = pts.ncols();
        let total = k.pow(p as u32);
        let mut best = (vec![0; p], f64::INFINITY);
        let mut labels = vec![0usize; p];
        for code in 0..total {
            let mut c = code;
            for l in labels.iter_mut() {
                *l = c % k;
                c /= k;
            }
            let mut sums = vec![vec![0.0; d]; k];
            let mut counts = vec![0usize; k];
            for i in 0..p {
                counts[labels[i]] += 1;
                for j in 0..d {
                    sums[labels[i]][j] += pts[[i, j]];
                }
            }
            if counts.iter().any(|&c| c == 0) {
                continue;
            }
            let mut cost = 0.0;
            for i in 0..p {
                let l = labels[i];
                for j in 0..d {
                    let mu = sums[l][j] / counts[l] as f64;
                    cost += (pts[[i, j]] - mu).powi(2);
                }
            }
            if cost < best.1 {
                best = (labels.clone(), cost);
            }
        }
        best
    }

    #[test]
    fn recovers_gaussian_blobs() {
        let (pts, truth) = blobs(3);
        let r = kmeans(&pts, 3, 3, DEFAULT_RESTARTS).unwrap();
        assert!(same_partition(&r.assignments, &truth));
        assert!(r.restart_inertias.iter().all(|&i| r.inertia <= i));
        assert!(r.inertia_trace.windows(2).all(|w| w[1] <= w[0]));

        // 12-point subsample, 4 from each blob, against the exhaustive oracle.
        let idx: Vec<usize> = (0..3)
            .flat_map(|c| (0..4).map(move |i| c * 100 + 7 * i))
            .collect();
        let sub = pts.select(ndarray::Axis(0), &idx);
        let sub_truth: Vec<usize> = idx.iter().map(|&i| truth[i]).collect();
        let (oracle, oracle_cost) = exhaustive_best(&sub, 3);
        let r = kmeans(&sub, 3, 3, DEFAULT_RESTARTS).unwrap();
        assert!(same_partition(&oracle, &sub_truth));
        assert!(same_partition(&r.assignments, &oracle));
        assert!((r.inertia - oracle_cost).abs() <= 1e-9 * (1.0 + oracle_cost));
    }

    #[test]
    fn deterministic_given_seed() {
        let (pts, _) = blobs(8);
        let a = kmeans(&pts, 4, 77, 3).unwrap();
        let b = kmeans(&pts, 4, 77, 3).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn traces_are_monotone_on_random_data() {
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let pts =
                Array2::from_shape_simple_fn((60, 3), || rng.sample::<f64, _>(StandardNormal));
            let r = kmeans(&pts, 5, seed, 4).unwrap();
            assert!(r
                .inertia_trace
                .windows(2)
                .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            assert!(r.assignments.iter().all(|&l| l < 5));
            assert!(r.restart_inertias.iter().all(|&i| r.inertia <= i));
        }
    }
}
