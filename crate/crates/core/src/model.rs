//! The planted submatrix model `X = M + Z`.
//!
//! `M` is a sum of constant blocks `lambda_s * 1_{R_s} 1_{C_s}^T` with pairwise
//! disjoint row sets and pairwise disjoint column sets; `Z` has i.i.d.
//! zero-mean entries with standard deviation `sigma`. Index sets are 0-based
//! and stored sorted ascending.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// One planted block: rows `R_s`, columns `C_s`, elevation `lambda_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub lambda: f64,
}

#[derive(Deserialize)]
struct RawSignal {
    m: usize,
    n: usize,
    blocks: Vec<Block>,
}

/// Ground truth of an instance.
///
/// Construction goes through [`PlantedSignal::new`] (or deserialization),
/// which sorts the index sets and rejects out-of-range, duplicate, empty or
/// overlapping supports. A block with `lambda = 0` is allowed so that null
/// experiments still have a support to score against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal")]
pub struct PlantedSignal {
    pub m: usize,
    pub n: usize,
    pub blocks: Vec<Block>,
}

impl TryFrom<RawSignal> for PlantedSignal {
    type Error = Error;

    fn try_from(raw: RawSignal) -> Result<Self> {
        PlantedSignal::new(raw.m, raw.n, raw.blocks)
    }
}

fn check_index_set(set: &mut [usize], bound: usize, what: &str, s: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::validation(format!("block {s}: {what} set is empty")));
    }
    set.sort_unstable();
    if let Some(w) = set.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::validation(format!(
            "block {s}: duplicate {what} index {}",
            w[0]
        )));
    }
    if let Some(&last) = set.last() {
        if last >= bound {
            return Err(Error::validation(format!(
                "block {s}: {what} index {last} out of range 0..{bound}"
            )));
        }
    }
    Ok(())
}

impl PlantedSignal {
    pub fn new(m: usize, n: usize, mut blocks: Vec<Block>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::validation(format!("empty matrix shape {m}x{n}")));
        }
        let mut row_owner = vec![usize::MAX; m];
        let mut col_owner = vec![usize::MAX; n];
        for (s, b) in blocks.iter_mut().enumerate() {
            if !b.lambda.is_finite() || b.lambda < 0.0 {
                return Err(Error::validation(format!(
                    "block {s}: lambda must be finite and non-negative, got {}",
                    b.lambda
                )));
            }
            check_index_set(&mut b.rows, m, "row", s)?;
            check_index_set(&mut b.cols, n, "column", s)?;
            for &i in &b.rows {
                if row_owner[i] != usize::MAX {
                    return Err(Error::validation(format!(
                        "row {i} shared by blocks {} and {s}",
                        row_owner[i]
                    )));
                }
                row_owner[i] = s;
            }
            for &j in &b.cols {
                if col_owner[j] != usize::MAX {
                    return Err(Error::validation(format!(
                        "column {j} shared by blocks {} and {s}",
                        col_owner[j]
                    )));
                }
                col_owner[j] = s;
            }
        }
        Ok(PlantedSignal { m, n, blocks })
    }

    /// A signal without blocks, i.e. the pure-noise model.
    pub fn empty(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, Vec::new())
    }

    /// The noiseless mean matrix `M`.
    pub fn mean_matrix(&self) -> Array2<f64> {
        let mut mean = Array2::zeros((self.m, self.n));
        for b in &self.blocks {
            for &i in &b.rows {
                for &j in &b.cols {
                    mean[[i, j]] = b.lambda;
                }
            }
        }
        mean
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// `±sigma` with equal probability.
    Rademacher,
    /// Uniform on `[-sigma*sqrt(3), sigma*sqrt(3)]`.
    UniformSymmetric,
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "rademacher" => Ok(NoiseFamily::Rademacher),
            "uniform" | "uniformsymmetric" | "uniform_symmetric" => {
                Ok(NoiseFamily::UniformSymmetric)
            }
            other => Err(Error::validation(format!("unknown noise family {other:?}"))),
        }
    }
}

/// Noise family and entry standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, sigma: f64) -> Result<Self> {
        let spec = NoiseSpec { family, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::validation(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Draws one noise entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.sigma * z
            }
            NoiseFamily::Rademacher => {
                if rng.random::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
            NoiseFamily::UniformSymmetric => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * self.sigma * 3f64.sqrt()
            }
        }
    }

    /// An `m x n` noise matrix filled in row-major order.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, m: usize, n: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_simple_fn((m, n), || self.sample(rng))
    }
}

/// A dense observed matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    data: Array2<f64>,
}

impl Observation {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::validation("observation must be non-empty"));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite entry {v} at ({i}, {j})"
            )));
        }
        // Row-major storage is assumed by the linear algebra kernels.
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Observation { data })
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Entries as a row-major slice.
    pub fn as_slice(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("observation is stored in standard layout")
    }

    /// Returns a new observation with `f` applied entrywise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Observation> {
        Observation::new(self.data.mapv(f))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for row in self.data.rows() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:?}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Observation> {
        let mut values = Vec::new();
        let mut n = None;
        let mut m = 0;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let before = values.len();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::validation(format!("line {}: cannot parse {field:?}", lineno + 1))
                })?;
                values.push(v);
            }
            let width = values.len() - before;
            match n {
                None => n = Some(width),
                Some(w) if w != width => {
                    return Err(Error::validation(format!(
                        "line {}: expected {w} fields, found {width}",
                        lineno + 1
                    )))
                }
                _ => {}
            }
            m += 1;
        }
        let n = n.ok_or_else(|| Error::validation("empty CSV matrix"))?;
        let data =
            Array2::from_shape_vec((m, n), values).map_err(|e| Error::validation(e.to_string()))?;
        Observation::new(data)
    }

    /// Binary layout: `m` and `n` as little-endian u64, then `m*n`
    /// little-endian f64 values in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.m() as u64).to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        for v in self.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Observation> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let m = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let len = m
            .checked_mul(n)
            .ok_or_else(|| Error::validation(format!("binary header {m}x{n} overflows")))?;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        let data =
            Array2::from_shape_vec((m, n), values).map_err(|e| Error::validation(e.to_string()))?;
        Observation::new(data)
    }
}

/// Estimated support of one block.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Output of every localizer: estimated supports plus named diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub blocks: Vec<SupportBlock>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl LocalizationResult {
    /// An empty-support result carrying a `degenerate = 1` flag.
    pub fn degenerate() -> Self {
        let mut r = LocalizationResult::default();
        r.diagnostics.insert("degenerate".into(), 1.0);
        r
    }

    pub fn is_degenerate(&self) -> bool {
        self.diagnostics.get("degenerate").copied().unwrap_or(0.0) != 0.0
    }

    pub fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// Checks index ranges and pairwise disjointness of the estimated sets.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let mut row_seen = vec![false; m];
        let mut col_seen = vec![false; n];
        for (s, b) in self.blocks.iter().enumerate() {
            for (set, seen, bound, what) in [
                (&b.rows, &mut row_seen, m, "row"),
                (&b.cols, &mut col_seen, n, "column"),
            ] {
                for &i in set {
                    if i >= bound {
                        return Err(Error::validation(format!(
                            "estimated block {s}: {what} {i} out of range"
                        )));
                    }
                    if seen[i] {
                        return Err(Error::validation(format!(
                            "estimated blocks overlap at {what} {i}"
                        )));
                    }
                    seen[i] = true;
                }
            }
        }
        Ok(())
    }

    /// Exact recovery: the estimated blocks equal the planted blocks as an
    /// unordered collection of (rows, cols) pairs.
    pub fn matches(&self, truth: &PlantedSignal) -> bool {
        if self.blocks.len() != truth.blocks.len() {
            return false;
        }
        let mut used = vec![false; truth.blocks.len()];
        self.blocks.iter().all(|est| {
            let hit = truth.blocks.iter().enumerate().position(|(s, t)| {
                !used[s] && sorted_eq(&est.rows, &t.rows) && sorted_eq(&est.cols, &t.cols)
            });
            match hit {
                Some(s) => {
                    used[s] = true;
                    true
                }
                None => false,
            }
        })
    }

    /// Jaccard overlap between the union of estimated cells and the union of
    /// planted cells. 1 when both are empty.
    pub fn jaccard(&self, truth: &PlantedSignal) -> f64 {
        let cells = |blocks: &mut dyn Iterator<Item = (&Vec<usize>, &Vec<usize>)>| {
            let mut set = std::collections::BTreeSet::new();
            for (rows, cols) in blocks {
                for &i in rows {
                    for &j in cols {
                        set.insert((i, j));
                    }
                }
            }
            set
        };
        let est = cells(&mut self.blocks.iter().map(|b| (&b.rows, &b.cols)));
        let tru = cells(&mut truth.blocks.iter().map(|b| (&b.rows, &b.cols)));
        let union = est.union(&tru).count();
        if union == 0 {
            return 1.0;
        }
        est.intersection(&tru).count() as f64 / union as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn sorted_eq(a: &[usize], b: &[usize]) -> bool {
    let mut a = a.to_vec();
    a.sort_unstable();
    a == b
}

/// Generates `X = M + Z`. The noise matrix depends only on `(noise, seed)`,
/// so instances that share a seed share their noise exactly.
pub fn generate_instance(
    signal: &PlantedSignal,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<(Observation, PlantedSignal)> {
    let signal = PlantedSignal::new(signal.m, signal.n, signal.blocks.clone())?;
    noise.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut x = noise.sample_matrix(signal.m, signal.n, &mut rng);
    x += &signal.mean_matrix();
    Ok((Observation::new(x)?, signal))
}

/// `r` disjoint uniformly random `k_m x k_n` supports with common magnitude.
pub fn random_signal(
    m: usize,
    n: usize,
    k_m: usize,
    k_n: usize,
    r: usize,
    lambda: f64,
    seed: u64,
) -> Result<PlantedSignal> {
    if r > 0 && (k_m == 0 || k_n == 0) {
        return Err(Error::validation("block sizes must be positive"));
    }
    if r.saturating_mul(k_m) > m || r.saturating_mul(k_n) > n {
        return Err(Error::validation(format!(
            "{r} blocks of {k_m}x{k_n} do not fit disjointly in {m}x{n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let rows = index::sample(&mut rng, m, r * k_m).into_vec();
    let cols = index::sample(&mut rng, n, r * k_n).into_vec();
    let blocks = (0..r)
        .map(|s| Block {
            rows: rows[s * k_m..(s + 1) * k_m].to_vec(),
            cols: cols[s * k_n..(s + 1) * k_n].to_vec(),
            lambda,
        })
        .collect();
    PlantedSignal::new(m, n, blocks)
}

/// The three boundary rates for a `m x n` problem with a `k_m x k_n` block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SnrThresholds {
    /// Statistical boundary `sqrt(max(ln n / k_m, ln m / k_n))`.
    pub snr_s: f64,
    /// Computational boundary in the dense regime,
    /// `sqrt(max(m, n) / (k_m k_n)) + snr_s`.
    pub snr_c_dense: f64,
    /// Upper end of the sparse-regime computational boundary,
    /// `sqrt(ln(max(m, n) / (k_m k_n)))`, clamped at 0.
    pub snr_c_sparse: f64,
}

impl SnrThresholds {
    /// The computational rate that applies to the size: dense when
    /// `min(k_m, k_n) >= sqrt(max(m, n))`, otherwise the sparse rate floored
    /// at the hardness level 1.
    pub fn snr_c(&self, dense: bool) -> f64 {
        if dense {
            self.snr_c_dense
        } else {
            self.snr_c_sparse.max(1.0)
        }
    }
}

/// Threshold formulas with natural logarithms and unit constants. Sizes are
/// real so that the formulas can be evaluated off the integer lattice.
pub fn snr_thresholds(m: f64, n: f64, k_m: f64, k_n: f64) -> Result<SnrThresholds> {
    for (v, name) in [(m, "m"), (n, "n"), (k_m, "k_m"), (k_n, "k_n")] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    if m <= 1.0 || n <= 1.0 {
        return Err(Error::domain(format!("need m, n > 1, got {m}x{n}")));
    }
    if k_m < 1.0 || k_n < 1.0 || k_m > m || k_n > n {
        return Err(Error::domain(format!(
            "block {k_m}x{k_n} must satisfy 1 <= k <= dimension for {m}x{n}"
        )));
    }
    let snr_s = (n.ln() / k_m).max(m.ln() / k_n).sqrt();
    let big = m.max(n);
    let snr_c_dense = (big / (k_m * k_n)).sqrt() + snr_s;
    let snr_c_sparse = (big / (k_m * k_n)).ln().max(0.0).sqrt();
    Ok(SnrThresholds {
        snr_s,
        snr_c_dense,
        snr_c_sparse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_block(
        m: usize,
        n: usize,
        rows: Vec<usize>,
        cols: Vec<usize>,
        lambda: f64,
    ) -> PlantedSignal {
        PlantedSignal::new(m, n, vec![Block { rows, cols, lambda }]).unwrap()
    }

    #[test]
    fn zero_noise_instance_is_the_mean() {
        let s = one_block(4, 4, vec![0, 1], vec![2, 3], 5.0);
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(0.0), 123).unwrap();
        for ((i, j), &v) in x.data().indexed_iter() {
            let expected = if i < 2 && j >= 2 { 5.0 } else { 0.0 };
            assert_eq!(v, expected, "({i},{j})");
        }
    }

    #[test]
    fn instances_are_deterministic() {
        let s = one_block(2, 2, vec![0], vec![0], 1.0);
        let a = generate_instance(&s, &NoiseSpec::gaussian(1.0), 7)
            .unwrap()
            .0;
        let b = generate_instance(&s, &NoiseSpec::gaussian(1.0), 7)
            .unwrap()
            .0;
        let bits = |o: &Observation| o.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn gaussian_noise_moments() {
        let s = PlantedSignal::empty(1000, 1000).unwrap();
        let (x, _) = generate_instance(&s, &NoiseSpec::gaussian(1.0), 1).unwrap();
        let v = x.as_slice();
        let cnt = v.len() as f64;
        let mean = v.iter().sum::<f64>() / cnt;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (cnt - 1.0);
        assert!(mean.abs() <= 4.0 / cnt.sqrt(), "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() <= 0.01, "sd {}", var.sqrt());
    }

    #[test]
    fn every_family_passes_moment_check() {
        let (m, n) = (400, 250);
        let sigma = 2.5;
        let cnt = (m * n) as f64;
        for family in [
            NoiseFamily::Gaussian,
            NoiseFamily::Rademacher,
            NoiseFamily::UniformSymmetric,
        ] {
            let spec = NoiseSpec::new(family, sigma).unwrap();
            let z = spec.sample_matrix(m, n, &mut rng_from_seed(31));
            let mean = z.sum() / cnt;
            let var = z.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / cnt;
            assert!(
                mean.abs() <= 5.0 * sigma / cnt.sqrt(),
                "{family:?} mean {mean}"
            );
            assert!(
                (var - sigma * sigma).abs() <= 5.0 * sigma * sigma * (2.0 / cnt).sqrt(),
                "{family:?} var {var}"
            );
        }
    }

    #[test]
    fn family_supports() {
        let mut rng = rng_from_seed(5);
        let rad = NoiseSpec::new(NoiseFamily::Rademacher, 0.5).unwrap();
        let uni = NoiseSpec::new(NoiseFamily::UniformSymmetric, 0.5).unwrap();
        let bound = 0.5 * 3f64.sqrt();
        for _ in 0..1000 {
            let r = rad.sample(&mut rng);
            assert!(r == 0.5 || r == -0.5);
            let u = uni.sample(&mut rng);
            assert!((-bound..=bound).contains(&u));
        }
    }

    #[test]
    fn signal_plus_noise_decomposes_exactly() {
        let s = random_signal(30, 20, 5, 4, 2, 3.7, 11).unwrap();
        let noise = NoiseSpec::gaussian(1.3);
        let (x, truth) = generate_instance(&s, &noise, 99).unwrap();
        let (z, _) = generate_instance(&PlantedSignal::empty(30, 20).unwrap(), &noise, 99).unwrap();
        let mean = truth.mean_matrix();
        for ((idx, &xv), (&mv, &zv)) in x
            .data()
            .indexed_iter()
            .zip(mean.iter().zip(z.data().iter()))
        {
            assert_eq!(xv.to_bits(), (mv + zv).to_bits(), "{idx:?}");
            assert!((xv - mv - zv).abs() <= 4.0 * f64::EPSILON * xv.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_signals() {
        let overlap = PlantedSignal::new(
            5,
            5,
            vec![
                Block {
                    rows: vec![0, 1],
                    cols: vec![0],
                    lambda: 1.0,
                },
                Block {
                    rows: vec![1, 2],
                    cols: vec![3],
                    lambda: 1.0,
                },
            ],
        );
        assert!(matches!(overlap, Err(Error::Validation(_))));
        let out_of_range = PlantedSignal::new(
            3,
            3,
            vec![Block {
                rows: vec![3],
                cols: vec![0],
                lambda: 1.0,
            }],
        );
        assert!(matches!(out_of_range, Err(Error::Validation(_))));
        let empty = PlantedSignal::new(
            3,
            3,
            vec![Block {
                rows: vec![],
                cols: vec![0],
                lambda: 1.0,
            }],
        );
        assert!(empty.is_err());
    }

    #[test]
    fn signal_json_roundtrip_sorts_indices() {
        let json = r#"{"m":6,"n":5,"blocks":[{"rows":[3,1],"cols":[4,0],"lambda":2.0}]}"#;
        let s = PlantedSignal::from_json(json).unwrap();
        assert_eq!(s.blocks[0].rows, vec![1, 3]);
        assert_eq!(s.blocks[0].cols, vec![0, 4]);
        let back = PlantedSignal::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"m":2,"n":2,"blocks":[{"rows":[5],"cols":[0],"lambda":1.0}]}"#;
        assert!(PlantedSignal::from_json(bad).is_err());
        let noise: NoiseSpec =
            serde_json::from_str(r#"{"family":"rademacher","sigma":0.5}"#).unwrap();
        assert_eq!(noise.family, NoiseFamily::Rademacher);
    }

    #[test]
    fn random_signal_full_support() {
        let s = random_signal(10, 10, 10, 10, 1, 1.0, 42).unwrap();
        assert_eq!(s.blocks[0].rows, (0..10).collect::<Vec<_>>());
        assert_eq!(s.blocks[0].cols, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_signal_disjoint_blocks() {
        let s = random_signal(100, 100, 10, 10, 3, 1.0, 5).unwrap();
        assert_eq!(s.blocks.len(), 3);
        let mut rows: Vec<usize> = s.blocks.iter().flat_map(|b| b.rows.clone()).collect();
        rows.sort_unstable();
        rows.dedup();
        assert_eq!(rows.len(), 30);
        assert!(random_signal(10, 10, 4, 4, 3, 1.0, 0).is_err());
    }

    #[test]
    fn random_signal_rows_are_uniform() {
        let mut counts = [0usize; 50];
        let trials = 10_000;
        for seed in 0..trials {
            let s = random_signal(50, 50, 5, 5, 1, 1.0, seed).unwrap();
            for &i in &s.blocks[0].rows {
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.1).abs() <= 0.01, "row {i} frequency {freq}");
        }
    }

    #[test]
    fn threshold_values() {
        let e2 = std::f64::consts::E.powi(2);
        let t = snr_thresholds(e2, e2, 2.0, 2.0).unwrap();
        assert!((t.snr_s - 1.0).abs() < 1e-12);

        let t = snr_thresholds(100.0, 100.0, 10.0, 10.0).unwrap();
        let expected = 1.0 + (100f64.ln() / 10.0).sqrt();
        assert!((t.snr_c_dense - expected).abs() < 1e-12);
        assert!((t.snr_c_dense - 1.6786).abs() < 1e-4);
        // max(m, n) = k_m k_n: the sparse rate sits at the clamp.
        assert_eq!(t.snr_c_sparse, 0.0);

        let (n, k) = (400.0f64, 7.0f64);
        let t = snr_thresholds(n, n, k, k).unwrap();
        assert!((t.snr_c_dense - (n.sqrt() / k + (n.ln() / k).sqrt())).abs() < 1e-12);
        assert!((t.snr_c_sparse - (n / (k * k)).ln().sqrt()).abs() < 1e-12);

        assert!(matches!(
            snr_thresholds(0.0, 5.0, 1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(snr_thresholds(5.0, 5.0, 6.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn thresholds_symmetric_under_swap(
            m in 2usize..5000, n in 2usize..5000, a in 0.0f64..1.0, b in 0.0f64..1.0
        ) {
            let km = 1.0 + a * (m as f64 - 1.0);
            let kn = 1.0 + b * (n as f64 - 1.0);
            let t1 = snr_thresholds(m as f64, n as f64, km, kn).unwrap();
            let t2 = snr_thresholds(n as f64, m as f64, kn, km).unwrap();
            prop_assert!((t1.snr_s - t2.snr_s).abs() <= 1e-12 * t1.snr_s.max(1.0));
            prop_assert!((t1.snr_c_dense - t2.snr_c_dense).abs() <= 1e-12 * t1.snr_c_dense.max(1.0));
            prop_assert!((t1.snr_c_sparse - t2.snr_c_sparse).abs() <= 1e-12 * t1.snr_c_sparse.max(1.0));
        }

        #[test]
        fn binary_roundtrip(m in 1usize..6, n in 1usize..6, seed in any::<u64>()) {
            let x = NoiseSpec::gaussian(3.0).sample_matrix(m, n, &mut rng_from_seed(seed));
            let obs = Observation::new(x).unwrap();
            let mut buf = Vec::new();
            obs.write_binary(&mut buf).unwrap();
            prop_assert_eq!(buf.len(), 16 + 8 * m * n);
            prop_assert_eq!(&buf[0..8], &(m as u64).to_le_bytes());
            let back = Observation::read_binary(&buf[..]).unwrap();
            prop_assert_eq!(&back, &obs);
            let mut csv = Vec::new();
            obs.write_csv(&mut csv).unwrap();
            let back = Observation::read_csv(&csv[..]).unwrap();
            prop_assert_eq!(&back, &obs);
        }
    }

    #[test]
    fn csv_layout() {
        let obs = Observation::new(ndarray::array![[1.0, -0.5], [2.25, 0.0]]).unwrap();
        let mut out = Vec::new();
        obs.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1.0,-0.5\n2.25,0.0\n");
        assert!(Observation::read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(Observation::new(ndarray::array![[f64::NAN]]).is_err());
    }

    #[test]
    fn result_matching_is_order_free() {
        let truth = PlantedSignal::new(
            6,
            6,
            vec![
                Block {
                    rows: vec![0, 1],
                    cols: vec![0],
                    lambda: 1.0,
                },
                Block {
                    rows: vec![4],
                    cols: vec![3, 5],
                    lambda: 2.0,
                },
            ],
        )
        .unwrap();
        let est = LocalizationResult {
            blocks: vec![
                SupportBlock {
                    rows: vec![4],
                    cols: vec![3, 5],
                },
                SupportBlock {
                    rows: vec![0, 1],
                    cols: vec![0],
                },
            ],
            diagnostics: BTreeMap::new(),
        };
        assert!(est.matches(&truth));
        assert_eq!(est.jaccard(&truth), 1.0);
        let partial = LocalizationResult {
            blocks: vec![SupportBlock {
                rows: vec![0, 1],
                cols: vec![0],
            }],
            diagnostics: BTreeMap::new(),
        };
        assert!(!partial.matches(&truth));
        assert!((partial.jaccard(&truth) - 0.5).abs() < 1e-12);
        let json = est.to_json().unwrap();
        assert!(json.starts_with(r#"{"blocks":[{"rows":[4],"cols":[3,5]}"#));
    }
}
