//! Planted-clique machinery: clique graphs, the bootstrap and
//! block-averaging transforms into submatrix instances, and the clean-up
//! step that turns a candidate superset back into the exact clique.
//!
//! Sizes follow the doubled-graph convention: the reduction for half-size
//! `N` and clique parameter `kappa` works on a graph with `2N` nodes whose
//! nodes are clique members with probability `kappa / N` (or exactly
//! `2 kappa` of them in fixed mode). The submatrix instance comes from the
//! upper-right `N x N` block of its adjacency matrix.

use std::io::Write;

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Algorithm;
use crate::localize::{self, split_1d, Axis, ScoreVector};
use crate::model::Observation;
use crate::rng::{derive_seed, rng_from_seed, rng_stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CliqueMode {
    /// Exactly `kappa` clique nodes chosen uniformly.
    Fixed,
    /// Every node joins the clique independently with probability
    /// `kappa / N`.
    Bernoulli,
}

impl std::str::FromStr for CliqueMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(CliqueMode::Fixed),
            "bernoulli" => Ok(CliqueMode::Bernoulli),
            other => Err(Error::validation(format!("unknown clique mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliqueInstance {
    /// Symmetric `+-1` adjacency with unit diagonal.
    pub adjacency: Array2<i8>,
    /// Sorted clique nodes.
    pub clique: Vec<usize>,
    pub mode: CliqueMode,
}

impl CliqueInstance {
    pub fn nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Adjacency in the model's binary matrix format.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        Observation::new(self.adjacency.mapv(f64::from))?.write_binary(w)
    }

    /// JSON sidecar listing the clique.
    pub fn clique_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            nodes: usize,
            mode: CliqueMode,
            clique: &'a [usize],
        }
        Ok(serde_json::to_string(&Sidecar {
            nodes: self.nodes(),
            mode: self.mode,
            clique: &self.clique,
        })?)
    }
}

/// Clique membership only; the same draw [`generate_clique`] makes.
pub fn sample_clique_nodes(
    nodes: usize,
    kappa: usize,
    mode: CliqueMode,
    seed: u64,
) -> Result<Vec<usize>> {
    if kappa == 0 || kappa > nodes {
        return Err(Error::domain(format!(
            "kappa = {kappa} must lie in 1..={nodes}"
        )));
    }
    let mut rng = rng_stream(seed, 0);
    Ok(match mode {
        CliqueMode::Fixed => {
            let mut v = index::sample(&mut rng, nodes, kappa).into_vec();
            v.sort_unstable();
            v
        }
        CliqueMode::Bernoulli => {
            let p = kappa as f64 / nodes as f64;
            (0..nodes).filter(|_| rng.random::<f64>() < p).collect()
        }
    })
}

/// Random `+-1` graph on `nodes` nodes with a planted clique.
pub fn generate_clique(
    nodes: usize,
    kappa: usize,
    mode: CliqueMode,
    seed: u64,
) -> Result<CliqueInstance> {
    let clique = sample_clique_nodes(nodes, kappa, mode, seed)?;
    let mut rng = rng_stream(seed, 1);
    let mut adjacency = Array2::<i8>::ones((nodes, nodes));
    let (mut bits, mut left) = (0u64, 0u32);
    for i in 0..nodes {
        for j in i + 1..nodes {
            if left == 0 {
                bits = rng.next_u64();
                left = 64;
            }
            let v = if bits & 1 == 1 { 1 } else { -1 };
            bits >>= 1;
            left -= 1;
            adjacency[[i, j]] = v;
            adjacency[[j, i]] = v;
        }
    }
    for (a, &i) in clique.iter().enumerate() {
        for &j in &clique[a + 1..] {
            adjacency[[i, j]] = 1;
            adjacency[[j, i]] = 1;
        }
    }
    Ok(CliqueInstance {
        adjacency,
        clique,
        mode,
    })
}

/// Half size of an even-sized instance.
fn half(inst: &CliqueInstance) -> Result<usize> {
    let nodes = inst.nodes();
    if nodes < 2 || !nodes.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "need an even node count, got {nodes}"
        )));
    }
    Ok(nodes / 2)
}

/// Clique members among the rows (`0..n`) and columns (`n..2n`, reported
/// as `0..n`) of the upper-right block.
fn clique_sides(inst: &CliqueInstance, n: usize) -> (Vec<usize>, Vec<usize>) {
    let rows = inst.clique.iter().copied().filter(|&i| i < n).collect();
    let cols = inst
        .clique
        .iter()
        .filter(|&&j| j >= n)
        .map(|&j| j - n)
        .collect();
    (rows, cols)
}

#[derive(Clone, Debug)]
pub struct Bootstrap {
    /// `n x n` averaged matrix.
    pub observation: Observation,
    /// Rows `i` with `psi_s(i)` a clique row for some `s`.
    pub candidate_rows: Vec<usize>,
    pub candidate_cols: Vec<usize>,
    /// `psi_0 .. psi_{l-1}`; `psi_0` is the identity.
    pub row_maps: Vec<Vec<usize>>,
    pub col_maps: Vec<Vec<usize>>,
}

/// `M_ij = (1/l) sum_{s,t} G_UR[psi_s(i), phi_t(j)]` with `l - 1` bootstrap
/// index maps per side drawn uniformly with replacement.
pub fn bootstrap_transform(inst: &CliqueInstance, l: usize, seed: u64) -> Result<Bootstrap> {
    if l == 0 {
        return Err(Error::domain("l must be at least 1"));
    }
    let n = half(inst)?;
    let mut rng = rng_from_seed(seed);
    let identity: Vec<usize> = (0..n).collect();
    let draw = |rng: &mut crate::rng::ChaCha8Rng| -> Vec<Vec<usize>> {
        let mut maps = vec![identity.clone()];
        for _ in 1..l {
            maps.push((0..n).map(|_| rng.random_range(0..n)).collect());
        }
        maps
    };
    let row_maps = draw(&mut rng);
    let col_maps = draw(&mut rng);

    let a = &inst.adjacency;
    // Integer accumulation keeps the l = 1 case bit-exact.
    let mut acc = Array2::<i64>::zeros((n, n));
    for psi in &row_maps {
        for (i, &pi) in psi.iter().enumerate() {
            let src = a.row(pi);
            let mut dst = acc.row_mut(i);
            for phi in &col_maps {
                for (j, &pj) in phi.iter().enumerate() {
                    dst[j] += src[n + pj] as i64;
                }
            }
        }
    }
    let scale = l as f64;
    let observation = Observation::new(acc.mapv(|v| v as f64 / scale))?;

    let (clique_rows, clique_cols) = clique_sides(inst, n);
    let hits = |maps: &[Vec<usize>], members: &[usize]| -> Vec<usize> {
        let mut is_member = vec![false; n];
        members.iter().for_each(|&c| is_member[c] = true);
        (0..n)
            .filter(|&i| maps.iter().any(|m| is_member[m[i]]))
            .collect()
    };
    Ok(Bootstrap {
        observation,
        candidate_rows: hits(&row_maps, &clique_rows),
        candidate_cols: hits(&col_maps, &clique_cols),
        row_maps,
        col_maps,
    })
}

#[derive(Clone, Debug)]
pub struct BlockTransform {
    /// `n x n` matrix of block sums divided by the block width.
    pub observation: Observation,
    /// Integer block sums before division.
    pub block_sums: Array2<i64>,
    pub width: usize,
    /// Row blocks containing at least one clique row.
    pub signal_rows: Vec<usize>,
    pub signal_cols: Vec<usize>,
}

/// Partitions the upper-right block into `n x n` blocks of width
/// `w = round(n^beta)` and returns `M_st = (1/w) sum_{I_s x I_t} G_UR`.
/// The instance must have exactly `2 n w` nodes.
pub fn block_transform(inst: &CliqueInstance, n: usize, beta: f64) -> Result<BlockTransform> {
    if n == 0 || !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!(
            "need n >= 1 and beta >= 0, got n = {n}, beta = {beta}"
        )));
    }
    let width = (n as f64).powf(beta).round() as usize;
    let half_size = half(inst)?;
    if width == 0 || n.checked_mul(width) != Some(half_size) {
        return Err(Error::domain(format!(
            "instance has {} nodes, need 2 * n * round(n^beta) = {}",
            inst.nodes(),
            2 * n * width.max(1)
        )));
    }
    let a = &inst.adjacency;
    let mut block_sums = Array2::<i64>::zeros((n, n));
    for i in 0..half_size {
        let row = a.row(i);
        let mut dst = block_sums.row_mut(i / width);
        for j in 0..half_size {
            dst[j / width] += row[half_size + j] as i64;
        }
    }
    let observation = Observation::new(block_sums.mapv(|v| v as f64 / width as f64))?;
    let (rows, cols) = clique_sides(inst, half_size);
    let mut signal_rows: Vec<usize> = rows.iter().map(|&i| i / width).collect();
    let mut signal_cols: Vec<usize> = cols.iter().map(|&j| j / width).collect();
    signal_rows.dedup();
    signal_cols.dedup();
    Ok(BlockTransform {
        observation,
        block_sums,
        width,
        signal_rows,
        signal_cols,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum CleanupRule {
    /// Largest gap in the within-candidate degrees.
    #[default]
    MaxGap,
    /// Keep nodes whose within-candidate degree is at least the value.
    Threshold(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cleanup {
    pub nodes: Vec<usize>,
    pub gap: f64,
    /// All degrees equal; `nodes` is then the whole candidate.
    pub degenerate: bool,
}

/// Scores every candidate node by its degree inside the candidate and keeps
/// the high side.
pub fn clique_cleanup(
    inst: &CliqueInstance,
    candidate: &[usize],
    rule: CleanupRule,
) -> Result<Cleanup> {
    let nodes = inst.nodes();
    let mut cand = candidate.to_vec();
    cand.sort_unstable();
    cand.dedup();
    if let Some(&bad) = cand.iter().find(|&&i| i >= nodes) {
        return Err(Error::validation(format!(
            "candidate node {bad} out of range 0..{nodes}"
        )));
    }
    let a = &inst.adjacency;
    let scores: Vec<f64> = cand
        .iter()
        .map(|&i| {
            let row = a.row(i);
            cand.iter()
                .filter(|&&j| j != i)
                .map(|&j| row[j] as i64)
                .sum::<i64>() as f64
        })
        .collect();
    match rule {
        CleanupRule::Threshold(t) => Ok(Cleanup {
            nodes: cand
                .iter()
                .zip(&scores)
                .filter(|(_, &s)| s >= t)
                .map(|(&i, _)| i)
                .collect(),
            gap: f64::NAN,
            degenerate: false,
        }),
        CleanupRule::MaxGap => {
            if cand.len() < 2 {
                return Ok(Cleanup {
                    nodes: cand,
                    gap: 0.0,
                    degenerate: true,
                });
            }
            let split = split_1d(&ScoreVector {
                values: scores.clone(),
                axis: Axis::Rows,
            })?;
            if split.degenerate {
                return Ok(Cleanup {
                    nodes: cand,
                    gap: split.gap,
                    degenerate: true,
                });
            }
            let top = |set: &[usize]| {
                set.iter()
                    .map(|&k| scores[k])
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let upper = if top(&split.inside) >= top(&split.outside) {
                split.inside
            } else {
                split.outside
            };
            Ok(Cleanup {
                nodes: upper.into_iter().map(|k| cand[k]).collect(),
                gap: split.gap,
                degenerate: false,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionOutcome {
    pub clique: Vec<usize>,
    pub recovered: Vec<usize>,
    pub success: bool,
    /// Nodes handed to the clean-up step.
    pub candidate_size: usize,
    pub bootstrap_rows: usize,
    pub bootstrap_cols: usize,
    /// Stage that failed, if any.
    pub failure: Option<String>,
}

/// Clique graph on `2n` nodes (Bernoulli mode, `kappa / n` per node),
/// bootstrap with `l` maps per side, localize, pull the localized rows and
/// columns back through every map, and clean up.
pub fn end_to_end_reduction(
    n: usize,
    kappa: usize,
    l: usize,
    algo: Algorithm,
    seed: u64,
) -> Result<ReductionOutcome> {
    end_to_end_with_mode(n, kappa, l, algo, CliqueMode::Bernoulli, seed)
}

pub fn end_to_end_with_mode(
    n: usize,
    kappa: usize,
    l: usize,
    algo: Algorithm,
    mode: CliqueMode,
    seed: u64,
) -> Result<ReductionOutcome> {
    if kappa == 0 || kappa > n {
        return Err(Error::domain(format!(
            "kappa = {kappa} must lie in 1..={n}"
        )));
    }
    let inst = generate_clique(2 * n, 2 * kappa, mode, derive_seed(seed, &[0]))?;
    let boot = bootstrap_transform(&inst, l, derive_seed(seed, &[1]))?;
    let mut outcome = ReductionOutcome {
        clique: inst.clique.clone(),
        recovered: Vec::new(),
        success: false,
        candidate_size: 0,
        bootstrap_rows: boot.candidate_rows.len(),
        bootstrap_cols: boot.candidate_cols.len(),
        failure: None,
    };
    let x = &boot.observation;
    let located = match algo {
        Algorithm::Spectral => localize::localize_spectral(x),
        Algorithm::Denoised => {
            let sigma = localize::mad_sigma(x);
            if sigma > 0.0 {
                localize::localize_denoised(x, sigma, 1.0)
            } else {
                localize::localize_spectral(x)
            }
        }
        Algorithm::Multi => localize::localize_multi_with(
            x,
            1,
            &localize::MultiOptions {
                kmeans_seed: derive_seed(seed, &[2]),
                ..Default::default()
            },
        ),
        other => {
            return Err(Error::validation(format!(
                "the reduction supports spectral, denoised and multi, not {other}"
            )))
        }
    };
    let located = match located {
        Ok(r) => r,
        Err(e) => {
            outcome.failure = Some(format!("localize: {e}"));
            return Ok(outcome);
        }
    };
    let Some(block) = located.blocks.first().filter(|_| !located.is_degenerate()) else {
        outcome.failure = Some("localize: degenerate".into());
        return Ok(outcome);
    };

    let mut candidate: Vec<usize> = Vec::new();
    for psi in &boot.row_maps {
        candidate.extend(block.rows.iter().map(|&i| psi[i]));
    }
    for phi in &boot.col_maps {
        candidate.extend(block.cols.iter().map(|&j| n + phi[j]));
    }
    candidate.sort_unstable();
    candidate.dedup();
    outcome.candidate_size = candidate.len();

    let cleaned = clique_cleanup(&inst, &candidate, CleanupRule::MaxGap)?;
    if cleaned.degenerate && candidate.len() != inst.clique.len() {
        outcome.failure = Some("cleanup: degenerate".into());
    }
    outcome.success = cleaned.nodes == inst.clique;
    outcome.recovered = cleaned.nodes;
    if !outcome.success && outcome.failure.is_none() {
        outcome.failure = Some("mismatch".into());
    }
    Ok(outcome)
}
