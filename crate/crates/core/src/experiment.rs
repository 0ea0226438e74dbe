//! Seeded Monte Carlo experiments: lambda sweeps, (alpha, beta) phase
//! diagrams and clique-reduction batches.
//!
//! Every trial draws its own seed from `derive_seed(master, [cell.., trial])`
//! and trials run on the rayon pool, so output depends only on the config.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex;
use crate::error::{Error, Result};
use crate::localize::{self, DenoiseOptions, MultiOptions, SpectralOptions};
use crate::model::{
    generate_instance, random_signal, snr_thresholds, LocalizationResult, NoiseFamily, NoiseSpec,
    Observation,
};
use crate::reduction::{self, CliqueMode};
use crate::rng::derive_seed;
use crate::search::{self, SearchBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Spectral,
    Denoised,
    Multi,
    Search,
    Convex,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Spectral,
        Algorithm::Denoised,
        Algorithm::Multi,
        Algorithm::Search,
        Algorithm::Convex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Spectral => "spectral",
            Algorithm::Denoised => "denoised",
            Algorithm::Multi => "multi",
            Algorithm::Search => "search",
            Algorithm::Convex => "convex",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gen,
    Localize,
    #[default]
    Sweep,
    Phase,
    Reduce,
}

/// How lambda grid values are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Absolute,
    /// Multiples of the dense computational threshold.
    Snrc,
}

impl std::str::FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(Units::Absolute),
            "snrc" => Ok(Units::Snrc),
            other => Err(Error::validation(format!("unknown units '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub m: usize,
    pub n: usize,
    pub k_m: usize,
    pub k_n: usize,
    pub r: usize,
    pub lambdas: Vec<f64>,
    pub units: Units,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub sigma: f64,
    pub noise: NoiseFamily,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    /// Threshold multiplier for the de-noised localizer.
    pub t_mult: f64,
    /// Pass the true block sizes to the de-noised threshold.
    pub denoise_sizes: bool,
    /// Estimate sigma by MAD instead of using `sigma`.
    pub estimate_sigma: bool,
    pub budget: u64,
    /// Adds a wall_time_ms column (breaks byte-identical reruns).
    pub timing: bool,
    /// Reduction: half size `N`, clique parameter, bootstrap count.
    pub clique_n: usize,
    pub kappa: usize,
    pub l: usize,
    pub clique_mode: CliqueMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Sweep,
            m: 100,
            n: 100,
            k_m: 20,
            k_n: 20,
            r: 1,
            lambdas: vec![],
            units: Units::Absolute,
            alphas: vec![],
            betas: vec![],
            sigma: 1.0,
            noise: NoiseFamily::Gaussian,
            algorithm: Algorithm::Spectral,
            trials: 100,
            master_seed: 0,
            output: None,
            t_mult: 1.0,
            denoise_sizes: false,
            estimate_sigma: false,
            budget: search::DEFAULT_MAX_ENUMERATIONS,
            timing: false,
            clique_n: 1000,
            kappa: 158,
            l: 2,
            clique_mode: CliqueMode::Bernoulli,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.t_mult > 0.0 && self.t_mult.is_finite()) {
            return bad(format!("t_mult must be positive, got {}", self.t_mult));
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        match self.mode {
            Mode::Sweep | Mode::Gen | Mode::Localize => {
                if self.r == 0 || self.k_m == 0 || self.k_n == 0 {
                    return bad("r, k_m and k_n must be positive".into());
                }
                if self.r * self.k_m > self.m || self.r * self.k_n > self.n {
                    return bad(format!(
                        "{} blocks of {}x{} do not fit in {}x{}",
                        self.r, self.k_m, self.k_n, self.m, self.n
                    ));
                }
                if self.mode == Mode::Sweep {
                    if self.lambdas.is_empty() {
                        return bad("lambda grid is empty".into());
                    }
                    if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                        return bad("lambda values must be finite and >= 0".into());
                    }
                    if self.units == Units::Snrc && (self.m < 2 || self.n < 2) {
                        return bad("snrc units need m, n >= 2".into());
                    }
                }
                check_algorithm(self.algorithm, self.r)?;
            }
            Mode::Phase => {
                if self.alphas.is_empty() || self.betas.is_empty() {
                    return bad("alpha and beta grids must be non-empty".into());
                }
                if self.n < 2 {
                    return bad("phase diagrams need n >= 2".into());
                }
                if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return bad("alpha values must lie in [0, 1]".into());
                }
                if self.betas.iter().any(|b| !b.is_finite()) {
                    return bad("beta values must be finite".into());
                }
                if self.sigma == 0.0 {
                    return bad("phase diagrams need sigma > 0".into());
                }
                check_algorithm(self.algorithm, 1)?;
            }
            Mode::Reduce => {
                if self.kappa == 0 || self.kappa > self.clique_n || self.l == 0 {
                    return bad(format!(
                        "need 1 <= kappa <= clique_n and l >= 1, got kappa = {}, clique_n = {}, l = {}",
                        self.kappa, self.clique_n, self.l
                    ));
                }
                if matches!(self.algorithm, Algorithm::Search | Algorithm::Convex) {
                    return bad(format!("reduce does not support {}", self.algorithm));
                }
            }
        }
        Ok(())
    }

    /// Absolute lambda values of the sweep grid.
    pub fn lambda_values(&self) -> Result<Vec<f64>> {
        match self.units {
            Units::Absolute => Ok(self.lambdas.clone()),
            Units::Snrc => {
                let t = snr_thresholds(
                    self.m as f64,
                    self.n as f64,
                    self.k_m as f64,
                    self.k_n as f64,
                )?;
                Ok(self.lambdas.iter().map(|v| v * t.snr_c_dense).collect())
            }
        }
    }
}

fn check_algorithm(algo: Algorithm, r: usize) -> Result<()> {
    if r > 1
        && matches!(
            algo,
            Algorithm::Spectral | Algorithm::Denoised | Algorithm::Convex
        )
    {
        return Err(Error::validation(format!(
            "{algo} handles a single block; use multi or search for r = {r}"
        )));
    }
    Ok(())
}

/// Localizer settings shared by every trial of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgoSettings {
    pub algorithm: Algorithm,
    pub t_mult: f64,
    pub denoise_sizes: bool,
    pub estimate_sigma: bool,
    pub budget: SearchBudget,
}

impl AlgoSettings {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgoSettings {
            algorithm,
            t_mult: 1.0,
            denoise_sizes: false,
            estimate_sigma: false,
            budget: SearchBudget::default(),
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        AlgoSettings {
            algorithm: cfg.algorithm,
            t_mult: cfg.t_mult,
            denoise_sizes: cfg.denoise_sizes,
            estimate_sigma: cfg.estimate_sigma,
            budget: SearchBudget {
                max_enumerations: cfg.budget,
            },
        }
    }
}

/// Runs one localizer on `x` for `r` blocks of `k_m x k_n`.
pub fn run_algorithm(
    x: &Observation,
    k_m: usize,
    k_n: usize,
    r: usize,
    sigma: f64,
    settings: &AlgoSettings,
    seed: u64,
) -> Result<LocalizationResult> {
    check_algorithm(settings.algorithm, r)?;
    match settings.algorithm {
        Algorithm::Spectral => localize::localize_spectral_with(x, &SpectralOptions::default()),
        Algorithm::Denoised => {
            let sigma = if settings.estimate_sigma {
                localize::mad_sigma(x)
            } else {
                sigma
            };
            let opts = DenoiseOptions {
                t_mult: settings.t_mult,
                sizes: settings.denoise_sizes.then_some((k_m, k_n)),
                spectral: SpectralOptions::default(),
            };
            localize::localize_denoised_with(x, sigma, &opts)
        }
        Algorithm::Multi => localize::localize_multi_with(
            x,
            r,
            &MultiOptions {
                kmeans_seed: seed,
                ..Default::default()
            },
        ),
        Algorithm::Search => search::greedy_multi_search(x, k_m, k_n, r, &settings.budget),
        Algorithm::Convex => convex::localize_convex(x, k_m, k_n),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub algo: Algorithm,
    pub m: usize,
    pub n: usize,
    pub k_m: usize,
    pub k_n: usize,
    pub r: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub success: bool,
    pub jaccard: f64,
    pub degenerate: bool,
    pub error: Option<String>,
    pub wall_time_ms: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

pub const RECORD_COLUMNS: [&str; 16] = [
    "cell",
    "trial",
    "seed",
    "algo",
    "m",
    "n",
    "k_m",
    "k_n",
    "r",
    "lambda",
    "sigma",
    "success",
    "jaccard",
    "degenerate",
    "error",
    "diagnostics",
];

impl TrialRecord {
    fn row(&self, timing: bool) -> Result<Vec<String>> {
        let mut row = vec![
            self.cell.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.algo.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            self.k_m.to_string(),
            self.k_n.to_string(),
            self.r.to_string(),
            self.lambda.to_string(),
            self.sigma.to_string(),
            (self.success as u8).to_string(),
            self.jaccard.to_string(),
            (self.degenerate as u8).to_string(),
            self.error.clone().unwrap_or_default(),
            serde_json::to_string(&self.diagnostics)?,
        ];
        if timing {
            row.push(self.wall_time_ms.map(|t| t.to_string()).unwrap_or_default());
        }
        Ok(row)
    }
}

/// Generates and localizes one instance. Errors from the localizer become
/// a failed record.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    cell: usize,
    trial: usize,
    seed: u64,
    m: usize,
    n: usize,
    k_m: usize,
    k_n: usize,
    r: usize,
    lambda: f64,
    noise: &NoiseSpec,
    settings: &AlgoSettings,
) -> Result<TrialRecord> {
    let signal = random_signal(m, n, k_m, k_n, r, lambda, derive_seed(seed, &[0]))?;
    let (x, truth) = generate_instance(&signal, noise, derive_seed(seed, &[1]))?;
    let start = Instant::now();
    let outcome = run_algorithm(
        &x,
        k_m,
        k_n,
        r,
        noise.sigma,
        settings,
        derive_seed(seed, &[2]),
    );
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = TrialRecord {
        cell,
        trial,
        seed,
        algo: settings.algorithm,
        m,
        n,
        k_m,
        k_n,
        r,
        lambda,
        sigma: noise.sigma,
        success: false,
        jaccard: 0.0,
        degenerate: false,
        error: None,
        wall_time_ms: Some(elapsed),
        diagnostics: BTreeMap::new(),
    };
    match outcome {
        Ok(res) => {
            rec.success = res.matches(&truth);
            rec.jaccard = res.jaccard(&truth);
            rec.degenerate = res.is_degenerate();
            rec.diagnostics = res.diagnostics;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub lambda: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Why the cell was not run.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<CellSummary>,
    pub timing: bool,
}

impl SweepOutput {
    pub fn any_budget_refusal(&self) -> bool {
        self.summary.iter().any(|c| c.skipped.is_some())
    }
}

pub fn summarize(cell: usize, lambda: f64, records: &[TrialRecord]) -> CellSummary {
    let successes = records.iter().filter(|r| r.success).count();
    CellSummary {
        cell,
        lambda,
        trials: records.len(),
        successes,
        rate: if records.is_empty() {
            0.0
        } else {
            successes as f64 / records.len() as f64
        },
        skipped: None,
    }
}

/// One cell per lambda grid value, `trials` instances each.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let noise = NoiseSpec::new(cfg.noise, cfg.sigma)?;
    let settings = AlgoSettings::from_config(cfg);
    let lambdas = cfg.lambda_values()?;

    let skip = if cfg.algorithm == Algorithm::Search {
        let required = search::enumeration_count(cfg.m, cfg.n, cfg.k_m, cfg.k_n);
        (required > cfg.budget as u128)
            .then(|| format!("budget exceeded: {required} enumerations > {}", cfg.budget))
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> = if skip.is_some() {
        vec![]
    } else {
        (0..lambdas.len())
            .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
            .collect()
    };
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let seed = derive_seed(cfg.master_seed, &[c as u64, t as u64]);
            run_trial(
                c, t, seed, cfg.m, cfg.n, cfg.k_m, cfg.k_n, cfg.r, lambdas[c], &noise, &settings,
            )
        })
        .collect::<Result<_>>()?;

    let summary = lambdas
        .iter()
        .enumerate()
        .map(|(c, &lambda)| {
            let cell: Vec<TrialRecord> = records.iter().filter(|r| r.cell == c).cloned().collect();
            let mut s = summarize(c, lambda, &cell);
            s.skipped = skip.clone();
            s
        })
        .collect();
    Ok(SweepOutput {
        records,
        summary,
        timing: cfg.timing,
    })
}

pub fn write_records_csv<W: Write>(w: W, records: &[TrialRecord], timing: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = RECORD_COLUMNS.to_vec();
    if timing {
        header.push("wall_time_ms");
    }
    out.write_record(&header)?;
    for r in records {
        out.write_record(r.row(timing)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: W, summary: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cell", "lambda", "trials", "successes", "rate", "skipped"])?;
    for s in summary {
        out.write_record([
            s.cell.to_string(),
            s.lambda.to_string(),
            s.trials.to_string(),
            s.successes.to_string(),
            s.rate.to_string(),
            s.skipped.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Recomputes per-cell success counts from a records CSV.
pub fn reaggregate_records_csv<R: std::io::Read>(r: R) -> Result<BTreeMap<usize, (usize, usize)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("missing column {name}")))
    };
    let (ci, si) = (col("cell")?, col("success")?);
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let cell: usize = row[ci]
            .parse()
            .map_err(|_| Error::validation("bad cell value"))?;
        let entry = out.entry(cell).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += (&row[si] == "1") as usize;
    }
    Ok(out)
}

/// Predicted region from the threshold formulas with constant 1:
/// `C` below the statistical rate, `B` between the rates, `A` above.
pub fn region_label(n: usize, k: usize, snr: f64) -> Result<char> {
    let t = snr_thresholds(n as f64, n as f64, k as f64, k as f64)?;
    let dense = (k as f64) >= (n as f64).sqrt();
    Ok(if snr < t.snr_s {
        'C'
    } else if snr < t.snr_c(dense) {
        'B'
    } else {
        'A'
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub algo: Algorithm,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub region_label: char,
}

pub const PHASE_COLUMNS: [&str; 11] = [
    "alpha",
    "beta",
    "n",
    "k",
    "lambda",
    "sigma",
    "algo",
    "trials",
    "successes",
    "rate",
    "region_label",
];

/// Block size `round(n^alpha)` clamped to `1..=n`.
pub fn phase_k(n: usize, alpha: f64) -> usize {
    ((n as f64).powf(alpha).round() as usize).clamp(1, n)
}

/// Square `n x n` instances with `k = round(n^alpha)` and
/// `lambda = sigma n^-beta`, one cell per (alpha, beta).
pub fn run_phase_diagram(cfg: &ExperimentConfig) -> Result<Vec<PhaseCell>> {
    cfg.validate()?;
    let noise = NoiseSpec::new(cfg.noise, cfg.sigma)?;
    let settings = AlgoSettings::from_config(cfg);
    let n = cfg.n;
    let mut cells = Vec::new();
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        for (bi, &beta) in cfg.betas.iter().enumerate() {
            let k = phase_k(n, alpha);
            let lambda = cfg.sigma * (n as f64).powf(-beta);
            let label = region_label(n, k, lambda / cfg.sigma)?;
            let idx = cells.len();
            let successes = if settings.algorithm == Algorithm::Search
                && search::enumeration_count(n, n, k, k) > cfg.budget as u128
            {
                return Err(Error::BudgetExceeded {
                    required: search::enumeration_count(n, n, k, k),
                    budget: cfg.budget,
                });
            } else {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let seed = derive_seed(cfg.master_seed, &[ai as u64, bi as u64, t as u64]);
                        run_trial(idx, t, seed, n, n, k, k, 1, lambda, &noise, &settings)
                            .map(|r| r.success)
                    })
                    .collect::<Result<Vec<bool>>>()?
                    .into_iter()
                    .filter(|&s| s)
                    .count()
            };
            cells.push(PhaseCell {
                alpha,
                beta,
                n,
                k,
                lambda,
                sigma: cfg.sigma,
                algo: settings.algorithm,
                trials: cfg.trials,
                successes,
                rate: successes as f64 / cfg.trials as f64,
                region_label: label,
            });
        }
    }
    Ok(cells)
}

pub fn write_phase_csv<W: Write>(w: W, cells: &[PhaseCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PHASE_COLUMNS)?;
    for c in cells {
        out.write_record([
            c.alpha.to_string(),
            c.beta.to_string(),
            c.n.to_string(),
            c.k.to_string(),
            c.lambda.to_string(),
            c.sigma.to_string(),
            c.algo.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            c.rate.to_string(),
            c.region_label.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Success rate of `trials` square instances at one lambda. Trial `t` uses
/// the same seed at every lambda, so rates along a lambda grid share noise.
pub fn success_rate(
    n: usize,
    k: usize,
    lambda: f64,
    noise: &NoiseSpec,
    settings: &AlgoSettings,
    trials: usize,
    master_seed: u64,
) -> Result<f64> {
    let wins = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(master_seed, &[t as u64]);
            run_trial(0, t, seed, n, n, k, k, 1, lambda, noise, settings)
                .map(|r| r.success as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(wins as f64 / trials as f64)
}

/// Bisection for the lambda at which the success rate crosses 1/2, starting
/// from a bracket `[lo, hi]` (widened geometrically when needed).
#[allow(clippy::too_many_arguments)]
pub fn half_success_lambda(
    n: usize,
    k: usize,
    noise: &NoiseSpec,
    settings: &AlgoSettings,
    trials: usize,
    master_seed: u64,
    mut lo: f64,
    mut hi: f64,
    steps: usize,
) -> Result<f64> {
    let rate = |lambda: f64| success_rate(n, k, lambda, noise, settings, trials, master_seed);
    for _ in 0..20 {
        if rate(lo)? < 0.5 {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..20 {
        if rate(hi)? >= 0.5 {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionRecord {
    pub trial: usize,
    pub seed: u64,
    pub clique_n: usize,
    pub kappa: usize,
    pub l: usize,
    pub algo: Algorithm,
    pub success: bool,
    pub clique_size: usize,
    pub recovered_size: usize,
    pub candidate_size: usize,
    pub failure: Option<String>,
}

pub fn run_reduction(cfg: &ExperimentConfig) -> Result<Vec<ReductionRecord>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.master_seed, &[t as u64]);
            let out = reduction::end_to_end_with_mode(
                cfg.clique_n,
                cfg.kappa,
                cfg.l,
                cfg.algorithm,
                cfg.clique_mode,
                seed,
            )?;
            Ok(ReductionRecord {
                trial: t,
                seed,
                clique_n: cfg.clique_n,
                kappa: cfg.kappa,
                l: cfg.l,
                algo: cfg.algorithm,
                success: out.success,
                clique_size: out.clique.len(),
                recovered_size: out.recovered.len(),
                candidate_size: out.candidate_size,
                failure: out.failure,
            })
        })
        .collect()
}

pub fn write_reduction_csv<W: Write>(w: W, records: &[ReductionRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "trial",
        "seed",
        "clique_n",
        "kappa",
        "l",
        "algo",
        "success",
        "clique_size",
        "recovered_size",
        "candidate_size",
        "failure",
    ])?;
    for r in records {
        out.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.clique_n.to_string(),
            r.kappa.to_string(),
            r.l.to_string(),
            r.algo.to_string(),
            (r.success as u8).to_string(),
            r.clique_size.to_string(),
            r.recovered_size.to_string(),
            r.candidate_size.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
