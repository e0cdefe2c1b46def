//! Reproducible Monte Carlo experiments over the score estimators.
//!
//! Four experiment kinds are provided:
//!
//! * **m-dependence** — expected standard score against ensemble size for a
//!   perfectly calibrated Normal forecast, with the analytic expectation and
//!   the flat population score alongside
//! * **sigma-sweep** — expected standard and corrected scores for forecasts
//!   N(0, σ²) verified against N(0, 1) observations, exposing where each
//!   curve attains its minimum
//! * **subsample-compare** — paired scores of two verification series as a
//!   function of subsampled ensemble size
//! * **nonnormal-bias** — estimator biases when the Normal assumption is
//!   violated by heavy tails, skew, or bimodality
//!
//! # Determinism
//!
//! Replicate r of grid point g always consumes the ChaCha8 stream addressed
//! by the experiment seed, a per-experiment domain tag, g, and r. Replicates
//! are accumulated in fixed-size index blocks whose partial results merge in
//! block order, so the output bytes are identical for every worker-thread
//! count. The sigma sweep deliberately keys its streams by (m, r) only:
//! all σ values of one replicate share the same underlying draws, which
//! removes most Monte Carlo noise from comparisons along the σ axis.

use crate::distributions::{compose_stream_id, stream_tag, Family, RngStream};
use crate::ensemble::{
    format_float, subsample_members, SeriesError, SubsampleSpec, VerificationSeries,
};
use crate::scores::{
    ignorance_bias_corrected, ignorance_standard, ScoreError,
};
use crate::special::{digamma, HALF_LN_TWO_PI};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {message}")]
    InvalidSpec { message: String },
    #[error("series mismatch: {message}")]
    SeriesMismatch { message: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

// ---------------------------------------------------------------------------
// Streaming moment accumulators with deterministic merging.

/// Online mean/covariance accumulator over K-dimensional samples (Welford
/// updates, Chan et al. merging). Merging is exact bookkeeping, so any fixed
/// merge order gives a deterministic result.
#[derive(Debug, Clone, Copy)]
pub struct MultiMoments<const K: usize> {
    n: u64,
    mean: [f64; K],
    m2: [[f64; K]; K],
}

impl<const K: usize> Default for MultiMoments<K> {
    fn default() -> Self {
        Self { n: 0, mean: [0.0; K], m2: [[0.0; K]; K] }
    }
}

impl<const K: usize> MultiMoments<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: [f64; K]) {
        self.n += 1;
        let nf = self.n as f64;
        let mut delta_old = [0.0; K];
        for i in 0..K {
            delta_old[i] = x[i] - self.mean[i];
            self.mean[i] += delta_old[i] / nf;
        }
        for i in 0..K {
            for j in i..K {
                let d = delta_old[i] * (x[j] - self.mean[j]);
                self.m2[i][j] += d;
            }
        }
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let nf = n as f64;
        let mut mean = [0.0; K];
        let mut delta = [0.0; K];
        for i in 0..K {
            delta[i] = other.mean[i] - self.mean[i];
            mean[i] = self.mean[i] + delta[i] * nb / nf;
        }
        let mut m2 = self.m2;
        for i in 0..K {
            for j in i..K {
                m2[i][j] += other.m2[i][j] + delta[i] * delta[j] * na * nb / nf;
            }
        }
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Sample covariance (divisor n − 1).
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.n > 1);
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.m2[i][j] / (self.n - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i)
    }

    /// Standard error of the mean of component i.
    pub fn se(&self, i: usize) -> f64 {
        (self.variance(i) / self.n as f64).sqrt()
    }

    /// Mean of the difference of components i − j.
    pub fn mean_difference(&self, i: usize, j: usize) -> f64 {
        self.mean[i] - self.mean[j]
    }

    /// Standard error of the mean difference i − j, using the pairing.
    pub fn se_difference(&self, i: usize, j: usize) -> f64 {
        let v = self.variance(i) + self.variance(j) - 2.0 * self.covariance(i, j);
        (v.max(0.0) / self.n as f64).sqrt()
    }
}

/// Partial results that can be combined pairwise.
pub trait Mergeable: Send {
    fn merge(self, other: Self) -> Self;
}

impl<const K: usize> Mergeable for MultiMoments<K> {
    fn merge(self, other: Self) -> Self {
        MultiMoments::merge(self, other)
    }
}

impl<T: Mergeable> Mergeable for Vec<T> {
    fn merge(self, other: Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        self.into_iter().zip(other).map(|(a, b)| a.merge(b)).collect()
    }
}

/// Replicates per work block. Block boundaries only group already
/// deterministic per-replicate values, so the constant affects speed, never
/// results.
const BLOCK: usize = 4096;

/// Runs `update` for every replicate index, in parallel over fixed blocks,
/// merging block results in index order.
pub(crate) fn run_blocked<A: Mergeable>(
    replicates: usize,
    init: impl Fn() -> A + Sync,
    update: impl Fn(&mut A, usize) + Sync,
) -> A {
    let blocks = replicates.div_ceil(BLOCK).max(1);
    let mut parts: Vec<A> = Vec::with_capacity(blocks);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for r in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                update(&mut acc, r);
            }
            acc
        })
        .collect_into_vec(&mut parts);
    parts.into_iter().reduce(Mergeable::merge).expect("at least one block")
}

/// Deterministic parallel Monte Carlo: evaluates `f` at every replicate
/// index and accumulates K-dimensional moments. The result is independent of
/// the rayon thread count.
pub fn monte_carlo_moments<const K: usize>(
    replicates: usize,
    f: impl Fn(usize) -> [f64; K] + Sync,
) -> MultiMoments<K> {
    run_blocked(replicates, MultiMoments::<K>::new, |acc, r| acc.update(f(r)))
}

// ---------------------------------------------------------------------------
// Experiment specification.

/// Non-Normal family kind for the bias experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    StudentT,
    Gamma,
    Bimodal,
}

impl FamilyKind {
    pub fn label(&self) -> &'static str {
        match self {
            FamilyKind::StudentT => "t",
            FamilyKind::Gamma => "gamma",
            FamilyKind::Bimodal => "bimodal",
        }
    }

    pub fn family(&self, theta: f64) -> Family {
        match self {
            FamilyKind::StudentT => Family::ScaledStudentT { dof: theta },
            FamilyKind::Gamma => Family::ScaledShiftedGamma { shape: theta },
            FamilyKind::Bimodal => Family::BimodalMixture { mode: theta },
        }
    }

    /// Shape grid used when none is given, ordered from far-from-Normal to
    /// near-Normal.
    pub fn default_thetas(&self) -> Vec<f64> {
        match self {
            FamilyKind::StudentT => vec![4.0, 6.0, 8.0, 12.0, 20.0, 40.0],
            FamilyKind::Gamma => vec![5.0, 10.0, 20.0, 50.0],
            FamilyKind::Bimodal => vec![0.0, 0.3, 0.6, 0.75, 0.9],
        }
    }
}

/// Full description of one experiment. Serialized verbatim into the JSON
/// sidecar next to each result file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    MDependence {
        m_grid: Vec<usize>,
        replicates: usize,
        seed: u64,
    },
    SigmaSweep {
        sigma_grid: Vec<f64>,
        m_grid: Vec<usize>,
        replicates: usize,
        seed: u64,
    },
    SubsampleCompare {
        subset_grid: Vec<usize>,
        replicates: usize,
        seed: u64,
    },
    NonNormalBias {
        family: FamilyKind,
        theta_grid: Vec<f64>,
        m_grid: Vec<usize>,
        replicates: usize,
        seed: u64,
    },
}

pub const DEFAULT_M_GRID: &[usize] = &[4, 5, 6, 8, 10, 15, 20, 30, 50];
pub const DEFAULT_SIGMA_GRID: &[f64] = &[0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6];
pub const DEFAULT_SWEEP_M_GRID: &[usize] = &[5, 10, 20, 50];
pub const DEFAULT_NONNORMAL_M_GRID: &[usize] = &[5, 10, 50];
pub const DEFAULT_REPLICATES: usize = 100_000;
pub const DEFAULT_SUBSAMPLE_REPLICATES: usize = 1_000;

impl ExperimentSpec {
    pub fn default_m_dependence(seed: u64) -> Self {
        ExperimentSpec::MDependence {
            m_grid: DEFAULT_M_GRID.to_vec(),
            replicates: DEFAULT_REPLICATES,
            seed,
        }
    }

    pub fn default_sigma_sweep(seed: u64) -> Self {
        ExperimentSpec::SigmaSweep {
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            m_grid: DEFAULT_SWEEP_M_GRID.to_vec(),
            replicates: DEFAULT_REPLICATES,
            seed,
        }
    }

    pub fn default_subsample_compare(seed: u64) -> Self {
        ExperimentSpec::SubsampleCompare {
            subset_grid: (4..=29).collect(),
            replicates: DEFAULT_SUBSAMPLE_REPLICATES,
            seed,
        }
    }

    pub fn default_nonnormal(family: FamilyKind, seed: u64) -> Self {
        ExperimentSpec::NonNormalBias {
            theta_grid: family.default_thetas(),
            family,
            m_grid: DEFAULT_NONNORMAL_M_GRID.to_vec(),
            replicates: DEFAULT_REPLICATES,
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            ExperimentSpec::MDependence { seed, .. }
            | ExperimentSpec::SigmaSweep { seed, .. }
            | ExperimentSpec::SubsampleCompare { seed, .. }
            | ExperimentSpec::NonNormalBias { seed, .. } => seed,
        }
    }

    pub fn replicates(&self) -> usize {
        match *self {
            ExperimentSpec::MDependence { replicates, .. }
            | ExperimentSpec::SigmaSweep { replicates, .. }
            | ExperimentSpec::SubsampleCompare { replicates, .. }
            | ExperimentSpec::NonNormalBias { replicates, .. } => replicates,
        }
    }

    /// Checks grids and replicate counts before a run.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(ExperimentError::InvalidSpec { message });
        if self.replicates() < 100 {
            return fail(format!("at least 100 replicates required, got {}", self.replicates()));
        }
        match self {
            ExperimentSpec::MDependence { m_grid, .. } => {
                if m_grid.is_empty() {
                    return fail("empty ensemble-size grid".into());
                }
                if let Some(&m) = m_grid.iter().find(|&&m| m < 4) {
                    return fail(format!(
                        "ensemble sizes below 4 have no finite expected standard score, got {m}"
                    ));
                }
            }
            ExperimentSpec::SigmaSweep { sigma_grid, m_grid, .. } => {
                if sigma_grid.is_empty() || m_grid.is_empty() {
                    return fail("empty sigma or ensemble-size grid".into());
                }
                if let Some(&s) = sigma_grid.iter().find(|&&s| !(s > 0.0) || !s.is_finite()) {
                    return fail(format!("forecast spread must be positive, got {s}"));
                }
                if let Some(&m) = m_grid.iter().find(|&&m| m < 4) {
                    return fail(format!("the corrected estimator needs m >= 4, got {m}"));
                }
            }
            ExperimentSpec::SubsampleCompare { subset_grid, .. } => {
                if subset_grid.is_empty() {
                    return fail("empty subset-size grid".into());
                }
                if let Some(&s) = subset_grid.iter().find(|&&s| s < 2) {
                    return fail(format!("scoring needs at least 2 members, got subset size {s}"));
                }
            }
            ExperimentSpec::NonNormalBias { family, theta_grid, m_grid, .. } => {
                if theta_grid.is_empty() || m_grid.is_empty() {
                    return fail("empty theta or ensemble-size grid".into());
                }
                if let Some(&m) = m_grid.iter().find(|&&m| m < 4) {
                    return fail(format!("the corrected estimator needs m >= 4, got {m}"));
                }
                for &theta in theta_grid {
                    family.family(theta).validate().map_err(|e| ExperimentError::InvalidSpec {
                        message: e.to_string(),
                    })?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results.

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Values aligned with `ExperimentResult::grid_columns`.
    pub grid: Vec<String>,
    pub estimator: String,
    pub mean: f64,
    pub se: f64,
    pub replicates: u64,
    /// Values aligned with `ExperimentResult::extra_columns`.
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResultMeta {
    pub spec: ExperimentSpec,
    pub spec_hash: String,
    pub code_version: String,
}

/// Tabular experiment output plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub grid_columns: Vec<&'static str>,
    pub extra_columns: Vec<&'static str>,
    pub rows: Vec<ResultRow>,
    pub meta: ResultMeta,
}

impl ExperimentResult {
    /// Writes the fixed-order CSV table: grid fields, estimator, mean, se,
    /// replicates, then any experiment-specific columns. Analytic reference
    /// rows carry se = 0 and replicates = 0.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.grid_columns.clone();
        header.extend(["estimator", "mean", "se", "replicates"]);
        header.extend(&self.extra_columns);
        out.write_record(&header).map_err(SeriesError::from)?;
        for row in &self.rows {
            let mut record = row.grid.clone();
            record.push(row.estimator.clone());
            record.push(format_float(row.mean));
            record.push(format_float(row.se));
            record.push(row.replicates.to_string());
            record.extend(row.extra.iter().cloned());
            out.write_record(&record).map_err(SeriesError::from)?;
        }
        out.flush().map_err(SeriesError::from)?;
        Ok(())
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    /// JSON sidecar with the spec, its hash, and the code version.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("meta serializes") + "\n"
    }
}

fn meta_for(spec: &ExperimentSpec) -> ResultMeta {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    let spec_hash = hash.iter().map(|b| format!("{b:02x}")).collect();
    ResultMeta {
        spec: spec.clone(),
        spec_hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn index_of_min(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty")
}

/// Expected bias of the standard estimator at size m, averaged over
/// observations x ~ N(0, 1) against forecasts N(0, σ²): the (x − μ)²/σ²
/// term of the pointwise bias is replaced by its expectation 1/σ².
fn average_standard_bias(m: usize, sigma2: f64) -> f64 {
    let mf = m as f64;
    let half = 0.5 * (mf - 1.0);
    0.5 * (digamma(half) - half.ln())
        + 1.0 / ((mf - 3.0) * sigma2)
        + (mf - 1.0) / (2.0 * mf * (mf - 3.0))
}

fn fit_stats(members: &[f64]) -> (f64, f64) {
    let m = members.len() as f64;
    let mean = members.iter().sum::<f64>() / m;
    let ss = members.iter().map(|&y| (y - mean) * (y - mean)).sum::<f64>();
    (mean, ss / (m - 1.0))
}

// ---------------------------------------------------------------------------
// m-dependence.

/// Expected standard score against ensemble size for a perfectly calibrated
/// Normal forecast system: members and observations both i.i.d. N(0, 1).
/// Emits the Monte Carlo mean (`standard`), the analytic expectation
/// (`standard_analytic`), and the flat population score (`population`).
pub fn run_m_dependence(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let ExperimentSpec::MDependence { m_grid, replicates, seed } = spec else {
        return Err(ExperimentError::InvalidSpec {
            message: "run_m_dependence needs an m-dependence spec".into(),
        });
    };
    let population = HALF_LN_TWO_PI + 0.5;
    let mut rows = Vec::new();
    for (gi, &m) in m_grid.iter().enumerate() {
        let moments = monte_carlo_moments::<1>(*replicates, |r| {
            let stream = RngStream::new(*seed, compose_stream_id(stream_tag::M_DEPENDENCE, gi, r));
            let mut rng = stream.rng();
            let std_normal = Family::Normal { mean: 0.0, variance: 1.0 };
            let members: Vec<f64> = (0..m).map(|_| std_normal.draw(&mut rng)).collect();
            let x = std_normal.draw(&mut rng);
            [ignorance_standard(&members, x).expect("continuous ensemble").value()]
        });
        let grid = vec![m.to_string()];
        rows.push(ResultRow {
            grid: grid.clone(),
            estimator: "standard".into(),
            mean: moments.mean(0),
            se: moments.se(0),
            replicates: moments.count(),
            extra: vec![],
        });
        rows.push(ResultRow {
            grid: grid.clone(),
            estimator: "standard_analytic".into(),
            mean: population + average_standard_bias(m, 1.0),
            se: 0.0,
            replicates: 0,
            extra: vec![],
        });
        rows.push(ResultRow {
            grid,
            estimator: "population".into(),
            mean: population,
            se: 0.0,
            replicates: 0,
            extra: vec![],
        });
    }
    Ok(ExperimentResult {
        grid_columns: vec!["m"],
        extra_columns: vec![],
        rows,
        meta: meta_for(spec),
    })
}

// ---------------------------------------------------------------------------
// sigma sweep.

/// Expected scores of forecasts N(0, σ²) for observations from N(0, 1),
/// over a σ grid and several ensemble sizes. All σ values of one replicate
/// reuse the same standard-Normal draws (scaled by σ), so differences along
/// the σ axis are nearly noise-free. Each row carries the σ at which its
/// whole curve is minimal; fair estimators put it at the true spread 1.0,
/// while the standard estimator rewards over-dispersion.
pub fn run_sigma_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let ExperimentSpec::SigmaSweep { sigma_grid, m_grid, replicates, seed } = spec else {
        return Err(ExperimentError::InvalidSpec {
            message: "run_sigma_sweep needs a sigma-sweep spec".into(),
        });
    };
    let s_count = sigma_grid.len();
    let mut rows = Vec::new();
    for (mi, &m) in m_grid.iter().enumerate() {
        let mf = m as f64;
        let half = 0.5 * (mf - 1.0);
        let corrected_const = 0.5 * (digamma(half) - half.ln() + 1.0 / mf);
        let shrink = (mf - 3.0) / (mf - 1.0);
        let per_sigma = run_blocked(
            *replicates,
            || vec![MultiMoments::<2>::new(); s_count],
            |acc, r| {
                let stream =
                    RngStream::new(*seed, compose_stream_id(stream_tag::SIGMA_SWEEP, mi, r));
                let mut rng = stream.rng();
                let std_normal = Family::Normal { mean: 0.0, variance: 1.0 };
                let base: Vec<f64> = (0..m).map(|_| std_normal.draw(&mut rng)).collect();
                let x = std_normal.draw(&mut rng);
                let (mean_z, var_z) = fit_stats(&base);
                for (si, &sigma) in sigma_grid.iter().enumerate() {
                    let mean = sigma * mean_z;
                    let var = sigma * sigma * var_z;
                    let z2 = (x - mean) * (x - mean) / var;
                    let base_score = HALF_LN_TWO_PI + 0.5 * var.ln();
                    let standard = base_score + 0.5 * z2;
                    let corrected = base_score + 0.5 * shrink * z2 - corrected_const;
                    acc[si].update([standard, corrected]);
                }
            },
        );

        let mc_std: Vec<f64> = per_sigma.iter().map(|mm| mm.mean(0)).collect();
        let mc_corr: Vec<f64> = per_sigma.iter().map(|mm| mm.mean(1)).collect();
        let analytic_pop: Vec<f64> = sigma_grid
            .iter()
            .map(|&s| HALF_LN_TWO_PI + (s * s).ln() / 2.0 + 1.0 / (2.0 * s * s))
            .collect();
        let analytic_std: Vec<f64> = sigma_grid
            .iter()
            .zip(&analytic_pop)
            .map(|(&s, &p)| p + average_standard_bias(m, s * s))
            .collect();

        let argmin_std = sigma_grid[index_of_min(&mc_std)];
        let argmin_corr = sigma_grid[index_of_min(&mc_corr)];
        // Analytic curve minima: d/dσ² of ½ ln σ² + (½ + 1/(m−3))/σ²
        // vanishes at σ² = (m−1)/(m−3); the population curve bottoms at 1.
        let argmin_analytic_std = ((mf - 1.0) / (mf - 3.0)).sqrt();

        for (si, &sigma) in sigma_grid.iter().enumerate() {
            let grid = vec![format!("{sigma}"), m.to_string()];
            let mm = &per_sigma[si];
            rows.push(ResultRow {
                grid: grid.clone(),
                estimator: "standard".into(),
                mean: mm.mean(0),
                se: mm.se(0),
                replicates: mm.count(),
                extra: vec![format!("{argmin_std}")],
            });
            rows.push(ResultRow {
                grid: grid.clone(),
                estimator: "corrected".into(),
                mean: mm.mean(1),
                se: mm.se(1),
                replicates: mm.count(),
                extra: vec![format!("{argmin_corr}")],
            });
            rows.push(ResultRow {
                grid: grid.clone(),
                estimator: "standard_analytic".into(),
                mean: analytic_std[si],
                se: 0.0,
                replicates: 0,
                extra: vec![format_float(argmin_analytic_std)],
            });
            rows.push(ResultRow {
                grid,
                estimator: "population_analytic".into(),
                mean: analytic_pop[si],
                se: 0.0,
                replicates: 0,
                extra: vec!["1".into()],
            });
        }
    }
    Ok(ExperimentResult {
        grid_columns: vec!["sigma", "m"],
        extra_columns: vec!["curve_min_sigma"],
        rows,
        meta: meta_for(spec),
    })
}

// ---------------------------------------------------------------------------
// non-Normal bias.

/// Per-grid-point moments of the four scores evaluated on common draws:
/// index 0 the true-density oracle, 1 the standard-Normal oracle, 2 the
/// standard estimator, 3 the corrected estimator.
#[derive(Debug, Clone, Copy)]
pub struct NonNormalPoint {
    pub theta: f64,
    pub m: usize,
    pub moments: MultiMoments<4>,
}

pub const NN_TRUE: usize = 0;
pub const NN_NORMAL: usize = 1;
pub const NN_STANDARD: usize = 2;
pub const NN_CORRECTED: usize = 3;

/// Full moment detail of the non-Normal bias experiment, used both for the
/// CSV table and for significance checks on the bias differences.
pub fn run_nonnormal_detailed(spec: &ExperimentSpec) -> Result<Vec<NonNormalPoint>> {
    spec.validate()?;
    let ExperimentSpec::NonNormalBias { family, theta_grid, m_grid, replicates, seed } = spec
    else {
        return Err(ExperimentError::InvalidSpec {
            message: "run_nonnormal_detailed needs a non-Normal spec".into(),
        });
    };
    let mut points = Vec::new();
    for (ti, &theta) in theta_grid.iter().enumerate() {
        let fam = family.family(theta);
        for (mi, &m) in m_grid.iter().enumerate() {
            let gi = ti * m_grid.len() + mi;
            let moments = monte_carlo_moments::<4>(*replicates, |r| {
                let stream =
                    RngStream::new(*seed, compose_stream_id(stream_tag::NON_NORMAL, gi, r));
                let mut rng = stream.rng();
                let members: Vec<f64> = (0..m).map(|_| fam.draw(&mut rng)).collect();
                let x = fam.draw(&mut rng);
                let true_score = -fam.log_density(x).expect("draws lie in the support");
                let normal_score = HALF_LN_TWO_PI + 0.5 * x * x;
                let standard = ignorance_standard(&members, x).expect("continuous ensemble");
                let corrected = ignorance_bias_corrected(&members, x).expect("continuous ensemble");
                [true_score, normal_score, standard.value(), corrected.value()]
            });
            points.push(NonNormalPoint { theta, m, moments });
        }
    }
    Ok(points)
}

/// Estimator biases under departures from Normality: for each (θ, m) the
/// mean of every score and, in the `bias` column, its distance from the
/// true-density oracle on the same draws.
pub fn run_nonnormal_bias(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentSpec::NonNormalBias { family, .. } = spec else {
        return Err(ExperimentError::InvalidSpec {
            message: "run_nonnormal_bias needs a non-Normal spec".into(),
        });
    };
    let family_label = family.label();
    let points = run_nonnormal_detailed(spec)?;
    let labels = ["true_density", "normal_oracle", "standard", "corrected"];
    let mut rows = Vec::new();
    for point in &points {
        let grid =
            vec![family_label.to_string(), format!("{}", point.theta), point.m.to_string()];
        let truth = point.moments.mean(NN_TRUE);
        for (idx, label) in labels.iter().enumerate() {
            rows.push(ResultRow {
                grid: grid.clone(),
                estimator: (*label).into(),
                mean: point.moments.mean(idx),
                se: point.moments.se(idx),
                replicates: point.moments.count(),
                extra: vec![format_float(point.moments.mean(idx) - truth)],
            });
        }
    }
    Ok(ExperimentResult {
        grid_columns: vec!["family", "theta", "m"],
        extra_columns: vec!["bias"],
        rows,
        meta: meta_for(spec),
    })
}

// ---------------------------------------------------------------------------
// subsample comparison.

/// Replicate-level means for one subset size of the comparison: indices
/// 0/1 the standard scores of series a and b, 2/3 the corrected scores
/// (present only when the subset size supports correction).
#[derive(Debug, Clone, Copy)]
pub struct ComparePoint {
    pub subset_size: usize,
    pub standard: MultiMoments<2>,
    pub corrected: Option<MultiMoments<2>>,
}

/// Detailed replicate moments behind [`run_subsample_compare`].
pub fn run_subsample_compare_detailed(
    series_a: &VerificationSeries,
    series_b: &VerificationSeries,
    spec: &ExperimentSpec,
) -> Result<Vec<ComparePoint>> {
    spec.validate()?;
    let ExperimentSpec::SubsampleCompare { subset_grid, replicates, seed } = spec else {
        return Err(ExperimentError::InvalidSpec {
            message: "run_subsample_compare needs a subsample-compare spec".into(),
        });
    };
    if series_a.times() != series_b.times() || series_a.observations() != series_b.observations() {
        return Err(ExperimentError::SeriesMismatch {
            message: "the two series must share times and observations".into(),
        });
    }
    let (ma, mb) = (series_a.ensemble_size(), series_b.ensemble_size());
    let common = ma.min(mb);
    if let Some(&s) = subset_grid.iter().find(|&&s| s > common) {
        return Err(ExperimentError::InvalidSpec {
            message: format!("subset size {s} exceeds the smaller ensemble ({common})"),
        });
    }

    let mut points = Vec::new();
    for (gi, &subset) in subset_grid.iter().enumerate() {
        // One derived seed per grid point; when the two ensembles have equal
        // width the same streams drive both, giving a fully paired draw.
        let seed_a = splitmix64(seed ^ (gi as u64 + 1));
        let seed_b = if ma == mb { seed_a } else { splitmix64(seed_a ^ 0x5eed_b00) };
        let spec_a = SubsampleSpec::new(subset, *replicates, seed_a)?;
        let spec_b = SubsampleSpec::new(subset, *replicates, seed_b)?;
        let with_corrected = subset >= 4;

        let (standard, corrected) = run_blocked(
            *replicates,
            || (MultiMoments::<2>::new(), MultiMoments::<2>::new()),
            |acc, r| {
                let sub_a = subsample_members(series_a, &spec_a, r).expect("validated subset");
                let sub_b = subsample_members(series_b, &spec_b, r).expect("validated subset");
                let mut sums = [0.0f64; 4];
                for t in 0..sub_a.len() {
                    let x = sub_a.observations()[t];
                    sums[0] += ignorance_standard(&sub_a.members()[t], x)
                        .expect("non-degenerate subsample")
                        .value();
                    sums[1] += ignorance_standard(&sub_b.members()[t], x)
                        .expect("non-degenerate subsample")
                        .value();
                    if with_corrected {
                        sums[2] += ignorance_bias_corrected(&sub_a.members()[t], x)
                            .expect("non-degenerate subsample")
                            .value();
                        sums[3] += ignorance_bias_corrected(&sub_b.members()[t], x)
                            .expect("non-degenerate subsample")
                            .value();
                    }
                }
                let n = sub_a.len() as f64;
                acc.0.update([sums[0] / n, sums[1] / n]);
                if with_corrected {
                    acc.1.update([sums[2] / n, sums[3] / n]);
                }
            },
        );
        points.push(ComparePoint {
            subset_size: subset,
            standard,
            corrected: with_corrected.then_some(corrected),
        });
    }
    Ok(points)
}

impl Mergeable for (MultiMoments<2>, MultiMoments<2>) {
    fn merge(self, other: Self) -> Self {
        (self.0.merge(other.0), self.1.merge(other.1))
    }
}

/// Paired score comparison of two verification series over identical times
/// and observations (for example a dynamical forecast against its
/// climatology, or an unbiased against a bias-injected copy), as a function
/// of the subsampled ensemble size. Rows tagged `a` and `b` carry each
/// series' mean score over time steps and replicates; `diff` rows carry the
/// paired difference a − b with its replicate-level standard error.
pub fn run_subsample_compare(
    series_a: &VerificationSeries,
    series_b: &VerificationSeries,
    spec: &ExperimentSpec,
) -> Result<ExperimentResult> {
    let points = run_subsample_compare_detailed(series_a, series_b, spec)?;
    let mut rows = Vec::new();
    for point in &points {
        let mut push = |estimator: &str, mm: &MultiMoments<2>| {
            let grid = |series: &str| vec![point.subset_size.to_string(), series.to_string()];
            rows.push(ResultRow {
                grid: grid("a"),
                estimator: estimator.into(),
                mean: mm.mean(0),
                se: mm.se(0),
                replicates: mm.count(),
                extra: vec![],
            });
            rows.push(ResultRow {
                grid: grid("b"),
                estimator: estimator.into(),
                mean: mm.mean(1),
                se: mm.se(1),
                replicates: mm.count(),
                extra: vec![],
            });
            rows.push(ResultRow {
                grid: grid("diff"),
                estimator: estimator.into(),
                mean: mm.mean_difference(0, 1),
                se: mm.se_difference(0, 1),
                replicates: mm.count(),
                extra: vec![],
            });
        };
        push("standard", &point.standard);
        if let Some(corrected) = &point.corrected {
            push("corrected", corrected);
        }
    }
    Ok(ExperimentResult {
        grid_columns: vec!["subset_size", "series"],
        extra_columns: vec![],
        rows,
        meta: meta_for(spec),
    })
}
