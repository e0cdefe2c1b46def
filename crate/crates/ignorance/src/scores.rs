//! Ignorance (logarithmic) score estimators for Normal predictive
//! distributions fitted to finite ensembles.
//!
//! The population score of a Normal forecast N(μ, σ²) for outcome x is
//!
//! ```text
//! I(μ, σ²; x) = ½ ln 2π + ½ ln σ² + ½ ((x − μ)/σ)²
//! ```
//!
//! in nats. When μ and σ² are replaced by the sample mean and sample
//! variance of an m-member ensemble, the plug-in ("standard") estimator Î
//! acquires a positive bias that decays only like 1/m. This module provides
//! Î, a bias-corrected estimator whose expectation equals the population
//! score exactly for Normal ensembles, and an extrapolated estimator that
//! predicts the score an M-member ensemble would attain given only m
//! members. Closed-form approximations for the estimator variances and for
//! the standard estimator's bias are included.

use crate::special::{digamma, HALF_LN_TWO_PI};
use thiserror::Error;

/// Errors produced by score estimation.
#[derive(Debug, Error, PartialEq, Clone)]
pub enum ScoreError {
    /// The ensemble has fewer members than the requested operation needs.
    #[error("{what} requires at least {required} ensemble members, got {actual}")]
    EnsembleTooSmall {
        what: &'static str,
        required: usize,
        actual: usize,
    },
    /// All members are identical, so the fitted variance is zero and no
    /// score is defined. Reported as an error, never as an infinite score.
    #[error("degenerate ensemble: all {size} members equal {value}, fitted variance is zero")]
    DegenerateEnsemble { size: usize, value: f64 },
    /// Extrapolation target below the smallest size the correction supports.
    #[error("extrapolation target size must be at least 4, got {0}")]
    TargetTooSmall(usize),
    /// An input value was NaN or infinite.
    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },
    /// A variance parameter was zero, negative, or non-finite.
    #[error("variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
}

pub type Result<T> = std::result::Result<T, ScoreError>;

/// Mean and variance of a Normal predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    mean: f64,
    variance: f64,
}

impl GaussianParams {
    /// Validates that the mean is finite and the variance positive and finite.
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(ScoreError::NonFinite { context: "Gaussian mean" });
        }
        if !variance.is_finite() || variance <= 0.0 {
            return Err(ScoreError::InvalidVariance(variance));
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Which estimator produced a score value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Estimator {
    /// Population score of known (μ, σ²).
    Population,
    /// Plug-in estimator Î from fitted ensemble statistics.
    Standard,
    /// Bias-corrected estimator whose expectation is the population score.
    BiasCorrected,
    /// Corrected estimator extrapolated to a different ensemble size.
    Extrapolated,
    /// Oracle score of the standard Normal density, ½ ln 2π + x²/2.
    NormalApproxOracle,
    /// Oracle score −ln p(x) of the true generating density.
    TrueDensityOracle,
}

impl Estimator {
    /// Stable label used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Population => "population",
            Estimator::Standard => "standard",
            Estimator::BiasCorrected => "corrected",
            Estimator::Extrapolated => "extrapolated",
            Estimator::NormalApproxOracle => "normal_oracle",
            Estimator::TrueDensityOracle => "true_density",
        }
    }
}

/// Output units for score values. All internal arithmetic is in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Units {
    Nats,
    Bits,
    Bans,
}

impl Units {
    /// Converts a value in nats to these units.
    pub fn from_nats(&self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
            Units::Bans => nats / std::f64::consts::LN_10,
        }
    }
}

/// A score value in nats together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue {
    value: f64,
    estimator: Estimator,
    ensemble_size: Option<usize>,
    target_size: Option<usize>,
}

impl ScoreValue {
    pub(crate) fn new(
        value: f64,
        estimator: Estimator,
        ensemble_size: Option<usize>,
        target_size: Option<usize>,
    ) -> Self {
        debug_assert!(value.is_finite());
        Self { value, estimator, ensemble_size, target_size }
    }

    /// Score in nats.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Score converted to the requested units.
    pub fn in_units(&self, units: Units) -> f64 {
        units.from_nats(self.value)
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    /// Number of members the score was computed from, when ensemble-based.
    pub fn ensemble_size(&self) -> Option<usize> {
        self.ensemble_size
    }

    /// Extrapolation target size, when the estimator is `Extrapolated`.
    pub fn target_size(&self) -> Option<usize> {
        self.target_size
    }
}

/// Bias and variance approximations for the two ensemble estimators at a
/// standardized error ẑ = (μ̂ − x)/σ̂ and ensemble size m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVarianceReport {
    pub z_hat: f64,
    pub ensemble_size: usize,
    /// Approximate sampling variance of the standard estimator.
    pub var_standard: f64,
    /// Approximate sampling variance of the bias-corrected estimator.
    pub var_corrected: f64,
    /// Closed form of `var_standard − var_corrected`; nonnegative for m ≥ 4.
    pub var_difference: f64,
    /// Expected bias of the standard estimator, when parameters were supplied.
    pub expected_bias: Option<f64>,
}

fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ScoreError::NonFinite { context });
    }
    Ok(())
}

/// Population ignorance score of a Normal forecast: ½ ln 2π + ½ ln σ² +
/// ½ ((x − μ)/σ)², in nats.
///
/// ```
/// use ignorance::scores::{GaussianParams, ignorance_population};
/// let p = GaussianParams::new(0.0, 1.0).unwrap();
/// let s = ignorance_population(&p, 0.0).unwrap();
/// assert!((s.value() - 0.9189385332046727).abs() < 1e-12);
/// ```
pub fn ignorance_population(params: &GaussianParams, x: f64) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    let z = (x - params.mean) / params.variance.sqrt();
    let value = HALF_LN_TWO_PI + 0.5 * params.variance.ln() + 0.5 * z * z;
    Ok(ScoreValue::new(value, Estimator::Population, None, None))
}

/// Fits a Normal distribution to an ensemble: sample mean and sample
/// variance with divisor m − 1.
///
/// Rejects ensembles with fewer than two members and degenerate ensembles
/// whose members are all identical.
///
/// ```
/// use ignorance::scores::fit_gaussian;
/// let p = fit_gaussian(&[-1.0, 0.0, 1.0, 2.0]).unwrap();
/// assert_eq!(p.mean(), 0.5);
/// assert!((p.variance() - 5.0 / 3.0).abs() < 1e-15);
/// ```
pub fn fit_gaussian(members: &[f64]) -> Result<GaussianParams> {
    let m = members.len();
    if m < 2 {
        return Err(ScoreError::EnsembleTooSmall { what: "a Gaussian fit", required: 2, actual: m });
    }
    check_finite(members, "ensemble members")?;
    let mean = compensated_sum(members.iter().copied()) / m as f64;
    let ss = compensated_sum(members.iter().map(|&y| {
        let d = y - mean;
        d * d
    }));
    let variance = ss / (m - 1) as f64;
    if variance == 0.0 {
        return Err(ScoreError::DegenerateEnsemble { size: m, value: members[0] });
    }
    Ok(GaussianParams { mean, variance })
}

/// Standard (plug-in) ignorance estimator Î: the population formula with the
/// fitted ensemble mean and variance substituted for μ and σ².
///
/// Needs m ≥ 2. Its expectation exceeds the population score; see
/// [`expected_standard_bias`].
///
/// ```
/// use ignorance::scores::ignorance_standard;
/// let s = ignorance_standard(&[-1.0, 1.0], 0.0).unwrap();
/// assert!((s.value() - 1.2655121234846454).abs() < 1e-12);
/// ```
pub fn ignorance_standard(members: &[f64], x: f64) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    if members.len() < 2 {
        return Err(ScoreError::EnsembleTooSmall {
            what: "the standard estimator",
            required: 2,
            actual: members.len(),
        });
    }
    let fitted = fit_gaussian(members)?;
    let z = (x - fitted.mean) / fitted.variance.sqrt();
    let value = HALF_LN_TWO_PI + 0.5 * fitted.variance.ln() + 0.5 * z * z;
    Ok(ScoreValue::new(value, Estimator::Standard, Some(members.len()), None))
}

fn corrected_value(mean: f64, variance: f64, x: f64, m: usize) -> f64 {
    let mf = m as f64;
    let half = 0.5 * (mf - 1.0);
    let err = x - mean;
    HALF_LN_TWO_PI + 0.5 * variance.ln()
        + 0.5 * ((mf - 3.0) / (mf - 1.0)) * err * err / variance
        - 0.5 * (digamma(half) - half.ln() + 1.0 / mf)
}

/// Bias-corrected ignorance estimator. For ensembles drawn from a Normal
/// distribution its expectation equals the population score at every m ≥ 4,
/// which makes it fair: enlarging the ensemble does not change the score an
/// unbiased forecast system can expect.
///
/// Needs m ≥ 4; smaller ensembles are rejected rather than scored.
pub fn ignorance_bias_corrected(members: &[f64], x: f64) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    let m = members.len();
    if m < 4 {
        return Err(ScoreError::EnsembleTooSmall {
            what: "the bias-corrected estimator",
            required: 4,
            actual: m,
        });
    }
    let fitted = fit_gaussian(members)?;
    let value = corrected_value(fitted.mean, fitted.variance, x, m);
    Ok(ScoreValue::new(value, Estimator::BiasCorrected, Some(m), None))
}

/// Ignorance estimator extrapolated from an m-member ensemble to a
/// hypothetical target size M: its expectation over m-member ensembles
/// equals the expected standard score of an independent M-member ensemble
/// from the same distribution.
///
/// With M = m it reduces exactly to the standard estimator; as M → ∞ it
/// approaches the bias-corrected estimator. Both m and M must be ≥ 4.
pub fn ignorance_extrapolated(members: &[f64], x: f64, target_size: usize) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    let m = members.len();
    if m < 4 {
        return Err(ScoreError::EnsembleTooSmall {
            what: "the extrapolated estimator",
            required: 4,
            actual: m,
        });
    }
    if target_size < 4 {
        return Err(ScoreError::TargetTooSmall(target_size));
    }
    let fitted = fit_gaussian(members)?;
    let mf = m as f64;
    let bf = target_size as f64;
    let err = x - fitted.mean;
    let spread = ((bf - 1.0) / (bf - 3.0)) * ((mf - 3.0) / (mf - 1.0));
    let correction = 0.5
        * (digamma(0.5 * (bf - 1.0)) - digamma(0.5 * (mf - 1.0))
            + ((mf - 1.0) / (bf - 1.0)).ln()
            + (mf - bf) * (bf - 1.0) / (bf * mf * (bf - 3.0)));
    let value = HALF_LN_TWO_PI
        + 0.5 * fitted.variance.ln()
        + 0.5 * spread * err * err / fitted.variance
        + correction;
    Ok(ScoreValue::new(value, Estimator::Extrapolated, Some(m), Some(target_size)))
}

/// Oracle score of the standard Normal density: ½ ln 2π + x²/2.
pub fn ignorance_normal_oracle(x: f64) -> Result<ScoreValue> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    let value = HALF_LN_TWO_PI + 0.5 * x * x;
    Ok(ScoreValue::new(value, Estimator::NormalApproxOracle, None, None))
}

/// Oracle score −ln p(x) built from a log-density of the true generating
/// distribution.
pub fn ignorance_from_log_density(log_density: f64) -> Result<ScoreValue> {
    if !log_density.is_finite() {
        return Err(ScoreError::NonFinite { context: "log-density" });
    }
    Ok(ScoreValue::new(-log_density, Estimator::TrueDensityOracle, None, None))
}

/// Expected bias E[Î] − I(μ, σ²; x) of the standard estimator when the
/// ensemble is drawn from N(μ, σ²), as a function of the true parameters,
/// the outcome, and the ensemble size m ≥ 4:
///
/// ```text
/// ½ [Ψ((m−1)/2) − ln((m−1)/2)] + (x−μ)²/((m−3) σ²) + (m−1)/(2 m (m−3))
/// ```
pub fn expected_standard_bias(params: &GaussianParams, x: f64, m: usize) -> Result<f64> {
    if !x.is_finite() {
        return Err(ScoreError::NonFinite { context: "observation" });
    }
    if m < 4 {
        return Err(ScoreError::EnsembleTooSmall {
            what: "the standard-estimator bias formula",
            required: 4,
            actual: m,
        });
    }
    let mf = m as f64;
    let half = 0.5 * (mf - 1.0);
    let err = x - params.mean;
    Ok(0.5 * (digamma(half) - half.ln())
        + err * err / ((mf - 3.0) * params.variance)
        + (mf - 1.0) / (2.0 * mf * (mf - 3.0)))
}

/// Sampling-variance approximations for the standard and bias-corrected
/// estimators at standardized error ẑ and ensemble size m ≥ 4, without the
/// bias field.
pub fn score_variances(z_hat: f64, m: usize) -> Result<BiasVarianceReport> {
    variances_inner(z_hat, m, None)
}

/// Like [`score_variances`], additionally filling the expected bias of the
/// standard estimator from the supplied population parameters and outcome.
pub fn score_variances_with_bias(
    z_hat: f64,
    m: usize,
    params: &GaussianParams,
    x: f64,
) -> Result<BiasVarianceReport> {
    let bias = expected_standard_bias(params, x, m)?;
    variances_inner(z_hat, m, Some(bias))
}

fn variances_inner(z_hat: f64, m: usize, expected_bias: Option<f64>) -> Result<BiasVarianceReport> {
    if !z_hat.is_finite() {
        return Err(ScoreError::NonFinite { context: "standardized error" });
    }
    if m < 4 {
        return Err(ScoreError::EnsembleTooSmall {
            what: "the variance approximation",
            required: 4,
            actual: m,
        });
    }
    let mf = m as f64;
    let z2 = z_hat * z_hat;
    let f = (mf - 3.0) / (mf - 1.0);
    let var_standard = z2 / mf + (1.0 - z2) * (1.0 - z2) / (2.0 * (mf - 1.0));
    let var_corrected = f * f * z2 / mf + (1.0 - f * z2) * (1.0 - f * z2) / (2.0 * (mf - 1.0));
    let var_difference = 2.0 * z2 * z2 / ((mf - 1.0) * (mf - 1.0)) * (1.0 - 1.0 / (mf - 1.0))
        + 2.0 * z2 * (mf - 4.0) / (mf * (mf - 1.0) * (mf - 1.0));
    Ok(BiasVarianceReport {
        z_hat,
        ensemble_size: m,
        var_standard,
        var_corrected,
        var_difference,
        expected_bias,
    })
}

/// Arithmetic mean with Neumaier-compensated summation, so that aggregates
/// over long score series do not accumulate rounding drift.
pub fn mean_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn params(mean: f64, variance: f64) -> GaussianParams {
        GaussianParams::new(mean, variance).unwrap()
    }

    #[test]
    fn population_reference_values() {
        let cases = [
            (0.0, 1.0, 0.0, 0.9189385332046727),
            (0.0, 1.0, 1.0, 1.4189385332046727),
            (2.0, 4.0, 0.0, 2.1120857137646180),
        ];
        for (mu, var, x, want) in cases {
            let got = ignorance_population(&params(mu, var), x).unwrap().value();
            assert!((got - want).abs() < TOL, "pop({mu},{var};{x}) = {got}, want {want}");
        }
    }

    #[test]
    fn fit_gaussian_sample_moments() {
        let p = fit_gaussian(&[-1.0, 0.0, 1.0, 2.0]).unwrap();
        assert!((p.mean() - 0.5).abs() < 1e-15);
        assert!((p.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fit_gaussian_rejects_small_and_degenerate() {
        assert!(matches!(
            fit_gaussian(&[1.0]),
            Err(ScoreError::EnsembleTooSmall { required: 2, actual: 1, .. })
        ));
        assert_eq!(
            fit_gaussian(&[2.0, 2.0, 2.0]),
            Err(ScoreError::DegenerateEnsemble { size: 3, value: 2.0 })
        );
        assert!(matches!(
            fit_gaussian(&[1.0, f64::NAN]),
            Err(ScoreError::NonFinite { .. })
        ));
    }

    #[test]
    fn standard_reference_values() {
        let s = ignorance_standard(&[-1.0, 1.0], 0.0).unwrap();
        assert!((s.value() - 1.2655121234846454).abs() < TOL);
        assert_eq!(s.ensemble_size(), Some(2));

        let s = ignorance_standard(&[0.0, 2.0, 4.0], 2.0).unwrap();
        assert!((s.value() - 1.6120857137646180).abs() < TOL);
    }

    #[test]
    fn standard_allows_two_members_but_not_one() {
        assert!(ignorance_standard(&[0.0, 1.0], 0.5).is_ok());
        assert!(matches!(
            ignorance_standard(&[0.0], 0.5),
            Err(ScoreError::EnsembleTooSmall { required: 2, .. })
        ));
    }

    #[test]
    fn corrected_reference_value() {
        // Frozen from the digamma series oracle: members with mean 0 and
        // sample variance 5/6 at m = 4, scored at x = 0.
        let s = ignorance_bias_corrected(&[-1.0, -0.5, 0.5, 1.0], 0.0).unwrap();
        assert!(
            (s.value() - 0.8872653218724894).abs() < TOL,
            "got {}",
            s.value()
        );
        assert_eq!(s.estimator(), Estimator::BiasCorrected);
    }

    #[test]
    fn corrected_rejects_small_ensembles_with_minimum_in_message() {
        for m in 2..4usize {
            let members: Vec<f64> = (0..m).map(|i| i as f64).collect();
            let err = ignorance_bias_corrected(&members, 0.0).unwrap_err();
            match err {
                ScoreError::EnsembleTooSmall { required, actual, .. } => {
                    assert_eq!(required, 4);
                    assert_eq!(actual, m);
                }
                other => panic!("unexpected error {other:?}"),
            }
            assert!(err.to_string().contains('4'), "message should state the minimum");
        }
    }

    #[test]
    fn degenerate_is_an_error_not_infinity() {
        for result in [
            ignorance_standard(&[3.0; 5], 1.0),
            ignorance_bias_corrected(&[3.0; 5], 1.0),
            ignorance_extrapolated(&[3.0; 5], 1.0, 20),
        ] {
            assert!(matches!(result, Err(ScoreError::DegenerateEnsemble { .. })));
        }
    }

    #[test]
    fn extrapolation_at_same_size_is_standard() {
        let members = [0.3, -1.2, 0.7, 2.4, -0.5, 1.1, 0.2, -2.0];
        for x in [-1.5, 0.0, 0.4, 3.0] {
            let std = ignorance_standard(&members, x).unwrap().value();
            let ext = ignorance_extrapolated(&members, x, members.len()).unwrap().value();
            assert!((std - ext).abs() < 1e-12, "x = {x}: {std} vs {ext}");
        }
    }

    #[test]
    fn extrapolation_to_huge_target_is_corrected() {
        let members = [0.3, -1.2, 0.7, 2.4, -0.5, 1.1, 0.2, -2.0];
        for x in [-1.5, 0.0, 0.4, 3.0] {
            let corr = ignorance_bias_corrected(&members, x).unwrap().value();
            let ext = ignorance_extrapolated(&members, x, 100_000_000).unwrap().value();
            assert!((corr - ext).abs() < 1e-6, "x = {x}: {corr} vs {ext}");
        }
    }

    #[test]
    fn extrapolation_size_checks() {
        let members = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            ignorance_extrapolated(&members[..3], 0.0, 20),
            Err(ScoreError::EnsembleTooSmall { required: 4, .. })
        ));
        assert_eq!(
            ignorance_extrapolated(&members, 0.0, 3),
            Err(ScoreError::TargetTooSmall(3))
        );
        assert_eq!(
            ignorance_extrapolated(&members, 0.0, 4).unwrap().target_size(),
            Some(4)
        );
    }

    #[test]
    fn expected_bias_reference_value() {
        // m = 5 at x = μ: ½(Ψ(2) − ln 2) + (m−1)/(2m(m−3)), frozen from the
        // digamma series oracle.
        let b = expected_standard_bias(&params(0.0, 1.0), 0.0, 5).unwrap();
        assert!((b - 0.0648185772692609).abs() < TOL, "got {b}");

        // Outcome-averaged bias at m = 5 over x ~ N(0, 1): the quadratic
        // term averages to 1/(m−3).
        let avg = 0.5 * (crate::special::digamma(2.0) - 2f64.ln()) + 0.5 + 0.2;
        assert!((avg - 0.5648185772692609).abs() < TOL);
    }

    #[test]
    fn expected_bias_grows_with_outcome_error_and_shrinks_with_m() {
        let p = params(0.0, 1.0);
        let near = expected_standard_bias(&p, 0.0, 8).unwrap();
        let far = expected_standard_bias(&p, 2.0, 8).unwrap();
        assert!(far > near);
        let small = expected_standard_bias(&p, 1.0, 5).unwrap();
        let large = expected_standard_bias(&p, 1.0, 50).unwrap();
        assert!(small > large);
        assert!(large > 0.0);
    }

    #[test]
    fn variance_report_reference_values() {
        let r = score_variances(0.0, 10).unwrap();
        assert!((r.var_standard - 1.0 / 18.0).abs() < TOL);
        assert!((r.var_corrected - 1.0 / 18.0).abs() < TOL);
        assert!(r.var_difference.abs() < TOL);
        assert_eq!(r.expected_bias, None);

        let r = score_variances(1.0, 5).unwrap();
        assert!((r.var_standard - 0.2).abs() < TOL);
        assert!((r.var_corrected - 0.08125).abs() < TOL);
        assert!((r.var_difference - 0.11875).abs() < TOL);
    }

    #[test]
    fn variance_report_with_bias_field() {
        let p = params(0.0, 1.0);
        let r = score_variances_with_bias(0.3, 5, &p, 0.0).unwrap();
        assert!((r.expected_bias.unwrap() - 0.0648185772692609).abs() < TOL);
    }

    #[test]
    fn units_conversion() {
        assert!((Units::Bits.from_nats(1.0) - 1.4426950408889634).abs() < 1e-15);
        assert!((Units::Bans.from_nats(1.0) - 0.4342944819032518).abs() < 1e-15);
        assert_eq!(Units::Nats.from_nats(0.75), 0.75);
    }

    #[test]
    fn mean_score_is_compensated() {
        let vals = [1e16, 3.0, -1e16, 1.0];
        assert_eq!(mean_score(&vals), 1.0);
        assert!(mean_score(&[]).is_nan());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn ensemble() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0..10.0f64, 4..12)
        }

        fn sufficiently_spread(members: &[f64]) -> bool {
            fit_gaussian(members).map(|p| p.variance() > 1e-3).unwrap_or(false)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(400))]

            #[test]
            fn location_equivariance(members in ensemble(), x in -10.0..10.0f64, c in -100.0..100.0f64) {
                prop_assume!(sufficiently_spread(&members));
                let shifted: Vec<f64> = members.iter().map(|y| y + c).collect();
                for (a, b) in [
                    (ignorance_standard(&members, x), ignorance_standard(&shifted, x + c)),
                    (ignorance_bias_corrected(&members, x), ignorance_bias_corrected(&shifted, x + c)),
                    (ignorance_extrapolated(&members, x, 40), ignorance_extrapolated(&shifted, x + c, 40)),
                ] {
                    let (a, b) = (a.unwrap().value(), b.unwrap().value());
                    prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
                }
            }

            #[test]
            fn scale_adds_log_factor(members in ensemble(), x in -10.0..10.0f64, s in 0.1..10.0f64) {
                prop_assume!(sufficiently_spread(&members));
                let scaled: Vec<f64> = members.iter().map(|y| y * s).collect();
                for (a, b) in [
                    (ignorance_standard(&members, x), ignorance_standard(&scaled, x * s)),
                    (ignorance_bias_corrected(&members, x), ignorance_bias_corrected(&scaled, x * s)),
                ] {
                    let (a, b) = (a.unwrap().value(), b.unwrap().value());
                    prop_assert!((a + s.ln() - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} + ln {s} vs {b}");
                }
            }

            #[test]
            fn population_location_scale(mu in -5.0..5.0f64, var in 0.1..10.0f64,
                                         x in -5.0..5.0f64, c in -50.0..50.0f64, s in 0.1..10.0f64) {
                let base = ignorance_population(&GaussianParams::new(mu, var).unwrap(), x).unwrap().value();
                let shifted = ignorance_population(&GaussianParams::new(mu + c, var).unwrap(), x + c).unwrap().value();
                prop_assert!((base - shifted).abs() < 1e-9 * (1.0 + base.abs()));
                let scaled = ignorance_population(&GaussianParams::new(mu * s, var * s * s).unwrap(), x * s).unwrap().value();
                prop_assert!((base + s.ln() - scaled).abs() < 1e-9 * (1.0 + base.abs()));
            }

            #[test]
            fn variance_dominance(z in -20.0..20.0f64, m in 4..1000usize) {
                let r = score_variances(z, m).unwrap();
                prop_assert!(r.var_difference >= 0.0, "difference {} < 0", r.var_difference);
                let direct = r.var_standard - r.var_corrected;
                let scale = r.var_standard.abs().max(1.0);
                prop_assert!((direct - r.var_difference).abs() < 1e-11 * scale,
                    "closed form {} vs direct {direct}", r.var_difference);
            }

            #[test]
            fn estimates_are_finite(members in ensemble(), x in -10.0..10.0f64) {
                prop_assume!(sufficiently_spread(&members));
                for v in [
                    ignorance_standard(&members, x).unwrap().value(),
                    ignorance_bias_corrected(&members, x).unwrap().value(),
                    ignorance_extrapolated(&members, x, 51).unwrap().value(),
                ] {
                    prop_assert!(v.is_finite());
                }
            }
        }
    }

    #[test]
    fn variance_dominance_dense_scan() {
        // 10^5 deterministic (ẑ, m) pairs; the closed-form difference must be
        // nonnegative and match the direct subtraction.
        let mut state = 0x1234_5678_9abc_def0u64;
        for _ in 0..100_000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = (state >> 11) as f64 / (1u64 << 53) as f64;
            let z = 40.0 * u - 20.0;
            let m = 4 + (v * 996.0) as usize;
            let r = score_variances(z, m).unwrap();
            assert!(r.var_difference >= 0.0);
            let direct = r.var_standard - r.var_corrected;
            assert!((direct - r.var_difference).abs() < 1e-11 * r.var_standard.max(1.0));
        }
    }
}
