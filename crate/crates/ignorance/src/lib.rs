//! Ensemble forecast verification with the ignorance (logarithmic) score
//! under a Normal approximation.
//!
//! A forecast issued as a finite ensemble is scored by fitting a Normal
//! distribution to the members and taking the negative log predictive
//! density at the observed value (in nats; lower is better). The naive
//! plug-in version of that score is biased against small ensembles — by
//! roughly half a nat at five members — so this crate centers on estimators
//! that remove the penalty:
//!
//! * [`scores`] — population, standard (plug-in), bias-corrected, and
//!   ensemble-size-extrapolated estimators, with closed-form bias and
//!   variance approximations.
//! * [`special`] — the digamma and log-gamma implementations the
//!   corrections are built from.
//! * [`distributions`] — seeded, reproducible samplers and densities:
//!   Normal plus three standardized non-Normal families for stress tests.
//! * [`ensemble`] — verification series: CSV I/O, anomalies, member
//!   subsampling, climatological reference ensembles, bias injection, and
//!   synthetic data.
//! * [`experiments`] — a deterministic Monte Carlo harness whose output is
//!   byte-identical at any worker-thread count.
//! * [`cli`] — the `ign` binary: `score`, `experiment`, `synth`.
//!
//! ```
//! use ignorance::scores::{ignorance_bias_corrected, ignorance_standard};
//!
//! let members = [14.1, 15.3, 14.8, 15.9, 14.4];
//! let observed = 16.0;
//! let standard = ignorance_standard(&members, observed)?;
//! let corrected = ignorance_bias_corrected(&members, observed)?;
//! // The correction removes the small-ensemble penalty.
//! assert!(corrected.value() < standard.value());
//! # Ok::<(), ignorance::scores::ScoreError>(())
//! ```
//!
//! The guide in `book/` walks through the concepts; its code listings are
//! compiled and run as part of `cargo test`.

pub mod cli;
pub mod distributions;
pub mod ensemble;
pub mod experiments;
pub mod scores;
pub mod special;

// The book's code listings run as doc-tests, one module per chapter so a
// failure names its source file.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/bias-correction.md")]
    mod bias_correction {}
    #[doc = include_str!("../../../book/src/extrapolation.md")]
    mod extrapolation {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
