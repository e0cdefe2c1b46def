//! Special functions used by the score estimators: the digamma function
//! Ψ(x) = d/dx ln Γ(x) and the log-gamma function ln Γ(x).
//!
//! Both are evaluated by upward recurrence into an asymptotic-series region.
//! For digamma the recurrence Ψ(x) = Ψ(x + 1) − 1/x is applied until the
//! argument reaches `DIGAMMA_SERIES_MIN`, where the Stirling-type expansion
//!
//! ```text
//! Ψ(x) ≈ ln x − 1/(2x) − Σ_{n≥1} B_{2n} / (2n · x^{2n})
//! ```
//!
//! is accurate to well below 1e-12. Log-gamma uses ln Γ(x) = ln Γ(x + k) −
//! ln Π (x + i) with the De Moivre series at the shifted argument.

/// Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Natural log of √(2π), the constant term of the Normal ignorance score.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

const DIGAMMA_SERIES_MIN: f64 = 6.0;
const LOG_GAMMA_SERIES_MIN: f64 = 8.0;

/// Digamma function Ψ(x) for x > 0.
///
/// Absolute error stays below 1e-10 across (0, 1e6]; near the pole at zero
/// the dominant −1/x term is exact to rounding. Returns NaN for x ≤ 0 or
/// non-finite input.
///
/// ```
/// use ignorance::special::digamma;
/// // Ψ(1) = −γ
/// assert!((digamma(1.0) + 0.5772156649015329).abs() < 1e-12);
/// ```
pub fn digamma(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < DIGAMMA_SERIES_MIN {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // B2/2 = 1/12, B4/4 = -1/120, B6/6 = 1/252, B8/8 = -1/240,
    // B10/10 = 1/132, B12/12 = -691/32760.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + x.ln() - 0.5 * inv - series
}

/// Natural log of the gamma function, ln Γ(x), for x > 0.
///
/// Accurate to about 1e-13 absolute for moderate arguments (x ≲ 100) and to
/// a few units in the last place elsewhere. Returns NaN for x ≤ 0 or
/// non-finite input.
///
/// ```
/// use ignorance::special::log_gamma;
/// assert!((log_gamma(6.0) - 120f64.ln()).abs() < 1e-12);
/// assert!((log_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
/// ```
pub fn log_gamma(x: f64) -> f64 {
    if !x.is_finite() || x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut shift = 1.0;
    while x < LOG_GAMMA_SERIES_MIN {
        shift *= x;
        x += 1.0;
    }
    // B2/(1·2) = 1/12, B4/(3·4) = -1/360, B6/(5·6) = 1/1260,
    // B8/(7·8) = -1/1680, B10/(9·10) = 1/1188, B12/(11·12) = -691/360360.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2
                        * (1.0 / 1260.0
                            - inv2
                                * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * (691.0 / 360360.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series - shift.ln()
}
