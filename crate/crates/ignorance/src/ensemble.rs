//! Ensemble verification data: paired time series of observations and
//! forecast ensembles, with the preprocessing used in verification studies.
//!
//! A [`VerificationSeries`] holds n time steps, one observation per step,
//! and m ensemble members per step. File format is plain CSV with header
//! `time,obs,member_1,...,member_m`; the writer emits 17 significant digits
//! so that write/load round-trips are lossless.
//!
//! The operations here mirror a standard verification protocol:
//! anomaly transformation, deliberate mean-bias injection, random member
//! subsampling to emulate smaller ensembles, and leave-one-out
//! climatological ensembles built from the observations themselves.

use crate::distributions::{compose_stream_id, stream_tag, uniform_index, RngStream};
use crate::scores::compensated_sum;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("CSV header must be time,obs,member_1,...,member_m; {message}")]
    Header { message: String },
    #[error("row {row}, column {column}: missing value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}, column {column}: cannot parse {cell:?} as a number")]
    Parse { row: usize, column: String, cell: String },
    #[error("row {row}, column {column}: value must be finite, got {value}")]
    NonFinite { row: usize, column: String, value: f64 },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("a verification series needs at least {required} {what}, got {actual}")]
    TooFew { what: &'static str, required: usize, actual: usize },
    #[error("cannot draw {requested} members from an ensemble of {available}")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error(
        "a leave-one-out climatological ensemble over {n} times supports at most \
         n - 1 = {max} members, got {requested}"
    )]
    ClimatologyTooLarge { requested: usize, n: usize, max: usize },
    #[error("observations are constant; the climatological standard deviation is zero")]
    ZeroClimatologySd,
    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// Paired observations and forecast ensembles over a common time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationSeries {
    times: Vec<String>,
    observations: Vec<f64>,
    members: Vec<Vec<f64>>,
    units: Option<String>,
}

impl VerificationSeries {
    /// Builds a series, enforcing n ≥ 2 times, m ≥ 2 members, a rectangular
    /// member table, and finite values throughout.
    pub fn new(times: Vec<String>, observations: Vec<f64>, members: Vec<Vec<f64>>) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(SeriesError::TooFew { what: "time steps", required: 2, actual: n });
        }
        if observations.len() != n || members.len() != n {
            return Err(SeriesError::InvalidParameter {
                message: format!(
                    "times ({n}), observations ({}) and member rows ({}) must have equal length",
                    observations.len(),
                    members.len()
                ),
            });
        }
        let m = members[0].len();
        if m < 2 {
            return Err(SeriesError::TooFew { what: "ensemble members", required: 2, actual: m });
        }
        for (i, row) in members.iter().enumerate() {
            if row.len() != m {
                return Err(SeriesError::Ragged { row: i + 2, expected: m, found: row.len() });
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(SeriesError::InvalidParameter {
                    message: format!("non-finite member value {bad} at time {}", times[i]),
                });
            }
        }
        if let Some((i, bad)) = observations.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SeriesError::InvalidParameter {
                message: format!("non-finite observation {bad} at time {}", times[i]),
            });
        }
        Ok(Self { times, observations, members, units: None })
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of ensemble members per time step.
    pub fn ensemble_size(&self) -> usize {
        self.members[0].len()
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    /// Free-text unit annotation; not stored in the CSV format.
    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn set_units(&mut self, units: Option<String>) {
        self.units = units;
    }

    fn with_members(&self, members: Vec<Vec<f64>>) -> Self {
        Self {
            times: self.times.clone(),
            observations: self.observations.clone(),
            members,
            units: self.units.clone(),
        }
    }

    /// Sample standard deviation of the observations (divisor n − 1).
    pub fn climatological_sd(&self) -> f64 {
        let n = self.len() as f64;
        let mean = compensated_sum(self.observations.iter().copied()) / n;
        let ss = compensated_sum(self.observations.iter().map(|&x| (x - mean) * (x - mean)));
        (ss / (n - 1.0)).sqrt()
    }

    /// Removes the grand mean of the observations from every observation and
    /// the pooled grand mean of all members from every member. The two means
    /// are computed separately, so a systematic forecast bias survives the
    /// transformation into the member anomalies.
    pub fn to_anomalies(&self) -> Self {
        let n = self.len() as f64;
        let m = self.ensemble_size() as f64;
        let obs_mean = compensated_sum(self.observations.iter().copied()) / n;
        let member_mean =
            compensated_sum(self.members.iter().flat_map(|row| row.iter().copied())) / (n * m);
        let mut out = self.clone();
        for x in &mut out.observations {
            *x -= obs_mean;
        }
        for row in &mut out.members {
            for y in row {
                *y -= member_mean;
            }
        }
        out
    }

    /// Adds `bias` climatological standard deviations of the observations to
    /// every ensemble member, leaving the observations untouched.
    pub fn inject_bias(&self, bias: f64) -> Result<Self> {
        if !bias.is_finite() {
            return Err(SeriesError::InvalidParameter {
                message: format!("bias must be finite, got {bias}"),
            });
        }
        let sd = self.climatological_sd();
        if sd == 0.0 {
            return Err(SeriesError::ZeroClimatologySd);
        }
        let shift = bias * sd;
        let members = self
            .members
            .iter()
            .map(|row| row.iter().map(|y| y + shift).collect())
            .collect();
        Ok(self.with_members(members))
    }
}

/// How to subsample ensemble members: subset size m̃, number of Monte Carlo
/// replicates, and the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubsampleSpec {
    pub subset_size: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SubsampleSpec {
    pub fn new(subset_size: usize, replicates: usize, seed: u64) -> Result<Self> {
        if subset_size == 0 {
            return Err(SeriesError::InvalidParameter {
                message: "subset size must be at least 1".to_string(),
            });
        }
        if replicates == 0 {
            return Err(SeriesError::InvalidParameter {
                message: "replicate count must be at least 1".to_string(),
            });
        }
        Ok(Self { subset_size, replicates, seed })
    }
}

/// Draws `count` distinct indices from `0..pool` by partial Fisher–Yates,
/// returned in ascending order.
fn draw_subset(rng: &mut rand_chacha::ChaCha8Rng, pool: usize, count: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..pool).collect();
    for i in 0..count {
        let j = i + uniform_index(rng, pool - i);
        indices.swap(i, j);
    }
    let mut chosen = indices[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Replaces each row's ensemble by `spec.subset_size` members drawn without
/// replacement, independently per row. Replicate `r` of the same spec always
/// produces the same draw, regardless of platform or thread count.
pub fn subsample_members(
    series: &VerificationSeries,
    spec: &SubsampleSpec,
    replicate: usize,
) -> Result<VerificationSeries> {
    let m = series.ensemble_size();
    if spec.subset_size > m {
        return Err(SeriesError::SubsetTooLarge { requested: spec.subset_size, available: m });
    }
    let members = series
        .members
        .iter()
        .enumerate()
        .map(|(row, full)| {
            let stream =
                RngStream::new(spec.seed, compose_stream_id(stream_tag::SUBSAMPLE, replicate, row));
            let mut rng = stream.rng();
            draw_subset(&mut rng, m, spec.subset_size)
                .into_iter()
                .map(|i| full[i])
                .collect()
        })
        .collect();
    Ok(series.with_members(members))
}

/// Builds a climatological reference forecast: at each time step the
/// ensemble consists of `size` observations drawn without replacement from
/// the other n − 1 time steps, so a forecast never contains its own verifying
/// observation.
pub fn climatological_ensemble(
    series: &VerificationSeries,
    size: usize,
    replicate: usize,
    seed: u64,
) -> Result<VerificationSeries> {
    let n = series.len();
    if size > n - 1 {
        return Err(SeriesError::ClimatologyTooLarge { requested: size, n, max: n - 1 });
    }
    if size < 2 {
        return Err(SeriesError::TooFew { what: "climatology members", required: 2, actual: size });
    }
    let members = (0..n)
        .map(|row| {
            let pool: Vec<f64> = (0..n)
                .filter(|&s| s != row)
                .map(|s| series.observations[s])
                .collect();
            let stream =
                RngStream::new(seed, compose_stream_id(stream_tag::CLIMATOLOGY, replicate, row));
            let mut rng = stream.rng();
            draw_subset(&mut rng, n - 1, size).into_iter().map(|i| pool[i]).collect()
        })
        .collect();
    Ok(series.with_members(members))
}

/// Generates a synthetic verification series with tunable skill and error
/// structure. Observations have unit climatological variance (before any
/// trend); members share a latent signal with the observations sized so that
/// the ensemble-mean/observation correlation is `correlation` in
/// expectation, carry a constant mean shift of `bias` climatological
/// standard deviations, and both sides follow a linear `trend` per step.
pub fn synthesize_series(
    n: usize,
    m: usize,
    correlation: f64,
    bias: f64,
    trend: f64,
    seed: u64,
) -> Result<VerificationSeries> {
    if n < 4 {
        return Err(SeriesError::TooFew { what: "time steps", required: 4, actual: n });
    }
    if m < 2 {
        return Err(SeriesError::TooFew { what: "ensemble members", required: 2, actual: m });
    }
    if !correlation.is_finite() || correlation.abs() >= 1.0 {
        return Err(SeriesError::InvalidParameter {
            message: format!("correlation must satisfy |rho| < 1, got {correlation}"),
        });
    }
    if !bias.is_finite() || !trend.is_finite() {
        return Err(SeriesError::InvalidParameter {
            message: format!("bias ({bias}) and trend ({trend}) must be finite"),
        });
    }

    // Shared-signal variance v solving ρ = v / √(v + (1 − v)/m), so that the
    // correlation between the m-member ensemble mean and the observation hits
    // the target despite the mean's residual member noise.
    let r2 = correlation * correlation;
    let a = r2 * (1.0 - 1.0 / m as f64);
    let v_signal = if correlation == 0.0 {
        0.0
    } else {
        0.5 * (a + (a * a + 4.0 * r2 / m as f64).sqrt())
    };
    let v_noise = 1.0 - v_signal;
    let sign = if correlation < 0.0 { -1.0 } else { 1.0 };

    let stream = RngStream::new(seed, compose_stream_id(stream_tag::SYNTHESIZE, 0, 0));
    let mut rng = stream.rng();
    let mut normal = || crate::distributions::Family::Normal { mean: 0.0, variance: 1.0 }.draw(&mut rng);

    let center = 0.5 * (n as f64 - 1.0);
    let mut times = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    let mut members = Vec::with_capacity(n);
    for t in 0..n {
        let trend_t = trend * (t as f64 - center);
        let signal = v_signal.sqrt() * normal();
        observations.push(trend_t + signal + v_noise.sqrt() * normal());
        members.push(
            (0..m)
                .map(|_| trend_t + sign * signal + bias + v_noise.sqrt() * normal())
                .collect(),
        );
        times.push((1981 + t).to_string());
    }
    VerificationSeries::new(times, observations, members)
}

/// Formats a float with 17 significant digits, enough for an exact f64
/// round-trip through text.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a series as CSV (`time,obs,member_1,...,member_m`).
pub fn write_series(series: &VerificationSeries, writer: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let m = series.ensemble_size();
    let mut header = vec!["time".to_string(), "obs".to_string()];
    header.extend((1..=m).map(|i| format!("member_{i}")));
    out.write_record(&header)?;
    for (i, time) in series.times.iter().enumerate() {
        let mut record = vec![time.clone(), format_float(series.observations[i])];
        record.extend(series.members[i].iter().map(|&v| format_float(v)));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    if trimmed.is_empty() {
        return Err(SeriesError::MissingValue { row, column: column.to_string() });
    }
    let value: f64 = trimmed.parse().map_err(|_| SeriesError::Parse {
        row,
        column: column.to_string(),
        cell: cell.to_string(),
    })?;
    if !value.is_finite() {
        return Err(SeriesError::NonFinite { row, column: column.to_string(), value });
    }
    Ok(value)
}

/// Loads a series from CSV, validating the header, rectangular shape, and
/// numeric content. Error messages name the offending row (1-based, the
/// header is row 1) and column.
pub fn load_series(reader: impl Read) -> Result<VerificationSeries> {
    let mut input = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = input.records();

    let header = match records.next() {
        Some(record) => record?,
        None => return Err(SeriesError::Header { message: "the file is empty".to_string() }),
    };
    if header.len() < 4 || header.get(0) != Some("time") || header.get(1) != Some("obs") {
        return Err(SeriesError::Header {
            message: format!(
                "got {:?} (need time, obs and at least two member columns)",
                header.iter().collect::<Vec<_>>()
            ),
        });
    }
    let m = header.len() - 2;
    let column_names: Vec<String> = (1..=m).map(|i| format!("member_{i}")).collect();
    for (i, name) in column_names.iter().enumerate() {
        if header.get(i + 2) != Some(name.as_str()) {
            return Err(SeriesError::Header {
                message: format!(
                    "column {} is {:?}, expected {name:?}",
                    i + 3,
                    header.get(i + 2).unwrap_or("")
                ),
            });
        }
    }

    let mut times = Vec::new();
    let mut observations = Vec::new();
    let mut members = Vec::new();
    for (idx, record) in records.enumerate() {
        let record = record?;
        let row = idx + 2;
        if record.len() != m + 2 {
            return Err(SeriesError::Ragged { row, expected: m + 2, found: record.len() });
        }
        let time = record.get(0).unwrap_or("");
        if time.is_empty() {
            return Err(SeriesError::MissingValue { row, column: "time".to_string() });
        }
        times.push(time.to_string());
        observations.push(parse_cell(record.get(1).unwrap_or(""), row, "obs")?);
        members.push(
            (0..m)
                .map(|i| parse_cell(record.get(i + 2).unwrap_or(""), row, &column_names[i]))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    VerificationSeries::new(times, observations, members)
}
