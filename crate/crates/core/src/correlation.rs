//! Classic and signed cross-correlation of binned spike trains, and a correlation-based depth classifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{span_rate, DepthState, Direction, Window};
use crate::spiking::{ConnectionKind, SpikeTrain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("horizon {horizon} ms does not cover spike at {latest} ms")]
    HorizonTooShort { horizon: f64, latest: f64 },
    #[error("bin widths differ ({0} vs {1})")]
    BinMismatch(f64, f64),
    #[error("bin width must be positive")]
    BadBinWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedTrain {
    pub counts: Vec<u32>,
    pub bin_width: f64,
    /// +1 for a train arriving over an excitatory connection, −1 for inhibitory.
    pub sign: i8,
}

impl BinnedTrain {
    pub fn new(counts: Vec<u32>, bin_width: f64) -> Self {
        BinnedTrain { counts, bin_width, sign: 1 }
    }

    pub fn with_kind(mut self, kind: ConnectionKind) -> Self {
        self.sign = kind.sign() as i8;
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

pub fn bin_spikes(train: &SpikeTrain, bin_width: f64, horizon: f64) -> Result<BinnedTrain, CorrelationError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(CorrelationError::BadBinWidth);
    }
    if let Some(&latest) = train.times.last() {
        if latest > horizon {
            return Err(CorrelationError::HorizonTooShort { horizon, latest });
        }
    }
    let bins = ((horizon / bin_width).ceil() as usize).max(1);
    let mut counts = vec![0u32; bins];
    for &t in &train.times {
        let i = ((t / bin_width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(BinnedTrain::new(counts, bin_width))
}

fn check_bins(x: &BinnedTrain, y: &BinnedTrain) -> Result<(), CorrelationError> {
    if x.bin_width != y.bin_width {
        return Err(CorrelationError::BinMismatch(x.bin_width, y.bin_width));
    }
    Ok(())
}

/// Σ_k x[k]·y[k+w] over the overlapping support; sequences are zero outside their length.
pub fn xcorr_counts(x: &[u32], y: &[u32], w: i64) -> i64 {
    let (x_start, y_start) = if w >= 0 { (0usize, w as usize) } else { ((-w) as usize, 0usize) };
    if x_start >= x.len() || y_start >= y.len() {
        return 0;
    }
    x[x_start..].iter().zip(&y[y_start..]).map(|(&a, &b)| i64::from(a) * i64::from(b)).sum()
}

pub fn xcorr(x: &BinnedTrain, y: &BinnedTrain, w: i64) -> Result<i64, CorrelationError> {
    check_bins(x, y)?;
    Ok(xcorr_counts(&x.counts, &y.counts, w))
}

/// Cross-correlation carrying the product of the two connection signs.
pub fn signed_xcorr(x: &BinnedTrain, y: &BinnedTrain, w: i64) -> Result<i64, CorrelationError> {
    check_bins(x, y)?;
    Ok(i64::from(x.sign) * i64::from(y.sign) * xcorr_counts(&x.counts, &y.counts, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    /// Set when either train has zero energy; all values are then zero.
    pub degenerate: bool,
}

impl CorrelationProfile {
    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn normalized_profile(
    x: &BinnedTrain,
    y: &BinnedTrain,
    lags: std::ops::RangeInclusive<i64>,
) -> Result<CorrelationProfile, CorrelationError> {
    check_bins(x, y)?;
    let lag_list: Vec<i64> = lags.collect();
    let energy = (xcorr_counts(&x.counts, &x.counts, 0) as f64) * (xcorr_counts(&y.counts, &y.counts, 0) as f64);
    if energy == 0.0 {
        return Ok(CorrelationProfile {
            values: vec![0.0; lag_list.len()],
            lags: lag_list,
            normalization: Normalization::Normalized,
            degenerate: true,
        });
    }
    let norm = energy.sqrt();
    let values = lag_list.iter().map(|&w| xcorr_counts(&x.counts, &y.counts, w) as f64 / norm).collect();
    Ok(CorrelationProfile { lags: lag_list, values, normalization: Normalization::Normalized, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub bin_width: f64,
    /// Lags evaluated in bins, symmetric around zero.
    pub max_lag: i64,
    pub theta_m: f64,
    /// Relative rate difference required to declare N or F.
    pub theta_rate: f64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams { bin_width: 10.0, max_lag: 10, theta_m: 0.6, theta_rate: 0.025 }
    }
}

fn clip(train: &SpikeTrain, window: Window) -> SpikeTrain {
    SpikeTrain::new(
        train.times.iter().filter(|&&t| t >= window.start && t < window.end).map(|&t| t - window.start).collect(),
    )
}

/// Depth from the two trains feeding one DDM position, restricted to `window`.
///
/// High correlation means both sides are equally driven (M). Otherwise the side visited later
/// in the motion decides: firing faster there means the range is closing (N).
pub fn classify_by_correlation(
    left: &SpikeTrain,
    right: &SpikeTrain,
    direction: Direction,
    window: Window,
    params: &CorrelationParams,
) -> Result<DepthState, CorrelationError> {
    let l = clip(left, window);
    let r = clip(right, window);
    let horizon = window.end - window.start;
    let x = bin_spikes(&l, params.bin_width, horizon)?;
    let y = bin_spikes(&r, params.bin_width, horizon)?;
    let profile = normalized_profile(&x, &y, -params.max_lag..=params.max_lag)?;
    if profile.degenerate || profile.peak() >= params.theta_m {
        return Ok(DepthState::M);
    }
    let (earlier, later) = match direction {
        Direction::LeftToRight => (&l, &r),
        Direction::RightToLeft => (&r, &l),
        Direction::Undetermined => return Ok(DepthState::M),
    };
    let whole = Window::new(0.0, horizon);
    let rate_earlier = span_rate(&earlier.times, whole);
    let rate_later = span_rate(&later.times, whole);
    if (rate_later - rate_earlier).abs() <= params.theta_rate * rate_later.max(rate_earlier) {
        return Ok(DepthState::M);
    }
    Ok(if rate_later > rate_earlier { DepthState::N } else { DepthState::F })
}
