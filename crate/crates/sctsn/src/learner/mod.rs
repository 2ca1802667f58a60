//! Ingress-side traffic learning.
//!
//! Edge switches record per-stream frame arrival times and derive a period
//! estimate from them: arrivals are quantized into a 0/1 bin sequence, a
//! periodogram proposes dominant periods, and each candidate is validated
//! against the autocorrelation (a candidate must sit on a correlation hill,
//! not in a valley). The first validated candidate, refined to the nearest
//! correlation peak, becomes the period estimate. A stream whose estimate
//! is valid with enough on-grid arrivals is classified time-triggered (TT);
//! a stream that fills its learning window without a validated period is
//! best effort (BE). Classified TT streams are watched for deviation from
//! the learned grid, which restarts learning.

mod spectrum;
mod trace;

pub use spectrum::{autocorrelation, periodogram_candidates, validate_period, PeriodCandidate};
pub use trace::load_trace;

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("insufficient data: need at least {need} arrivals, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("timestamps must be strictly increasing")]
    NonMonotonic,
    #[error("invalid bin width")]
    BadBinWidth,
    #[error("trace parse error at line {line}: {msg}")]
    Trace { line: usize, msg: String },
}

/// Tunables of the learning pipeline. Defaults suit microsecond-to-
/// millisecond frame periods.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    /// Lower bound on the adaptive bin width, seconds.
    pub bin_floor: f64,
    /// Bin width is the median interarrival divided by this.
    pub bin_divisor: f64,
    /// Cap on the bin count of one analysis window; wider windows coarsen.
    pub max_bins: usize,
    /// Arrivals needed before estimation is attempted.
    pub n_min: usize,
    /// Arrivals retained per stream (learning window).
    pub window: usize,
    /// Permutations behind the periodogram significance threshold.
    pub permutations: usize,
    /// Percentile of the permutation maxima used as the threshold.
    pub percentile: f64,
    /// Candidates taken from the periodogram per attempt.
    pub max_candidates: usize,
    /// Minimum fraction of on-grid arrivals for a TT verdict.
    pub confidence_threshold: f64,
    /// Fraction of off-grid recent arrivals that triggers re-learning.
    pub deviation_threshold: f64,
    /// Number of recent arrivals examined by the deviation check.
    pub deviation_window: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            bin_floor: 1e-6,
            bin_divisor: 4.0,
            max_bins: 2048,
            n_min: 16,
            window: 64,
            permutations: 100,
            percentile: 0.99,
            max_candidates: 5,
            confidence_threshold: 0.8,
            deviation_threshold: 0.3,
            deviation_window: 16,
        }
    }
}

/// Binary arrival sequence: bin `i` is set iff at least one frame arrived in
/// `[origin + i*dt, origin + (i+1)*dt)`.
#[derive(Debug, Clone)]
pub struct TimeSeq {
    bin_width: f64,
    origin: f64,
    words: Vec<u64>,
    len: usize,
    ones: usize,
}

impl TimeSeq {
    pub fn from_bins(bin_width: f64, origin: f64, bins: &[bool]) -> TimeSeq {
        let mut words = vec![0u64; bins.len().div_ceil(64)];
        let mut ones = 0;
        for (i, &b) in bins.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
                ones += 1;
            }
        }
        TimeSeq {
            bin_width,
            origin,
            words,
            len: bins.len(),
            ones,
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Quantizes arrival timestamps into a 0/1 sequence. The length is
/// `ceil((t_last - t_first) / dt) + 1`; multiple arrivals in one bin
/// collapse into a single mark.
pub fn build_time_sequence(timestamps: &[f64], bin_width: f64) -> Result<TimeSeq, LearnerError> {
    if timestamps.len() < 2 {
        return Err(LearnerError::InsufficientData {
            need: 2,
            have: timestamps.len(),
        });
    }
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(LearnerError::BadBinWidth);
    }
    let origin = timestamps[0];
    let span = timestamps[timestamps.len() - 1] - origin;
    if span <= 0.0 {
        return Err(LearnerError::NonMonotonic);
    }
    let ratio = span / bin_width;
    let len = (ratio - 1e-9).ceil().max(0.0) as usize + 1;
    let mut words = vec![0u64; len.div_ceil(64)];
    let mut ones = 0usize;
    let mut prev = f64::NEG_INFINITY;
    let mut last_bin = usize::MAX;
    for &t in timestamps {
        if t <= prev {
            return Err(LearnerError::NonMonotonic);
        }
        prev = t;
        let bin = (((t - origin) / bin_width) + 1e-9).floor() as usize;
        let bin = bin.min(len - 1);
        if bin != last_bin {
            words[bin / 64] |= 1 << (bin % 64);
            ones += 1;
            last_bin = bin;
        }
    }
    Ok(TimeSeq {
        bin_width,
        origin,
        words,
        len,
        ones,
    })
}

/// Output of one estimation attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodEstimate {
    /// Detected period in seconds, quantized to the bin width; 0 when not
    /// valid.
    pub period: f64,
    pub valid: bool,
    /// Maximum interarrival observed in the window, seconds.
    pub p_max: f64,
    /// Fraction of arrivals within the jitter tolerance of the periodic
    /// grid.
    pub confidence: f64,
    /// Bin width the estimate was computed at.
    pub bin_width: f64,
}

impl PeriodEstimate {
    fn invalid(p_max: f64, bin_width: f64) -> Self {
        PeriodEstimate {
            period: 0.0,
            valid: false,
            p_max,
            confidence: 0.0,
            bin_width,
        }
    }
}

/// Mean interarrival over a full trace. The naive baseline a period
/// estimator is measured against; kept for reporting and tests.
pub fn mean_interarrival(timestamps: &[f64]) -> Option<f64> {
    if timestamps.len() < 2 {
        return None;
    }
    let span = timestamps[timestamps.len() - 1] - timestamps[0];
    Some(span / (timestamps.len() - 1) as f64)
}

fn median_interarrival(timestamps: &[f64]) -> f64 {
    let mut ias: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    ias.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = ias.len();
    if n % 2 == 1 {
        ias[n / 2]
    } else {
        0.5 * (ias[n / 2 - 1] + ias[n / 2])
    }
}

/// Adaptive bin width: a quarter of the median interarrival, floored, and
/// coarsened if the window would exceed the bin cap.
pub fn adaptive_bin_width(timestamps: &[f64], cfg: &LearnerConfig) -> f64 {
    let median = median_interarrival(timestamps);
    let span = timestamps[timestamps.len() - 1] - timestamps[0];
    let mut dt = (median / cfg.bin_divisor).max(cfg.bin_floor);
    let cap = span / (cfg.max_bins as f64 - 1.0);
    if cap > dt {
        dt = cap;
    }
    dt
}

/// Jitter tolerance around the periodic grid. Capped at a quarter period:
/// beyond that the on-grid test stops discriminating (at half a period it
/// would accept every arrival, which lets noise validated at a two-bin lag
/// score full confidence).
fn jitter_tolerance(period: f64, bin_width: f64) -> f64 {
    bin_width.max(period / 10.0).min(period / 4.0)
}

/// Fraction of arrivals within tolerance of the periodic grid anchored at
/// the first arrival.
fn grid_confidence(timestamps: &[f64], period: f64, tol: f64) -> f64 {
    let t0 = timestamps[0];
    let mut on_grid = 0usize;
    for &t in timestamps {
        let r = (t - t0).rem_euclid(period);
        let d = r.min(period - r);
        if d <= tol + 1e-12 {
            on_grid += 1;
        }
    }
    on_grid as f64 / timestamps.len() as f64
}

/// Runs the full pipeline on an arrival window with an explicit bin width.
pub fn estimate_period_with_bin(
    timestamps: &[f64],
    bin_width: f64,
    cfg: &LearnerConfig,
) -> Result<PeriodEstimate, LearnerError> {
    if timestamps.len() < cfg.n_min {
        return Err(LearnerError::InsufficientData {
            need: cfg.n_min,
            have: timestamps.len(),
        });
    }
    let p_max = timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    let seq = build_time_sequence(timestamps, bin_width)?;
    let candidates =
        periodogram_candidates(&seq, cfg.max_candidates, cfg.permutations, cfg.percentile);
    if candidates.is_empty() {
        return Ok(PeriodEstimate::invalid(p_max, bin_width));
    }
    let acf = autocorrelation(&seq);
    for cand in candidates {
        if let Some(lag) = validate_period(cand.period_bins, &acf) {
            let period = lag as f64 * bin_width;
            let confidence =
                grid_confidence(timestamps, period, jitter_tolerance(period, bin_width));
            return Ok(PeriodEstimate {
                period,
                valid: true,
                p_max,
                confidence,
                bin_width,
            });
        }
    }
    Ok(PeriodEstimate::invalid(p_max, bin_width))
}

/// Runs the full pipeline with the adaptive bin-width policy.
pub fn estimate_period(
    timestamps: &[f64],
    cfg: &LearnerConfig,
) -> Result<PeriodEstimate, LearnerError> {
    if timestamps.len() < cfg.n_min {
        return Err(LearnerError::InsufficientData {
            need: cfg.n_min,
            have: timestamps.len(),
        });
    }
    estimate_period_with_bin(timestamps, adaptive_bin_width(timestamps, cfg), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamClass {
    Undecided,
    Tt,
    Be,
}

/// State transition reported by [`StreamObservation::record_arrival`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    ClassifiedTt(PeriodEstimate),
    ClassifiedBe,
    /// Deviation from the learned grid detected; learning restarted.
    Relearn,
}

/// Per-stream learning state owned by one edge-switch context.
#[derive(Debug, Clone)]
pub struct StreamObservation {
    pub id: u64,
    cfg: LearnerConfig,
    window: VecDeque<f64>,
    total: u64,
    class: StreamClass,
    estimate: Option<PeriodEstimate>,
    /// Arrivals remaining until the next estimation attempt.
    until_attempt: usize,
}

impl StreamObservation {
    pub fn new(id: u64, cfg: LearnerConfig) -> Self {
        let until_attempt = cfg.n_min;
        StreamObservation {
            id,
            cfg,
            window: VecDeque::new(),
            total: 0,
            class: StreamClass::Undecided,
            estimate: None,
            until_attempt,
        }
    }

    pub fn class(&self) -> StreamClass {
        self.class
    }

    pub fn estimate(&self) -> Option<&PeriodEstimate> {
        self.estimate.as_ref()
    }

    pub fn arrivals(&self) -> u64 {
        self.total
    }

    fn window_slice(&self) -> Vec<f64> {
        self.window.iter().copied().collect()
    }

    /// Records one frame arrival and advances the classification state
    /// machine. Estimation runs when the window reaches `n_min`, `2 n_min`
    /// and a full `window` of arrivals, then on every window refill; TT
    /// streams are checked for grid deviation on each arrival instead.
    pub fn record_arrival(&mut self, t: f64) -> Result<Option<Transition>, LearnerError> {
        if let Some(&last) = self.window.back() {
            if t <= last {
                return Err(LearnerError::NonMonotonic);
            }
        }
        if self.window.len() == self.cfg.window {
            self.window.pop_front();
        }
        self.window.push_back(t);
        self.total += 1;

        if self.class == StreamClass::Tt {
            if self.deviation_detected() {
                self.class = StreamClass::Undecided;
                self.estimate = None;
                self.window.clear();
                self.window.push_back(t);
                self.until_attempt = self.cfg.n_min - 1;
                return Ok(Some(Transition::Relearn));
            }
            return Ok(None);
        }

        self.until_attempt = self.until_attempt.saturating_sub(1);
        if self.until_attempt > 0 {
            return Ok(None);
        }

        let ts = self.window_slice();
        let est = estimate_period(&ts, &self.cfg)?;
        let filled = self.window.len();
        let window_full = filled >= self.cfg.window;
        self.until_attempt = if filled < 2 * self.cfg.n_min {
            2 * self.cfg.n_min - filled
        } else if !window_full {
            self.cfg.window - filled
        } else {
            self.cfg.window
        };

        if est.valid && est.confidence >= self.cfg.confidence_threshold {
            self.estimate = Some(est);
            let was = self.class;
            self.class = StreamClass::Tt;
            return Ok(if was == StreamClass::Tt {
                None
            } else {
                Some(Transition::ClassifiedTt(est))
            });
        }
        self.estimate = Some(est);
        if window_full && self.class == StreamClass::Undecided {
            self.class = StreamClass::Be;
            return Ok(Some(Transition::ClassifiedBe));
        }
        Ok(None)
    }

    /// Fraction of the most recent arrivals off the learned grid exceeds
    /// the deviation threshold.
    fn deviation_detected(&self) -> bool {
        let Some(est) = &self.estimate else {
            return false;
        };
        if !est.valid || est.period <= 0.0 {
            return false;
        }
        let n = self.cfg.deviation_window.min(self.window.len());
        if n < self.cfg.deviation_window {
            return false;
        }
        let recent: Vec<f64> = self.window.iter().rev().take(n).rev().copied().collect();
        let conf = grid_confidence(
            &recent,
            est.period,
            jitter_tolerance(est.period, est.bin_width),
        );
        1.0 - conf > self.cfg.deviation_threshold
    }
}

/// Classification per the decision rule: TT on a valid, confident estimate;
/// BE once the window fills without one; undecided before that.
pub fn classify_stream(obs: &StreamObservation) -> StreamClass {
    obs.class()
}

/// Deviation predicate on the current state, exposed for direct use.
pub fn detect_deviation(obs: &StreamObservation) -> bool {
    obs.deviation_detected()
}

#[cfg(test)]
mod tests;
