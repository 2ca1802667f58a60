//! Spectral primitives for period extraction: a periodogram with a
//! permutation-derived significance threshold, a raw autocorrelation over
//! bit-packed bins, and the hill test that validates periodogram candidates
//! against the autocorrelation.

use std::cell::RefCell;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::TimeSeq;

/// Fixed shuffle seed: estimates must be a pure function of the input
/// timestamps.
const PERMUTATION_SEED: u64 = 0x5c75_eed0_0001;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodCandidate {
    /// Candidate period in bins, `N / f`; generally fractional.
    pub period_bins: f64,
    pub power: f64,
}

fn spectrum_max(buf: &mut [Complex<f64>], fft: &std::sync::Arc<dyn rustfft::Fft<f64>>) -> f64 {
    fft.process(buf);
    let half = buf.len() / 2;
    buf[1..=half]
        .iter()
        .map(|c| c.norm_sqr())
        .fold(0.0, f64::max)
}

/// Candidate periods whose spectral power exceeds the significance
/// threshold: the 99th percentile of the maximum power over random
/// permutations of the bin sequence. The DC bin is excluded and the list is
/// ordered by descending power (ascending frequency on ties).
pub fn periodogram_candidates(
    seq: &TimeSeq,
    max_candidates: usize,
    permutations: usize,
    percentile: f64,
) -> Vec<PeriodCandidate> {
    let n = seq.len();
    if n < 8 {
        return Vec::new();
    }
    let ones = seq.ones();
    if ones == 0 || ones == n {
        return Vec::new(); // only DC energy either way
    }
    let mean = ones as f64 / n as f64;
    let centered: Vec<f64> = (0..n)
        .map(|i| if seq.get(i) { 1.0 - mean } else { -mean })
        .collect();

    PLANNER.with(|planner| {
        let fft = planner.borrow_mut().plan_fft_forward(n);
        let mut buf: Vec<Complex<f64>> = centered.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        let half = n / 2;
        let powers: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr()).collect();

        // Permutation threshold. Repeated in-place shuffles of the same
        // buffer still sample uniform permutations.
        let mut rng = ChaCha8Rng::seed_from_u64(PERMUTATION_SEED);
        let mut shuffled = centered;
        let mut maxima = Vec::with_capacity(permutations);
        let mut scratch: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
        for _ in 0..permutations {
            shuffled.shuffle(&mut rng);
            for (dst, &v) in scratch.iter_mut().zip(&shuffled) {
                *dst = Complex::new(v, 0.0);
            }
            maxima.push(spectrum_max(&mut scratch, &fft));
        }
        maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = ((percentile * permutations as f64).ceil() as usize).clamp(1, permutations);
        let threshold = maxima[rank - 1];

        let mut candidates: Vec<(usize, f64)> = (1..=half)
            .filter(|&f| powers[f] > threshold)
            .map(|f| (f, powers[f]))
            .collect();
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        candidates.truncate(max_candidates);
        candidates
            .into_iter()
            .map(|(f, power)| PeriodCandidate {
                period_bins: n as f64 / f as f64,
                power,
            })
            .collect()
    })
}

/// Raw autocorrelation of the 0/1 bins over lags `1..=N/2`, normalized by
/// the lag-zero value (the number of ones). Index `i` holds lag `i + 1`.
pub fn autocorrelation(seq: &TimeSeq) -> Vec<f64> {
    let n = seq.len();
    if n < 4 {
        return Vec::new();
    }
    let ones = seq.ones();
    let half = n / 2;
    if ones == 0 {
        return vec![0.0; half];
    }
    let words = seq.words();
    let norm = ones as f64;
    let mut acf = Vec::with_capacity(half);
    for lag in 1..=half {
        let word_shift = lag / 64;
        let bit_shift = lag % 64;
        let mut count = 0u32;
        for w in 0..words.len() {
            let hi = words.get(w + word_shift).copied().unwrap_or(0);
            let shifted = if bit_shift == 0 {
                hi
            } else {
                let carry = words.get(w + word_shift + 1).copied().unwrap_or(0);
                (hi >> bit_shift) | (carry << (64 - bit_shift))
            };
            count += (words[w] & shifted).count_ones();
        }
        acf.push(count as f64 / norm);
    }
    acf
}

/// Hill test: a candidate is accepted iff the autocorrelation restricted to
/// `[l - l/4, l + l/4]` has an interior local maximum whose value exceeds
/// the window mean; the refined period is that argmax lag.
pub fn validate_period(candidate_bins: f64, acf: &[f64]) -> Option<usize> {
    let lags = acf.len();
    if lags < 3 {
        return None;
    }
    let at = |lag: usize| acf[lag - 1];
    let l0 = (candidate_bins.round() as usize).clamp(1, lags);
    let radius = ((l0 as f64 / 4.0).round() as usize).max(1);
    let lo = l0.saturating_sub(radius).max(1);
    let hi = (l0 + radius).min(lags);
    if hi - lo < 2 {
        return None; // no interior lag to host a hill
    }
    let mean = (lo..=hi).map(at).sum::<f64>() / (hi - lo + 1) as f64;
    // Interior argmax, smallest lag on ties.
    let mut best: Option<usize> = None;
    for lag in lo + 1..hi {
        if best.is_none_or(|b| at(lag) > at(b)) {
            best = Some(lag);
        }
    }
    let peak = best?;
    let is_local_max = at(peak) >= at(peak - 1) && at(peak) >= at(peak + 1);
    (is_local_max && at(peak) > mean).then_some(peak)
}
