//! Frame-wise pitch tracker and per-band pitch coherence.

use crate::audio::AudioBuffer;
use crate::scalar::{dot, Real};

use super::config::AnalysisConfig;
use super::erb::ErbFilterbank;
use super::stft::{Analyzer, Spectrum};

/// Shortest lag searched (480 Hz at 48 kHz).
pub const MIN_LAG: usize = 100;
/// Longest lag searched (60 Hz at 48 kHz).
pub const MAX_LAG: usize = 800;
/// Peaks within this fraction of the global maximum are candidates; the
/// shortest one wins, which avoids locking onto period multiples.
const PEAK_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitchEstimate<T = f64> {
    /// lag in samples
    pub period: usize,
    pub corr: T,
}

/// Normalised correlation between the windowed frame and the same window
/// applied to the signal `lag` samples earlier, for every lag in
/// `MIN_LAG..=MAX_LAG`.
pub fn lag_correlations<T: Real>(
    audio: &AudioBuffer<T>,
    window: &[T],
    start: isize,
) -> Vec<T> {
    let n = window.len();
    let lo = start - MAX_LAG as isize;
    // one contiguous copy of history + frame
    let ctx: Vec<T> = (0..(n + MAX_LAG) as isize).map(|i| audio.at(lo + i)).collect();
    let frame = &ctx[MAX_LAG..];
    let wx: Vec<T> = frame.iter().zip(window).map(|(&x, &w)| x * w).collect();
    let w2x: Vec<T> = wx.iter().zip(window).map(|(&a, &w)| a * w).collect();
    let w2: Vec<T> = window.iter().map(|&w| w * w).collect();
    let e_now = dot(&wx, &wx);
    let sq: Vec<T> = ctx.iter().map(|&x| x * x).collect();
    (MIN_LAG..=MAX_LAG)
        .map(|lag| {
            let off = MAX_LAG - lag;
            let num = dot(&w2x, &ctx[off..off + n]);
            let e_lag = dot(&w2, &sq[off..off + n]);
            let den = (e_now * e_lag).sqrt();
            if den > T::zero() {
                num / den
            } else {
                T::zero()
            }
        })
        .collect()
}

fn pick_period<T: Real>(corrs: &[T]) -> PitchEstimate<T> {
    let max = corrs.iter().copied().fold(T::neg_infinity(), T::max);
    if !(max > T::zero()) {
        return PitchEstimate {
            period: MIN_LAG,
            corr: T::zero(),
        };
    }
    let floor = max * T::lit(PEAK_FRACTION);
    let n = corrs.len();
    let is_peak = |i: usize| {
        let left = i == 0 || corrs[i] > corrs[i - 1];
        let right = i + 1 == n || corrs[i] >= corrs[i + 1];
        left && right
    };
    let idx = (0..n)
        .find(|&i| corrs[i] >= floor && is_peak(i))
        .unwrap_or_else(|| corrs.iter().position(|&c| c == max).unwrap_or(0));
    PitchEstimate {
        period: MIN_LAG + idx,
        corr: corrs[idx].max(T::zero()).min(T::one()),
    }
}

pub fn estimate_pitch_with<T: Real>(
    analyzer: &Analyzer<T>,
    audio: &AudioBuffer<T>,
    frame: usize,
) -> PitchEstimate<T> {
    let start = analyzer.config.window_start(frame);
    pick_period(&lag_correlations(audio, &analyzer.window, start))
}

/// Pitch period (samples) and its normalised correlation for one frame.
pub fn estimate_pitch<T: Real>(
    audio: &AudioBuffer<T>,
    frame_index: usize,
    config: &AnalysisConfig,
) -> (usize, T) {
    let window = super::stft::sine_window::<T>(config.window_len);
    let est = pick_period(&lag_correlations(audio, &window, config.window_start(frame_index)));
    (est.period, est.corr)
}

/// `c_b = max(0, Re(sum_k w_b X conj(X_T)) / sqrt(sum_k w_b |X|^2 * sum_k w_b |X_T|^2))`,
/// with 0/0 taken as 0.
pub fn pitch_coherence<T: Real>(
    spec_now: &Spectrum<T>,
    spec_delayed: &Spectrum<T>,
    fb: &ErbFilterbank<T>,
) -> Vec<T> {
    (0..fb.n_bands())
        .map(|b| {
            let mut cross = T::zero();
            let mut e_now = T::zero();
            let mut e_del = T::zero();
            for k in fb.support(b) {
                let w = fb.weights[b][k];
                let x = spec_now.bins[k];
                let y = spec_delayed.bins[k];
                cross += w * (x.re * y.re + x.im * y.im);
                e_now += w * x.norm_sqr();
                e_del += w * y.norm_sqr();
            }
            let den = (e_now * e_del).sqrt();
            if den > T::zero() {
                (cross / den).max(T::zero()).min(T::one())
            } else {
                T::zero()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::erb::build_erb_filterbank;

    fn tone(f: f64, secs: f64) -> AudioBuffer {
        let n = (48_000.0 * secs) as usize;
        AudioBuffer::at_48k(
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 48_000.0).sin())
                .collect(),
        )
    }

    fn sawtooth(f: f64, secs: f64) -> AudioBuffer {
        let n = (48_000.0 * secs) as usize;
        AudioBuffer::at_48k(
            (0..n)
                .map(|i| {
                    let ph = f * i as f64 / 48_000.0;
                    2.0 * (ph - ph.floor()) - 1.0
                })
                .collect(),
        )
    }

    #[test]
    fn sawtooth_at_200_hz() {
        let cfg = AnalysisConfig::default();
        let x = sawtooth(200.0, 0.5);
        for frame in [10, 20, 30] {
            let (period, corr) = estimate_pitch(&x, frame, &cfg);
            assert!((period as i64 - 240).abs() <= 1, "period {period}");
            assert!(corr > 0.9);
        }
    }

    #[test]
    fn pure_tones_across_the_speech_range() {
        let cfg = AnalysisConfig::default();
        for f in [80.0, 97.0, 130.0, 173.3, 200.0, 251.0, 333.0, 400.0] {
            let x = tone(f, 0.4);
            let (period, _) = estimate_pitch(&x, 25, &cfg);
            let expect = 48_000.0 / f;
            assert!(
                (period as f64 - expect).abs() <= 1.0,
                "f = {f}: period {period}, expected {expect}"
            );
        }
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        use rand::Rng;
        let cfg = AnalysisConfig::default();
        let mut low = 0;
        for seed in 0..100u64 {
            let mut rng = crate::rng::rng(seed);
            let x = AudioBuffer::at_48k((0..4800).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
            let (_, corr) = estimate_pitch(&x, 6, &cfg);
            if corr < 0.4 {
                low += 1;
            }
        }
        assert!(low >= 95, "only {low}/100 noise frames below 0.4");
    }

    #[test]
    fn silence_is_defined() {
        let cfg = AnalysisConfig::default();
        let (period, corr) = estimate_pitch(&AudioBuffer::<f64>::zeros(4800), 5, &cfg);
        assert_eq!(period, MIN_LAG);
        assert_eq!(corr, 0.0);
    }

    #[test]
    fn coherence_edge_cases() {
        let cfg = AnalysisConfig::default();
        let fb: ErbFilterbank = build_erb_filterbank(&cfg).unwrap();
        let an = Analyzer::new(cfg).unwrap();
        let x = sawtooth(173.0, 0.2);
        let s = an.analyze_frame(&x, 10);
        let ones = pitch_coherence(&s, &s, &fb);
        for (b, c) in ones.iter().enumerate() {
            assert!((c - 1.0).abs() < 1e-12, "band {b}: {c}");
        }
        let zero = Spectrum::zeros(s.len());
        assert!(pitch_coherence(&s, &zero, &fb).iter().all(|&c| c == 0.0));
        let neg = Spectrum {
            bins: s.bins.iter().map(|c| -c).collect(),
        };
        assert!(pitch_coherence(&s, &neg, &fb).iter().all(|&c| c == 0.0));
    }
}
