//! Windowed analysis transform and its inverse.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::config::AnalysisConfig;

/// One frame of the one-sided spectrum (`fft_len / 2 + 1` bins).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T = f64> {
    pub bins: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(n_bins: usize) -> Self {
        Self {
            bins: vec![Complex::new(T::zero(), T::zero()); n_bins],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn power(&self) -> Vec<T> {
        self.bins.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Sine window, `sin(pi (n + 1/2) / N)`. With 50 % overlap its square sums to
/// one, so using it for both analysis and synthesis gives perfect reconstruction.
pub fn sine_window<T: Real>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| T::lit((std::f64::consts::PI * (n as f64 + 0.5) / len as f64).sin()))
        .collect()
}

/// Cached FFT plans and window for a given [`AnalysisConfig`].
#[derive(Clone)]
pub struct Analyzer<T: Real = f64> {
    pub config: AnalysisConfig,
    pub window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Analyzer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer").field("config", &self.config).finish()
    }
}

impl<T: Real> Analyzer<T> {
    pub fn new(config: AnalysisConfig) -> Result<Self> {
        config.validate_bands()?;
        if config.fft_len < config.window_len {
            return Err(Error::config("fft_len shorter than the window"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: sine_window(config.window_len),
            forward: planner.plan_fft_forward(config.fft_len),
            inverse: planner.plan_fft_inverse(config.fft_len),
        })
    }

    /// Raw (unwindowed) samples of the window starting at `start`, zero outside the buffer.
    pub fn segment(&self, audio: &AudioBuffer<T>, start: isize) -> Vec<T> {
        let n = self.config.window_len;
        let mut out = vec![T::zero(); n];
        let len = audio.len() as isize;
        let lo = start.max(0);
        let hi = (start + n as isize).min(len);
        if lo < hi {
            out[(lo - start) as usize..(hi - start) as usize]
                .copy_from_slice(&audio.samples[lo as usize..hi as usize]);
        }
        out
    }

    /// Applies the window to `samples` and returns the one-sided spectrum.
    pub fn transform(&self, samples: &[T]) -> Spectrum<T> {
        debug_assert_eq!(samples.len(), self.config.window_len);
        let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); self.config.fft_len];
        for ((b, &x), &w) in buf.iter_mut().zip(samples).zip(&self.window) {
            b.re = x * w;
        }
        self.forward.process(&mut buf);
        buf.truncate(self.config.n_bins());
        Spectrum { bins: buf }
    }

    /// Transform of the window starting at an arbitrary sample offset.
    pub fn transform_at(&self, audio: &AudioBuffer<T>, start: isize) -> Spectrum<T> {
        self.transform(&self.segment(audio, start))
    }

    pub fn analyze_frame(&self, audio: &AudioBuffer<T>, frame: usize) -> Spectrum<T> {
        self.transform_at(audio, self.config.window_start(frame))
    }

    /// Inverse of the (unnormalised) forward transform; returns `fft_len` real samples.
    pub fn inverse(&self, spec: &Spectrum<T>) -> Vec<T> {
        let n = self.config.fft_len;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        buf[..spec.len()].copy_from_slice(&spec.bins);
        for k in 1..(n - spec.len() + 1) {
            buf[n - k] = spec.bins[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = T::one() / T::lit(n as f64);
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Single-frame convenience wrapper around [`Analyzer::analyze_frame`].
pub fn analyze_frame<T: Real>(
    audio: &AudioBuffer<T>,
    frame_index: i64,
    config: &AnalysisConfig,
) -> Result<Spectrum<T>> {
    if frame_index < 0 {
        return Err(Error::Range(format!("frame index {frame_index} is negative")));
    }
    Ok(Analyzer::new(*config)?.analyze_frame(audio, frame_index as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn sine_window_squares_sum_to_one_at_half_overlap() {
        let w: Vec<f64> = sine_window(960);
        for n in 0..480 {
            assert!((w[n] * w[n] + w[n + 480] * w[n + 480] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tone_peaks_at_its_bin() {
        let x: Vec<f64> = (0..48_000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let spec = analyze_frame(&AudioBuffer::at_48k(x), 10, &cfg()).unwrap();
        let peak = spec
            .power()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 20); // 1000 Hz / 50 Hz per bin
    }

    #[test]
    fn silence_gives_zero_spectrum() {
        let spec = analyze_frame(&AudioBuffer::<f64>::zeros(4800), 3, &cfg()).unwrap();
        assert!(spec.bins.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn centred_impulse_has_flat_magnitude() {
        let c = cfg();
        let frame = 5usize;
        let start = c.window_start(frame);
        let mut x = vec![0.0f64; 4800];
        x[(start + 480) as usize] = 1.0;
        let spec = analyze_frame(&AudioBuffer::at_48k(x), frame as i64, &c).unwrap();
        // closed form: the windowed impulse is w[480] * delta[n - 480]
        let w480 = (std::f64::consts::PI * 480.5 / 960.0).sin();
        for b in &spec.bins {
            assert!((b.norm() - w480).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_frame_is_a_range_error() {
        let err = analyze_frame(&AudioBuffer::<f64>::zeros(10), -1, &cfg()).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn inverse_undoes_forward() {
        let an = Analyzer::<f64>::new(cfg()).unwrap();
        let x: Vec<f64> = (0..960).map(|n| ((n * 31 % 17) as f64 - 8.0) / 8.0).collect();
        let y = an.inverse(&an.transform(&x));
        for n in 0..960 {
            assert!((y[n] - x[n] * an.window[n]).abs() < 1e-12);
        }
    }
}
