//! Resynthesis: band gains, pitch comb filter and overlap-add.
//!
//! Frame `t` covers samples `[(t-1) hop, (t+1) hop)`. The comb filter works on
//! the time-domain mixture, reaching `period` samples behind and ahead of the
//! window; the forward tap never needs more than the look-ahead already
//! buffered for the network. Output lags the input by exactly
//! `lookahead_frames * hop` samples.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::dsp::{AnalysisConfig, Analyzer, ErbFilterbank, Spectrum, N_BANDS};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maximum blend toward the comb-filtered signal at strength 1.
pub const MAX_COMB_BLEND: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct EnhancerOutput<T = f64> {
    pub gains: [T; N_BANDS],
    pub strengths: [T; N_BANDS],
    pub vad: T,
}

impl<T: Real> EnhancerOutput<T> {
    pub fn uniform(gain: T, strength: T, vad: T) -> Self {
        Self {
            gains: [gain; N_BANDS],
            strengths: [strength; N_BANDS],
            vad,
        }
    }

    /// Unit gains, no comb filtering.
    pub fn passthrough() -> Self {
        Self::uniform(T::one(), T::zero(), T::one())
    }

    pub fn is_valid(&self) -> bool {
        let ok = |v: T| v.is_finite() && v >= T::zero() && v <= T::one();
        self.gains.iter().all(|&g| ok(g)) && self.strengths.iter().all(|&s| ok(s)) && ok(self.vad)
    }
}

/// Per-bin gain `G[k] = sum_b w_b[k] g_b`.
pub fn interpolate_gains<T: Real>(gains: &[T], fb: &ErbFilterbank<T>) -> Vec<T> {
    fb.interpolate(gains)
}

fn blend_weights<T: Real>(strengths: &[T], fb: &ErbFilterbank<T>) -> Vec<T> {
    let scaled: Vec<T> = strengths.iter().map(|&s| s * T::lit(MAX_COMB_BLEND)).collect();
    fb.interpolate(&scaled)
}

/// `Z[k] = (1 - A[k]) X[k] + A[k] P[k]` with `A` the interpolated blend.
pub fn blend_spectra<T: Real>(
    x: &Spectrum<T>,
    p: &Spectrum<T>,
    strengths: &[T],
    fb: &ErbFilterbank<T>,
) -> Spectrum<T> {
    let a = blend_weights(strengths, fb);
    Spectrum {
        bins: x
            .bins
            .iter()
            .zip(&p.bins)
            .zip(&a)
            .map(|((&xk, &pk), &ak)| xk * (T::one() - ak) + pk * ak)
            .collect(),
    }
}

/// Symmetric two-tap comb `p[n] = (x[n - T] + x[n + T]) / 2` evaluated over a
/// window starting at `start` of `signal` (zero outside).
pub fn comb_taps<T: Real>(signal: &[T], start: isize, len: usize, period: usize) -> Vec<T> {
    let at = |i: isize| {
        if i < 0 {
            T::zero()
        } else {
            signal.get(i as usize).copied().unwrap_or_else(T::zero)
        }
    };
    let half = T::lit(0.5);
    let p = period as isize;
    (0..len as isize)
        .map(|n| half * (at(start + n - p) + at(start + n + p)))
        .collect()
}

/// Comb-filters one time-domain frame.
///
/// `history` holds the samples immediately preceding the frame and
/// `lookahead` those immediately following it; missing samples are treated as
/// zero. Each band is blended toward `(x[n-T] + x[n+T]) / 2` with weight
/// `0.5 * strength`, the bands being combined through the filterbank weights.
/// `fb` must have `frame.len() / 2 + 1` bins.
pub fn comb_filter<T: Real>(
    frame: &[T],
    history: &[T],
    lookahead: &[T],
    period: usize,
    strengths: &[T],
    fb: &ErbFilterbank<T>,
) -> Result<Vec<T>> {
    let n = frame.len();
    if fb.n_bins() != n / 2 + 1 {
        return Err(Error::contract(format!(
            "filterbank has {} bins, frame of {n} needs {}",
            fb.n_bins(),
            n / 2 + 1
        )));
    }
    if strengths.iter().all(|&s| s == T::zero()) {
        return Ok(frame.to_vec());
    }
    let mut ctx = Vec::with_capacity(history.len() + n + lookahead.len());
    ctx.extend_from_slice(history);
    ctx.extend_from_slice(frame);
    ctx.extend_from_slice(lookahead);
    let p = comb_taps(&ctx, history.len() as isize, n, period);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum_of = |x: &[T]| {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        fwd.process(&mut buf);
        buf
    };
    let xs = spectrum_of(frame);
    let ps = spectrum_of(&p);
    let a = blend_weights(strengths, fb);
    let mut z: Vec<Complex<T>> = (0..n)
        .map(|k| {
            // mirror the one-sided blend onto negative frequencies
            let ak = a[if k <= n / 2 { k } else { n - k }];
            xs[k] * (T::one() - ak) + ps[k] * ak
        })
        .collect();
    inv.process(&mut z);
    let scale = T::one() / T::lit(n as f64);
    Ok(z.iter().map(|c| c.re * scale).collect())
}

/// Overlap-add state for one output stream.
#[derive(Clone, Debug)]
pub struct Synthesizer<T: Real = f64> {
    analyzer: Analyzer<T>,
    filterbank: ErbFilterbank<T>,
    tail: Vec<T>,
}

impl<T: Real> Synthesizer<T> {
    pub fn new(analyzer: Analyzer<T>, filterbank: ErbFilterbank<T>) -> Self {
        let hop = analyzer.config.frame_hop;
        Self {
            analyzer,
            filterbank,
            tail: vec![T::zero(); hop],
        }
    }

    pub fn reset(&mut self) {
        self.tail.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Enhances one frame and returns the `hop` samples it completes
    /// (the first half of its window). `comb` is the spectrum of the comb
    /// taps over the same window; `None` disables pitch filtering.
    pub fn push(
        &mut self,
        mixture: &Spectrum<T>,
        comb: Option<&Spectrum<T>>,
        output: &EnhancerOutput<T>,
    ) -> Vec<T> {
        let hop = self.analyzer.config.frame_hop;
        let filtered;
        let src = match comb {
            Some(p) if output.strengths.iter().any(|&s| s > T::zero()) => {
                filtered = blend_spectra(mixture, p, &output.strengths, &self.filterbank);
                &filtered
            }
            _ => mixture,
        };
        let g = interpolate_gains(&output.gains, &self.filterbank);
        let y = Spectrum {
            bins: src.bins.iter().zip(&g).map(|(&x, &gk)| x * gk).collect(),
        };
        let time = self.analyzer.inverse(&y);
        let w = &self.analyzer.window;
        let mut out = Vec::with_capacity(hop);
        for n in 0..hop {
            out.push(self.tail[n] + time[n] * w[n]);
        }
        for n in 0..hop {
            self.tail[n] = time[hop + n] * w[hop + n];
        }
        out
    }
}

/// Overlap-add reconstruction of the signal underlying a spectrum sequence.
pub fn reconstruct<T: Real>(analyzer: &Analyzer<T>, spectra: &[Spectrum<T>]) -> Vec<T> {
    let cfg = analyzer.config;
    let hop = cfg.frame_hop;
    let mut out = vec![T::zero(); spectra.len() * hop + hop];
    for (t, s) in spectra.iter().enumerate() {
        let time = analyzer.inverse(s);
        let start = cfg.window_start(t);
        for n in 0..cfg.window_len {
            let i = start + n as isize;
            if i >= 0 && (i as usize) < out.len() {
                out[i as usize] += time[n] * analyzer.window[n];
            }
        }
    }
    out
}

/// Offline resynthesis of a whole sequence. Output has `n_frames * hop`
/// samples and lags the input by `lookahead_frames * hop`.
pub fn synthesize<T: Real>(
    mixture_spectra: &[Spectrum<T>],
    outputs: &[EnhancerOutput<T>],
    pitch_track: &[usize],
    config: &AnalysisConfig,
) -> Result<AudioBuffer<T>> {
    let analyzer = Analyzer::new(*config)?;
    let fb = ErbFilterbank::new(config)?;
    synthesize_with(&analyzer, &fb, mixture_spectra, outputs, pitch_track)
}

pub fn synthesize_with<T: Real>(
    analyzer: &Analyzer<T>,
    fb: &ErbFilterbank<T>,
    mixture_spectra: &[Spectrum<T>],
    outputs: &[EnhancerOutput<T>],
    pitch_track: &[usize],
) -> Result<AudioBuffer<T>> {
    let n = mixture_spectra.len();
    if outputs.len() != n || pitch_track.len() != n {
        return Err(Error::contract(format!(
            "synthesize: {n} spectra, {} outputs, {} pitch lags",
            outputs.len(),
            pitch_track.len()
        )));
    }
    let cfg = analyzer.config;
    let hop = cfg.frame_hop;
    let needs_comb = outputs
        .iter()
        .any(|o| o.strengths.iter().any(|&s| s > T::zero()));
    let mixture = if needs_comb {
        reconstruct(analyzer, mixture_spectra)
    } else {
        Vec::new()
    };
    let delay = cfg.lookahead_frames * hop;
    let mut samples = vec![T::zero(); n * hop];
    let mut synth = Synthesizer::new(analyzer.clone(), fb.clone());
    for t in 0..n {
        let comb = if needs_comb && outputs[t].strengths.iter().any(|&s| s > T::zero()) {
            let taps = comb_taps(&mixture, cfg.window_start(t), cfg.window_len, pitch_track[t]);
            Some(analyzer.transform(&taps))
        } else {
            None
        };
        let block = synth.push(&mixture_spectra[t], comb.as_ref(), &outputs[t]);
        // this block is the region starting at window_start(t)
        let region = cfg.window_start(t);
        for (i, v) in block.into_iter().enumerate() {
            let dst = region + (i + delay) as isize;
            if dst >= 0 && (dst as usize) < samples.len() {
                samples[dst as usize] = v;
            }
        }
    }
    AudioBuffer::new(samples, cfg.sample_rate)
}
