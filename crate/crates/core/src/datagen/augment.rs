//! Training-data augmentation: reverberation, low-pass, EQ and level.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::rng;

use super::signal::{butterworth4_lowpass, convolve_truncated, log_uniform, synthetic_rir, Biquad};

pub const AUGMENT_PROBABILITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reverb {
    pub rt60: f64,
    pub rir_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakEq {
    pub center_hz: f64,
    pub gain_db: f64,
}

/// One draw of the four independent augmentations; `None` means skipped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub reverb: Option<Reverb>,
    pub lowpass_hz: Option<f64>,
    pub eq: Option<PeakEq>,
    pub level_db: Option<f64>,
}

impl AugmentParams {
    pub fn draw(seed: u64) -> Self {
        let mut r = rng::stream(seed, "augment");
        let coin = |r: &mut rng::Rng| r.random::<f64>() < AUGMENT_PROBABILITY;
        let reverb = coin(&mut r).then(|| Reverb {
            rt60: r.random_range(0.1..0.6),
            rir_seed: r.random(),
        });
        let lowpass_hz = coin(&mut r).then(|| r.random_range(4000.0..24000.0));
        let eq = coin(&mut r).then(|| PeakEq {
            center_hz: log_uniform(&mut r, 100.0, 12000.0),
            gain_db: r.random_range(-6.0..6.0),
        });
        let level_db = coin(&mut r).then(|| r.random_range(-10.0..0.0));
        Self {
            reverb,
            lowpass_hz,
            eq,
            level_db,
        }
    }

    /// Level gain as a linear factor (1 when skipped).
    pub fn level_gain(&self) -> f64 {
        self.level_db.map_or(1.0, |db| 10f64.powf(db / 20.0))
    }
}

/// Reverb, low-pass and EQ, in that order. Level is left to the caller so it
/// can be applied jointly to a mixture and its references.
pub fn apply_filters(x: &[f64], p: &AugmentParams) -> Vec<f64> {
    let mut y = match p.reverb {
        Some(r) => convolve_truncated(x, &synthetic_rir(&mut rng::rng(r.rir_seed), r.rt60)),
        None => x.to_vec(),
    };
    if let Some(fc) = p.lowpass_hz {
        // the 4th-order design is only meaningful below Nyquist
        if fc < 23_500.0 {
            for s in butterworth4_lowpass(fc) {
                s.process(&mut y);
            }
        }
    }
    if let Some(eq) = p.eq {
        Biquad::peaking(eq.center_hz, eq.gain_db, 1.0).process(&mut y);
    }
    y
}

pub fn apply_params(buf: &AudioBuffer, p: &AugmentParams) -> AudioBuffer {
    let g = p.level_gain();
    let mut y = apply_filters(&buf.samples, p);
    y.iter_mut().for_each(|v| *v *= g);
    AudioBuffer::at_48k(y)
}

/// Each augmentation independently with probability 0.5; deterministic in `seed`.
pub fn apply_augmentations(buf: &AudioBuffer, seed: u64) -> AudioBuffer {
    apply_params(buf, &AugmentParams::draw(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::signal::{rms, white_noise};
    use crate::dsp::{AnalysisConfig, Analyzer};

    fn noise(n: usize) -> AudioBuffer {
        AudioBuffer::at_48k(white_noise(&mut rng::rng(3), n))
    }

    #[test]
    fn deterministic_in_seed() {
        let x = noise(24_000);
        for s in 0..10 {
            assert_eq!(apply_augmentations(&x, s), apply_augmentations(&x, s));
        }
    }

    #[test]
    fn each_augmentation_drawn_about_half_the_time() {
        let n = 4000;
        let mut counts = [0usize; 4];
        for s in 0..n {
            let p = AugmentParams::draw(s as u64);
            counts[0] += p.reverb.is_some() as usize;
            counts[1] += p.lowpass_hz.is_some() as usize;
            counts[2] += p.eq.is_some() as usize;
            counts[3] += p.level_db.is_some() as usize;
            if let Some(db) = p.level_db {
                assert!((-10.0..0.0).contains(&db));
            }
            if let Some(r) = p.reverb {
                assert!((0.1..0.6).contains(&r.rt60));
            }
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.5).abs() < 0.03);
        }
    }

    #[test]
    fn level_only_scales_rms() {
        let x = noise(48_000);
        let p = AugmentParams {
            level_db: Some(-6.0),
            ..Default::default()
        };
        let y = apply_params(&x, &p);
        assert!((rms(&y.samples) - rms(&x.samples) * 10f64.powf(-6.0 / 20.0)).abs() < 1e-6);
    }

    #[test]
    fn lowpass_at_4k_attenuates_above_6k() {
        let x = noise(96_000);
        let p = AugmentParams {
            lowpass_hz: Some(4000.0),
            ..Default::default()
        };
        let y = apply_params(&x, &p);
        let cfg = AnalysisConfig::default();
        let an = Analyzer::<f64>::new(cfg).unwrap();
        // bins are 50 Hz apart
        let high = |a: &AudioBuffer| -> f64 {
            (10..190)
                .map(|t| an.analyze_frame(a, t).power()[120..].iter().sum::<f64>())
                .sum()
        };
        let atten = 10.0 * (high(&x) / high(&y)).log10();
        assert!(atten >= 24.0, "attenuation {atten} dB");
    }
}
