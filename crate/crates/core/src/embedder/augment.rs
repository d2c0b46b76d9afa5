//! Enrollment augmentation: reverberation plus white/pink noise.

use rand::Rng as _;

use crate::audio::AudioBuffer;
use crate::datagen::signal::{convolve_truncated, pink_noise, rms, synthetic_rir, white_noise};
use crate::rng;

pub const RT60_RANGE: (f64, f64) = (0.1, 0.6);
pub const SNR_RANGE_DB: (f64, f64) = (0.0, 20.0);

#[derive(Clone, Debug)]
pub struct EnrollmentVariant {
    pub audio: AudioBuffer,
    /// reverberated clean enrollment, before noise
    pub reverberant: Vec<f64>,
    pub rt60: f64,
    pub snr_db: f64,
}

pub fn augment_enrollment_detailed(
    enrollment: &AudioBuffer,
    n_variants: usize,
    seed: u64,
) -> Vec<EnrollmentVariant> {
    (0..n_variants)
        .map(|i| {
            let mut rng = rng::rng(rng::derive(rng::derive_str(seed, "enroll-aug"), i as u64));
            let rt60 = rng.random_range(RT60_RANGE.0..RT60_RANGE.1);
            let snr_db = rng.random_range(SNR_RANGE_DB.0..SNR_RANGE_DB.1);
            let rir = synthetic_rir(&mut rng, rt60);
            let reverberant = convolve_truncated(&enrollment.samples, &rir);
            let n = reverberant.len();
            let white = white_noise(&mut rng, n);
            let pink = pink_noise(&mut rng, n);
            let mix = rng.random::<f64>();
            let (rw, rp) = (rms(&white).max(1e-12), rms(&pink).max(1e-12));
            let noise: Vec<f64> = white
                .iter()
                .zip(&pink)
                .map(|(w, p)| mix * w / rw + (1.0 - mix) * p / rp)
                .collect();
            let e_sig: f64 = reverberant.iter().map(|v| v * v).sum();
            let e_noise: f64 = noise.iter().map(|v| v * v).sum();
            let g = if e_noise > 0.0 {
                (e_sig / (e_noise * 10f64.powf(snr_db / 10.0))).sqrt()
            } else {
                0.0
            };
            let samples = reverberant.iter().zip(&noise).map(|(s, v)| s + g * v).collect();
            EnrollmentVariant {
                audio: AudioBuffer::at_48k(samples),
                reverberant,
                rt60,
                snr_db,
            }
        })
        .collect()
}

/// `n_variants` noisy reverberant copies of the enrollment, each the same
/// length as the input. Deterministic in `seed`.
pub fn augment_enrollment(enrollment: &AudioBuffer, n_variants: usize, seed: u64) -> Vec<AudioBuffer> {
    augment_enrollment_detailed(enrollment, n_variants, seed)
        .into_iter()
        .map(|v| v.audio)
        .collect()
}
