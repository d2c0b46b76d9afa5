//! Stationary and modulated noise clips.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::rng;

use super::signal::{brown_noise, pink_noise, rms, white_noise, Biquad, FS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Brown,
    /// pink noise with a slow amplitude modulation
    Modulated,
    /// mains-style harmonic hum over band-passed noise
    Hum,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::Brown,
        NoiseKind::Modulated,
        NoiseKind::Hum,
    ];
}

pub fn noise_id(index: usize) -> String {
    format!("noise{index:03}")
}

pub fn noise_kind(index: usize) -> NoiseKind {
    NoiseKind::ALL[index % NoiseKind::ALL.len()]
}

/// Noise clip `index` (kind cycles through [`NoiseKind::ALL`]), unit RMS.
pub fn noise_clip(index: usize, duration_s: f64, seed: u64) -> AudioBuffer {
    let n = (duration_s * FS).round() as usize;
    let mut r = rng::rng(rng::derive(rng::derive_str(seed, "noise"), index as u64));
    let mut x = match noise_kind(index) {
        NoiseKind::White => white_noise(&mut r, n),
        NoiseKind::Pink => pink_noise(&mut r, n),
        NoiseKind::Brown => brown_noise(&mut r, n),
        NoiseKind::Modulated => {
            let fm = r.random_range(0.5..4.0);
            let depth = r.random_range(0.3..0.9);
            pink_noise(&mut r, n)
                .into_iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + depth * (2.0 * std::f64::consts::PI * fm * i as f64 / FS).sin()))
                .collect()
        }
        NoiseKind::Hum => {
            let f0 = if r.random::<bool>() { 50.0 } else { 60.0 };
            let mut bed = white_noise(&mut r, n);
            Biquad::peaking(r.random_range(500.0..3000.0), 12.0, 0.7).process(&mut bed);
            let s = 0.3 / rms(&bed).max(1e-12);
            (0..n)
                .map(|i| {
                    let t = i as f64 / FS;
                    (1..=8)
                        .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 * t).sin() / k as f64)
                        .sum::<f64>()
                        + s * bed[i]
                })
                .collect()
        }
    };
    let g = 1.0 / rms(&x).max(1e-12);
    x.iter_mut().for_each(|v| *v *= g);
    AudioBuffer::at_48k(x)
}
