//! Toy speech: a source-filter "voice" per synthetic speaker.
//!
//! Each speaker owns a pitch range, a vocal-tract scale applied to a small
//! vowel table, a spectral tilt, a breathiness level and one extra fixed
//! resonance. Utterances are syllables (one vowel each, gliding pitch)
//! separated by pauses.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::signal::{white_noise, Biquad, FS};

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
];
/// RMS of an utterance over its voiced samples.
const ACTIVE_RMS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub id: String,
    pub f0_lo: f64,
    pub f0_hi: f64,
    pub formant_scale: f64,
    /// one-pole low-pass coefficient on the glottal source
    pub tilt: f64,
    pub breathiness: f64,
    pub extra_formant: (f64, f64),
    pub syllable_s: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyCorpus {
    pub seed: u64,
    pub speakers: Vec<SpeakerProfile>,
}

fn spread(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut pos: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    pos.shuffle(rng);
    pos
}

impl ToyCorpus {
    /// `n_speakers` voices spread over pitch and vocal-tract scale; the two
    /// spreads are shuffled independently so neighbours in one differ in the other.
    pub fn new(n_speakers: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "toy-corpus");
        let pitch = spread(&mut r, n_speakers);
        let scale = spread(&mut r, n_speakers);
        let speakers = (0..n_speakers)
            .map(|i| {
                let center = 85.0 * (290.0f64 / 85.0).powf(pitch[i]);
                let formant_scale = 0.8 + 0.45 * scale[i];
                SpeakerProfile {
                    id: speaker_id(i),
                    f0_lo: center * 0.92,
                    f0_hi: center * 1.09,
                    formant_scale,
                    tilt: r.random_range(0.3..0.85),
                    breathiness: r.random_range(0.01..0.12),
                    extra_formant: (r.random_range(3200.0..5500.0) * formant_scale, r.random_range(150.0..400.0)),
                    syllable_s: {
                        let lo = r.random_range(0.10..0.18);
                        (lo, lo + r.random_range(0.12..0.25))
                    },
                }
            })
            .collect();
        Self { seed, speakers }
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    /// Deterministic utterance `index` of `speaker`.
    pub fn utterance(&self, speaker: usize, index: usize, duration_s: f64) -> Result<AudioBuffer> {
        let p = self
            .speakers
            .get(speaker)
            .ok_or_else(|| Error::contract(format!("speaker {speaker} not in corpus")))?;
        let seed = rng::derive(rng::derive(rng::derive_str(self.seed, "utterance"), speaker as u64), index as u64);
        Ok(AudioBuffer::at_48k(synthesize_voice(p, duration_s, &mut rng::rng(seed))))
    }

    pub fn utterance_by_id(&self, id: &str, duration_s: f64) -> Result<AudioBuffer> {
        let (s, i) = parse_clip_id(id)?;
        self.utterance(s, i, duration_s)
    }
}

pub fn speaker_id(speaker: usize) -> String {
    format!("spk{speaker:02}")
}

pub fn clip_id(speaker: usize, index: usize) -> String {
    format!("spk{speaker:02}_utt{index:04}")
}

pub fn parse_clip_id(id: &str) -> Result<(usize, usize)> {
    let bad = || Error::contract(format!("malformed clip id {id:?}"));
    let (s, u) = id.split_once("_utt").ok_or_else(bad)?;
    let s = s.strip_prefix("spk").ok_or_else(bad)?;
    Ok((s.parse().map_err(|_| bad())?, u.parse().map_err(|_| bad())?))
}

fn poly_blep(t: f64, dt: f64) -> f64 {
    if t < dt {
        let t = t / dt;
        2.0 * t - t * t - 1.0
    } else if t > 1.0 - dt {
        let t = (t - 1.0) / dt;
        t * t + 2.0 * t + 1.0
    } else {
        0.0
    }
}

fn syllable(p: &SpeakerProfile, len: usize, rng: &mut Rng) -> Vec<f64> {
    let f_start = rng.random_range(p.f0_lo..p.f0_hi);
    let f_end = rng.random_range(p.f0_lo..p.f0_hi);
    let vibrato = rng.random_range(4.0..7.0);
    let vowel = VOWELS[rng.random_range(0..VOWELS.len())];
    let amp = rng.random_range(0.6..1.0);
    let noise = white_noise(rng, len);
    let mut phase = rng.random::<f64>();
    let mut lp = 0.0;
    let mut x: Vec<f64> = (0..len)
        .map(|n| {
            let u = n as f64 / len as f64;
            let f0 = (f_start + (f_end - f_start) * u)
                * (1.0 + 0.01 * (2.0 * std::f64::consts::PI * vibrato * n as f64 / FS).sin());
            let dt = f0 / FS;
            let saw = 2.0 * phase - 1.0 - poly_blep(phase, dt);
            phase += dt;
            if phase >= 1.0 {
                phase -= 1.0;
            }
            lp = (1.0 - p.tilt) * saw + p.tilt * lp;
            lp + p.breathiness * noise[n]
        })
        .collect();
    for (k, &f) in vowel.iter().enumerate() {
        Biquad::resonator(f * p.formant_scale, 60.0 + 40.0 * k as f64).process(&mut x);
    }
    Biquad::resonator(p.extra_formant.0, p.extra_formant.1).process(&mut x);
    let ramp = (0.02 * FS) as usize;
    for (n, v) in x.iter_mut().enumerate() {
        let edge = n.min(len - 1 - n);
        let env = if edge < ramp {
            0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        *v *= amp * env;
    }
    x
}

/// Syllables and pauses until `duration_s` is filled, scaled so the voiced
/// part has a fixed RMS.
pub fn synthesize_voice(p: &SpeakerProfile, duration_s: f64, rng: &mut Rng) -> Vec<f64> {
    let total = (duration_s * FS).round() as usize;
    let mut out = vec![0.0; total];
    let mut pos = (rng.random_range(0.0..0.15) * FS) as usize;
    let mut voiced_energy = 0.0;
    let mut voiced_len = 0usize;
    while pos < total {
        let len = (rng.random_range(p.syllable_s.0..p.syllable_s.1) * FS) as usize;
        let s = syllable(p, len, rng);
        let end = (pos + len).min(total);
        for (o, v) in out[pos..end].iter_mut().zip(&s) {
            *o = *v;
            voiced_energy += v * v;
        }
        voiced_len += end - pos;
        let pause = if rng.random::<f64>() < 0.15 {
            rng.random_range(0.35..0.8)
        } else {
            rng.random_range(0.04..0.2)
        };
        pos = end + (pause * FS) as usize;
    }
    if voiced_len > 0 && voiced_energy > 0.0 {
        let g = ACTIVE_RMS / (voiced_energy / voiced_len as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utterances_are_deterministic_and_distinct() {
        let c = ToyCorpus::new(8, 1);
        let a = c.utterance(3, 0, 2.0).unwrap();
        assert_eq!(a.len(), 96_000);
        assert_eq!(a, c.utterance(3, 0, 2.0).unwrap());
        assert_ne!(a, c.utterance(3, 1, 2.0).unwrap());
        assert!(a.samples.iter().all(|v| v.is_finite() && v.abs() < 1.0));
        assert!(a.rms() > 0.01);
        assert!(c.utterance(8, 0, 1.0).is_err());
    }

    #[test]
    fn clip_ids_round_trip() {
        assert_eq!(parse_clip_id(&clip_id(7, 123)).unwrap(), (7, 123));
        assert!(parse_clip_id("noise001").is_err());
    }

    #[test]
    fn speakers_cover_distinct_pitch_ranges() {
        let c = ToyCorpus::new(8, 5);
        let mut centers: Vec<f64> = c.speakers.iter().map(|s| (s.f0_lo * s.f0_hi).sqrt()).collect();
        centers.sort_by(f64::total_cmp);
        assert!(centers.windows(2).all(|w| w[1] / w[0] > 1.1));
    }
}
