//! Mixture construction with exact SNR/SIR on active speech.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::augment::{apply_filters, AugmentParams};
use super::signal::FS;

pub const SNR_RANGE_DB: (f64, f64) = (-5.0, 35.0);
pub const SIR_RANGE_DB: (f64, f64) = (-2.0, 10.0);
pub const MIN_TURN_S: f64 = 3.0;
pub const CROSSFADE_S: f64 = 0.5;
/// frames quieter than this relative to the loudest frame are inactive
pub const ACTIVE_RANGE_DB: f64 = 35.0;
const ACTIVE_FRAME: usize = 480;
const MAX_PEAK: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentType {
    Overlapping,
    Alternating,
    Single,
}

impl SegmentType {
    pub fn is_multi_speaker(self) -> bool {
        self != SegmentType::Single
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub segment_type: SegmentType,
    pub snr_db: f64,
    pub sir_db: Option<f64>,
    pub duration_s: f64,
    pub seed: u64,
}

impl MixtureSpec {
    /// Uniform SNR and (for two-speaker types) SIR over the training ranges.
    pub fn sample(segment_type: SegmentType, duration_s: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed, "mixture-spec");
        let snr_db = r.random_range(SNR_RANGE_DB.0..=SNR_RANGE_DB.1);
        let sir_db = segment_type
            .is_multi_speaker()
            .then(|| r.random_range(SIR_RANGE_DB.0..=SIR_RANGE_DB.1));
        Self {
            segment_type,
            snr_db,
            sir_db,
            duration_s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::config("mixture duration must be positive"));
        }
        if !(SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&self.snr_db) {
            return Err(Error::config(format!("snr {} dB outside {SNR_RANGE_DB:?}", self.snr_db)));
        }
        match (self.segment_type.is_multi_speaker(), self.sir_db) {
            (true, Some(s)) if (SIR_RANGE_DB.0..=SIR_RANGE_DB.1).contains(&s) => {}
            (true, _) => return Err(Error::config("two-speaker segment needs an SIR in range")),
            (false, Some(_)) => return Err(Error::config("single-speaker segment takes no SIR")),
            (false, None) => {}
        }
        if self.segment_type == SegmentType::Alternating && self.duration_s < 2.0 * MIN_TURN_S {
            return Err(Error::config(format!(
                "alternating segments need at least {} s",
                2.0 * MIN_TURN_S
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureTriple {
    pub mixture: AudioBuffer,
    pub personalized_ref: AudioBuffer,
    pub non_personalized_ref: AudioBuffer,
    /// scaled interference speech (zeros for single-speaker segments)
    pub interference: Vec<f64>,
    pub noise: Vec<f64>,
    pub augment: AugmentParams,
}

/// `n` segment types in the 2:1:1 overlapping/alternating/single proportion,
/// shuffled by `seed`.
pub fn segment_plan(n: usize, seed: u64) -> Vec<SegmentType> {
    let n_alt = n / 4;
    let n_single = n / 4;
    let n_overlap = n - n_alt - n_single;
    let mut plan: Vec<SegmentType> = std::iter::repeat_n(SegmentType::Overlapping, n_overlap)
        .chain(std::iter::repeat_n(SegmentType::Alternating, n_alt))
        .chain(std::iter::repeat_n(SegmentType::Single, n_single))
        .collect();
    plan.shuffle(&mut rng::stream(seed, "segment-plan"));
    plan
}

/// Concatenates randomly ordered clips until `len` samples are filled,
/// joining consecutive clips with a 0.5 s linear crossfade.
pub fn fill_stream(clips: &[AudioBuffer], len: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if clips.is_empty() || len == 0 {
        return out;
    }
    let xf = (CROSSFADE_S * FS) as usize;
    let mut order: Vec<usize> = (0..clips.len()).collect();
    order.shuffle(rng);
    let mut pos = 0usize;
    let mut k = 0usize;
    let mut first = true;
    while pos < len {
        let clip = &clips[order[k % order.len()]].samples;
        k += 1;
        if clip.is_empty() {
            if k > order.len() && clips.iter().all(|c| c.is_empty()) {
                break;
            }
            continue;
        }
        let fade = if first { 0 } else { xf.min(clip.len()).min(pos) };
        let start = pos - fade;
        for (i, &v) in clip.iter().enumerate() {
            let j = start + i;
            if j >= len {
                break;
            }
            if i < fade {
                let w = (i as f64 + 0.5) / fade as f64;
                out[j] = out[j] * (1.0 - w) + v * w;
            } else {
                out[j] = v;
            }
        }
        pos = start + clip.len();
        first = false;
    }
    out
}

/// Per-frame activity: frame energy within `ACTIVE_RANGE_DB` of the loudest frame.
pub fn active_frames(x: &[f64]) -> Vec<bool> {
    let energies: Vec<f64> = x
        .chunks(ACTIVE_FRAME)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let peak = energies.iter().copied().fold(0.0, f64::max);
    let thr = peak * 10f64.powf(-ACTIVE_RANGE_DB / 10.0);
    energies.iter().map(|&e| peak > 0.0 && e > thr).collect()
}

/// Mean power of `x` over the frames flagged in `mask`.
pub fn masked_power(x: &[f64], mask: &[bool]) -> f64 {
    let mut e = 0.0;
    let mut n = 0usize;
    for (c, &m) in x.chunks(ACTIVE_FRAME).zip(mask) {
        if m {
            e += c.iter().map(|v| v * v).sum::<f64>();
            n += c.len();
        }
    }
    if n == 0 {
        0.0
    } else {
        e / n as f64
    }
}

/// `10 log10(P_speech / P_noise)` over the frames where the speech is active.
pub fn measure_snr(speech: &[f64], noise: &[f64]) -> f64 {
    let mask = active_frames(speech);
    10.0 * (masked_power(speech, &mask) / masked_power(noise, &mask)).log10()
}

/// Ratio of each talker's power over its own active frames.
pub fn measure_sir(target: &[f64], interference: &[f64]) -> f64 {
    let pt = masked_power(target, &active_frames(target));
    let pi = masked_power(interference, &active_frames(interference));
    10.0 * (pt / pi).log10()
}

/// Alternating turn boundaries: `(start, end, target_speaks)` in samples,
/// every turn at least `MIN_TURN_S` long.
pub fn alternating_turns(len: usize, rng: &mut Rng) -> Vec<(usize, usize, bool)> {
    let min = (MIN_TURN_S * FS) as usize;
    let mut turns = Vec::new();
    let mut who = rng.random::<bool>();
    let mut pos = 0;
    while pos < len {
        let dur = (rng.random_range(MIN_TURN_S..2.0 * MIN_TURN_S) * FS) as usize;
        let end = (pos + dur).min(len);
        turns.push((pos, end, who));
        who = !who;
        pos = end;
    }
    if turns.len() > 1 {
        let last = turns[turns.len() - 1];
        if last.1 - last.0 < min {
            turns.pop();
            turns.last_mut().expect("at least one turn").1 = len;
        }
    }
    // both talkers must get a turn whenever two turns fit
    if turns.len() == 1 && len >= 2 * min {
        let cut = rng.random_range(min..=len - min);
        let who = turns[0].2;
        turns = vec![(0, cut, who), (cut, len, !who)];
    }
    turns
}

fn gate(x: &mut [f64], turns: &[(usize, usize, bool)], keep: bool) {
    let ramp = (0.01 * FS) as usize;
    let mut gain = vec![0.0; x.len()];
    for &(s, e, who) in turns {
        if who != keep {
            continue;
        }
        for (i, g) in gain[s..e].iter_mut().enumerate() {
            let edge = i.min(e - s - 1 - i);
            *g = if edge < ramp { (edge as f64 + 0.5) / ramp as f64 } else { 1.0 };
        }
    }
    for (v, g) in x.iter_mut().zip(&gain) {
        *v *= g;
    }
}

/// Builds the mixture and both references.
///
/// Target and interference share one augmentation draw (same room and
/// channel); the references contain the augmented speech, so only noise and
/// interference are to be removed. The interference is scaled to `sir_db`
/// against the target, the noise to `snr_db` against the summed speech, and a
/// final common gain applies the level augmentation and keeps the peak below
/// full scale.
pub fn synthesize_mixture(
    target_clips: &[AudioBuffer],
    interference_clips: &[AudioBuffer],
    noise_clips: &[AudioBuffer],
    spec: &MixtureSpec,
) -> Result<MixtureTriple> {
    spec.validate()?;
    if target_clips.is_empty() || noise_clips.is_empty() {
        return Err(Error::contract("target and noise pools must be non-empty"));
    }
    let multi = spec.segment_type.is_multi_speaker();
    if multi && interference_clips.is_empty() {
        return Err(Error::contract("two-speaker segment needs interference clips"));
    }
    let len = (spec.duration_s * FS).round() as usize;
    let mut r = rng::stream(spec.seed, "mixture");
    let augment = AugmentParams::draw(rng::derive_str(spec.seed, "mixture-augment"));

    let mut target = fill_stream(target_clips, len, &mut r);
    let mut interference = vec![0.0; len];
    match spec.segment_type {
        SegmentType::Single => {}
        SegmentType::Overlapping => {
            // the interferer joins after a random delay so both single- and
            // double-talk regions occur
            let delay = (r.random_range(0.0..0.3) * len as f64) as usize;
            let s = fill_stream(interference_clips, len - delay, &mut r);
            interference[delay..].copy_from_slice(&s);
        }
        SegmentType::Alternating => {
            interference = fill_stream(interference_clips, len, &mut r);
            let turns = alternating_turns(len, &mut r);
            gate(&mut target, &turns, true);
            gate(&mut interference, &turns, false);
        }
    }
    let noise_src = &noise_clips[r.random_range(0..noise_clips.len())];
    let mut noise = fill_stream(std::slice::from_ref(noise_src), len, &mut r);

    target = apply_filters(&target, &augment);
    if multi {
        interference = apply_filters(&interference, &augment);
        let pt = masked_power(&target, &active_frames(&target));
        let pi = masked_power(&interference, &active_frames(&interference));
        if pt <= 0.0 || pi <= 0.0 {
            return Err(Error::contract("speech stream is silent"));
        }
        let g = (pt / (pi * 10f64.powf(spec.sir_db.unwrap_or(0.0) / 10.0))).sqrt();
        interference.iter_mut().for_each(|v| *v *= g);
    }
    let speech: Vec<f64> = target.iter().zip(&interference).map(|(a, b)| a + b).collect();
    let mask = active_frames(&speech);
    let (ps, pn) = (masked_power(&speech, &mask), masked_power(&noise, &mask));
    if ps <= 0.0 || pn <= 0.0 {
        return Err(Error::contract("speech or noise is silent"));
    }
    let g = (ps / (pn * 10f64.powf(spec.snr_db / 10.0))).sqrt();
    noise.iter_mut().for_each(|v| *v *= g);

    let mut mixture: Vec<f64> = speech.iter().zip(&noise).map(|(s, n)| s + n).collect();
    let peak = mixture.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut common = augment.level_gain();
    if peak * common > MAX_PEAK {
        common = MAX_PEAK / peak;
    }
    let mut non_personalized = speech;
    for buf in [&mut target, &mut interference, &mut noise, &mut non_personalized, &mut mixture] {
        buf.iter_mut().for_each(|v| *v *= common);
    }
    // keep mixture == non_personalized + noise exactly after scaling
    for ((m, s), n) in mixture.iter_mut().zip(&non_personalized).zip(&noise) {
        *m = s + n;
    }
    let personalized_ref = if multi {
        AudioBuffer::at_48k(target)
    } else {
        AudioBuffer::at_48k(non_personalized.clone())
    };
    Ok(MixtureTriple {
        mixture: AudioBuffer::at_48k(mixture),
        personalized_ref,
        non_personalized_ref: AudioBuffer::at_48k(non_personalized),
        interference,
        noise,
        augment,
    })
}
