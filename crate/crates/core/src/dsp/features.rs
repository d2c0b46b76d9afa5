//! The 68-dimensional per-frame feature vector and its binary dump format.

use std::io::{Read, Write};
use std::path::Path;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::config::AnalysisConfig;
use super::erb::ErbFilterbank;
use super::pitch::{estimate_pitch_with, pitch_coherence, MAX_LAG};
use super::stft::{Analyzer, Spectrum};
use super::{FEATURE_DIM, N_BANDS};

pub const ENERGY_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures<T = f64> {
    pub band_mag: [T; N_BANDS],
    pub band_pitch_coh: [T; N_BANDS],
    /// pitch lag divided by the longest searched lag
    pub pitch_period: T,
    pub pitch_corr: T,
    /// `10 log10(sum_b E_b + 1e-10)`
    pub log_energy: T,
    pub delta_log_energy: T,
}

impl<T: Real> FrameFeatures<T> {
    pub fn zeros() -> Self {
        Self {
            band_mag: [T::zero(); N_BANDS],
            band_pitch_coh: [T::zero(); N_BANDS],
            pitch_period: T::zero(),
            pitch_corr: T::zero(),
            log_energy: T::zero(),
            delta_log_energy: T::zero(),
        }
    }

    /// Flattened layout: 32 magnitudes, 32 coherences, period, correlation,
    /// log energy, delta log energy.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(FEATURE_DIM);
        v.extend_from_slice(&self.band_mag);
        v.extend_from_slice(&self.band_pitch_coh);
        v.extend_from_slice(&[
            self.pitch_period,
            self.pitch_corr,
            self.log_energy,
            self.delta_log_energy,
        ]);
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.len() != FEATURE_DIM {
            return Err(Error::contract(format!(
                "feature vector has {} values, expected {FEATURE_DIM}",
                v.len()
            )));
        }
        let mut f = Self::zeros();
        f.band_mag.copy_from_slice(&v[..N_BANDS]);
        f.band_pitch_coh.copy_from_slice(&v[N_BANDS..2 * N_BANDS]);
        f.pitch_period = v[64];
        f.pitch_corr = v[65];
        f.log_energy = v[66];
        f.delta_log_energy = v[67];
        Ok(f)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> FrameFeatures<U> {
        FrameFeatures::from_slice(&crate::scalar::cast_slice(&self.to_vec())).expect("68 values")
    }
}

/// `E_b = sum_k w_b[k] |X[k]|^2`.
pub fn band_energies<T: Real>(spec: &Spectrum<T>, fb: &ErbFilterbank<T>) -> Vec<T> {
    fb.project(&spec.power())
}

/// Everything computed for a frame: features plus what resynthesis needs.
#[derive(Clone, Debug)]
pub struct FrameAnalysis<T = f64> {
    pub features: FrameFeatures<T>,
    pub spectrum: Spectrum<T>,
    pub band_energy: Vec<T>,
    pub pitch_lag: usize,
}

/// Reusable front end: cached transform plans and filterbank.
#[derive(Clone, Debug)]
pub struct FeatureExtractor<T: Real = f64> {
    pub analyzer: Analyzer<T>,
    pub filterbank: ErbFilterbank<T>,
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(config: AnalysisConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            analyzer: Analyzer::new(config)?,
            filterbank: ErbFilterbank::new(&config)?,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.analyzer.config
    }

    pub fn analyze(&self, audio: &AudioBuffer<T>) -> Vec<FrameAnalysis<T>> {
        let cfg = *self.config();
        let n_frames = cfg.n_frames(audio.len());
        let floor = T::lit(ENERGY_FLOOR);
        let mut prev_log = None;
        let mut out = Vec::with_capacity(n_frames);
        for t in 0..n_frames {
            let spectrum = self.analyzer.analyze_frame(audio, t);
            let band_energy = band_energies(&spectrum, &self.filterbank);
            let pitch = estimate_pitch_with(&self.analyzer, audio, t);
            let delayed = self
                .analyzer
                .transform_at(audio, cfg.window_start(t) - pitch.period as isize);
            let coh = pitch_coherence(&spectrum, &delayed, &self.filterbank);
            let total: T = band_energy.iter().copied().sum();
            let log_energy = T::lit(10.0) * (total + floor).log10();
            let delta = prev_log.map_or(T::zero(), |p| log_energy - p);
            prev_log = Some(log_energy);
            let mut features = FrameFeatures::zeros();
            for b in 0..N_BANDS {
                features.band_mag[b] = band_energy[b].sqrt();
                features.band_pitch_coh[b] = coh[b];
            }
            features.pitch_period = T::lit(pitch.period as f64 / MAX_LAG as f64);
            features.pitch_corr = pitch.corr;
            features.log_energy = log_energy;
            features.delta_log_energy = delta;
            out.push(FrameAnalysis {
                features,
                spectrum,
                band_energy,
                pitch_lag: pitch.period,
            });
        }
        out
    }

    pub fn extract(&self, audio: &AudioBuffer<T>) -> Vec<FrameFeatures<T>> {
        self.analyze(audio).into_iter().map(|a| a.features).collect()
    }
}

/// One feature vector per hop. Empty audio gives an empty sequence.
pub fn extract_features<T: Real>(
    audio: &AudioBuffer<T>,
    config: &AnalysisConfig,
) -> Result<Vec<FrameFeatures<T>>> {
    Ok(FeatureExtractor::new(*config)?.extract(audio))
}

const FEAT_MAGIC: &[u8; 8] = b"UPNFEAT1";

/// Writes `UPNFEAT1`, a little-endian u32 frame count, then 68 LE f32 per frame.
pub fn write_feature_dump<T: Real>(path: impl AsRef<Path>, frames: &[FrameFeatures<T>]) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + frames.len() * FEATURE_DIM * 4);
    buf.extend_from_slice(FEAT_MAGIC);
    buf.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        for v in f.to_vec() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_feature_dump(path: impl AsRef<Path>) -> Result<Vec<FrameFeatures<f32>>> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    if data.len() < 12 || &data[..8] != FEAT_MAGIC {
        return Err(Error::format(path, "missing UPNFEAT1 header"));
    }
    let count = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
    let body = &data[12..];
    if body.len() != count * FEATURE_DIM * 4 {
        return Err(Error::format(
            path,
            format!("expected {count} frames, body has {} bytes", body.len()),
        ));
    }
    body.chunks_exact(FEATURE_DIM * 4)
        .map(|rec| {
            let v: Vec<f32> = rec
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            FrameFeatures::from_slice(&v)
        })
        .collect()
}
