//! Mono audio buffers, WAV ingestion and the 48 kHz resampler.

use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const SAMPLE_RATE: u32 = 48_000;

#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer<T = f64> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Audio(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// A 48 kHz buffer. Panics on non-finite samples; use [`AudioBuffer::new`]
    /// for untrusted data.
    pub fn at_48k(samples: Vec<T>) -> Self {
        Self::new(samples, SAMPLE_RATE).expect("finite samples")
    }

    pub fn zeros(len: usize) -> Self {
        Self::at_48k(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        (crate::scalar::energy(&self.samples) / T::lit(self.samples.len() as f64)).sqrt()
    }

    pub fn cast<U: Real>(&self) -> AudioBuffer<U> {
        AudioBuffer {
            samples: crate::scalar::cast_slice(&self.samples),
            sample_rate: self.sample_rate,
        }
    }

    /// Sample at a signed index, zero outside the buffer.
    #[inline]
    pub fn at(&self, i: isize) -> T {
        if i < 0 {
            T::zero()
        } else {
            self.samples.get(i as usize).copied().unwrap_or_else(T::zero)
        }
    }
}

/// Reads a mono WAV file (16/24-bit PCM or 32-bit float) and resamples it to 48 kHz.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Audio(format!(
            "{}: {} channels; only mono input is supported",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Audio(format!(
                "{}: unsupported sample format {fmt:?}/{bits} bit",
                path.display()
            )))
        }
    };
    let buf = AudioBuffer::new(samples, spec.sample_rate)?;
    Ok(resample_to_48k(&buf))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavFormat {
    /// 16-bit PCM with TPDF dither
    Pcm16,
    Float32,
}

/// Writes a 48 kHz mono WAV. `dither_seed` only matters for [`WavFormat::Pcm16`].
pub fn write_wav<T: Real>(
    path: impl AsRef<Path>,
    audio: &AudioBuffer<T>,
    format: WavFormat,
    dither_seed: u64,
) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    match format {
        WavFormat::Float32 => {
            for &s in &audio.samples {
                writer.write_sample(s.as_f64() as f32)?;
            }
        }
        WavFormat::Pcm16 => {
            let mut rng = rng::rng(dither_seed);
            for &s in &audio.samples {
                let tpdf: f64 = rng.random::<f64>() - rng.random::<f64>();
                let v = (s.as_f64() * 32767.0 + tpdf).round().clamp(-32768.0, 32767.0);
                writer.write_sample(v as i16)?;
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

const RESAMPLE_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn kaiser(u: f64) -> f64 {
    // u in [-1, 1]
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Windowed-sinc resampler: 32 taps, Kaiser window (beta = 8), cutoff at the
/// lower of the two Nyquist frequencies. Identity when the rate is already 48 kHz.
pub fn resample_to_48k(audio: &AudioBuffer) -> AudioBuffer {
    resample(audio, SAMPLE_RATE)
}

pub fn resample(audio: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if audio.sample_rate == target_rate || audio.is_empty() {
        return AudioBuffer {
            samples: audio.samples.clone(),
            sample_rate: target_rate,
        };
    }
    let ratio = audio.sample_rate as f64 / target_rate as f64;
    let cutoff = (1.0 / ratio).min(1.0);
    let out_len = ((audio.len() as f64) / ratio).round() as usize;
    let half = (RESAMPLE_TAPS / 2) as isize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n as f64 * ratio;
        let base = pos.floor() as isize;
        let mut acc = 0.0;
        for k in (base - half + 1)..=(base + half) {
            let d = pos - k as f64;
            let w = kaiser(d / half as f64);
            acc += audio.at(k) * cutoff * sinc(cutoff * d) * w;
        }
        out.push(acc);
    }
    AudioBuffer {
        samples: out,
        sample_rate: target_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(AudioBuffer::new(vec![0.0f64; 4], 0).is_err());
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 48_000).is_err());
    }

    #[test]
    fn bessel_matches_reference_values() {
        // I0(1) and I0(8) from standard tables
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-9);
    }

    #[test]
    fn resampling_preserves_a_low_tone() {
        let sr = 16_000u32;
        let f = 440.0;
        let x: Vec<f64> = (0..sr as usize)
            .map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / sr as f64).sin())
            .collect();
        let y = resample_to_48k(&AudioBuffer::new(x, sr).unwrap());
        assert_eq!(y.sample_rate, 48_000);
        assert_eq!(y.len(), 48_000);
        // compare the middle against the analytic tone at 48 kHz
        let mut err = 0.0;
        let mut sig = 0.0;
        for n in 1000..47_000 {
            let r = (2.0 * std::f64::consts::PI * f * n as f64 / 48_000.0).sin();
            err += (y.samples[n] - r).powi(2);
            sig += r * r;
        }
        assert!(10.0 * (sig / err).log10() > 40.0);
    }

    #[test]
    fn wav_round_trip_and_mono_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = AudioBuffer::at_48k((0..4800).map(|n| 0.25 * (n as f64 * 0.01).sin()).collect());
        write_wav(&p, &x, WavFormat::Float32, 0).unwrap();
        let y = read_wav(&p).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 1e-7);
        }
        write_wav(&p, &x, WavFormat::Pcm16, 7).unwrap();
        let y = read_wav(&p).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 2.0 / 32767.0);
        }

        let stereo = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 48_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
        for _ in 0..10 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = read_wav(&stereo).unwrap_err().to_string();
        assert!(err.contains("mono"), "{err}");
    }

    #[test]
    fn reads_24_bit_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 48_000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1 << 22).unwrap();
        w.write_sample(-(1 << 22)).unwrap();
        w.finalize().unwrap();
        let y = read_wav(&p).unwrap();
        assert_eq!(y.samples, vec![0.5, -0.5]);
    }
}
