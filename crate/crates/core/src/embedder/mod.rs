//! Speaker embeddings.
//!
//! The desk-scale embedder pools log ERB-band energies over the active frames
//! of an utterance (mean and standard deviation per band) together with
//! voicing and log-pitch statistics, standardises them,
//! and maps them through `dense -> tanh -> dense -> L2 normalise`. It is
//! trained with the additive angular margin softmax in [`aam`].

pub mod aam;
pub mod augment;
pub mod cache;
pub mod eer;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::{band_energies, estimate_pitch_with, AnalysisConfig, Analyzer, ErbFilterbank, N_BANDS};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng;
use crate::scalar::{dot, Real};

pub use aam::{aam_softmax_loss, AamOutput};
pub use augment::{augment_enrollment, augment_enrollment_detailed, EnrollmentVariant};
pub use cache::{read_embedding_cache, write_embedding_cache};
pub use eer::compute_eer;

pub const MIN_ENROLLMENT_S: f64 = 1.0;
/// frames more than this far below the loudest frame are ignored when pooling
const ACTIVE_RANGE_DB: f64 = 40.0;
const POOLED_DIM: usize = 2 * N_BANDS + 3;
/// pitch estimates below this correlation count as unvoiced
const VOICED_CORR: f64 = 0.5;

/// Unit-norm speaker identity vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerEmbedding<T = f64> {
    values: Vec<T>,
}

impl<T: Real> SpeakerEmbedding<T> {
    /// Accepts a vector that is already unit-norm (within 1e-6).
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("embedding must be non-empty and finite"));
        }
        let norm = dot(&values, &values).sqrt();
        if (norm - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::contract(format!("embedding norm {norm} is not 1")));
        }
        Ok(Self { values })
    }

    /// Normalises `values` to unit length.
    pub fn from_raw(values: Vec<T>) -> Result<Self> {
        let norm = dot(&values, &values).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::contract("cannot normalise a zero or non-finite vector"));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cast<U: Real>(&self) -> SpeakerEmbedding<U> {
        SpeakerEmbedding {
            values: crate::scalar::cast_slice(&self.values),
        }
    }
}

pub fn cosine_similarity<T: Real>(a: &SpeakerEmbedding<T>, b: &SpeakerEmbedding<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::contract(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(dot(a.values(), b.values()).max(-T::one()).min(T::one()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub hidden: usize,
    pub margin: f64,
    pub scale: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            hidden: 64,
            margin: 0.2,
            scale: 30.0,
            epochs: 400,
            learning_rate: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedderModel {
    pub dim: usize,
    pub hidden: usize,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// `[hidden][POOLED_DIM]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `[dim][hidden]`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// `[classes][dim]`, unit-norm rows
    pub class_weights: Vec<f64>,
    pub class_names: Vec<String>,
}

/// Level-normalised utterance statistics over active frames: mean and
/// standard deviation of the log band energies, then the voiced fraction and
/// the mean and standard deviation of log2 f0 over voiced frames.
pub fn pooled_features(audio: &AudioBuffer) -> Vec<f64> {
    let cfg = AnalysisConfig::default();
    let analyzer = Analyzer::<f64>::new(cfg).expect("default config");
    let fb = ErbFilterbank::<f64>::new(&cfg).expect("default config");
    let rms = audio.rms();
    let norm = if rms > 0.0 { audio.scaled(1.0 / rms) } else { audio.clone() };
    let n_frames = cfg.n_frames(norm.len());
    let frames: Vec<Vec<f64>> = (0..n_frames)
        .map(|t| band_energies(&analyzer.analyze_frame(&norm, t), &fb))
        .collect();
    let totals: Vec<f64> = frames.iter().map(|e| e.iter().sum()).collect();
    let peak = totals.iter().copied().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(-ACTIVE_RANGE_DB / 10.0);
    let active_idx: Vec<usize> = (0..n_frames).filter(|&t| totals[t] > floor).collect();
    let active: Vec<&Vec<f64>> = active_idx.iter().map(|&t| &frames[t]).collect();
    let mut out = vec![0.0; POOLED_DIM];
    if active.is_empty() {
        return out;
    }
    let n = active.len() as f64;
    for b in 0..N_BANDS {
        let logs: Vec<f64> = active.iter().map(|e| (e[b] + 1e-10).log10()).collect();
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        out[b] = mean;
        out[N_BANDS + b] = var.sqrt();
    }
    let log_f0: Vec<f64> = active_idx
        .iter()
        .map(|&t| estimate_pitch_with(&analyzer, &norm, t))
        .filter(|p| p.corr > VOICED_CORR)
        .map(|p| (cfg.sample_rate as f64 / p.period as f64).log2())
        .collect();
    out[2 * N_BANDS] = log_f0.len() as f64 / n;
    if !log_f0.is_empty() {
        let k = log_f0.len() as f64;
        let mean = log_f0.iter().sum::<f64>() / k;
        out[2 * N_BANDS + 1] = mean;
        out[2 * N_BANDS + 2] = (log_f0.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k).sqrt();
    }
    out
}

struct Activations {
    u: Vec<f64>,
    h: Vec<f64>,
    e: Vec<f64>,
}

impl EmbedderModel {
    pub fn n_classes(&self) -> usize {
        self.class_weights.len() / self.dim
    }

    fn standardize(&self, pooled: &[f64]) -> Vec<f64> {
        pooled
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    fn forward(&self, pooled: &[f64]) -> Activations {
        let u = self.standardize(pooled);
        let h: Vec<f64> = (0..self.hidden)
            .map(|i| (dot(&self.w1[i * POOLED_DIM..(i + 1) * POOLED_DIM], &u) + self.b1[i]).tanh())
            .collect();
        let e: Vec<f64> = (0..self.dim)
            .map(|i| dot(&self.w2[i * self.hidden..(i + 1) * self.hidden], &h) + self.b2[i])
            .collect();
        Activations { u, h, e }
    }

    pub fn embed_pooled(&self, pooled: &[f64]) -> Result<SpeakerEmbedding> {
        SpeakerEmbedding::from_raw(self.forward(pooled).e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loss and parameter gradients for one pooled example (used by training
    /// and by the gradient check).
    fn loss_and_grads(&self, pooled: &[f64], label: usize, margin: f64, scale: f64) -> (f64, Grads) {
        let act = self.forward(pooled);
        let aam = aam_softmax_loss(&act.e, label, &self.class_weights, margin, scale);
        let mut g = Grads::zeros(self);
        g.wc = aam.d_class_weights;
        let ge = aam.d_embedding;
        let mut gh = vec![0.0; self.hidden];
        for i in 0..self.dim {
            g.b2[i] = ge[i];
            for j in 0..self.hidden {
                g.w2[i * self.hidden + j] = ge[i] * act.h[j];
                gh[j] += self.w2[i * self.hidden + j] * ge[i];
            }
        }
        for j in 0..self.hidden {
            let ga = gh[j] * (1.0 - act.h[j] * act.h[j]);
            g.b1[j] = ga;
            for k in 0..POOLED_DIM {
                g.w1[j * POOLED_DIM + k] = ga * act.u[k];
            }
        }
        (aam.loss, g)
    }
}

#[derive(Clone, Debug)]
struct Grads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    wc: Vec<f64>,
}

impl Grads {
    fn zeros(m: &EmbedderModel) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
            wc: vec![0.0; m.class_weights.len()],
        }
    }

    fn add(&mut self, o: &Grads, s: f64) {
        for (a, b) in [
            (&mut self.w1, &o.w1),
            (&mut self.b1, &o.b1),
            (&mut self.w2, &o.w2),
            (&mut self.b2, &o.b2),
            (&mut self.wc, &o.wc),
        ] {
            crate::scalar::axpy(s, b, a);
        }
    }
}

/// Deterministic embedding of an enrollment utterance (at least 1 s long).
pub fn embed(model: &EmbedderModel, enrollment: &AudioBuffer) -> Result<SpeakerEmbedding> {
    if enrollment.duration_s() < MIN_ENROLLMENT_S {
        return Err(Error::contract(format!(
            "enrollment is {:.2} s; at least {MIN_ENROLLMENT_S} s required",
            enrollment.duration_s()
        )));
    }
    model.embed_pooled(&pooled_features(enrollment))
}

/// Trains an embedder on labelled clips. Labels index `class_names`.
pub fn train_embedder(
    clips: &[(usize, AudioBuffer)],
    class_names: Vec<String>,
    config: &EmbedderConfig,
) -> Result<(EmbedderModel, Vec<f64>)> {
    let pooled: Vec<(usize, Vec<f64>)> = clips
        .iter()
        .map(|(l, a)| (*l, pooled_features(a)))
        .collect();
    train_embedder_pooled(&pooled, class_names, config)
}

pub fn train_embedder_pooled(
    pooled: &[(usize, Vec<f64>)],
    class_names: Vec<String>,
    config: &EmbedderConfig,
) -> Result<(EmbedderModel, Vec<f64>)> {
    let n_classes = class_names.len();
    if pooled.is_empty() || n_classes < 2 {
        return Err(Error::contract("embedder training needs clips from at least two speakers"));
    }
    if let Some((l, _)) = pooled.iter().find(|(l, _)| *l >= n_classes) {
        return Err(Error::contract(format!("label {l} out of range")));
    }
    let n = pooled.len() as f64;
    let mut mean = vec![0.0; POOLED_DIM];
    for (_, p) in pooled {
        crate::scalar::axpy(1.0 / n, p, &mut mean);
    }
    let std: Vec<f64> = (0..POOLED_DIM)
        .map(|k| {
            let var = pooled.iter().map(|(_, p)| (p[k] - mean[k]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(1e-3)
        })
        .collect();
    let mut rng = rng::stream(config.seed, "embedder-init");
    let mut uniform = |len: usize, fan_in: usize| -> Vec<f64> {
        let a = (1.0 / fan_in as f64).sqrt();
        (0..len).map(|_| rng.random_range(-a..a)).collect()
    };
    let (h, d) = (config.hidden, config.dim);
    let mut model = EmbedderModel {
        dim: d,
        hidden: h,
        input_mean: mean,
        input_std: std,
        w1: uniform(h * POOLED_DIM, POOLED_DIM),
        b1: vec![0.0; h],
        w2: uniform(d * h, h),
        b2: vec![0.0; d],
        class_weights: uniform(n_classes * d, d),
        class_names,
    };
    normalize_rows(&mut model.class_weights, d);
    let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut total = Grads::zeros(&model);
        let mut loss = 0.0;
        for (label, p) in pooled {
            let (l, g) = model.loss_and_grads(p, *label, config.margin, config.scale);
            loss += l / n;
            total.add(&g, 1.0 / n);
        }
        history.push(loss);
        opt.update(
            &mut [
                &mut model.w1,
                &mut model.b1,
                &mut model.w2,
                &mut model.b2,
                &mut model.class_weights,
            ],
            &[&total.w1, &total.b1, &total.w2, &total.b2, &total.wc],
        );
        normalize_rows(&mut model.class_weights, d);
    }
    Ok((model, history))
}

fn normalize_rows(w: &mut [f64], dim: usize) {
    for row in w.chunks_exact_mut(dim) {
        let n = dot(row, row).sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
}
