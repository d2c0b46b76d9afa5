//! Conditioned conv + GRU enhancer.
//!
//! ```text
//! features (68) -> conv1 (k=3) -> tanh -> conv2 (k=3) -> tanh
//!               -> concat condition (D+1) -> GRU x L -> sigmoid heads
//! ```
//!
//! Each convolution sees the previous, current and next frame, so the network
//! adds two frames of look-ahead on top of the analysis window.

mod backward;
mod checkpoint;
mod forward;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dsp::{FrameFeatures, FEATURE_DIM, N_BANDS};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub use backward::backward;
pub use checkpoint::{load_params, save_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{forward, forward_cached, forward_sequence, ForwardCache, NetState, StreamingNet};

/// Frames of look-ahead added by the two convolutions.
pub const NET_LOOKAHEAD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub feat_dim: usize,
    pub cond_dim: usize,
    pub conv_channels: usize,
    pub gru_layers: usize,
    pub gru_hidden: usize,
    pub n_bands: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            feat_dim: FEATURE_DIM,
            cond_dim: 33,
            conv_channels: 64,
            gru_layers: 3,
            gru_hidden: 128,
            n_bands: N_BANDS,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feat_dim != FEATURE_DIM {
            return Err(Error::config(format!("feat_dim must be {FEATURE_DIM}, got {}", self.feat_dim)));
        }
        if self.n_bands != N_BANDS {
            return Err(Error::config(format!("n_bands must be {N_BANDS}, got {}", self.n_bands)));
        }
        if self.cond_dim < 1 || self.conv_channels < 1 || self.gru_layers < 1 || self.gru_hidden < 1 {
            return Err(Error::config("network sizes must all be at least 1"));
        }
        Ok(())
    }

    pub fn gru_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.conv_channels + self.cond_dim
        } else {
            self.gru_hidden
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); dims.iter().product()],
        }
    }

    fn uniform(dims: &[usize], bound: f64, rng: &mut rng::Rng) -> Self {
        Self {
            dims: dims.to_vec(),
            data: (0..dims.iter().product::<usize>())
                .map(|_| T::lit(rng.random_range(-bound..bound)))
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: crate::scalar::cast_slice(&self.data),
        }
    }
}

/// One GRU layer, gates stacked `[reset; update; candidate]` along the rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T = f32> {
    pub w_ih: Tensor<T>,
    pub w_hh: Tensor<T>,
    pub b_ih: Tensor<T>,
    pub b_hh: Tensor<T>,
}

/// Conv weights are laid out `[out][tap][in]` with taps (previous, current, next).
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T = f32> {
    pub config: NetConfig,
    pub conv1_w: Tensor<T>,
    pub conv1_b: Tensor<T>,
    pub conv2_w: Tensor<T>,
    pub conv2_b: Tensor<T>,
    pub gru: Vec<GruParams<T>>,
    pub gain_w: Tensor<T>,
    pub gain_b: Tensor<T>,
    pub strength_w: Tensor<T>,
    pub strength_b: Tensor<T>,
    pub vad_w: Tensor<T>,
    pub vad_b: Tensor<T>,
}

impl<T: Real> NetParams<T> {
    fn build(config: NetConfig, mut make: impl FnMut(&[usize], usize) -> Tensor<T>) -> Self {
        let (f, c, h, b) = (config.feat_dim, config.conv_channels, config.gru_hidden, config.n_bands);
        let conv1_w = make(&[c, 3, f], 3 * f);
        let conv1_b = make(&[c], 3 * f);
        let conv2_w = make(&[c, 3, c], 3 * c);
        let conv2_b = make(&[c], 3 * c);
        let gru = (0..config.gru_layers)
            .map(|l| {
                let i = config.gru_input(l);
                GruParams {
                    w_ih: make(&[3 * h, i], h),
                    w_hh: make(&[3 * h, h], h),
                    b_ih: make(&[3 * h], h),
                    b_hh: make(&[3 * h], h),
                }
            })
            .collect();
        Self {
            config,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            gru,
            gain_w: make(&[b, h], h),
            gain_b: make(&[b], h),
            strength_w: make(&[b, h], h),
            strength_b: make(&[b], h),
            vad_w: make(&[1, h], h),
            vad_b: make(&[1], h),
        }
    }

    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::build(config, |d, _| Tensor::zeros(d)))
    }

    /// Uniform `+-sqrt(1/fan_in)` initialisation; GRU fan-in is the hidden size.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, "net-init");
        Ok(Self::build(config, |d, fan_in| {
            Tensor::uniform(d, (1.0 / fan_in as f64).sqrt(), &mut r)
        }))
    }

    pub fn zeros_like(&self) -> Self {
        Self::build(self.config, |d, _| Tensor::zeros(d))
    }

    /// Tensors in checkpoint order with their names.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = vec![
            ("conv1.weight".to_string(), &self.conv1_w),
            ("conv1.bias".to_string(), &self.conv1_b),
            ("conv2.weight".to_string(), &self.conv2_w),
            ("conv2.bias".to_string(), &self.conv2_b),
        ];
        for (l, g) in self.gru.iter().enumerate() {
            v.push((format!("gru{l}.w_ih"), &g.w_ih));
            v.push((format!("gru{l}.w_hh"), &g.w_hh));
            v.push((format!("gru{l}.b_ih"), &g.b_ih));
            v.push((format!("gru{l}.b_hh"), &g.b_hh));
        }
        v.push(("gain.weight".to_string(), &self.gain_w));
        v.push(("gain.bias".to_string(), &self.gain_b));
        v.push(("strength.weight".to_string(), &self.strength_w));
        v.push(("strength.bias".to_string(), &self.strength_b));
        v.push(("vad.weight".to_string(), &self.vad_w));
        v.push(("vad.bias".to_string(), &self.vad_b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![&mut self.conv1_w, &mut self.conv1_b, &mut self.conv2_w, &mut self.conv2_b];
        for g in &mut self.gru {
            v.extend([&mut g.w_ih, &mut g.w_hh, &mut g.b_ih, &mut g.b_hh]);
        }
        v.extend([
            &mut self.gain_w,
            &mut self.gain_b,
            &mut self.strength_w,
            &mut self.strength_b,
            &mut self.vad_w,
            &mut self.vad_b,
        ]);
        v
    }

    pub fn slices(&self) -> Vec<&[T]> {
        self.named().into_iter().map(|(_, t)| t.data.as_slice()).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.tensors_mut().into_iter().map(|t| t.data.as_mut_slice()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams {
            config: self.config,
            conv1_w: self.conv1_w.cast(),
            conv1_b: self.conv1_b.cast(),
            conv2_w: self.conv2_w.cast(),
            conv2_b: self.conv2_b.cast(),
            gru: self
                .gru
                .iter()
                .map(|g| GruParams {
                    w_ih: g.w_ih.cast(),
                    w_hh: g.w_hh.cast(),
                    b_ih: g.b_ih.cast(),
                    b_hh: g.b_hh.cast(),
                })
                .collect(),
            gain_w: self.gain_w.cast(),
            gain_b: self.gain_b.cast(),
            strength_w: self.strength_w.cast(),
            strength_b: self.strength_b.cast(),
            vad_w: self.vad_w.cast(),
            vad_b: self.vad_b.cast(),
        }
    }
}

/// Fixed input scaling applied before the first convolution, bringing every
/// feature to roughly zero mean and unit spread on speech-plus-noise input:
/// log band energies, centred coherences and pitch terms, scaled energy terms.
pub fn normalize_features<T: Real>(f: &FrameFeatures<T>) -> Vec<T> {
    let mut v = Vec::with_capacity(FEATURE_DIM);
    for &m in &f.band_mag {
        v.push(((m * m + T::lit(1e-4)).log10() + T::lit(0.2)) / T::lit(1.4));
    }
    for &c in &f.band_pitch_coh {
        v.push((c - T::lit(0.6)) / T::lit(0.4));
    }
    v.push((f.pitch_period - T::lit(0.4)) / T::lit(0.2));
    v.push((f.pitch_corr - T::lit(0.65)) / T::lit(0.3));
    v.push((f.log_energy - T::lit(25.0)) / T::lit(10.0));
    v.push(f.delta_log_energy / T::lit(3.0));
    v
}

#[cfg(test)]
mod tests;
