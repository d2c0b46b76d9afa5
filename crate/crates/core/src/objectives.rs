//! Training targets and the VAD-weighted multi-task loss.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::dsp::{band_energies, pitch_coherence, AnalysisConfig, FeatureExtractor, FrameAnalysis, N_BANDS};
use crate::error::{Error, Result};
use crate::postproc::EnhancerOutput;
use crate::scalar::Real;

/// Gain-ratio floor; bands where both energies fall below it get a zero target.
pub const GAIN_EPS: f64 = 1e-10;
/// VAD threshold below the loudest reference frame.
pub const VAD_RANGE_DB: f64 = 35.0;
const PRED_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameTargets<T = f64> {
    pub gains: [T; N_BANDS],
    pub strengths: [T; N_BANDS],
    pub vad: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub mu: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { mu: 0.9, gamma: 0.5 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::config(format!("mu = {} is outside [0, 1]", self.mu)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma = {} is outside (0, 1]", self.gamma)));
        }
        Ok(())
    }

    /// `mu` for voiced frames, `1 - mu` otherwise.
    pub fn frame_weight(&self, vad: bool) -> f64 {
        if vad {
            self.mu
        } else {
            1.0 - self.mu
        }
    }
}

/// Targets for `reference` given the analysed mixture. Strengths use the
/// mixture's pitch lag, which is the lag the comb filter will use.
pub fn targets_from_analysis<T: Real>(
    extractor: &FeatureExtractor<T>,
    reference: &AudioBuffer<T>,
    mixture: &[FrameAnalysis<T>],
) -> Result<Vec<FrameTargets<T>>> {
    let cfg = *extractor.config();
    let n_frames = cfg.n_frames(reference.len());
    if n_frames != mixture.len() {
        return Err(Error::contract(format!(
            "reference has {n_frames} frames, mixture analysis has {}",
            mixture.len()
        )));
    }
    let eps = T::lit(GAIN_EPS);
    let mut energies = Vec::with_capacity(n_frames);
    let mut out = Vec::with_capacity(n_frames);
    for (t, mix) in mixture.iter().enumerate() {
        let spec = extractor.analyzer.analyze_frame(reference, t);
        let e_ref = band_energies(&spec, &extractor.filterbank);
        let delayed = extractor
            .analyzer
            .transform_at(reference, cfg.window_start(t) - mix.pitch_lag as isize);
        let coh = pitch_coherence(&spec, &delayed, &extractor.filterbank);
        let mut target = FrameTargets {
            gains: [T::zero(); N_BANDS],
            strengths: [T::zero(); N_BANDS],
            vad: false,
        };
        for b in 0..N_BANDS {
            let (er, em) = (e_ref[b], mix.band_energy[b]);
            target.gains[b] = if er < eps && em < eps {
                T::zero()
            } else {
                (er / em.max(eps)).sqrt().min(T::one())
            };
            target.strengths[b] = coh[b].max(T::zero()).min(T::one());
        }
        energies.push(e_ref.iter().copied().sum::<T>());
        out.push(target);
    }
    for (target, v) in out.iter_mut().zip(vad_labels(&energies)) {
        target.vad = v;
    }
    Ok(out)
}

/// `y_t = 1` iff the frame energy exceeds `GAIN_EPS` and lies within
/// `VAD_RANGE_DB` of the loudest frame.
pub fn vad_labels<T: Real>(frame_energies: &[T]) -> Vec<bool> {
    let eps = T::lit(GAIN_EPS);
    let peak = frame_energies.iter().copied().fold(T::zero(), T::max);
    let threshold = peak * T::lit(10f64.powf(-VAD_RANGE_DB / 10.0));
    frame_energies
        .iter()
        .map(|&e| e > eps && e > threshold)
        .collect()
}

/// Per-frame gain, strength and VAD targets for an aligned reference/mixture pair.
pub fn compute_targets<T: Real>(
    reference: &AudioBuffer<T>,
    mixture: &AudioBuffer<T>,
    config: &AnalysisConfig,
) -> Result<Vec<FrameTargets<T>>> {
    if reference.len() != mixture.len() {
        return Err(Error::contract(format!(
            "reference has {} samples, mixture has {}",
            reference.len(),
            mixture.len()
        )));
    }
    let extractor = FeatureExtractor::new(*config)?;
    let mix = extractor.analyze(mixture);
    targets_from_analysis(&extractor, reference, &mix)
}

/// Losses for one frame, with their derivatives w.r.t. the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseLosses<T = f64> {
    pub gain: [T; N_BANDS],
    pub strength: [T; N_BANDS],
    pub vad: T,
    pub d_gain: [T; N_BANDS],
    pub d_strength: [T; N_BANDS],
    pub d_vad: T,
}

/// `(a^g - b^g)^2` and its derivative in `b`.
fn power_sq<T: Real>(a: T, b: T, gamma: T) -> (T, T) {
    let bc = b.max(T::lit(PRED_CLAMP));
    let diff = a.powf(gamma) - b.powf(gamma);
    (diff * diff, -T::lit(2.0) * diff * gamma * bc.powf(gamma - T::one()))
}

pub fn base_losses<T: Real>(
    pred: &EnhancerOutput<T>,
    target: &FrameTargets<T>,
    cfg: &LossConfig,
) -> BaseLosses<T> {
    let gamma = T::lit(cfg.gamma);
    let mut out = BaseLosses {
        gain: [T::zero(); N_BANDS],
        strength: [T::zero(); N_BANDS],
        vad: T::zero(),
        d_gain: [T::zero(); N_BANDS],
        d_strength: [T::zero(); N_BANDS],
        d_vad: T::zero(),
    };
    for b in 0..N_BANDS {
        (out.gain[b], out.d_gain[b]) = power_sq(target.gains[b], pred.gains[b], gamma);
        let (l, d) = power_sq(
            T::one() - target.strengths[b],
            T::one() - pred.strengths[b],
            gamma,
        );
        out.strength[b] = l;
        out.d_strength[b] = -d;
    }
    let lo = T::lit(PRED_CLAMP);
    let p = pred.vad.max(lo).min(T::one() - lo);
    let clamped = p != pred.vad;
    if target.vad {
        out.vad = -p.ln();
        out.d_vad = if clamped { T::zero() } else { -T::one() / p };
    } else {
        out.vad = -(T::one() - p).ln();
        out.d_vad = if clamped { T::zero() } else { T::one() / (T::one() - p) };
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedLoss<T = f64> {
    pub l_g: T,
    pub l_r: T,
    pub l_v: T,
    pub total: T,
    pub weights: Vec<T>,
}

/// `L_G = 1/(BT) sum_t w_t sum_b L_g(b,t)`, likewise `L_R`;
/// `L_V = 1/T sum_t w_t L_v(t)`; total is their sum.
pub fn vad_weighted_loss<T: Real>(
    l_g: &[[T; N_BANDS]],
    l_r: &[[T; N_BANDS]],
    l_v: &[T],
    labels: &[bool],
    mu: f64,
) -> Result<WeightedLoss<T>> {
    let n = labels.len();
    if l_g.len() != n || l_r.len() != n || l_v.len() != n {
        return Err(Error::contract("loss sequences and labels differ in length"));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::config(format!("mu = {mu} is outside [0, 1]")));
    }
    let cfg = LossConfig { mu, gamma: 1.0 };
    let weights: Vec<T> = labels.iter().map(|&y| T::lit(cfg.frame_weight(y))).collect();
    if n == 0 {
        return Ok(WeightedLoss {
            l_g: T::zero(),
            l_r: T::zero(),
            l_v: T::zero(),
            total: T::zero(),
            weights,
        });
    }
    let bt = T::lit((N_BANDS * n) as f64);
    let tt = T::lit(n as f64);
    let mut sums = (T::zero(), T::zero(), T::zero());
    for t in 0..n {
        let w = weights[t];
        sums.0 += w * l_g[t].iter().copied().sum::<T>();
        sums.1 += w * l_r[t].iter().copied().sum::<T>();
        sums.2 += w * l_v[t];
    }
    let (g, r, v) = (sums.0 / bt, sums.1 / bt, sums.2 / tt);
    Ok(WeightedLoss {
        l_g: g,
        l_r: r,
        l_v: v,
        total: g + r + v,
        weights,
    })
}

/// Weighted loss of a predicted sequence plus the gradient of the total
/// w.r.t. every output (returned in the shape of the outputs).
pub fn sequence_loss<T: Real>(
    preds: &[EnhancerOutput<T>],
    targets: &[FrameTargets<T>],
    cfg: &LossConfig,
) -> Result<(WeightedLoss<T>, Vec<EnhancerOutput<T>>)> {
    if preds.len() != targets.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let base: Vec<BaseLosses<T>> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| base_losses(p, t, cfg))
        .collect();
    let labels: Vec<bool> = targets.iter().map(|t| t.vad).collect();
    let lg: Vec<_> = base.iter().map(|b| b.gain).collect();
    let lr: Vec<_> = base.iter().map(|b| b.strength).collect();
    let lv: Vec<_> = base.iter().map(|b| b.vad).collect();
    let loss = vad_weighted_loss(&lg, &lr, &lv, &labels, cfg.mu)?;
    let n = preds.len().max(1) as f64;
    let band_scale = T::lit(1.0 / (N_BANDS as f64 * n));
    let frame_scale = T::lit(1.0 / n);
    let grads = base
        .iter()
        .zip(&loss.weights)
        .map(|(b, &w)| {
            let mut g = EnhancerOutput::uniform(T::zero(), T::zero(), T::zero());
            for k in 0..N_BANDS {
                g.gains[k] = w * band_scale * b.d_gain[k];
                g.strengths[k] = w * band_scale * b.d_strength[k];
            }
            g.vad = w * frame_scale * b.d_vad;
            g
        })
        .collect();
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn target(g: f64, r: f64, y: bool) -> FrameTargets {
        FrameTargets {
            gains: [g; N_BANDS],
            strengths: [r; N_BANDS],
            vad: y,
        }
    }

    #[test]
    fn hand_values() {
        let cfg = LossConfig::default();
        let l = base_losses(&EnhancerOutput::uniform(0.25, 0.3, 0.5), &target(1.0, 0.3, true), &cfg);
        assert!((l.gain[0] - 0.25).abs() < 1e-15);
        assert_eq!(l.strength[3], 0.0);
        assert!((l.vad - std::f64::consts::LN_2).abs() < 1e-12);
        let exact = base_losses(&EnhancerOutput::uniform(0.4, 0.2, 1.0), &target(0.4, 0.2, true), &cfg);
        assert!(exact.gain.iter().chain(&exact.strength).all(|&v| v == 0.0));
        assert!(exact.vad < 1e-6);
    }

    #[test]
    fn two_frame_weighted_example() {
        let z = [[0.0f64; N_BANDS]; 2];
        let w = vad_weighted_loss(&z, &z, &[0.4, 0.2], &[true, false], 0.75).unwrap();
        assert!((w.l_v - 0.175).abs() < 1e-12);
        assert_eq!(w.weights, vec![0.75, 0.25]);
    }

    #[test]
    fn mu_extremes() {
        let mut rng = crate::rng::rng(2);
        let n = 9;
        let lg: Vec<[f64; N_BANDS]> = (0..n).map(|_| std::array::from_fn(|_| rng.random())).collect();
        let lr: Vec<[f64; N_BANDS]> = (0..n).map(|_| std::array::from_fn(|_| rng.random())).collect();
        let lv: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let half = vad_weighted_loss(&lg, &lr, &lv, &y, 0.5).unwrap();
        let flat: f64 = (0..n)
            .map(|t| (lg[t].iter().sum::<f64>() + lr[t].iter().sum::<f64>()) / (N_BANDS * n) as f64 + lv[t] / n as f64)
            .sum();
        assert!((half.total - 0.5 * flat).abs() <= 1e-12 * flat);
        let mut lv2 = lv.clone();
        let mut lg2 = lg.clone();
        for t in 0..n {
            if !y[t] {
                lv2[t] = 1e3;
                lg2[t] = [7.0; N_BANDS];
            }
        }
        let a = vad_weighted_loss(&lg, &lr, &lv, &y, 1.0).unwrap();
        let lr2: Vec<[f64; N_BANDS]> = (0..n).map(|t| if y[t] { lr[t] } else { [5.0; N_BANDS] }).collect();
        let b = vad_weighted_loss(&lg2, &lr2, &lv2, &y, 1.0).unwrap();
        assert_eq!(a.total, b.total);
    }

    #[test]
    fn sequence_gradients_match_finite_differences() {
        let mut rng = crate::rng::rng(5);
        let cfg = LossConfig { mu: 0.8, gamma: 0.5 };
        let n = 6;
        let targets: Vec<FrameTargets> = (0..n)
            .map(|t| FrameTargets {
                gains: std::array::from_fn(|_| rng.random()),
                strengths: std::array::from_fn(|_| rng.random()),
                vad: t % 2 == 0,
            })
            .collect();
        let preds: Vec<EnhancerOutput> = (0..n)
            .map(|_| EnhancerOutput {
                gains: std::array::from_fn(|_| 0.05 + 0.9 * rng.random::<f64>()),
                strengths: std::array::from_fn(|_| 0.05 + 0.9 * rng.random::<f64>()),
                vad: 0.05 + 0.9 * rng.random::<f64>(),
            })
            .collect();
        let (_, grads) = sequence_loss(&preds, &targets, &cfg).unwrap();
        let h = 1e-6;
        let f = |p: &[EnhancerOutput]| sequence_loss(p, &targets, &cfg).unwrap().0.total;
        for t in 0..n {
            for b in [0, 17, 31] {
                let mut p = preds.clone();
                p[t].gains[b] += h;
                let up = f(&p);
                p[t].gains[b] -= 2.0 * h;
                let num = (up - f(&p)) / (2.0 * h);
                assert!((num - grads[t].gains[b]).abs() <= 1e-4 * num.abs() + 1e-10);
                let mut p = preds.clone();
                p[t].strengths[b] += h;
                let up = f(&p);
                p[t].strengths[b] -= 2.0 * h;
                let num = (up - f(&p)) / (2.0 * h);
                assert!((num - grads[t].strengths[b]).abs() <= 1e-4 * num.abs() + 1e-10);
            }
            let mut p = preds.clone();
            p[t].vad += h;
            let up = f(&p);
            p[t].vad -= 2.0 * h;
            let num = (up - f(&p)) / (2.0 * h);
            assert!((num - grads[t].vad).abs() <= 1e-4 * num.abs() + 1e-10);
        }
    }

    fn tone(n: usize, f: f64, amp: f64) -> AudioBuffer {
        AudioBuffer::at_48k((0..n).map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / 48_000.0).sin()).collect())
    }

    #[test]
    fn identical_streams_give_unit_gains() {
        let cfg = AnalysisConfig::default();
        let x = tone(24_000, 440.0, 0.3);
        let t = compute_targets(&x, &x, &cfg).unwrap();
        for ft in &t[2..] {
            for b in 0..N_BANDS {
                assert!(ft.gains[b] == 0.0 || (ft.gains[b] - 1.0).abs() < 1e-12);
            }
            assert!(ft.vad);
        }
        let silent = compute_targets(&AudioBuffer::zeros(24_000), &x, &cfg).unwrap();
        assert!(silent.iter().all(|f| !f.vad && f.gains.iter().all(|&g| g == 0.0)));
        assert!(compute_targets(&x, &AudioBuffer::zeros(100), &cfg).is_err());
    }

    #[test]
    fn zero_db_band_snr_gives_root_half() {
        // reference and noise: independent tones in the same band with equal power
        let cfg = AnalysisConfig::default();
        let fb = crate::dsp::ErbFilterbank::<f64>::new(&cfg).unwrap();
        let b = 20;
        let fc = fb.band_centers[b];
        let r = tone(48_000, fc, 0.1);
        let noise = tone(48_000, fc * 1.01 + 7.0, 0.1);
        let mix = AudioBuffer::at_48k(r.samples.iter().zip(&noise.samples).map(|(a, b)| a + b).collect());
        let t = compute_targets(&r, &mix, &cfg).unwrap();
        let mean: f64 = t[10..90].iter().map(|f| f.gains[b]).sum::<f64>() / 80.0;
        assert!((mean - 0.5f64.sqrt()).abs() < 0.05, "mean gain {mean}");
    }
}
