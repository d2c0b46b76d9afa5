//! Evaluation: intrusive metrics, the end-to-end enhance pipeline,
//! real-time-factor measurement and reports.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::conditioning::{make_conditions, ConditionVector, FlagSchedule};
use crate::datagen::{noise_clip, MixtureTriple, ToyCorpus};
use crate::dsp::{AnalysisConfig, FeatureExtractor};
use crate::embedder::SpeakerEmbedding;
use crate::error::{Error, Result};
use crate::net::{NetParams, StreamingNet};
use crate::objectives::VAD_RANGE_DB;
use crate::postproc::{synthesize_with, EnhancerOutput};
use crate::scalar::Real;

/// Upper bound reported by [`si_sdr`] (a perfect estimate).
pub const SI_SDR_CAP_DB: f64 = 80.0;
pub const RTF_RUNS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Personalized,
    NonPersonalized,
    Scheduled,
}

impl Mode {
    pub fn short(self) -> &'static str {
        match self {
            Mode::Personalized => "pse",
            Mode::NonPersonalized => "nse",
            Mode::Scheduled => "schedule",
        }
    }
}

/// Scale-invariant SDR in dB, capped at [`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::contract(format!(
            "si_sdr: estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let rr: f64 = reference.iter().map(|r| r * r).sum();
    if rr == 0.0 {
        return Err(Error::contract("si_sdr: reference is all zeros"));
    }
    let alpha = estimate.iter().zip(reference).map(|(e, r)| e * r).sum::<f64>() / rr;
    let mut target = 0.0;
    let mut residual = 0.0;
    for (&e, &r) in estimate.iter().zip(reference) {
        let t = alpha * r;
        target += t * t;
        residual += (e - t) * (e - t);
    }
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    if target == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// Frame layout shared by the frame-level metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetricConfig {
    pub frame_len: usize,
    /// reference frames within this many dB of the loudest count as active
    pub vad_range_db: f64,
    /// estimate this far below the reference counts as suppressed
    pub suppression_db: f64,
}

impl Default for FrameMetricConfig {
    fn default() -> Self {
        Self {
            frame_len: 480,
            vad_range_db: VAD_RANGE_DB,
            suppression_db: 10.0,
        }
    }
}

fn frame_energies(x: &[f64], n: usize) -> Vec<f64> {
    x.chunks(n).map(|c| c.iter().map(|v| v * v).sum()).collect()
}

fn active_mask(energies: &[f64], range_db: f64) -> Vec<bool> {
    let peak = energies.iter().copied().fold(0.0, f64::max);
    let thr = peak * 10f64.powf(-range_db / 10.0);
    energies.iter().map(|&e| peak > 0.0 && e > thr).collect()
}

/// Fraction of active reference frames whose estimate energy is more than
/// `suppression_db` below the reference energy. 0 when nothing is active.
pub fn oversuppression_rate(estimate: &[f64], reference: &[f64], cfg: &FrameMetricConfig) -> f64 {
    let n = estimate.len().min(reference.len());
    let er = frame_energies(&reference[..n], cfg.frame_len);
    let ee = frame_energies(&estimate[..n], cfg.frame_len);
    let mask = active_mask(&er, cfg.vad_range_db);
    let factor = 10f64.powf(-cfg.suppression_db / 10.0);
    let active = mask.iter().filter(|&&m| m).count();
    if active == 0 {
        return 0.0;
    }
    let suppressed = (0..er.len()).filter(|&t| mask[t] && ee[t] < er[t] * factor).count();
    suppressed as f64 / active as f64
}

/// Mean per-frame SNR over active reference frames, each clamped to [-10, 35] dB.
pub fn seg_snr(estimate: &[f64], reference: &[f64], cfg: &FrameMetricConfig) -> f64 {
    let n = estimate.len().min(reference.len());
    let er = frame_energies(&reference[..n], cfg.frame_len);
    let mask = active_mask(&er, cfg.vad_range_db);
    let mut sum = 0.0;
    let mut k = 0usize;
    for (t, (e, r)) in estimate[..n]
        .chunks(cfg.frame_len)
        .zip(reference[..n].chunks(cfg.frame_len))
        .enumerate()
    {
        if !mask[t] {
            continue;
        }
        let noise: f64 = e.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
        let snr = 10.0 * (er[t] / noise.max(1e-20)).log10();
        sum += snr.clamp(-10.0, 35.0);
        k += 1;
    }
    if k == 0 {
        0.0
    } else {
        sum / k as f64
    }
}

/// Conditions for `mode`. Personalized and scheduled modes need an
/// embedding; a scheduled mode needs a schedule matching `n_frames`.
pub fn conditions_for<T: Real>(
    mode: Mode,
    embedding: Option<&SpeakerEmbedding<T>>,
    schedule: Option<&FlagSchedule>,
    n_frames: usize,
    cond_dim: usize,
) -> Result<Vec<ConditionVector<T>>> {
    let need = |what: &str| Error::usage(format!("{} mode requires {what}", mode.short()));
    let check_dim = |z: &SpeakerEmbedding<T>| {
        if z.dim() + 1 != cond_dim {
            Err(Error::contract(format!(
                "embedding has {} dims, model expects {}",
                z.dim(),
                cond_dim - 1
            )))
        } else {
            Ok(())
        }
    };
    match mode {
        Mode::NonPersonalized => Ok(vec![ConditionVector::zeros(cond_dim); n_frames]),
        Mode::Personalized => {
            let z = embedding.ok_or_else(|| need("an enrollment or embedding"))?;
            check_dim(z)?;
            Ok(make_conditions(z, &FlagSchedule::constant(n_frames, true)))
        }
        Mode::Scheduled => {
            let s = schedule.ok_or_else(|| need("a schedule"))?;
            if s.n_frames() != n_frames {
                return Err(Error::contract(format!(
                    "schedule has {} frames, audio has {n_frames}",
                    s.n_frames()
                )));
            }
            match embedding {
                Some(z) => {
                    check_dim(z)?;
                    Ok(make_conditions(z, s))
                }
                None if s.q.iter().all(|&q| !q) => Ok(vec![ConditionVector::zeros(cond_dim); n_frames]),
                None => Err(need("an enrollment or embedding")),
            }
        }
    }
}

/// Fits a schedule to `n_frames`: longer schedules are truncated (reported
/// as a warning), shorter ones are an error.
pub fn fit_schedule(schedule: &FlagSchedule, n_frames: usize) -> Result<(FlagSchedule, Option<String>)> {
    use std::cmp::Ordering;
    match schedule.n_frames().cmp(&n_frames) {
        Ordering::Equal => Ok((schedule.clone(), None)),
        Ordering::Greater => Ok((
            FlagSchedule {
                q: schedule.q[..n_frames].to_vec(),
            },
            Some(format!(
                "schedule has {} frames, audio only {n_frames}; truncated",
                schedule.n_frames()
            )),
        )),
        Ordering::Less => Err(Error::contract(format!(
            "schedule covers {} frames, audio has {n_frames}",
            schedule.n_frames()
        ))),
    }
}

/// Analysis, streaming network and synthesis for one model.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub params: NetParams<f32>,
    pub extractor: FeatureExtractor<f64>,
}

impl Pipeline {
    pub fn new(params: NetParams<f32>) -> Result<Self> {
        params.config.validate()?;
        Ok(Self {
            params,
            extractor: FeatureExtractor::new(AnalysisConfig::default())?,
        })
    }

    pub fn config(&self) -> AnalysisConfig {
        *self.extractor.config()
    }

    pub fn n_frames(&self, audio: &AudioBuffer) -> usize {
        self.config().n_frames(audio.len())
    }

    /// Enhances `audio` with per-frame `conditions`. The result has the
    /// input's length and is delay-compensated; samples the pipeline cannot
    /// produce (the final partial hop) are zero.
    pub fn enhance(&self, audio: &AudioBuffer, conditions: &[ConditionVector<f32>]) -> Result<AudioBuffer> {
        let frames = self.extractor.analyze(audio);
        if conditions.len() != frames.len() {
            return Err(Error::contract(format!(
                "{} conditions for {} frames",
                conditions.len(),
                frames.len()
            )));
        }
        let mut net = StreamingNet::new(self.params.clone());
        let mut outputs: Vec<EnhancerOutput<f64>> = Vec::with_capacity(frames.len());
        let cast = |o: EnhancerOutput<f32>| EnhancerOutput {
            gains: o.gains.map(f64::from),
            strengths: o.strengths.map(f64::from),
            vad: f64::from(o.vad),
        };
        for (f, c) in frames.iter().zip(conditions) {
            if let Some(o) = net.push(&f.features.cast(), c)? {
                outputs.push(cast(o));
            }
        }
        outputs.extend(net.flush().into_iter().map(cast));
        let spectra: Vec<_> = frames.iter().map(|f| f.spectrum.clone()).collect();
        let lags: Vec<usize> = frames.iter().map(|f| f.pitch_lag).collect();
        let out = synthesize_with(&self.extractor.analyzer, &self.extractor.filterbank, &spectra, &outputs, &lags)?;
        let cfg = self.config();
        let delay = cfg.lookahead_frames * cfg.frame_hop;
        let mut samples = vec![0.0; audio.len()];
        for (i, v) in out.samples.iter().skip(delay).enumerate() {
            samples[i] = *v;
        }
        AudioBuffer::new(samples, audio.sample_rate)
    }

    pub fn enhance_mode(
        &self,
        audio: &AudioBuffer,
        mode: Mode,
        embedding: Option<&SpeakerEmbedding>,
        schedule: Option<&FlagSchedule>,
    ) -> Result<AudioBuffer> {
        let n = self.n_frames(audio);
        let z = embedding.map(|e| e.cast::<f32>());
        let conds = conditions_for(mode, z.as_ref(), schedule, n, self.params.config.cond_dim)?;
        self.enhance(audio, &conds)
    }

    /// Samples over which enhanced output and references are compared.
    pub fn valid_len(&self, audio_len: usize) -> usize {
        let cfg = self.config();
        cfg.n_frames(audio_len).saturating_sub(cfg.lookahead_frames) * cfg.frame_hop
    }
}

/// The reference matching `mode`; the scheduled reference follows the flags
/// frame by frame.
pub fn reference_for(triple: &MixtureTriple, mode: Mode, schedule: Option<&FlagSchedule>, hop: usize) -> Vec<f64> {
    match mode {
        Mode::Personalized => triple.personalized_ref.samples.clone(),
        Mode::NonPersonalized => triple.non_personalized_ref.samples.clone(),
        Mode::Scheduled => {
            let mut r = triple.non_personalized_ref.samples.clone();
            if let Some(s) = schedule {
                for (t, &q) in s.q.iter().enumerate() {
                    if q {
                        let span = t * hop..((t + 1) * hop).min(r.len());
                        r[span.clone()].copy_from_slice(&triple.personalized_ref.samples[span]);
                    }
                }
            }
            r
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub file: String,
    pub mode: Mode,
    pub si_sdr_db: f64,
    /// SI-SDR of the unprocessed mixture against the same reference
    pub si_sdr_input_db: f64,
    pub seg_snr_db: f64,
    pub oversuppression_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub files: Vec<FileReport>,
    pub mean_si_sdr_db: f64,
    pub mean_si_sdr_input_db: f64,
    pub mean_seg_snr_db: f64,
    pub oversuppression_rate: f64,
    /// wall time over audio duration for the enhancement runs
    pub rtf: f64,
}

impl EvalReport {
    pub fn from_files(mode: Mode, files: Vec<FileReport>, rtf: f64) -> Self {
        let n = files.len().max(1) as f64;
        let mean = |f: fn(&FileReport) -> f64| files.iter().map(f).sum::<f64>() / n;
        Self {
            mode,
            mean_si_sdr_db: mean(|r| r.si_sdr_db),
            mean_si_sdr_input_db: mean(|r| r.si_sdr_input_db),
            mean_seg_snr_db: mean(|r| r.seg_snr_db),
            oversuppression_rate: mean(|r| r.oversuppression_rate),
            files,
            rtf,
        }
    }

    /// One JSON object per file, then a summary line.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for f in &self.files {
            out.push_str(&serde_json::to_string(f)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": true,
            "mode": self.mode,
            "files": self.files.len(),
            "mean_si_sdr_db": self.mean_si_sdr_db,
            "mean_si_sdr_input_db": self.mean_si_sdr_input_db,
            "mean_seg_snr_db": self.mean_seg_snr_db,
            "oversuppression_rate": self.oversuppression_rate,
            "rtf": self.rtf,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        Ok(out)
    }

    pub fn to_table(&self) -> String {
        let w = self.files.iter().map(|f| f.file.len()).max().unwrap_or(4).max(4);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<w$}  {:>8}  {:>9}  {:>9}  {:>8}  {:>7}",
            "file", "mode", "si-sdr", "input", "segsnr", "oversup"
        );
        for f in &self.files {
            let _ = writeln!(
                s,
                "{:<w$}  {:>8}  {:>9.2}  {:>9.2}  {:>8.2}  {:>7.3}",
                f.file,
                f.mode.short(),
                f.si_sdr_db,
                f.si_sdr_input_db,
                f.seg_snr_db,
                f.oversuppression_rate
            );
        }
        let _ = writeln!(
            s,
            "{:<w$}  {:>8}  {:>9.2}  {:>9.2}  {:>8.2}  {:>7.3}",
            "mean",
            self.mode.short(),
            self.mean_si_sdr_db,
            self.mean_si_sdr_input_db,
            self.mean_seg_snr_db,
            self.oversuppression_rate
        );
        let _ = writeln!(s, "rtf {:.4}", self.rtf);
        s
    }
}

/// Scores one enhanced signal against `reference` over the valid span.
pub fn score(
    file: &str,
    mode: Mode,
    enhanced: &[f64],
    mixture: &[f64],
    reference: &[f64],
    valid_len: usize,
) -> Result<FileReport> {
    let n = valid_len.min(enhanced.len()).min(reference.len()).min(mixture.len());
    let cfg = FrameMetricConfig::default();
    Ok(FileReport {
        file: file.to_string(),
        mode,
        si_sdr_db: si_sdr(&enhanced[..n], &reference[..n])?,
        si_sdr_input_db: si_sdr(&mixture[..n], &reference[..n])?,
        seg_snr_db: seg_snr(&enhanced[..n], &reference[..n], &cfg),
        oversuppression_rate: oversuppression_rate(&enhanced[..n], &reference[..n], &cfg),
    })
}

/// A held-out item: mixture triple, the target speaker's embedding and an
/// optional schedule for scheduled mode.
#[derive(Clone, Debug)]
pub struct EvalItem {
    pub id: String,
    pub triple: MixtureTriple,
    pub embedding: SpeakerEmbedding,
    pub schedule: Option<FlagSchedule>,
}

/// Enhances and scores every item in `mode`.
pub fn evaluate(pipeline: &Pipeline, items: &[EvalItem], mode: Mode) -> Result<EvalReport> {
    let hop = pipeline.config().frame_hop;
    let mut files = Vec::with_capacity(items.len());
    let mut wall = 0.0;
    let mut audio_s = 0.0;
    for item in items {
        let mix = &item.triple.mixture;
        let t0 = Instant::now();
        let out = pipeline.enhance_mode(mix, mode, Some(&item.embedding), item.schedule.as_ref())?;
        wall += t0.elapsed().as_secs_f64();
        audio_s += mix.duration_s();
        let reference = reference_for(&item.triple, mode, item.schedule.as_ref(), hop);
        files.push(score(
            &item.id,
            mode,
            &out.samples,
            &mix.samples,
            &reference,
            pipeline.valid_len(mix.len()),
        )?);
    }
    let rtf = if audio_s > 0.0 { wall / audio_s } else { 0.0 };
    Ok(EvalReport::from_files(mode, files, rtf))
}

/// Synthetic test signal for benchmarking: toy speech plus noise.
pub fn benchmark_audio(duration_s: f64, seed: u64) -> Result<AudioBuffer> {
    let speech = ToyCorpus::new(2, seed).utterance(0, 0, duration_s)?;
    let noise = noise_clip(1, duration_s, seed);
    let samples = speech
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, n)| s + 0.03 * n)
        .collect();
    Ok(AudioBuffer::at_48k(samples))
}

/// Median over [`RTF_RUNS`] runs of the full personalized pipeline on
/// `duration_s` seconds of synthetic audio, single-threaded.
pub fn measure_rtf(params: &NetParams<f32>, duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::contract("duration must be positive"));
    }
    let pipeline = Pipeline::new(params.clone())?;
    let audio = benchmark_audio(duration_s, 7)?;
    let dim = params.config.cond_dim - 1;
    let z = SpeakerEmbedding::from_raw(vec![1.0; dim])?;
    let mut times = Vec::with_capacity(RTF_RUNS);
    for _ in 0..RTF_RUNS {
        let t0 = Instant::now();
        let out = pipeline.enhance_mode(&audio, Mode::Personalized, Some(&z), None)?;
        std::hint::black_box(&out);
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[RTF_RUNS / 2] / duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::signal::white_noise;
    use crate::net::NetConfig;

    #[test]
    fn si_sdr_identities() {
        let r = white_noise(&mut crate::rng::rng(1), 4800);
        assert_eq!(si_sdr(&r, &r).unwrap(), SI_SDR_CAP_DB);
        let scaled: Vec<f64> = r.iter().map(|v| 0.3 * v).collect();
        assert_eq!(si_sdr(&scaled, &r).unwrap(), SI_SDR_CAP_DB);
        assert!(si_sdr(&r, &vec![0.0; 4800]).is_err());
        assert!(si_sdr(&r, &r[..10]).is_err());
    }

    #[test]
    fn si_sdr_orthogonal_equal_power_noise_is_zero_db() {
        let n = 4800;
        let r = white_noise(&mut crate::rng::rng(1), n);
        let mut e = white_noise(&mut crate::rng::rng(2), n);
        let rr: f64 = r.iter().map(|v| v * v).sum();
        let proj = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
        e.iter_mut().zip(&r).for_each(|(a, b)| *a -= proj * b);
        let ee: f64 = e.iter().map(|v| v * v).sum();
        let g = (rr / ee).sqrt();
        let est: Vec<f64> = r.iter().zip(&e).map(|(a, b)| a + g * b).collect();
        assert!(si_sdr(&est, &r).unwrap().abs() < 0.01);
    }

    #[test]
    fn oversuppression_cases() {
        let cfg = FrameMetricConfig::default();
        let r: Vec<f64> = (0..144_000).map(|i| (i as f64 * 0.05).sin()).collect();
        assert_eq!(oversuppression_rate(&r, &r, &cfg), 0.0);
        assert_eq!(oversuppression_rate(&vec![0.0; r.len()], &r, &cfg), 1.0);
        let mut e = r.clone();
        e[48_000..96_000].iter_mut().for_each(|v| *v = 0.0);
        let rate = oversuppression_rate(&e, &r, &cfg);
        assert!((rate - 1.0 / 3.0).abs() <= 1.0 / 300.0 + 1e-12, "{rate}");
        assert_eq!(oversuppression_rate(&r, &vec![0.0; r.len()], &cfg), 0.0);
    }

    #[test]
    fn seg_snr_perfect_estimate_hits_ceiling() {
        let cfg = FrameMetricConfig::default();
        let r = white_noise(&mut crate::rng::rng(1), 9600);
        assert_eq!(seg_snr(&r, &r, &cfg), 35.0);
        assert_eq!(seg_snr(&vec![0.0; 9600], &r, &cfg), 0.0);
    }

    #[test]
    fn mode_conditions() {
        let z = SpeakerEmbedding::new(vec![0.6f32, 0.8]).unwrap();
        let nse = conditions_for::<f32>(Mode::NonPersonalized, None, None, 5, 3).unwrap();
        assert!(nse.iter().all(|c| c.values == vec![0.0; 3]));
        let pse = conditions_for(Mode::Personalized, Some(&z), None, 5, 3).unwrap();
        assert!(pse.iter().all(|c| c.values == vec![0.6, 0.8, 1.0]));
        let err = conditions_for::<f32>(Mode::Personalized, None, None, 5, 3).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(conditions_for(Mode::Personalized, Some(&z), None, 5, 4).is_err());
        let s = FlagSchedule {
            q: vec![false, false, true, true, true],
        };
        let sch = conditions_for(Mode::Scheduled, Some(&z), Some(&s), 5, 3).unwrap();
        assert_eq!(sch.iter().map(|c| c.flag()).collect::<Vec<_>>(), s.q);
        assert!(conditions_for::<f32>(Mode::Scheduled, None, Some(&s), 5, 3).is_err());
    }

    #[test]
    fn long_schedules_are_truncated_with_a_warning() {
        let s = FlagSchedule::constant(10, true);
        let (fit, warn) = fit_schedule(&s, 6).unwrap();
        assert_eq!(fit.n_frames(), 6);
        assert!(warn.is_some());
        assert!(fit_schedule(&s, 10).unwrap().1.is_none());
        assert!(fit_schedule(&s, 12).is_err());
    }

    fn small_params() -> NetParams<f32> {
        let cfg = NetConfig {
            conv_channels: 8,
            gru_layers: 1,
            gru_hidden: 8,
            ..Default::default()
        };
        NetParams::init(cfg, 3).unwrap()
    }

    #[test]
    fn unit_gain_model_reconstructs_input() {
        let mut p = small_params();
        // saturate the heads: gains -> 1, strengths -> 0
        p.gain_w.data.iter_mut().for_each(|v| *v = 0.0);
        p.gain_b.data.iter_mut().for_each(|v| *v = 40.0);
        p.strength_w.data.iter_mut().for_each(|v| *v = 0.0);
        p.strength_b.data.iter_mut().for_each(|v| *v = -200.0);
        let pipe = Pipeline::new(p).unwrap();
        let x = benchmark_audio(1.0, 2).unwrap();
        let y = pipe.enhance_mode(&x, Mode::NonPersonalized, None, None).unwrap();
        let n = pipe.valid_len(x.len());
        let h = pipe.config().frame_hop;
        let err: f64 = (h..n).map(|i| (y.samples[i] - x.samples[i]).powi(2)).sum();
        let sig: f64 = (h..n).map(|i| x.samples[i].powi(2)).sum();
        assert!(10.0 * (sig / err).log10() > 60.0);
    }

    #[test]
    fn report_formats() {
        let f = FileReport {
            file: "a".into(),
            mode: Mode::Personalized,
            si_sdr_db: 3.0,
            si_sdr_input_db: 1.0,
            seg_snr_db: 2.0,
            oversuppression_rate: 0.1,
        };
        let r = EvalReport::from_files(Mode::Personalized, vec![f.clone(), f], 0.5);
        let lines = r.to_json_lines().unwrap();
        assert_eq!(lines.lines().count(), 3);
        let back: FileReport = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(back.file, "a");
        assert!(r.to_table().contains("mean"));
    }

    #[test]
    fn rtf_is_positive_and_finite() {
        let rtf = measure_rtf(&small_params(), 0.5).unwrap();
        assert!(rtf > 0.0 && rtf.is_finite());
    }
}
