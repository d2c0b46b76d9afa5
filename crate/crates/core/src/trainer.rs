//! Multi-task training loop.
//!
//! Every segment keeps both target streams (personalized and
//! non-personalized). Each epoch draws, per example, a crop, a flag schedule
//! and one of the augmented enrollment embeddings, then selects the targets
//! frame by frame from the schedule.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::conditioning::{make_conditions, sample_schedule, select_targets, ConditionVector, FlagSchedule, DEFAULT_MIN_RUN};
use crate::datagen::{MixtureTriple, Split};
use crate::dsp::{AnalysisConfig, FeatureExtractor, FrameFeatures};
use crate::embedder::SpeakerEmbedding;
use crate::error::{Error, Result};
use crate::net::{backward, forward_cached, save_params, NetConfig, NetParams};
use crate::objectives::{sequence_loss, targets_from_analysis, FrameTargets, LossConfig};
use crate::optim::{clip_global_norm, Adam};
use crate::rng;
use crate::scalar::Real;

/// Augmented enrollment variants an example embedding is drawn from.
pub const EMBEDDING_VARIANTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seq_frames: usize,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epochs: usize,
    pub mu: f64,
    pub gamma: f64,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    pub clip_norm: f64,
    pub min_run: usize,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            seq_frames: 500,
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            epochs: 20,
            mu: 0.9,
            gamma: 0.5,
            seed: 0,
            checkpoint_dir: None,
            clip_norm: 5.0,
            min_run: DEFAULT_MIN_RUN,
            net: NetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            mu: self.mu,
            gamma: self.gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.min_run == 0 || self.seq_frames < self.min_run {
            return Err(Error::config(format!(
                "seq_frames {} shorter than min_run {}",
                self.seq_frames, self.min_run
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm must be positive"));
        }
        self.loss().validate()?;
        self.net.validate()
    }
}

/// One cropped, schedule-resolved sequence ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample<T = f32> {
    pub features: Vec<FrameFeatures<T>>,
    pub conditions: Vec<ConditionVector<T>>,
    pub targets: Vec<FrameTargets<T>>,
    pub schedule: FlagSchedule,
    pub manifest: String,
}

fn cast_targets<T: Real, U: Real>(t: &FrameTargets<T>) -> FrameTargets<U> {
    FrameTargets {
        gains: t.gains.map(|v| v.cast()),
        strengths: t.strengths.map(|v| v.cast()),
        vad: t.vad,
    }
}

/// A segment's features and both target streams, computed once.
#[derive(Clone, Debug)]
pub struct SegmentData<T = f32> {
    pub manifest: String,
    pub split: Split,
    pub features: Vec<FrameFeatures<T>>,
    pub personalized: Vec<FrameTargets<T>>,
    pub non_personalized: Vec<FrameTargets<T>>,
    /// augmented enrollment embeddings; examples draw one uniformly
    pub embeddings: Vec<SpeakerEmbedding<T>>,
}

impl<T: Real> SegmentData<T> {
    pub fn prepare(
        manifest: impl Into<String>,
        split: Split,
        triple: &MixtureTriple,
        embeddings: &[SpeakerEmbedding],
        extractor: &FeatureExtractor<f64>,
    ) -> Result<Self> {
        Self::from_references(
            manifest,
            split,
            &triple.mixture,
            &triple.personalized_ref,
            &triple.non_personalized_ref,
            embeddings,
            extractor,
        )
    }

    /// Same as [`SegmentData::prepare`] from the mixture and both references alone.
    pub fn from_references(
        manifest: impl Into<String>,
        split: Split,
        mixture: &AudioBuffer,
        personalized: &AudioBuffer,
        non_personalized: &AudioBuffer,
        embeddings: &[SpeakerEmbedding],
        extractor: &FeatureExtractor<f64>,
    ) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::contract("segment needs at least one embedding"));
        }
        if personalized.len() != mixture.len() || non_personalized.len() != mixture.len() {
            return Err(Error::contract("mixture and references differ in length"));
        }
        let analysis = extractor.analyze(mixture);
        let pse = targets_from_analysis(extractor, personalized, &analysis)?;
        let nse = targets_from_analysis(extractor, non_personalized, &analysis)?;
        Ok(Self {
            manifest: manifest.into(),
            split,
            features: analysis.iter().map(|a| a.features.cast()).collect(),
            personalized: pse.iter().map(cast_targets).collect(),
            non_personalized: nse.iter().map(cast_targets).collect(),
            embeddings: embeddings.iter().map(|e| e.cast()).collect(),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.features.len()
    }

    /// Frames `start..start + schedule.n_frames()` with targets selected by
    /// `schedule` and conditions built from embedding `variant`.
    pub fn example(&self, start: usize, schedule: &FlagSchedule, variant: usize) -> Result<TrainingExample<T>> {
        let len = schedule.n_frames();
        if start + len > self.n_frames() {
            return Err(Error::contract(format!(
                "crop {start}+{len} exceeds {} frames of {}",
                self.n_frames(),
                self.manifest
            )));
        }
        let z = self
            .embeddings
            .get(variant)
            .ok_or_else(|| Error::contract(format!("embedding variant {variant} out of range")))?;
        let span = start..start + len;
        Ok(TrainingExample {
            features: self.features[span.clone()].to_vec(),
            conditions: make_conditions(z, schedule),
            targets: select_targets(&self.personalized[span.clone()], &self.non_personalized[span], schedule)?,
            schedule: schedule.clone(),
            manifest: self.manifest.clone(),
        })
    }

    /// Random crop, schedule and embedding for one epoch; deterministic in `seed`.
    pub fn draw(&self, seq_frames: usize, min_run: usize, seed: u64) -> Result<TrainingExample<T>> {
        let len = seq_frames.min(self.n_frames());
        let mut r = rng::stream(seed, "example");
        let start = r.random_range(0..=self.n_frames() - len);
        let variant = r.random_range(0..self.embeddings.len());
        let schedule = sample_schedule(len, min_run.min(len.max(1)), rng::derive_str(seed, "schedule"))?;
        self.example(start, &schedule, variant)
    }
}

/// Whole-triple example with the given embedding and schedule.
pub fn assemble_example<T: Real>(
    triple: &MixtureTriple,
    embedding: &SpeakerEmbedding,
    schedule: &FlagSchedule,
    config: &AnalysisConfig,
) -> Result<TrainingExample<T>> {
    let n = config.n_frames(triple.mixture.len());
    if schedule.n_frames() != n {
        return Err(Error::contract(format!(
            "schedule has {} flags for {n} frames",
            schedule.n_frames()
        )));
    }
    let extractor = FeatureExtractor::new(*config)?;
    let seg = SegmentData::<T>::prepare("", Split::Train, triple, std::slice::from_ref(embedding), &extractor)?;
    seg.example(0, schedule, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub split: Split,
    #[serde(rename = "L_G")]
    pub l_g: f64,
    #[serde(rename = "L_R")]
    pub l_r: f64,
    #[serde(rename = "L_V")]
    pub l_v: f64,
    pub total: f64,
    pub wall_time_s: f64,
    /// fraction of frames with q = 1 in the examples seen
    pub q_fraction: f64,
}

#[derive(Clone, Debug, Default)]
struct Totals {
    l_g: f64,
    l_r: f64,
    l_v: f64,
    total: f64,
    q_on: usize,
    frames: usize,
    n: usize,
}

impl Totals {
    fn record(&self, epoch: usize, split: Split, wall: f64) -> LogRecord {
        let n = self.n.max(1) as f64;
        LogRecord {
            epoch,
            split,
            l_g: self.l_g / n,
            l_r: self.l_r / n,
            l_v: self.l_v / n,
            total: self.total / n,
            wall_time_s: wall,
            q_fraction: self.q_on as f64 / self.frames.max(1) as f64,
        }
    }
}

/// Mean loss of `params` over `examples`, plus (optionally) the mean gradient.
pub fn batch_loss<T: Real>(
    params: &NetParams<T>,
    examples: &[TrainingExample<T>],
    loss: &LossConfig,
    with_grad: bool,
) -> Result<(crate::objectives::WeightedLoss<f64>, Option<NetParams<T>>)> {
    let mut acc = with_grad.then(|| params.zeros_like());
    let mut sums = [0.0f64; 4];
    for ex in examples {
        let cache = forward_cached(params, &ex.features, &ex.conditions)?;
        let (l, d_out) = sequence_loss(&cache.outputs, &ex.targets, loss)?;
        sums[0] += l.l_g.as_f64();
        sums[1] += l.l_r.as_f64();
        sums[2] += l.l_v.as_f64();
        sums[3] += l.total.as_f64();
        if let Some(acc) = acc.as_mut() {
            let g = backward(params, &cache, &d_out)?;
            for (a, b) in acc.slices_mut().into_iter().zip(g.slices()) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
            }
        }
    }
    let n = examples.len().max(1) as f64;
    if let Some(acc) = acc.as_mut() {
        let s = T::lit(1.0 / n);
        for a in acc.slices_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }
    let l = crate::objectives::WeightedLoss {
        l_g: sums[0] / n,
        l_r: sums[1] / n,
        l_v: sums[2] / n,
        total: sums[3] / n,
        weights: Vec::new(),
    };
    Ok((l, acc))
}

fn fold(t: &mut Totals, l: &crate::objectives::WeightedLoss<f64>, examples: &[TrainingExample<impl Real>]) {
    let k = examples.len() as f64;
    t.l_g += l.l_g * k;
    t.l_r += l.l_r * k;
    t.l_v += l.l_v * k;
    t.total += l.total * k;
    t.n += examples.len();
    for ex in examples {
        t.q_on += ex.schedule.q.iter().filter(|&&q| q).count();
        t.frames += ex.schedule.n_frames();
    }
}

/// Adam step on one batch; returns the batch loss measured before the step.
pub fn train_step<T: Real>(
    params: &mut NetParams<T>,
    adam: &mut Adam<T>,
    examples: &[TrainingExample<T>],
    config: &TrainConfig,
) -> Result<crate::objectives::WeightedLoss<f64>> {
    let (l, grads) = batch_loss(params, examples, &config.loss(), true)?;
    let mut grads = grads.expect("gradient requested");
    let finite = l.total.is_finite() && grads.is_finite();
    if !finite {
        let names: Vec<&str> = examples.iter().map(|e| e.manifest.as_str()).collect();
        return Err(Error::NonFiniteLoss {
            manifest: names.join(", "),
        });
    }
    clip_global_norm(&mut grads.slices_mut(), T::lit(config.clip_norm));
    adam.update(&mut params.slices_mut(), &grads.slices());
    Ok(l)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T = f32> {
    pub params: NetParams<T>,
    /// parameters at the epoch with the lowest validation loss (training
    /// loss when there is no validation split)
    pub best: NetParams<T>,
    pub best_epoch: usize,
    pub log: Vec<LogRecord>,
}

/// Fixed validation examples so losses are comparable across epochs.
pub fn validation_examples<T: Real>(
    data: &[SegmentData<T>],
    config: &TrainConfig,
) -> Result<Vec<TrainingExample<T>>> {
    data.iter()
        .filter(|s| s.split == Split::Validation)
        .map(|s| s.draw(config.seq_frames, config.min_run, rng::derive_str(config.seed, &s.manifest)))
        .collect()
}

/// Trains from a fresh initialisation. Writes `train_log.jsonl`,
/// `best.ckpt` and `last.ckpt` when a checkpoint directory is configured.
pub fn train<T: Real>(data: &[SegmentData<T>], config: &TrainConfig) -> Result<TrainOutcome<T>> {
    let init = NetParams::init(config.net, rng::derive_str(config.seed, "init"))?;
    train_from(init, data, config, |_| {})
}

/// Like [`train`] but from given parameters, calling `on_record` for every
/// log record as it is produced.
pub fn train_from<T: Real>(
    mut params: NetParams<T>,
    data: &[SegmentData<T>],
    config: &TrainConfig,
    mut on_record: impl FnMut(&LogRecord),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if params.config != config.net {
        return Err(Error::config("initial parameters do not match the configured network"));
    }
    let train_idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].split == Split::Train).collect();
    if train_idx.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let valid = validation_examples(data, config)?;
    let mut log_file = match &config.checkpoint_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(std::io::BufWriter::new(std::fs::File::create(dir.join("train_log.jsonl"))?))
        }
        None => None,
    };
    let mut emit = |rec: LogRecord, log: &mut Vec<LogRecord>| -> Result<()> {
        if let Some(f) = log_file.as_mut() {
            serde_json::to_writer(&mut *f, &rec)?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        on_record(&rec);
        log.push(rec);
        Ok(())
    };
    let (b1, b2) = config.betas;
    let mut adam = Adam::new(T::lit(config.learning_rate), T::lit(b1), T::lit(b2));
    let start = Instant::now();
    let mut log = Vec::new();
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    for epoch in 1..=config.epochs {
        let epoch_seed = rng::derive(config.seed, epoch as u64);
        let mut order = train_idx.clone();
        order.shuffle(&mut rng::stream(epoch_seed, "order"));
        let mut totals = Totals::default();
        for batch in order.chunks(config.batch_size) {
            let examples = batch
                .iter()
                .map(|&i| data[i].draw(config.seq_frames, config.min_run, rng::derive(epoch_seed, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            let l = train_step(&mut params, &mut adam, &examples, config)?;
            fold(&mut totals, &l, &examples);
        }
        let train_rec = totals.record(epoch, Split::Train, start.elapsed().as_secs_f64());
        let mut score = train_rec.total;
        emit(train_rec, &mut log)?;
        if !valid.is_empty() {
            let (l, _) = batch_loss(&params, &valid, &config.loss(), false)?;
            let mut t = Totals::default();
            fold(&mut t, &l, &valid);
            let rec = t.record(epoch, Split::Validation, start.elapsed().as_secs_f64());
            score = rec.total;
            emit(rec, &mut log)?;
        }
        if score < best_loss {
            best_loss = score;
            best_epoch = epoch;
            best = params.clone();
            if let Some(dir) = &config.checkpoint_dir {
                save_params(&best, dir.join("best.ckpt"))?;
            }
        }
    }
    if let Some(dir) = &config.checkpoint_dir {
        save_params(&params, dir.join("last.ckpt"))?;
    }
    if best_epoch == 0 {
        best = params.clone();
    }
    Ok(TrainOutcome {
        params,
        best,
        best_epoch,
        log,
    })
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synthesize_mixture, MixtureSpec, SegmentType, ToyCorpus};
    use crate::datagen::noise::noise_clip;

    fn tiny_net() -> NetConfig {
        NetConfig {
            conv_channels: 8,
            gru_layers: 2,
            gru_hidden: 12,
            ..Default::default()
        }
    }

    fn segments(n: usize, dur: f64, kind: SegmentType) -> Vec<SegmentData<f64>> {
        let corpus = ToyCorpus::new(4, 9);
        let ex = FeatureExtractor::<f64>::new(AnalysisConfig::default()).unwrap();
        (0..n)
            .map(|k| {
                let s = k % 4;
                let t = vec![corpus.utterance(s, k, dur).unwrap()];
                let i = vec![corpus.utterance((s + 1) % 4, k, dur).unwrap()];
                let noise = vec![noise_clip(k, dur, 1)];
                let spec = MixtureSpec::sample(kind, dur, k as u64);
                let triple = synthesize_mixture(&t, &i, &noise, &spec).unwrap();
                let mut e = vec![0.0; 32];
                e[s] = 1.0;
                e[31] = 0.5;
                let z = SpeakerEmbedding::from_raw(e).unwrap();
                SegmentData::prepare(format!("seg{k}"), Split::Train, &triple, &[z], &ex).unwrap()
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 2,
            seq_frames: 40,
            min_run: 10,
            epochs: 2,
            net: NetConfig {
                cond_dim: 33,
                ..tiny_net()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_speaker_targets_do_not_depend_on_flag() {
        let corpus = ToyCorpus::new(2, 1);
        let t = vec![corpus.utterance(0, 0, 1.0).unwrap()];
        let spec = MixtureSpec::sample(SegmentType::Single, 1.0, 2);
        let triple = synthesize_mixture(&t, &[], &[noise_clip(0, 1.0, 0)], &spec).unwrap();
        let z = SpeakerEmbedding::new(vec![1.0, 0.0]).unwrap();
        let ac = AnalysisConfig::default();
        let n = ac.n_frames(triple.mixture.len());
        let on: TrainingExample<f64> = assemble_example(&triple, &z, &FlagSchedule::constant(n, true), &ac).unwrap();
        let off: TrainingExample<f64> = assemble_example(&triple, &z, &FlagSchedule::constant(n, false), &ac).unwrap();
        assert_eq!(on.targets, off.targets);
        assert!(off.conditions.iter().all(|c| c.values.iter().all(|&v| v == 0.0)));
        assert!(assemble_example::<f64>(&triple, &z, &FlagSchedule::constant(n + 1, true), &ac).is_err());
    }

    #[test]
    fn targets_switch_at_the_schedule_boundary() {
        let seg = &segments(1, 2.0, SegmentType::Overlapping)[0];
        let mut q = vec![false; 150];
        q[60..].iter_mut().for_each(|v| *v = true);
        let ex = seg.example(10, &FlagSchedule { q }, 0).unwrap();
        for t in 0..150 {
            let want = if t < 60 { &seg.non_personalized[10 + t] } else { &seg.personalized[10 + t] };
            assert_eq!(&ex.targets[t], want);
            assert_eq!(ex.conditions[t].flag(), t >= 60);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let data: Vec<SegmentData<f32>> = segments(1, 1.0, SegmentType::Overlapping)
            .into_iter()
            .map(|s| SegmentData {
                features: s.features.iter().map(|f| f.cast()).collect(),
                personalized: s.personalized.iter().map(cast_targets).collect(),
                non_personalized: s.non_personalized.iter().map(cast_targets).collect(),
                embeddings: s.embeddings.iter().map(|e| e.cast()).collect(),
                manifest: s.manifest,
                split: s.split,
            })
            .collect();
        let c = TrainConfig {
            learning_rate: 0.0,
            epochs: 1,
            ..cfg()
        };
        let init = NetParams::<f32>::init(c.net, 5).unwrap();
        let out = train_from(init.clone(), &data, &c, |_| {}).unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn same_seed_gives_identical_runs() {
        let data = segments(3, 1.0, SegmentType::Overlapping);
        let a = train(&data, &cfg()).unwrap();
        let b = train(&data, &cfg()).unwrap();
        assert_eq!(a.params, b.params);
        let strip = |l: &[LogRecord]| l.iter().map(|r| (r.epoch, r.total, r.q_fraction)).collect::<Vec<_>>();
        assert_eq!(strip(&a.log), strip(&b.log));
        let c = train(&data, &TrainConfig { seed: 1, ..cfg() }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn small_step_decreases_batch_loss() {
        let data = segments(2, 1.0, SegmentType::Overlapping);
        let c = cfg();
        let ex: Vec<_> = data.iter().map(|s| s.draw(40, 10, 3).unwrap()).collect();
        let p0 = NetParams::<f64>::init(c.net, 1).unwrap();
        let (l0, _) = batch_loss(&p0, &ex, &c.loss(), false).unwrap();
        let ok = [1e-3, 1e-4, 1e-5].iter().any(|&lr| {
            let mut p = p0.clone();
            let mut adam = Adam::new(lr, 0.9, 0.999);
            train_step(&mut p, &mut adam, &ex, &c).unwrap();
            batch_loss(&p, &ex, &c.loss(), false).unwrap().0.total < l0.total
        });
        assert!(ok);
    }

    #[test]
    fn non_finite_loss_names_the_batch() {
        let data = segments(2, 1.0, SegmentType::Overlapping);
        let c = cfg();
        let ex: Vec<_> = data.iter().map(|s| s.draw(40, 10, 3).unwrap()).collect();
        let mut p = NetParams::<f64>::init(c.net, 1).unwrap();
        p.gain_b.data[0] = f64::NAN;
        let err = train_step(&mut p, &mut Adam::new(1e-3, 0.9, 0.999), &ex, &c).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("seg0") && msg.contains("seg1"), "{msg}");
    }

    #[test]
    fn both_flag_regimes_appear_each_epoch() {
        let data = segments(12, 3.0, SegmentType::Overlapping);
        let c = TrainConfig {
            seq_frames: 250,
            min_run: 50,
            epochs: 3,
            learning_rate: 0.0,
            batch_size: 12,
            ..cfg()
        };
        let out = train(&data, &c).unwrap();
        for r in &out.log {
            assert!((0.2..=0.8).contains(&r.q_fraction), "{}", r.q_fraction);
        }
    }

    #[test]
    fn checkpoints_and_log_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = segments(4, 1.0, SegmentType::Overlapping);
        data[3].split = Split::Validation;
        let data: Vec<SegmentData<f32>> = data
            .into_iter()
            .map(|s| SegmentData {
                features: s.features.iter().map(|f| f.cast()).collect(),
                personalized: s.personalized.iter().map(cast_targets).collect(),
                non_personalized: s.non_personalized.iter().map(cast_targets).collect(),
                embeddings: s.embeddings.iter().map(|e| e.cast()).collect(),
                manifest: s.manifest,
                split: s.split,
            })
            .collect();
        let c = TrainConfig {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            epochs: 3,
            ..cfg()
        };
        let out = train(&data, &c).unwrap();
        let log = read_log(dir.path().join("train_log.jsonl")).unwrap();
        assert_eq!(log, out.log);
        assert_eq!(log.len(), 6);
        assert!(std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap().contains("\"L_G\""));
        let best = crate::net::load_params(dir.path().join("best.ckpt")).unwrap();
        assert_eq!(best, out.best);
        let valid = validation_examples(&data, &c).unwrap();
        let a = batch_loss(&out.best, &valid, &c.loss(), false).unwrap().0.total;
        let b = batch_loss(&best, &valid, &c.loss(), false).unwrap().0.total;
        assert_eq!(a, b);
        let rec = log.iter().find(|r| r.epoch == out.best_epoch && r.split == Split::Validation).unwrap();
        assert!((rec.total - a).abs() < 1e-12);
    }
}
