//! Desk-scale experiment: toy corpus -> embedder -> training set -> model,
//! plus held-out two-speaker evaluation items.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditioning::{sample_schedule, DEFAULT_MIN_RUN};
use crate::datagen::{
    clip_id, noise_clip, plan_dataset, read_manifest, realize, speaker_id, synthesize_mixture, ClipCache, DatagenConfig,
    MixtureSpec, SegmentType, ToyCorpus, ENROLL_INDEX, HELD_OUT_INDEX,
};
use crate::dsp::{AnalysisConfig, FeatureExtractor};
use crate::embedder::{augment_enrollment, embed, train_embedder, EmbedderConfig, EmbedderModel, SpeakerEmbedding};
use crate::audio::{read_wav, AudioBuffer};
use crate::error::{Error, Result};
use crate::harness::EvalItem;
use crate::rng;
use crate::trainer::{SegmentData, TrainConfig, EMBEDDING_VARIANTS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub data: DatagenConfig,
    pub embedder: EmbedderConfig,
    pub train: TrainConfig,
    /// utterances per speaker used to train the embedder
    pub embedder_clips: usize,
    pub embedder_clip_s: f64,
    pub test_mixtures: usize,
    pub test_s: f64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            data: DatagenConfig::default(),
            embedder: EmbedderConfig::default(),
            train: TrainConfig::default(),
            embedder_clips: 12,
            embedder_clip_s: 3.0,
            test_mixtures: 20,
            test_s: 8.0,
        }
    }
}

/// Embedder trained on utterances disjoint from the mixture material. Each
/// utterance is used clean and as one noisy reverberant copy drawn like the
/// enrollment variants, so embeddings of augmented enrollments stay close to
/// the speaker's clean embedding.
pub fn train_desk_embedder(cfg: &DeskConfig) -> Result<EmbedderModel> {
    let corpus = cfg.data.corpus();
    let mut clips = Vec::new();
    for s in 0..corpus.n_speakers() {
        for k in 0..cfg.embedder_clips {
            let clean = corpus.utterance(s, 500 + k, cfg.embedder_clip_s)?;
            let seed = rng::derive_str(cfg.embedder.seed, &clip_id(s, 500 + k));
            for noisy in augment_enrollment(&clean, 1, seed) {
                clips.push((s, noisy));
            }
            clips.push((s, clean));
        }
    }
    let names = (0..corpus.n_speakers()).map(speaker_id).collect();
    Ok(train_embedder(&clips, names, &cfg.embedder)?.0)
}

/// Embeddings of `EMBEDDING_VARIANTS` augmented copies of each speaker's enrollment.
pub fn enrollment_variants(
    cfg: &DeskConfig,
    model: &EmbedderModel,
) -> Result<BTreeMap<usize, Vec<SpeakerEmbedding>>> {
    let corpus = cfg.data.corpus();
    let enrollments = (0..corpus.n_speakers())
        .map(|s| Ok((s, corpus.utterance(s, ENROLL_INDEX, cfg.data.enroll_s)?)))
        .collect::<Result<Vec<_>>>()?;
    variants_for(&enrollments, model, cfg.data.seed)
}

/// Augmented-variant embeddings for the given `(speaker, enrollment)` pairs.
pub fn variants_for(
    enrollments: &[(usize, AudioBuffer)],
    model: &EmbedderModel,
    seed: u64,
) -> Result<BTreeMap<usize, Vec<SpeakerEmbedding>>> {
    let mut out = BTreeMap::new();
    for (s, enroll) in enrollments {
        let seed = rng::derive_str(seed, &clip_id(*s, ENROLL_INDEX));
        let variants = augment_enrollment(enroll, EMBEDDING_VARIANTS, seed)
            .iter()
            .map(|a| embed(model, a))
            .collect::<Result<Vec<_>>>()?;
        out.insert(*s, variants);
    }
    Ok(out)
}

/// Clean-enrollment embedding per speaker.
pub fn enrollment_embeddings(cfg: &DeskConfig, model: &EmbedderModel) -> Result<Vec<SpeakerEmbedding>> {
    let corpus = cfg.data.corpus();
    (0..corpus.n_speakers())
        .map(|s| embed(model, &corpus.utterance(s, ENROLL_INDEX, cfg.data.enroll_s)?))
        .collect()
}

/// Every planned segment with features and both target streams.
pub fn build_training_set(
    cfg: &DeskConfig,
    variants: &BTreeMap<usize, Vec<SpeakerEmbedding>>,
) -> Result<Vec<SegmentData<f32>>> {
    let records = plan_dataset(&cfg.data, None)?;
    let extractor = FeatureExtractor::<f64>::new(AnalysisConfig::default())?;
    let mut cache = ClipCache::new();
    records
        .iter()
        .map(|r| {
            let triple = realize(r, &mut cache)?;
            SegmentData::prepare(r.id.clone(), r.split, &triple, &variants[&r.target_speaker], &extractor)
        })
        .collect()
}

/// Training set from a directory written by
/// [`generate_dataset`](crate::datagen::generate_dataset): the WAV triples
/// listed in `manifest.jsonl`, with each segment's target-speaker variants.
pub fn load_training_set(
    dir: &Path,
    variants: &BTreeMap<usize, Vec<SpeakerEmbedding>>,
) -> Result<Vec<SegmentData<f32>>> {
    let records = read_manifest(dir.join("manifest.jsonl"))?;
    let extractor = FeatureExtractor::<f64>::new(AnalysisConfig::default())?;
    records
        .iter()
        .map(|r| {
            let paths = r
                .outputs
                .as_ref()
                .ok_or_else(|| Error::contract(format!("manifest record {} has no output files", r.id)))?;
            let z = variants
                .get(&r.target_speaker)
                .ok_or_else(|| Error::contract(format!("no enrollment embeddings for {}", speaker_id(r.target_speaker))))?;
            SegmentData::from_references(
                r.id.clone(),
                r.split,
                &read_wav(dir.join(&paths.mixture))?,
                &read_wav(dir.join(&paths.personalized))?,
                &read_wav(dir.join(&paths.non_personalized))?,
                z,
                &extractor,
            )
        })
        .collect()
}

/// Two-speaker mixtures built from utterances never used in training, with
/// a scheduled-mode flag sequence for each.
pub fn held_out_items(cfg: &DeskConfig, embeddings: &[SpeakerEmbedding]) -> Result<Vec<EvalItem>> {
    let corpus: ToyCorpus = cfg.data.corpus();
    let n_spk = corpus.n_speakers();
    let mut items = Vec::with_capacity(cfg.test_mixtures);
    for i in 0..cfg.test_mixtures {
        let seed = rng::derive_str(cfg.data.seed ^ 0x7e57, &format!("test{i}"));
        let target = i % n_spk;
        let interferer = (target + 1 + (seed % (n_spk as u64 - 1)) as usize) % n_spk;
        let kind = if i % 3 == 2 {
            SegmentType::Alternating
        } else {
            SegmentType::Overlapping
        };
        let clip = |s: usize, k: usize| corpus.utterance(s, HELD_OUT_INDEX + 10 * i + k, cfg.test_s);
        let t = vec![clip(target, 0)?, clip(target, 1)?];
        let f = vec![clip(interferer, 0)?, clip(interferer, 1)?];
        let noise = vec![noise_clip(i % cfg.data.n_noise.max(1), cfg.test_s, seed)];
        let spec = MixtureSpec::sample(kind, cfg.test_s, seed);
        let triple = synthesize_mixture(&t, &f, &noise, &spec)?;
        let n_frames = AnalysisConfig::default().n_frames(triple.mixture.len());
        let schedule = sample_schedule(n_frames, DEFAULT_MIN_RUN.min(n_frames), seed)?;
        items.push(EvalItem {
            id: format!("test{i:02}_{}_{}", speaker_id(target), speaker_id(interferer)),
            triple,
            embedding: embeddings[target].clone(),
            schedule: Some(schedule),
        });
    }
    Ok(items)
}
