//! Synthetic training data: toy voices, noise, mixtures, augmentation and
//! the cleanup detectors, plus the manifest that makes every segment
//! reproducible from its record.

pub mod augment;
pub mod cleanup;
pub mod mixture;
pub mod noise;
pub mod signal;
pub mod voices;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioBuffer, WavFormat};
use crate::conditioning::{sample_schedule, DEFAULT_MIN_RUN};
use crate::dsp::{write_feature_dump, AnalysisConfig, FeatureExtractor};
use crate::error::{Error, Result};
use crate::rng;

pub use augment::{apply_augmentations, apply_params, AugmentParams};
pub use cleanup::{chunk_spans, detect_multispeaker, select_interference};
pub use mixture::{
    measure_sir, measure_snr, segment_plan, synthesize_mixture, MixtureSpec, MixtureTriple, SegmentType,
};
pub use noise::{noise_clip, noise_id, NoiseKind};
pub use voices::{clip_id, parse_clip_id, speaker_id, ToyCorpus};

/// First utterance index reserved for enrollment material.
pub const ENROLL_INDEX: usize = 1000;
/// First utterance index reserved for held-out evaluation material.
pub const HELD_OUT_INDEX: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatagenConfig {
    pub seed: u64,
    pub n_speakers: usize,
    pub segments_per_speaker: usize,
    pub segment_s: f64,
    pub clips_per_speaker: usize,
    pub clip_s: f64,
    pub n_noise: usize,
    pub noise_s: f64,
    pub enroll_s: f64,
    pub validation_fraction: f64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_speakers: 8,
            segments_per_speaker: 8,
            segment_s: 10.0,
            clips_per_speaker: 4,
            clip_s: 6.0,
            n_noise: 10,
            noise_s: 6.0,
            enroll_s: 4.0,
            validation_fraction: 0.1,
        }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 {
            return Err(Error::config("need at least two speakers"));
        }
        if self.clips_per_speaker == 0 || self.n_noise == 0 || self.segments_per_speaker == 0 {
            return Err(Error::config("clip, noise and segment counts must be positive"));
        }
        if !(self.clip_s > 0.0 && self.noise_s > 0.0 && self.segment_s > 0.0) {
            return Err(Error::config("durations must be positive"));
        }
        if self.enroll_s < crate::embedder::MIN_ENROLLMENT_S {
            return Err(Error::config("enrollment must be at least 1 s"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn corpus(&self) -> ToyCorpus {
        ToyCorpus::new(self.n_speakers, self.seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Deterministic hash split of a segment id.
pub fn split_for(id: &str, seed: u64, validation_fraction: f64) -> Split {
    let h = rng::derive_str(rng::derive_str(seed, "split"), id);
    if (h % 10_000) as f64 / 10_000.0 < validation_fraction {
        Split::Validation
    } else {
        Split::Train
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub mixture: PathBuf,
    pub personalized: PathBuf,
    pub non_personalized: PathBuf,
    pub schedule: PathBuf,
    pub features: PathBuf,
}

/// Everything needed to regenerate one segment bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub split: Split,
    pub segment_type: SegmentType,
    pub seed: u64,
    pub snr_db: f64,
    pub sir_db: Option<f64>,
    pub duration_s: f64,
    pub corpus_seed: u64,
    pub n_speakers: usize,
    pub target_speaker: usize,
    pub interference_speaker: Option<usize>,
    pub target_clips: Vec<String>,
    pub interference_clips: Vec<String>,
    pub clip_s: f64,
    pub noise_clip: String,
    pub noise_s: f64,
    pub enrollment_clip: String,
    pub enroll_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputPaths>,
}

impl ManifestRecord {
    pub fn spec(&self) -> MixtureSpec {
        MixtureSpec {
            segment_type: self.segment_type,
            snr_db: self.snr_db,
            sir_db: self.sir_db,
            duration_s: self.duration_s,
            seed: self.seed,
        }
    }
}

/// Lays out segments for every speaker. `eligible[s]` restricts the
/// interferers for speaker `s` (typically from [`select_interference`]);
/// otherwise any other speaker may interfere.
pub fn plan_dataset(
    config: &DatagenConfig,
    eligible: Option<&BTreeMap<usize, Vec<usize>>>,
) -> Result<Vec<ManifestRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    for s in 0..config.n_speakers {
        let plan = segment_plan(config.segments_per_speaker, rng::derive(config.seed, s as u64));
        let others: Vec<usize> = match eligible.and_then(|e| e.get(&s)) {
            Some(list) => list.clone(),
            None => (0..config.n_speakers).filter(|&o| o != s).collect(),
        };
        for (k, &kind) in plan.iter().enumerate() {
            let id = format!("{}_seg{k:03}", speaker_id(s));
            let seed = rng::derive_str(config.seed, &id);
            let mut r = rng::stream(seed, "plan");
            let kind = if kind.is_multi_speaker() && others.is_empty() {
                SegmentType::Single
            } else {
                kind
            };
            let spec = MixtureSpec::sample(kind, config.segment_s, seed);
            let interferer = kind
                .is_multi_speaker()
                .then(|| *others.choose(&mut r).expect("non-empty"));
            let clips = |sp: usize| (0..config.clips_per_speaker).map(|i| clip_id(sp, i)).collect();
            records.push(ManifestRecord {
                split: split_for(&id, config.seed, config.validation_fraction),
                id,
                segment_type: kind,
                seed,
                snr_db: spec.snr_db,
                sir_db: spec.sir_db,
                duration_s: spec.duration_s,
                corpus_seed: config.seed,
                n_speakers: config.n_speakers,
                target_speaker: s,
                interference_speaker: interferer,
                target_clips: clips(s),
                interference_clips: interferer.map(clips).unwrap_or_default(),
                clip_s: config.clip_s,
                noise_clip: noise_id(r.random_range(0..config.n_noise)),
                noise_s: config.noise_s,
                enrollment_clip: clip_id(s, ENROLL_INDEX),
                enroll_s: config.enroll_s,
                outputs: None,
            });
        }
    }
    Ok(records)
}

/// Memoised clip synthesis keyed by id and duration.
#[derive(Debug, Default)]
pub struct ClipCache {
    corpora: HashMap<(u64, usize), ToyCorpus>,
    clips: HashMap<(u64, String, u64), AudioBuffer>,
}

impl ClipCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn corpus(&mut self, seed: u64, n: usize) -> &ToyCorpus {
        self.corpora.entry((seed, n)).or_insert_with(|| ToyCorpus::new(n, seed))
    }

    pub fn speech(&mut self, corpus_seed: u64, n_speakers: usize, id: &str, duration_s: f64) -> Result<AudioBuffer> {
        let key = (corpus_seed, id.to_string(), duration_s.to_bits());
        if let Some(a) = self.clips.get(&key) {
            return Ok(a.clone());
        }
        let a = self.corpus(corpus_seed, n_speakers).utterance_by_id(id, duration_s)?;
        self.clips.insert(key, a.clone());
        Ok(a)
    }

    pub fn noise(&mut self, corpus_seed: u64, id: &str, duration_s: f64) -> Result<AudioBuffer> {
        let index: usize = id
            .strip_prefix("noise")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::contract(format!("malformed noise id {id:?}")))?;
        let key = (corpus_seed, id.to_string(), duration_s.to_bits());
        Ok(self
            .clips
            .entry(key)
            .or_insert_with(|| noise_clip(index, duration_s, corpus_seed))
            .clone())
    }
}

/// Regenerates the mixture triple described by `record`.
pub fn realize(record: &ManifestRecord, cache: &mut ClipCache) -> Result<MixtureTriple> {
    let load = |cache: &mut ClipCache, ids: &[String]| -> Result<Vec<AudioBuffer>> {
        ids.iter()
            .map(|id| cache.speech(record.corpus_seed, record.n_speakers, id, record.clip_s))
            .collect()
    };
    let target = load(cache, &record.target_clips)?;
    let interference = load(cache, &record.interference_clips)?;
    let noise = vec![cache.noise(record.corpus_seed, &record.noise_clip, record.noise_s)?];
    synthesize_mixture(&target, &interference, &noise, &record.spec())
}

pub fn enrollment_audio(record: &ManifestRecord, cache: &mut ClipCache) -> Result<AudioBuffer> {
    cache.speech(record.corpus_seed, record.n_speakers, &record.enrollment_clip, record.enroll_s)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Writes every planned segment to `out_dir` (WAV triple, flag schedule and
/// mixture feature dump), one enrollment WAV per speaker, and
/// `manifest.jsonl`. Returns the records with their output paths filled in.
pub fn generate_dataset(
    config: &DatagenConfig,
    eligible: Option<&BTreeMap<usize, Vec<usize>>>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<ManifestRecord>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir.join("segments"))?;
    std::fs::create_dir_all(out_dir.join("enroll"))?;
    let mut records = plan_dataset(config, eligible)?;
    let mut cache = ClipCache::new();
    let analysis = AnalysisConfig::default();
    let extractor = FeatureExtractor::<f64>::new(analysis)?;
    for s in 0..config.n_speakers {
        let a = cache.speech(config.seed, config.n_speakers, &clip_id(s, ENROLL_INDEX), config.enroll_s)?;
        write_wav(out_dir.join("enroll").join(format!("{}.wav", speaker_id(s))), &a, WavFormat::Float32, 0)?;
    }
    for r in &mut records {
        let triple = realize(r, &mut cache)?;
        let rel = |name: &str| PathBuf::from("segments").join(format!("{}_{name}", r.id));
        let paths = OutputPaths {
            mixture: rel("mix.wav"),
            personalized: rel("pse.wav"),
            non_personalized: rel("nse.wav"),
            schedule: rel("flags.txt"),
            features: rel("feat.bin"),
        };
        write_wav(out_dir.join(&paths.mixture), &triple.mixture, WavFormat::Float32, 0)?;
        write_wav(out_dir.join(&paths.personalized), &triple.personalized_ref, WavFormat::Float32, 0)?;
        write_wav(
            out_dir.join(&paths.non_personalized),
            &triple.non_personalized_ref,
            WavFormat::Float32,
            0,
        )?;
        let frames = extractor.extract(&triple.mixture);
        write_feature_dump(out_dir.join(&paths.features), &frames)?;
        let schedule = sample_schedule(frames.len(), DEFAULT_MIN_RUN.min(frames.len().max(1)), r.seed)?;
        std::fs::write(out_dir.join(&paths.schedule), schedule.to_text())?;
        r.outputs = Some(paths);
    }
    write_manifest(out_dir.join("manifest.jsonl"), &records)?;
    Ok(records)
}
