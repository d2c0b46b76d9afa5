//! Corpus cleanup: multi-speaker clip detection and interference selection.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::audio::AudioBuffer;
use crate::embedder::{cosine_similarity, EmbedderModel, SpeakerEmbedding};
use crate::error::Result;

pub const CHUNK_S: f64 = 30.0;
pub const CHUNK_HOP_S: f64 = 15.0;
pub const MULTI_SPEAKER_THRESHOLD: f64 = 0.8;
pub const INTERFERENCE_THRESHOLD: f64 = 0.5;

/// 30 s windows every 15 s that fit entirely inside `n_samples`.
pub fn chunk_spans(n_samples: usize, sample_rate: u32) -> Vec<Range<usize>> {
    let chunk = (CHUNK_S * sample_rate as f64) as usize;
    let hop = (CHUNK_HOP_S * sample_rate as f64) as usize;
    let mut spans = Vec::new();
    let mut start = 0;
    while start + chunk <= n_samples {
        spans.push(start..start + chunk);
        start += hop;
    }
    spans
}

/// Mean pairwise cosine similarity of chunk embeddings; a clip is flagged as
/// multi-speaker when it falls below 0.8. Clips with fewer than two chunks
/// cannot be compared and are reported as single-speaker with similarity 1.
pub fn detect_multispeaker(clip: &AudioBuffer, embedder: &EmbedderModel) -> Result<(bool, f64)> {
    let spans = chunk_spans(clip.len(), clip.sample_rate);
    if spans.len() < 2 {
        return Ok((false, 1.0));
    }
    let embeddings: Vec<SpeakerEmbedding> = spans
        .into_iter()
        .map(|s| crate::embedder::embed(embedder, &AudioBuffer::at_48k(clip.samples[s].to_vec())))
        .collect::<Result<_>>()?;
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            sum += cosine_similarity(&embeddings[i], &embeddings[j])?;
            pairs += 1;
        }
    }
    let avg = sum / pairs as f64;
    Ok((avg < MULTI_SPEAKER_THRESHOLD, avg))
}

/// Speakers whose clips average a cosine similarity below 0.5 to the target.
/// Speakers with no clips are skipped.
pub fn select_interference(
    target: &SpeakerEmbedding,
    candidates: &BTreeMap<String, Vec<SpeakerEmbedding>>,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (speaker, clips) in candidates {
        if clips.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for c in clips {
            sum += cosine_similarity(target, c)?;
        }
        if sum / (clips.len() as f64) < INTERFERENCE_THRESHOLD {
            out.push(speaker.clone());
        }
    }
    Ok(out)
}
