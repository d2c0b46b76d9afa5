pub mod audio;
pub mod conditioning;
pub mod datagen;
pub mod desk;
pub mod dsp;
pub mod embedder;
pub mod error;
pub mod harness;
pub mod net;
pub mod objectives;
pub mod optim;
pub mod postproc;
pub mod rng;
pub mod scalar;
pub mod trainer;

pub use audio::AudioBuffer;
pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations (gradient checks, metrics).
pub mod f64 {
    pub type AudioBuffer = crate::audio::AudioBuffer<f64>;
    pub type NetParams = crate::net::NetParams<f64>;
    pub type EnhancerOutput = crate::postproc::EnhancerOutput<f64>;
    pub type FrameFeatures = crate::dsp::FrameFeatures<f64>;
    pub type SpeakerEmbedding = crate::embedder::SpeakerEmbedding<f64>;
    pub type ConditionVector = crate::conditioning::ConditionVector<f64>;
}

/// Single-precision instantiations (training and streaming inference).
pub mod f32 {
    pub type AudioBuffer = crate::audio::AudioBuffer<f32>;
    pub type NetParams = crate::net::NetParams<f32>;
    pub type EnhancerOutput = crate::postproc::EnhancerOutput<f32>;
    pub type FrameFeatures = crate::dsp::FrameFeatures<f32>;
    pub type SpeakerEmbedding = crate::embedder::SpeakerEmbedding<f32>;
    pub type ConditionVector = crate::conditioning::ConditionVector<f32>;
    pub type StreamingNet = crate::net::StreamingNet<f32>;
}
