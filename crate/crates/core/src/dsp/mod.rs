//! Analysis front end: ERB bands, pitch tracking and per-frame features.

pub mod config;
pub mod erb;
pub mod features;
pub mod pitch;
pub mod stft;

pub use config::AnalysisConfig;
pub use erb::{build_erb_filterbank, ErbFilterbank};
pub use features::{
    band_energies, extract_features, read_feature_dump, write_feature_dump, FeatureExtractor,
    FrameAnalysis, FrameFeatures,
};
pub use pitch::{estimate_pitch, estimate_pitch_with, pitch_coherence, PitchEstimate};
pub use stft::{analyze_frame, sine_window, Analyzer, Spectrum};

pub const N_BANDS: usize = 32;
/// 32 band magnitudes + 32 coherences + 4 general features
pub const FEATURE_DIM: usize = 2 * N_BANDS + 4;
