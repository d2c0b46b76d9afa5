use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame timing and band layout of the analysis front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    /// samples per frame (10 ms at 48 kHz)
    pub frame_hop: usize,
    /// 20 ms sine window
    pub window_len: usize,
    /// end-to-end look-ahead in frames (transform window + conv look-ahead)
    pub lookahead_frames: usize,
    pub n_bands: usize,
    pub fft_len: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            frame_hop: 480,
            window_len: 960,
            lookahead_frames: 3,
            n_bands: 32,
            fft_len: 960,
        }
    }
}

impl AnalysisConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Filterbank-only validation; the band count may differ from 32 here.
    pub fn validate_bands(&self) -> Result<()> {
        if self.n_bands < 2 {
            return Err(Error::config(format!("n_bands = {} (need >= 2)", self.n_bands)));
        }
        if self.fft_len == 0 || self.fft_len % 2 != 0 {
            return Err(Error::config(format!("fft_len = {} must be even", self.fft_len)));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        Ok(())
    }

    /// Full validation for the feature pipeline.
    pub fn validate(&self) -> Result<()> {
        self.validate_bands()?;
        if self.window_len != 2 * self.frame_hop {
            return Err(Error::config(format!(
                "window_len {} must equal 2 * frame_hop {}",
                self.window_len, self.frame_hop
            )));
        }
        if self.fft_len < self.window_len {
            return Err(Error::config("fft_len shorter than the window"));
        }
        if self.n_bands != super::N_BANDS {
            return Err(Error::config(format!(
                "the feature pipeline uses {} bands, got {}",
                super::N_BANDS,
                self.n_bands
            )));
        }
        Ok(())
    }

    pub fn lookahead_ms(&self) -> f64 {
        self.lookahead_frames as f64 * self.frame_hop as f64 * 1000.0 / self.sample_rate as f64
    }

    /// First sample covered by the analysis window of `frame`.
    pub fn window_start(&self, frame: usize) -> isize {
        (frame * self.frame_hop + self.frame_hop) as isize - self.window_len as isize
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        n_samples / self.frame_hop
    }
}
