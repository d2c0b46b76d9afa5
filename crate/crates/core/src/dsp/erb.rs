//! ERB-spaced triangular filterbank.
//!
//! Band centres are uniform on the ERB-rate axis
//! `e(f) = 21.4 * log10(1 + 0.00437 f)` from 0 Hz up to Nyquist. Each band is a
//! hat function between its neighbours' centres, so adjacent bands overlap by
//! half and every FFT bin's weights sum to one.

use crate::error::Result;
use crate::scalar::Real;

use super::config::AnalysisConfig;

pub fn erb_rate(f_hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f_hz).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

#[derive(Clone, Debug)]
pub struct ErbFilterbank<T = f64> {
    /// `[n_bands][n_bins]`
    pub weights: Vec<Vec<T>>,
    pub band_centers: Vec<f64>,
    /// Non-zero support of each band: `weights[b][k] == 0` outside `lo..hi`.
    support: Vec<(usize, usize)>,
}

impl<T: Real> ErbFilterbank<T> {
    pub fn new(config: &AnalysisConfig) -> Result<Self> {
        build_erb_filterbank(config)
    }

    pub fn n_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn support(&self, band: usize) -> std::ops::Range<usize> {
        let (lo, hi) = self.support[band];
        lo..hi
    }

    /// `out[b] = sum_k weights[b][k] * x[k]`
    pub fn project(&self, per_bin: &[T]) -> Vec<T> {
        (0..self.n_bands())
            .map(|b| {
                self.support(b)
                    .map(|k| self.weights[b][k] * per_bin[k])
                    .sum()
            })
            .collect()
    }

    /// `out[k] = sum_b weights[b][k] * v[b]`
    pub fn interpolate(&self, per_band: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_bins()];
        for (b, &v) in per_band.iter().enumerate() {
            for k in self.support(b) {
                out[k] += self.weights[b][k] * v;
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> ErbFilterbank<U> {
        ErbFilterbank {
            weights: self
                .weights
                .iter()
                .map(|row| crate::scalar::cast_slice(row))
                .collect(),
            band_centers: self.band_centers.clone(),
            support: self.support.clone(),
        }
    }
}

pub fn build_erb_filterbank<T: Real>(config: &AnalysisConfig) -> Result<ErbFilterbank<T>> {
    config.validate_bands()?;
    let n_bands = config.n_bands;
    let n_bins = config.n_bins();
    let nyquist = config.sample_rate as f64 / 2.0;
    let e_max = erb_rate(nyquist);
    let centers_e: Vec<f64> = (0..n_bands)
        .map(|b| e_max * b as f64 / (n_bands - 1) as f64)
        .collect();
    let mut weights = vec![vec![T::zero(); n_bins]; n_bands];
    for k in 0..n_bins {
        let f = k as f64 * config.sample_rate as f64 / config.fft_len as f64;
        let e = erb_rate(f).min(e_max);
        // locate the pair of centres bracketing e
        let pos = e / e_max * (n_bands - 1) as f64;
        let lo = (pos.floor() as usize).min(n_bands - 2);
        let frac = (e - centers_e[lo]) / (centers_e[lo + 1] - centers_e[lo]);
        let frac = frac.clamp(0.0, 1.0);
        // hat functions: the two weights are exact complements
        weights[lo][k] = T::lit(1.0 - frac);
        weights[lo + 1][k] += T::lit(frac);
    }
    let support = weights
        .iter()
        .map(|row| {
            let lo = row.iter().position(|w| *w > T::zero()).unwrap_or(0);
            let hi = row.iter().rposition(|w| *w > T::zero()).map_or(lo, |i| i + 1);
            (lo, hi)
        })
        .collect();
    Ok(ErbFilterbank {
        weights,
        band_centers: centers_e.iter().map(|&e| erb_rate_to_hz(e)).collect(),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_monotone_centres() {
        let fb: ErbFilterbank = build_erb_filterbank(&AnalysisConfig::default()).unwrap();
        assert_eq!(fb.n_bands(), 32);
        assert_eq!(fb.n_bins(), 481);
        for k in 0..fb.n_bins() {
            let s: f64 = (0..32).map(|b| fb.weights[b][k]).sum();
            assert!((s - 1.0).abs() < 1e-9, "bin {k}: {s}");
        }
        assert!(fb.weights.iter().flatten().all(|&w| w >= 0.0));
        for w in fb.band_centers.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(fb.band_centers[0], 0.0);
        assert!(fb.band_centers[0] < fb.band_centers[31]);
        assert!(fb.band_centers[31] <= 24_000.0 + 1e-6);
    }

    #[test]
    fn every_band_touches_at_least_one_bin() {
        let fb: ErbFilterbank = build_erb_filterbank(&AnalysisConfig::default()).unwrap();
        for b in 0..32 {
            assert!(fb.weights[b].iter().any(|&w| w > 0.0), "band {b} empty");
        }
    }

    #[test]
    fn two_bands_are_complementary_ramps() {
        let cfg = AnalysisConfig {
            n_bands: 2,
            ..Default::default()
        };
        let fb: ErbFilterbank = build_erb_filterbank(&cfg).unwrap();
        let e_max = erb_rate(24_000.0);
        for k in 0..fb.n_bins() {
            let f = k as f64 * 50.0;
            // independent evaluation: the upper band is the normalised ERB rate
            let expect_hi = erb_rate(f) / e_max;
            assert!((fb.weights[1][k] - expect_hi).abs() < 1e-12);
            assert!((fb.weights[0][k] + fb.weights[1][k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let cfg = AnalysisConfig {
            n_bands: 1,
            ..Default::default()
        };
        assert!(build_erb_filterbank::<f64>(&cfg).is_err());
        let cfg = AnalysisConfig {
            fft_len: 7,
            ..Default::default()
        };
        assert!(build_erb_filterbank::<f64>(&cfg).is_err());
    }

    #[test]
    fn project_and_interpolate_are_adjoint() {
        let fb: ErbFilterbank = build_erb_filterbank(&AnalysisConfig::default()).unwrap();
        let x: Vec<f64> = (0..481).map(|k| ((k * 7) % 13) as f64).collect();
        let v: Vec<f64> = (0..32).map(|b| (b as f64).sin()).collect();
        let lhs: f64 = fb.project(&x).iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = fb.interpolate(&v).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
