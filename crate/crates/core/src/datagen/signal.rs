//! Signal generators and filters used for corpus synthesis and augmentation.

use num_complex::Complex;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::rng::Rng;

pub const FS: f64 = 48_000.0;

pub fn white_noise(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Pink (1/f) noise via the Voss-McCartney/Kellet filter on white noise.
pub fn pink_noise(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out * 0.2
        })
        .collect()
}

/// Brown (integrated, leaky) noise.
pub fn brown_noise(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            acc = 0.995 * acc + 0.1 * w;
            acc
        })
        .collect()
}

/// Room impulse response: unit direct path followed by exponentially decaying
/// white noise reaching -60 dB after `rt60` seconds. The tail carries the same
/// energy as the direct path; the result is scaled to unit energy.
pub fn synthetic_rir(rng: &mut Rng, rt60: f64) -> Vec<f64> {
    let len = ((rt60 * FS) as usize).max(2);
    let decay = -3.0 * std::f64::consts::LN_10 / (rt60 * FS);
    let mut h: Vec<f64> = (0..len)
        .map(|n| {
            let w: f64 = StandardNormal.sample(rng);
            w * (decay * n as f64).exp()
        })
        .collect();
    h[0] = 0.0;
    let tail: f64 = h.iter().map(|v| v * v).sum();
    let g = if tail > 0.0 { 1.0 / tail.sqrt() } else { 0.0 };
    h.iter_mut().for_each(|v| *v *= g);
    h[0] = 1.0;
    let total: f64 = h.iter().map(|v| v * v).sum();
    let s = 1.0 / total.sqrt();
    h.iter_mut().for_each(|v| *v *= s);
    h
}

/// Linear convolution truncated to `x.len()` samples, via one large FFT.
pub fn convolve_truncated(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut b: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(h.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..x.len()].iter().map(|c| c.re * scale).collect()
}

/// Direct-form-I biquad with normalised coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    /// Second-order low-pass section (RBJ cookbook).
    pub fn lowpass(fc: f64, q: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / FS;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let b1 = 1.0 - c;
        Self::normalized([b1 / 2.0, b1, b1 / 2.0], 1.0 + alpha, -2.0 * c, 1.0 - alpha)
    }

    /// Peaking EQ (RBJ cookbook).
    pub fn peaking(fc: f64, gain_db: f64, q: f64) -> Self {
        let amp = 10f64.powf(gain_db / 40.0);
        let w0 = 2.0 * std::f64::consts::PI * fc / FS;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::normalized(
            [1.0 + alpha * amp, -2.0 * c, 1.0 - alpha * amp],
            1.0 + alpha / amp,
            -2.0 * c,
            1.0 - alpha / amp,
        )
    }

    /// Two-pole resonator with unit peak gain, used as a formant.
    pub fn resonator(fc: f64, bandwidth: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth / FS).exp();
        let w0 = 2.0 * std::f64::consts::PI * fc / FS;
        let a1 = -2.0 * r * w0.cos();
        let a2 = r * r;
        // gain normalisation at the resonance
        let z = Complex::from_polar(1.0, -w0);
        let den = Complex::new(1.0, 0.0) + z * a1 + z * z * a2;
        let g = den.norm();
        Self {
            b: [g, 0.0, 0.0],
            a: [a1, a2],
        }
    }

    pub fn process(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }

    pub fn response(&self, f: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / FS;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = Complex::new(self.b[0], 0.0) + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }
}

/// 4th-order Butterworth low-pass as two cascaded sections.
pub fn butterworth4_lowpass(fc: f64) -> [Biquad; 2] {
    [Biquad::lowpass(fc, 0.541_196_1), Biquad::lowpass(fc, 1.306_563)]
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }
}

pub fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_direct_sum() {
        let x: Vec<f64> = (0..300).map(|n| ((n * 13) % 7) as f64 - 3.0).collect();
        let h = [0.5, -0.25, 0.125, 1.0];
        let y = convolve_truncated(&x, &h);
        for n in 0..x.len() {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                if n >= k {
                    acc += hk * x[n - k];
                }
            }
            assert!((y[n] - acc).abs() < 1e-9);
        }
    }

    #[test]
    fn rir_has_unit_energy_and_decays() {
        let mut rng = crate::rng::rng(1);
        let h = synthetic_rir(&mut rng, 0.3);
        let e: f64 = h.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-12);
        let n = h.len();
        let early: f64 = h[1..n / 4].iter().map(|v| v * v).sum();
        let late: f64 = h[3 * n / 4..].iter().map(|v| v * v).sum();
        assert!(early > 100.0 * late);
    }

    #[test]
    fn butterworth_is_3db_at_cutoff() {
        let lp = butterworth4_lowpass(4000.0);
        let g: f64 = lp.iter().map(|s| s.response(4000.0)).product();
        assert!((20.0 * g.log10() + 3.0103).abs() < 0.05);
        let g1: f64 = lp.iter().map(|s| s.response(100.0)).product();
        assert!((g1 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn peaking_eq_hits_its_gain() {
        let f = Biquad::peaking(1000.0, 6.0, 1.0);
        assert!((20.0 * f.response(1000.0).log10() - 6.0).abs() < 1e-6);
        let r = Biquad::resonator(700.0, 80.0);
        assert!((r.response(700.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pink_noise_tilts_down() {
        let mut rng = crate::rng::rng(2);
        let x = pink_noise(&mut rng, 1 << 16);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let band = |lo: usize, hi: usize| buf[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>() / (hi - lo) as f64;
        // ~10 dB per decade
        let low = band(100, 200);
        let high = band(10_000, 20_000);
        let slope = 10.0 * (low / high).log10() / 2.0;
        assert!((slope - 10.0).abs() < 2.0, "{slope}");
    }
}
