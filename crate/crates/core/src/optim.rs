//! Adam over flat parameter tensors, plus global-norm gradient clipping.

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Adam<T = f32> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T, beta1: T, beta2: T) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: T::lit(1e-8),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// One update. `params[i]` and `grads[i]` must keep the same shapes across calls.
    pub fn update(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = T::one() - self.beta1.powi(self.step);
        let bc2 = T::one() - self.beta2.powi(self.step);
        let step_size = self.lr / bc1;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (T::one() - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (T::one() - self.beta2) * g[j] * g[j];
                p[j] -= step_size * m[j] / ((v[j] / bc2).sqrt() + self.eps);
            }
        }
    }
}

pub fn global_norm<T: Real>(grads: &[&[T]]) -> T {
    grads
        .iter()
        .map(|g| crate::scalar::dot(g, g))
        .sum::<T>()
        .sqrt()
}

/// Rescales in place so the global L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm<T: Real>(grads: &mut [&mut [T]], max_norm: T) -> T {
    let norm = grads
        .iter()
        .map(|g| crate::scalar::dot(g, g))
        .sum::<T>()
        .sqrt();
    if norm > max_norm && norm > T::zero() {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut x = vec![3.0f64, -2.0];
        let mut opt = Adam::new(0.1, 0.9, 0.999);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.update(&mut [&mut x], &[&g]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn zero_lr_leaves_parameters_untouched() {
        let mut x = vec![1.5f32, 2.5];
        let mut opt = Adam::new(0.0, 0.9, 0.999);
        opt.update(&mut [&mut x], &[&[1.0, -1.0]]);
        assert_eq!(x, vec![1.5, 2.5]);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut a = vec![3.0f64];
        let mut b = vec![4.0f64];
        let n = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-12 && (b[0] - 0.8).abs() < 1e-12);
    }
}
