//! Additive angular margin softmax.

use crate::scalar::{dot, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct AamOutput<T> {
    pub loss: T,
    /// gradient w.r.t. the (unnormalised) embedding
    pub d_embedding: Vec<T>,
    /// gradient w.r.t. the (unnormalised) class weight rows, row-major `[classes][dim]`
    pub d_class_weights: Vec<T>,
}

fn normalize<T: Real>(v: &[T]) -> (Vec<T>, T) {
    let n = dot(v, v).sqrt();
    (v.iter().map(|&x| x / n).collect(), n)
}

/// Gradient through `v / |v|`: `(g - (g . v_hat) v_hat) / |v|`.
fn through_normalize<T: Real>(g: &[T], v_hat: &[T], norm: T) -> Vec<T> {
    let proj = dot(g, v_hat);
    g.iter().zip(v_hat).map(|(&gi, &vi)| (gi - proj * vi) / norm).collect()
}

/// Loss `-log(e^{s cos(theta_y + m)} / (e^{s cos(theta_y + m)} + sum_{j != y} e^{s cos theta_j}))`
/// where `theta_j` is the angle between the embedding and class row `j`. Both
/// the embedding and the rows are normalised internally, and the returned
/// gradients are taken w.r.t. the raw inputs.
pub fn aam_softmax_loss<T: Real>(
    embedding: &[T],
    label: usize,
    class_weights: &[T],
    margin: T,
    scale: T,
) -> AamOutput<T> {
    let dim = embedding.len();
    let n_classes = class_weights.len() / dim;
    assert!(label < n_classes, "label {label} out of {n_classes} classes");
    let (e_hat, e_norm) = normalize(embedding);
    let rows: Vec<(Vec<T>, T)> = class_weights.chunks_exact(dim).map(normalize).collect();
    let cos: Vec<T> = rows.iter().map(|(w, _)| dot(&e_hat, w)).collect();

    let (sin_m, cos_m) = margin.sin_cos();
    let cy = cos[label].max(-T::one()).min(T::one());
    let sin_y = (T::one() - cy * cy).max(T::lit(1e-24)).sqrt();
    let logits: Vec<T> = (0..n_classes)
        .map(|j| {
            if j == label {
                scale * (cy * cos_m - sin_y * sin_m)
            } else {
                scale * cos[j]
            }
        })
        .collect();
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: T = exps.iter().copied().sum();
    let loss = -(logits[label] - max) + z.ln();

    // dL/dcos_j
    let d_cos: Vec<T> = (0..n_classes)
        .map(|j| {
            let p = exps[j] / z;
            if j == label {
                (p - T::one()) * scale * (cos_m + cy * sin_m / sin_y)
            } else {
                p * scale
            }
        })
        .collect();

    let mut g_ehat = vec![T::zero(); dim];
    let mut d_class_weights = Vec::with_capacity(class_weights.len());
    for (j, (w_hat, w_norm)) in rows.iter().enumerate() {
        crate::scalar::axpy(d_cos[j], w_hat, &mut g_ehat);
        let g_what: Vec<T> = e_hat.iter().map(|&e| d_cos[j] * e).collect();
        d_class_weights.extend(through_normalize(&g_what, w_hat, *w_norm));
    }
    AamOutput {
        loss,
        d_embedding: through_normalize(&g_ehat, &e_hat, e_norm),
        d_class_weights,
    }
}
