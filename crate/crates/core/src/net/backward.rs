use crate::error::{Error, Result};
use crate::postproc::EnhancerOutput;
use crate::scalar::{axpy, Real};

use super::forward::{row, ForwardCache};
use super::{NetParams, Tensor};

/// Accumulates the gradient of one sigmoid head.
fn head_backward<T: Real>(
    w: &Tensor<T>,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
    out: &[T],
    d_out: &[T],
    h: &[T],
    dh: &mut [T],
) {
    let hd = h.len();
    for (i, (&y, &dy)) in out.iter().zip(d_out).enumerate() {
        let d = dy * y * (T::one() - y);
        if d == T::zero() {
            continue;
        }
        gb.data[i] += d;
        axpy(d, h, &mut gw.data[i * hd..(i + 1) * hd]);
        axpy(d, &w.data[i * hd..(i + 1) * hd], dh);
    }
}

/// Gradient of `x -> tanh(conv(x))` given the gradient at its output.
/// `input` and `output` are `n x in_dim` / `n x out_dim` row-major buffers;
/// `d_input` is accumulated when provided.
fn conv_backward<T: Real>(
    w: &Tensor<T>,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
    input: &[T],
    output: &[T],
    d_output: &[T],
    mut d_input: Option<&mut [T]>,
    n: usize,
) {
    let (out_dim, in_dim) = (w.dims[0], w.dims[2]);
    for t in 0..n {
        for o in 0..out_dim {
            let y = output[t * out_dim + o];
            let d = d_output[t * out_dim + o] * (T::one() - y * y);
            if d == T::zero() {
                continue;
            }
            gb.data[o] += d;
            for k in 0..3 {
                let Some(span) = row(t as isize - 1 + k as isize, n, in_dim) else {
                    continue;
                };
                let wo = (o * 3 + k) * in_dim..(o * 3 + k + 1) * in_dim;
                axpy(d, &input[span.clone()], &mut gw.data[wo.clone()]);
                if let Some(di) = d_input.as_deref_mut() {
                    axpy(d, &w.data[wo], &mut di[span]);
                }
            }
        }
    }
}

/// Reverse-mode gradients of the parameters given `d loss / d output` for
/// every frame of a cached forward pass.
pub fn backward<T: Real>(
    params: &NetParams<T>,
    cache: &ForwardCache<T>,
    grads_out: &[EnhancerOutput<T>],
) -> Result<NetParams<T>> {
    let n = cache.n;
    if grads_out.len() != n {
        return Err(Error::contract(format!(
            "{} output gradients for {n} frames",
            grads_out.len()
        )));
    }
    let cfg = params.config;
    let (c, hd, layers) = (cfg.conv_channels, cfg.gru_hidden, cfg.gru_layers);
    let mut g = params.zeros_like();

    let top = &cache.h[layers - 1];
    let mut d_h = vec![T::zero(); n * hd];
    for t in 0..n {
        let (out, d_out) = (&cache.outputs[t], &grads_out[t]);
        let h = &top[(t + 1) * hd..(t + 2) * hd];
        let dh = &mut d_h[t * hd..(t + 1) * hd];
        head_backward(&params.gain_w, &mut g.gain_w, &mut g.gain_b, &out.gains, &d_out.gains, h, dh);
        head_backward(
            &params.strength_w,
            &mut g.strength_w,
            &mut g.strength_b,
            &out.strengths,
            &d_out.strengths,
            h,
            dh,
        );
        head_backward(&params.vad_w, &mut g.vad_w, &mut g.vad_b, &[out.vad], &[d_out.vad], h, dh);
    }

    let mut gates_i = vec![T::zero(); 3 * hd];
    let mut gates_h = vec![T::zero(); 3 * hd];
    let mut carry = vec![T::zero(); hd];
    let mut next_carry = vec![T::zero(); hd];
    let mut dh = vec![T::zero(); hd];
    for l in (0..layers).rev() {
        let p = &params.gru[l];
        let gp = &mut g.gru[l];
        let in_dim = cfg.gru_input(l);
        let mut d_in = vec![T::zero(); n * in_dim];
        carry.iter_mut().for_each(|v| *v = T::zero());
        for t in (0..n).rev() {
            let span = t * hd..(t + 1) * hd;
            let hp = &cache.h[l][span.clone()];
            let (r, z, cand, hn) = (
                &cache.r[l][span.clone()],
                &cache.z[l][span.clone()],
                &cache.cand[l][span.clone()],
                &cache.hn[l][span],
            );
            for j in 0..hd {
                dh[j] = d_h[t * hd + j] + carry[j];
                let dn = dh[j] * (T::one() - z[j]);
                let dz = dh[j] * (hp[j] - cand[j]);
                let dan = dn * (T::one() - cand[j] * cand[j]);
                let dar = dan * hn[j] * r[j] * (T::one() - r[j]);
                let daz = dz * z[j] * (T::one() - z[j]);
                gates_i[j] = dar;
                gates_i[hd + j] = daz;
                gates_i[2 * hd + j] = dan;
                gates_h[j] = dar;
                gates_h[hd + j] = daz;
                gates_h[2 * hd + j] = dan * r[j];
                next_carry[j] = dh[j] * z[j];
            }
            let input: &[T] = if l == 0 {
                &cache.u[t * in_dim..(t + 1) * in_dim]
            } else {
                &cache.h[l - 1][(t + 1) * hd..(t + 2) * hd]
            };
            let di = &mut d_in[t * in_dim..(t + 1) * in_dim];
            for k in 0..3 * hd {
                let (a, b) = (gates_i[k], gates_h[k]);
                if a != T::zero() {
                    gp.b_ih.data[k] += a;
                    axpy(a, input, &mut gp.w_ih.data[k * in_dim..(k + 1) * in_dim]);
                    axpy(a, &p.w_ih.data[k * in_dim..(k + 1) * in_dim], di);
                }
                if b != T::zero() {
                    gp.b_hh.data[k] += b;
                    axpy(b, hp, &mut gp.w_hh.data[k * hd..(k + 1) * hd]);
                    axpy(b, &p.w_hh.data[k * hd..(k + 1) * hd], &mut next_carry);
                }
            }
            std::mem::swap(&mut carry, &mut next_carry);
        }
        d_h = d_in;
    }

    // d_h now holds the gradient w.r.t. [conv2 output; condition] per frame
    let i0 = cfg.gru_input(0);
    let mut a2 = vec![T::zero(); n * c];
    let mut d_a2 = vec![T::zero(); n * c];
    for t in 0..n {
        a2[t * c..(t + 1) * c].copy_from_slice(&cache.u[t * i0..t * i0 + c]);
        d_a2[t * c..(t + 1) * c].copy_from_slice(&d_h[t * i0..t * i0 + c]);
    }
    let mut d_a1 = vec![T::zero(); n * c];
    conv_backward(
        &params.conv2_w,
        &mut g.conv2_w,
        &mut g.conv2_b,
        &cache.a1,
        &a2,
        &d_a2,
        Some(&mut d_a1),
        n,
    );
    conv_backward(
        &params.conv1_w,
        &mut g.conv1_w,
        &mut g.conv1_b,
        &cache.x,
        &cache.a1,
        &d_a1,
        None,
        n,
    );
    Ok(g)
}
